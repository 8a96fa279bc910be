//! Interval extraction, normalization, programming and tiling.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ForestModel, Node, TreeModel};
use super::CompileError;
use crate::device_model::conductance::{level_index, level_value};
use crate::device_model::{bound_to_conductance, TechParams};
use crate::interval::Interval;
use crate::matchline::{CellProgram, RowProgram};

/// Cells per match-line segment unless configured otherwise.
pub const DEFAULT_MAX_SEGMENT: usize = 64;

/// The conjunction of per-feature intervals leading to one leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalWord {
    pub intervals: Vec<Interval>,
    pub class_label: usize,
    pub tree_id: usize,
    /// Position of the leaf in a left-first preorder walk of its tree.
    pub leaf_id: usize,
}

impl IntervalWord {
    pub fn n_inequalities(&self) -> usize {
        self.intervals.iter().map(Interval::n_inequalities).sum()
    }

    pub fn matches(&self, x: &[f64]) -> bool {
        crate::matchline::row_match_ideal(&self.intervals, x)
    }
}

/// One word per leaf, in left-first preorder. Bounds stay in raw feature
/// units: a left edge caps the feature at the threshold, a right edge floors
/// it there.
pub fn extract_paths(tree: &TreeModel, n_features: usize) -> Result<Vec<IntervalWord>, CompileError> {
    tree.validate(n_features, usize::MAX)?;
    let mut words = Vec::with_capacity(tree.n_leaves());
    let mut stack = vec![(tree.root(), vec![Interval::WILDCARD; n_features])];
    while let Some((i, intervals)) = stack.pop() {
        match tree.nodes[i] {
            Node::Leaf { class_label } => {
                if let Some(f) = intervals
                    .iter()
                    .position(|iv| matches!((iv.lb, iv.hb), (Some(l), Some(h)) if l > h))
                {
                    return Err(CompileError::EmptyLeaf {
                        tree: tree.tree_id,
                        node: i,
                        feature: f,
                    });
                }
                words.push(IntervalWord {
                    intervals,
                    class_label,
                    tree_id: tree.tree_id,
                    leaf_id: words.len(),
                });
            }
            Node::Internal {
                feature_index,
                threshold,
                left_child,
                right_child,
            } => {
                let mut right = intervals.clone();
                right[feature_index].raise_lb(threshold);
                let mut left = intervals;
                left[feature_index].lower_hb(threshold);
                stack.push((right_child, right));
                stack.push((left_child, left));
            }
        }
    }
    Ok(words)
}

fn is_degenerate(range: [f64; 2]) -> bool {
    range[1] <= range[0]
}

/// Maps a raw value into `[0, 1]` with clamping; degenerate ranges map to 0.
pub fn normalize_value(x: f64, range: [f64; 2]) -> f64 {
    if is_degenerate(range) {
        return 0.0;
    }
    ((x - range[0]) / (range[1] - range[0])).clamp(0.0, 1.0)
}

pub fn denormalize_value(t: f64, range: [f64; 2]) -> f64 {
    range[0] + t * (range[1] - range[0])
}

pub fn normalize_query(x: &[f64], ranges: &[[f64; 2]]) -> Vec<f64> {
    x.iter()
        .zip(ranges)
        .map(|(&v, &r)| normalize_value(v, r))
        .collect()
}

/// Affine map of every bound into `[0, 1]`. Features with a degenerate range
/// become wildcards; their indices are returned so callers can warn.
pub fn normalize(word: &IntervalWord, ranges: &[[f64; 2]]) -> (IntervalWord, Vec<usize>) {
    let mut dropped = Vec::new();
    let intervals = word
        .intervals
        .iter()
        .zip(ranges)
        .enumerate()
        .map(|(f, (iv, &r))| {
            if is_degenerate(r) {
                if !iv.is_wildcard() {
                    dropped.push(f);
                }
                return Interval::WILDCARD;
            }
            Interval::new(
                iv.lb.map(|t| normalize_value(t, r)),
                iv.hb.map(|t| normalize_value(t, r)),
            )
        })
        .collect();
    (
        IntervalWord {
            intervals,
            ..word.clone()
        },
        dropped,
    )
}

pub fn denormalize(word: &IntervalWord, ranges: &[[f64; 2]]) -> IntervalWord {
    let intervals = word
        .intervals
        .iter()
        .zip(ranges)
        .map(|(iv, &r)| {
            Interval::new(
                iv.lb.map(|t| denormalize_value(t, r)),
                iv.hb.map(|t| denormalize_value(t, r)),
            )
        })
        .collect();
    IntervalWord {
        intervals,
        ..word.clone()
    }
}

/// Programs one normalized interval. Each bound snaps to its nearest level;
/// when both sides are stored, a lower bound that landed above the interval
/// centre steps down one level and an upper bound that landed below it steps
/// up one, so the programmed interval always holds the centre.
pub fn program_interval(iv: &Interval, tech: &TechParams) -> CellProgram {
    let to_g = |t: f64| bound_to_conductance(t.clamp(0.0, 1.0), tech.g_window).expect("clamped");
    let mut lb = iv.lb.map(|t| level_index(to_g(t), tech));
    let mut hb = iv.hb.map(|t| level_index(to_g(t), tech));
    if let (Some(l), Some(h), Some(lt), Some(ht)) = (lb.as_mut(), hb.as_mut(), iv.lb, iv.hb) {
        let centre = to_g(0.5 * (lt + ht));
        if level_value(*l, tech) > centre {
            *l -= 1;
        }
        if level_value(*h, tech) < centre {
            *h += 1;
        }
    }
    CellProgram {
        g_lb: lb.map(|k| level_value(k, tech)),
        g_hb: hb.map(|k| level_value(k, tech)),
    }
}

pub fn program_row(word: &IntervalWord, tech: &TechParams) -> RowProgram {
    RowProgram {
        cells: word
            .intervals
            .iter()
            .map(|iv| program_interval(iv, tech))
            .collect(),
    }
}

pub fn program_rows(words: &[IntervalWord], tech: &TechParams) -> Vec<RowProgram> {
    words.iter().map(|w| program_row(w, tech)).collect()
}

/// A contiguous run of cells evaluated on one match-line segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

impl Tile {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Splits `n_cells` into consecutive tiles of at most `max_segment` cells.
pub fn tile(n_cells: usize, max_segment: usize) -> Result<Vec<Tile>, CompileError> {
    if max_segment == 0 {
        return Err(CompileError::Config("max_segment must be at least 1".into()));
    }
    Ok((0..n_cells.div_ceil(max_segment))
        .map(|index| Tile {
            index,
            start: index * max_segment,
            end: ((index + 1) * max_segment).min(n_cells),
        })
        .collect())
}

/// A forest ready for evaluation: normalized words, their programmed rows and
/// the tile map, plus the source model when there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledForest {
    pub n_features: usize,
    pub n_classes: usize,
    pub feature_ranges: Vec<[f64; 2]>,
    pub max_segment: usize,
    pub n_levels: u32,
    pub g_window: [f64; 2],
    pub words: Vec<IntervalWord>,
    pub rows: Vec<RowProgram>,
    pub tile_map: Vec<Vec<Tile>>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub source: Option<ForestModel>,
}

impl CompiledForest {
    pub fn compile(
        model: &ForestModel,
        tech: &TechParams,
        max_segment: usize,
    ) -> Result<Self, CompileError> {
        model.validate()?;
        let mut words = Vec::new();
        let mut dropped = vec![false; model.n_features];
        for tree in &model.trees {
            for w in extract_paths(tree, model.n_features)? {
                let (w, d) = normalize(&w, &model.feature_ranges);
                for f in d {
                    dropped[f] = true;
                }
                words.push(w);
            }
        }
        let mut out = Self::from_words(
            words,
            model.n_features,
            model.n_classes,
            model.feature_ranges.clone(),
            tech,
            max_segment,
        )?;
        for (f, _) in dropped.iter().enumerate().filter(|(_, d)| **d) {
            let msg = format!(
                "feature {f} has a degenerate range {:?}; its splits are stored as wildcards",
                model.feature_ranges[f]
            );
            log::warn!("{msg}");
            out.warnings.push(msg);
        }
        out.source = Some(model.clone());
        Ok(out)
    }

    /// Builds a forest from already normalized words, grouped by tree and
    /// ordered by leaf id within each tree.
    pub fn from_words(
        words: Vec<IntervalWord>,
        n_features: usize,
        n_classes: usize,
        feature_ranges: Vec<[f64; 2]>,
        tech: &TechParams,
        max_segment: usize,
    ) -> Result<Self, CompileError> {
        tech.validate()
            .map_err(|e| CompileError::Config(e.to_string()))?;
        let tiles = tile(n_features, max_segment)?;
        let out = Self {
            n_features,
            n_classes,
            feature_ranges,
            max_segment,
            n_levels: tech.n_levels,
            g_window: tech.g_window,
            rows: program_rows(&words, tech),
            tile_map: vec![tiles; words.len()],
            words,
            warnings: Vec::new(),
            source: None,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        let bad = |m: String| CompileError::Schema(m);
        if self.feature_ranges.len() != self.n_features {
            return Err(bad("feature_ranges length differs from n_features".into()));
        }
        if self.rows.len() != self.words.len() || self.tile_map.len() != self.words.len() {
            return Err(bad("words, rows and tile map are not aligned".into()));
        }
        if self.max_segment == 0 {
            return Err(bad("max_segment must be at least 1".into()));
        }
        let mut prev: Option<(usize, usize)> = None;
        for (k, w) in self.words.iter().enumerate() {
            if w.intervals.len() != self.n_features || self.rows[k].cells.len() != self.n_features {
                return Err(bad(format!("word {k} does not have {} cells", self.n_features)));
            }
            if w.class_label >= self.n_classes {
                return Err(bad(format!("word {k}: class {} out of range", w.class_label)));
            }
            for iv in &w.intervals {
                for b in [iv.lb, iv.hb].into_iter().flatten() {
                    if !(0.0..=1.0).contains(&b) {
                        return Err(bad(format!("word {k}: bound {b} outside [0, 1]")));
                    }
                }
            }
            if let Some((t, l)) = prev {
                let same_tree = w.tree_id == t;
                if same_tree && w.leaf_id <= l {
                    return Err(bad(format!("word {k}: leaf ids not increasing within tree {t}")));
                }
            }
            prev = Some((w.tree_id, w.leaf_id));
            let mut next = 0;
            for (i, t) in self.tile_map[k].iter().enumerate() {
                if t.index != i || t.start != next || t.is_empty() || t.len() > self.max_segment {
                    return Err(bad(format!("word {k}: tile {i} is malformed")));
                }
                next = t.end;
            }
            if next != self.n_features {
                return Err(bad(format!("word {k}: tiles do not cover every cell")));
            }
        }
        Ok(())
    }

    /// Same forest with a different segment length.
    pub fn with_segment(&self, max_segment: usize) -> Result<Self, CompileError> {
        let tiles = tile(self.n_features, max_segment)?;
        Ok(Self {
            max_segment,
            tile_map: vec![tiles; self.words.len()],
            ..self.clone()
        })
    }

    /// Word index ranges, one per tree, in storage order.
    pub fn tree_slices(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.words.len() {
            if k == self.words.len() || self.words[k].tree_id != self.words[start].tree_id {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    pub fn n_trees(&self) -> usize {
        self.tree_slices().len()
    }

    pub fn n_tiles(&self) -> usize {
        self.tile_map.iter().map(Vec::len).sum()
    }

    /// Largest number of stored inequalities in any word.
    pub fn max_inequalities(&self) -> usize {
        self.words
            .iter()
            .map(IntervalWord::n_inequalities)
            .max()
            .unwrap_or(0)
    }

    pub fn normalize_query(&self, x: &[f64]) -> Vec<f64> {
        normalize_query(x, &self.feature_ranges)
    }

    /// Prediction of the source model by direct traversal, if it is known.
    pub fn reference_predict(&self, x: &[f64]) -> Option<usize> {
        self.source.as_ref().map(|m| m.predict(x))
    }

    pub fn save(&self, path: &Path) -> Result<(), CompileError> {
        let text = serde_json::to_string(self).expect("compiled forest serializes");
        std::fs::write(path, text).map_err(|e| CompileError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CompileError> {
        let text = std::fs::read_to_string(path).map_err(|e| CompileError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let out: Self = serde_json::from_str(&text)
            .map_err(|e| CompileError::Json(e.to_string()).in_file(path))?;
        out.validate().map_err(|e| e.in_file(path))?;
        Ok(out)
    }
}
