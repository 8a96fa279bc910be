//! Query evaluation against a compiled forest.
//!
//! Words are evaluated either with exact interval semantics (`Ideal`) or by
//! simulating each tile's match line from a LUT set (`Behavioral`). Each tree
//! votes with its lowest matched leaf; trees without a match abstain. When an
//! architecture is configured, every word is also run through the sequential
//! early-terminating schedule to account steps and energy.

use std::io::Write;
use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arch_model::{ArchConfig, ArchError};
use crate::device_model::{LutSet, Polarity, TechParams};
use crate::forest_compiler::model::majority;
use crate::forest_compiler::{CompileError, CompiledForest, Dataset};
use crate::interval::{inequalities, Side};
use crate::matchline::{row_match_ideal, Decision, DischargeScratch, LineIntegrator};

pub mod crosstalk;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Arch(#[from] ArchError),
}

#[derive(Debug, Clone)]
pub enum EvalMode {
    Ideal,
    Behavioral(Arc<LutSet>),
}

impl EvalMode {
    pub fn name(&self) -> String {
        match self {
            EvalMode::Ideal => "ideal".into(),
            EvalMode::Behavioral(l) => format!("behavioral-{}", l.arch_kind),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub mode: EvalMode,
    pub tech: TechParams,
    pub arch: Option<ArchConfig>,
}

impl EvalConfig {
    pub fn ideal(tech: TechParams) -> Self {
        Self {
            mode: EvalMode::Ideal,
            tech,
            arch: None,
        }
    }

    pub fn behavioral(luts: LutSet, tech: TechParams) -> Self {
        Self {
            mode: EvalMode::Behavioral(Arc::new(luts)),
            tech,
            arch: None,
        }
    }

    pub fn with_arch(mut self, arch: ArchConfig) -> Self {
        self.arch = Some(arch);
        self
    }
}

/// A query in the two forms the evaluators consume.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedQuery {
    pub normalized: Vec<f64>,
    pub voltages: Vec<f64>,
}

/// Data-line voltages: each feature normalized by its range, clamped to
/// `[0, 1]` and scaled onto `[0, V_DD]`.
pub fn query_to_voltages(x: &[f64], ranges: &[[f64; 2]], tech: &TechParams) -> Vec<f64> {
    crate::forest_compiler::compile::normalize_query(x, ranges)
        .into_iter()
        .map(|t| t * tech.v_dd)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqOutcome {
    pub decision: Decision,
    pub steps: usize,
    pub energy: f64,
}

/// Result of classifying one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    /// `None` when every tree abstained.
    pub predicted: Option<usize>,
    pub steps: u64,
    pub energy: f64,
    /// Words whose decision differs from the exact interval semantics.
    pub false_decisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct StoredIneq {
    feature: usize,
    polarity: Polarity,
    bound: f64,
    g: f64,
}

/// Evaluation context bound to one compiled forest and configuration.
pub struct Evaluator<'a> {
    compiled: &'a CompiledForest,
    cfg: &'a EvalConfig,
    trees: Vec<Range<usize>>,
    seq: Vec<Vec<StoredIneq>>,
    integrator: Option<LineIntegrator<'a>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(compiled: &'a CompiledForest, cfg: &'a EvalConfig) -> Result<Self, InferenceError> {
        cfg.tech
            .validate()
            .map_err(|e| InferenceError::Config(e.to_string()))?;
        if compiled.words.is_empty() {
            return Err(InferenceError::Config("compiled forest has no words".into()));
        }
        if let EvalMode::Behavioral(luts) = &cfg.mode {
            let v_dd = luts.lb.v_dd();
            if (v_dd - cfg.tech.v_dd).abs() > 1e-9 * cfg.tech.v_dd {
                return Err(InferenceError::Config(format!(
                    "LUT set spans 0..{v_dd} V but the supply is {} V",
                    cfg.tech.v_dd
                )));
            }
            let g = luts.lb.g_mem_axis();
            let tol = 1e-9 * compiled.g_window[1];
            if compiled.g_window[0] < g[0] - tol || compiled.g_window[1] > g[g.len() - 1] + tol {
                return Err(InferenceError::Config(format!(
                    "programmed conductance window {:?} lies outside the LUT range [{}, {}]",
                    compiled.g_window,
                    g[0],
                    g[g.len() - 1]
                )));
            }
        }
        if let Some(arch) = &cfg.arch {
            arch.validate()?;
            let need = compiled.max_inequalities();
            if need > arch.capacity() {
                return Err(InferenceError::Config(format!(
                    "architecture n_seq={} x n_par={} holds {} inequalities, a word needs {need}",
                    arch.n_seq,
                    arch.n_par,
                    arch.capacity()
                )));
            }
            if let EvalMode::Behavioral(luts) = &cfg.mode {
                if !luts.arch_kind.is_latched() {
                    return Err(InferenceError::Config(format!(
                        "sequential evaluation needs latched cells; `{}` LUTs are not latched",
                        luts.arch_kind
                    )));
                }
            }
        }
        let seq = compiled
            .words
            .iter()
            .zip(&compiled.rows)
            .map(|(w, row)| {
                inequalities(&w.intervals)
                    .map(|q| {
                        let cell = row.cells[q.feature];
                        let (polarity, g) = match q.side {
                            Side::Lower => (Polarity::LowerBound, cell.g_lb),
                            Side::Upper => (Polarity::UpperBound, cell.g_hb),
                        };
                        StoredIneq {
                            feature: q.feature,
                            polarity,
                            bound: q.bound,
                            g: g.expect("programmed side exists"),
                        }
                    })
                    .collect()
            })
            .collect();
        let integrator = match &cfg.mode {
            EvalMode::Ideal => None,
            EvalMode::Behavioral(luts) => Some(LineIntegrator::new(luts, &cfg.tech)),
        };
        Ok(Self {
            compiled,
            cfg,
            trees: compiled.tree_slices(),
            seq,
            integrator,
        })
    }

    pub fn prepare(&self, x: &[f64]) -> PreparedQuery {
        let normalized = self.compiled.normalize_query(x);
        let voltages = normalized.iter().map(|t| t * self.cfg.tech.v_dd).collect();
        PreparedQuery {
            normalized,
            voltages,
        }
    }

    fn ideal_word(&self, k: usize, q: &PreparedQuery) -> Decision {
        let w = &self.compiled.words[k];
        let all = self.compiled.tile_map[k].iter().all(|t| {
            row_match_ideal(&w.intervals[t.range()], &q.normalized[t.range()])
        });
        Decision::from_match(all)
    }

    /// Match decision of word `k`: the AND of its tiles.
    pub fn evaluate_word(&self, k: usize, q: &PreparedQuery, scratch: &mut DischargeScratch) -> Decision {
        match &self.integrator {
            None => self.ideal_word(k, q),
            Some(integ) => {
                let row = &self.compiled.rows[k];
                let all = self.compiled.tile_map[k].iter().all(|t| {
                    let cells = row.cells[t.range()].iter().zip(q.voltages[t.range()].iter().copied());
                    integ.decide(cells, scratch).is_match()
                });
                Decision::from_match(all)
            }
        }
    }

    /// Sequential evaluation of word `k` under the configured architecture:
    /// inequalities are taken `n_par` at a time in storage order and the
    /// search stops after the first group holding a violation.
    pub fn seq_evaluate_word(&self, k: usize, q: &PreparedQuery) -> Result<SeqOutcome, InferenceError> {
        let arch = self
            .cfg
            .arch
            .ok_or_else(|| InferenceError::Config("no architecture configured".into()))?;
        let violated = |s: &StoredIneq| -> bool {
            match &self.cfg.mode {
                EvalMode::Ideal => {
                    let x = q.normalized[s.feature];
                    match s.polarity {
                        Polarity::LowerBound => x < s.bound,
                        Polarity::UpperBound => x > s.bound,
                    }
                }
                EvalMode::Behavioral(luts) => {
                    let v = q.voltages[s.feature].clamp(0.0, self.cfg.tech.v_dd);
                    luts.drive(s.polarity, v, s.g) > 0.5 * self.cfg.tech.v_dd
                }
            }
        };
        let mut steps = 0;
        let mut decision = Decision::Match;
        for group in self.seq[k].chunks(arch.n_par) {
            steps += 1;
            if group.iter().any(violated) {
                decision = Decision::Mismatch;
                break;
            }
        }
        Ok(SeqOutcome {
            decision,
            steps,
            energy: (steps * arch.n_par) as f64 * self.cfg.tech.e_cell,
        })
    }

    /// Majority vote of the trees' lowest matched leaves.
    pub fn classify(&self, x: &[f64], scratch: &mut DischargeScratch) -> QueryOutcome {
        let q = self.prepare(x);
        let behavioral = matches!(self.cfg.mode, EvalMode::Behavioral(_));
        let mut votes = vec![0usize; self.compiled.n_classes];
        let mut out = QueryOutcome {
            predicted: None,
            steps: 0,
            energy: 0.0,
            false_decisions: 0,
        };
        for tree in &self.trees {
            let mut vote = None;
            for k in tree.clone() {
                // Every word is searched in hardware; evaluating all of them
                // keeps the error count complete.
                let d = self.evaluate_word(k, &q, scratch);
                if behavioral && d != self.ideal_word(k, &q) {
                    out.false_decisions += 1;
                }
                if d.is_match() && vote.is_none() {
                    vote = Some(self.compiled.words[k].class_label);
                }
                if self.cfg.arch.is_some() {
                    let s = self.seq_evaluate_word(k, &q).expect("arch configured");
                    out.steps += s.steps as u64;
                    out.energy += s.energy;
                }
            }
            if let Some(c) = vote {
                votes[c] += 1;
            }
        }
        out.predicted = majority(&votes);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub query_id: usize,
    pub predicted: Option<usize>,
    pub reference: Option<usize>,
    pub label: usize,
    pub n_steps: u64,
    pub energy_j: f64,
    pub false_decisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyStats {
    pub mean_j: f64,
    pub std_j: f64,
    pub min_j: f64,
    pub max_j: f64,
    pub total_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceReport {
    pub mode: String,
    pub segment_length: usize,
    pub n_queries: usize,
    pub n_words: usize,
    pub correct: usize,
    pub no_prediction: usize,
    /// Absent for an empty dataset.
    pub accuracy: Option<f64>,
    pub agreement_with_software: Option<f64>,
    pub false_decision_rate: Option<f64>,
    pub energy: Option<EnergyStats>,
    /// Mean sequential steps per word evaluation.
    pub mean_depth: Option<f64>,
    /// `confusion[label][predicted]`; the last column counts abstentions.
    pub confusion: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: InferenceReport,
    pub records: Vec<QueryRecord>,
}

impl Evaluation {
    /// Per-query CSV: `query_id,predicted,reference,n_steps,energy_J`.
    pub fn write_records_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "query_id,predicted,reference,n_steps,energy_J")?;
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{:.6e}",
                r.query_id,
                opt(r.predicted),
                opt(r.reference),
                r.n_steps,
                r.energy_j
            )?;
        }
        Ok(())
    }
}

/// Classifies every query of `dataset` and summarizes the outcome. The
/// reference prediction is the source model's traversal, or the exact
/// interval semantics when the forest has no source model.
pub fn evaluate_dataset(
    compiled: &CompiledForest,
    dataset: &Dataset,
    cfg: &EvalConfig,
) -> Result<Evaluation, InferenceError> {
    dataset.check_schema(compiled.n_features, compiled.n_classes)?;
    let ev = Evaluator::new(compiled, cfg)?;
    let ideal_cfg = EvalConfig::ideal(cfg.tech.clone());
    let ideal = match (&compiled.source, &cfg.mode) {
        (None, EvalMode::Behavioral(_)) => Some(Evaluator::new(compiled, &ideal_cfg)?),
        _ => None,
    };

    let records: Vec<QueryRecord> = dataset
        .x
        .par_iter()
        .enumerate()
        .map_init(DischargeScratch::default, |scratch, (i, x)| {
            let o = ev.classify(x, scratch);
            let reference = match (compiled.reference_predict(x), &ideal) {
                (Some(r), _) => Some(r),
                (None, Some(iev)) => iev.classify(x, scratch).predicted,
                (None, None) => o.predicted,
            };
            QueryRecord {
                query_id: i,
                predicted: o.predicted,
                reference,
                label: dataset.labels[i],
                n_steps: o.steps,
                energy_j: o.energy,
                false_decisions: o.false_decisions,
            }
        })
        .collect();

    let n = records.len();
    let n_classes = compiled.n_classes;
    let mut confusion = vec![vec![0u64; n_classes + 1]; n_classes];
    let (mut correct, mut agree, mut no_pred, mut false_dec) = (0, 0, 0, 0);
    for r in &records {
        confusion[r.label][r.predicted.unwrap_or(n_classes)] += 1;
        correct += (r.predicted == Some(r.label)) as usize;
        agree += (r.predicted == r.reference) as usize;
        no_pred += r.predicted.is_none() as usize;
        false_dec += r.false_decisions;
    }
    let frac = |k: usize, d: usize| (d > 0).then(|| k as f64 / d as f64);
    let n_words = compiled.words.len();
    let energy = (cfg.arch.is_some() && n > 0).then(|| {
        let e: Vec<f64> = records.iter().map(|r| r.energy_j).collect();
        let total: f64 = e.iter().sum();
        let mean = total / n as f64;
        let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        EnergyStats {
            mean_j: mean,
            std_j: var.sqrt(),
            min_j: e.iter().copied().fold(f64::INFINITY, f64::min),
            max_j: e.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            total_j: total,
        }
    });
    let mean_depth = (cfg.arch.is_some() && n > 0).then(|| {
        records.iter().map(|r| r.n_steps).sum::<u64>() as f64 / (n * n_words) as f64
    });
    Ok(Evaluation {
        report: InferenceReport {
            mode: cfg.mode.name(),
            segment_length: compiled.max_segment,
            n_queries: n,
            n_words,
            correct,
            no_prediction: no_pred,
            accuracy: frac(correct, n),
            agreement_with_software: frac(agree, n),
            false_decision_rate: frac(false_dec, n * n_words),
            energy,
            mean_depth,
            confusion,
        },
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentSweepRow {
    pub segment_length: usize,
    pub accuracy: Option<f64>,
    pub agreement: Option<f64>,
    pub false_decision_rate: Option<f64>,
}

/// Re-tiles the forest at every length and evaluates the dataset.
pub fn segment_length_sweep(
    compiled: &CompiledForest,
    dataset: &Dataset,
    cfg: &EvalConfig,
    lengths: &[usize],
) -> Result<Vec<SegmentSweepRow>, InferenceError> {
    lengths
        .iter()
        .map(|&len| {
            let tiled = compiled.with_segment(len)?;
            let r = evaluate_dataset(&tiled, dataset, cfg)?.report;
            Ok(SegmentSweepRow {
                segment_length: len,
                accuracy: r.accuracy,
                agreement: r.agreement_with_software,
                false_decision_rate: r.false_decision_rate,
            })
        })
        .collect()
}

/// CSV `segment_length,accuracy,agreement,false_decision_rate`.
pub fn write_sweep_csv<W: Write>(rows: &[SegmentSweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "segment_length,accuracy,agreement,false_decision_rate")?;
    let f = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.segment_length,
            f(r.accuracy),
            f(r.agreement),
            f(r.false_decision_rate)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device_model::{default_luts, ArchKind};
    use crate::forest_compiler::{ForestModel, IntervalWord};
    use crate::interval::Interval;

    fn stump_forest() -> CompiledForest {
        let text = r#"{"forest": {"n_features": 2, "n_classes": 2, "feature_ranges": [[0, 10], [0, 1]],
            "trees": [{"tree_id": 0, "nodes": [
                {"feature_index": 0, "threshold": 4.0, "left_child": 1, "right_child": 2},
                {"class_label": 1}, {"class_label": 0}]}]}}"#;
        let m = ForestModel::from_json_str(text).unwrap();
        CompiledForest::compile(&m, &TechParams::default(), 64).unwrap()
    }

    #[test]
    fn voltages_clamp() {
        let t = TechParams::default();
        let v = query_to_voltages(&[0.0, 10.0, -3.0, 12.0], &[[0.0, 10.0]; 4], &t);
        assert_eq!(v, vec![0.0, t.v_dd, 0.0, t.v_dd]);
    }

    #[test]
    fn stump_classification() {
        let c = stump_forest();
        let cfg = EvalConfig::ideal(TechParams::default());
        let ev = Evaluator::new(&c, &cfg).unwrap();
        let mut s = DischargeScratch::default();
        assert_eq!(ev.classify(&[1.0, 0.5], &mut s).predicted, Some(1));
        assert_eq!(ev.classify(&[4.0, 0.5], &mut s).predicted, Some(1));
        assert_eq!(ev.classify(&[7.0, 0.5], &mut s).predicted, Some(0));
    }

    #[test]
    fn wildcard_word_matches_everywhere() {
        let tech = TechParams::default();
        let w = IntervalWord {
            intervals: vec![Interval::WILDCARD; 3],
            class_label: 0,
            tree_id: 0,
            leaf_id: 0,
        };
        let c = CompiledForest::from_words(vec![w], 3, 1, vec![[0.0, 1.0]; 3], &tech, 2).unwrap();
        for cfg in [
            EvalConfig::ideal(tech.clone()),
            EvalConfig::behavioral(default_luts(&tech, ArchKind::SixT2M).unwrap(), tech.clone()),
        ] {
            let ev = Evaluator::new(&c, &cfg).unwrap();
            let q = ev.prepare(&[0.1, 0.9, 0.5]);
            assert!(ev.evaluate_word(0, &q, &mut DischargeScratch::default()).is_match());
        }
    }

    #[test]
    fn majority_across_trees() {
        let tech = TechParams::default();
        let word = |tree, class| IntervalWord {
            intervals: vec![Interval::WILDCARD],
            class_label: class,
            tree_id: tree,
            leaf_id: 0,
        };
        let c = CompiledForest::from_words(
            vec![word(0, 2), word(1, 1), word(2, 2)],
            1,
            3,
            vec![[0.0, 1.0]],
            &tech,
            64,
        )
        .unwrap();
        let cfg = EvalConfig::ideal(tech);
        let ev = Evaluator::new(&c, &cfg).unwrap();
        assert_eq!(ev.classify(&[0.3], &mut DischargeScratch::default()).predicted, Some(2));
    }

    #[test]
    fn sequential_steps() {
        let tech = TechParams::default();
        let w = IntervalWord {
            intervals: vec![Interval::bounded(0.2, 0.8); 4],
            class_label: 0,
            tree_id: 0,
            leaf_id: 0,
        };
        let c = CompiledForest::from_words(vec![w], 4, 1, vec![[0.0, 1.0]; 4], &tech, 64).unwrap();
        let cfg = EvalConfig::ideal(tech.clone()).with_arch(ArchConfig::new(3, 3, 8).unwrap());
        let ev = Evaluator::new(&c, &cfg).unwrap();
        let inside = ev.seq_evaluate_word(0, &ev.prepare(&[0.5; 4])).unwrap();
        assert_eq!((inside.decision, inside.steps), (Decision::Match, 3));
        let cfg1 = EvalConfig::ideal(tech.clone()).with_arch(ArchConfig::new(8, 1, 8).unwrap());
        let ev1 = Evaluator::new(&c, &cfg1).unwrap();
        let out = ev1.seq_evaluate_word(0, &ev1.prepare(&[0.1, 0.5, 0.5, 0.5])).unwrap();
        assert_eq!((out.decision, out.steps), (Decision::Mismatch, 1));
        assert_eq!(out.energy, tech.e_cell);

        let small = EvalConfig::ideal(tech.clone()).with_arch(ArchConfig::new(2, 3, 6).unwrap());
        assert!(Evaluator::new(&c, &small).is_err());
        let six = EvalConfig::behavioral(default_luts(&tech, ArchKind::SixT2M).unwrap(), tech)
            .with_arch(ArchConfig::new(8, 1, 8).unwrap());
        assert!(Evaluator::new(&c, &six).is_err());
    }

    #[test]
    fn empty_dataset_report() {
        let c = stump_forest();
        let d = Dataset {
            feature_names: vec!["a".into(), "b".into()],
            ..Default::default()
        };
        let r = evaluate_dataset(&c, &d, &EvalConfig::ideal(TechParams::default()))
            .unwrap()
            .report;
        assert_eq!(r.n_queries, 0);
        assert!(r.accuracy.is_none() && r.agreement_with_software.is_none());
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let c = stump_forest();
        let d = Dataset {
            feature_names: vec!["a".into()],
            x: vec![vec![1.0]],
            labels: vec![0],
        };
        assert!(evaluate_dataset(&c, &d, &EvalConfig::ideal(TechParams::default())).is_err());
    }
}
