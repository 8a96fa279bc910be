//! Near-boundary benchmark for match-line crosstalk.
//!
//! Four words span `n_features` cells. Features 0 and 1 act as keys: each
//! word holds the low or high third of both, so any query lies far outside
//! every word but its own. All other features carry a two-sided interval
//! whose bounds sit on programmable levels, and every query places each of
//! those features just inside one bound of its target word, within a margin
//! drawn from `margin`. Exact evaluation matches each query with its own word
//! only; any other outcome is a false decision caused by residual pull-down
//! current on the shared line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::device_model::TechParams;
use crate::forest_compiler::{CompileError, CompiledForest, Dataset, IntervalWord};
use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosstalkSpec {
    pub n_features: usize,
    pub queries_per_word: usize,
    /// Range of the normalized distance between a query and the bound it is
    /// placed next to.
    pub margin: [f64; 2],
    pub seed: u64,
}

impl Default for CrosstalkSpec {
    fn default() -> Self {
        Self {
            n_features: 128,
            queries_per_word: 64,
            margin: [0.01, 0.05],
            seed: 2024,
        }
    }
}

/// Segment lengths swept by the crosstalk study.
pub const CROSSTALK_LENGTHS: [usize; 5] = [8, 16, 32, 64, 128];

/// Builds the benchmark forest (one tree, one class per word) and its
/// labelled queries.
pub fn near_boundary_benchmark(
    spec: &CrosstalkSpec,
    tech: &TechParams,
) -> Result<(CompiledForest, Dataset), CompileError> {
    if spec.n_features < 3 {
        return Err(CompileError::Config("crosstalk benchmark needs at least 3 features".into()));
    }
    if !(0.0 <= spec.margin[0] && spec.margin[0] <= spec.margin[1] && spec.margin[1] < 0.1) {
        return Err(CompileError::Config(format!("invalid margin {:?}", spec.margin)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let top = tech.n_levels - 1;
    let level = |k: u32| k as f64 / top as f64;
    let third = top / 3;
    let key = |high: bool| {
        if high {
            Interval::bounded(level(top - third), 1.0)
        } else {
            Interval::bounded(0.0, level(third))
        }
    };
    // Lower bounds from the lower half of the range, upper bounds from the
    // upper half, kept clear of the ends so every margin fits.
    let lb_levels = (top / 16)..=(top * 7 / 16);
    let hb_levels = (top * 9 / 16)..=(top * 15 / 16);

    let mut words = Vec::new();
    for w in 0..4usize {
        let mut intervals = vec![key(w & 1 == 1), key(w & 2 == 2)];
        for _ in 2..spec.n_features {
            let lb = level(rng.gen_range(lb_levels.clone()));
            let hb = level(rng.gen_range(hb_levels.clone()));
            intervals.push(Interval::bounded(lb, hb));
        }
        words.push(IntervalWord {
            intervals,
            class_label: w,
            tree_id: 0,
            leaf_id: w,
        });
    }

    let mut x = Vec::new();
    let mut labels = Vec::new();
    for (w, word) in words.iter().enumerate() {
        for _ in 0..spec.queries_per_word {
            let q: Vec<f64> = word
                .intervals
                .iter()
                .enumerate()
                .map(|(f, iv)| {
                    let (lb, hb) = (iv.lb.unwrap(), iv.hb.unwrap());
                    if f < 2 {
                        return 0.5 * (lb + hb);
                    }
                    let d = rng.gen_range(spec.margin[0]..=spec.margin[1]);
                    if rng.gen_bool(0.5) {
                        lb + d
                    } else {
                        hb - d
                    }
                })
                .collect();
            x.push(q);
            labels.push(w);
        }
    }

    let n = spec.n_features;
    let forest = CompiledForest::from_words(words, n, 4, vec![[0.0, 1.0]; n], tech, n)?;
    let data = Dataset {
        feature_names: (0..n).map(|f| format!("f{f}")).collect(),
        x,
        labels,
    };
    Ok((forest, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_semantics_hold() {
        let tech = TechParams::default();
        let spec = CrosstalkSpec {
            queries_per_word: 8,
            ..CrosstalkSpec::default()
        };
        let (f, d) = near_boundary_benchmark(&spec, &tech).unwrap();
        assert_eq!(f.words.len(), 4);
        for (x, &label) in d.x.iter().zip(&d.labels) {
            for (k, w) in f.words.iter().enumerate() {
                assert_eq!(w.matches(x), k == label);
            }
        }
        // Bounds sit on levels, so programming does not move them.
        let (_, again) = near_boundary_benchmark(&spec, &tech).unwrap();
        assert_eq!(again, d);
    }
}
