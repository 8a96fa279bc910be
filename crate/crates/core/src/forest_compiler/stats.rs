//! Mismatch statistics measured by evaluating words in sequence order.
//!
//! For every (query, word) pair the word's stored inequalities are checked in
//! feature order, lower side first, and the position of the first violation
//! is recorded as the search depth. A matched word has depth equal to its
//! inequality count.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::compile::{CompiledForest, IntervalWord};
use super::dataset::Dataset;
use crate::interval::inequalities;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FeatureMismatch {
    /// Pairs whose word constrains this feature.
    pub evaluated: u64,
    /// Of those, pairs whose query lies outside the feature's interval.
    pub violated: u64,
}

impl FeatureMismatch {
    pub fn p_mm(&self) -> Option<f64> {
        (self.evaluated > 0).then(|| self.violated as f64 / self.evaluated as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchStats {
    pub n_queries: usize,
    pub n_words: usize,
    pub per_feature: Vec<FeatureMismatch>,
    /// `depth_histogram[d]` counts pairs with depth `d`.
    pub depth_histogram: Vec<u64>,
    /// `joint[l][d]` counts pairs whose word holds `l` inequalities and whose
    /// depth is `d`.
    pub joint: Vec<Vec<u64>>,
    pub mean_depth: f64,
}

/// Position (1-based) of the first violated inequality, or the inequality
/// count when the word matches.
pub fn first_violation_depth(word: &IntervalWord, x: &[f64]) -> usize {
    let mut n = 0;
    for ineq in inequalities(&word.intervals) {
        n += 1;
        if ineq.violated(x[ineq.feature]) {
            return n;
        }
    }
    n
}

struct Partial {
    per_feature: Vec<FeatureMismatch>,
    joint: Vec<Vec<u64>>,
}

impl Partial {
    fn new(n_features: usize, max_len: usize) -> Self {
        Self {
            per_feature: vec![FeatureMismatch::default(); n_features],
            joint: vec![vec![0; max_len + 1]; max_len + 1],
        }
    }

    fn merge(mut self, other: Partial) -> Self {
        for (a, b) in self.per_feature.iter_mut().zip(other.per_feature) {
            a.evaluated += b.evaluated;
            a.violated += b.violated;
        }
        for (ra, rb) in self.joint.iter_mut().zip(other.joint) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        self
    }
}

/// Evaluates every word against every (raw) query of `dataset`.
pub fn measured_mismatch_stats(compiled: &CompiledForest, dataset: &Dataset) -> MismatchStats {
    let max_len = compiled.max_inequalities();
    let lens: Vec<usize> = compiled.words.iter().map(IntervalWord::n_inequalities).collect();
    let n_features = compiled.n_features;
    let partial = dataset
        .x
        .par_iter()
        .fold(
            || Partial::new(n_features, max_len),
            |mut acc, raw| {
                let x = compiled.normalize_query(raw);
                for (w, &l) in compiled.words.iter().zip(&lens) {
                    let d = first_violation_depth(w, &x);
                    acc.joint[l][d] += 1;
                    for (f, iv) in w.intervals.iter().enumerate() {
                        if !iv.is_wildcard() {
                            acc.per_feature[f].evaluated += 1;
                            acc.per_feature[f].violated += !iv.contains(x[f]) as u64;
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| Partial::new(n_features, max_len), Partial::merge);

    let mut depth_histogram = vec![0u64; max_len + 1];
    for row in &partial.joint {
        for (d, &c) in row.iter().enumerate() {
            depth_histogram[d] += c;
        }
    }
    let pairs: u64 = depth_histogram.iter().sum();
    let depth_sum: u64 = depth_histogram
        .iter()
        .enumerate()
        .map(|(d, &c)| d as u64 * c)
        .sum();
    MismatchStats {
        n_queries: dataset.len(),
        n_words: compiled.words.len(),
        per_feature: partial.per_feature,
        depth_histogram,
        joint: partial.joint,
        mean_depth: if pairs > 0 {
            depth_sum as f64 / pairs as f64
        } else {
            0.0
        },
    }
}

impl MismatchStats {
    pub fn n_pairs(&self) -> u64 {
        self.depth_histogram.iter().sum()
    }

    /// Longest word, in inequalities.
    pub fn max_word_len(&self) -> usize {
        self.joint
            .iter()
            .rposition(|row| row.iter().any(|&c| c > 0))
            .unwrap_or(0)
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.joint.iter().enumerate().flat_map(|(l, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(move |(d, &c)| (l, d, c))
        })
    }

    /// Fractional energy saved by early termination when every word of
    /// length `l` is given `n_seq` steps of `ceil(l / n_seq)` parallel
    /// latches, relative to evaluating all inequalities.
    pub fn reduction(&self, n_seq: usize) -> f64 {
        let (mut spent, mut full) = (0u64, 0u64);
        for (l, d, c) in self.pairs() {
            if l == 0 {
                continue;
            }
            let n_par = l.div_ceil(n_seq);
            spent += c * (n_par * d.div_ceil(n_par)) as u64;
            full += c * l as u64;
        }
        if full == 0 {
            0.0
        } else {
            1.0 - spent as f64 / full as f64
        }
    }

    /// `(n_seq, reduction)` for `n_seq` in `1..=max(max_word_len, 1)`.
    pub fn reduction_curve(&self) -> Vec<(usize, f64)> {
        (1..=self.max_word_len().max(1))
            .map(|n| (n, self.reduction(n)))
            .collect()
    }

    /// Smallest `n_seq` whose reduction reaches `target`.
    pub fn n_seq_for(&self, target: f64) -> Option<usize> {
        self.reduction_curve()
            .into_iter()
            .find(|&(_, r)| r >= target)
            .map(|(n, _)| n)
    }

    /// Sequential steps predicted for a fixed `n_par` summed over all pairs.
    pub fn predicted_steps(&self, n_par: usize) -> u64 {
        self.pairs().map(|(_, d, c)| c * d.div_ceil(n_par) as u64).sum()
    }

    /// Mean energy per query for a fixed `n_par`.
    pub fn predicted_energy_per_query(&self, n_par: usize, e_cell: f64) -> f64 {
        if self.n_queries == 0 {
            return 0.0;
        }
        self.predicted_steps(n_par) as f64 * n_par as f64 * e_cell / self.n_queries as f64
    }

    pub fn write_feature_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "feature,evaluated,violated,p_mm")?;
        for (f, s) in self.per_feature.iter().enumerate() {
            let p = s.p_mm().map(|p| format!("{p:.6}")).unwrap_or_default();
            writeln!(w, "{f},{},{},{p}", s.evaluated, s.violated)?;
        }
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "depth,count")?;
        for (d, c) in self.depth_histogram.iter().enumerate() {
            writeln!(w, "{d},{c}")?;
        }
        Ok(())
    }

    pub fn write_reduction_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n_seq,energy_reduction")?;
        for (n, r) in self.reduction_curve() {
            writeln!(w, "{n},{r:.6}")?;
        }
        Ok(())
    }
}
