//! Generators shared by the integration tests.
#![allow(dead_code)]

use acam::device_model::TechParams;
use acam::forest_compiler::{CompiledForest, IntervalWord};
use acam::interval::Interval;
use rand::Rng;

pub fn data_dir(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn level(k: u32, tech: &TechParams) -> f64 {
    k as f64 / (tech.n_levels - 1) as f64
}

/// One interval whose bounds sit on programmable levels. Either side may be
/// absent.
pub fn aligned_interval<R: Rng>(rng: &mut R, tech: &TechParams, p_wildcard: f64) -> Interval {
    let top = tech.n_levels - 1;
    if rng.gen_bool(p_wildcard) {
        return Interval::WILDCARD;
    }
    let a = rng.gen_range(0..top);
    let b = rng.gen_range(a + 1..=top);
    match rng.gen_range(0..3) {
        0 => Interval::new(Some(level(a, tech)), None),
        1 => Interval::new(None, Some(level(b, tech))),
        _ => Interval::bounded(level(a, tech), level(b, tech)),
    }
}

/// Normalized words with level-aligned bounds, `words_per_tree` per tree.
pub fn aligned_forest<R: Rng>(
    rng: &mut R,
    tech: &TechParams,
    n_features: usize,
    n_trees: usize,
    words_per_tree: usize,
    max_segment: usize,
) -> CompiledForest {
    let n_classes = 3;
    let mut words = Vec::new();
    for tree_id in 0..n_trees {
        for leaf_id in 0..words_per_tree {
            words.push(IntervalWord {
                intervals: (0..n_features)
                    .map(|_| aligned_interval(rng, tech, 0.3))
                    .collect(),
                class_label: rng.gen_range(0..n_classes),
                tree_id,
                leaf_id,
            });
        }
    }
    CompiledForest::from_words(
        words,
        n_features,
        n_classes,
        vec![[0.0, 1.0]; n_features],
        tech,
        max_segment,
    )
    .unwrap()
}

/// A normalized query whose every component lies halfway between two
/// levels, so it is never on a stored bound.
pub fn midlevel_query<R: Rng>(rng: &mut R, tech: &TechParams, n_features: usize) -> Vec<f64> {
    let top = tech.n_levels - 1;
    (0..n_features)
        .map(|_| (rng.gen_range(0..top) as f64 + 0.5) / top as f64)
        .collect()
}

/// A query biased to sit inside `word` on most features so that matches and
/// late mismatches both occur.
pub fn query_near_word<R: Rng>(rng: &mut R, tech: &TechParams, word: &IntervalWord) -> Vec<f64> {
    let top = tech.n_levels - 1;
    word.intervals
        .iter()
        .map(|iv| {
            let lo = iv.lb.map_or(0, |b| (b * top as f64).round() as u32);
            let hi = iv.hb.map_or(top, |b| (b * top as f64).round() as u32);
            let k = if rng.gen_bool(0.9) && hi > lo {
                rng.gen_range(lo..hi)
            } else {
                rng.gen_range(0..top)
            };
            (k as f64 + 0.5) / top as f64
        })
        .collect()
}
