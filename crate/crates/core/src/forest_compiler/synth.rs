//! Random forests and queries for property tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use super::model::{ForestModel, Node, TreeModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomForestSpec {
    pub n_features: usize,
    pub n_classes: usize,
    pub n_trees: usize,
    pub max_depth: usize,
    /// Probability that a node above `max_depth` becomes a leaf early.
    pub early_leaf: f64,
    /// Raw range shared by every feature.
    pub range: [f64; 2],
}

impl Default for RandomForestSpec {
    fn default() -> Self {
        Self {
            n_features: 8,
            n_classes: 3,
            n_trees: 5,
            max_depth: 5,
            early_leaf: 0.15,
            range: [-5.0, 20.0],
        }
    }
}

/// A forest whose splits always cut the feature's reachable interval, so no
/// leaf is empty.
pub fn random_forest(spec: &RandomForestSpec, seed: u64) -> ForestModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trees = (0..spec.n_trees)
        .map(|tree_id| {
            let mut nodes = Vec::new();
            let bounds = vec![spec.range; spec.n_features];
            grow(&mut nodes, &mut rng, spec, 0, bounds);
            TreeModel { tree_id, nodes }
        })
        .collect();
    ForestModel {
        n_features: spec.n_features,
        n_classes: spec.n_classes,
        feature_ranges: vec![spec.range; spec.n_features],
        trees,
    }
}

fn grow(
    nodes: &mut Vec<Node>,
    rng: &mut ChaCha8Rng,
    spec: &RandomForestSpec,
    depth: usize,
    bounds: Vec<[f64; 2]>,
) -> usize {
    let i = nodes.len();
    let leaf = Node::Leaf {
        class_label: rng.gen_range(0..spec.n_classes),
    };
    nodes.push(leaf);
    if depth >= spec.max_depth || (depth > 0 && rng.gen_bool(spec.early_leaf)) {
        return i;
    }
    let f = rng.gen_range(0..spec.n_features);
    let [lo, hi] = bounds[f];
    let threshold = lo + (hi - lo) * rng.gen_range(0.05..0.95);
    let mut lb = bounds.clone();
    lb[f][1] = threshold;
    let mut rb = bounds;
    rb[f][0] = threshold;
    let left = grow(nodes, rng, spec, depth + 1, lb);
    let right = grow(nodes, rng, spec, depth + 1, rb);
    nodes[i] = Node::Internal {
        feature_index: f,
        threshold,
        left_child: left,
        right_child: right,
    };
    i
}

/// Uniform queries over each feature's range, labelled by the forest.
pub fn random_queries(model: &ForestModel, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            model
                .feature_ranges
                .iter()
                .map(|&[lo, hi]| if hi > lo { rng.gen_range(lo..hi) } else { lo })
                .collect()
        })
        .collect();
    Dataset {
        feature_names: (0..model.n_features).map(|f| format!("f{f}")).collect(),
        labels: x.iter().map(|q| model.predict(q)).collect(),
        x,
    }
}
