//! Interchange format for trained forests and reference traversal.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CompileError;

/// One node record. Internal nodes carry a split, leaves a class label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNode", into = "RawNode")]
pub enum Node {
    Internal {
        feature_index: usize,
        threshold: f64,
        left_child: usize,
        right_child: usize,
    },
    Leaf {
        class_label: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    #[serde(skip_serializing_if = "Option::is_none")]
    feature_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left_child: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right_child: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_label: Option<usize>,
}

impl TryFrom<RawNode> for Node {
    type Error = String;

    fn try_from(r: RawNode) -> Result<Self, String> {
        match r {
            RawNode {
                feature_index: None,
                threshold: None,
                left_child: None,
                right_child: None,
                class_label: Some(class_label),
            } => Ok(Node::Leaf { class_label }),
            RawNode {
                class_label: Some(_),
                ..
            } => Err("a leaf (`class_label`) must not carry split fields".into()),
            RawNode {
                feature_index,
                threshold,
                left_child,
                right_child,
                class_label: None,
            } => {
                let missing: Vec<&str> = [
                    ("feature_index", feature_index.is_none()),
                    ("threshold", threshold.is_none()),
                    ("left_child", left_child.is_none()),
                    ("right_child", right_child.is_none()),
                ]
                .iter()
                .filter(|(_, m)| *m)
                .map(|(n, _)| *n)
                .collect();
                if !missing.is_empty() {
                    return Err(format!(
                        "internal node is missing field(s) {}",
                        missing.join(", ")
                    ));
                }
                Ok(Node::Internal {
                    feature_index: feature_index.unwrap(),
                    threshold: threshold.unwrap(),
                    left_child: left_child.unwrap(),
                    right_child: right_child.unwrap(),
                })
            }
        }
    }
}

impl From<Node> for RawNode {
    fn from(n: Node) -> Self {
        match n {
            Node::Internal {
                feature_index,
                threshold,
                left_child,
                right_child,
            } => RawNode {
                feature_index: Some(feature_index),
                threshold: Some(threshold),
                left_child: Some(left_child),
                right_child: Some(right_child),
                class_label: None,
            },
            Node::Leaf { class_label } => RawNode {
                class_label: Some(class_label),
                ..RawNode::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeModel {
    pub tree_id: usize,
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn root(&self) -> usize {
        0
    }

    /// Checks that the nodes form one binary tree rooted at index 0 whose
    /// splits and labels fit the forest.
    pub fn validate(&self, n_features: usize, n_classes: usize) -> Result<(), CompileError> {
        let err = |node: usize, msg: String| CompileError::Structure {
            tree: self.tree_id,
            node,
            msg,
        };
        if self.nodes.is_empty() {
            return Err(err(0, "tree has no nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(err(i, "node reached twice (cycle or shared child)".into()));
            }
            seen[i] = true;
            match self.nodes[i] {
                Node::Leaf { class_label } => {
                    if class_label >= n_classes {
                        return Err(err(
                            i,
                            format!("class_label {class_label} >= n_classes {n_classes}"),
                        ));
                    }
                }
                Node::Internal {
                    feature_index,
                    threshold,
                    left_child,
                    right_child,
                } => {
                    if feature_index >= n_features {
                        return Err(err(
                            i,
                            format!("feature_index {feature_index} >= n_features {n_features}"),
                        ));
                    }
                    if !threshold.is_finite() {
                        return Err(err(i, format!("threshold {threshold} is not finite")));
                    }
                    for c in [left_child, right_child] {
                        if c >= self.nodes.len() {
                            return Err(err(
                                i,
                                format!("child {c} out of range ({} nodes)", self.nodes.len()),
                            ));
                        }
                        if c == 0 {
                            return Err(err(i, "child points back to the root".into()));
                        }
                    }
                    if left_child == right_child {
                        return Err(err(i, "left and right child coincide".into()));
                    }
                    stack.push(right_child);
                    stack.push(left_child);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(err(orphan, "node is unreachable from the root".into()));
        }
        Ok(())
    }

    /// Class of the leaf reached by `x`; a split sends `x <= threshold` left.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class_label } => return class_label,
                Node::Internal {
                    feature_index,
                    threshold,
                    left_child,
                    right_child,
                } => {
                    i = if x[feature_index] <= threshold {
                        left_child
                    } else {
                        right_child
                    }
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub feature_ranges: Vec<[f64; 2]>,
    pub trees: Vec<TreeModel>,
}

/// Top-level interchange document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub forest: ForestModel,
}

impl ForestModel {
    pub fn validate(&self) -> Result<(), CompileError> {
        let bad = |msg: String| CompileError::Schema(msg);
        if self.n_features == 0 {
            return Err(bad("n_features must be at least 1".into()));
        }
        if self.n_classes == 0 {
            return Err(bad("n_classes must be at least 1".into()));
        }
        if self.feature_ranges.len() != self.n_features {
            return Err(bad(format!(
                "feature_ranges has {} entries, n_features is {}",
                self.feature_ranges.len(),
                self.n_features
            )));
        }
        for (f, [lo, hi]) in self.feature_ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(bad(format!("feature_ranges[{f}] = [{lo}, {hi}] is invalid")));
            }
        }
        if self.trees.is_empty() {
            return Err(bad("forest has no trees".into()));
        }
        for t in &self.trees {
            t.validate(self.n_features, self.n_classes)?;
        }
        Ok(())
    }

    /// Majority vote over trees; ties go to the smallest label.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        majority(&votes).expect("forest has at least one tree")
    }

    pub fn from_json_str(text: &str) -> Result<Self, CompileError> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| CompileError::Json(e.to_string()))?;
        doc.forest.validate()?;
        Ok(doc.forest)
    }

    pub fn load(path: &Path) -> Result<Self, CompileError> {
        let text = std::fs::read_to_string(path).map_err(|e| CompileError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json_str(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument {
            forest: self.clone(),
        })
        .expect("model serializes")
    }
}

/// Index of the largest count, lowest index on ties; `None` when every count
/// is zero.
pub fn majority(votes: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in votes.iter().enumerate() {
        if v > 0 && best.is_none_or(|b| v > votes[b]) {
            best = Some(k);
        }
    }
    best
}
