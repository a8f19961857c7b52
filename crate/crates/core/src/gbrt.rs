//! Gradient-boosted regression trees with logistic loss.
//!
//! Point-wise learning-to-rank: the model predicts a raw additive relevance
//! score per instance; candidates are only ever compared within one
//! mention's list, so no probability calibration is needed. Split finding
//! is exact over sorted feature values (the feature space is small), leaf
//! values take one Newton step, and fitting is deterministic given the
//! instance order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MODEL_VERSION: u32 = 1;
/// Hessian floor for Newton leaf values.
const HESSIAN_FLOOR: f64 = 1e-16;
/// Minimum squared-error reduction for a split to be kept.
const GAIN_EPS: f64 = 1e-12;
/// Early-stopping patience (rounds without validation improvement).
const PATIENCE: usize = 50;

/// One training instance: a flattened feature vector and a binary label
/// (true = the gold entity).
#[derive(Debug, Clone)]
pub struct TrainInstance {
    pub features: Vec<f64>,
    pub label: bool,
}

/// Boosting hyperparameters. Defaults are the reference configuration:
/// 10000 rounds, learning rate 0.02, depth 4.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbrtParams {
    /// Boosting rounds (number of trees).
    pub rounds: usize,
    /// Shrinkage applied to each tree's output.
    pub learning_rate: f64,
    /// Maximum tree depth in split levels.
    pub max_depth: usize,
    /// Minimum instances per leaf.
    pub min_leaf: usize,
    /// Held-out fraction for early stopping; `None` disables it.
    pub validation_fraction: Option<f64>,
    /// Seed for the validation split (unused otherwise).
    pub seed: u64,
}

impl Default for GbrtParams {
    fn default() -> Self {
        GbrtParams {
            rounds: 10_000,
            learning_rate: 0.02,
            max_depth: 4,
            min_leaf: 1,
            validation_fraction: None,
            seed: 0,
        }
    }
}

impl GbrtParams {
    fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds (eta) must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning rate (beta) must be positive"));
        }
        if self.max_depth == 0 {
            return Err(Error::config("max depth (xi) must be >= 1"));
        }
        if self.min_leaf == 0 {
            return Err(Error::config("min_leaf must be >= 1"));
        }
        if let Some(f) = self.validation_fraction {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::config("validation fraction must be in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// An axis-aligned regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

impl Tree {
    /// Routes an instance to its leaf: `x[feature] <= threshold` goes left.
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn is_leaf_only(&self) -> bool {
        matches!(self.nodes.as_slice(), [TreeNode::Leaf { .. }])
    }
}

/// Fits one regression tree to gradient targets: greedy best split by
/// squared-error reduction on `gradients`, leaf values by one Newton step
/// `sum(gradients) / max(sum(hessians), floor)`. Deterministic given input
/// order; ties prefer the lower feature index, then the lower threshold.
pub fn fit_tree(
    features: &[Vec<f64>],
    gradients: &[f64],
    hessians: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> Tree {
    let rows: Vec<usize> = (0..features.len()).collect();
    let mut nodes = Vec::new();
    grow(
        &mut nodes, features, gradients, hessians, rows, 0, max_depth, min_leaf,
    );
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow(
    nodes: &mut Vec<TreeNode>,
    features: &[Vec<f64>],
    gradients: &[f64],
    hessians: &[f64],
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> usize {
    let make_leaf = |nodes: &mut Vec<TreeNode>, rows: &[usize]| {
        let g: f64 = rows.iter().map(|&i| gradients[i]).sum();
        let h: f64 = rows.iter().map(|&i| hessians[i]).sum();
        nodes.push(TreeNode::Leaf {
            value: g / h.max(HESSIAN_FLOOR),
        });
        nodes.len() - 1
    };

    if depth >= max_depth || rows.len() < 2 * min_leaf {
        return make_leaf(nodes, &rows);
    }
    let Some(split) = best_split(features, gradients, &rows, min_leaf) else {
        return make_leaf(nodes, &rows);
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&i| features[i][split.feature] <= split.threshold);

    let index = nodes.len();
    nodes.push(TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow(
        nodes, features, gradients, hessians, left_rows, depth + 1, max_depth, min_leaf,
    );
    let right = grow(
        nodes, features, gradients, hessians, right_rows, depth + 1, max_depth, min_leaf,
    );
    if let TreeNode::Split {
        left: l, right: r, ..
    } = &mut nodes[index]
    {
        *l = left;
        *r = right;
    }
    index
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Exact best split over all features and all distinct value boundaries.
fn best_split(
    features: &[Vec<f64>],
    gradients: &[f64],
    rows: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = rows.len() as f64;
    let total: f64 = rows.iter().map(|&i| gradients[i]).sum();
    let parent_score = total * total / n;
    let num_features = features[rows[0]].len();

    let mut best: Option<Split> = None;
    let mut sorted: Vec<usize> = Vec::with_capacity(rows.len());
    for feature in 0..num_features {
        sorted.clear();
        sorted.extend_from_slice(rows);
        sorted.sort_by(|&a, &b| features[a][feature].total_cmp(&features[b][feature]));

        let mut left_sum = 0.0;
        for (k, &i) in sorted.iter().enumerate().take(sorted.len() - 1) {
            left_sum += gradients[i];
            let n_left = k + 1;
            let n_right = sorted.len() - n_left;
            let value = features[i][feature];
            let next = features[sorted[k + 1]][feature];
            if value == next || n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / n_right as f64
                - parent_score;
            if gain <= GAIN_EPS {
                continue;
            }
            let threshold = value + (next - value) / 2.0;
            let better = match &best {
                None => true,
                Some(b) => {
                    gain > b.gain
                        || (gain == b.gain
                            && (feature < b.feature
                                || (feature == b.feature && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(Split {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// The boosted ensemble: `score = base_score + beta * sum(tree outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbrtModel {
    learning_rate: f64,
    base_score: f64,
    feature_names: Vec<String>,
    trees: Vec<Tree>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logistic_loss(scores: &[f64], ys: &[f64]) -> f64 {
    scores
        .iter()
        .zip(ys)
        .map(|(&f, &y)| (-y * f).exp().ln_1p())
        .sum()
}

impl GbrtModel {
    /// Fits the ensemble, returning the model and the training logistic
    /// loss curve: entry 0 is the loss of the base score alone, entry `r+1`
    /// the loss after round `r`. With early stopping enabled the curve
    /// covers the rounds actually kept.
    pub fn fit_traced(
        instances: &[TrainInstance],
        params: &GbrtParams,
        feature_names: &[String],
    ) -> Result<(Self, Vec<f64>)> {
        params.validate()?;
        if instances.is_empty() {
            return Err(Error::data("no training instances"));
        }
        let arity = instances[0].features.len();
        if arity == 0 {
            return Err(Error::data("instances have no features"));
        }
        if instances.iter().any(|i| i.features.len() != arity) {
            return Err(Error::data("inconsistent feature arity across instances"));
        }
        if feature_names.len() != arity {
            return Err(Error::data(format!(
                "{} feature names for arity {arity}",
                feature_names.len()
            )));
        }
        let positives = instances.iter().filter(|i| i.label).count();
        if positives == 0 || positives == instances.len() {
            return Err(Error::data("degenerate labels"));
        }

        // Validation split for optional early stopping.
        let (train_idx, valid_idx) = split_validation(instances.len(), params);

        let features: Vec<Vec<f64>> = instances.iter().map(|i| i.features.clone()).collect();
        let ys: Vec<f64> = instances
            .iter()
            .map(|i| if i.label { 1.0 } else { -1.0 })
            .collect();

        let p = positives as f64 / instances.len() as f64;
        let base_score = (p / (1.0 - p)).ln();
        let mut scores = vec![base_score; instances.len()];

        let train_features: Vec<Vec<f64>> =
            train_idx.iter().map(|&i| features[i].clone()).collect();
        let mut gradients = vec![0.0; train_idx.len()];
        let mut hessians = vec![0.0; train_idx.len()];

        let train_loss = |scores: &[f64]| {
            let s: Vec<f64> = train_idx.iter().map(|&i| scores[i]).collect();
            let y: Vec<f64> = train_idx.iter().map(|&i| ys[i]).collect();
            logistic_loss(&s, &y)
        };
        let valid_loss = |scores: &[f64]| {
            let s: Vec<f64> = valid_idx.iter().map(|&i| scores[i]).collect();
            let y: Vec<f64> = valid_idx.iter().map(|&i| ys[i]).collect();
            logistic_loss(&s, &y)
        };

        let mut losses = Vec::with_capacity(params.rounds + 1);
        losses.push(train_loss(&scores));
        let mut trees: Vec<Tree> = Vec::new();
        let mut best_valid = f64::INFINITY;
        let mut best_round = 0usize;

        for round in 0..params.rounds {
            for (slot, &i) in train_idx.iter().enumerate() {
                // Negative gradient and hessian of ln(1 + exp(-y F)).
                gradients[slot] = ys[i] * sigmoid(-ys[i] * scores[i]);
                let s = sigmoid(scores[i]);
                hessians[slot] = (s * (1.0 - s)).max(HESSIAN_FLOOR);
            }
            let tree = fit_tree(
                &train_features,
                &gradients,
                &hessians,
                params.max_depth,
                params.min_leaf,
            );
            for (i, score) in scores.iter_mut().enumerate() {
                *score += params.learning_rate * tree.predict(&features[i]);
            }
            trees.push(tree);
            losses.push(train_loss(&scores));

            if !valid_idx.is_empty() {
                let vl = valid_loss(&scores);
                if vl < best_valid {
                    best_valid = vl;
                    best_round = round + 1;
                } else if round + 1 - best_round >= PATIENCE {
                    trees.truncate(best_round);
                    losses.truncate(best_round + 1);
                    break;
                }
            }
        }

        Ok((
            GbrtModel {
                learning_rate: params.learning_rate,
                base_score,
                feature_names: feature_names.to_vec(),
                trees,
            },
            losses,
        ))
    }

    pub fn fit(
        instances: &[TrainInstance],
        params: &GbrtParams,
        feature_names: &[String],
    ) -> Result<Self> {
        Self::fit_traced(instances, params, feature_names).map(|(model, _)| model)
    }

    /// Raw additive relevance score.
    pub fn predict_score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_names.len() {
            return Err(Error::data(format!(
                "feature arity mismatch: model expects {}, got {}",
                self.feature_names.len(),
                features.len()
            )));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        Ok(self.base_score + self.learning_rate * sum)
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn save_to<W: Write>(&self, w: W) -> Result<()> {
        let json = ModelJson::from(self);
        serde_json::to_writer(w, &json)
            .map_err(|e| Error::format(format!("cannot serialize ranker model: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save_to(&mut file)?;
        use std::io::Write as _;
        file.flush()?;
        Ok(())
    }

    pub fn load_from<R: Read>(r: R) -> Result<Self> {
        let json: ModelJson = serde_json::from_reader(r)
            .map_err(|e| Error::format(format!("invalid ranker model: {e}")))?;
        json.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn split_validation(n: usize, params: &GbrtParams) -> (Vec<usize>, Vec<usize>) {
    match params.validation_fraction {
        None => ((0..n).collect(), Vec::new()),
        Some(frac) => {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut indices: Vec<usize> = (0..n).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
            indices.shuffle(&mut rng);
            let n_valid = ((n as f64 * frac).ceil() as usize).min(n.saturating_sub(2));
            let valid = indices.split_off(n - n_valid);
            (indices, valid)
        }
    }
}

// --- JSON model file: {version, beta, base_score, feature_names, trees} ---

#[derive(Serialize, Deserialize)]
struct ModelJson {
    version: u32,
    beta: f64,
    base_score: f64,
    feature_names: Vec<String>,
    trees: Vec<NodeJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeJson {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<NodeJson>,
        right: Box<NodeJson>,
    },
    Leaf {
        leaf: f64,
    },
}

impl From<&GbrtModel> for ModelJson {
    fn from(model: &GbrtModel) -> Self {
        fn to_json(nodes: &[TreeNode], i: usize) -> NodeJson {
            match &nodes[i] {
                TreeNode::Leaf { value } => NodeJson::Leaf { leaf: *value },
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => NodeJson::Split {
                    feature: *feature,
                    threshold: *threshold,
                    left: Box::new(to_json(nodes, *left)),
                    right: Box::new(to_json(nodes, *right)),
                },
            }
        }
        ModelJson {
            version: MODEL_VERSION,
            beta: model.learning_rate,
            base_score: model.base_score,
            feature_names: model.feature_names.clone(),
            trees: model.trees.iter().map(|t| to_json(&t.nodes, 0)).collect(),
        }
    }
}

impl TryFrom<ModelJson> for GbrtModel {
    type Error = Error;

    fn try_from(json: ModelJson) -> Result<Self> {
        if json.version != MODEL_VERSION {
            return Err(Error::format(format!(
                "unsupported ranker model version {}, expected {MODEL_VERSION}",
                json.version
            )));
        }
        fn from_json(node: &NodeJson, nodes: &mut Vec<TreeNode>, arity: usize) -> Result<usize> {
            match node {
                NodeJson::Leaf { leaf } => {
                    if !leaf.is_finite() {
                        return Err(Error::format("non-finite leaf value"));
                    }
                    nodes.push(TreeNode::Leaf { value: *leaf });
                    Ok(nodes.len() - 1)
                }
                NodeJson::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= arity {
                        return Err(Error::format(format!(
                            "split on feature {feature} but model has {arity} features"
                        )));
                    }
                    let index = nodes.len();
                    nodes.push(TreeNode::Split {
                        feature: *feature,
                        threshold: *threshold,
                        left: 0,
                        right: 0,
                    });
                    let l = from_json(left, nodes, arity)?;
                    let r = from_json(right, nodes, arity)?;
                    if let TreeNode::Split { left, right, .. } = &mut nodes[index] {
                        *left = l;
                        *right = r;
                    }
                    Ok(index)
                }
            }
        }
        let arity = json.feature_names.len();
        let mut trees = Vec::with_capacity(json.trees.len());
        for t in &json.trees {
            let mut nodes = Vec::new();
            from_json(t, &mut nodes, arity)?;
            trees.push(Tree { nodes });
        }
        Ok(GbrtModel {
            learning_rate: json.beta,
            base_score: json.base_score,
            feature_names: json.feature_names,
            trees,
        })
    }
}
