//! Linear max-margin classifiers trained on a predicted distribution.
//!
//! A prediction `Σ_t β_t μ̂_t` over labeled sample sets gives a weighted training
//! set whose weights `β_t / n_t` may be negative. For binary 0/1 loss
//! `ℓ(y, ŷ) = 1 - ℓ(-y, ŷ)`, so a negative-weight sample is equivalent (up to an
//! additive constant) to a positive-weight sample with flipped label. After that
//! transform the hinge-loss bound is an ordinary per-sample-weighted SVM:
//!
//! ```text
//! min_w  ½‖w‖² + C Σᵢ bᵢ max(0, 1 - ȳᵢ ⟨w, x̃ᵢ⟩),   x̃ᵢ = (xᵢ, 1)
//! ```
//!
//! solved here by dual coordinate descent with box constraints `0 ≤ αᵢ ≤ C bᵢ`.
//! The bias is the last coordinate of `w` and is regularized with it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::WeightedEmbedding;
use crate::error::{Error, Result};
use crate::sample::SampleSet;

/// `C ∈ {10⁰, …, 10⁶}`.
pub const DEFAULT_C_GRID: [f64; 7] = [1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6];

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedItem {
    /// `b > 0`.
    pub weight: f64,
    pub x: Vec<f64>,
    /// Original class label.
    pub label: i64,
    /// Whether the label is negated (source weight was negative).
    pub flipped: bool,
}

/// Positive-weight training set after the label-flip transform.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedTrainingSet {
    items: Vec<WeightedItem>,
    classes: Vec<i64>,
    dim: usize,
    /// Additive constant between the signed-weight 0/1 risk and the transformed
    /// one; irrelevant for optimization.
    pub constant_offset: f64,
}

impl WeightedTrainingSet {
    pub fn new(items: Vec<WeightedItem>, constant_offset: f64) -> Result<Self> {
        let dim = items
            .first()
            .map(|i| i.x.len())
            .ok_or(Error::Empty("training set"))?;
        for it in &items {
            if it.x.len() != dim {
                return Err(Error::DimensionMismatch(dim, it.x.len()));
            }
            if !(it.weight > 0.0 && it.weight.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "training weights must be positive, got {}",
                    it.weight
                )));
            }
        }
        let mut classes: Vec<i64> = items.iter().map(|i| i.label).collect();
        classes.sort_unstable();
        classes.dedup();
        Ok(Self {
            items,
            classes,
            dim,
            constant_offset,
        })
    }

    /// Unflipped items from labeled sample sets, each with the given weight.
    pub fn from_sets(sets: &[&SampleSet], weight: f64) -> Result<Self> {
        let mut items = Vec::new();
        for s in sets {
            let labels = s.labels().ok_or(Error::MissingLabel)?;
            for (i, &y) in labels.iter().enumerate() {
                items.push(WeightedItem {
                    weight,
                    x: s.points().x(i).to_vec(),
                    label: y,
                    flipped: false,
                });
            }
        }
        Self::new(items, 0.0)
    }

    pub fn items(&self) -> &[WeightedItem] {
        &self.items
    }

    pub fn classes(&self) -> &[i64] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `±1` targets for a one-vs-rest problem with `positive` as the positive class,
    /// negated for flipped items.
    pub fn targets(&self, positive: i64) -> Vec<f64> {
        self.items
            .iter()
            .map(|it| {
                let y = if it.label == positive { 1.0 } else { -1.0 };
                if it.flipped {
                    -y
                } else {
                    y
                }
            })
            .collect()
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let items: Vec<WeightedItem> = idx.iter().map(|&i| self.items[i].clone()).collect();
        Self {
            items,
            classes: self.classes.clone(),
            dim: self.dim,
            constant_offset: 0.0,
        }
    }

    /// Weighted 0/1 loss on the transformed problem: a flipped item counts as an
    /// error when the classifier predicts its original label.
    pub fn weighted_error(&self, clf: &LinearClassifier) -> Result<f64> {
        let mut err = 0.0;
        for it in &self.items {
            let pred = clf.predict(&it.x)?;
            if (pred == it.label) == it.flipped {
                err += it.weight;
            }
        }
        Ok(err)
    }

    pub fn total_weight(&self) -> f64 {
        self.items.iter().map(|i| i.weight).sum()
    }
}

/// Label-flip transform of a labeled signed-weight prediction.
///
/// Every atom `(w, x, y)` with `w ≠ 0` becomes `(|w|, x, sign(w)·y)`. With atoms
/// `(β_t / n_t, z)` this is `b_t = |β_t| / n_t` and `ȳ = sign(β_t) y`. Zero-weight
/// atoms are dropped. `constant_offset` is the sum of the negative atom weights,
/// i.e. `Σ_{β_t < 0} β_t`.
pub fn flip_transform(pred: &WeightedEmbedding) -> Result<WeightedTrainingSet> {
    let mut items = Vec::with_capacity(pred.len());
    let mut offset = 0.0;
    for (w, p) in pred.atoms() {
        let label = p.y.ok_or(Error::MissingLabel)?;
        if w == 0.0 {
            continue;
        }
        if w < 0.0 {
            offset += w;
        }
        items.push(WeightedItem {
            weight: w.abs(),
            x: p.x.to_vec(),
            label,
            flipped: w < 0.0,
        });
    }
    WeightedTrainingSet::new(items, offset)
}

/// One `(w, bias)` pair per class; a binary classifier has exactly one, for
/// `classes[1]` against `classes[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub classes: Vec<i64>,
    pub w: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
}

impl LinearClassifier {
    pub fn is_binary(&self) -> bool {
        self.w.len() == 1
    }

    pub fn dim(&self) -> usize {
        self.w[0].len()
    }

    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(self.dim(), x.len()));
        }
        Ok(self
            .w
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect())
    }

    /// Binary: `classes[1]` when the decision value is `>= 0`. Multiclass: the class
    /// with the largest decision value, ties to the lowest label.
    pub fn predict(&self, x: &[f64]) -> Result<i64> {
        let d = self.decision_values(x)?;
        if self.is_binary() {
            return Ok(if d[0] >= 0.0 {
                self.classes[1]
            } else {
                self.classes[0]
            });
        }
        let mut best = 0;
        for k in 1..d.len() {
            if d[k] > d[best] {
                best = k;
            }
        }
        Ok(self.classes[best])
    }

    /// Fraction of correctly classified points of a labeled set.
    pub fn accuracy(&self, s: &SampleSet) -> Result<f64> {
        let labels = s.labels().ok_or(Error::MissingLabel)?;
        let mut hits = 0usize;
        for (i, &y) in labels.iter().enumerate() {
            if self.predict(s.points().x(i))? == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / labels.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmOptions {
    /// Stop when `primal - dual <= tol · max(1, primal)`.
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_epochs: 100_000,
        }
    }
}

/// Outcome of one binary subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveStats {
    pub epochs: usize,
    pub primal: f64,
    pub dual: f64,
}

impl SolveStats {
    pub fn gap(&self) -> f64 {
        self.primal - self.dual
    }
}

/// Trains with default solver options.
pub fn train(ts: &WeightedTrainingSet, c: f64) -> Result<LinearClassifier> {
    train_with(ts, c, &SvmOptions::default()).map(|(clf, _)| clf)
}

/// Trains and reports per-subproblem solver statistics. Binary problems need both
/// target signs present after flipping; more classes use one-vs-rest.
pub fn train_with(
    ts: &WeightedTrainingSet,
    c: f64,
    opts: &SvmOptions,
) -> Result<(LinearClassifier, Vec<SolveStats>)> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "C must be positive, got {c}"
        )));
    }
    let classes = ts.classes().to_vec();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let upper: Vec<f64> = ts.items.iter().map(|it| c * it.weight).collect();
    let positives: Vec<i64> = if classes.len() == 2 {
        vec![classes[1]]
    } else {
        classes.clone()
    };
    let mut ws = Vec::with_capacity(positives.len());
    let mut biases = Vec::with_capacity(positives.len());
    let mut stats = Vec::with_capacity(positives.len());
    for &pos in &positives {
        let y = ts.targets(pos);
        if classes.len() == 2 && (y.iter().all(|v| *v > 0.0) || y.iter().all(|v| *v < 0.0)) {
            return Err(Error::SingleClass);
        }
        let (mut w, st) = solve_dual(&ts.items, &y, &upper, opts)?;
        biases.push(w.pop().expect("augmented weight vector"));
        ws.push(w);
        stats.push(st);
    }
    Ok((
        LinearClassifier {
            classes,
            w: ws,
            bias: biases,
            c,
        },
        stats,
    ))
}

/// `½‖w‖² + Σᵢ upperᵢ max(0, 1 - yᵢ⟨w, x̃ᵢ⟩)` for an augmented `w`.
pub fn primal_objective(items: &[WeightedItem], y: &[f64], upper: &[f64], w_aug: &[f64]) -> f64 {
    let reg = 0.5 * w_aug.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = items
        .iter()
        .zip(y)
        .zip(upper)
        .map(|((it, yi), u)| u * (1.0 - yi * aug_dot(w_aug, &it.x)).max(0.0))
        .sum();
    reg + loss
}

#[inline]
fn aug_dot(w_aug: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    w_aug[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w_aug[d]
}

fn weights_from_dual(items: &[WeightedItem], y: &[f64], alpha: &[f64], dim: usize) -> Vec<f64> {
    let mut w = vec![0.0; dim + 1];
    for ((it, yi), a) in items.iter().zip(y).zip(alpha) {
        if *a == 0.0 {
            continue;
        }
        let s = a * yi;
        w[..dim]
            .iter_mut()
            .zip(&it.x)
            .for_each(|(wj, xj)| *wj += s * xj);
        w[dim] += s;
    }
    w
}

fn solve_dual(
    items: &[WeightedItem],
    y: &[f64],
    upper: &[f64],
    opts: &SvmOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = items.len();
    let dim = items[0].x.len();
    let qdiag: Vec<f64> = items
        .iter()
        .map(|it| it.x.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim + 1];
    let mut last = SolveStats {
        epochs: 0,
        primal: f64::INFINITY,
        dual: f64::NEG_INFINITY,
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let g = y[i] * aug_dot(&w, &items[i].x) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper[i] {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let old = alpha[i];
            let new = (old - g / qdiag[i]).clamp(0.0, upper[i]);
            let delta = (new - old) * y[i];
            if delta != 0.0 {
                alpha[i] = new;
                w[..dim]
                    .iter_mut()
                    .zip(&items[i].x)
                    .for_each(|(wj, xj)| *wj += delta * xj);
                w[dim] += delta;
            }
        }
        // Recompute w from α to keep incremental round-off out of the gap.
        w = weights_from_dual(items, y, &alpha, dim);
        let norm_sq: f64 = w.iter().map(|v| v * v).sum();
        let primal = primal_objective(items, y, upper, &w);
        let dual = alpha.iter().sum::<f64>() - 0.5 * norm_sq;
        last = SolveStats {
            epochs: epoch,
            primal,
            dual,
        };
        if primal - dual <= opts.tol * primal.max(1.0) {
            return Ok((w, last));
        }
    }
    Err(Error::NotConverged {
        epochs: last.epochs,
        gap: last.gap(),
    })
}

/// Cross-validation outcome for one candidate `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct CvScore {
    pub c: f64,
    /// Mean weighted validation error, or `None` if training failed on some fold.
    pub error: Option<f64>,
}

/// Picks `C` from `grid` by `folds`-fold cross-validation on the weighted,
/// transformed training set. Ties go to the smaller `C`.
pub fn select_c(
    ts: &WeightedTrainingSet,
    grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &SvmOptions,
) -> Result<(f64, Vec<CvScore>)> {
    if folds < 2 || folds > ts.len() {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= folds <= {}, got {folds}",
            ts.len()
        )));
    }
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: Vec<usize> = {
        let mut f = vec![0; ts.len()];
        for (rank, &i) in order.iter().enumerate() {
            f[i] = rank % folds;
        }
        f
    };
    let mut scores = Vec::with_capacity(grid.len());
    for &c in grid {
        let mut total = 0.0;
        let mut ok = true;
        for k in 0..folds {
            let train_idx: Vec<usize> = (0..ts.len()).filter(|&i| fold_of[i] != k).collect();
            let val_idx: Vec<usize> = (0..ts.len()).filter(|&i| fold_of[i] == k).collect();
            let val = ts.subset(&val_idx);
            match train_with(&ts.subset(&train_idx), c, opts) {
                Ok((clf, _)) => total += val.weighted_error(&clf)? / val.total_weight(),
                Err(e) => {
                    log::debug!("C = {c}: fold {k} failed: {e}");
                    ok = false;
                    break;
                }
            }
        }
        scores.push(CvScore {
            c,
            error: ok.then(|| total / folds as f64),
        });
    }
    let best = scores
        .iter()
        .filter_map(|s| s.error.map(|e| (s.c, e)))
        .fold(None, |acc: Option<(f64, f64)>, (c, e)| match acc {
            Some((_, be)) if be <= e => acc,
            _ => Some((c, e)),
        })
        .ok_or_else(|| {
            Error::InvalidArgument("no C value could be trained on every fold".into())
        })?;
    Ok((best.0, scores))
}
