//! Finite signed-weight combinations of feature maps, `Σᵢ wᵢ φ(zᵢ)`.
//!
//! Empirical mean embeddings, extrapolated predictions and herding targets are
//! all [`WeightedEmbedding`]s. Inner products and distances are evaluated with
//! kernel sums only; feature maps are never materialized.

use std::cmp::Ordering;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernels::{self, KernelSpec};
use crate::sample::{PointCloud, PointRef, SampleSet};

/// `Σᵢ wᵢ φ(zᵢ)` over a nonempty list of atoms. Weights may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedEmbedding {
    weights: Vec<f64>,
    cloud: PointCloud,
}

impl WeightedEmbedding {
    pub fn new(weights: Vec<f64>, cloud: PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::Empty("embedding atoms"));
        }
        if weights.len() != cloud.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} atoms",
                weights.len(),
                cloud.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite atom weight".into()));
        }
        Ok(Self { weights, cloud })
    }

    /// Single atom `w φ(z)`.
    pub fn atom(w: f64, p: PointRef<'_>) -> Result<Self> {
        let mut cloud = PointCloud::default();
        cloud.push(p)?;
        Self::new(vec![w], cloud)
    }

    /// Concatenates `Σ_b coef_b μ̂(S_b)`, i.e. atoms `(coef_b / n_b, z)` for every
    /// point of every block, in block order.
    pub fn from_blocks(blocks: &[(f64, &SampleSet)]) -> Result<Self> {
        let mut weights = Vec::new();
        let mut cloud = PointCloud::default();
        for (coef, set) in blocks {
            let w = coef / set.len() as f64;
            weights.extend(std::iter::repeat(w).take(set.len()));
            cloud.extend(set.points())?;
        }
        Self::new(weights, cloud)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, PointRef<'_>)> + '_ {
        self.weights.iter().copied().zip(self.cloud.iter())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True when every weight is nonnegative and all weights are equal.
    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        w0 >= 0.0 && self.weights.iter().all(|&w| w == w0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * c).collect(),
            cloud: self.cloud.clone(),
        }
    }

    /// Removes atoms whose weight is exactly zero. Fails if nothing is left.
    pub fn compact(&self) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.weights[i] != 0.0)
            .collect();
        let weights = keep.iter().map(|&i| self.weights[i]).collect();
        Self::new(weights, self.cloud.select(&keep))
    }

    /// Same atoms with labels dropped.
    pub fn without_labels(&self) -> Self {
        Self {
            weights: self.weights.clone(),
            cloud: self.cloud.without_labels(),
        }
    }

    /// Interprets uniformly weighted atoms as a sample set.
    pub fn to_sample_set(&self, time_index: i64) -> Result<SampleSet> {
        if !self.is_uniform() {
            return Err(Error::SignedPrediction);
        }
        SampleSet::from_cloud(time_index, self.cloud.clone())
    }

    // Total order on embeddings used to make symmetric quantities bitwise symmetric.
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| {
                let a = self
                    .weights
                    .iter()
                    .chain(self.cloud.flat())
                    .map(|v| v.to_bits());
                let b = other
                    .weights
                    .iter()
                    .chain(other.cloud.flat())
                    .map(|v| v.to_bits());
                a.cmp(b)
            })
            .then_with(|| self.cloud.labels().cmp(&other.cloud.labels()))
    }
}

/// Empirical mean embedding: atoms `(1/n, zᵢ)`.
pub fn embed(s: &SampleSet) -> WeightedEmbedding {
    let n = s.len();
    WeightedEmbedding {
        weights: vec![1.0 / n as f64; n],
        cloud: s.points().clone(),
    }
}

/// `Σᵢ Σⱼ wᵢ w'ⱼ k(zᵢ, z'ⱼ)`.
pub fn inner(e: &WeightedEmbedding, e2: &WeightedEmbedding, spec: &KernelSpec) -> Result<f64> {
    if std::ptr::eq(e, e2) {
        return kernels::weighted_self_sum(spec, Some(&e.weights), &e.cloud);
    }
    kernels::weighted_cross_sum(
        spec,
        Some(&e.weights),
        &e.cloud,
        Some(&e2.weights),
        &e2.cloud,
    )
}

/// Squared RKHS norm `‖e‖²`, evaluating each unordered atom pair once.
pub fn norm_sq(e: &WeightedEmbedding, spec: &KernelSpec) -> Result<f64> {
    kernels::weighted_self_sum(spec, Some(&e.weights), &e.cloud)
}

/// `‖e - e2‖` in the RKHS. Negative squared distances from round-off are clamped to 0.
///
/// The result is bitwise symmetric in its arguments and exactly zero for identical inputs.
pub fn rkhs_distance(
    e: &WeightedEmbedding,
    e2: &WeightedEmbedding,
    spec: &KernelSpec,
) -> Result<f64> {
    if e.dim() != e2.dim() {
        return Err(Error::DimensionMismatch(e.dim(), e2.dim()));
    }
    let (a, b) = match e.canonical_cmp(e2) {
        Ordering::Equal => {
            spec.check_points(&e.cloud)?;
            return Ok(0.0);
        }
        Ordering::Less => (e, e2),
        Ordering::Greater => (e2, e),
    };
    let aa = norm_sq(a, spec)?;
    let bb = norm_sq(b, spec)?;
    let ab = inner(a, b, spec)?;
    Ok((aa + bb - 2.0 * ab).max(0.0).sqrt())
}

/// `Ẽ[f] = Σᵢ wᵢ f(zᵢ)`; the empirical mean of `f` when the weights are uniform.
pub fn pseudo_expectation<F>(e: &WeightedEmbedding, f: F) -> f64
where
    F: Fn(PointRef<'_>) -> f64,
{
    e.atoms().map(|(w, p)| w * f(p)).sum()
}

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    w: f64,
    x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<i64>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord {
    atoms: Vec<AtomRecord>,
}

impl Serialize for WeightedEmbedding {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let atoms = self
            .atoms()
            .map(|(w, p)| AtomRecord {
                w,
                x: p.x.to_vec(),
                y: p.y,
            })
            .collect();
        EmbeddingRecord { atoms }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WeightedEmbedding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rec = EmbeddingRecord::deserialize(deserializer)?;
        let mut cloud = PointCloud::default();
        let mut weights = Vec::with_capacity(rec.atoms.len());
        for a in &rec.atoms {
            cloud
                .push(PointRef::new(&a.x, a.y))
                .map_err(serde::de::Error::custom)?;
            weights.push(a.w);
        }
        WeightedEmbedding::new(weights, cloud).map_err(serde::de::Error::custom)
    }
}
