//! Positive-definite kernels and the Gram / cross-mean sums built on them.
//!
//! Every inner product between RKHS vectors in this crate reduces to
//! [`weighted_cross_sum`] or [`weighted_self_sum`], i.e. to double sums of
//! kernel evaluations `Σᵢ Σⱼ aᵢ bⱼ k(zᵢ, z'ⱼ)`.
//!
//! | kind | k(z, z') |
//! |------|----------|
//! | `gaussian` | `exp(-‖z-z'‖² / (2σ²))` |
//! | `gaussian_density` | `(2πσ²)^(-d/2) exp(-‖z-z'‖² / (2σ²))` |
//! | `histogram_intersection` | `(1/d) Σ min(zᵢ, z'ᵢ)` |
//! | `rbf_chi2` | `exp(-½ χ²(z, z'))`, `χ² = (1/d) Σ (zᵢ-z'ᵢ)² / (½(zᵢ+z'ᵢ))` |
//! | `linear` | `⟨z, z'⟩ / d` |
//! | `joint_label` | `base(x, x') · [y = y']` |
//!
//! `bandwidth` is the variance σ² for the two Gaussian kinds and unused otherwise.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{PointCloud, PointRef, SampleSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gaussian,
    GaussianDensity,
    HistogramIntersection,
    RbfChi2,
    Linear,
    JointLabel,
}

/// Kernel choice and parameters. Serializes as
/// `{"kind": "...", "bandwidth": ..., "base": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<KernelSpec>>,
}

impl KernelSpec {
    /// Gaussian kernel with unit diagonal; `variance` is σ².
    pub fn gaussian(variance: f64) -> Self {
        Self {
            kind: KernelKind::Gaussian,
            bandwidth: Some(variance),
            base: None,
        }
    }

    /// Gaussian kernel normalized as a probability density in its first argument.
    pub fn gaussian_density(variance: f64) -> Self {
        Self {
            kind: KernelKind::GaussianDensity,
            bandwidth: Some(variance),
            base: None,
        }
    }

    pub fn histogram_intersection() -> Self {
        Self {
            kind: KernelKind::HistogramIntersection,
            bandwidth: None,
            base: None,
        }
    }

    pub fn rbf_chi2() -> Self {
        Self {
            kind: KernelKind::RbfChi2,
            bandwidth: None,
            base: None,
        }
    }

    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            bandwidth: None,
            base: None,
        }
    }

    /// Joint kernel on (input, label) pairs over a base kernel on inputs.
    pub fn joint_label(base: KernelSpec) -> Self {
        Self {
            kind: KernelKind::JointLabel,
            bandwidth: None,
            base: Some(Box::new(base)),
        }
    }

    /// The kernel acting on inputs: `base` for `joint_label`, `self` otherwise.
    pub fn input_kernel(&self) -> &KernelSpec {
        match (self.kind, &self.base) {
            (KernelKind::JointLabel, Some(b)) => b,
            _ => self,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(
            self.kind,
            KernelKind::Gaussian | KernelKind::GaussianDensity
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            KernelKind::Gaussian | KernelKind::GaussianDensity => match self.bandwidth {
                Some(v) if v > 0.0 && v.is_finite() => {}
                other => {
                    return Err(Error::InvalidKernel(format!(
                        "gaussian bandwidth must be positive, got {other:?}"
                    )))
                }
            },
            KernelKind::JointLabel => match &self.base {
                None => return Err(Error::InvalidKernel("joint_label needs a base".into())),
                Some(b) if b.kind == KernelKind::JointLabel => {
                    return Err(Error::InvalidKernel(
                        "joint_label base must act on inputs only".into(),
                    ))
                }
                Some(b) => b.validate()?,
            },
            _ => {}
        }
        if self.kind != KernelKind::JointLabel && self.base.is_some() {
            return Err(Error::InvalidKernel(format!(
                "{:?} kernel takes no base",
                self.kind
            )));
        }
        Ok(())
    }

    fn needs_nonnegative(&self) -> bool {
        matches!(
            self.input_kernel().kind,
            KernelKind::HistogramIntersection | KernelKind::RbfChi2
        )
    }

    /// Checks kernel preconditions on a batch of points.
    ///
    /// Fails on negative coordinates for histogram kernels and on missing labels for
    /// `joint_label`. Logs a warning when some point has `k(z, z) > 1`.
    pub fn check_points(&self, cloud: &PointCloud) -> Result<()> {
        self.validate()?;
        if cloud.is_empty() {
            return Ok(());
        }
        if self.kind == KernelKind::JointLabel && !cloud.is_labeled() {
            return Err(Error::MissingLabel);
        }
        if self.needs_nonnegative() {
            if let Some((index, &value)) = cloud.flat().iter().enumerate().find(|(_, v)| **v < 0.0)
            {
                return Err(Error::NegativeCoordinate {
                    index: index % cloud.dim(),
                    value,
                });
            }
        }
        let worst = (0..cloud.len())
            .map(|i| {
                let p = cloud.point(i);
                self.eval_unchecked(p, p)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > 1.0 + 1e-12 {
            log::warn!("kernel diagonal reaches {worst}; feature norms exceed 1");
        }
        Ok(())
    }

    /// Evaluates `k(a, b)` after checking dimensions and input domain.
    pub fn eval(&self, a: PointRef<'_>, b: PointRef<'_>) -> Result<f64> {
        self.validate()?;
        if a.x.len() != b.x.len() {
            return Err(Error::DimensionMismatch(a.x.len(), b.x.len()));
        }
        if self.kind == KernelKind::JointLabel && (a.y.is_none() || b.y.is_none()) {
            return Err(Error::MissingLabel);
        }
        if self.needs_nonnegative() {
            for (i, &v) in a.x.iter().chain(b.x.iter()).enumerate() {
                if v < 0.0 {
                    return Err(Error::NegativeCoordinate {
                        index: i % a.x.len(),
                        value: v,
                    });
                }
            }
        }
        Ok(self.eval_unchecked(a, b))
    }

    /// Convenience for unlabeled points.
    pub fn eval_x(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.eval(PointRef::unlabeled(a), PointRef::unlabeled(b))
    }

    /// Evaluates without validation. Callers must have checked the inputs.
    #[inline]
    pub fn eval_unchecked(&self, a: PointRef<'_>, b: PointRef<'_>) -> f64 {
        match self.kind {
            KernelKind::Gaussian => {
                let var = self.bandwidth.unwrap_or(1.0);
                (-sq_dist(a.x, b.x) / (2.0 * var)).exp()
            }
            KernelKind::GaussianDensity => {
                let var = self.bandwidth.unwrap_or(1.0);
                density_norm(var, a.x.len()) * (-sq_dist(a.x, b.x) / (2.0 * var)).exp()
            }
            KernelKind::HistogramIntersection => {
                let s: f64 = a.x.iter().zip(b.x).map(|(p, q)| p.min(*q)).sum();
                s / a.x.len() as f64
            }
            KernelKind::RbfChi2 => (-0.5 * chi2(a.x, b.x)).exp(),
            KernelKind::Linear => {
                let s: f64 = a.x.iter().zip(b.x).map(|(p, q)| p * q).sum();
                s / a.x.len() as f64
            }
            KernelKind::JointLabel => {
                if a.y != b.y {
                    return 0.0;
                }
                match &self.base {
                    Some(base) => base.eval_unchecked(a, b),
                    None => 0.0,
                }
            }
        }
    }

    /// Partial derivative of `k(z, b)` with respect to `z`, written into `grad`.
    ///
    /// Only defined for the Gaussian kinds (directly or as a joint-label base).
    pub(crate) fn grad_first(&self, z: PointRef<'_>, b: PointRef<'_>, grad: &mut [f64]) -> bool {
        let k = self.eval_unchecked(z, b);
        let var = match self.input_kernel() {
            s if s.is_gaussian() => s.bandwidth.unwrap_or(1.0),
            _ => return false,
        };
        for ((g, zi), bi) in grad.iter_mut().zip(z.x).zip(b.x) {
            *g = k * (bi - zi) / var;
        }
        true
    }
}

/// Kernel evaluation with per-kernel constants computed once.
#[derive(Clone, Copy)]
pub(crate) struct Evaluator<'a> {
    spec: &'a KernelSpec,
    gauss: Option<GaussConst>,
}

#[derive(Clone, Copy)]
struct GaussConst {
    two_var: f64,
    norm: f64,
    joint: bool,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(spec: &'a KernelSpec, dim: usize) -> Self {
        let joint = spec.kind == KernelKind::JointLabel;
        let inner = spec.input_kernel();
        let gauss = match inner.kind {
            KernelKind::Gaussian | KernelKind::GaussianDensity => {
                let var = inner.bandwidth.unwrap_or(1.0);
                let norm = match inner.kind {
                    KernelKind::GaussianDensity => density_norm(var, dim),
                    _ => 1.0,
                };
                Some(GaussConst {
                    two_var: 2.0 * var,
                    norm,
                    joint,
                })
            }
            _ => None,
        };
        Self { spec, gauss }
    }

    /// Same value, bit for bit, as [`KernelSpec::eval_unchecked`].
    #[inline]
    pub(crate) fn eval(&self, a: PointRef<'_>, b: PointRef<'_>) -> f64 {
        match self.gauss {
            Some(g) => {
                if g.joint && a.y != b.y {
                    return 0.0;
                }
                let e = (-sq_dist(a.x, b.x) / g.two_var).exp();
                if g.norm == 1.0 {
                    e
                } else {
                    g.norm * e
                }
            }
            None => self.spec.eval_unchecked(a, b),
        }
    }
}

impl Evaluator<'_> {
    /// `Σ_{j ≥ start} w[j] k(p, cloud[j])`, summed in index order; `None` weights
    /// mean all ones. Bitwise equal to summing [`Evaluator::eval`] term by term.
    #[inline]
    pub(crate) fn row_sum(
        &self,
        p: PointRef<'_>,
        cloud: &PointCloud,
        w: Option<&[f64]>,
        start: usize,
    ) -> f64 {
        let Some(g) = self.gauss else {
            return (start..cloud.len())
                .map(|j| {
                    let k = self.spec.eval_unchecked(p, cloud.point(j));
                    w.map_or(k, |w| w[j] * k)
                })
                .sum();
        };
        let dim = cloud.dim();
        let flat = cloud.flat();
        let labels = cloud.labels();
        let mut s = 0.0;
        for j in start..cloud.len() {
            if g.joint && labels.map(|l| l[j]) != p.y {
                continue;
            }
            let sq = if dim == 1 {
                let d = p.x[0] - flat[j];
                d * d
            } else {
                sq_dist(p.x, &flat[j * dim..(j + 1) * dim])
            };
            let e = (-sq / g.two_var).exp();
            let k = if g.norm == 1.0 { e } else { g.norm * e };
            s += match w {
                Some(w) => w[j] * k,
                None => k,
            };
        }
        s
    }
}

fn density_norm(var: f64, dim: usize) -> f64 {
    (2.0 * std::f64::consts::PI * var).powf(-(dim as f64) / 2.0)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn chi2(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| {
            let denom = 0.5 * (p + q);
            if denom == 0.0 {
                0.0
            } else {
                (p - q) * (p - q) / denom
            }
        })
        .sum();
    s / a.len() as f64
}

fn check_dims(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if !a.is_empty() && !b.is_empty() && a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// `matrix[i][j] = k(a[i], b[j])`.
pub fn gram(spec: &KernelSpec, a: &PointCloud, b: &PointCloud) -> Result<DMatrix<f64>> {
    check_dims(a, b)?;
    spec.check_points(a)?;
    spec.check_points(b)?;
    let ev = Evaluator::new(spec, a.dim());
    let rows: Vec<Vec<f64>> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let p = a.point(i);
            (0..b.len()).map(|j| ev.eval(p, b.point(j))).collect()
        })
        .collect();
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| rows[i][j]))
}

/// `Σᵢ Σⱼ wa[i] wb[j] k(a[i], b[j])`; `None` weights mean all ones.
///
/// Rows are summed in parallel and reduced sequentially, so the result does not
/// depend on the thread count.
pub fn weighted_cross_sum(
    spec: &KernelSpec,
    wa: Option<&[f64]>,
    a: &PointCloud,
    wb: Option<&[f64]>,
    b: &PointCloud,
) -> Result<f64> {
    check_dims(a, b)?;
    spec.check_points(a)?;
    spec.check_points(b)?;
    Ok(cross_sum_unchecked(spec, wa, a, wb, b))
}

pub(crate) fn cross_sum_unchecked(
    spec: &KernelSpec,
    wa: Option<&[f64]>,
    a: &PointCloud,
    wb: Option<&[f64]>,
    b: &PointCloud,
) -> f64 {
    let ev = Evaluator::new(spec, a.dim());
    let rows: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let row = ev.row_sum(a.point(i), b, wb, 0);
            wa.map_or(row, |w| w[i] * row)
        })
        .collect();
    rows.iter().sum()
}

/// `Σᵢ Σⱼ w[i] w[j] k(a[i], a[j])`, evaluating each unordered pair once.
pub fn weighted_self_sum(spec: &KernelSpec, w: Option<&[f64]>, a: &PointCloud) -> Result<f64> {
    spec.check_points(a)?;
    Ok(self_sum_unchecked(spec, w, a))
}

pub(crate) fn self_sum_unchecked(spec: &KernelSpec, w: Option<&[f64]>, a: &PointCloud) -> f64 {
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let ev = Evaluator::new(spec, a.dim());
    let rows: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let p = a.point(i);
            let off = ev.row_sum(p, a, w, i + 1);
            let wi = weight(i);
            wi * (wi * ev.eval(p, p) + 2.0 * off)
        })
        .collect();
    rows.iter().sum()
}

/// `⟨μ̂(S), μ̂(S')⟩ = (1 / (n n')) Σᵢ Σⱼ k(zᵢ, z'ⱼ)`.
pub fn cross_mean(spec: &KernelSpec, s: &SampleSet, s2: &SampleSet) -> Result<f64> {
    let total = weighted_cross_sum(spec, None, s.points(), None, s2.points())?;
    Ok(total / (s.len() as f64 * s2.len() as f64))
}

/// Cross means between every pair of sets, exploiting symmetry.
pub fn cross_mean_matrix(spec: &KernelSpec, sets: &[&SampleSet]) -> Result<DMatrix<f64>> {
    for s in sets {
        spec.check_points(s.points())?;
    }
    if let Some(first) = sets.first() {
        for s in sets {
            if s.dim() != first.dim() {
                return Err(Error::DimensionMismatch(first.dim(), s.dim()));
            }
        }
    }
    let n = sets.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let ni = sets[i].len() as f64;
        m[(i, i)] = self_sum_unchecked(spec, None, sets[i].points()) / (ni * ni);
        for j in (i + 1)..n {
            let v = cross_sum_unchecked(spec, None, sets[i].points(), None, sets[j].points())
                / (ni * sets[j].len() as f64);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn one_d(v: f64) -> Vec<f64> {
        vec![v]
    }

    #[test]
    fn gaussian_diagonal_is_one() {
        let k = KernelSpec::gaussian(1.0);
        assert_eq!(k.eval_x(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_unit_distance() {
        let k = KernelSpec::gaussian(1.0);
        let v = k.eval_x(&one_d(0.0), &one_d(1.0)).unwrap();
        assert!(close(v, (-0.5f64).exp(), 1e-15));
        assert!(close(v, 0.60653, 1e-5));
    }

    #[test]
    fn joint_label_mismatch_is_zero() {
        let k = KernelSpec::joint_label(KernelSpec::gaussian(1.0));
        let v = k
            .eval(
                PointRef::new(&[0.3], Some(1)),
                PointRef::new(&[0.3], Some(2)),
            )
            .unwrap();
        assert_eq!(v, 0.0);
        let same = k
            .eval(
                PointRef::new(&[0.0], Some(2)),
                PointRef::new(&[1.0], Some(2)),
            )
            .unwrap();
        assert!(close(same, (-0.5f64).exp(), 1e-15));
    }

    #[test]
    fn joint_label_requires_labels() {
        let k = KernelSpec::joint_label(KernelSpec::gaussian(1.0));
        assert!(matches!(k.eval_x(&[0.0], &[0.0]), Err(Error::MissingLabel)));
    }

    #[test]
    fn histogram_intersection_diagonal() {
        let k = KernelSpec::histogram_intersection();
        assert!(close(
            k.eval_x(&[0.2, 0.8], &[0.2, 0.8]).unwrap(),
            0.5,
            1e-15
        ));
    }

    #[test]
    fn histogram_kernels_reject_negative_coordinates() {
        for k in [KernelSpec::histogram_intersection(), KernelSpec::rbf_chi2()] {
            assert!(matches!(
                k.eval_x(&[0.2, -0.1], &[0.2, 0.8]),
                Err(Error::NegativeCoordinate { index: 1, .. })
            ));
        }
    }

    #[test]
    fn chi2_zero_coordinates_contribute_nothing() {
        let k = KernelSpec::rbf_chi2();
        assert_eq!(k.eval_x(&[0.0, 0.5], &[0.0, 0.5]).unwrap(), 1.0);
        // χ² = (1/2)·(0.25/0.25) = 0.5
        let v = k.eval_x(&[0.0, 0.0], &[0.0, 0.5]).unwrap();
        assert!(close(v, (-0.25f64).exp(), 1e-15));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let k = KernelSpec::gaussian(1.0);
        assert!(matches!(
            k.eval_x(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(KernelSpec::gaussian(0.0).validate().is_err());
        assert!(KernelSpec::gaussian(-1.0).validate().is_err());
        let nested = KernelSpec::joint_label(KernelSpec::joint_label(KernelSpec::linear()));
        assert!(nested.validate().is_err());
        let missing = KernelSpec {
            kind: KernelKind::JointLabel,
            bandwidth: None,
            base: None,
        };
        assert!(missing.validate().is_err());
    }

    #[test]
    fn gram_two_points() {
        let a = PointCloud::from_scalars(&[0.0, 1.0]).unwrap();
        let g = gram(&KernelSpec::gaussian(1.0), &a, &a).unwrap();
        let e = (-0.5f64).exp();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(1, 1)], 1.0);
        assert!(close(g[(0, 1)], e, 1e-15));
        assert_eq!(g[(0, 1)], g[(1, 0)]);
    }

    #[test]
    fn gram_of_empty_is_empty() {
        let a = PointCloud::default();
        let b = PointCloud::from_scalars(&[0.0]).unwrap();
        let g = gram(&KernelSpec::gaussian(1.0), &a, &b).unwrap();
        assert_eq!(g.nrows(), 0);
    }

    #[test]
    fn cross_mean_of_two_points() {
        let s = SampleSet::from_scalars(0, &[0.0, 1.0]).unwrap();
        let v = cross_mean(&KernelSpec::gaussian(1.0), &s, &s).unwrap();
        let expected = (2.0 + 2.0 * (-0.5f64).exp()) / 4.0;
        assert!(close(v, expected, 1e-15));
        assert!(close(v, 0.80327, 1e-5));
    }

    #[test]
    fn cross_mean_of_singletons_is_eval() {
        let k = KernelSpec::gaussian(2.0);
        let a = SampleSet::from_scalars(0, &[0.4]).unwrap();
        let b = SampleSet::from_scalars(1, &[-1.3]).unwrap();
        assert_eq!(
            cross_mean(&k, &a, &b).unwrap(),
            k.eval_x(&[0.4], &[-1.3]).unwrap()
        );
    }

    #[test]
    fn self_sum_matches_cross_sum() {
        let k = KernelSpec::gaussian(0.7);
        let a = PointCloud::from_scalars(&[0.0, 0.3, -1.2, 2.5, 0.9]).unwrap();
        let w = [0.1, -0.4, 0.7, 0.2, -0.05];
        let s = weighted_self_sum(&k, Some(&w), &a).unwrap();
        let c = weighted_cross_sum(&k, Some(&w), &a, Some(&w), &a).unwrap();
        assert!(close(s, c, 1e-14));
    }

    #[test]
    fn density_kernel_is_scaled_gaussian() {
        let g = KernelSpec::gaussian(1.0);
        let d = KernelSpec::gaussian_density(1.0);
        let ratio = d.eval_x(&[0.3], &[1.1]).unwrap() / g.eval_x(&[0.3], &[1.1]).unwrap();
        assert!(close(
            ratio,
            1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            1e-15
        ));
    }

    #[test]
    fn spec_json_round_trip() {
        let k = KernelSpec::joint_label(KernelSpec::gaussian(1.5));
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"joint_label","base":{"kind":"gaussian","bandwidth":1.5}}"#
        );
        let back: KernelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);
    }
}
