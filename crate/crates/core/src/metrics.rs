//! Evaluation measures: RKHS distance between embeddings and KL divergence
//! between kernel density estimates of 1-D sample sets.

use serde::{Deserialize, Serialize};

use crate::embedding::{embed, rkhs_distance, WeightedEmbedding};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::sample::SampleSet;

/// Default number of grid points for density estimates.
pub const GRID_POINTS: usize = 2048;

/// Floor applied to both densities before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Density values on a uniform grid, normalized to unit trapezoidal integral.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub spacing: f64,
}

impl DensityGrid {
    /// Builds a grid from raw densities and rescales it to integrate to one.
    pub fn normalized(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ps.len() {
            return Err(Error::InvalidArgument(format!(
                "density grid needs >= 2 matching points, got {} xs and {} ps",
                xs.len(),
                ps.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "grid must be strictly increasing".into(),
            ));
        }
        if ps.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument(
                "densities must be nonnegative".into(),
            ));
        }
        let spacing = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        let mut g = Self { xs, ps, spacing };
        let z = g.integral();
        if !(z > 0.0) {
            return Err(Error::InvalidArgument(
                "density integrates to zero on the grid".into(),
            ));
        }
        g.ps.iter_mut().for_each(|p| *p /= z);
        Ok(g)
    }

    /// Trapezoidal integral of the densities.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.xs, &self.ps)
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Gaussian kernel density estimate of a 1-D sample set on `grid`.
pub fn kde(s: &SampleSet, bandwidth: f64, grid: &[f64]) -> Result<DensityGrid> {
    if s.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "density estimation needs 1-D points, got dimension {}",
            s.dim()
        )));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    // Sorting makes the estimate independent of the input order, bit for bit.
    let mut pts: Vec<f64> = s.points().flat().to_vec();
    pts.sort_by(f64::total_cmp);
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * bandwidth * pts.len() as f64);
    let inv = 1.0 / bandwidth;
    let ps = grid
        .iter()
        .map(|&x| {
            norm * pts
                .iter()
                .map(|&p| {
                    let u = (x - p) * inv;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    DensityGrid::normalized(grid.to_vec(), ps)
}

/// `∫ p log(p / q)` by the trapezoidal rule, with both densities floored at
/// [`DENSITY_FLOOR`].
pub fn kl_divergence(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    if p.xs != q.xs {
        return Err(Error::GridMismatch);
    }
    let integrand: Vec<f64> =
        p.ps.iter()
            .zip(&q.ps)
            .map(|(&a, &b)| {
                let a = a.max(DENSITY_FLOOR);
                let b = b.max(DENSITY_FLOOR);
                a * (a / b).ln()
            })
            .collect();
    Ok(trapezoid(&p.xs, &integrand))
}

/// A prediction to evaluate: a signed-weight embedding or a proper sample set.
#[derive(Clone, Copy, Debug)]
pub enum Prediction<'a> {
    Weighted(&'a WeightedEmbedding),
    Samples(&'a SampleSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    /// Whether to compute KL divergence. Fails for signed-weight predictions.
    pub kl: bool,
    /// KDE bandwidth; defaults to the kernel's σ.
    pub kde_bandwidth: Option<f64>,
    pub grid_points: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            kl: false,
            kde_bandwidth: None,
            grid_points: GRID_POINTS,
        }
    }
}

/// Serialized as `{"hs_distance": ..., "kl": ..., "n_pred": ..., "n_ref": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub hs_distance: f64,
    pub kl: Option<f64>,
    pub n_pred: usize,
    pub n_ref: usize,
}

/// σ of the kernel's input part when it is Gaussian, else 1.
pub fn default_kde_bandwidth(spec: &KernelSpec) -> f64 {
    let k = spec.input_kernel();
    if k.is_gaussian() {
        k.bandwidth.unwrap_or(1.0).sqrt()
    } else {
        1.0
    }
}

/// Compares a prediction with a reference sample set.
///
/// KL is `KL(reference ‖ prediction)` between KDEs on a shared grid covering the
/// pooled sample range padded by three bandwidths.
pub fn evaluate_prediction(
    pred: Prediction<'_>,
    reference: &SampleSet,
    spec: &KernelSpec,
    opts: &EvalOptions,
) -> Result<Report> {
    let ref_embedding = embed(reference);
    let (pred_embedding, pred_set) = match pred {
        Prediction::Weighted(e) => (e.clone(), None),
        Prediction::Samples(s) => (embed(s), Some(s)),
    };
    let hs_distance = rkhs_distance(&pred_embedding, &ref_embedding, spec)?;
    let kl = if opts.kl {
        let pred_set = pred_set.ok_or(Error::SignedPrediction)?;
        let h = opts
            .kde_bandwidth
            .unwrap_or_else(|| default_kde_bandwidth(spec));
        let grid = pooled_grid(&[pred_set, reference], h, opts.grid_points)?;
        let p = kde(reference, h, &grid)?;
        let q = kde(pred_set, h, &grid)?;
        Some(kl_divergence(&p, &q)?)
    } else {
        None
    };
    Ok(Report {
        hs_distance,
        kl,
        n_pred: pred_embedding.len(),
        n_ref: reference.len(),
    })
}

/// Grid over the pooled range of 1-D sets padded by `3h`.
pub fn pooled_grid(sets: &[&SampleSet], h: f64, points: usize) -> Result<Vec<f64>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in sets {
        if s.dim() != 1 {
            return Err(Error::InvalidArgument(
                "KL evaluation needs 1-D points".into(),
            ));
        }
        let (a, b) = s.points().range(0).expect("sample sets are nonempty");
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok(uniform_grid(lo - 3.0 * h, hi + 3.0 * h, points))
}
