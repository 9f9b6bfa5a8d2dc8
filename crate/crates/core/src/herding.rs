//! Kernel herding: greedy selection of uniformly weighted samples whose mean
//! embedding approximates a target RKHS vector `η`.
//!
//! Step `n` picks `argmax_z ⟨φ(z), η⟩ - (1/n) Σ_{i<n} k(z, z̄ᵢ)`. The argmax over
//! the continuous domain is replaced by an exhaustive scan of a finite candidate
//! pool, optionally followed by a few gradient-ascent steps for Gaussian kernels.
//! Pool points may be selected repeatedly. Ties go to the lowest pool index.

use rayon::prelude::*;

use crate::embedding::WeightedEmbedding;
use crate::error::{Error, Result};
use crate::kernels::{self, KernelSpec};
use crate::sample::{PointCloud, PointRef, SampleSet};

#[derive(Clone, Debug)]
pub struct HerdingConfig {
    /// Number of samples to produce.
    pub m: usize,
    pub candidate_pool: PointCloud,
    /// Gradient-ascent steps applied to each selected candidate (Gaussian kernels only).
    pub refine_steps: usize,
    pub refine_step_size: f64,
}

impl HerdingConfig {
    pub fn new(m: usize, candidate_pool: PointCloud) -> Self {
        Self {
            m,
            candidate_pool,
            refine_steps: 0,
            refine_step_size: 0.1,
        }
    }

    fn validate(&self, spec: &KernelSpec) -> Result<()> {
        if self.candidate_pool.is_empty() {
            return Err(Error::Empty("herding candidate pool"));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument(
                "herding output size must be positive".into(),
            ));
        }
        if self.refine_steps > 0 {
            if !spec.input_kernel().is_gaussian() {
                return Err(Error::InvalidArgument(
                    "gradient refinement needs a Gaussian kernel".into(),
                ));
            }
            if !(self.refine_step_size > 0.0) {
                return Err(Error::InvalidArgument(
                    "refine step size must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Default candidate pool: every observed point, plus (for 1-D data) a uniform grid
/// of `grid_points` over the observed range padded by `pad` on each side.
pub fn default_pool(sets: &[SampleSet], grid_points: usize, pad: f64) -> Result<PointCloud> {
    let mut pool = PointCloud::concat(sets.iter().map(SampleSet::points))?;
    if pool.dim() == 1 && grid_points > 0 {
        let (lo, hi) = pool.range(0).expect("nonempty pool");
        let (lo, hi) = (lo - pad, hi + pad);
        let labeled = pool.labels().map(|l| l.to_vec());
        match labeled {
            // one grid copy per label so that labeled targets can be matched
            Some(labels) => {
                let mut classes = labels;
                classes.sort_unstable();
                classes.dedup();
                for c in classes {
                    for x in grid(lo, hi, grid_points) {
                        pool.push(PointRef::new(&[x], Some(c)))?;
                    }
                }
            }
            None => {
                for x in grid(lo, hi, grid_points) {
                    pool.push(PointRef::unlabeled(&[x]))?;
                }
            }
        }
    }
    Ok(pool)
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 {
        (hi - lo) / (n - 1) as f64
    } else {
        0.0
    };
    (0..n).map(move |i| lo + step * i as f64)
}

/// `Σᵢ wᵢ k(z, zᵢ) - (1/n) Σ_{i<n} k(z, z̄ᵢ)` with `n = |selected| + 1`.
pub fn herding_objective(
    target: &WeightedEmbedding,
    selected: &PointCloud,
    z: PointRef<'_>,
    spec: &KernelSpec,
) -> Result<f64> {
    let probe = WeightedEmbedding::atom(1.0, z)?;
    let attraction = kernels::weighted_cross_sum(
        spec,
        Some(target.weights()),
        target.points(),
        None,
        probe.points(),
    )?;
    let repulsion = kernels::weighted_cross_sum(spec, None, selected, None, probe.points())?;
    Ok(attraction - repulsion / (selected.len() + 1) as f64)
}

/// Runs `cfg.m` herding steps against `target`. The result has time index 0.
pub fn herd(
    target: &WeightedEmbedding,
    spec: &KernelSpec,
    cfg: &HerdingConfig,
) -> Result<SampleSet> {
    cfg.validate(spec)?;
    let pool = &cfg.candidate_pool;
    if pool.dim() != target.dim() {
        return Err(Error::DimensionMismatch(target.dim(), pool.dim()));
    }
    spec.check_points(pool)?;
    spec.check_points(target.points())?;

    let ev = kernels::Evaluator::new(spec, pool.dim());
    let attraction: Vec<f64> = (0..pool.len())
        .into_par_iter()
        .map(|c| ev.row_sum(pool.point(c), target.points(), Some(target.weights()), 0))
        .collect();
    let mut repulsion = vec![0.0; pool.len()];
    let mut selected = PointCloud::default();

    for step in 1..=cfg.m {
        let inv_n = 1.0 / step as f64;
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for c in 0..pool.len() {
            let v = attraction[c] - repulsion[c] * inv_n;
            if v > best_val {
                best_val = v;
                best = c;
            }
        }
        let chosen: Vec<f64> = if cfg.refine_steps > 0 {
            refine(target, &selected, pool.point(best), best_val, spec, cfg)
        } else {
            pool.x(best).to_vec()
        };
        let z = PointRef::new(&chosen, pool.label(best));
        selected.push(z)?;
        repulsion
            .par_iter_mut()
            .enumerate()
            .for_each(|(c, r)| *r += ev.eval(pool.point(c), z));
    }
    SampleSet::from_cloud(0, selected)
}

fn refine(
    target: &WeightedEmbedding,
    selected: &PointCloud,
    start: PointRef<'_>,
    start_val: f64,
    spec: &KernelSpec,
    cfg: &HerdingConfig,
) -> Vec<f64> {
    let objective = |x: &[f64]| -> f64 {
        let z = PointRef::new(x, start.y);
        let attract: f64 = target
            .atoms()
            .map(|(w, a)| w * spec.eval_unchecked(z, a))
            .sum();
        let repel: f64 = selected.iter().map(|s| spec.eval_unchecked(z, s)).sum();
        attract - repel / (selected.len() + 1) as f64
    };
    let dim = start.x.len();
    let mut best = start.x.to_vec();
    let mut best_val = start_val;
    let mut x = best.clone();
    let mut grad = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let inv_n = 1.0 / (selected.len() + 1) as f64;
    for _ in 0..cfg.refine_steps {
        grad.iter_mut().for_each(|v| *v = 0.0);
        let z = PointRef::new(&x, start.y);
        for (w, a) in target.atoms() {
            if spec.grad_first(z, a, &mut g) {
                grad.iter_mut().zip(&g).for_each(|(t, d)| *t += w * d);
            }
        }
        for s in selected.iter() {
            if spec.grad_first(z, s, &mut g) {
                grad.iter_mut().zip(&g).for_each(|(t, d)| *t -= inv_n * d);
            }
        }
        x.iter_mut()
            .zip(&grad)
            .for_each(|(xi, gi)| *xi += cfg.refine_step_size * gi);
        let v = objective(&x);
        if v > best_val {
            best_val = v;
            best.copy_from_slice(&x);
        }
    }
    best
}
