//! With the linear kernel the feature map is explicit, so the kernel route can be
//! checked against ridge regression on the embedding vectors themselves. Also
//! evaluates both sides of the one-step error bound on that fit.

use edd::dynamics::oracle::{explicit_oracle_fit, lemma1_gap, BoundSetup};
use edd::{fit, KernelSpec, SampleSet};
use nalgebra::{DMatrix, DVector};

fn mean(s: &SampleSet) -> DVector<f64> {
    let d = s.dim();
    let mut m = DVector::zeros(d);
    for p in s.points().iter() {
        m += DVector::from_column_slice(p.x);
    }
    m / (s.len() as f64 * (d as f64).sqrt())
}

fn main() -> edd::Result<()> {
    // a point cloud drifting along a fixed rotation
    let rot = DMatrix::from_row_slice(2, 2, &[0.96, -0.28, 0.28, 0.96]);
    let base = [[0.3, 0.1], [0.5, -0.2], [0.1, 0.4], [0.6, 0.2]];
    let mut sets = Vec::new();
    let mut cur: Vec<DVector<f64>> = base.iter().map(|p| DVector::from_row_slice(p)).collect();
    for t in 1..=5 {
        sets.push(SampleSet::new(
            t,
            cur.iter().map(|v| v.iter().copied().collect()).collect(),
            None,
        )?);
        cur = cur.iter().map(|v| &rot * v).collect();
    }
    let lambda = 1e-3;
    let pred = fit(sets.clone(), KernelSpec::linear(), lambda, None)?.extrapolate()?;
    let mut kernel_route = DVector::zeros(2);
    for (w, p) in pred.embedding.atoms() {
        kernel_route += DVector::from_column_slice(p.x) * (w / 2f64.sqrt());
    }
    let means: Vec<DVector<f64>> = sets.iter().map(mean).collect();
    let pairs: Vec<_> = means
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect();
    let a_fit = explicit_oracle_fit(&pairs, lambda, None)?;
    let oracle_route = &a_fit * &means[4];
    println!("kernel route  {:?}", kernel_route.as_slice());
    println!("feature route {:?}", oracle_route.as_slice());
    println!("gap {:.3e}", (&kernel_route - &oracle_route).norm());

    let setup = BoundSetup {
        a_true: rot.clone(),
        a_fit,
        mu_true: means[4].clone(),
        mu_hat: means[4].clone(),
        eps: DVector::zeros(2),
        f: DVector::from_row_slice(&[0.6, 0.8]),
    };
    let (lhs, rhs) = lemma1_gap(&setup)?;
    println!("bound: {lhs:.4e} <= {rhs:.4e}");
    Ok(())
}
