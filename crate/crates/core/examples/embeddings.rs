//! Kernel evaluations and distances between empirical embeddings.

use edd::embedding::norm_sq;
use edd::{embed, rkhs_distance, KernelSpec, PointCloud, SampleSet, WeightedEmbedding};

fn main() -> edd::Result<()> {
    let k = KernelSpec::gaussian(1.0);
    println!("k(0, 1)     = {:.6}", k.eval_x(&[0.0], &[1.0])?);
    println!("k(0, 0)     = {:.6}", k.eval_x(&[0.0], &[0.0])?);

    let chi2 = KernelSpec::rbf_chi2();
    let h1 = [0.5, 0.3, 0.2];
    let h2 = [0.2, 0.3, 0.5];
    println!("chi2(h1,h2) = {:.6}", chi2.eval_x(&h1, &h2)?);
    println!(
        "hist(h1,h2) = {:.6}",
        KernelSpec::histogram_intersection().eval_x(&h1, &h2)?
    );

    let a = WeightedEmbedding::new(vec![1.0], PointCloud::from_scalars(&[0.0])?)?;
    let b = WeightedEmbedding::new(vec![1.0], PointCloud::from_scalars(&[1.0])?)?;
    println!("‖φ(0) - φ(1)‖ = {:.6}", rkhs_distance(&a, &b, &k)?);

    let s = SampleSet::from_scalars(0, &[-1.0, 0.0, 1.0])?;
    let t = SampleSet::from_scalars(1, &[-0.5, 0.5, 1.5])?;
    println!("‖μ̂(S)‖²     = {:.6}", norm_sq(&embed(&s), &k)?);
    println!(
        "‖μ̂(S) - μ̂(T)‖ = {:.6}",
        rkhs_distance(&embed(&s), &embed(&t), &k)?
    );

    // signed weights: 2μ̂(T) - μ̂(S) points beyond T
    let ahead = WeightedEmbedding::from_blocks(&[(-1.0, &s), (2.0, &t)])?;
    let shifted = SampleSet::from_scalars(2, &[0.0, 1.0, 2.0])?;
    println!(
        "‖(2μ̂(T) - μ̂(S)) - μ̂(S + 1)‖ = {:.6}",
        rkhs_distance(&ahead, &embed(&shifted), &k)?
    );
    Ok(())
}
