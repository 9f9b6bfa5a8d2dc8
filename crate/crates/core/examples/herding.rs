//! Herding a signed-weight prediction back into a sample set, then scoring it by KL.
//!
//! cargo run --release --example herding -- [n]

use edd::experiments::{generate, unit_mass, SettingKind, SyntheticSetting};
use edd::herding::{default_pool, herd, HerdingConfig};
use edd::metrics::{kde, kl_divergence, pooled_grid};
use edd::{dynamics, embed, fit, rkhs_distance, KernelSpec, SampleSet};

fn main() -> edd::Result<()> {
    let n = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);
    let setting = SyntheticSetting::new(SettingKind::Translation, n, 3);
    let sets: Vec<SampleSet> = (1..=9)
        .map(|t| generate(&setting, t))
        .collect::<edd::Result<_>>()?;
    let spec = KernelSpec::gaussian_density(1.0);
    let pred = fit(
        sets.clone(),
        spec.clone(),
        dynamics::default_lambda(&sets),
        None,
    )?
    .extrapolate()?;
    println!(
        "total prediction weight {:.3}",
        pred.embedding.total_weight()
    );

    let pool = default_pool(&sets, 2048, 3.0)?;
    let target = unit_mass(&pred.embedding);
    let herded = herd(&target, &spec, &HerdingConfig::new(n, pool))?.with_time_index(10);
    println!(
        "herded {} points, distance to prediction {:.4}",
        herded.len(),
        rkhs_distance(&target, &embed(&herded), &spec)?
    );

    // fresh draws from the next step as a stand-in for the truth
    let truth = edd::experiments::generate_stream(&setting, 10, 1 << 32)?;
    let grid = pooled_grid(
        &[&truth, &herded, sets.last().expect("nine sets")],
        1.0,
        2048,
    )?;
    let p = kde(&truth, 1.0, &grid)?;
    println!(
        "KL(truth ‖ herded) = {:.4}",
        kl_divergence(&p, &kde(&herded, 1.0, &grid)?)?
    );
    println!(
        "KL(truth ‖ last)   = {:.4}",
        kl_divergence(&p, &kde(&sets[8], 1.0, &grid)?)?
    );
    Ok(())
}
