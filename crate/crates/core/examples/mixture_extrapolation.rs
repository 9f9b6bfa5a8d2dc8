//! Mixture weights drifting from N(-3, 1) toward N(3, 1): fit the dynamics on six
//! observed steps and compare the prediction for step seven with the last sample.
//!
//! cargo run --release --example mixture_extrapolation -- [n] [seed]

use edd::experiments::{generate, SettingKind, SyntheticSetting};
use edd::{dynamics, embed, fit, KernelSpec, SampleSet};

fn main() -> edd::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let setting = SyntheticSetting::new(SettingKind::Mixture, n, seed);
    let sets: Vec<SampleSet> = (1..=setting.steps as i64)
        .map(|t| generate(&setting, t))
        .collect::<edd::Result<_>>()?;
    let spec = KernelSpec::gaussian_density(1.0);
    let lambda = dynamics::default_lambda(&sets);
    let model = fit(sets.clone(), spec.clone(), lambda, None)?;
    let pred = model.extrapolate()?;

    println!("lambda = {lambda:.2e}");
    for b in &pred.blocks {
        println!("beta_{} = {:+.4}", b.time_index, b.beta);
    }
    let target = setting.distribution(setting.target_time())?;
    let last = embed(sets.last().expect("six sets"));
    println!(
        "distance to target: EDD {:.4}",
        target.distance_to(&pred.embedding, &spec)?
    );
    println!(
        "distance to target: last {:.4}",
        target.distance_to(&last, &spec)?
    );
    Ok(())
}
