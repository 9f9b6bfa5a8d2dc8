//! How per-transition weights change the fitted coefficients.

use edd::experiments::{generate, SettingKind, SyntheticSetting};
use edd::{dynamics, fit, GammaRule, KernelSpec, SampleSet};

fn main() -> edd::Result<()> {
    let setting = SyntheticSetting::new(SettingKind::Concentration, 300, 5);
    let sets: Vec<SampleSet> = (1..=9)
        .map(|t| generate(&setting, t))
        .collect::<edd::Result<_>>()?;
    let spec = KernelSpec::gaussian_density(1.0);
    let lambda = dynamics::default_lambda(&sets);
    let target = setting.distribution(10)?;
    for rule in [
        GammaRule::None,
        GammaRule::SqrtN,
        GammaRule::Exponential { rho: 0.8 },
        GammaRule::Exponential { rho: 0.5 },
    ] {
        let pred = fit(sets.clone(), spec.clone(), lambda, rule.weights(&sets)?)?.extrapolate()?;
        let betas: Vec<String> = pred.beta.iter().map(|b| format!("{b:+.2}")).collect();
        println!(
            "{:<32} distance {:.4}  beta [{}]",
            format!("{rule:?}"),
            target.distance_to(&pred.embedding, &spec)?,
            betas.join(" ")
        );
    }
    Ok(())
}
