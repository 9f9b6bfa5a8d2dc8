//! Rolling the learned operator forward several steps on the translation setting.
//! Later steps reuse predictions as inputs, so errors compound.

use edd::experiments::{generate, SettingKind, SyntheticSetting};
use edd::{dynamics, fit, KernelSpec, SampleSet};

fn main() -> edd::Result<()> {
    let setting = SyntheticSetting {
        steps: 12,
        ..SyntheticSetting::new(SettingKind::Translation, 400, 8)
    };
    let observed = 9;
    let sets: Vec<SampleSet> = (1..=observed)
        .map(|t| generate(&setting, t))
        .collect::<edd::Result<_>>()?;
    let spec = KernelSpec::gaussian_density(1.0);
    let model = fit(
        sets.clone(),
        spec.clone(),
        dynamics::default_lambda(&sets),
        None,
    )?;
    let last = edd::embed(sets.last().expect("observed sets"));
    for (i, step) in model.extrapolate_steps(3)?.iter().enumerate() {
        let t = observed + 1 + i as i64;
        let truth = setting.distribution(t)?;
        println!(
            "t={t}: EDD {:.4}  last observed {:.4}",
            truth.distance_to(&step.embedding, &spec)?,
            truth.distance_to(&last, &spec)?
        );
    }
    Ok(())
}
