use nalgebra::DMatrix;
use proptest::prelude::*;

use edd::dynamics::{self, GammaRule};
use edd::embedding::norm_sq;
use edd::herding::{herd, HerdingConfig};
use edd::kernels::gram;
use edd::metrics::{
    evaluate_prediction, kde, kl_divergence, uniform_grid, EvalOptions, Prediction,
};
use edd::predsvm::{
    flip_transform, primal_objective, train_with, SvmOptions, WeightedItem, WeightedTrainingSet,
};
use edd::{
    embed, fit, inner, io, rkhs_distance, KernelSpec, PointCloud, SampleSet, WeightedEmbedding,
};

fn signed_embedding(max_n: usize) -> impl Strategy<Value = WeightedEmbedding> {
    prop::collection::vec((-2.0..2.0f64, -3.0..3.0f64), 1..=max_n).prop_map(|atoms| {
        let (w, x): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        WeightedEmbedding::new(w, PointCloud::from_scalars(&x).unwrap()).unwrap()
    })
}

fn kernel() -> impl Strategy<Value = (KernelSpec, bool)> {
    prop_oneof![
        (0.1..5.0f64).prop_map(|b| (KernelSpec::gaussian(b), false)),
        (0.1..5.0f64).prop_map(|b| (KernelSpec::gaussian_density(b), false)),
        Just((KernelSpec::histogram_intersection(), true)),
        Just((KernelSpec::rbf_chi2(), true)),
        Just((KernelSpec::linear(), false)),
    ]
}

fn sample_sets(count: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<SampleSet>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2..12), count).prop_map(|sets| {
        sets.iter()
            .enumerate()
            .map(|(t, v)| SampleSet::from_scalars(t as i64 + 1, v).unwrap())
            .collect()
    })
}

proptest! {
    #[test]
    fn gram_is_symmetric_psd((spec, unit) in kernel(), seed in any::<u64>(), n in 1usize..20, dim in 1usize..4) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| if unit { rng.gen_range(0.0..1.0) } else { rng.gen_range(-4.0..4.0) }).collect())
            .collect();
        let cloud = PointCloud::new(pts, None).unwrap();
        let g = gram(&spec, &cloud, &cloud).unwrap();
        prop_assert_eq!(&g, &g.transpose());
        prop_assert!(g.clone().symmetric_eigenvalues().min() >= -1e-9);
    }

    #[test]
    fn unit_diagonal(spec in prop_oneof![
        (0.1..5.0f64).prop_map(KernelSpec::gaussian),
        Just(KernelSpec::rbf_chi2()),
    ], x in prop::collection::vec(0.0..1.0f64, 1..5)) {
        prop_assert_eq!(spec.eval_x(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn histogram_diagonal_bounded(x in prop::collection::vec(0.0..1.0f64, 1..5)) {
        prop_assert!(KernelSpec::histogram_intersection().eval_x(&x, &x).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn distance_triangle(a in signed_embedding(10), b in signed_embedding(10), c in signed_embedding(10)) {
        let spec = KernelSpec::gaussian(1.0);
        let ab = rkhs_distance(&a, &b, &spec).unwrap();
        let bc = rkhs_distance(&b, &c, &spec).unwrap();
        let ac = rkhs_distance(&a, &c, &spec).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert_eq!(rkhs_distance(&a, &a, &spec).unwrap(), 0.0);
    }

    #[test]
    fn inner_is_bilinear(a in signed_embedding(10), b in signed_embedding(10), s in -5.0..5.0f64) {
        let spec = KernelSpec::gaussian(2.0);
        let lhs = inner(&a.scaled(s), &b, &spec).unwrap();
        let rhs = s * inner(&a, &b, &spec).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn prediction_lives_on_later_sets(sets in sample_sets(2..=5), lambda in 1e-3..1.0f64) {
        let model = fit(sets.clone(), KernelSpec::gaussian(1.0), lambda, None).unwrap();
        let pred = model.extrapolate().unwrap();
        prop_assert_eq!(pred.beta.len(), sets.len() - 1);
        let later: Vec<f64> = sets[1..].iter().flat_map(|s| s.points().flat().to_vec()).collect();
        prop_assert_eq!(pred.embedding.points().flat(), later.as_slice());
        let direct = norm_sq(&pred.embedding, &KernelSpec::gaussian(1.0)).unwrap();
        prop_assert!((model.norm_sq(&pred) - direct).abs() <= 1e-10 * direct.max(1.0));
    }

    #[test]
    fn rescaling_gamma_and_lambda_together_keeps_beta(sets in sample_sets(3..=5), lambda in 1e-3..1.0f64, s in 0.1..10.0f64) {
        let gamma = GammaRule::Exponential { rho: 0.7 }.weights(&sets).unwrap().unwrap();
        let scaled: Vec<f64> = gamma.iter().map(|g| g * s).collect();
        let a = fit(sets.clone(), KernelSpec::gaussian(1.0), lambda, Some(gamma)).unwrap();
        let b = fit(sets, KernelSpec::gaussian(1.0), lambda * s, Some(scaled)).unwrap();
        let (ba, bb) = (a.extrapolate().unwrap().beta, b.extrapolate().unwrap().beta);
        for (x, y) in ba.iter().zip(&bb) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn herding_is_deterministic_and_draws_from_pool(values in prop::collection::vec(-3.0..3.0f64, 2..40), m in 1usize..30) {
        let s = SampleSet::from_scalars(0, &values).unwrap();
        let pool = PointCloud::from_scalars(&uniform_grid(-4.0, 4.0, 65)).unwrap();
        let cfg = HerdingConfig::new(m, pool.clone());
        let spec = KernelSpec::gaussian(1.0);
        let a = herd(&embed(&s), &spec, &cfg).unwrap();
        let b = herd(&embed(&s), &spec, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), m);
        for p in a.points().iter() {
            prop_assert!(pool.flat().contains(&p.x[0]));
        }
    }

    #[test]
    fn single_atom_is_herded_first(values in prop::collection::vec(-3.0..3.0f64, 1..40), pick in any::<prop::sample::Index>(), w in 0.1..3.0f64) {
        let pool = PointCloud::from_scalars(&values).unwrap();
        let i = pick.index(values.len());
        let target = WeightedEmbedding::new(vec![w], pool.select(&[i])).unwrap();
        let out = herd(&target, &KernelSpec::gaussian(0.5), &HerdingConfig::new(1, pool)).unwrap();
        prop_assert_eq!(out.points().x(0)[0], values[i]);
    }

    #[test]
    fn kl_identities(a in prop::collection::vec(-3.0..3.0f64, 2..50), b in prop::collection::vec(-3.0..3.0f64, 2..50)) {
        let grid = uniform_grid(-7.0, 7.0, 512);
        let p = kde(&SampleSet::from_scalars(0, &a).unwrap(), 1.0, &grid).unwrap();
        let q = kde(&SampleSet::from_scalars(0, &b).unwrap(), 1.0, &grid).unwrap();
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-9);
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-9);
        let mut rev = a.clone();
        rev.reverse();
        let p2 = kde(&SampleSet::from_scalars(0, &rev).unwrap(), 1.0, &grid).unwrap();
        for (x, y) in p.ps.iter().zip(&p2.ps) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn eval_hs_is_rkhs_distance(sets in sample_sets(2..=4), reference in prop::collection::vec(-3.0..3.0f64, 1..20)) {
        let spec = KernelSpec::gaussian(1.0);
        let r = SampleSet::from_scalars(9, &reference).unwrap();
        let pred = fit(sets, spec.clone(), 0.1, None).unwrap().extrapolate().unwrap();
        let report = evaluate_prediction(Prediction::Weighted(&pred.embedding), &r, &spec, &EvalOptions::default()).unwrap();
        prop_assert_eq!(report.hs_distance, rkhs_distance(&pred.embedding, &embed(&r), &spec).unwrap());
    }

    #[test]
    fn samples_round_trip(sets in sample_sets(1..=4)) {
        let mut buf = Vec::new();
        io::write_samples_to(&mut buf, &sets).unwrap();
        let back = io::parse_samples(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back, sets);
    }

    #[test]
    fn flip_keeps_zero_one_risk(atoms in prop::collection::vec((-1.0..1.0f64, any::<bool>(), any::<bool>()), 1..12)) {
        let weights: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let labels: Vec<i64> = atoms.iter().map(|a| if a.1 { 1 } else { -1 }).collect();
        let preds: Vec<i64> = atoms.iter().map(|a| if a.2 { 1 } else { -1 }).collect();
        let xs: Vec<Vec<f64>> = (0..atoms.len()).map(|i| vec![i as f64]).collect();
        let e = WeightedEmbedding::new(weights.clone(), PointCloud::new(xs, Some(labels.clone())).unwrap()).unwrap();
        let ts = flip_transform(&e).unwrap();
        let signed: f64 = (0..atoms.len()).filter(|&i| preds[i] != labels[i]).map(|i| weights[i]).sum();
        let transformed: f64 = ts
            .items()
            .iter()
            .filter(|it| (preds[it.x[0] as usize] == it.label) == it.flipped)
            .map(|it| it.weight)
            .sum();
        prop_assert!((signed - transformed - ts.constant_offset).abs() <= 1e-12);
    }
}

/// Separate dual solver for `min ½‖w̃‖² + Σ uᵢ max(0, 1 - yᵢ w̃ᵀx̃ᵢ)` with
/// `x̃ = (x, 1)`: projected gradient ascent with step `1 / ‖Q‖`.
fn reference_svm(items: &[WeightedItem], y: &[f64], upper: &[f64]) -> Vec<f64> {
    let n = items.len();
    let dim = items[0].x.len() + 1;
    let z = DMatrix::from_fn(n, dim, |i, j| {
        y[i] * items[i].x.get(j).copied().unwrap_or(1.0)
    });
    let q = &z * z.transpose();
    let step = 1.0 / q.clone().symmetric_eigenvalues().max();
    let mut alpha = nalgebra::DVector::<f64>::zeros(n);
    for _ in 0..200_000 {
        let grad = nalgebra::DVector::from_element(n, 1.0) - &q * &alpha;
        for i in 0..n {
            alpha[i] = (alpha[i] + step * grad[i]).clamp(0.0, upper[i]);
        }
    }
    (z.transpose() * alpha).iter().copied().collect()
}

fn svm_problem() -> impl Strategy<Value = WeightedTrainingSet> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, 0.05..1.0f64), 4..12).prop_map(|rows| {
        let items: Vec<WeightedItem> = rows
            .iter()
            .enumerate()
            .map(|(i, &(a, b, w))| WeightedItem {
                weight: w,
                x: vec![a, b],
                label: if i % 2 == 0 { 1 } else { -1 },
                flipped: false,
            })
            .collect();
        WeightedTrainingSet::new(items, 0.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn svm_matches_reference_solver(ts in svm_problem(), c in prop_oneof![Just(0.5), Just(2.0), Just(8.0)]) {
        let opts = SvmOptions { tol: 1e-12, max_epochs: 1_000_000 };
        let (clf, stats) = train_with(&ts, c, &opts).unwrap();
        let y = ts.targets(1);
        let upper: Vec<f64> = ts.items().iter().map(|it| c * it.weight).collect();
        let reference = reference_svm(ts.items(), &y, &upper);
        let ours: Vec<f64> = clf.w[0].iter().chain(&clf.bias).copied().collect();
        let p_ours = primal_objective(ts.items(), &y, &upper, &ours);
        let p_ref = primal_objective(ts.items(), &y, &upper, &reference);
        prop_assert!(p_ours <= p_ref + 1e-8, "{} vs {}", p_ours, p_ref);
        prop_assert!((stats[0].primal - p_ours).abs() <= 1e-9 * p_ours.max(1.0));
        for (a, b) in ours.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-3, "{:?} vs {:?}", ours, reference);
        }
    }

    #[test]
    fn weight_scale_equals_c_scale(ts in svm_problem(), s in 0.2..5.0f64) {
        let opts = SvmOptions { tol: 1e-12, max_epochs: 1_000_000 };
        let scaled_items: Vec<WeightedItem> = ts
            .items()
            .iter()
            .map(|it| WeightedItem { weight: it.weight * s, ..it.clone() })
            .collect();
        let scaled = WeightedTrainingSet::new(scaled_items, 0.0).unwrap();
        let (a, _) = train_with(&scaled, 1.0, &opts).unwrap();
        let (b, _) = train_with(&ts, s, &opts).unwrap();
        for (x, y) in a.w[0].iter().chain(&a.bias).zip(b.w[0].iter().chain(&b.bias)) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn perturbation_cannot_beat_the_gap(ts in svm_problem(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (clf, stats) = train_with(&ts, 4.0, &SvmOptions::default()).unwrap();
        let y = ts.targets(1);
        let upper: Vec<f64> = ts.items().iter().map(|it| 4.0 * it.weight).collect();
        let w: Vec<f64> = clf.w[0].iter().chain(&clf.bias).copied().collect();
        let base = primal_objective(ts.items(), &y, &upper, &w);
        for _ in 0..50 {
            let r = rng.gen_range(1e-4..1.0);
            let moved: Vec<f64> = w.iter().map(|v| v + r * rng.gen_range(-1.0..1.0)).collect();
            prop_assert!(primal_objective(ts.items(), &y, &upper, &moved) >= base - stats[0].gap() - 1e-12);
        }
    }
}

#[test]
fn mixture_prediction_leaves_the_convex_hull() {
    use edd::experiments::{generate, SettingKind, SyntheticSetting};
    let s = SyntheticSetting::new(SettingKind::Mixture, 500, 1);
    let sets: Vec<SampleSet> = (1..=6).map(|t| generate(&s, t).unwrap()).collect();
    let lambda = dynamics::default_lambda(&sets);
    let pred = fit(sets, KernelSpec::gaussian_density(1.0), lambda, None)
        .unwrap()
        .extrapolate()
        .unwrap();
    assert!(pred.beta.iter().any(|b| *b < 0.0), "{:?}", pred.beta);
}
