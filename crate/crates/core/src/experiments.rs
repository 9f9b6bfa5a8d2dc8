//! Synthetic benchmarks: the three 1-D drift settings (time-varying mixture,
//! translation, concentration) and a rotating two-class problem for predictive
//! domain adaptation.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the setting seed, with
//! the stream selected by time index and role, so results are bitwise reproducible.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics;
use crate::embedding::{embed, rkhs_distance, WeightedEmbedding};
use crate::error::{Error, Result};
use crate::herding::{self, HerdingConfig};
use crate::kernels::{KernelKind, KernelSpec};
use crate::metrics::{self, DensityGrid};
use crate::predsvm::{self, LinearClassifier, SvmOptions, WeightedTrainingSet, DEFAULT_C_GRID};
use crate::sample::SampleSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingKind {
    Mixture,
    Translation,
    Concentration,
    PdaRotation,
}

impl SettingKind {
    pub const TABLES: [SettingKind; 3] = [
        SettingKind::Mixture,
        SettingKind::Translation,
        SettingKind::Concentration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SettingKind::Mixture => "mixture",
            SettingKind::Translation => "translation",
            SettingKind::Concentration => "concentration",
            SettingKind::PdaRotation => "pda_rotation",
        }
    }

    /// Number of observed time steps.
    pub fn default_steps(self) -> usize {
        match self {
            SettingKind::Mixture => 6,
            SettingKind::Translation | SettingKind::Concentration => 9,
            SettingKind::PdaRotation => 6,
        }
    }
}

impl fmt::Display for SettingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SettingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixture" => Ok(SettingKind::Mixture),
            "translation" => Ok(SettingKind::Translation),
            "concentration" => Ok(SettingKind::Concentration),
            "pda_rotation" | "pda" => Ok(SettingKind::PdaRotation),
            _ => Err(Error::InvalidArgument(format!("unknown setting {s:?}"))),
        }
    }
}

/// One synthetic drift process with `steps` observed sets of `n` points each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSetting {
    pub kind: SettingKind,
    pub steps: usize,
    pub n: usize,
    pub seed: u64,
    /// Rotation per step in radians (rotation setting only).
    pub rotation: f64,
    pub geometry: RotationGeometry,
}

impl SyntheticSetting {
    pub fn new(kind: SettingKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            steps: kind.default_steps(),
            n,
            seed,
            rotation: 15f64.to_radians(),
            geometry: RotationGeometry::default(),
        }
    }

    /// Index of the first unobserved step.
    pub fn target_time(&self) -> i64 {
        self.steps as i64 + 1
    }

    /// The generating distribution at time `t` for the 1-D settings.
    ///
    /// - mixture: `α_t N(3, 1) + (1 - α_t) N(-3, 1)` with `α_t = 0.1 + 0.1 t`;
    /// - translation: `N(T + 1 - t, 1)`;
    /// - concentration: `N(0, σ_t²)` with standard deviation `σ_t = T + 2 - t`, so
    ///   the first unobserved step has unit variance.
    pub fn distribution(&self, t: i64) -> Result<GaussianMixture1d> {
        self.check_time(t)?;
        let big_t = self.steps as f64;
        let tf = t as f64;
        match self.kind {
            SettingKind::Mixture => {
                let alpha = 0.1 + 0.1 * tf;
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::InvalidArgument(format!(
                        "mixture weight {alpha} at t = {t} is outside [0, 1]"
                    )));
                }
                Ok(GaussianMixture1d::new(vec![
                    (alpha, 3.0, 1.0),
                    (1.0 - alpha, -3.0, 1.0),
                ]))
            }
            SettingKind::Translation => {
                Ok(GaussianMixture1d::new(vec![(1.0, big_t + 1.0 - tf, 1.0)]))
            }
            SettingKind::Concentration => {
                let sd = big_t + 2.0 - tf;
                Ok(GaussianMixture1d::new(vec![(1.0, 0.0, sd * sd)]))
            }
            SettingKind::PdaRotation => Err(Error::InvalidArgument(
                "the rotation setting is two-dimensional".into(),
            )),
        }
    }

    fn check_time(&self, t: i64) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument(
                "sample size must be positive".into(),
            ));
        }
        if t < 1 || t > self.target_time() {
            return Err(Error::InvalidArgument(format!(
                "time index {t} outside 1..={}",
                self.target_time()
            )));
        }
        Ok(())
    }

    /// Rotation matrix `R(θ_t)` of the rotation setting, row-major.
    pub fn rotation_at(&self, t: i64) -> [[f64; 2]; 2] {
        let (s, c) = (self.rotation * t as f64).sin_cos();
        [[c, -s], [s, c]]
    }
}

/// Shape of the two classes of the rotation setting, before rotation. Class `y`
/// is `(radius + u, y * separation + v)` with `u ~ N(0, spread²)` and
/// `v ~ N(0, noise²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationGeometry {
    pub radius: f64,
    pub separation: f64,
    /// Standard deviation along the decision boundary.
    pub spread: f64,
    /// Standard deviation across the decision boundary.
    pub noise: f64,
}

impl Default for RotationGeometry {
    fn default() -> Self {
        Self {
            radius: 2.0,
            separation: 1.0,
            spread: 0.6,
            noise: 0.6,
        }
    }
}

/// Stream offsets separating the observed sets from auxiliary draws.
const STREAM_FRESH: u64 = 1 << 32;
const STREAM_REFERENCE: u64 = 2 << 32;
const STREAM_TEST: u64 = 3 << 32;

/// `n` i.i.d. draws from the setting's distribution at time `t`.
pub fn generate(setting: &SyntheticSetting, t: i64) -> Result<SampleSet> {
    generate_stream(setting, t, 0)
}

/// Like [`generate`] but drawn from an independent stream selected by `replicate`.
pub fn generate_stream(setting: &SyntheticSetting, t: i64, replicate: u64) -> Result<SampleSet> {
    setting.check_time(t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(setting.seed);
    rng.set_stream(replicate.wrapping_add(t as u64));
    match setting.kind {
        SettingKind::PdaRotation => {
            let g = setting.geometry;
            let r = setting.rotation_at(t);
            let along = Normal::new(0.0, g.spread)
                .map_err(|_| Error::InvalidArgument(format!("bad spread {}", g.spread)))?;
            let across = Normal::new(0.0, g.noise)
                .map_err(|_| Error::InvalidArgument(format!("bad noise {}", g.noise)))?;
            let mut pts = Vec::with_capacity(setting.n);
            let mut labels = Vec::with_capacity(setting.n);
            for i in 0..setting.n {
                let y: i64 = if i % 2 == 1 { 1 } else { -1 };
                let u = g.radius + along.sample(&mut rng);
                let v = y as f64 * g.separation + across.sample(&mut rng);
                pts.push(vec![r[0][0] * u + r[0][1] * v, r[1][0] * u + r[1][1] * v]);
                labels.push(y);
            }
            SampleSet::new(t, pts, Some(labels))
        }
        _ => {
            let d = setting.distribution(t)?;
            SampleSet::from_scalars(t, &d.sample(setting.n, &mut rng))
        }
    }
}

/// `Σ_k w_k N(m_k, v_k)` on the real line.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture1d {
    /// `(weight, mean, variance)` triples.
    pub components: Vec<(f64, f64, f64)>,
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// For 1-D Gaussian kernels, `k(x, y) = scale · N(x; y, h)`.
fn gaussian_scale(spec: &KernelSpec) -> Result<(f64, f64)> {
    let h = spec.bandwidth.unwrap_or(1.0);
    match spec.kind {
        KernelKind::Gaussian => Ok(((2.0 * PI * h).sqrt(), h)),
        KernelKind::GaussianDensity => Ok((1.0, h)),
        _ => Err(Error::InvalidKernel(
            "closed-form embeddings need a Gaussian kernel".into(),
        )),
    }
}

impl GaussianMixture1d {
    pub fn new(components: Vec<(f64, f64, f64)>) -> Self {
        Self { components }
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let normals: Vec<Normal<f64>> = self
            .components
            .iter()
            .map(|&(_, m, v)| Normal::new(m, v.sqrt()).expect("valid component"))
            .collect();
        (0..n)
            .map(|_| {
                let k = if self.components.len() == 1 {
                    0
                } else {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    self.components
                        .iter()
                        .position(|c| {
                            acc += c.0;
                            u < acc
                        })
                        .unwrap_or(self.components.len() - 1)
                };
                normals[k].sample(rng)
            })
            .collect()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, m, v)| w * normal_pdf(x, m, v))
            .sum()
    }

    /// The mixture convolved with `N(0, extra_var)`.
    pub fn smoothed(&self, extra_var: f64) -> Self {
        Self::new(
            self.components
                .iter()
                .map(|&(w, m, v)| (w, m, v + extra_var))
                .collect(),
        )
    }

    /// `⟨φ(z), μ⟩`.
    pub fn embedding_at(&self, z: f64, spec: &KernelSpec) -> Result<f64> {
        let (scale, h) = gaussian_scale(spec)?;
        Ok(scale * self.smoothed(h).pdf(z))
    }

    /// `⟨μ, μ'⟩` for two mixtures.
    pub fn embedding_inner(&self, other: &Self, spec: &KernelSpec) -> Result<f64> {
        let (scale, h) = gaussian_scale(spec)?;
        let mut s = 0.0;
        for &(w, m, v) in &self.components {
            for &(w2, m2, v2) in &other.components {
                s += w * w2 * normal_pdf(m, m2, h + v + v2);
            }
        }
        Ok(scale * s)
    }

    /// RKHS distance between a 1-D weighted embedding and the mixture's embedding.
    pub fn distance_to(&self, e: &WeightedEmbedding, spec: &KernelSpec) -> Result<f64> {
        if e.dim() != 1 {
            return Err(Error::DimensionMismatch(1, e.dim()));
        }
        self.distance_with_norm(e, crate::embedding::norm_sq(e, spec)?, spec)
    }

    /// As [`Self::distance_to`] with `‖e‖²` supplied by the caller.
    pub fn distance_with_norm(
        &self,
        e: &WeightedEmbedding,
        self_term: f64,
        spec: &KernelSpec,
    ) -> Result<f64> {
        if e.dim() != 1 {
            return Err(Error::DimensionMismatch(1, e.dim()));
        }
        let mut cross = 0.0;
        for (w, p) in e.atoms() {
            cross += w * self.embedding_at(p.x[0], spec)?;
        }
        let d2 = self_term - 2.0 * cross + self.embedding_inner(self, spec)?;
        Ok(d2.max(0.0).sqrt())
    }

    /// An interval holding all but a negligible part of the mass.
    pub fn support(&self, sds: f64) -> (f64, f64) {
        let lo = self
            .components
            .iter()
            .map(|&(_, m, v)| m - sds * v.sqrt())
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .components
            .iter()
            .map(|&(_, m, v)| m + sds * v.sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Compared prediction methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// A fresh sample of the target distribution.
    TrueDist,
    /// The last observed sample set.
    LastObs,
    /// The signed-weight extrapolation.
    Edd,
    /// The extrapolation turned into a sample set by herding.
    EddHerding,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::TrueDist,
        Method::LastObs,
        Method::Edd,
        Method::EddHerding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TrueDist => "true_dist",
            Method::LastObs => "last_obs",
            Method::Edd => "edd",
            Method::EddHerding => "edd_herding",
        }
    }
}

/// What predictions are compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The exact embedding (and smoothed density) of the target distribution.
    #[default]
    Analytic,
    /// An independent sample of size `n` from the target distribution.
    Sample,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableOptions {
    pub repeats: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
    /// Ridge parameter; defaults to `1/n`.
    pub lambda: Option<f64>,
    pub reference: ReferenceMode,
    /// Run herding (needed for the KL table).
    pub herding: bool,
    /// KDE bandwidth for KL; defaults to the kernel's σ.
    pub kde_bandwidth: Option<f64>,
    /// Rescale the prediction to unit total weight before herding.
    pub normalize_herding: bool,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            repeats: 100,
            seed: 0,
            kernel: KernelSpec::gaussian_density(1.0),
            lambda: None,
            reference: ReferenceMode::Analytic,
            herding: true,
            kde_bandwidth: None,
            normalize_herding: true,
        }
    }
}

/// Per-repeat values of one method.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MethodValues {
    pub hs: Vec<f64>,
    pub kl: Vec<f64>,
}

/// All repeats of one `(setting, n)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRuns {
    pub kind: SettingKind,
    pub n: usize,
    pub methods: Vec<(Method, MethodValues)>,
}

impl CellRuns {
    pub fn values(&self, m: Method) -> Option<&MethodValues> {
        self.methods.iter().find(|(k, _)| *k == m).map(|(_, v)| v)
    }
}

/// Raw results behind both tables.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRuns {
    pub seed: u64,
    pub repeats: usize,
    pub cells: Vec<CellRuns>,
}

/// One row of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub setting: String,
    pub n: usize,
    pub method: String,
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

/// Mean and sample standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ResultsTable {
    pub fn get(&self, setting: &str, n: usize, method: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.setting == setting && r.n == n && r.method == method)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_json(path, &self.rows)
    }
}

impl TableRuns {
    pub fn cell(&self, kind: SettingKind, n: usize) -> Option<&CellRuns> {
        self.cells.iter().find(|c| c.kind == kind && c.n == n)
    }

    fn table(&self, methods: &[Method], pick: impl Fn(&MethodValues) -> &Vec<f64>) -> ResultsTable {
        let mut rows = Vec::new();
        for c in &self.cells {
            for &m in methods {
                let Some(v) = c.values(m) else { continue };
                let vals = pick(v);
                if vals.is_empty() {
                    continue;
                }
                let (mean, std) = mean_std(vals);
                rows.push(ResultRow {
                    setting: c.kind.name().into(),
                    n: c.n,
                    method: m.name().into(),
                    mean,
                    std,
                    repeats: vals.len(),
                    seed: self.seed,
                });
            }
        }
        ResultsTable { rows }
    }

    /// RKHS distances for all four methods.
    pub fn table1(&self) -> ResultsTable {
        self.table(&Method::ALL, |v| &v.hs)
    }

    /// KL divergences for the methods that produce sample sets.
    pub fn table2(&self) -> ResultsTable {
        self.table(
            &[Method::TrueDist, Method::LastObs, Method::EddHerding],
            |v| &v.kl,
        )
    }
}

/// Runs every `(kind, n)` cell with `opts.repeats` repeats. Repeat `r` uses seed
/// `opts.seed + r`; repeats run in parallel and are aggregated in order.
pub fn run_tables(kinds: &[SettingKind], ns: &[usize], opts: &TableOptions) -> Result<TableRuns> {
    if opts.repeats < 2 {
        return Err(Error::InvalidArgument("need at least 2 repeats".into()));
    }
    opts.kernel.validate()?;
    let mut cells = Vec::new();
    for &kind in kinds {
        if kind == SettingKind::PdaRotation {
            return Err(Error::InvalidArgument(
                "the rotation setting has its own benchmark".into(),
            ));
        }
        for &n in ns {
            let outcomes: Vec<RepeatOutcome> = (0..opts.repeats)
                .into_par_iter()
                .map(|r| run_repeat(kind, n, opts.seed.wrapping_add(r as u64), opts))
                .collect::<Result<_>>()?;
            let methods = Method::ALL
                .iter()
                .filter(|m| opts.herding || **m != Method::EddHerding)
                .map(|&m| {
                    let mut v = MethodValues::default();
                    for o in &outcomes {
                        if let Some((hs, kl)) = o.get(m) {
                            v.hs.push(hs);
                            if let Some(kl) = kl {
                                v.kl.push(kl);
                            }
                        }
                    }
                    (m, v)
                })
                .collect();
            log::info!("finished {kind} n={n}");
            cells.push(CellRuns { kind, n, methods });
        }
    }
    Ok(TableRuns {
        seed: opts.seed,
        repeats: opts.repeats,
        cells,
    })
}

/// RKHS-distance table.
pub fn run_table1(
    kinds: &[SettingKind],
    ns: &[usize],
    opts: &TableOptions,
) -> Result<ResultsTable> {
    Ok(run_tables(kinds, ns, opts)?.table1())
}

/// KL table; forces herding on.
pub fn run_table2(
    kinds: &[SettingKind],
    ns: &[usize],
    opts: &TableOptions,
) -> Result<ResultsTable> {
    let opts = TableOptions {
        herding: true,
        ..opts.clone()
    };
    Ok(run_tables(kinds, ns, &opts)?.table2())
}

struct RepeatOutcome {
    values: Vec<(Method, f64, Option<f64>)>,
}

impl RepeatOutcome {
    fn get(&self, m: Method) -> Option<(f64, Option<f64>)> {
        self.values
            .iter()
            .find(|(k, _, _)| *k == m)
            .map(|&(_, hs, kl)| (hs, kl))
    }
}

enum Reference {
    Analytic(GaussianMixture1d),
    Sample(SampleSet),
}

fn run_repeat(
    kind: SettingKind,
    n: usize,
    seed: u64,
    opts: &TableOptions,
) -> Result<RepeatOutcome> {
    let setting = SyntheticSetting::new(kind, n, seed);
    let target = setting.target_time();
    let sets: Vec<SampleSet> = (1..target)
        .map(|t| generate(&setting, t))
        .collect::<Result<_>>()?;
    let spec = &opts.kernel;
    let h = opts
        .kde_bandwidth
        .unwrap_or_else(|| metrics::default_kde_bandwidth(spec));
    let reference = match opts.reference {
        ReferenceMode::Analytic => Reference::Analytic(setting.distribution(target)?),
        ReferenceMode::Sample => {
            Reference::Sample(generate_stream(&setting, target, STREAM_REFERENCE)?)
        }
    };
    let hs = |e: &WeightedEmbedding| -> Result<f64> {
        match &reference {
            Reference::Analytic(d) => d.distance_to(e, spec),
            Reference::Sample(s) => rkhs_distance(e, &embed(s), spec),
        }
    };
    let kl = |s: &SampleSet| -> Result<f64> {
        let grid = match &reference {
            Reference::Analytic(d) => {
                let (a, b) = d.support(6.0);
                let (c, e) = s.points().range(0).expect("nonempty");
                metrics::uniform_grid(a.min(c) - 3.0 * h, b.max(e) + 3.0 * h, metrics::GRID_POINTS)
            }
            Reference::Sample(r) => metrics::pooled_grid(&[s, r], h, metrics::GRID_POINTS)?,
        };
        let p = match &reference {
            Reference::Analytic(d) => {
                let smooth = d.smoothed(h * h);
                let ps = grid.iter().map(|&x| smooth.pdf(x)).collect();
                DensityGrid::normalized(grid.clone(), ps)?
            }
            Reference::Sample(r) => metrics::kde(r, h, &grid)?,
        };
        let q = metrics::kde(s, h, &grid)?;
        metrics::kl_divergence(&p, &q)
    };

    let mut values = Vec::with_capacity(4);
    let fresh = generate_stream(&setting, target, STREAM_FRESH)?;
    values.push((
        Method::TrueDist,
        hs(&embed(&fresh))?,
        opts.herding.then(|| kl(&fresh)).transpose()?,
    ));
    let last = sets.last().expect("at least one observed set");
    values.push((
        Method::LastObs,
        hs(&embed(last))?,
        opts.herding.then(|| kl(last)).transpose()?,
    ));

    let lambda = opts.lambda.unwrap_or(1.0 / n as f64);
    let pool = if opts.herding {
        let sigma = spec.bandwidth.unwrap_or(1.0).sqrt();
        Some(herding::default_pool(
            &sets,
            metrics::GRID_POINTS,
            3.0 * sigma,
        )?)
    } else {
        None
    };
    let model = dynamics::fit(sets, spec.clone(), lambda, None)?;
    let pred = model.extrapolate()?;
    let edd_hs = match &reference {
        Reference::Analytic(d) => {
            d.distance_with_norm(&pred.embedding, model.norm_sq(&pred), spec)?
        }
        Reference::Sample(_) => hs(&pred.embedding)?,
    };
    values.push((Method::Edd, edd_hs, None));
    if let Some(pool) = pool {
        let target = if opts.normalize_herding {
            unit_mass(&pred.embedding)
        } else {
            pred.embedding.clone()
        };
        let herded = herding::herd(&target, spec, &HerdingConfig::new(n, pool))?;
        values.push((Method::EddHerding, hs(&embed(&herded))?, Some(kl(&herded)?)));
    }
    Ok(RepeatOutcome { values })
}

/// The embedding rescaled so that its weights sum to one; unchanged if the total is
/// not positive.
///
/// Herding always outputs unit mass. A target with total weight below one (ridge
/// shrinkage makes this common) leaves a mass deficit that the greedy steps can only
/// place where the target vanishes, i.e. at the far edge of the candidate pool.
pub fn unit_mass(e: &WeightedEmbedding) -> WeightedEmbedding {
    let total = e.total_weight();
    if total > 0.0 {
        e.scaled(1.0 / total)
    } else {
        e.clone()
    }
}

/// Options for the rotating two-class benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct PdaOptions {
    pub steps: usize,
    pub n: usize,
    pub n_test: usize,
    pub rotation: f64,
    pub geometry: RotationGeometry,
    pub repeats: usize,
    pub seed: u64,
    /// Base kernel of the joint kernel used for the dynamics.
    pub base_kernel: KernelSpec,
    pub lambda: Option<f64>,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub svm: SvmOptions,
    /// Also run the label-free dynamics ablation.
    pub ablation: bool,
}

impl Default for PdaOptions {
    fn default() -> Self {
        Self {
            steps: 6,
            n: 200,
            n_test: 1000,
            rotation: 15f64.to_radians(),
            geometry: RotationGeometry::default(),
            repeats: 20,
            seed: 0,
            base_kernel: KernelSpec::gaussian(1.0),
            lambda: None,
            c_grid: DEFAULT_C_GRID.to_vec(),
            folds: 5,
            svm: SvmOptions {
                tol: 1e-3,
                max_epochs: 5_000,
            },
            ablation: true,
        }
    }
}

/// Per-repeat accuracies of the rotation benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct PdaRuns {
    pub options_seed: u64,
    /// `(method name, accuracies)`; single-set methods are named `single_t{t}`.
    pub methods: Vec<(String, Vec<f64>)>,
    /// Repeats in which some classifier could not be trained.
    pub degenerate: usize,
}

impl PdaRuns {
    pub fn accuracies(&self, method: &str) -> Option<&[f64]> {
        self.methods
            .iter()
            .find(|(m, _)| m == method)
            .map(|(_, v)| v.as_slice())
    }

    pub fn mean(&self, method: &str) -> Option<f64> {
        self.accuracies(method).map(|v| mean_std(v).0)
    }

    pub fn table(&self, n: usize) -> ResultsTable {
        let rows = self
            .methods
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(m, v)| {
                let (mean, std) = mean_std(v);
                ResultRow {
                    setting: SettingKind::PdaRotation.name().into(),
                    n,
                    method: m.clone(),
                    mean,
                    std,
                    repeats: v.len(),
                    seed: self.options_seed,
                }
            })
            .collect();
        ResultsTable { rows }
    }
}

/// Trains with `C` chosen by cross-validation on `ts`.
pub fn train_cv(
    ts: &WeightedTrainingSet,
    opts: &PdaOptions,
    seed: u64,
) -> Result<LinearClassifier> {
    let (c, _) = predsvm::select_c(ts, &opts.c_grid, opts.folds, seed, &opts.svm)?;
    predsvm::train_with(ts, c, &opts.svm).map(|(clf, _)| clf)
}

/// Rotating Gaussians: two classes whose means turn by `rotation` per step. Trains
/// on steps `1..=T` and reports test accuracy at `T + 1` for an SVM on each single
/// set, on their union, on the predicted distribution (joint kernel), and on a
/// prediction whose dynamics ignore the labels.
pub fn run_pda_synthetic(opts: &PdaOptions) -> Result<PdaRuns> {
    if opts.repeats == 0 {
        return Err(Error::InvalidArgument("need at least 1 repeat".into()));
    }
    let outcomes: Vec<Option<Vec<(String, f64)>>> = (0..opts.repeats)
        .into_par_iter()
        .map(|r| pda_repeat(opts, opts.seed.wrapping_add(r as u64)))
        .collect::<Result<_>>()?;
    let mut methods: Vec<(String, Vec<f64>)> = Vec::new();
    let mut degenerate = 0;
    for o in outcomes {
        let Some(accs) = o else {
            degenerate += 1;
            continue;
        };
        for (name, a) in accs {
            match methods.iter_mut().find(|(m, _)| *m == name) {
                Some((_, v)) => v.push(a),
                None => methods.push((name, vec![a])),
            }
        }
    }
    if degenerate > 0 {
        log::warn!("{degenerate} of {} repeats were degenerate", opts.repeats);
    }
    Ok(PdaRuns {
        options_seed: opts.seed,
        methods,
        degenerate,
    })
}

fn pda_repeat(opts: &PdaOptions, seed: u64) -> Result<Option<Vec<(String, f64)>>> {
    let setting = SyntheticSetting {
        kind: SettingKind::PdaRotation,
        steps: opts.steps,
        n: opts.n,
        seed,
        rotation: opts.rotation,
        geometry: opts.geometry,
    };
    let sets: Vec<SampleSet> = (1..=opts.steps as i64)
        .map(|t| generate(&setting, t))
        .collect::<Result<_>>()?;
    let test = generate_stream(
        &SyntheticSetting {
            n: opts.n_test,
            ..setting.clone()
        },
        setting.target_time(),
        STREAM_TEST,
    )?;
    let outcome = (|| -> Result<Vec<(String, f64)>> {
        let mut out = Vec::new();
        for s in &sets {
            let ts = WeightedTrainingSet::from_sets(&[s], 1.0 / s.len() as f64)?;
            let clf = train_cv(&ts, opts, seed)?;
            out.push((format!("single_t{}", s.time_index()), clf.accuracy(&test)?));
        }
        let all: Vec<&SampleSet> = sets.iter().collect();
        let total: usize = sets.iter().map(SampleSet::len).sum();
        let union = WeightedTrainingSet::from_sets(&all, 1.0 / total as f64)?;
        out.push((
            "union".into(),
            train_cv(&union, opts, seed)?.accuracy(&test)?,
        ));

        let lambda = opts
            .lambda
            .unwrap_or_else(|| dynamics::default_lambda(&sets));
        let joint = KernelSpec::joint_label(opts.base_kernel.clone());
        let model = dynamics::fit(sets.clone(), joint, lambda, None)?;
        let pred = model.extrapolate()?;
        let ts = predsvm::flip_transform(&pred.embedding)?;
        out.push((
            "predsvm".into(),
            train_cv(&ts, opts, seed)?.accuracy(&test)?,
        ));

        if opts.ablation {
            let unlabeled: Vec<SampleSet> = sets.iter().map(SampleSet::without_labels).collect();
            let model = dynamics::fit(unlabeled, opts.base_kernel.clone(), lambda, None)?;
            let beta = model.extrapolate()?.beta;
            let blocks: Vec<(f64, &SampleSet)> = beta.iter().copied().zip(&sets[1..]).collect();
            let ts = predsvm::flip_transform(&WeightedEmbedding::from_blocks(&blocks)?)?;
            out.push((
                "predsvm_unlabeled".into(),
                train_cv(&ts, opts, seed)?.accuracy(&test)?,
            ));
        }
        Ok(out)
    })();
    match outcome {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::SingleClass | Error::NotConverged { .. } | Error::InvalidArgument(_))) => {
            log::warn!("rotation benchmark repeat with seed {seed} is degenerate: {e}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}
