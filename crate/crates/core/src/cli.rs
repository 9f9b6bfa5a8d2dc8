//! Command-line interface. Exit codes: 0 success, 1 I/O or parse error,
//! 2 invalid input or arguments, 3 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{HerdingSettings, Lambda, RunConfig};
use crate::dynamics::{self, GammaRule};
use crate::embedding::{embed, WeightedEmbedding};
use crate::error::{Error, Result};
use crate::experiments::{self, PdaOptions, ReferenceMode, SettingKind, TableOptions};
use crate::herding::{self, HerdingConfig};
use crate::io::{self, PredictionFile, PredictionInput};
use crate::kernels::{KernelKind, KernelSpec};
use crate::metrics::{self, EvalOptions, Prediction};
use crate::predsvm::{self, SvmOptions, WeightedTrainingSet, DEFAULT_C_GRID};
use crate::sample::{PointCloud, SampleSet};

#[derive(Debug, Parser)]
#[command(
    name = "edd",
    version,
    about = "Extrapolate time-varying distributions from sample sets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the dynamics on a JSON-lines sample file and predict the next step.
    Predict(PredictArgs),
    /// Turn a signed-weight prediction into a sample set.
    Herd(HerdArgs),
    /// Compare a prediction with a reference sample set.
    Eval(EvalArgs),
    /// Train a linear classifier on a labeled prediction or sample file.
    Svm(SvmArgs),
    /// Run a synthetic benchmark and write a CSV table.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    GaussianDensity,
    HistogramIntersection,
    RbfChi2,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GammaArg {
    None,
    Exponential,
    SqrtN,
}

#[derive(Debug, Default, Args)]
pub struct KernelArgs {
    /// JSON run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Gaussian variance σ².
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Compare labels as well as points (joint kernel).
    #[arg(long)]
    pub joint: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Ridge parameter, or "auto" for 1 / mean set size.
    #[arg(long)]
    pub lambda: Option<Lambda>,
    #[arg(long, value_enum)]
    pub gamma: Option<GammaArg>,
    /// Decay for exponential weighting, 0 < rho < 1.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HerdArgs {
    #[arg(long)]
    pub prediction: PathBuf,
    /// Candidate points (JSON lines); defaults to the prediction's atoms plus a grid for 1-D data.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long = "herd-m")]
    pub m: Option<usize>,
    /// Rescale the prediction to unit total weight before herding.
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction JSON or JSON-lines sample file.
    #[arg(long)]
    pub pred: PathBuf,
    /// JSON-lines sample file with a single time index.
    #[arg(long)]
    pub reference: PathBuf,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Also compute KL divergence (1-D sample predictions only).
    #[arg(long)]
    pub kl: bool,
    #[arg(long)]
    pub kde_bandwidth: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SvmArgs {
    /// Labeled prediction JSON or JSON-lines sample file.
    #[arg(long)]
    pub input: PathBuf,
    /// Regularization constant, or "cv" for 5-fold cross-validation over 10^0..10^6.
    #[arg(long = "c", default_value = "cv")]
    pub c: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Table1,
    Table2,
    Pda,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Sample sizes (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Settings to run (comma separated): mixture, translation, concentration.
    #[arg(long, value_delimiter = ',')]
    pub settings: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = ReferenceArg::Analytic)]
    pub reference: ReferenceArg,
    /// CSV output; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the table as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    Analytic,
    Sample,
}

/// Runs a parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Predict(a) => cmd_predict(&a),
        Command::Herd(a) => cmd_herd(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Svm(a) => cmd_svm(&a),
        Command::Experiment(a) => cmd_experiment(&a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(out: Option<&Path>, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    emit(out, &text)
}

fn load_config(args: &KernelArgs) -> Result<Option<RunConfig>> {
    match &args.config {
        Some(p) => Ok(Some(RunConfig::from_json(&std::fs::read_to_string(p)?)?)),
        None => Ok(None),
    }
}

/// Kernel from flags, then the config file, then `fallback`.
fn resolve_kernel(
    args: &KernelArgs,
    cfg: Option<&RunConfig>,
    fallback: Option<&KernelSpec>,
) -> KernelSpec {
    let mut spec = match (args.kernel, cfg, fallback) {
        (Some(k), _, _) => {
            let kind = match k {
                KernelArg::Gaussian => KernelKind::Gaussian,
                KernelArg::GaussianDensity => KernelKind::GaussianDensity,
                KernelArg::HistogramIntersection => KernelKind::HistogramIntersection,
                KernelArg::RbfChi2 => KernelKind::RbfChi2,
                KernelArg::Linear => KernelKind::Linear,
            };
            KernelSpec {
                kind,
                bandwidth: matches!(kind, KernelKind::Gaussian | KernelKind::GaussianDensity)
                    .then_some(1.0),
                base: None,
            }
        }
        (None, Some(c), _) => c.kernel.clone(),
        (None, None, Some(k)) => k.clone(),
        (None, None, None) => KernelSpec::gaussian(1.0),
    };
    if let Some(b) = args.bandwidth {
        let target = match spec.kind {
            KernelKind::JointLabel => spec.base.as_deref_mut(),
            _ => Some(&mut spec),
        };
        if let Some(t) = target {
            t.bandwidth = Some(b);
        }
    }
    if args.joint && spec.kind != KernelKind::JointLabel {
        spec = KernelSpec::joint_label(spec);
    }
    spec
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let cfg = load_config(&a.kernel)?.unwrap_or_default();
    let input = a
        .input
        .clone()
        .or_else(|| cfg.io.input.clone())
        .ok_or_else(|| Error::InvalidArgument("no input file given".into()))?;
    let out = a.out.clone().or_else(|| cfg.io.output.clone());
    let sets = io::read_samples(&input)?;
    if sets.len() < 2 {
        return Err(Error::TooFewSets(sets.len()));
    }
    let spec = resolve_kernel(&a.kernel, Some(&cfg), None);
    let lambda = a.lambda.unwrap_or(cfg.lambda).resolve(&sets);
    let rule = match a.gamma {
        None => match (&cfg.gamma_rule, a.rho) {
            (GammaRule::Exponential { .. }, Some(rho)) => GammaRule::Exponential { rho },
            (r, _) => r.clone(),
        },
        Some(GammaArg::None) => GammaRule::None,
        Some(GammaArg::SqrtN) => GammaRule::SqrtN,
        Some(GammaArg::Exponential) => GammaRule::Exponential {
            rho: a.rho.ok_or_else(|| {
                Error::InvalidArgument("exponential weighting needs --rho".into())
            })?,
        },
    };
    let gamma = rule.weights(&sets)?;
    let target = sets.last().expect("two or more sets").time_index() + 1;
    let model = dynamics::fit(sets, spec, lambda, gamma)?;
    let pred = model.extrapolate()?;
    let record = model.to_record(vec![io::source_ref(&input)?]);
    let file = PredictionFile {
        t: target,
        beta: pred.beta,
        blocks: pred.blocks,
        model: Some(record),
        embedding: pred.embedding,
    };
    emit_json(out.as_deref(), &file)
}

fn read_prediction(path: &Path) -> Result<PredictionFile> {
    match io::read_prediction_or_samples(path)? {
        PredictionInput::Weighted(p) => Ok(p),
        PredictionInput::Samples(_) => Err(Error::InvalidArgument(format!(
            "{} is a sample file, expected a prediction",
            path.display()
        ))),
    }
}

pub fn cmd_herd(a: &HerdArgs) -> Result<()> {
    let cfg = load_config(&a.kernel)?;
    let pred = read_prediction(&a.prediction)?;
    let model_kernel = pred.model.as_ref().map(|m| &m.kernel);
    let spec = resolve_kernel(&a.kernel, cfg.as_ref(), model_kernel);
    let settings = cfg
        .as_ref()
        .and_then(|c| c.herding.clone())
        .unwrap_or_default();
    let m = match a.m.or(settings.m) {
        Some(m) => m,
        None => {
            let n: usize = pred.blocks.iter().map(|b| b.n).sum();
            (n / pred.blocks.len().max(1)).max(1)
        }
    };
    let pool = match a
        .pool
        .as_ref()
        .or(cfg.as_ref().and_then(|c| c.io.pool.as_ref()))
    {
        Some(p) => io::read_pool(p)?,
        None => default_pool_from(&pred.embedding, &spec, &settings)?,
    };
    let mut hc = HerdingConfig::new(m, pool);
    hc.refine_steps = settings.refine_steps;
    hc.refine_step_size = settings.refine_step_size;
    let target = if a.normalize {
        experiments::unit_mass(&pred.embedding)
    } else {
        pred.embedding
    };
    let herded = herding::herd(&target, &spec, &hc)?.with_time_index(pred.t);
    let mut buf = Vec::new();
    io::write_samples_to(&mut buf, &[herded])?;
    emit(
        a.out.as_deref(),
        std::str::from_utf8(&buf).expect("json is utf-8"),
    )
}

fn default_pool_from(
    e: &WeightedEmbedding,
    spec: &KernelSpec,
    s: &HerdingSettings,
) -> Result<PointCloud> {
    let sigma = spec.input_kernel().bandwidth.unwrap_or(1.0).sqrt();
    let atoms = SampleSet::from_cloud(0, e.points().clone())?;
    herding::default_pool(&[atoms], s.grid_points, s.pad_sigmas * sigma)
}

fn single_set(sets: Vec<SampleSet>, path: &Path) -> Result<SampleSet> {
    if sets.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "{} holds {} time indices, expected one",
            path.display(),
            sets.len()
        )));
    }
    Ok(sets.into_iter().next().expect("one set"))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cfg = load_config(&a.kernel)?;
    let reference = single_set(io::read_samples(&a.reference)?, &a.reference)?;
    let opts = EvalOptions {
        kl: a.kl,
        kde_bandwidth: a.kde_bandwidth,
        ..EvalOptions::default()
    };
    let report = match io::read_prediction_or_samples(&a.pred)? {
        PredictionInput::Weighted(p) => {
            let spec = resolve_kernel(&a.kernel, cfg.as_ref(), p.model.as_ref().map(|m| &m.kernel));
            metrics::evaluate_prediction(
                Prediction::Weighted(&p.embedding),
                &reference,
                &spec,
                &opts,
            )?
        }
        PredictionInput::Samples(sets) => {
            let spec = resolve_kernel(&a.kernel, cfg.as_ref(), None);
            let s = single_set(sets, &a.pred)?;
            metrics::evaluate_prediction(Prediction::Samples(&s), &reference, &spec, &opts)?
        }
    };
    emit_json(a.out.as_deref(), &report)
}

pub fn cmd_svm(a: &SvmArgs) -> Result<()> {
    let ts = match io::read_prediction_or_samples(&a.input)? {
        PredictionInput::Weighted(p) => predsvm::flip_transform(&p.embedding)?,
        PredictionInput::Samples(sets) => {
            let refs: Vec<&SampleSet> = sets.iter().collect();
            let total: usize = sets.iter().map(SampleSet::len).sum();
            WeightedTrainingSet::from_sets(&refs, 1.0 / total as f64)?
        }
    };
    let opts = SvmOptions::default();
    let c = if a.c == "cv" {
        predsvm::select_c(&ts, &DEFAULT_C_GRID, 5, a.seed, &opts)?.0
    } else {
        a.c.parse::<f64>().map_err(|_| {
            Error::InvalidArgument(format!("C must be a number or \"cv\", got {:?}", a.c))
        })?
    };
    let clf = predsvm::train_with(&ts, c, &opts)?.0;
    emit_json(a.out.as_deref(), &clf)
}

pub fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let table = match a.name {
        ExperimentName::Table1 | ExperimentName::Table2 => {
            let kinds: Vec<SettingKind> = match &a.settings {
                Some(names) => names.iter().map(|s| s.parse()).collect::<Result<_>>()?,
                None => SettingKind::TABLES.to_vec(),
            };
            let ns = a.n.clone().unwrap_or_else(|| vec![10, 100, 1000]);
            let opts = TableOptions {
                repeats: a.repeats.unwrap_or(100),
                seed: a.seed,
                reference: match a.reference {
                    ReferenceArg::Analytic => ReferenceMode::Analytic,
                    ReferenceArg::Sample => ReferenceMode::Sample,
                },
                herding: true,
                ..TableOptions::default()
            };
            let runs = experiments::run_tables(&kinds, &ns, &opts)?;
            match a.name {
                ExperimentName::Table1 => runs.table1(),
                _ => runs.table2(),
            }
        }
        ExperimentName::Pda => {
            let mut opts = PdaOptions {
                seed: a.seed,
                ..PdaOptions::default()
            };
            if let Some(r) = a.repeats {
                opts.repeats = r;
            }
            if let Some(n) = a.n.as_ref().and_then(|v| v.first()) {
                opts.n = *n;
            }
            experiments::run_pda_synthetic(&opts)?.table(opts.n)
        }
    };
    if let Some(p) = &a.json {
        table.write_json(p)?;
    }
    emit(a.out.as_deref(), &table.to_csv_string()?)
}

/// Embedding of a sample file's single set, for callers that mix formats.
pub fn embed_file(path: &Path) -> Result<WeightedEmbedding> {
    Ok(embed(&single_set(io::read_samples(path)?, path)?))
}
