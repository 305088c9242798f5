//! The `gspm` command line: `gen`, `metric`, `flow` and `bound`.
//!
//! Exit codes: 0 on success, 2 for usage errors and invalid arguments, 3 for
//! numerical failures (divergence, non-finite values, range violations), 1
//! for I/O and input-file errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::datasets::{generate, load_csv, save_csv, Dataset, DatasetParams};
use crate::error::Error;
use crate::flow::{
    convergence_bound, run_flow, theorem_constants, FlowAbort, FlowConfig, FlowKernel, LogRow, NoiseSchedule,
    RunOptions, SlicePolicy, DEFAULT_ETA,
};
use crate::kernels::{KernelSpec, Operator, SmoothingProfile, DEFAULT_QUADRATURE_POINTS};
use crate::metrics::{gspm, max_gspm, mmd2, BaseMetric, EmpiricalDistribution};
use crate::slicing::{SliceFamily, SliceSet};

/// Environment variable read when `--threads` is not given.
pub const THREADS_ENV: &str = "GSPM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "gspm",
    version,
    about = "Generalized sliced probability metrics and GSPM-MMD particle flows"
)]
pub struct Cli {
    /// Worker threads (defaults to $GSPM_THREADS, then to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic dataset to CSV.
    Gen(GenArgs),
    /// Distance between two CSV samples.
    Metric(MetricArgs),
    /// Run a particle flow towards a CSV target.
    Flow(FlowArgs),
    /// Evaluate the convergence-bound constants.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// swiss_roll, gaussians8, gaussians25 or gaussian_init.
    #[arg(long)]
    pub dataset: Dataset,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generator parameter as key=value (scale, jitter, radius, std, spacing, init_scale, stratified).
    #[arg(long = "param", value_parser = parse_key_value)]
    pub params: Vec<(String, String)>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricKind {
    Gspm,
    MaxGspm,
    Mmd2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum XiKind {
    W1,
    W2,
    Cramer2,
    SmoothedL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OperatorKind {
    Id,
    Cumint,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    #[arg(long)]
    pub p: PathBuf,
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long, value_enum, default_value = "gspm")]
    pub kind: MetricKind,
    /// One-dimensional base metric (GSPM kinds only; default w2).
    #[arg(long, value_enum)]
    pub xi: Option<XiKind>,
    /// linear, poly:<odd degree> or circular:<scale>.
    #[arg(long, default_value = "linear", value_parser = parse_slices)]
    pub slices: SliceFamily,
    #[arg(long = "L", default_value_t = 10)]
    pub l: usize,
    /// GSPM order (GSPM kinds only; default 2).
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "id")]
    pub operator: OperatorKind,
    /// gaussian, dirac or smoothstep:<order>. Defaults to gaussian for the
    /// identity operator and smoothstep:0 for the cumulative one.
    #[arg(long, value_parser = parse_smoothing_name)]
    pub smoothing: Option<SmoothingName>,
    /// Domain half-width for the cumulative operator (default: from the data).
    #[arg(long = "T")]
    pub half_width: Option<f64>,
    /// Slice seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ascent iterations refining the best candidate slice (max-gspm only; default 50).
    #[arg(long)]
    pub refine_steps: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlowKernelKind {
    GspmId,
    GspmCramer,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecayKind {
    Const,
    InvK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SlicePolicyKind {
    Resample,
    Fixed,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[arg(long)]
    pub target: PathBuf,
    /// Number of particles drawn from the Gaussian initialization.
    #[arg(long)]
    pub n_particles: usize,
    /// Start from this CSV instead of the Gaussian initialization.
    #[arg(long, conflicts_with = "init_scale")]
    pub init: Option<PathBuf>,
    /// Standard deviation of the Gaussian initialization.
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long, value_enum, default_value = "gspm-id")]
    pub kernel: FlowKernelKind,
    /// Slice family of the sliced kernels (default linear).
    #[arg(long, value_parser = parse_slices)]
    pub slices: Option<SliceFamily>,
    /// Slices per iteration (default 10).
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Whether sliced kernels draw new slices every iteration (default resample).
    #[arg(long, value_enum)]
    pub slice_policy: Option<SlicePolicyKind>,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.0)]
    pub beta0: f64,
    #[arg(long, value_enum, default_value = "inv-k")]
    pub decay: DecayKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub eval_every: usize,
    #[arg(long, default_value_t = 1)]
    pub log_every: usize,
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub gf: f64,
    #[arg(long)]
    pub gphi: f64,
    #[arg(long)]
    pub opnorm: f64,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub eta: f64,
    #[arg(long)]
    pub zeta0: f64,
    /// Comma-separated noise levels; may be empty.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub betas: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingName {
    Gaussian,
    Dirac,
    Smoothstep(u32),
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_slices(s: &str) -> Result<SliceFamily, String> {
    let family = match s.split_once(':') {
        None if s == "linear" => SliceFamily::Linear,
        Some(("poly", m)) => SliceFamily::Polynomial {
            degree: m.parse().map_err(|_| format!("bad degree '{m}'"))?,
        },
        Some(("circular", r)) => SliceFamily::Circular {
            scale: r.parse().map_err(|_| format!("bad scale '{r}'"))?,
        },
        _ => return Err(format!("expected linear, poly:<m> or circular:<s>, got '{s}'")),
    };
    family.validate().map_err(|e| e.to_string())?;
    Ok(family)
}

fn parse_smoothing_name(s: &str) -> Result<SmoothingName, String> {
    match s.split_once(':') {
        None if s == "gaussian" => Ok(SmoothingName::Gaussian),
        None if s == "dirac" => Ok(SmoothingName::Dirac),
        None if s == "smoothstep" => Ok(SmoothingName::Smoothstep(0)),
        Some(("smoothstep", n)) => n
            .parse()
            .map(SmoothingName::Smoothstep)
            .map_err(|_| format!("bad order '{n}'")),
        _ => Err(format!("expected gaussian, dirac or smoothstep:<n>, got '{s}'")),
    }
}

fn smoothing_profile(name: SmoothingName, sigma: f64) -> SmoothingProfile {
    match name {
        SmoothingName::Gaussian => SmoothingProfile::Gaussian { sigma },
        SmoothingName::Dirac => SmoothingProfile::Dirac,
        SmoothingName::Smoothstep(order) => SmoothingProfile::Smoothstep { order, sigma },
    }
}

fn smoothing_label(p: &SmoothingProfile) -> String {
    match p {
        SmoothingProfile::Gaussian { .. } => "gaussian".into(),
        SmoothingProfile::Dirac => "dirac".into(),
        SmoothingProfile::Smoothstep { order, .. } => format!("smoothstep:{order}"),
    }
}

fn slices_label(f: SliceFamily) -> String {
    match f {
        SliceFamily::Linear => "linear".into(),
        SliceFamily::Polynomial { degree } => format!("poly:{degree}"),
        SliceFamily::Circular { scale } => format!("circular:{scale}"),
    }
}

/// Formats like C's `%.{digits}g`.
pub fn format_significant(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        trim(&format!("{:.*}", (digits as i32 - 1 - exp) as usize, v))
    }
}

fn g12(v: f64) -> String {
    format_significant(v, 12)
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
    Flow(FlowAbort),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => error_code(e),
            CliError::Flow(abort) => error_code(&abort.error),
        }
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::Unsupported(_) => 2,
        Error::Singularity | Error::RangeViolation { .. } | Error::NonFinite(_) | Error::Diverged { .. } => 3,
        Error::BudgetExceeded { .. } | Error::Csv { .. } | Error::Io(_) => 1,
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Flow(a) => write!(f, "{a}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run_with_args<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            // help and version go to stdout with status 0
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return if code == 0 { 0 } else { 2 };
        }
    };
    match run(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got '{s}'"))),
        _ => Ok(None),
    }
}

pub fn run(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> CliResult<()> {
    let threads = thread_count(cli.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Metric(a) => cmd_metric(a, out),
        Command::Flow(a) => cmd_flow(a, out),
        Command::Bound(a) => cmd_bound(a, out, err),
    })
}

fn cmd_gen(args: GenArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let mut params = DatasetParams::default();
    for (k, v) in &args.params {
        params.set(k, v)?;
    }
    let data = generate(args.dataset, args.n, args.seed, &params)?;
    save_csv(&args.out, &data)?;
    writeln!(
        out,
        "wrote {} samples of {} to {}",
        data.len(),
        args.dataset,
        args.out.display()
    )?;
    Ok(())
}

fn write_report(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Lib(Error::Io(e.into())))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_metric(args: MetricArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    if args.kind == MetricKind::Mmd2 {
        if args.xi.is_some() {
            return Err(CliError::Usage("--xi applies to gspm and max-gspm, not mmd2".into()));
        }
        if args.r.is_some() {
            return Err(CliError::Usage("--r applies to gspm and max-gspm, not mmd2".into()));
        }
    }
    let xi_kind = args.xi.unwrap_or(XiKind::W2);
    let uses_smoothing = args.kind == MetricKind::Mmd2 || xi_kind == XiKind::SmoothedL2;
    if !uses_smoothing && (args.smoothing.is_some() || args.half_width.is_some()) {
        return Err(CliError::Usage(
            "--smoothing and --T apply to mmd2 and smoothed-l2 only".into(),
        ));
    }
    if args.kind != MetricKind::MaxGspm && args.refine_steps.is_some() {
        return Err(CliError::Usage("--refine-steps applies to max-gspm only".into()));
    }
    let refine_steps = args.refine_steps.unwrap_or(50);
    let r = args.r.unwrap_or(2.0);

    let p = load_csv(&args.p)?;
    let q = load_csv(&args.q)?;
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        }
        .into());
    }
    let operator = match args.operator {
        OperatorKind::Id => Operator::Identity,
        OperatorKind::Cumint => Operator::CumulativeIntegral {
            half_width: args.half_width,
        },
    };
    if args.half_width.is_some() && args.operator == OperatorKind::Id {
        return Err(CliError::Usage("--T applies to the cumulative operator".into()));
    }
    let smoothing_name = args.smoothing.unwrap_or(match args.operator {
        OperatorKind::Id => SmoothingName::Gaussian,
        OperatorKind::Cumint => SmoothingName::Smoothstep(0),
    });
    let smoothing = smoothing_profile(smoothing_name, args.sigma);

    let slices = SliceSet::sample(args.slices, p.dim(), args.l, args.seed)?;
    let mut half_width = None;
    let value = match args.kind {
        MetricKind::Mmd2 => {
            let spec = KernelSpec::new(smoothing, operator, args.slices, args.l, args.seed);
            let kernel = spec.bind(&slices, &[&p, &q])?;
            half_width = kernel.params.half_width;
            mmd2(&p, &q, &kernel)?
        }
        MetricKind::Gspm | MetricKind::MaxGspm => {
            let xi = match xi_kind {
                XiKind::W1 => BaseMetric::Wasserstein { order: 1.0 },
                XiKind::W2 => BaseMetric::Wasserstein { order: 2.0 },
                XiKind::Cramer2 => BaseMetric::Cramer,
                XiKind::SmoothedL2 => BaseMetric::smoothed_l2(smoothing, operator),
            };
            if args.kind == MetricKind::Gspm {
                gspm(&p, &q, &xi, r, &slices)?
            } else {
                max_gspm(&p, &q, &xi, r, &slices, refine_steps)?.value
            }
        }
    };
    writeln!(out, "{}", g12(value))?;

    if let Some(path) = &args.report {
        let kind = args.kind.to_possible_value().expect("named").get_name().to_string();
        let mut report = json!({
            "command": "metric",
            "p": { "path": args.p.display().to_string(), "n": p.len(), "dim": p.dim() },
            "q": { "path": args.q.display().to_string(), "n": q.len(), "dim": q.dim() },
            "kind": kind,
            "slices": slices_label(args.slices),
            "L": args.l,
            "slice_seed": args.seed,
            "value": value,
            "value_text": g12(value),
        });
        let map = report.as_object_mut().expect("object");
        if args.kind != MetricKind::Mmd2 {
            let xi = xi_kind.to_possible_value().expect("named").get_name().to_string();
            map.insert("xi".into(), json!(xi));
            map.insert("r".into(), json!(r));
        }
        if args.kind == MetricKind::MaxGspm {
            map.insert("refine_steps".into(), json!(refine_steps));
        }
        if uses_smoothing {
            let op = args.operator.to_possible_value().expect("named").get_name().to_string();
            map.insert("operator".into(), json!(op));
            map.insert("smoothing".into(), json!(smoothing_label(&smoothing)));
            map.insert("sigma".into(), json!(args.sigma));
            map.insert("T".into(), json!(half_width));
            map.insert("quadrature_points".into(), json!(DEFAULT_QUADRATURE_POINTS));
            if args.kind == MetricKind::Mmd2 {
                let spec = KernelSpec::new(smoothing, operator, args.slices, args.l, args.seed);
                map.insert("eval_mode".into(), json!(spec.mode()?));
            }
        }
        write_report(path, &report)?;
    }
    Ok(())
}

fn write_log_row(w: &mut impl Write, row: &LogRow) -> std::io::Result<()> {
    let w2 = row.w2.map(g12).unwrap_or_default();
    writeln!(w, "{},{},{},{}", row.iter, g12(row.mmd2), w2, g12(row.beta))
}

fn cmd_flow(args: FlowArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    if args.kernel == FlowKernelKind::Rbf && (args.slices.is_some() || args.l.is_some() || args.slice_policy.is_some())
    {
        return Err(CliError::Usage(
            "--slices, --L and --slice-policy do not apply to the rbf kernel".into(),
        ));
    }
    let family = args.slices.unwrap_or(SliceFamily::Linear);
    let slice_count = args.l.unwrap_or(10);
    let target = load_csv(&args.target)?;
    // distinct seeds for the three random streams of a run
    let init_seed = args.seed;
    let slice_seed = args.seed.wrapping_add(1);
    let noise_seed = args.seed.wrapping_add(2);
    let mut params = DatasetParams::default();
    if let Some(s) = args.init_scale {
        params.init_scale = s;
    }
    let init = match &args.init {
        Some(path) => {
            let d = load_csv(path)?;
            if d.len() != args.n_particles {
                return Err(CliError::Usage(format!(
                    "--init has {} rows but --n-particles is {}",
                    d.len(),
                    args.n_particles
                )));
            }
            d
        }
        None => {
            let d = generate(Dataset::GaussianInit, args.n_particles, init_seed, &params)?;
            if target.dim() == 2 {
                d
            } else {
                gaussian_cloud(args.n_particles, target.dim(), init_seed, params.init_scale)?
            }
        }
    };

    let kernel = match args.kernel {
        FlowKernelKind::GspmId => FlowKernel::Sliced(KernelSpec::new(
            SmoothingProfile::Gaussian { sigma: args.sigma },
            Operator::Identity,
            family,
            slice_count,
            slice_seed,
        )),
        FlowKernelKind::GspmCramer => FlowKernel::Sliced(KernelSpec::new(
            SmoothingProfile::Smoothstep {
                order: 0,
                sigma: args.sigma,
            },
            Operator::cumulative(),
            family,
            slice_count,
            slice_seed,
        )),
        FlowKernelKind::Rbf => FlowKernel::Rbf { sigma: args.sigma },
    };
    let config = FlowConfig {
        eta: args.eta,
        beta0: args.beta0,
        schedule: match args.decay {
            DecayKind::Const => NoiseSchedule::Constant,
            DecayKind::InvK => NoiseSchedule::InverseK,
        },
        iterations: args.iters,
        kernel,
        slice_policy: match args.slice_policy.unwrap_or(SlicePolicyKind::Resample) {
            SlicePolicyKind::Resample => SlicePolicy::Resample,
            SlicePolicyKind::Fixed => SlicePolicy::Fixed,
        },
        seed: noise_seed,
    };
    config.validate()?;
    let options = RunOptions {
        log_every: args.log_every,
        eval_every: args.eval_every,
    };

    if let Some(path) = &args.report {
        let kernel = args.kernel.to_possible_value().expect("named").get_name().to_string();
        let mut report = json!({
            "command": "flow",
            "target": { "path": args.target.display().to_string(), "n": target.len(), "dim": target.dim() },
            "n_particles": args.n_particles,
            "init": match &args.init {
                Some(p) => json!({ "path": p.display().to_string() }),
                None => json!({ "dataset": "gaussian_init", "init_scale": params.init_scale, "seed": init_seed }),
            },
            "kernel": kernel,
            "sigma": args.sigma,
            "eta": args.eta,
            "iters": args.iters,
            "beta0": args.beta0,
            "decay": config.schedule,
            "seed": args.seed,
            "noise_seed": noise_seed,
            "eval_every": args.eval_every,
            "log_every": args.log_every,
        });
        if args.kernel != FlowKernelKind::Rbf {
            let map = report.as_object_mut().expect("object");
            map.insert("slices".into(), json!(slices_label(family)));
            map.insert("L".into(), json!(slice_count));
            map.insert("slice_policy".into(), json!(config.slice_policy));
            map.insert("slice_seed".into(), json!(slice_seed));
            if args.kernel == FlowKernelKind::GspmCramer {
                map.insert("smoothing".into(), json!("smoothstep:0"));
                map.insert(
                    "T".into(),
                    json!("max |f| over particles, target and probes, plus sigma plus 1, per iteration"),
                );
            } else {
                map.insert("smoothing".into(), json!("gaussian"));
            }
        }
        write_report(path, &report)?;
    }

    let mut log = BufWriter::new(File::create(&args.log)?);
    writeln!(log, "iter,mmd2,w2,beta")?;
    let mut io_error = None;
    let result = run_flow(&init, &target, &config, options, |row| {
        if io_error.is_none() {
            io_error = write_log_row(&mut log, row).err();
        }
    });
    log.flush()?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let run = result.map_err(CliError::Flow)?;
    save_csv(&args.out, &run.state.particles)?;
    let last = run.log.last().expect("final row is always logged");
    let first_w2 = run.log.iter().find_map(|r| r.w2);
    write!(out, "iterations {} mmd2 {}", config.iterations, g12(last.mmd2))?;
    if let (Some(w0), Some(w)) = (first_w2, last.w2) {
        write!(out, " w2 {} (initial {})", g12(w), g12(w0))?;
    }
    writeln!(out)?;
    Ok(())
}

/// Isotropic Gaussian initialization in dimension `dim`.
fn gaussian_cloud(n: usize, dim: usize, seed: u64, scale: f64) -> crate::Result<EmpiricalDistribution> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect();
    EmpiricalDistribution::uniform(data, dim)
}

fn cmd_bound(args: BoundArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> CliResult<()> {
    let betas = args
        .betas
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--betas: '{s}' is not a number")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    if !(args.eta > 0.0 && args.eta.is_finite()) {
        return Err(CliError::Usage(format!("--eta must be positive, got {}", args.eta)));
    }
    if !(args.zeta0 >= 0.0 && args.zeta0.is_finite()) {
        return Err(CliError::Usage(format!(
            "--zeta0 must be non-negative, got {}",
            args.zeta0
        )));
    }
    let c = theorem_constants(args.gf, args.gphi, args.opnorm, args.d)?;
    let bound = convergence_bound(args.zeta0, &c, args.eta, &betas);
    writeln!(out, "L {}", g12(c.l_const))?;
    writeln!(out, "lambda {}", g12(c.lambda_const))?;
    writeln!(out, "bound {}", g12(bound.value))?;
    if !bound.contracting {
        writeln!(
            err,
            "warning: eta = {} >= 1/(3L) = {}; the bound does not contract",
            g12(args.eta),
            g12(c.max_contracting_eta())
        )?;
    }
    Ok(())
}
