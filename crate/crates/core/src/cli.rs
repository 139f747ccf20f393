//! Command-line front end. Exit codes: 0 success, 2 usage, 3 solver
//! failure, 4 I/O or malformed input file.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baseline::{self, GdConfig, GdStatus};
use crate::certify::{self, ActiveSets, Certificate, DualOutcome};
use crate::error::{Error, Result};
use crate::mnistreg::{self, ExperimentConfig};
use crate::model::{self, Dataset};
use crate::relax::{self, RelaxConfig};
use crate::sweep::{self, GridSpec, Method};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "convrelax", version, about = "Convex relaxations for non-overlapping convolutional ReLU networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a planted dataset and write it as CSV.
    Gen(GenArgs),
    /// Fit a filter with the relaxation or gradient descent.
    Fit(FitArgs),
    /// Check the cone condition and the dual program for a filter and perturbation.
    Certify(CertifyArgs),
    /// Run a phase-transition sweep and write the cell table as CSV.
    Sweep(SweepArgs),
    /// Rotation-angle regression with raw and filter-augmented pixels.
    Mnist(MnistArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the planted filter as a JSON array.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    Relax,
    Gd,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FitMethod::Relax)]
    pub method: FitMethod,
    /// Perturbation weight; 0 solves the limiting LP.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Independent perturbations (relax) or restarts (gd).
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::qpsolve::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = relax::DEFAULT_TAU)]
    pub tau: f64,
    /// Planted filter (comma list or @file.json) for error reporting.
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Filter to certify (comma list or @file.json); the pseudoinverse fit when absent.
    #[arg(long)]
    pub w: Option<String>,
    /// Perturbation direction; drawn from --seed when absent.
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = certify::DEFAULT_CONE_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON grid specification; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub d_values: Option<Vec<usize>>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub amplification: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Repeat the methods on this dataset instead of sampling a grid.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Planted filter of the fixture (comma list or @file.json).
    #[arg(long, requires = "fixture")]
    pub truth: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the effective grid specification here as JSON.
    #[arg(long)]
    pub spec_out: Option<PathBuf>,
    /// Print an ASCII success-rate map per method to standard error.
    #[arg(long)]
    pub heatmap: bool,
}

#[derive(Debug, Args)]
pub struct MnistArgs {
    /// Directory with the four IDX files; defaults to $CONVRELAX_MNIST_DIR.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Use generated stroke images instead of MNIST (this many per split pool).
    #[arg(long, conflicts_with = "dir")]
    pub synthetic: Option<usize>,
    /// JSON experiment configuration; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub angle_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub angle_hi: Option<f64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => EXIT_USAGE,
        Error::Solver(_) | Error::AllTrialsFailed(_) => EXIT_SOLVER,
        Error::Io(_)
        | Error::Json(_)
        | Error::Schema { .. }
        | Error::IdxBadMagic(_)
        | Error::IdxUnknownElement(_)
        | Error::IdxTruncated { .. } => EXIT_IO,
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command, writing results to `out`. Returns the exit code
/// for outcomes that are not errors but still signal failure (a diverged
/// or non-optimal fit).
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Gen(a) => gen(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Certify(a) => certify_cmd(a, out),
        Command::Sweep(a) => sweep_cmd(a, out),
        Command::Mnist(a) => mnist(a, out),
    }
}

/// Comma-separated numbers, or `@path` to a JSON array.
pub fn parse_vector(spec: &str) -> Result<Vec<f64>> {
    if let Some(path) = spec.strip_prefix('@') {
        return Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?);
    }
    spec.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("`{t}` is not a number")))
        })
        .collect()
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Result<i32> {
    let (planted, data) = model::sample_planted(a.n, a.d, a.k, a.seed)?;
    emit(out, a.out.as_deref(), &model::dataset_to_csv(&data))?;
    if let Some(p) = &a.truth_out {
        std::fs::write(p, serde_json::to_string(&planted.w_star)?)?;
    }
    Ok(EXIT_OK)
}

/// Shape printed by `fit --method gd --json`.
#[derive(Debug, Serialize)]
pub struct GdReport {
    pub best: baseline::GdResult,
    pub best_index: usize,
    pub train_residual: f64,
    pub l2_error: Option<f64>,
    pub rel_error: Option<f64>,
    pub success: Option<bool>,
    pub restarts: Vec<baseline::GdResult>,
}

fn load_truth(spec: Option<&str>, data: &Dataset) -> Result<Option<Vec<f64>>> {
    let Some(s) = spec else { return Ok(None) };
    let w = parse_vector(s)?;
    if w.len() != data.filter_len() {
        return Err(Error::DimensionMismatch {
            what: "truth filter",
            expected: data.filter_len(),
            found: w.len(),
        });
    }
    Ok(Some(w))
}

fn fit(a: FitArgs, out: &mut dyn Write) -> Result<i32> {
    if a.trials == 0 {
        return Err(Error::InvalidArgument("--trials must be positive".into()));
    }
    let data = model::load_dataset(&a.input)?;
    let truth = load_truth(a.truth.as_deref(), &data)?;
    match a.method {
        FitMethod::Relax => {
            if !(a.beta >= 0.0 && a.beta.is_finite()) || !(a.tol > 0.0) || !(a.tau > 0.0) {
                return Err(Error::InvalidArgument("--beta must be ≥ 0; --tol and --tau positive".into()));
            }
            let cfg = RelaxConfig {
                beta: a.beta,
                tol: a.tol,
                tau: a.tau,
                ..RelaxConfig::default()
            };
            let res = relax::fit_amplified(&data, a.trials, a.seed, &cfg, truth.as_deref())?;
            if a.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&res)?)?;
            } else {
                writeln!(out, "method: relax ({} trial(s), beta {})", a.trials, a.beta)?;
                writeln!(out, "best trial: {} (seed {})", res.best_index, res.best.trial_seed)?;
                writeln!(out, "status: {:?}", res.best.report.status)?;
                writeln!(out, "train residual: {:.6e}", res.best.train_residual)?;
                write_assessment(out, res.l2_error, res.rel_error, res.success)?;
                writeln!(out, "w_hat: {}", fmt_vec(&res.best.w_hat))?;
            }
            Ok(EXIT_OK)
        }
        FitMethod::Gd => {
            let runs: Vec<baseline::GdResult> = (0..a.trials)
                .map(|t| {
                    let cfg = GdConfig {
                        step_size: a.step_size,
                        max_iters: a.max_iters,
                        seed: crate::rng::trial_seed(a.seed, t),
                        ..GdConfig::default()
                    };
                    baseline::gd_fit(&data, &cfg)
                })
                .collect::<Result<_>>()?;
            let best_index = runs
                .iter()
                .enumerate()
                .filter(|(_, r)| r.status != GdStatus::Diverged)
                .min_by(|a, b| a.1.final_loss.total_cmp(&b.1.final_loss))
                .map(|(i, _)| i);
            let Some(best_index) = best_index else {
                eprintln!("error: every gradient-descent run diverged");
                return Ok(EXIT_SOLVER);
            };
            let best = runs[best_index].clone();
            let train_residual = model::residual(&data, &best.w_hat)?;
            let assessment = truth
                .as_deref()
                .map(|w| relax::assess(&best.w_hat, w, a.tau))
                .transpose()?;
            let rep = GdReport {
                train_residual,
                l2_error: assessment.map(|x| x.l2_error),
                rel_error: assessment.map(|x| x.rel_error),
                success: assessment.map(|x| x.success),
                best,
                best_index,
                restarts: runs,
            };
            if a.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&rep)?)?;
            } else {
                writeln!(out, "method: gd ({} run(s), step {:.4e})", a.trials, rep.best.step_size)?;
                writeln!(out, "best run: {} ({:?} after {} iterations)", best_index, rep.best.status, rep.best.iters_used)?;
                writeln!(out, "train residual: {:.6e}", rep.train_residual)?;
                write_assessment(out, rep.l2_error, rep.rel_error, rep.success)?;
                writeln!(out, "w_hat: {}", fmt_vec(&rep.best.w_hat))?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn write_assessment(out: &mut dyn Write, l2: Option<f64>, rel: Option<f64>, ok: Option<bool>) -> Result<()> {
    if let (Some(l2), Some(rel), Some(ok)) = (l2, rel, ok) {
        writeln!(out, "error: {l2:.6e} (relative {rel:.6e}) -> {}", if ok { "recovered" } else { "not recovered" })?;
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Debug, Serialize)]
pub struct CertifyReport {
    pub w: Vec<f64>,
    pub r: Vec<f64>,
    pub active_block_counts: Vec<usize>,
    pub singleton_fraction: f64,
    pub certificate: Certificate,
    pub dual: DualOutcome,
}

fn certify_cmd(a: CertifyArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.tol > 0.0) {
        return Err(Error::InvalidArgument("--tol must be positive".into()));
    }
    let data = model::load_dataset(&a.input)?;
    let w = match &a.w {
        Some(s) => load_truth(Some(s), &data)?.expect("present"),
        None if data.k == 1 => relax::pseudoinverse_recovery(&data)?,
        None => return Err(Error::InvalidArgument("pass --w when k > 1".into())),
    };
    let r = match &a.r {
        Some(s) => {
            let r = parse_vector(s)?;
            if r.len() != data.filter_len() {
                return Err(Error::DimensionMismatch {
                    what: "perturbation",
                    expected: data.filter_len(),
                    found: r.len(),
                });
            }
            r
        }
        None => relax::perturbation(a.seed, data.filter_len()),
    };
    let sets: ActiveSets = certify::active_sets(&data.x, data.d, data.k, &w)?;
    let certificate = certify::certify_perturbation(&data, &w, &r, a.tol)?;
    let dual = certify::dual_solve(&data, &r, a.tol.min(1e-8))?;
    let rep = CertifyReport {
        active_block_counts: sets.s.iter().map(Vec::len).collect(),
        singleton_fraction: certify::r1_singleton_fraction(&sets),
        w,
        r,
        certificate,
        dual,
    };
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&rep)?)?;
    } else {
        let c = &rep.certificate;
        writeln!(out, "active samples per block: {:?}", rep.active_block_counts)?;
        writeln!(out, "fraction of samples with one active block: {:.4}", rep.singleton_fraction)?;
        let verdict = match c.verdict {
            certify::ConeVerdict::Member => "-r lies in the active cone: the filter is the unique LP optimum",
            certify::ConeVerdict::NotMember => "-r lies outside the active cone: no certificate",
            certify::ConeVerdict::Indeterminate(_) => "cone check indeterminate",
        };
        writeln!(out, "verdict: {verdict}")?;
        if c.boundary_degenerate {
            writeln!(out, "warning: phase-1 value is within a factor of 10 of the tolerance")?;
        }
        writeln!(out, "equality residual: {:.3e}", c.equality_residual)?;
        writeln!(out, "min coefficient: {:.3e}", c.min_coefficient)?;
        writeln!(out, "phase-1 value: {:.3e}", c.elastic)?;
        let d = &rep.dual;
        writeln!(out, "dual status: {:?}, objective {:.10e}", d.status, d.objective)?;
        writeln!(out, "primal status: {:?}, objective {:.10e}", d.primal_status, d.primal_objective)?;
        match d.gap {
            Some(g) => writeln!(out, "duality gap: {g:.3e}")?,
            None => writeln!(out, "duality gap: n/a")?,
        }
        if let Some(s) = &d.slackness {
            writeln!(
                out,
                "complementary slackness: violation {:.3e}, inactive multipliers {:.3e}",
                s.max_violation, s.inactive_multiplier
            )?;
        }
    }
    Ok(EXIT_OK)
}

fn effective_grid(a: &SweepArgs) -> Result<GridSpec> {
    let mut spec = match &a.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => GridSpec::default_for(a.k.unwrap_or(1)),
    };
    if let Some(k) = a.k {
        spec.k = k;
    }
    if let Some(v) = &a.n_values {
        spec.n_values = v.clone();
    }
    if let Some(v) = &a.d_values {
        spec.d_values = v.clone();
    }
    if let Some(v) = a.trials {
        spec.trials = v;
    }
    if let Some(v) = &a.methods {
        spec.methods = v.clone();
    }
    if let Some(v) = a.tau {
        spec.tau = v;
    }
    if let Some(v) = a.seed {
        spec.master_seed = v;
    }
    if let Some(v) = a.amplification {
        spec.amplification = v;
    }
    Ok(spec)
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        Some(0) => Err(Error::InvalidArgument("--workers must be positive".into())),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(f),
        _ => f(),
    }
}

fn sweep_cmd(a: SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = effective_grid(&a)?;
    let cells = match &a.fixture {
        Some(path) => {
            let data = model::load_dataset(path)?;
            let truth = load_truth(a.truth.as_deref(), &data)?
                .ok_or_else(|| Error::InvalidArgument("--fixture needs --truth".into()))?;
            if !(spec.tau > 0.0) {
                return Err(Error::InvalidArgument("tau must be positive".into()));
            }
            with_workers(a.workers, || sweep::run_fixture(&data, &truth, &spec))?
        }
        None => {
            spec.validate()?;
            with_workers(a.workers, || sweep::run_grid(&spec))?
        }
    };
    emit(out, a.out.as_deref(), &sweep::to_csv(&cells))?;
    if let Some(p) = &a.spec_out {
        std::fs::write(p, spec.to_json()?)?;
    }
    if a.heatmap {
        for &m in &spec.methods {
            eprintln!("{}", sweep::ascii_heatmap(&cells, m));
        }
    }
    Ok(EXIT_OK)
}

fn effective_experiment(a: &MnistArgs) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &a.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.angle_lo {
        cfg.angle_range.0 = v;
    }
    if let Some(v) = a.angle_hi {
        cfg.angle_range.1 = v;
    }
    if let Some(v) = a.n_train {
        cfg.n_train = v;
    }
    if let Some(v) = a.n_test {
        cfg.n_test = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = &a.lambdas {
        cfg.lambdas = v.clone();
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if cfg.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("every lambda must be positive".into()));
    }
    if cfg.trials == 0 || cfg.n_train < 2 || cfg.n_test == 0 {
        return Err(Error::InvalidArgument("trials, n_train (≥ 2) and n_test must be positive".into()));
    }
    Ok(cfg)
}

fn mnist(a: MnistArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = effective_experiment(&a)?;
    let result = match a.synthetic {
        Some(pool) => {
            let train = mnistreg::synthetic_digits(pool, crate::rng::mix(&[cfg.seed, 11]));
            let test = mnistreg::synthetic_digits(pool, crate::rng::mix(&[cfg.seed, 12]));
            mnistreg::run_experiment(&train, &test, &cfg)?
        }
        None => {
            let dir = match &a.dir {
                Some(d) => d.clone(),
                None => std::env::var_os(mnistreg::DATA_DIR_ENV).map(PathBuf::from).ok_or_else(|| {
                    Error::InvalidArgument(format!("pass --dir or set {}", mnistreg::DATA_DIR_ENV))
                })?,
            };
            let files = mnistreg::load_dir(&dir)?;
            mnistreg::run_experiment(&files.train_images, &files.test_images, &cfg)?
        }
    };
    if a.json {
        emit(out, a.out.as_deref(), &(serde_json::to_string_pretty(&result)? + "\n"))?;
    } else {
        emit(out, a.out.as_deref(), &result.to_csv())?;
    }
    Ok(EXIT_OK)
}
