//! Phase-transition experiment over a grid of sample counts and dimensions.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::{self, GdConfig, GdStatus};
use crate::error::{check_len, Error, Result};
use crate::model::{sample_planted, Dataset};
use crate::relax::{self, RelaxConfig};
use crate::rng::mix;

pub const CSV_HEADER: &str = "method,k,n,d,trials,min_err,mean_err,success_rate";
const GLYPHS: [char; 10] = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Relaxation,
    GradientDescent,
}

impl Method {
    fn code(self) -> u64 {
        match self {
            Method::Relaxation => 1,
            Method::GradientDescent => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Relaxation => "relaxation",
            Method::GradientDescent => "gd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relaxation" | "relax" => Ok(Method::Relaxation),
            "gd" | "gradient_descent" => Ok(Method::GradientDescent),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_values: Vec<usize>,
    pub d_values: Vec<usize>,
    pub k: usize,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub tau: f64,
    pub master_seed: u64,
    /// Perturbations per relaxation trial (1 = a single fit, >1 = amplified).
    #[serde(default = "one")]
    pub amplification: usize,
}

fn one() -> usize {
    1
}

impl GridSpec {
    /// Desk-scale version of the published grid: `n ∈ {25, 50, …, 400}`,
    /// `d ∈ {5, 10, …, 80}` restricted to multiples of `k`.
    pub fn default_for(k: usize) -> Self {
        Self {
            n_values: (1..=16).map(|i| 25 * i).collect(),
            d_values: (1..=16).map(|i| 5 * i).filter(|d| k > 0 && d % k == 0).collect(),
            k,
            trials: 100,
            methods: vec![Method::Relaxation, Method::GradientDescent],
            tau: relax::DEFAULT_TAU,
            master_seed: 0,
            amplification: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_values.is_empty() || self.d_values.is_empty() {
            return bad("grid axes must be non-empty");
        }
        if self.k == 0 {
            return bad("k must be positive");
        }
        for axis in [&self.n_values, &self.d_values] {
            if axis.iter().any(|&v| v == 0) || axis.windows(2).any(|w| w[0] >= w[1]) {
                return bad("grid axes must be strictly ascending positive integers");
            }
        }
        if let Some(d) = self.d_values.iter().find(|&&d| d % self.k != 0) {
            return Err(Error::InvalidArgument(format!("d = {d} is not divisible by k = {}", self.k)));
        }
        if self.trials == 0 || self.amplification == 0 {
            return bad("trials and amplification must be positive");
        }
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub method: Method,
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    /// NaN when every trial failed.
    pub min_err: f64,
    pub mean_err: f64,
    pub success_rate: f64,
    /// Trials whose solver failed; not in the CSV.
    #[serde(default)]
    pub failures: usize,
}

/// Seed of one trial; depends only on its own coordinates.
pub fn trial_seed(master: u64, method: Method, n: usize, d: usize, trial: usize) -> u64 {
    mix(&[master, method.code(), n as u64, d as u64, trial as u64])
}

/// Outcome of one trial: `None` if the method failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub error: Option<f64>,
    pub success: bool,
}

pub fn run_trial(spec: &GridSpec, method: Method, n: usize, d: usize, trial: usize) -> Result<TrialOutcome> {
    let seed = trial_seed(spec.master_seed, method, n, d, trial);
    let (model, data) = sample_planted(n, d, spec.k, seed)?;
    fit_and_assess(&data, &model.w_star, method, seed, spec.tau, spec.amplification)
}

/// One trial of `method` on a fixed dataset with known truth.
pub fn fit_and_assess(
    data: &Dataset,
    w_star: &[f64],
    method: Method,
    seed: u64,
    tau: f64,
    amplification: usize,
) -> Result<TrialOutcome> {
    let cfg = RelaxConfig {
        tau,
        ..RelaxConfig::default()
    };
    let w_hat = match method {
        Method::Relaxation if amplification == 1 => {
            let fit = relax::fit_seeded(data, seed, &cfg)?;
            fit.is_optimal().then_some(fit.w_hat)
        }
        Method::Relaxation => match relax::fit_amplified(data, amplification, seed, &cfg, None) {
            Ok(out) => Some(out.best.w_hat),
            Err(Error::AllTrialsFailed(_)) => None,
            Err(e) => return Err(e),
        },
        Method::GradientDescent => {
            let gd = baseline::gd_fit(data, &GdConfig { seed, ..GdConfig::default() })?;
            (gd.status != GdStatus::Diverged).then_some(gd.w_hat)
        }
    };
    Ok(match w_hat {
        Some(w) => {
            let a = relax::assess(&w, w_star, tau)?;
            TrialOutcome {
                error: Some(a.l2_error),
                success: a.success,
            }
        }
        None => TrialOutcome {
            error: None,
            success: false,
        },
    })
}

/// Repeats each method `spec.trials` times on one fixed dataset; only the
/// seeds change between trials. The grid axes of `spec` are ignored.
pub fn run_fixture(data: &Dataset, w_star: &[f64], spec: &GridSpec) -> Result<Vec<PhaseCell>> {
    check_len("truth", data.filter_len(), w_star.len())?;
    if spec.trials == 0 || spec.amplification == 0 || spec.methods.is_empty() {
        return Err(Error::InvalidArgument("fixture sweeps need trials, amplification and a method".into()));
    }
    let items: Vec<(Method, usize, usize, usize)> = spec
        .methods
        .iter()
        .flat_map(|&m| (0..spec.trials).map(move |t| (m, data.n, data.d, t)))
        .collect();
    let outcomes = map_items(&items, |&(m, n, d, t)| {
        let seed = trial_seed(spec.master_seed, m, n, d, t);
        fit_and_assess(data, w_star, m, seed, spec.tau, spec.amplification)
    })?;
    Ok(items
        .chunks(spec.trials)
        .zip(outcomes.chunks(spec.trials))
        .map(|(cell, outs)| aggregate(cell[0].0, data.k, data.n, data.d, outs))
        .collect())
}

#[cfg(feature = "parallel")]
fn map_items<F>(items: &[(Method, usize, usize, usize)], f: F) -> Result<Vec<TrialOutcome>>
where
    F: Fn(&(Method, usize, usize, usize)) -> Result<TrialOutcome> + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_items<F>(items: &[(Method, usize, usize, usize)], f: F) -> Result<Vec<TrialOutcome>>
where
    F: Fn(&(Method, usize, usize, usize)) -> Result<TrialOutcome>,
{
    items.iter().map(f).collect()
}

/// Runs every trial of every cell. Cells come out ordered by method, then
/// `n`, then `d`; results do not depend on the execution schedule.
pub fn run_grid(spec: &GridSpec) -> Result<Vec<PhaseCell>> {
    spec.validate()?;
    let mut items = Vec::new();
    for &m in &spec.methods {
        for &n in &spec.n_values {
            for &d in &spec.d_values {
                for t in 0..spec.trials {
                    items.push((m, n, d, t));
                }
            }
        }
    }
    let outcomes = map_items(&items, |&(m, n, d, t)| run_trial(spec, m, n, d, t))?;
    Ok(items
        .chunks(spec.trials)
        .zip(outcomes.chunks(spec.trials))
        .map(|(cell, outs)| {
            let (m, n, d, _) = cell[0];
            aggregate(m, spec.k, n, d, outs)
        })
        .collect())
}

pub fn aggregate(method: Method, k: usize, n: usize, d: usize, outs: &[TrialOutcome]) -> PhaseCell {
    let errs: Vec<f64> = outs.iter().filter_map(|o| o.error).collect();
    let (min_err, mean_err) = if errs.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            errs.iter().copied().fold(f64::INFINITY, f64::min),
            errs.iter().sum::<f64>() / errs.len() as f64,
        )
    };
    PhaseCell {
        method,
        k,
        n,
        d,
        trials: outs.len(),
        min_err,
        mean_err,
        success_rate: outs.iter().filter(|o| o.success).count() as f64 / outs.len().max(1) as f64,
        failures: outs.len() - errs.len(),
    }
}

fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn to_csv(cells: &[PhaseCell]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.method,
            c.k,
            c.n,
            c.d,
            c.trials,
            fmt17(c.min_err),
            fmt17(c.mean_err),
            fmt17(c.success_rate)
        ));
    }
    out
}

pub fn write_csv(cells: &[PhaseCell], path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(cells))?;
    Ok(())
}

/// Parses [`to_csv`] output. The failure count is not stored and comes back
/// as zero.
pub fn parse_csv(text: &str) -> Result<Vec<PhaseCell>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Schema {
                line: 1,
                message: format!("expected header '{CSV_HEADER}'"),
            })
        }
    }
    let mut cells = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| Error::Schema { line: idx + 1, message };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(schema(format!("expected 8 fields, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| schema(format!("bad integer '{s}'")));
        let real = |s: &str| s.parse::<f64>().map_err(|_| schema(format!("bad number '{s}'")));
        cells.push(PhaseCell {
            method: f[0].parse().map_err(|_| schema(format!("unknown method '{}'", f[0])))?,
            k: int(f[1])?,
            n: int(f[2])?,
            d: int(f[3])?,
            trials: int(f[4])?,
            min_err: real(f[5])?,
            mean_err: real(f[6])?,
            success_rate: real(f[7])?,
            failures: 0,
        });
    }
    Ok(cells)
}

/// For each `d`, the smallest `n` whose success rate reaches `threshold`.
pub fn estimate_boundary(cells: &[PhaseCell], method: Method, threshold: f64) -> BTreeMap<usize, Option<usize>> {
    let mut out: BTreeMap<usize, Option<usize>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.method == method) {
        let entry = out.entry(c.d).or_insert(None);
        if c.success_rate >= threshold && entry.is_none_or(|n| c.n < n) {
            *entry = Some(c.n);
        }
    }
    out
}

/// Success rates as a text grid: rows are `n` (largest first), columns `d`,
/// ten glyph levels from blank (0) to `@` (≥ 0.9).
pub fn ascii_heatmap(cells: &[PhaseCell], method: Method) -> String {
    let mut ns: Vec<usize> = cells.iter().filter(|c| c.method == method).map(|c| c.n).collect();
    let mut ds: Vec<usize> = cells.iter().filter(|c| c.method == method).map(|c| c.d).collect();
    ns.sort_unstable();
    ns.dedup();
    ds.sort_unstable();
    ds.dedup();
    let lookup: BTreeMap<(usize, usize), f64> = cells
        .iter()
        .filter(|c| c.method == method)
        .map(|c| ((c.n, c.d), c.success_rate))
        .collect();
    let mut out = format!("{method}: rows n (desc), columns d = {ds:?}\n");
    for &n in ns.iter().rev() {
        out.push_str(&format!("{n:>6} |"));
        for &d in &ds {
            let ch = match lookup.get(&(n, d)) {
                Some(&r) => GLYPHS[((r * 10.0).floor().max(0.0) as usize).min(9)],
                None => '?',
            };
            out.push(ch);
        }
        out.push_str("|\n");
    }
    out
}
