//! Experiment harness: bias/variance sweeps over a γ grid, iterative solver
//! convergence traces and covariance-accuracy checks, all emitted as CSV.
//!
//! Every random draw is seeded from the config seed through
//! [`derive_seed`], so a config file fully determines its output bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::data::{
    parse_libsvm, rff_expand, synthetic_regression, uniform_regression, SyntheticSpec, UniformSpec,
};
use crate::error::{Error, Result};
use crate::linalg::sym_spectral_norm;
use crate::par::Exec;
use crate::random_sketch::{derive_seed, RandomKind, RandomSketch, DEFAULT_SJLT_SPARSITY, RNG_NAME};
use crate::ridge::{
    ifdrr_trace, iterative_randomized_trace, solve_exact, InverseOperator, IterativeTrace, RidgeProblem,
};
use crate::sketch::{SketchMode, StreamingSketch, TailSpectrum};
use crate::stats::{
    median, smallest_feasible_budget, DataSpectrum, DiagnosticsReport, LinearModelSpec, RandomizedSpectrum,
};

pub const SEED_ENV: &str = "FDRIDGE_SEED";

pub const SWEEP_HEADER: &str = "method,gamma,bias_sq,var_trace,mse,rel_bias,rel_var,rel_mse,flag";
pub const SWEEP_RAW_HEADER: &str = "method,gamma,trial,bias_sq,var_trace,mse,rel_bias,rel_var,rel_mse";
pub const ITERATE_HEADER: &str = "method,gamma,iteration,log10_error,flag";
pub const SKETCH_ACC_HEADER: &str = "method,m,k,spectral_error,bound,ratio,within_bound";

/// Salts that keep the seed streams of different experiment families apart.
const SALT_SWEEP: u64 = 1;
const SALT_ITERATE: u64 = 2;
const SALT_ACCURACY: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(try_from = "String")]
pub enum Method {
    Exact,
    Fdrr(SketchMode),
    Classical(RandomKind),
    Hessian(RandomKind),
    Ifdrr(SketchMode),
    Ihs(RandomKind),
    Single(RandomKind),
}

impl Method {
    /// Methods with a closed-form bias/variance (usable in a sweep).
    pub fn is_statistical(self) -> bool {
        matches!(
            self,
            Method::Exact | Method::Fdrr(_) | Method::Classical(_) | Method::Hessian(_)
        )
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, Method::Ifdrr(_) | Method::Ihs(_) | Method::Single(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = |m: &SketchMode| match m {
            SketchMode::Fd => "fd",
            SketchMode::Rfd => "rfd",
        };
        match self {
            Method::Exact => write!(f, "exact"),
            Method::Fdrr(SketchMode::Fd) => write!(f, "fdrr"),
            Method::Fdrr(SketchMode::Rfd) => write!(f, "rfdrr"),
            Method::Classical(k) => write!(f, "classical:{k}"),
            Method::Hessian(k) => write!(f, "hessian:{k}"),
            Method::Ifdrr(m) => write!(f, "ifdrr:{}", mode(m)),
            Method::Ihs(k) => write!(f, "ihs:{k}"),
            Method::Single(k) => write!(f, "single:{k}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ConfigInvalid(format!("unknown method `{s}`"));
        Ok(match s {
            "exact" => Method::Exact,
            "fdrr" => Method::Fdrr(SketchMode::Fd),
            "rfdrr" => Method::Fdrr(SketchMode::Rfd),
            _ => {
                let (family, arg) = s.split_once(':').ok_or_else(bad)?;
                match family {
                    "classical" => Method::Classical(arg.parse().map_err(|_| bad())?),
                    "hessian" => Method::Hessian(arg.parse().map_err(|_| bad())?),
                    "ihs" => Method::Ihs(arg.parse().map_err(|_| bad())?),
                    "single" => Method::Single(arg.parse().map_err(|_| bad())?),
                    "ifdrr" => Method::Ifdrr(arg.parse().map_err(|_| bad())?),
                    _ => return Err(bad()),
                }
            }
        })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

fn kind_id(kind: RandomKind) -> u64 {
    match kind {
        RandomKind::Gaussian => 0,
        RandomKind::Sjlt => 1,
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RffConfig {
    pub features: usize,
    #[serde(default = "default_gamma_rbf")]
    pub gamma_rbf: f64,
}

fn default_gamma_rbf() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceConfig {
    Synthetic {
        n: usize,
        d: usize,
        r: f64,
        noise_sd: f64,
    },
    Libsvm {
        path: PathBuf,
        n_features: Option<usize>,
        rff: Option<RffConfig>,
    },
    Uniform {
        n: usize,
        d0: usize,
        noise_sd: f64,
        rff: Option<RffConfig>,
    },
}

/// Declarative experiment description, read from TOML.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub instance: InstanceConfig,
    #[serde(default)]
    pub seed: u64,
    pub m: usize,
    #[serde(default)]
    pub gammas: Vec<f64>,
    /// Inclusive `[lo, hi]`: `γ ∈ {2^lo, …, 2^hi}`.
    pub gamma_log2_range: Option<[i32; 2]>,
    #[serde(default)]
    pub thetas: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_sjlt_s")]
    pub sjlt_s: usize,
    pub out: Option<PathBuf>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Sketch sizes for `sketch-acc`; defaults to `[m]`.
    #[serde(default)]
    pub ms: Vec<usize>,
    /// Ranks for `sketch-acc`; defaults to every `k < m`.
    #[serde(default)]
    pub ks: Vec<usize>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Exact]
}

fn default_trials() -> usize {
    1
}

fn default_sjlt_s() -> usize {
    DEFAULT_SJLT_SPARSITY
}

fn default_iterations() -> usize {
    10
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file; a relative libsvm path is resolved against the
    /// config's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if let InstanceConfig::Libsvm { path: data, .. } = &mut cfg.instance {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    /// Seed from `FDRIDGE_SEED`, if set, replaces the file's.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::ConfigInvalid(format!("{SEED_ENV} = `{v}` is not a u64")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::ConfigInvalid(s));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.sjlt_s == 0 {
            return bad("sjlt_s must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if let Some([lo, hi]) = self.gamma_log2_range {
            if lo > hi {
                return bad(format!("gamma_log2_range [{lo}, {hi}] is empty"));
            }
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return bad(format!("gamma values must be positive, got {g}"));
        }
        if let Some(t) = self.thetas.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return bad(format!("theta values must lie in (0, 1), got {t}"));
        }
        if self.ms.contains(&0) {
            return bad("ms entries must be at least 1".into());
        }
        Ok(())
    }

    /// Explicit `gammas` followed by the log₂ range, sorted, deduplicated.
    /// Empty when neither is configured.
    pub fn gamma_grid(&self) -> Vec<f64> {
        let mut g = self.gammas.clone();
        if let Some([lo, hi]) = self.gamma_log2_range {
            g.extend((lo..=hi).map(|e| 2f64.powi(e)));
        }
        g.sort_by(|a, b| a.total_cmp(b));
        g.dedup();
        g
    }

    fn required_gamma_grid(&self) -> Result<Vec<f64>> {
        let g = self.gamma_grid();
        if g.is_empty() {
            return Err(Error::ConfigInvalid("one of gammas or gamma_log2_range is required".into()));
        }
        Ok(g)
    }
}

/// A dense instance; `x0`/`sigma` only for synthetic data.
#[derive(Clone, Debug)]
pub struct LoadedInstance {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub model: Option<LinearModelSpec>,
}

pub fn load_instance(cfg: &InstanceConfig, seed: u64) -> Result<LoadedInstance> {
    let expand = |x: DMatrix<f64>, rff: &Option<RffConfig>| match rff {
        Some(r) => rff_expand(&x, r.features, r.gamma_rbf, derive_seed(seed, 0xFF, 0, 0)),
        None => Ok(x),
    };
    match cfg {
        InstanceConfig::Synthetic { n, d, r, noise_sd } => {
            let inst = synthetic_regression(&SyntheticSpec {
                n: *n,
                d: *d,
                r: *r,
                noise_sd: *noise_sd,
                seed,
            })?;
            let model = if *noise_sd > 0.0 {
                Some(LinearModelSpec::new(inst.x0, *noise_sd)?)
            } else {
                None
            };
            Ok(LoadedInstance {
                a: inst.a,
                y: inst.y,
                model,
            })
        }
        InstanceConfig::Libsvm { path, n_features, rff } => {
            let file = fs::File::open(path)?;
            let (x, y) = parse_libsvm(std::io::BufReader::new(file), *n_features)?;
            Ok(LoadedInstance {
                a: expand(x.to_dense(), rff)?,
                y,
                model: None,
            })
        }
        InstanceConfig::Uniform { n, d0, noise_sd, rff } => {
            let (x, y) = uniform_regression(&UniformSpec {
                n: *n,
                d0: *d0,
                noise_sd: *noise_sd,
                seed,
            })?;
            Ok(LoadedInstance {
                a: expand(x, rff)?,
                y,
                model: None,
            })
        }
    }
}

/// `{:.16e}` (17 significant digits), `nan` for undefined values.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn comments(command: &str, cfg: &SweepConfig) -> Vec<String> {
    vec![
        format!("# fdridge {command}"),
        format!("# seed = {}", cfg.seed),
        format!("# rng = {RNG_NAME}"),
        format!("# m = {}, trials = {}, sjlt_s = {}", cfg.m, cfg.trials, cfg.sjlt_s),
    ]
}

fn render(comments: &[String], header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::new();
    for c in comments {
        s.push_str(c);
        s.push('\n');
    }
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub gamma: f64,
    pub report: DiagnosticsReport,
    pub rel: [f64; 3],
    pub flag: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRawRow {
    pub method: String,
    pub gamma: f64,
    pub trial: usize,
    pub report: DiagnosticsReport,
    pub rel: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub comments: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub raw: Vec<SweepRawRow>,
}

impl SweepOutput {
    /// Row for `(method, gamma)`.
    pub fn get(&self, method: &str, gamma: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.method == method && r.gamma == gamma)
    }

    pub fn to_csv(&self) -> String {
        render(
            &self.comments,
            SWEEP_HEADER,
            self.rows.iter().map(|r| {
                let [b, v, m] = r.report.as_array();
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    r.method,
                    fmt_num(r.gamma),
                    fmt_num(b),
                    fmt_num(v),
                    fmt_num(m),
                    fmt_num(r.rel[0]),
                    fmt_num(r.rel[1]),
                    fmt_num(r.rel[2]),
                    r.flag
                )
            }),
        )
    }

    pub fn raw_csv(&self) -> String {
        render(
            &self.comments,
            SWEEP_RAW_HEADER,
            self.raw.iter().map(|r| {
                let [b, v, m] = r.report.as_array();
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    r.method,
                    fmt_num(r.gamma),
                    r.trial,
                    fmt_num(b),
                    fmt_num(v),
                    fmt_num(m),
                    fmt_num(r.rel[0]),
                    fmt_num(r.rel[1]),
                    fmt_num(r.rel[2]),
                )
            }),
        )
    }
}

fn rel_array(report: &DiagnosticsReport, optimal: &DiagnosticsReport) -> [f64; 3] {
    report.relative_errors(optimal).as_array().map(|v| v.unwrap_or(f64::NAN))
}

fn sort_key_cmp(a: (&str, f64, usize), b: (&str, f64, usize)) -> std::cmp::Ordering {
    a.0.cmp(b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Bias², variance trace and MSE of each statistical method across the γ
/// grid, relative to the optimal ridge weights. Randomized methods report
/// the per-column median over `trials` sketches; Classical and Hessian
/// sketches share the same draw in each trial.
pub fn run_bias_variance_sweep(cfg: &SweepConfig, exec: Exec) -> Result<SweepOutput> {
    cfg.validate()?;
    if let Some(m) = cfg.methods.iter().find(|m| !m.is_statistical()) {
        return Err(Error::ConfigInvalid(format!(
            "method `{m}` has no closed-form bias/variance; use the iterate command"
        )));
    }
    let inst = load_instance(&cfg.instance, cfg.seed)?;
    let model = inst
        .model
        .ok_or_else(|| Error::ConfigInvalid("bias/variance sweeps need a synthetic instance with noise_sd > 0".into()))?;
    let a = &inst.a;
    let (n, d) = a.shape();
    let gammas = cfg.required_gamma_grid()?;
    let spectrum = DataSpectrum::new(a).with_exec(exec);

    let optimal: Vec<DiagnosticsReport> = gammas
        .iter()
        .map(|&g| spectrum.optimal(&model, g))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut raw = Vec::new();
    let push_det = |rows: &mut Vec<SweepRow>, name: String, reports: Vec<Option<DiagnosticsReport>>, flag: &str| {
        for ((&g, opt), rep) in gammas.iter().zip(&optimal).zip(reports) {
            let (report, rel, flag) = match rep {
                Some(r) => (r, rel_array(&r, opt), "ok".to_string()),
                None => (
                    DiagnosticsReport::new(f64::NAN, f64::NAN),
                    [f64::NAN; 3],
                    flag.to_string(),
                ),
            };
            rows.push(SweepRow {
                method: name.clone(),
                gamma: g,
                report,
                rel,
                flag,
            });
        }
    };

    let modes: Vec<SketchMode> = cfg
        .methods
        .iter()
        .filter_map(|m| match m {
            Method::Fdrr(mode) => Some(*mode),
            _ => None,
        })
        .collect();

    if cfg.methods.contains(&Method::Exact) {
        push_det(&mut rows, Method::Exact.to_string(), optimal.iter().copied().map(Some).collect(), "ok");
    }

    if !modes.is_empty() {
        let sketch = StreamingSketch::from_rows(a, cfg.m)?;
        for &mode in &modes {
            let out = sketch.finalize(mode);
            let reports = exec
                .map(&gammas, |&g| spectrum.sketched(&out, &model, g))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            push_det(&mut rows, Method::Fdrr(mode).to_string(), reports.into_iter().map(Some).collect(), "ok");
        }

        if !cfg.thetas.is_empty() {
            let tail = TailSpectrum::new(a);
            let cells: Vec<(f64, f64)> = cfg
                .thetas
                .iter()
                .flat_map(|&t| gammas.iter().map(move |&g| (t, g)))
                .collect();
            // The budget comes from the FD formula for both modes; RFD then
            // enjoys the sharper θ′ at the same m.
            let sketches = exec
                .map(&cells, |&(theta, g)| -> Result<Option<StreamingSketch>> {
                    match smallest_feasible_budget(theta, &tail, g, SketchMode::Fd, d)? {
                        Some(b) => Ok(Some(StreamingSketch::from_rows(a, b.m)?)),
                        None => Ok(None),
                    }
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            for &mode in &modes {
                for (ti, &theta) in cfg.thetas.iter().enumerate() {
                    let reports = gammas
                        .iter()
                        .enumerate()
                        .map(|(gi, &g)| match &sketches[ti * gammas.len() + gi] {
                            Some(sk) => spectrum.sketched(&sk.finalize(mode), &model, g).map(Some),
                            None => Ok(None),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    push_det(
                        &mut rows,
                        format!("{}[theta={theta}]", Method::Fdrr(mode)),
                        reports,
                        "infeasible",
                    );
                }
            }
        }
    }

    let kinds: Vec<RandomKind> = [RandomKind::Gaussian, RandomKind::Sjlt]
        .into_iter()
        .filter(|&k| {
            cfg.methods.contains(&Method::Classical(k)) || cfg.methods.contains(&Method::Hessian(k))
        })
        .collect();
    let gram = spectrum.gram();
    let cells: Vec<(RandomKind, usize)> = kinds
        .iter()
        .flat_map(|&k| (0..cfg.trials).map(move |t| (k, t)))
        .collect();
    let per_cell = exec
        .map(&cells, |&(kind, trial)| -> Result<Vec<(Method, Vec<DiagnosticsReport>)>> {
            let seed = derive_seed(cfg.seed, SALT_SWEEP, kind_id(kind), trial as u64);
            let s = RandomSketch::new(kind, cfg.m, n, cfg.sjlt_s, seed)?.realize();
            let mut out = Vec::new();
            if cfg.methods.contains(&Method::Classical(kind)) {
                let spec = RandomizedSpectrum::classical(&s, a, &model.x0)?;
                let reps = gammas.iter().map(|&g| spec.report(&model, g)).collect::<Result<_>>()?;
                out.push((Method::Classical(kind), reps));
            }
            if cfg.methods.contains(&Method::Hessian(kind)) {
                let spec = RandomizedSpectrum::hessian(&(&s * a), gram, &model.x0)?;
                let reps = gammas.iter().map(|&g| spec.report(&model, g)).collect::<Result<_>>()?;
                out.push((Method::Hessian(kind), reps));
            }
            Ok(out)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut by_method: BTreeMap<Method, Vec<Vec<DiagnosticsReport>>> = BTreeMap::new();
    for (cell, results) in cells.iter().zip(per_cell) {
        for (method, reps) in results {
            let trials = by_method.entry(method).or_default();
            debug_assert_eq!(trials.len(), cell.1);
            trials.push(reps);
        }
    }
    for (method, trials) in &by_method {
        let name = method.to_string();
        for (gi, (&g, opt)) in gammas.iter().zip(&optimal).enumerate() {
            let per_trial: Vec<(DiagnosticsReport, [f64; 3])> = trials
                .iter()
                .map(|reps| (reps[gi], rel_array(&reps[gi], opt)))
                .collect();
            for (trial, (report, rel)) in per_trial.iter().enumerate() {
                raw.push(SweepRawRow {
                    method: name.clone(),
                    gamma: g,
                    trial,
                    report: *report,
                    rel: *rel,
                });
            }
            let col = |f: &dyn Fn(&(DiagnosticsReport, [f64; 3])) -> f64| median(per_trial.iter().map(f).collect());
            rows.push(SweepRow {
                method: name.clone(),
                gamma: g,
                report: DiagnosticsReport {
                    bias_sq: col(&|r| r.0.bias_sq),
                    var_trace: col(&|r| r.0.var_trace),
                    mse: col(&|r| r.0.mse),
                },
                rel: [col(&|r| r.1[0]), col(&|r| r.1[1]), col(&|r| r.1[2])],
                flag: "ok".into(),
            });
        }
    }

    rows.sort_by(|x, y| sort_key_cmp((&x.method, x.gamma, 0), (&y.method, y.gamma, 0)));
    raw.sort_by(|x, y| sort_key_cmp((&x.method, x.gamma, x.trial), (&y.method, y.gamma, y.trial)));
    Ok(SweepOutput {
        comments: comments("sweep", cfg),
        rows,
        raw,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterateRow {
    pub method: String,
    pub gamma: f64,
    pub iteration: usize,
    /// `log₁₀(‖x⁽ⁱ⁾ − x*‖/‖x*‖)`; NaN once diverged.
    pub log10_error: f64,
    pub flag: String,
}

#[derive(Clone, Debug)]
pub struct IterateOutput {
    pub comments: Vec<String>,
    pub rows: Vec<IterateRow>,
}

impl IterateOutput {
    /// `log10_error` for iterations `1..=t` of `(method, gamma)`.
    pub fn series(&self, method: &str, gamma: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.gamma == gamma)
            .map(|r| r.log10_error)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        render(
            &self.comments,
            ITERATE_HEADER,
            self.rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{}",
                    r.method,
                    fmt_num(r.gamma),
                    r.iteration,
                    fmt_num(r.log10_error),
                    r.flag
                )
            }),
        )
    }
}

/// Relative errors for iterations `1..=t`, `+∞` after divergence.
fn trace_errors(trace: &IterativeTrace, x_star: &DVector<f64>, t: usize) -> Vec<f64> {
    let mut e = trace.relative_errors(x_star);
    e.remove(0);
    e.resize(t, f64::INFINITY);
    e
}

/// Error of each iterative method against the exact ridge solution, for
/// iterations `1..=t`. Randomized methods report the median over trials,
/// counting a diverged trial as infinite error; the row is flagged
/// `diverged` as soon as any trial has diverged.
pub fn run_iterative_experiment(cfg: &SweepConfig, t: usize, exec: Exec) -> Result<IterateOutput> {
    cfg.validate()?;
    if t == 0 {
        return Err(Error::ConfigInvalid("iteration count must be at least 1".into()));
    }
    if let Some(m) = cfg.methods.iter().find(|m| !m.is_iterative()) {
        return Err(Error::ConfigInvalid(format!(
            "method `{m}` is not iterative; use the sweep command"
        )));
    }
    let inst = load_instance(&cfg.instance, cfg.seed)?;
    let (a, y) = (&inst.a, &inst.y);
    let n = a.nrows();
    let gammas = cfg.required_gamma_grid()?;

    let x_stars: Vec<DVector<f64>> = exec
        .map(&gammas, |&g| RidgeProblem::new(a, y, g).map(|p| solve_exact(&p)))
        .into_iter()
        .collect::<Result<_>>()?;

    let modes: Vec<SketchMode> = cfg
        .methods
        .iter()
        .filter_map(|m| match m {
            Method::Ifdrr(mode) => Some(*mode),
            _ => None,
        })
        .collect();
    let sketch = if modes.is_empty() {
        None
    } else {
        Some(StreamingSketch::from_rows(a, cfg.m)?)
    };

    // (method, gamma index, trial)
    let mut cells: Vec<(Method, usize, usize)> = Vec::new();
    for &method in &cfg.methods {
        let trials = if matches!(method, Method::Ifdrr(_)) { 1 } else { cfg.trials };
        for gi in 0..gammas.len() {
            for trial in 0..trials {
                cells.push((method, gi, trial));
            }
        }
    }
    cells.sort();
    cells.dedup();

    let errors = exec
        .map(&cells, |&(method, gi, trial)| -> Result<Vec<f64>> {
            let gamma = gammas[gi];
            let problem = RidgeProblem::new(a, y, gamma)?;
            let trace = match method {
                Method::Ifdrr(mode) => {
                    let out = sketch.as_ref().expect("sketch built for ifdrr").finalize(mode);
                    ifdrr_trace(&problem, &InverseOperator::for_sketch(&out, gamma)?, t)?
                }
                Method::Ihs(kind) | Method::Single(kind) => {
                    let refresh = matches!(method, Method::Ihs(_));
                    let salt = if refresh { 0 } else { 1 };
                    let factory = |draw: usize| {
                        let seed = derive_seed(
                            cfg.seed,
                            (SALT_ITERATE << 8) | (kind_id(kind) * 2 + salt),
                            trial as u64,
                            draw as u64,
                        );
                        RandomSketch::new(kind, cfg.m, n, cfg.sjlt_s, seed)?.apply(a)
                    };
                    iterative_randomized_trace(&problem, factory, t, refresh)?
                }
                _ => unreachable!("non-iterative methods rejected above"),
            };
            Ok(trace_errors(&trace, &x_stars[gi], t))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut grouped: BTreeMap<(String, usize), Vec<Vec<f64>>> = BTreeMap::new();
    for (&(method, gi, _), e) in cells.iter().zip(errors) {
        grouped.entry((method.to_string(), gi)).or_default().push(e);
    }
    let mut rows = Vec::new();
    for ((name, gi), trials) in grouped {
        for it in 0..t {
            let vals: Vec<f64> = trials.iter().map(|e| e[it]).collect();
            let diverged = vals.iter().any(|v| v.is_infinite() && *v > 0.0);
            let med = median(vals);
            rows.push(IterateRow {
                method: name.clone(),
                gamma: gammas[gi],
                iteration: it + 1,
                log10_error: if med.is_finite() { med.log10() } else { f64::NAN },
                flag: if diverged { "diverged" } else { "ok" }.into(),
            });
        }
    }
    rows.sort_by(|x, y| sort_key_cmp((&x.method, x.gamma, x.iteration), (&y.method, y.gamma, y.iteration)));
    Ok(IterateOutput {
        comments: comments("iterate", cfg),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRow {
    pub method: String,
    pub m: usize,
    pub k: usize,
    pub spectral_error: f64,
    pub bound: f64,
    pub ratio: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug)]
pub struct AccuracyOutput {
    pub comments: Vec<String>,
    pub rows: Vec<AccuracyRow>,
}

impl AccuracyOutput {
    pub fn to_csv(&self) -> String {
        render(
            &self.comments,
            SKETCH_ACC_HEADER,
            self.rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{},{},{}",
                    r.method,
                    r.m,
                    r.k,
                    fmt_num(r.spectral_error),
                    fmt_num(r.bound),
                    fmt_num(r.ratio),
                    r.within_bound
                )
            }),
        )
    }
}

/// `‖AᵀA − (BᵀB + δI)‖₂` for FD and RFD against the bound `α′Δ_k`, and
/// `‖AᵀA − AᵀSᵀSA‖₂` (median over `trials`) for the random sketches, which
/// are compared against the FD bound.
pub fn run_sketch_accuracy(cfg: &SweepConfig, exec: Exec) -> Result<AccuracyOutput> {
    cfg.validate()?;
    let inst = load_instance(&cfg.instance, cfg.seed)?;
    let a = &inst.a;
    let n = a.nrows();
    let gram = a.tr_mul(a);
    let tail = TailSpectrum::new(a);
    let ms = if cfg.ms.is_empty() { vec![cfg.m] } else { cfg.ms.clone() };

    let mut rows = Vec::new();
    for &m in &ms {
        let ks: Vec<usize> = if cfg.ks.is_empty() {
            (0..m.min(tail.rank_limit() + 1)).collect()
        } else {
            cfg.ks.iter().copied().filter(|&k| k < m && k <= tail.rank_limit()).collect()
        };
        let sketch = StreamingSketch::from_rows(a, m)?;
        let mut errors: Vec<(String, f64, f64)> = Vec::new();
        for mode in [SketchMode::Fd, SketchMode::Rfd] {
            let out = sketch.finalize(mode);
            let diff = &gram - out.covariance();
            errors.push((mode.to_string().to_lowercase(), sym_spectral_norm(&diff), mode.bound_factor()));
        }
        for kind in [RandomKind::Gaussian, RandomKind::Sjlt] {
            let per_trial = exec
                .map_range(cfg.trials, |trial| -> Result<f64> {
                    let seed = derive_seed(cfg.seed, SALT_ACCURACY, kind_id(kind), (m * cfg.trials + trial) as u64);
                    let sa = RandomSketch::new(kind, m, n, cfg.sjlt_s, seed)?.apply(a)?;
                    Ok(sym_spectral_norm(&(&gram - sa.tr_mul(&sa))))
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            errors.push((kind.to_string(), median(per_trial), 1.0));
        }
        for (name, err, factor) in errors {
            for &k in &ks {
                let bound = factor * tail.delta(k)? / (m - k) as f64;
                let ratio = if bound > 0.0 {
                    err / bound
                } else if err == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                rows.push(AccuracyRow {
                    method: name.clone(),
                    m,
                    k,
                    spectral_error: err,
                    bound,
                    ratio,
                    // Round-off slack for the exact-sketch case (bound = 0).
                    within_bound: err <= bound + 1e-9 * gram.norm(),
                });
            }
        }
    }
    rows.sort_by(|x, y| x.method.cmp(&y.method).then(x.m.cmp(&y.m)).then(x.k.cmp(&y.k)));
    Ok(AccuracyOutput {
        comments: comments("sketch-acc", cfg),
        rows,
    })
}
