//! Simulation designs, Monte Carlo coverage and power studies, and
//! rule-of-thumb experiments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AnalysisConfig, Dep, Sample, SmoothnessBounds};
use crate::dm::{dm_ci_bias_aware, dm_ci_naive, undersmoothed_h};
use crate::error::{invalid, Error, Result};
use crate::folded_normal::norm_cdf;
use crate::inversion::ArPipeline;
use crate::smoothness::{rot1, rot2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunVar {
    /// Uniform on [-1, 1].
    ContinuousUniform,
    /// Uniform on {±1/15, ±2/15, ..., ±1}.
    DiscreteUniform15,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub runvar: RunVar,
    pub tau_y: f64,
    pub tau_t: f64,
    pub b_y: f64,
    pub b_t: f64,
    pub n: usize,
    pub rho: f64,
    pub sigma_y: f64,
}

impl DgpSpec {
    /// Design with outcome jump `2 * tau_t`, so the ratio parameter is 2.
    pub fn standard(runvar: RunVar, tau_t: f64, b_y: f64, b_t: f64) -> DgpSpec {
        DgpSpec {
            runvar,
            tau_y: 2.0 * tau_t,
            tau_t,
            b_y,
            b_t,
            n: 1000,
            rho: 0.5,
            sigma_y: 0.1,
        }
    }

    pub fn theta(&self) -> f64 {
        self.tau_y / self.tau_t
    }
}

/// Quadratic spline with second derivative 2, -1 and 1.5 on
/// `|x| < .1`, `.1 < |x| < .6` and `|x| > .6`.
pub fn dgp_f(x: f64) -> f64 {
    let a = x.abs();
    x * x - 1.5 * (a - 0.1).max(0.0).powi(2) + 1.25 * (a - 0.6).max(0.0).powi(2)
}

pub(crate) fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Draws replication `rep` of the design; the stream depends only on `(seed, rep)`.
pub fn draw_dgp_rep(spec: &DgpSpec, seed: u64, rep: u64) -> Sample {
    let mut rng = rep_rng(seed, rep);
    let n = spec.n;
    let (mut x, mut y, mut t) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let rho_c = (1.0 - spec.rho * spec.rho).sqrt();
    for _ in 0..n {
        let xi = match spec.runvar {
            RunVar::ContinuousUniform => rng.gen_range(-1.0..1.0),
            RunVar::DiscreteUniform15 => {
                let k = rng.gen_range(1..=15) as f64 / 15.0;
                if rng.gen_bool(0.5) {
                    k
                } else {
                    -k
                }
            }
        };
        let e1: f64 = rng.sample(StandardNormal);
        let e0: f64 = rng.sample(StandardNormal);
        let e2 = spec.rho * e1 + rho_c * e0;
        let z = if xi >= 0.0 { 1.0 } else { 0.0 };
        let sf = xi.signum() * dgp_f(xi);
        x.push(xi);
        y.push(spec.b_y / 2.0 * sf + z * spec.tau_y + spec.sigma_y * e1);
        let index = -spec.b_t / 2.0 * sf + z * spec.tau_t + 0.3;
        t.push(if index >= norm_cdf(e2) { 1.0 } else { 0.0 });
    }
    Sample::new(x, y, t).expect("simulated sample is valid")
}

pub fn draw_dgp(spec: &DgpSpec, seed: u64) -> Sample {
    draw_dgp_rep(spec, seed, 0)
}

/// Interval or set construction compared in coverage studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    /// Bias-aware AR set with the true bounds.
    ArTrue,
    ArDouble,
    ArHalf,
    ArRot1,
    ArRot2,
    /// Bandwidth chosen as for `ArTrue`, critical value ignoring bias.
    ArNaive,
    /// As `ArNaive` at `n^(-1/20)` times that bandwidth.
    ArUndersmoothed,
    DmTrue,
    DmDouble,
    DmHalf,
    DmRot1,
    DmRot2,
    /// Delta method at the `DmTrue` bandwidth, ignoring bias.
    DmNaive,
    DmUndersmoothed,
}

impl Method {
    pub const ALL: [Method; 14] = [
        Method::ArTrue,
        Method::ArDouble,
        Method::ArHalf,
        Method::ArRot1,
        Method::ArRot2,
        Method::ArNaive,
        Method::ArUndersmoothed,
        Method::DmTrue,
        Method::DmDouble,
        Method::DmHalf,
        Method::DmRot1,
        Method::DmRot2,
        Method::DmNaive,
        Method::DmUndersmoothed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ArTrue => "ar-tc",
            Method::ArDouble => "ar-tc2",
            Method::ArHalf => "ar-tc05",
            Method::ArRot1 => "ar-rot1",
            Method::ArRot2 => "ar-rot2",
            Method::ArNaive => "ar-naive",
            Method::ArUndersmoothed => "ar-us",
            Method::DmTrue => "dm-tc",
            Method::DmDouble => "dm-tc2",
            Method::DmHalf => "dm-tc05",
            Method::DmRot1 => "dm-rot1",
            Method::DmRot2 => "dm-rot2",
            Method::DmNaive => "dm-naive",
            Method::DmUndersmoothed => "dm-us",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;
    fn try_from(s: String) -> Result<Method> {
        s.parse()
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                invalid(format!("unknown method `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub reps: usize,
    pub seed: u64,
    /// Parameter values whose coverage is recorded; defaults to the true ratio.
    pub theta_grid: Option<Vec<f64>>,
    pub alpha: f64,
    /// Compute whole sets (for lengths); otherwise only test the grid values.
    pub lengths: bool,
}

impl StudyOptions {
    pub fn new(reps: usize, seed: u64) -> StudyOptions {
        StudyOptions {
            reps,
            seed,
            theta_grid: None,
            alpha: 0.05,
            lengths: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub method: Method,
    /// Coverage rate per grid value, over successful replications.
    pub coverage: Vec<f64>,
    pub mc_se: Vec<f64>,
    pub successes: usize,
    pub failures: usize,
    /// Failure counts by error message category.
    pub failure_kinds: BTreeMap<String, usize>,
    /// Median set length over successful replications; infinite when more
    /// than half the sets are unbounded.
    pub median_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub dgp: DgpSpec,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub thetas: Vec<f64>,
    pub methods: Vec<MethodCoverage>,
}

impl CoverageReport {
    pub fn method(&self, m: Method) -> Option<&MethodCoverage> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Coverage of the first grid value (the true ratio by default).
    pub fn rate(&self, m: Method) -> Option<f64> {
        self.method(m).and_then(|r| r.coverage.first().copied())
    }

    /// One row per method and grid value.
    pub fn write_csv(&self, path: &Path, label: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "dgp",
            "method",
            "theta",
            "coverage",
            "mc_se",
            "successes",
            "failures",
            "median_length",
        ])?;
        for m in &self.methods {
            for (j, th) in self.thetas.iter().enumerate() {
                w.write_record([
                    label.to_string(),
                    m.method.to_string(),
                    th.to_string(),
                    m.coverage[j].to_string(),
                    m.mc_se[j].to_string(),
                    m.successes.to_string(),
                    m.failures.to_string(),
                    m.median_length.map_or(String::new(), |v| v.to_string()),
                ])?;
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

struct RepOutcome {
    covered: Vec<bool>,
    length: Option<f64>,
}

/// Monte Carlo coverage of `methods` with default options and `alpha = .05`.
pub fn coverage_study(
    spec: &DgpSpec,
    methods: &[Method],
    reps: usize,
    theta_grid: Option<&[f64]>,
    seed: u64,
) -> Result<CoverageReport> {
    let mut opts = StudyOptions::new(reps, seed);
    opts.theta_grid = theta_grid.map(|g| g.to_vec());
    coverage_study_with(spec, methods, &opts)
}

/// Replications run in parallel; replication `r` always uses the random
/// stream `(seed, r)`, so results do not depend on the thread count.
pub fn coverage_study_with(spec: &DgpSpec, methods: &[Method], opts: &StudyOptions) -> Result<CoverageReport> {
    if opts.reps < 100 {
        return Err(invalid(format!(
            "at least 100 replications are required, got {}",
            opts.reps
        )));
    }
    if methods.is_empty() {
        return Err(invalid("no methods requested"));
    }
    validate_dgp(spec)?;
    let thetas = opts.theta_grid.clone().unwrap_or_else(|| vec![spec.theta()]);
    if thetas.is_empty() || thetas.iter().any(|t| !t.is_finite()) {
        return Err(invalid("theta grid must be nonempty and finite"));
    }
    let per_rep: Vec<Vec<std::result::Result<RepOutcome, String>>> = (0..opts.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let s = draw_dgp_rep(spec, opts.seed, rep);
            methods
                .iter()
                .map(|&m| run_method(&s, spec, m, &thetas, opts).map_err(|e| failure_kind(&e)))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(methods.len());
    for (j, &m) in methods.iter().enumerate() {
        let mut hits = vec![0usize; thetas.len()];
        let mut lengths = Vec::new();
        let mut failure_kinds = BTreeMap::new();
        let mut successes = 0;
        for rep in &per_rep {
            match &rep[j] {
                Ok(o) => {
                    successes += 1;
                    for (h, c) in hits.iter_mut().zip(&o.covered) {
                        *h += *c as usize;
                    }
                    if let Some(l) = o.length {
                        lengths.push(l);
                    }
                }
                Err(kind) => *failure_kinds.entry(kind.clone()).or_insert(0) += 1,
            }
        }
        let rates: Vec<f64> = hits
            .iter()
            .map(|&h| {
                if successes > 0 {
                    h as f64 / successes as f64
                } else {
                    f64::NAN
                }
            })
            .collect();
        let mc_se = rates
            .iter()
            .map(|r| (r * (1.0 - r) / successes.max(1) as f64).sqrt())
            .collect();
        out.push(MethodCoverage {
            method: m,
            coverage: rates,
            mc_se,
            successes,
            failures: opts.reps - successes,
            failure_kinds,
            median_length: median(&mut lengths),
        });
    }
    Ok(CoverageReport {
        dgp: *spec,
        reps: opts.reps,
        seed: opts.seed,
        alpha: opts.alpha,
        thetas,
        methods: out,
    })
}

fn validate_dgp(spec: &DgpSpec) -> Result<()> {
    if spec.n < 10 {
        return Err(invalid(format!("sample size {} is too small", spec.n)));
    }
    if !(spec.rho.abs() <= 1.0) || !(spec.sigma_y >= 0.0) {
        return Err(invalid(
            "correlation must lie in [-1, 1] and the noise scale must be nonnegative",
        ));
    }
    for v in [spec.tau_y, spec.tau_t, spec.b_y, spec.b_t] {
        if !v.is_finite() {
            return Err(invalid("design parameters must be finite"));
        }
    }
    Ok(())
}

fn failure_kind(e: &Error) -> String {
    let s = format!("{e:?}");
    s.split([' ', '(', '{']).next().unwrap_or("error").to_string()
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

fn run_method(s: &Sample, spec: &DgpSpec, m: Method, thetas: &[f64], opts: &StudyOptions) -> Result<RepOutcome> {
    let truth = SmoothnessBounds::new(spec.b_y, spec.b_t);
    let config = |bounds: SmoothnessBounds| {
        let mut cfg = AnalysisConfig::new(bounds);
        cfg.alpha = opts.alpha;
        cfg
    };
    let ar = |pipe: ArPipeline| -> Result<RepOutcome> {
        if opts.lengths {
            let cs = pipe.confidence_set()?;
            Ok(RepOutcome {
                covered: thetas.iter().map(|&t| cs.contains(t)).collect(),
                length: Some(cs.length()),
            })
        } else {
            let covered = thetas
                .iter()
                .map(|&t| pipe.p_hat(t).map(|a| a.p_value >= 0.0))
                .collect::<Result<_>>()?;
            Ok(RepOutcome { covered, length: None })
        }
    };
    let dm = |lo: f64, hi: f64| RepOutcome {
        covered: thetas.iter().map(|&t| lo <= t && t <= hi).collect(),
        length: Some(hi - lo),
    };
    let rot_bounds = |rot: fn(&Sample, Dep) -> Result<crate::smoothness::RotResult>| -> Result<SmoothnessBounds> {
        Ok(SmoothnessBounds::new(
            rot(s, Dep::Outcome)?.value,
            rot(s, Dep::Treatment)?.value,
        ))
    };
    let dm_aware = |bounds: SmoothnessBounds| -> Result<RepOutcome> {
        let r = dm_ci_bias_aware(s, &config(bounds), None)?;
        Ok(dm(r.ci.0, r.ci.1))
    };
    match m {
        Method::ArTrue => ar(ArPipeline::new(s, &config(truth))?),
        Method::ArDouble => ar(ArPipeline::new(s, &config(truth.scaled(2.0)))?),
        Method::ArHalf => ar(ArPipeline::new(s, &config(truth.scaled(0.5)))?),
        Method::ArRot1 => ar(ArPipeline::new(s, &config(rot_bounds(rot1)?))?),
        Method::ArRot2 => ar(ArPipeline::new(s, &config(rot_bounds(rot2)?))?),
        Method::ArNaive => ar(ArPipeline::new(s, &config(truth))?.naive()),
        Method::ArUndersmoothed => {
            let factor = undersmoothed_h(1.0, s.n());
            ar(ArPipeline::new(s, &config(truth))?.naive().rescaled(factor)?)
        }
        Method::DmTrue => dm_aware(truth),
        Method::DmDouble => dm_aware(truth.scaled(2.0)),
        Method::DmHalf => dm_aware(truth.scaled(0.5)),
        Method::DmRot1 => dm_aware(rot_bounds(rot1)?),
        Method::DmRot2 => dm_aware(rot_bounds(rot2)?),
        Method::DmNaive | Method::DmUndersmoothed => {
            let cfg = config(truth);
            let h = dm_ci_bias_aware(s, &cfg, None)?.h;
            let h = if m == Method::DmNaive {
                h
            } else {
                undersmoothed_h(h, s.n())
            };
            let r = dm_ci_naive(s, &cfg, h)?;
            Ok(dm(r.ci.0, r.ci.1))
        }
    }
}

/// Regression function in the rule-of-thumb experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotDesign {
    /// `x^2`, second derivative bound 2.
    Quadratic,
    /// `x^2 - x^4`, second derivative bound 10.
    QuadraticMinusQuartic,
}

impl RotDesign {
    pub fn mu(self, x: f64) -> f64 {
        match self {
            RotDesign::Quadratic => x * x,
            RotDesign::QuadraticMinusQuartic => x * x - x.powi(4),
        }
    }

    pub fn true_bound(self) -> f64 {
        match self {
            RotDesign::Quadratic => 2.0,
            RotDesign::QuadraticMinusQuartic => 10.0,
        }
    }
}

/// Summary of simulated rule-of-thumb values at one noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotSummary {
    pub sigma2: f64,
    pub rot1_mean: f64,
    pub rot1_quartiles: (f64, f64),
    pub rot2_mean: f64,
    pub rot2_quartiles: (f64, f64),
    pub failures: usize,
}

/// `n` draws of `x ~ U[-1, 1]`, `y = mu(x) + sigma * e`; replication `rep`
/// uses stream `(seed, rep)`.
pub fn draw_rot_rep(design: RotDesign, sigma2: f64, n: usize, seed: u64, rep: u64) -> Sample {
    let mut rng = rep_rng(seed, rep);
    let sigma = sigma2.sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.gen_range(-1.0..1.0);
        let e: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(design.mu(xi) + sigma * e);
    }
    Sample::sharp(x, y).expect("simulated sample is valid")
}

/// Mean and interquartile range of both rules of thumb at each noise level.
pub fn rot_study(design: RotDesign, sigma2_grid: &[f64], n: usize, reps: usize, seed: u64) -> Result<Vec<RotSummary>> {
    if reps == 0 || n < 10 {
        return Err(invalid("need at least one replication and ten observations"));
    }
    sigma2_grid
        .iter()
        .enumerate()
        .map(|(g, &sigma2)| {
            if !(sigma2 >= 0.0) {
                return Err(invalid(format!("noise variance must be nonnegative, got {sigma2}")));
            }
            // Separate seed per grid value so adding values does not shift others.
            let seed_g = seed.wrapping_add(g as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let vals: Vec<Option<(f64, f64)>> = (0..reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let s = draw_rot_rep(design, sigma2, n, seed_g, rep);
                    Some((rot1(&s, Dep::Outcome).ok()?.value, rot2(&s, Dep::Outcome).ok()?.value))
                })
                .collect();
            let ok: Vec<(f64, f64)> = vals.iter().flatten().copied().collect();
            let mut r1: Vec<f64> = ok.iter().map(|v| v.0).collect();
            let mut r2: Vec<f64> = ok.iter().map(|v| v.1).collect();
            Ok(RotSummary {
                sigma2,
                rot1_mean: mean(&r1),
                rot1_quartiles: quartiles(&mut r1),
                rot2_mean: mean(&r2),
                rot2_quartiles: quartiles(&mut r2),
                failures: reps - ok.len(),
            })
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn quartiles(v: &mut [f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    (q(0.25), q(0.75))
}

/// Designs of the coverage table, numbered 1 to 24: continuous then discrete
/// running variable; within each, `tau_t` in (.5, .1), then `b_y` in
/// (1, 10, 100), then `b_t` in (.2, 1).
pub fn preset(name: &str) -> Result<DgpSpec> {
    let row: usize = name
        .strip_prefix("table1-row")
        .and_then(|r| r.parse().ok())
        .filter(|r| (1..=24).contains(r))
        .ok_or_else(|| invalid(format!("unknown preset `{name}` (table1-row1 ..= table1-row24)")))?;
    let k = row - 1;
    let runvar = if k < 12 {
        RunVar::ContinuousUniform
    } else {
        RunVar::DiscreteUniform15
    };
    let tau_t = [0.5, 0.1][(k % 12) / 6];
    let b_y = [1.0, 10.0, 100.0][(k % 6) / 2];
    let b_t = [0.2, 1.0][k % 2];
    Ok(DgpSpec::standard(runvar, tau_t, b_y, b_t))
}
