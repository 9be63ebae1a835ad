//! Command-line front end. Every command prints one JSON document on stdout
//! (or writes it to `--output`) carrying a schema version and a run manifest.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::data::{load_sample, AnalysisConfig, CGrid, ColumnMap, Dep, Kernel, Sample, SmoothnessBounds};
use crate::error::{Error, ErrorKind};
use crate::inversion::{ArPipeline, ConfidenceSet};
use crate::plot;
use crate::rkd::{rkd_cs, RkdSpec};
use crate::simulate::{
    coverage_study_with, preset, rot_study, CoverageReport, DgpSpec, Method, RotDesign, RunVar, StudyOptions,
};
use crate::smoothness::{extreme_function, rot1, rot2};

pub const SCHEMA_VERSION: u32 = 1;
/// Overrides the worker thread count.
pub const THREADS_ENV: &str = "HONEST_FRD_THREADS";
pub const DEFAULT_SEED: u64 = 20_190_601;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_CLASSIFICATION: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "honest-frd",
    version,
    about = "Bias-aware confidence sets for fuzzy regression discontinuity and kink designs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Confidence set for the ratio of outcome and treatment jumps.
    Frd(FrdArgs),
    /// Confidence sets over a grid of smoothness bounds.
    Sensitivity(SensitivityArgs),
    /// Rule-of-thumb smoothness bounds from global polynomial fits.
    Rot(RotArgs),
    /// Extreme functions allowed by each bound, as CSV and SVG.
    VizBounds(VizArgs),
    /// Confidence set for the ratio of jumps in v-th derivatives.
    Rkd(RkdArgs),
    /// Monte Carlo coverage study or rule-of-thumb experiment.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct InputArgs {
    /// CSV (or .tsv) file with a header row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "x")]
    x_col: String,
    #[arg(long, default_value = "y")]
    y_col: String,
    #[arg(long, default_value = "t")]
    t_col: String,
    /// Subtracted from the running variable.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    cutoff: f64,
}

impl InputArgs {
    fn load(&self) -> Result<Sample, Error> {
        let cols = ColumnMap {
            x: self.x_col.clone(),
            y: self.y_col.clone(),
            t: self.t_col.clone(),
        };
        load_sample(&self.input, &cols, self.cutoff)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct TuningArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Weight-share threshold for the minimum bandwidth.
    #[arg(long, default_value_t = 0.075)]
    eta: f64,
    /// Nearest neighbors per side in the variance estimator.
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    #[arg(long, default_value = "triangular")]
    kernel: String,
    /// Search range for the ratio, as `low,high`.
    #[arg(long, default_value = "-10,10", allow_hyphen_values = true)]
    c_range: String,
    /// Number of grid intervals on the search range.
    #[arg(long, default_value_t = 100)]
    grid: usize,
    /// One bandwidth for every candidate ratio.
    #[arg(long)]
    fixed_h: Option<f64>,
    /// Running-variable values (after centering) to drop, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    donut: Option<String>,
    #[arg(long, default_value_t = 400)]
    max_candidates: usize,
    #[arg(long, default_value_t = 3)]
    max_expansions: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct BoundArgs {
    /// Bound on the outcome's second derivative (both sides).
    #[arg(long)]
    by: f64,
    /// Bound on the treatment's second derivative (both sides).
    #[arg(long)]
    bt: f64,
    #[arg(long)]
    by_plus: Option<f64>,
    #[arg(long)]
    by_minus: Option<f64>,
    #[arg(long)]
    bt_plus: Option<f64>,
    #[arg(long)]
    bt_minus: Option<f64>,
}

impl BoundArgs {
    fn bounds(&self) -> SmoothnessBounds {
        let mut b = SmoothnessBounds::new(self.by, self.bt);
        b.b_y_plus = self.by_plus;
        b.b_y_minus = self.by_minus;
        b.b_t_plus = self.bt_plus;
        b.b_t_minus = self.bt_minus;
        b
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct FrdArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SensitivityArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Outcome bounds, comma separated.
    #[arg(long)]
    by_grid: String,
    /// Treatment bounds, comma separated.
    #[arg(long)]
    bt_grid: String,
    /// Table written next to the JSON result: `csv` or `markdown`.
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    table: Option<PathBuf>,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct RotArgs {
    #[command(flatten)]
    input: InputArgs,
    /// `y`, `t` or `both`.
    #[arg(long, default_value = "both")]
    dep: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct VizArgs {
    #[command(flatten)]
    input: InputArgs,
    /// `y` or `t`.
    #[arg(long, default_value = "y")]
    dep: String,
    /// Bounds to draw, comma separated.
    #[arg(long, default_value = "0,0.1,0.5,2")]
    b_list: String,
    /// Distance from the cutoff where the bound must bind.
    #[arg(long, default_value_t = 0.1)]
    x0: f64,
    #[arg(long, default_value_t = 50)]
    knots: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct RkdArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Bounds here apply to the (p+1)-th derivative.
    #[command(flatten)]
    bounds: BoundArgs,
    #[arg(long, default_value_t = 1)]
    v: usize,
    /// Defaults to v + 1.
    #[arg(long)]
    p: Option<usize>,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SimulateArgs {
    /// Named design, `table1-row1` to `table1-row24`.
    #[arg(long)]
    preset: Option<String>,
    /// `continuous` or `discrete`; used without a preset.
    #[arg(long, default_value = "continuous")]
    runvar: String,
    #[arg(long, default_value_t = 0.5)]
    tau_t: f64,
    #[arg(long, default_value_t = 1.0)]
    by: f64,
    #[arg(long, default_value_t = 0.2)]
    bt: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Comma separated method names, or `all`.
    #[arg(long, default_value = "all")]
    methods: String,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Ratio values whose coverage is recorded, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    theta_grid: Option<String>,
    /// Only test the grid values instead of computing whole sets.
    #[arg(long)]
    no_lengths: bool,
    /// Coverage CSV (rows are method by ratio value).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Power-curve plot when a ratio grid is given.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Run the rule-of-thumb experiment instead: `quadratic` or `quartic`.
    #[arg(long)]
    rot_experiment: Option<String>,
    #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    sigma2_grid: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    /// SHA-256 of the input file, when there is one.
    pub input_digest: Option<String>,
    pub version: String,
    pub seed: Option<u64>,
    pub wall_time_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e.kind() {
            ErrorKind::Usage => EXIT_USAGE,
            ErrorKind::Data => EXIT_DATA,
            ErrorKind::Numeric => EXIT_NUMERIC,
            ErrorKind::Classification => EXIT_CLASSIFICATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

type CmdResult = Result<(Value, Vec<PathBuf>), Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Results go to `out`, messages to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    configure_threads();
    let start = Instant::now();
    let (name, config, input, seed, output) = describe(&cli.command);
    let result = match &cli.command {
        Command::Frd(a) => cmd_frd(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Rot(a) => cmd_rot(a),
        Command::VizBounds(a) => cmd_viz_bounds(a),
        Command::Rkd(a) => cmd_rkd(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    let finished = result.and_then(|(mut body, mut outputs)| {
        let digest = match &input {
            Some(p) => Some(file_digest(p)?),
            None => None,
        };
        if let Some(o) = &output {
            outputs.push(o.clone());
        }
        let manifest = RunManifest {
            command: name.to_string(),
            config,
            input_digest: digest,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            outputs,
        };
        let obj = body.as_object_mut().expect("command results are objects");
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
        obj.insert("command".into(), json!(name));
        obj.insert(
            "manifest".into(),
            serde_json::to_value(manifest).expect("manifest serializes"),
        );
        let text = serde_json::to_string_pretty(&body).expect("result serializes");
        match &output {
            Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|source| {
                Failure::from(Error::Io {
                    path: path.clone(),
                    source,
                })
            }),
            None => {
                let _ = writeln!(out, "{text}");
                Ok(())
            }
        }
    });
    match finished {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

type Description = (&'static str, Value, Option<PathBuf>, Option<u64>, Option<PathBuf>);

fn describe(cmd: &Command) -> Description {
    fn v<T: Serialize>(a: &T) -> Value {
        serde_json::to_value(a).unwrap_or(Value::Null)
    }
    match cmd {
        Command::Frd(a) => ("frd", v(a), Some(a.input.input.clone()), None, a.tuning.output.clone()),
        Command::Sensitivity(a) => (
            "sensitivity",
            v(a),
            Some(a.input.input.clone()),
            None,
            a.tuning.output.clone(),
        ),
        Command::Rot(a) => ("rot", v(a), Some(a.input.input.clone()), None, a.output.clone()),
        Command::VizBounds(a) => ("viz-bounds", v(a), Some(a.input.input.clone()), None, a.output.clone()),
        Command::Rkd(a) => ("rkd", v(a), Some(a.input.input.clone()), None, a.tuning.output.clone()),
        Command::Simulate(a) => ("simulate", v(a), None, Some(a.seed), a.output.clone()),
    }
}

fn file_digest(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path).map_err(|source| {
        Failure::from(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| usage(format!("{what}: `{t}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(usage(format!("{what} is empty")))
            } else {
                Ok(v)
            }
        })
}

fn parse_dep(s: &str) -> Result<Dep, Failure> {
    match s.to_ascii_lowercase().as_str() {
        "y" | "outcome" => Ok(Dep::Outcome),
        "t" | "treatment" => Ok(Dep::Treatment),
        _ => Err(usage(format!("unknown dependent variable `{s}` (expected y or t)"))),
    }
}

fn config(t: &TuningArgs, bounds: SmoothnessBounds) -> Result<AnalysisConfig, Failure> {
    let mut cfg = AnalysisConfig::new(bounds);
    cfg.alpha = t.alpha;
    cfg.eta = t.eta;
    cfg.r_neighbors = t.neighbors;
    cfg.fit.kernel = t.kernel.parse::<Kernel>()?;
    let range = parse_list(&t.c_range, "--c-range")?;
    if range.len() != 2 {
        return Err(usage("--c-range takes exactly two numbers, `low,high`"));
    }
    cfg.c_grid = CGrid::new(range[0], range[1], t.grid);
    cfg.fixed_bandwidth = t.fixed_h;
    cfg.donut = t.donut.as_deref().map(|d| parse_list(d, "--donut")).transpose()?;
    cfg.max_candidates = t.max_candidates;
    cfg.max_expansions = t.max_expansions;
    cfg.validate()?;
    Ok(cfg)
}

fn cs_json(cs: &ConfidenceSet) -> Value {
    serde_json::to_value(cs).expect("confidence set serializes")
}

fn cmd_frd(a: &FrdArgs) -> CmdResult {
    let s = a.input.load()?;
    let cfg = config(&a.tuning, a.bounds.bounds())?;
    let cs = ArPipeline::new(&s, &cfg)?.confidence_set()?;
    Ok((cs_json(&cs), Vec::new()))
}

fn cmd_rkd(a: &RkdArgs) -> CmdResult {
    let s = a.input.load()?;
    let cfg = config(&a.tuning, a.bounds.bounds())?;
    let spec = RkdSpec {
        v: a.v,
        p: a.p.unwrap_or(a.v + 1),
        bounds: a.bounds.bounds(),
    };
    let cs = rkd_cs(&s, &cfg, &spec)?;
    let mut body = cs_json(&cs);
    body["v"] = json!(spec.v);
    body["p"] = json!(spec.p);
    Ok((body, Vec::new()))
}

#[derive(Serialize)]
struct Cell {
    b_y: f64,
    b_t: f64,
    shape: Option<String>,
    endpoints: Vec<f64>,
    error: Option<String>,
}

impl Cell {
    fn display(&self) -> String {
        match (&self.shape, &self.error) {
            (_, Some(e)) => format!("error: {e}"),
            (Some(shape), None) => {
                let fmt = |v: f64| format!("{v:.3}");
                let ep: Vec<String> = self.endpoints.iter().map(|&v| fmt(v)).collect();
                match shape.as_str() {
                    "real_line" => "(-inf; inf)".to_string(),
                    "interval" => format!("[{}; {}]", ep[0], ep[1]),
                    "complement_of_interval" => format!("(-inf; {}] U [{}; inf)", ep[0], ep[1]),
                    "half_line_left" => format!("(-inf; {}]", ep[0]),
                    "half_line_right" => format!("[{}; inf)", ep[0]),
                    _ => format!("{shape} {}", ep.join(" ")),
                }
            }
            (None, None) => String::new(),
        }
    }
}

fn cmd_sensitivity(a: &SensitivityArgs) -> CmdResult {
    let s = a.input.load()?;
    let bys = parse_list(&a.by_grid, "--by-grid")?;
    let bts = parse_list(&a.bt_grid, "--bt-grid")?;
    let markdown = match a.format.as_str() {
        "csv" => false,
        "markdown" | "md" => true,
        f => return Err(usage(format!("unknown table format `{f}` (csv or markdown)"))),
    };
    // Validate the shared settings once so that a bad flag is a usage error,
    // not 25 failed cells.
    config(&a.tuning, SmoothnessBounds::new(bys[0], bts[0]))?;
    let mut cells = Vec::new();
    for &bt in &bts {
        for &by in &bys {
            let res = config(&a.tuning, SmoothnessBounds::new(by, bt))
                .map_err(|f| f.message)
                .and_then(|cfg| {
                    ArPipeline::new(&s, &cfg)
                        .and_then(|p| p.confidence_set())
                        .map_err(|e| e.to_string())
                });
            cells.push(match res {
                Ok(cs) => Cell {
                    b_y: by,
                    b_t: bt,
                    shape: Some(cs_json(&cs)["shape"].as_str().unwrap_or_default().to_string()),
                    endpoints: cs.endpoints,
                    error: None,
                },
                Err(e) => Cell {
                    b_y: by,
                    b_t: bt,
                    shape: None,
                    endpoints: Vec::new(),
                    error: Some(e),
                },
            });
        }
    }
    let mut outputs = Vec::new();
    if let Some(path) = &a.table {
        let text = if markdown {
            markdown_table(&bys, &bts, &cells)
        } else {
            csv_table(&cells)
        };
        std::fs::write(path, text).map_err(|source| {
            Failure::from(Error::Io {
                path: path.clone(),
                source,
            })
        })?;
        outputs.push(path.clone());
    }
    Ok((json!({ "alpha": a.tuning.alpha, "cells": cells }), outputs))
}

fn csv_table(cells: &[Cell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["b_y", "b_t", "shape", "endpoints", "set"]);
    for c in cells {
        let ep: Vec<String> = c.endpoints.iter().map(|v| v.to_string()).collect();
        let _ = w.write_record([
            c.b_y.to_string(),
            c.b_t.to_string(),
            c.shape.clone().unwrap_or_else(|| "error".into()),
            ep.join(" "),
            c.display(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// Rows are treatment bounds, columns outcome bounds.
fn markdown_table(bys: &[f64], bts: &[f64], cells: &[Cell]) -> String {
    let mut s = String::from("| B_T \\ B_Y |");
    for by in bys {
        s.push_str(&format!(" {by} |"));
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(bys.len()));
    s.push('\n');
    for (r, bt) in bts.iter().enumerate() {
        s.push_str(&format!("| {bt} |"));
        for c in &cells[r * bys.len()..(r + 1) * bys.len()] {
            s.push_str(&format!(" {} |", c.display().replace('|', "\\|")));
        }
        s.push('\n');
    }
    s
}

fn cmd_rot(a: &RotArgs) -> CmdResult {
    let s = a.input.load()?;
    let deps: Vec<(&str, Dep)> = match a.dep.as_str() {
        "both" => vec![("y", Dep::Outcome), ("t", Dep::Treatment)],
        d => match parse_dep(d)? {
            Dep::Outcome => vec![("y", Dep::Outcome)],
            Dep::Treatment => vec![("t", Dep::Treatment)],
        },
    };
    let mut body = serde_json::Map::new();
    for (name, dep) in deps {
        let r1 = rot1(&s, dep)?;
        let r2 = rot2(&s, dep)?;
        body.insert(name.to_string(), json!({ "rot1": r1, "rot2": r2 }));
    }
    body.insert(
        "lower_bound".into(),
        json!("unavailable: the data-driven lower bound on the smoothness constant is not implemented"),
    );
    Ok((Value::Object(body), Vec::new()))
}

fn cmd_viz_bounds(a: &VizArgs) -> CmdResult {
    let s = a.input.load()?;
    let dep = parse_dep(&a.dep)?;
    let bs = parse_list(&a.b_list, "--b-list")?;
    std::fs::create_dir_all(&a.out_dir).map_err(|source| {
        Failure::from(Error::Io {
            path: a.out_dir.clone(),
            source,
        })
    })?;
    let mut panels = Vec::new();
    let mut outputs = Vec::new();
    for b in bs {
        let e = extreme_function(&s, dep, b, a.x0, a.knots)?;
        let stem = format!("extreme_{}_b{}", a.dep, b);
        let csv_path = a.out_dir.join(format!("{stem}.csv"));
        let svg_path = a.out_dir.join(format!("{stem}.svg"));
        e.write_csv(&csv_path)?;
        std::fs::write(&svg_path, e.svg(&s, dep, &format!("B = {b}"))).map_err(|source| {
            Failure::from(Error::Io {
                path: svg_path.clone(),
                source,
            })
        })?;
        panels.push(json!({
            "bound": b,
            "rss": e.rss,
            "second_derivative_at_cutoff": [e.second_derivative(-a.x0), e.second_derivative(a.x0)],
            "csv": csv_path,
            "svg": svg_path,
        }));
        outputs.push(csv_path);
        outputs.push(svg_path);
    }
    Ok((json!({ "x0": a.x0, "knots": a.knots, "panels": panels }), outputs))
}

fn dgp_from(a: &SimulateArgs) -> Result<DgpSpec, Failure> {
    if let Some(p) = &a.preset {
        let mut spec = preset(p)?;
        spec.n = a.n;
        return Ok(spec);
    }
    let runvar = match a.runvar.as_str() {
        "continuous" => RunVar::ContinuousUniform,
        "discrete" => RunVar::DiscreteUniform15,
        r => {
            return Err(usage(format!(
                "unknown running variable `{r}` (continuous or discrete)"
            )))
        }
    };
    let mut spec = DgpSpec::standard(runvar, a.tau_t, a.by, a.bt);
    spec.n = a.n;
    Ok(spec)
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    if let Some(design) = &a.rot_experiment {
        let design = match design.as_str() {
            "quadratic" => RotDesign::Quadratic,
            "quartic" => RotDesign::QuadraticMinusQuartic,
            d => {
                return Err(usage(format!(
                    "unknown rule-of-thumb design `{d}` (quadratic or quartic)"
                )))
            }
        };
        let grid = parse_list(&a.sigma2_grid, "--sigma2-grid")?;
        let rows = rot_study(design, &grid, a.n, a.reps, a.seed)?;
        return Ok((
            json!({ "design": design, "true_bound": design.true_bound(), "rows": rows }),
            Vec::new(),
        ));
    }
    let spec = dgp_from(a)?;
    let methods: Vec<Method> = if a.methods.trim() == "all" {
        Method::ALL.to_vec()
    } else {
        a.methods.split(',').map(str::parse).collect::<Result<_, _>>()?
    };
    let opts = StudyOptions {
        reps: a.reps,
        seed: a.seed,
        theta_grid: a
            .theta_grid
            .as_deref()
            .map(|g| parse_list(g, "--theta-grid"))
            .transpose()?,
        alpha: a.alpha,
        lengths: !a.no_lengths,
    };
    let report = coverage_study_with(&spec, &methods, &opts)?;
    let mut outputs = Vec::new();
    let label = a.preset.clone().unwrap_or_else(|| "custom".into());
    if let Some(path) = &a.csv {
        report.write_csv(path, &label)?;
        outputs.push(path.clone());
    }
    if let Some(path) = &a.svg {
        std::fs::write(path, power_svg(&report)).map_err(|source| {
            Failure::from(Error::Io {
                path: path.clone(),
                source,
            })
        })?;
        outputs.push(path.clone());
    }
    Ok((serde_json::to_value(&report).expect("report serializes"), outputs))
}

fn power_svg(r: &CoverageReport) -> String {
    let curves: Vec<(String, Vec<(f64, f64)>)> = r
        .methods
        .iter()
        .map(|m| {
            (
                m.method.to_string(),
                r.thetas.iter().copied().zip(m.coverage.iter().copied()).collect(),
            )
        })
        .collect();
    let series: Vec<plot::Series<'_>> = curves
        .iter()
        .map(|(label, pts)| plot::Series {
            label,
            points: pts,
            scatter: false,
        })
        .collect();
    plot::line_chart("coverage by parameter value", &series)
}
