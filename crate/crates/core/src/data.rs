//! Samples, fit specifications, smoothness bounds and analysis configuration.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Side of the cutoff. An observation at exactly zero is on the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn of(x: f64) -> Side {
        if x >= 0.0 {
            Side::Right
        } else {
            Side::Left
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Running variable, outcome and treatment, with the cutoff moved to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    x: Vec<f64>,
    y: Vec<f64>,
    t: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>, t: Vec<f64>) -> Result<Sample> {
        if x.len() != y.len() || x.len() != t.len() {
            return Err(Error::LengthMismatch {
                x: x.len(),
                y: y.len(),
                t: t.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::Empty);
        }
        for i in 0..x.len() {
            if !(x[i].is_finite() && y[i].is_finite() && t[i].is_finite()) {
                return Err(Error::NonFinite(i));
            }
            if !(0.0..=1.0).contains(&t[i]) {
                return Err(Error::TreatmentRange { index: i, value: t[i] });
            }
        }
        Ok(Sample { x, y, t })
    }

    /// Sharp design: the treatment equals the side indicator.
    pub fn sharp(x: Vec<f64>, y: Vec<f64>) -> Result<Sample> {
        let t = x.iter().map(|&v| if v >= 0.0 { 1.0 } else { 0.0 }).collect();
        Sample::new(x, y, t)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn t(&self) -> &[f64] {
        &self.t
    }
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn count(&self, side: Side) -> usize {
        self.x.iter().filter(|&&v| Side::of(v) == side).count()
    }

    /// Errors unless both sides of the cutoff are populated.
    pub fn require_both_sides(&self) -> Result<()> {
        let right = self.count(Side::Right);
        if right == 0 {
            return Err(Error::OneSided(Side::Left));
        }
        if right == self.n() {
            return Err(Error::OneSided(Side::Right));
        }
        Ok(())
    }

    /// Copy with the outcome replaced.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Sample> {
        Sample::new(self.x.clone(), y, self.t.clone())
    }

    pub fn dep(&self, which: Dep) -> &[f64] {
        match which {
            Dep::Outcome => &self.y,
            Dep::Treatment => &self.t,
        }
    }
}

/// Which sample column an SRD-type analysis targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dep {
    Outcome,
    Treatment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Triangular,
    Epanechnikov,
    Uniform,
}

impl Kernel {
    /// Density on [-1, 1]. Triangular and Epanechnikov vanish at the endpoints.
    pub fn eval(self, u: f64) -> f64 {
        let a = u.abs();
        match self {
            Kernel::Triangular => (1.0 - a).max(0.0),
            Kernel::Epanechnikov => (0.75 * (1.0 - a * a)).max(0.0),
            Kernel::Uniform => {
                if a <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    pub fn all() -> [Kernel; 3] {
        [Kernel::Triangular, Kernel::Epanechnikov, Kernel::Uniform]
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Kernel> {
        match s.to_ascii_lowercase().as_str() {
            "triangular" | "tri" => Ok(Kernel::Triangular),
            "epanechnikov" | "epa" => Ok(Kernel::Epanechnikov),
            "uniform" | "rectangular" => Ok(Kernel::Uniform),
            other => Err(invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Common(f64),
    PerSide { left: f64, right: f64 },
}

impl Bandwidth {
    pub fn on(self, side: Side) -> f64 {
        match (self, side) {
            (Bandwidth::Common(h), _) => h,
            (Bandwidth::PerSide { left, .. }, Side::Left) => left,
            (Bandwidth::PerSide { right, .. }, Side::Right) => right,
        }
    }

    /// Representative scalar: the common value, or the larger side.
    pub fn max(self) -> f64 {
        match self {
            Bandwidth::Common(h) => h,
            Bandwidth::PerSide { left, right } => left.max(right),
        }
    }
}

/// Local polynomial fit: kernel, order `p` and derivative `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub kernel: Kernel,
    pub p: usize,
    pub v: usize,
    pub bandwidth: Bandwidth,
}

/// Highest polynomial order accepted anywhere in the crate.
pub const MAX_ORDER: usize = 3;

impl FitSpec {
    pub fn local_linear(kernel: Kernel, h: f64) -> FitSpec {
        FitSpec {
            kernel,
            p: 1,
            v: 0,
            bandwidth: Bandwidth::Common(h),
        }
    }

    pub fn with_h(self, h: f64) -> FitSpec {
        FitSpec {
            bandwidth: Bandwidth::Common(h),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 || self.p > MAX_ORDER {
            return Err(invalid(format!(
                "polynomial order p = {} outside 1..={MAX_ORDER}",
                self.p
            )));
        }
        if self.v > self.p {
            return Err(invalid(format!(
                "derivative order v = {} exceeds p = {}",
                self.v, self.p
            )));
        }
        for side in [Side::Left, Side::Right] {
            let h = self.bandwidth.on(side);
            if !(h.is_finite() && h > 0.0) {
                return Err(invalid(format!("bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// Caps on the relevant derivative of the outcome and treatment regressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessBounds {
    pub b_y: f64,
    pub b_t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_y_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_y_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_t_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_t_minus: Option<f64>,
}

impl SmoothnessBounds {
    pub fn new(b_y: f64, b_t: f64) -> SmoothnessBounds {
        SmoothnessBounds {
            b_y,
            b_t,
            b_y_plus: None,
            b_y_minus: None,
            b_t_plus: None,
            b_t_minus: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            Some(self.b_y),
            Some(self.b_t),
            self.b_y_plus,
            self.b_y_minus,
            self.b_t_plus,
            self.b_t_minus,
        ];
        if all.iter().flatten().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(invalid("smoothness bounds must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn y_on(&self, side: Side) -> f64 {
        match side {
            Side::Right => self.b_y_plus.unwrap_or(self.b_y),
            Side::Left => self.b_y_minus.unwrap_or(self.b_y),
        }
    }

    pub fn t_on(&self, side: Side) -> f64 {
        match side {
            Side::Right => self.b_t_plus.unwrap_or(self.b_t),
            Side::Left => self.b_t_minus.unwrap_or(self.b_t),
        }
    }

    /// Bound for `y - c t` on one side.
    pub fn combined(&self, side: Side, c: f64) -> f64 {
        self.y_on(side) + c.abs() * self.t_on(side)
    }

    /// Bound for a single column on one side.
    pub fn for_dep(&self, side: Side, dep: Dep) -> f64 {
        match dep {
            Dep::Outcome => self.y_on(side),
            Dep::Treatment => self.t_on(side),
        }
    }

    pub fn scaled(&self, k: f64) -> SmoothnessBounds {
        SmoothnessBounds {
            b_y: self.b_y * k,
            b_t: self.b_t * k,
            b_y_plus: self.b_y_plus.map(|b| b * k),
            b_y_minus: self.b_y_minus.map(|b| b * k),
            b_t_plus: self.b_t_plus.map(|b| b * k),
            b_t_minus: self.b_t_minus.map(|b| b * k),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.y_on(Side::Left) == self.y_on(Side::Right) && self.t_on(Side::Left) == self.t_on(Side::Right)
    }
}

/// Grid of candidate values for the ratio parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CGrid {
    pub low: f64,
    pub high: f64,
    pub points: usize,
}

impl CGrid {
    pub fn new(low: f64, high: f64, points: usize) -> CGrid {
        CGrid { low, high, points }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low < self.high) {
            return Err(invalid(format!(
                "c-grid needs low < high, got [{}, {}]",
                self.low, self.high
            )));
        }
        if self.points < 2 {
            return Err(invalid("c-grid needs at least 2 points"));
        }
        Ok(())
    }

    /// `points + 1` equally spaced values including both ends.
    pub fn values(&self) -> Vec<f64> {
        let j = self.points as f64;
        (0..=self.points)
            .map(|k| {
                if k == self.points {
                    self.high
                } else {
                    self.low + k as f64 * (self.high - self.low) / j
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub alpha: f64,
    pub bounds: SmoothnessBounds,
    pub fit: FitSpec,
    pub eta: f64,
    pub r_neighbors: usize,
    pub c_grid: CGrid,
    pub fixed_bandwidth: Option<f64>,
    pub donut: Option<Vec<f64>>,
    /// Cap on the bandwidth candidate set size.
    pub max_candidates: usize,
    /// Number of grid doublings tried before classification gives up.
    pub max_expansions: usize,
    /// Smallest first-stage estimate accepted by the delta-method intervals.
    pub weak_id_floor: f64,
}

impl AnalysisConfig {
    pub fn new(bounds: SmoothnessBounds) -> AnalysisConfig {
        AnalysisConfig {
            alpha: 0.05,
            bounds,
            fit: FitSpec::local_linear(Kernel::Triangular, 1.0),
            eta: 0.075,
            r_neighbors: 5,
            c_grid: CGrid::new(-10.0, 10.0, 100),
            fixed_bandwidth: None,
            donut: None,
            max_candidates: 400,
            max_expansions: 3,
            weak_id_floor: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.r_neighbors < 2 {
            return Err(invalid("at least 2 nearest neighbors are required"));
        }
        if self.max_candidates < 2 {
            return Err(invalid("max_candidates must be at least 2"));
        }
        if let Some(h) = self.fixed_bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(invalid(format!("fixed bandwidth must be positive, got {h}")));
            }
        }
        self.bounds.validate()?;
        self.c_grid.validate()?;
        let mut fit = self.fit;
        fit.bandwidth = Bandwidth::Common(1.0);
        fit.validate()
    }
}

/// Header names of the running variable, outcome and treatment columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub x: String,
    pub y: String,
    pub t: String,
}

impl Default for ColumnMap {
    fn default() -> ColumnMap {
        ColumnMap {
            x: "x".into(),
            y: "y".into(),
            t: "t".into(),
        }
    }
}

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("tsv") || e.eq_ignore_ascii_case("tab") => b'\t',
        _ => b',',
    }
}

/// Reads a delimited file with a header row; `.tsv` files are tab separated.
///
/// Rows are numbered from 1, counting data rows only.
pub fn load_sample(path: &Path, columns: &ColumnMap, cutoff: f64) -> Result<Sample> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx = [find(&columns.x)?, find(&columns.y)?, find(&columns.t)?];
    let names = [&columns.x, &columns.y, &columns.t];
    let (mut x, mut y, mut t) = (Vec::new(), Vec::new(), Vec::new());
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut vals = [0.0; 3];
        for k in 0..3 {
            let raw = rec.get(idx[k]).unwrap_or("");
            vals[k] = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::BadCell {
                    row: r + 1,
                    column: names[k].clone(),
                    value: raw.to_string(),
                })?;
        }
        if !(0.0..=1.0).contains(&vals[2]) {
            return Err(Error::BadCell {
                row: r + 1,
                column: names[2].clone(),
                value: rec.get(idx[2]).unwrap_or("").to_string(),
            });
        }
        x.push(vals[0] - cutoff);
        y.push(vals[1]);
        t.push(vals[2]);
    }
    let s = Sample::new(x, y, t)?;
    s.require_both_sides()?;
    Ok(s)
}

/// Writes `x,y,t` with shortest round-trip float formatting.
pub fn write_sample(s: &Sample, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter_for(path))
        .from_path(path)?;
    w.write_record(["x", "y", "t"])?;
    for i in 0..s.n() {
        w.write_record([s.x[i].to_string(), s.y[i].to_string(), s.t[i].to_string()])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Drops rows whose running variable equals one of `excluded` exactly.
/// Returns the reduced sample and the number of rows removed.
pub fn apply_donut(s: &Sample, excluded: &[f64]) -> Result<(Sample, usize)> {
    let keep: Vec<usize> = (0..s.n()).filter(|&i| !excluded.contains(&s.x[i])).collect();
    let removed = s.n() - keep.len();
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    if keep.is_empty() {
        return Err(Error::Empty);
    }
    let out = Sample {
        x: pick(&s.x),
        y: pick(&s.y),
        t: pick(&s.t),
    };
    if removed > 0 {
        out.require_both_sides()?;
    }
    Ok((out, removed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_csv(body: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn cutoff_is_subtracted() {
        let f = tmp_csv("yearat14,logearn,stayed\n1945,1.0,0\n1946,1.5,0\n1947,2.0,1\n1948,2.2,1\n");
        let cols = ColumnMap {
            x: "yearat14".into(),
            y: "logearn".into(),
            t: "stayed".into(),
        };
        let s = load_sample(f.path(), &cols, 1947.0).unwrap();
        assert_eq!(s.x(), &[-2.0, -1.0, 0.0, 1.0]);
        assert_eq!(s.t(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn nan_outcome_names_its_row() {
        let f = tmp_csv("x,y,t\n-1,1,0\n0.5,NaN,1\n1,2,1\n");
        match load_sample(f.path(), &ColumnMap::default(), 0.0) {
            Err(Error::BadCell { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = tmp_csv("x,y,t\n-1,1,0\n0.5,,1\n");
        assert!(matches!(
            load_sample(f.path(), &ColumnMap::default(), 0.0),
            Err(Error::BadCell { row: 2, .. })
        ));
    }

    #[test]
    fn one_sided_and_missing_column_rejected() {
        let f = tmp_csv("x,y,t\n3,1,1\n4,1,1\n");
        assert!(matches!(
            load_sample(f.path(), &ColumnMap::default(), 2.0),
            Err(Error::OneSided(Side::Right))
        ));
        let f = tmp_csv("x,y\n-1,1\n1,2\n");
        assert!(matches!(
            load_sample(f.path(), &ColumnMap::default(), 0.0),
            Err(Error::MissingColumn(c)) if c == "t"
        ));
        let f = tmp_csv("x,y,t\n");
        assert!(matches!(
            load_sample(f.path(), &ColumnMap::default(), 0.0),
            Err(Error::Empty)
        ));
    }

    #[test]
    fn tsv_round_trip() {
        let s = Sample::new(
            vec![-0.1234567890123456, 0.0, 2.5e-7],
            vec![1.0 / 3.0, -2.0, 1e300],
            vec![0.0, 1.0, 0.25],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.tsv");
        write_sample(&s, &p).unwrap();
        let back = load_sample(&p, &ColumnMap::default(), 0.0).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn donut_cases() {
        let s = Sample::new(vec![-1.0, 0.0, 1.0], vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 1.0]).unwrap();
        let (d, k) = apply_donut(&s, &[0.0]).unwrap();
        assert_eq!(d.x(), &[-1.0, 1.0]);
        assert_eq!(d.y(), &[1.0, 3.0]);
        assert_eq!(k, 1);
        let (d, k) = apply_donut(&s, &[]).unwrap();
        assert_eq!(d, s);
        assert_eq!(k, 0);
        assert!(matches!(apply_donut(&s, &[0.0, 1.0]), Err(Error::OneSided(Side::Left))));
    }

    #[test]
    fn sample_validation() {
        assert!(matches!(
            Sample::new(vec![1.0], vec![1.0, 2.0], vec![1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            Sample::new(vec![1.0], vec![f64::INFINITY], vec![1.0]),
            Err(Error::NonFinite(0))
        ));
        assert!(matches!(
            Sample::new(vec![1.0], vec![1.0], vec![1.5]),
            Err(Error::TreatmentRange { .. })
        ));
        let s = Sample::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(s.require_both_sides(), Err(Error::OneSided(Side::Right))));
    }

    #[test]
    fn kernel_shapes() {
        for k in Kernel::all() {
            assert_eq!(k.eval(1.5), 0.0);
            assert_eq!(k.eval(0.3), k.eval(-0.3));
            assert!(k.eval(0.0) >= k.eval(0.5));
        }
        assert_eq!(Kernel::Triangular.eval(1.0), 0.0);
        assert_eq!(Kernel::Epanechnikov.eval(1.0), 0.0);
        assert_eq!(Kernel::Uniform.eval(1.0), 0.5);
    }

    #[test]
    fn per_side_bounds_default_to_symmetric() {
        let mut b = SmoothnessBounds::new(2.0, 0.5);
        assert_eq!(b.combined(Side::Left, -2.0), 3.0);
        b.b_t_plus = Some(1.0);
        assert_eq!(b.combined(Side::Right, 2.0), 4.0);
        assert!(!b.is_symmetric());
    }
}
