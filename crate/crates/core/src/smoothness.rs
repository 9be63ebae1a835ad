//! Rule-of-thumb smoothness bounds and the constrained "extreme function" fit
//! used to visualize what a given bound allows.

use serde::{Deserialize, Serialize};

use crate::data::{Dep, Sample, Side};
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky_solve, ols};
use crate::plot;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerSide<T> {
    pub left: T,
    pub right: T,
}

impl<T> PerSide<T> {
    pub fn on(&self, side: Side) -> &T {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotResult {
    pub value: f64,
    /// Degree of the global polynomial fitted on each side.
    pub order: usize,
    /// Coefficients in increasing degree.
    pub fit_coefficients: PerSide<Vec<f64>>,
    pub fit_r2: PerSide<f64>,
    /// Where the largest absolute second derivative occurs.
    pub sup_location: f64,
}

struct SideFit {
    coefficients: Vec<f64>,
    r2: f64,
    range: (f64, f64),
}

fn side_poly(x: &[f64], dep: &[f64], side: Side, degree: usize) -> Result<SideFit> {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| Side::of(x[i]) == side).collect();
    let mut xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < degree + 1 {
        return Err(Error::RankDeficient("global polynomial fit: too few distinct x values"));
    }
    let rows: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| (0..=degree).map(|j| x[i].powi(j as i32)).collect())
        .collect();
    let y: Vec<f64> = idx.iter().map(|&i| dep[i]).collect();
    let coefficients = ols(&rows, &y).ok_or(Error::RankDeficient("global polynomial fit"))?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let (mut rss, mut tss) = (0.0, 0.0);
    for (row, yi) in rows.iter().zip(&y) {
        let fit: f64 = row.iter().zip(&coefficients).map(|(a, b)| a * b).sum();
        rss += (yi - fit).powi(2);
        tss += (yi - mean).powi(2);
    }
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(SideFit {
        coefficients,
        r2,
        range: (xs[0], xs[xs.len() - 1]),
    })
}

fn rot_result(order: usize, fits: [SideFit; 2], best: (f64, f64)) -> RotResult {
    let [l, r] = fits;
    RotResult {
        value: best.0,
        order,
        fit_coefficients: PerSide {
            left: l.coefficients,
            right: r.coefficients,
        },
        fit_r2: PerSide {
            left: l.r2,
            right: r.r2,
        },
        sup_location: best.1,
    }
}

/// Fourth-order fit on each side; the bound is the largest absolute fitted
/// second derivative over the observed support.
pub fn rot1(s: &Sample, dep: Dep) -> Result<RotResult> {
    s.require_both_sides()?;
    let mut best = (0.0f64, 0.0);
    let fits = [
        side_poly(s.x(), s.dep(dep), Side::Left, 4)?,
        side_poly(s.x(), s.dep(dep), Side::Right, 4)?,
    ];
    for fit in &fits {
        let g = &fit.coefficients;
        let d2 = |x: f64| 2.0 * g[2] + 6.0 * g[3] * x + 12.0 * g[4] * x * x;
        let (lo, hi) = fit.range;
        let mut pts = vec![lo, hi];
        if g[4] != 0.0 {
            let v = -g[3] / (4.0 * g[4]);
            if v > lo && v < hi {
                pts.push(v);
            }
        }
        for x in pts {
            let a = d2(x).abs();
            if a > best.0 {
                best = (a, x);
            }
        }
    }
    Ok(rot_result(4, fits, best))
}

/// Quadratic fit on each side; the bound is twice the larger absolute second derivative.
pub fn rot2(s: &Sample, dep: Dep) -> Result<RotResult> {
    s.require_both_sides()?;
    let l = side_poly(s.x(), s.dep(dep), Side::Left, 2)?;
    let r = side_poly(s.x(), s.dep(dep), Side::Right, 2)?;
    let al = 4.0 * l.coefficients[2].abs();
    let ar = 4.0 * r.coefficients[2].abs();
    let best = if ar >= al { (ar, r.range.1) } else { (al, l.range.0) };
    Ok(rot_result(2, [l, r], best))
}

/// Piecewise-quadratic fit on one side with a constant second derivative per piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSpline {
    pub side: Side,
    /// Equally spaced knots spanning the side's data range.
    pub knots: Vec<f64>,
    pub intercept: f64,
    pub slope: f64,
    /// Second derivative on each piece `[knots[j], knots[j+1])`.
    pub second_derivatives: Vec<f64>,
    /// Piece pinned at the bound, and the sign used there.
    pub pinned_piece: usize,
    pub pinned_sign: f64,
    pub rss: f64,
}

impl SideSpline {
    fn piece(&self, x: f64) -> usize {
        let k = self.knots.partition_point(|&t| t <= x);
        k.saturating_sub(1).min(self.second_derivatives.len() - 1)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.second_derivatives[self.piece(x)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let d = &self.second_derivatives;
        let mut g = self.intercept + self.slope * x + 0.5 * d[0] * x * x;
        for j in 1..d.len() {
            let u = (x - self.knots[j]).max(0.0);
            g += 0.5 * (d[j] - d[j - 1]) * u * u;
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeFunction {
    pub bound: f64,
    pub x0: f64,
    pub sides: Vec<SideSpline>,
    pub rss: f64,
    /// Dense `(x, g(x))` pairs for plotting, left side first.
    pub evaluations: Vec<(f64, f64)>,
}

impl ExtremeFunction {
    pub fn side(&self, side: Side) -> &SideSpline {
        self.sides
            .iter()
            .find(|s| s.side == side)
            .expect("both sides are fitted")
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.side(Side::of(x)).eval(x)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.side(Side::of(x)).second_derivative(x)
    }
}

impl ExtremeFunction {
    /// `x,fitted` rows, left side first.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "fitted"])?;
        for (x, g) in &self.evaluations {
            w.write_record([x.to_string(), g.to_string()])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Data scatter with the fitted function drawn separately on each side.
    pub fn svg(&self, s: &Sample, dep: Dep, title: &str) -> String {
        let data: Vec<(f64, f64)> = s.x().iter().copied().zip(s.dep(dep).iter().copied()).collect();
        let split = self
            .evaluations
            .iter()
            .position(|(x, _)| *x >= 0.0)
            .unwrap_or(self.evaluations.len());
        let (left, right) = self.evaluations.split_at(split);
        plot::line_chart(
            title,
            &[
                plot::Series {
                    label: "data",
                    points: &data,
                    scatter: true,
                },
                plot::Series {
                    label: "fit, x < 0",
                    points: left,
                    scatter: false,
                },
                plot::Series {
                    label: "fit, x >= 0",
                    points: right,
                    scatter: false,
                },
            ],
        )
    }
}

/// Least squares fit of `dep` by a function whose second derivative is bounded
/// by `b` everywhere and equals `±b` next to the cutoff (at `±x0`), on each side.
pub fn extreme_function(s: &Sample, dep: Dep, b: f64, x0: f64, knots: usize) -> Result<ExtremeFunction> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(invalid(format!("bound must be nonnegative, got {b}")));
    }
    if !(x0 >= 0.0) {
        return Err(invalid(format!("x0 must be nonnegative, got {x0}")));
    }
    if knots < 4 {
        return Err(invalid("at least 4 knots per side are required"));
    }
    s.require_both_sides()?;
    let mut sides = Vec::new();
    for side in [Side::Left, Side::Right] {
        let target = if side == Side::Right { x0 } else { -x0 };
        let mut best: Option<SideSpline> = None;
        for sign in [1.0, -1.0] {
            let fit = fit_side(s.x(), s.dep(dep), side, b, target, sign, knots)?;
            if best.as_ref().is_none_or(|f| fit.rss < f.rss) {
                best = Some(fit);
            }
        }
        sides.push(best.expect("two candidate fits"));
    }
    let rss = sides.iter().map(|f| f.rss).sum();
    let mut evaluations = Vec::new();
    for f in &sides {
        let (lo, hi) = (f.knots[0], f.knots[f.knots.len() - 1]);
        for k in 0..=200 {
            let x = lo + (hi - lo) * k as f64 / 200.0;
            evaluations.push((x, f.eval(x)));
        }
    }
    Ok(ExtremeFunction {
        bound: b,
        x0,
        sides,
        rss,
        evaluations,
    })
}

fn fit_side(x: &[f64], dep: &[f64], side: Side, b: f64, target: f64, sign: f64, nknots: usize) -> Result<SideSpline> {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| Side::of(x[i]) == side).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| dep[i]).collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::RankDeficient("extreme function: a side has a single distinct x"));
    }
    let knots: Vec<f64> = (0..nknots)
        .map(|k| lo + (hi - lo) * k as f64 / (nknots - 1) as f64)
        .collect();
    let pieces = nknots - 1;
    let nv = 2 + pieces;
    // Columns: intercept, slope, then one per piece second derivative.
    let design = |xv: f64| -> Vec<f64> {
        let mut row = vec![0.0; nv];
        row[0] = 1.0;
        row[1] = xv;
        let mut prev = 0.5 * xv * xv;
        for j in 0..pieces {
            let next = if j + 1 < pieces {
                let u = (xv - knots[j + 1]).max(0.0);
                0.5 * u * u
            } else {
                0.0
            };
            // d_j enters through its own piece term minus the next one.
            row[2 + j] = prev - next;
            prev = next;
        }
        row
    };
    let mut h = vec![0.0; nv * nv];
    let mut f = vec![0.0; nv];
    for (xv, yv) in xs.iter().zip(&ys) {
        let r = design(*xv);
        for a in 0..nv {
            if r[a] == 0.0 {
                continue;
            }
            f[a] += r[a] * yv;
            for c in 0..nv {
                h[a * nv + c] += r[a] * r[c];
            }
        }
    }
    let scale = (0..nv).map(|a| h[a * nv + a]).sum::<f64>() / nv as f64;
    for a in 0..nv {
        h[a * nv + a] += 1e-10 * scale.max(1e-300);
    }
    let pinned = {
        let k = knots.partition_point(|&t| t <= target);
        k.saturating_sub(1).min(pieces - 1)
    };
    let mut lower = vec![f64::NEG_INFINITY; nv];
    let mut upper = vec![f64::INFINITY; nv];
    for j in 0..pieces {
        lower[2 + j] = -b;
        upper[2 + j] = b;
    }
    lower[2 + pinned] = sign * b;
    upper[2 + pinned] = sign * b;
    let theta = box_qp(&h, &f, &lower, &upper, nv)?;
    let mut rss = 0.0;
    for (xv, yv) in xs.iter().zip(&ys) {
        let r = design(*xv);
        let g: f64 = r.iter().zip(&theta).map(|(a, t)| a * t).sum();
        rss += (yv - g).powi(2);
    }
    Ok(SideSpline {
        side,
        knots,
        intercept: theta[0],
        slope: theta[1],
        second_derivatives: theta[2..].to_vec(),
        pinned_piece: pinned,
        pinned_sign: sign,
        rss,
    })
}

/// Minimizes `0.5 t'Ht - f't` subject to `lower <= t <= upper` by a primal
/// active-set method. `h` is row-major and positive definite.
pub(crate) fn box_qp(h: &[f64], f: &[f64], lower: &[f64], upper: &[f64], n: usize) -> Result<Vec<f64>> {
    #[derive(Clone, Copy, PartialEq)]
    enum St {
        Free,
        Lo,
        Up,
    }
    let mut st: Vec<St> = (0..n)
        .map(|i| if lower[i] == upper[i] { St::Lo } else { St::Free })
        .collect();
    let mut t: Vec<f64> = (0..n)
        .map(|i| {
            if lower[i] == upper[i] {
                lower[i]
            } else {
                0.0f64.clamp(lower[i], upper[i])
            }
        })
        .collect();
    for i in 0..n {
        if st[i] == St::Free && t[i] == lower[i] {
            st[i] = St::Lo;
        } else if st[i] == St::Free && t[i] == upper[i] {
            st[i] = St::Up;
        }
    }
    let gscale = f.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let max_iter = 50 * n + 100;
    for _ in 0..max_iter {
        // Minimize over the free variables with the others held fixed.
        let free: Vec<usize> = (0..n).filter(|&i| st[i] == St::Free).collect();
        let m = free.len();
        let mut sub = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for (a, &i) in free.iter().enumerate() {
            rhs[a] = f[i];
            for j in 0..n {
                if st[j] != St::Free {
                    rhs[a] -= h[i * n + j] * t[j];
                }
            }
            for (c, &j) in free.iter().enumerate() {
                sub[a * m + c] = h[i * n + j];
            }
        }
        let target = if m > 0 {
            cholesky_solve(&sub, m, &rhs).ok_or(Error::RankDeficient("quadratic program Hessian"))?
        } else {
            Vec::new()
        };
        // Walk toward the subproblem solution until a bound blocks.
        let mut step = 1.0f64;
        let mut blocking = None;
        for (a, &i) in free.iter().enumerate() {
            let d = target[a] - t[i];
            if d > 0.0 && target[a] > upper[i] {
                let s = (upper[i] - t[i]) / d;
                if s < step {
                    step = s;
                    blocking = Some((i, St::Up));
                }
            } else if d < 0.0 && target[a] < lower[i] {
                let s = (lower[i] - t[i]) / d;
                if s < step {
                    step = s;
                    blocking = Some((i, St::Lo));
                }
            }
        }
        for (a, &i) in free.iter().enumerate() {
            t[i] += step * (target[a] - t[i]);
        }
        if let Some((i, s)) = blocking {
            t[i] = if s == St::Up { upper[i] } else { lower[i] };
            st[i] = s;
            continue;
        }
        // Check multipliers of the active bounds; release the worst offender.
        let mut worst = (0.0, None);
        for i in 0..n {
            if st[i] == St::Free || lower[i] == upper[i] {
                continue;
            }
            let g: f64 = (0..n).map(|j| h[i * n + j] * t[j]).sum::<f64>() - f[i];
            let viol = match st[i] {
                St::Lo => -g,
                St::Up => g,
                St::Free => 0.0,
            };
            if viol > worst.0 {
                worst = (viol, Some(i));
            }
        }
        match worst {
            (v, Some(i)) if v > 1e-8 * gscale => st[i] = St::Free,
            _ => return Ok(t),
        }
    }
    Err(Error::QpNonConvergence(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(n: usize, mu: impl Fn(f64) -> f64) -> Sample {
        let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let y = x.iter().map(|&v| mu(v)).collect();
        Sample::sharp(x, y).unwrap()
    }

    #[test]
    fn rot_values_on_polynomials() {
        let s = noiseless(401, |x| x * x);
        let r = rot1(&s, Dep::Outcome).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
        assert!((r.fit_r2.right - 1.0).abs() < 1e-12);
        assert_eq!(r.fit_coefficients.on(Side::Left).len(), 5);
        assert!((rot2(&s, Dep::Outcome).unwrap().value - 4.0).abs() < 1e-9);
        let s = noiseless(401, |x| x * x - x.powi(4));
        let r = rot1(&s, Dep::Outcome).unwrap();
        assert!((r.value - 10.0).abs() < 1e-9);
        assert!((r.sup_location.abs() - 1.0).abs() < 1e-12);
        let s = noiseless(101, |_| 3.0);
        assert!(rot2(&s, Dep::Outcome).unwrap().value < 1e-12);
    }

    #[test]
    fn linear_trend_and_scale() {
        let base = noiseless(201, |x| (3.0 * x).sin());
        let trend = base
            .with_outcome(base.x().iter().zip(base.y()).map(|(x, y)| y + 2.0 - 5.0 * x).collect())
            .unwrap();
        let scaled = base.with_outcome(base.y().iter().map(|y| 3.0 * y).collect()).unwrap();
        for f in [rot1, rot2] {
            let a = f(&base, Dep::Outcome).unwrap().value;
            assert!((f(&trend, Dep::Outcome).unwrap().value - a).abs() < 1e-8);
            assert!((f(&scaled, Dep::Outcome).unwrap().value - 3.0 * a).abs() < 1e-8);
        }
    }

    #[test]
    fn qp_matches_clamped_solution_for_diagonal_hessian() {
        let h = [2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 4.0];
        let f = [4.0, -3.0, 1.0];
        let t = box_qp(&h, &f, &[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(t, vec![1.0, -1.0, 0.25]);
    }

    #[test]
    fn extreme_function_respects_constraints() {
        let s = noiseless(60, |x| 1.5 * x * x + if x >= 0.0 { 0.3 } else { 0.0 });
        for b in [0.5, 3.0] {
            let e = extreme_function(&s, Dep::Outcome, b, 0.1, 12).unwrap();
            for k in 0..=2000 {
                let x = -1.0 + k as f64 / 1000.0;
                assert!(e.second_derivative(x).abs() <= b + 1e-9);
            }
            assert!((e.second_derivative(0.1).abs() - b).abs() < 1e-9);
            assert!((e.second_derivative(-0.1).abs() - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_bound_gives_linear_fit_and_large_bound_interpolates() {
        let s = noiseless(40, |x| 1.5 * x * x);
        let e = extreme_function(&s, Dep::Outcome, 0.0, 0.1, 8).unwrap();
        assert!(e.sides.iter().all(|f| f.second_derivatives.iter().all(|d| *d == 0.0)));
        let e = extreme_function(&s, Dep::Outcome, 3.0, 0.1, 8).unwrap();
        assert!(e.rss < 1e-12, "rss {}", e.rss);
    }

    #[test]
    fn csv_and_svg_outputs() {
        let s = noiseless(30, |x| x * x);
        let e = extreme_function(&s, Dep::Outcome, 1.0, 0.1, 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit.csv");
        e.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + e.evaluations.len());
        assert!(e.svg(&s, Dep::Outcome, "B = 1").contains("<polyline"));
    }
}
