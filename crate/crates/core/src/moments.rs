//! Worst-case bias bounds, standard deviations and nearest-neighbor variances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Sample, Side, SmoothnessBounds};
use crate::error::{invalid, Error, Result};
use crate::local_poly::{factorial, WeightVector};

/// Nonnegative per-side multipliers of the smoothness bounds in the worst-case bias.
///
/// The bias bound is `B_right * g.0 + B_left * g.1`.
pub fn bias_factors(wv: &WeightVector, x: &[f64]) -> (f64, f64) {
    let (p, v) = (wv.p, wv.v);
    let f = factorial(p + 1);
    let sgn = if (p - v) % 2 == 0 { 1.0 } else { -1.0 };
    let mut sp = 0.0;
    let mut sm = 0.0;
    for i in 0..x.len() {
        if wv.w_plus[i] != 0.0 {
            sp += wv.w_plus[i] * x[i].powi(p as i32 + 1);
        }
        if wv.w_minus[i] != 0.0 {
            sm += wv.w_minus[i] * x[i].powi(p as i32 + 1);
        }
    }
    ((sgn * sp / f).max(0.0), (-sm / f).max(0.0))
}

/// Worst-case bias of the local linear jump estimator of `y - c t`.
pub fn bias_bound(wv: &WeightVector, x: &[f64], bounds: &SmoothnessBounds, c: f64) -> Result<f64> {
    if wv.p != 1 || wv.v != 0 {
        return Err(invalid(
            "bias_bound is for local linear level weights; use bias_bound_vp",
        ));
    }
    bias_bound_vp(wv, x, bounds, c, 1, 0)
}

/// Worst-case bias over functions whose `(p+1)`-th derivative is bounded on each side.
pub fn bias_bound_vp(
    wv: &WeightVector,
    x: &[f64],
    bounds: &SmoothnessBounds,
    c: f64,
    p: usize,
    v: usize,
) -> Result<f64> {
    if wv.p != p || wv.v != v {
        return Err(invalid(format!(
            "weights were built for (v, p) = ({}, {}), not ({v}, {p})",
            wv.v, wv.p
        )));
    }
    let (gp, gm) = bias_factors(wv, x);
    Ok(bounds.combined(Side::Right, c) * gp + bounds.combined(Side::Left, c) * gm)
}

/// A function attaining the worst-case bias for bounds `b_right`, `b_left`:
/// `(-1)^(p-v) b x^(p+1)/(p+1)!` on the right and `b x^(p+1)/(p+1)!` on the left.
/// The estimator applied to it equals the bias bound.
pub fn worst_case_function(x: f64, p: usize, v: usize, b_right: f64, b_left: f64) -> f64 {
    let base = x.powi(p as i32 + 1) / factorial(p + 1);
    if x >= 0.0 {
        let sgn = if (p - v) % 2 == 0 { 1.0 } else { -1.0 };
        sgn * b_right * base
    } else {
        b_left * base
    }
}

/// Nearest-neighbor residuals and variance components for `y` and `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnVarianceComponents {
    pub sig2_y: Vec<f64>,
    pub sig2_t: Vec<f64>,
    pub sig_yt: Vec<f64>,
    pub r_used: Vec<usize>,
    pub h_leverage: Vec<f64>,
}

impl NnVarianceComponents {
    /// Variance estimate for `y_i - c t_i`.
    pub fn sig2_m(&self, i: usize, c: f64) -> f64 {
        self.sig2_y[i] + c * c * self.sig2_t[i] - 2.0 * c * self.sig_yt[i]
    }
}

/// Neighbor projection for one observation.
#[derive(Debug, Clone, Copy)]
struct Projection {
    r: usize,
    leverage: f64,
}

/// Neighbor sets and projection coefficients along one side, sorted by `x`.
struct SideNeighbors {
    /// `(member positions, coefficient on each member)` per sorted position.
    coefs: Vec<(Vec<usize>, Vec<f64>)>,
    proj: Vec<Projection>,
}

fn neighbors_sorted(xs: &[f64], r_neighbors: usize) -> SideNeighbors {
    let m = xs.len();
    let want = r_neighbors.min(m - 1);
    let mut coefs = Vec::with_capacity(m);
    let mut proj = Vec::with_capacity(m);
    for i in 0..m {
        // Walk outwards taking the closer side first, then absorb ties at the last distance.
        let (mut lo, mut hi) = (i, i + 1);
        let mut taken = 0;
        let mut dmax = 0.0f64;
        while taken < want {
            let dl = if lo > 0 { xs[i] - xs[lo - 1] } else { f64::INFINITY };
            let dr = if hi < m { xs[hi] - xs[i] } else { f64::INFINITY };
            if dl <= dr {
                lo -= 1;
                dmax = dmax.max(dl);
            } else {
                hi += 1;
                dmax = dmax.max(dr);
            }
            taken += 1;
        }
        while lo > 0 && xs[i] - xs[lo - 1] <= dmax {
            lo -= 1;
        }
        while hi < m && xs[hi] - xs[i] <= dmax {
            hi += 1;
        }
        let members: Vec<usize> = (lo..hi).filter(|&j| j != i).collect();
        let rn = members.len() as f64;
        let d: Vec<f64> = members.iter().map(|&j| xs[j] - xs[i]).collect();
        let dbar = d.iter().sum::<f64>() / rn;
        let sxx: f64 = d.iter().map(|v| (v - dbar) * (v - dbar)).sum();
        let (c, lev) = if sxx > 0.0 {
            // Intercept of the linear fit centered at x_i.
            let c = d.iter().map(|dj| 1.0 / rn - dbar * (dj - dbar) / sxx).collect();
            (c, 1.0 / rn + dbar * dbar / sxx)
        } else {
            (vec![1.0 / rn; members.len()], 1.0 / rn)
        };
        coefs.push((members, c));
        proj.push(Projection {
            r: d.len(),
            leverage: lev,
        });
    }
    SideNeighbors { coefs, proj }
}

/// Scaled projection residuals `(W_i - What_i) / sqrt(1 + H_i)` for several columns.
struct NnResult {
    resid: Vec<Vec<f64>>,
    r_used: Vec<usize>,
    leverage: Vec<f64>,
}

fn nn_residuals(x: &[f64], deps: &[&[f64]], r_neighbors: usize, sides: &[(Side, usize)]) -> Result<NnResult> {
    if r_neighbors < 1 {
        return Err(invalid("at least one neighbor is required"));
    }
    let n = x.len();
    let mut resid = vec![vec![0.0; n]; deps.len()];
    let mut r_used = vec![0; n];
    let mut leverage = vec![0.0; n];
    for &(side, min_count) in sides {
        let mut idx: Vec<usize> = (0..n).filter(|&i| Side::of(x[i]) == side).collect();
        if idx.len() < min_count {
            return Err(Error::TooFewObservations {
                side,
                have: idx.len(),
                needed: min_count,
            });
        }
        if idx.is_empty() {
            continue;
        }
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let nb = neighbors_sorted(&xs, r_neighbors);
        let rows: Vec<(usize, Vec<f64>)> = (0..xs.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|k| {
                let (members, c) = &nb.coefs[k];
                let scale = (1.0 + nb.proj[k].leverage).sqrt();
                let vals = deps
                    .iter()
                    .map(|dep| {
                        let (mut fit, mut mag) = (0.0, dep[idx[k]].abs());
                        for (&j, cj) in members.iter().zip(c) {
                            fit += cj * dep[idx[j]];
                            mag += (cj * dep[idx[j]]).abs();
                        }
                        let e = dep[idx[k]] - fit;
                        // Residuals at rounding level are exact fits.
                        if e.abs() <= 64.0 * f64::EPSILON * mag {
                            0.0
                        } else {
                            e / scale
                        }
                    })
                    .collect();
                (k, vals)
            })
            .collect();
        for (k, vals) in rows {
            let i = idx[k];
            for (d, v) in vals.into_iter().enumerate() {
                resid[d][i] = v;
            }
            r_used[i] = nb.proj[k].r;
            leverage[i] = nb.proj[k].leverage;
        }
    }
    Ok(NnResult {
        resid,
        r_used,
        leverage,
    })
}

/// Nearest-neighbor variance components of `y` and `t` with `r_neighbors`
/// same-side neighbors (ties at the last distance included).
pub fn nn_variances(s: &Sample, r_neighbors: usize) -> Result<NnVarianceComponents> {
    let res = nn_residuals(
        s.x(),
        &[s.y(), s.t()],
        r_neighbors,
        &[(Side::Left, 2), (Side::Right, 2)],
    )?;
    let (ey, et) = (&res.resid[0], &res.resid[1]);
    Ok(NnVarianceComponents {
        sig2_y: ey.iter().map(|e| e * e).collect(),
        sig2_t: et.iter().map(|e| e * e).collect(),
        sig_yt: ey.iter().zip(et).map(|(a, b)| a * b).collect(),
        r_used: res.r_used,
        h_leverage: res.leverage,
    })
}

/// Nearest-neighbor variance estimates of one column. Sides with no
/// observations are skipped; a side with a single observation is an error.
pub fn nn_variance_dep(x: &[f64], dep: &[f64], r_neighbors: usize) -> Result<Vec<f64>> {
    if dep.len() != x.len() {
        return Err(invalid("dependent variable and running variable differ in length"));
    }
    let sides: Vec<(Side, usize)> = [Side::Left, Side::Right]
        .into_iter()
        .filter(|&sd| x.iter().any(|&v| Side::of(v) == sd))
        .map(|sd| (sd, 2))
        .collect();
    let res = nn_residuals(x, &[dep], r_neighbors, &sides)?;
    Ok(res.resid[0].iter().map(|e| e * e).collect())
}

/// Local-average matching estimator `R/(R+1) (W_i - mean of neighbors)^2`,
/// which ignores the slope of the regression function. Kept as a baseline.
pub fn nn_local_average(x: &[f64], dep: &[f64], r_neighbors: usize) -> Result<Vec<f64>> {
    if dep.len() != x.len() {
        return Err(invalid("dependent variable and running variable differ in length"));
    }
    let n = x.len();
    let mut out = vec![0.0; n];
    for side in [Side::Left, Side::Right] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| Side::of(x[i]) == side).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::TooFewObservations {
                side,
                have: 1,
                needed: 2,
            });
        }
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let nb = neighbors_sorted(&xs, r_neighbors);
        for (k, &i) in idx.iter().enumerate() {
            let members = &nb.coefs[k].0;
            let rn = members.len() as f64;
            let mean = members.iter().map(|&j| dep[idx[j]]).sum::<f64>() / rn;
            out[i] = rn / (rn + 1.0) * (dep[i] - mean).powi(2);
        }
    }
    Ok(out)
}

/// Estimate, worst-case bias, standard deviation and their ratio for `y - c t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSdBundle {
    pub tau_hat: f64,
    pub bias_bound: f64,
    pub sd: f64,
    pub ratio: f64,
    pub h: f64,
    pub c: f64,
}

pub fn aux_bundle(
    s: &Sample,
    wv: &WeightVector,
    nv: &NnVarianceComponents,
    bounds: &SmoothnessBounds,
    c: f64,
) -> Result<BiasSdBundle> {
    let n = s.n();
    if wv.w.len() != n || nv.sig2_y.len() != n {
        return Err(invalid("weights, variances and sample differ in length"));
    }
    let (y, t) = (s.y(), s.t());
    let mut tau = 0.0;
    let mut var = 0.0;
    for i in 0..n {
        let w = wv.w[i];
        if w != 0.0 {
            tau += w * (y[i] - c * t[i]);
            var += w * w * nv.sig2_m(i, c).max(0.0);
        }
    }
    let h = wv.h.max();
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateVariance { h });
    }
    let bias = bias_bound_vp(wv, s.x(), bounds, c, wv.p, wv.v)?;
    Ok(BiasSdBundle {
        tau_hat: tau,
        bias_bound: bias,
        sd,
        ratio: bias / sd,
        h,
        c,
    })
}
