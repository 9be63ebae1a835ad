//! Per-side kernel-weighted polynomial regression weights and SRD-type estimators.

use serde::{Deserialize, Serialize};

use crate::data::{Bandwidth, FitSpec, Sample, Side};
use crate::error::{Error, Result};
use crate::linalg::Qr;

/// Estimator weights: `w = w_plus - w_minus`, each supported on its own side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub w_plus: Vec<f64>,
    pub w_minus: Vec<f64>,
    pub h: Bandwidth,
    pub effective_n_plus: usize,
    pub effective_n_minus: usize,
    pub p: usize,
    pub v: usize,
}

impl WeightVector {
    pub fn apply(&self, dep: &[f64]) -> f64 {
        self.w.iter().zip(dep).map(|(w, d)| w * d).sum()
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Observation indices of each side, ordered by distance from the cutoff.
#[derive(Debug, Clone)]
pub(crate) struct SideIndex {
    pub right: Vec<usize>,
    pub left: Vec<usize>,
}

impl SideIndex {
    pub fn new(x: &[f64]) -> SideIndex {
        let mut right: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= 0.0).collect();
        let mut left: Vec<usize> = (0..x.len()).filter(|&i| x[i] < 0.0).collect();
        let by_abs = |a: &usize, b: &usize| x[*a].abs().total_cmp(&x[*b].abs()).then(a.cmp(b));
        right.sort_by(by_abs);
        left.sort_by(by_abs);
        SideIndex { right, left }
    }

    pub fn side(&self, side: Side) -> &[usize] {
        match side {
            Side::Right => &self.right,
            Side::Left => &self.left,
        }
    }
}

/// Selector weights of one side, as (index, weight) pairs.
pub(crate) fn side_weights(x: &[f64], order: &[usize], spec: &FitSpec, side: Side) -> Result<Vec<(usize, f64)>> {
    let h = spec.bandwidth.on(side);
    let p = spec.p;
    let n = p + 1;
    // `order` is sorted by |x|, so the window is a prefix.
    let m = order.partition_point(|&i| spec.kernel.eval(x[i] / h) > 0.0);
    let idx = &order[..m];
    let mut distinct = 0;
    let mut last = f64::NAN;
    for &i in idx {
        if x[i] != last {
            distinct += 1;
            last = x[i];
            if distinct > p {
                break;
            }
        }
    }
    if distinct < n {
        return Err(Error::InsufficientSupport { side, h, needed: n });
    }
    let inv_fact: Vec<f64> = (0..n).map(|j| 1.0 / factorial(j)).collect();
    let mut sk = Vec::with_capacity(m);
    let mut a = vec![0.0; m * n];
    for (r, &i) in idx.iter().enumerate() {
        let u = x[i] / h;
        let k = spec.kernel.eval(u).sqrt();
        sk.push(k);
        let mut pw = k;
        for j in 0..n {
            a[j * m + r] = pw * inv_fact[j];
            pw *= u;
        }
    }
    let qr = Qr::new(a, m, n);
    if !qr.full_rank(1e-13) {
        return Err(Error::InsufficientSupport { side, h, needed: n });
    }
    let sel = qr.selector(spec.v);
    let scale = 1.0 / h.powi(spec.v as i32);
    Ok(idx
        .iter()
        .zip(sk.iter().zip(&sel))
        .map(|(&i, (k, q))| (i, k * q * scale))
        .collect())
}

pub(crate) fn weights_indexed(s: &Sample, index: &SideIndex, spec: &FitSpec) -> Result<WeightVector> {
    spec.validate()?;
    s.require_both_sides()?;
    let n = s.n();
    let plus = side_weights(s.x(), &index.right, spec, Side::Right)?;
    let minus = side_weights(s.x(), &index.left, spec, Side::Left)?;
    let mut w_plus = vec![0.0; n];
    let mut w_minus = vec![0.0; n];
    for &(i, v) in &plus {
        w_plus[i] = v;
    }
    for &(i, v) in &minus {
        w_minus[i] = v;
    }
    let w = w_plus.iter().zip(&w_minus).map(|(a, b)| a - b).collect();
    Ok(WeightVector {
        w,
        w_plus,
        w_minus,
        h: spec.bandwidth,
        effective_n_plus: plus.len(),
        effective_n_minus: minus.len(),
        p: spec.p,
        v: spec.v,
    })
}

/// Weights of the `v`-th coefficient of the per-side weighted regression on
/// `(1, x, x^2/2!, ..., x^p/p!)` with kernel weights `K(x/h)`.
pub fn weights(s: &Sample, spec: &FitSpec) -> Result<WeightVector> {
    weights_indexed(s, &SideIndex::new(s.x()), spec)
}

/// Jump estimate `sum_i w_i dep_i`.
pub fn srd_estimate(s: &Sample, dep: &[f64], spec: &FitSpec) -> Result<f64> {
    if dep.len() != s.n() {
        return Err(crate::error::invalid(format!(
            "dependent variable has length {}, sample has {}",
            dep.len(),
            s.n()
        )));
    }
    Ok(weights(s, spec)?.apply(dep))
}

/// Largest squared weight relative to the total.
pub fn w_ratio(wv: &WeightVector) -> Result<f64> {
    ratio_of(&wv.w)
}

pub(crate) fn ratio_of(w: &[f64]) -> Result<f64> {
    let (mut mx, mut tot) = (0.0f64, 0.0);
    for v in w {
        let q = v * v;
        mx = mx.max(q);
        tot += q;
    }
    if tot == 0.0 {
        return Err(Error::ZeroWeights);
    }
    Ok(mx / tot)
}
