//! Folded normal distribution and the bias-aware critical value.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal distribution function.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn norm_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// P(|N(r, 1)| <= x).
pub fn folded_cdf(x: f64, r: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(invalid(format!("folded_cdf needs x >= 0, got {x}")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(format!("bias ratio must be finite and >= 0, got {r}")));
    }
    Ok(folded(x, r))
}

pub(crate) fn folded(x: f64, r: f64) -> f64 {
    (norm_cdf(x - r) - norm_cdf(-x - r)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvQuery {
    pub alpha: f64,
    pub r: f64,
}

/// The `1 - alpha` quantile of `|N(r, 1)|`.
pub fn cv(q: CvQuery) -> Result<f64> {
    if !(q.r >= 0.0 && q.r.is_finite()) {
        return Err(invalid(format!("bias ratio must be finite and >= 0, got {}", q.r)));
    }
    Ok(CriticalValue::new(q.alpha)?.at(q.r))
}

/// Critical-value solver with the normal quantiles for one `alpha` cached,
/// plus a coarse table of solutions used as Newton starting points.
#[derive(Debug, Clone)]
pub struct CriticalValue {
    alpha: f64,
    one_sided: f64,
    two_sided: f64,
    table: Arc<Vec<f64>>,
}

const TABLE_STEP: f64 = 0.02;
const TABLE_LEN: usize = 1001;

fn start_table(alpha: f64, cv: &CriticalValue) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cv cache").get(&alpha.to_bits()) {
        return t.clone();
    }
    let t: Vec<f64> = (0..TABLE_LEN).map(|k| cv.solve(k as f64 * TABLE_STEP, None)).collect();
    let t = Arc::new(t);
    let mut guard = cache.lock().expect("cv cache");
    if guard.len() > 64 {
        guard.clear();
    }
    guard.insert(alpha.to_bits(), t.clone());
    t
}

impl CriticalValue {
    pub fn new(alpha: f64) -> Result<CriticalValue> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let mut cv = CriticalValue {
            alpha,
            one_sided: norm_quantile(1.0 - alpha),
            two_sided: norm_quantile(1.0 - alpha / 2.0),
            table: Arc::new(Vec::new()),
        };
        cv.table = start_table(alpha, &cv);
        Ok(cv)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `z_{1-alpha}`, the limit of `cv(r) - r` as `r` grows.
    pub fn one_sided(&self) -> f64 {
        self.one_sided
    }

    /// The `1 - alpha` quantile of `|N(r, 1)|`.
    pub fn at(&self, r: f64) -> f64 {
        if r == 0.0 {
            return self.two_sided;
        }
        let pos = r / TABLE_STEP;
        let start = if pos < (TABLE_LEN - 1) as f64 {
            let k = pos as usize;
            let f = pos - k as f64;
            Some(self.table[k] * (1.0 - f) + self.table[k + 1] * f)
        } else {
            None
        };
        self.solve(r, start)
    }

    /// Newton steps kept inside a bisection bracket.
    fn solve(&self, r: f64, start: Option<f64>) -> f64 {
        let target = 1.0 - self.alpha;
        if r == 0.0 {
            return self.two_sided;
        }
        let (mut lo, mut hi) = (0.0, r + self.two_sided.max(10.0));
        let mut z = start
            .unwrap_or_else(|| (r + self.one_sided).max(self.two_sided))
            .clamp(lo, hi);
        for _ in 0..100 {
            let f = folded(z, r) - target;
            if f < 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            let d = norm_pdf(z - r) + norm_pdf(z + r);
            let mut next = if d > 0.0 { z - f / d } else { f64::NAN };
            let newton = next > lo && next < hi;
            if !newton {
                next = 0.5 * (lo + hi);
            }
            // Quadratic convergence: after a Newton step this small the error is negligible.
            if (newton && (next - z).abs() < 1e-7 * (1.0 + z)) || hi - lo < 1e-13 {
                return next;
            }
            z = next;
        }
        z
    }

    /// `1 - alpha - F(|t|, r)`: nonnegative exactly when `|t| <= cv(r)`.
    pub fn p_value(&self, t: f64, r: f64) -> f64 {
        1.0 - self.alpha - folded(t.abs(), r)
    }
}
