//! Bandwidth choice: minimize the confidence interval length over a finite
//! candidate set, then raise the result to the weight-concentration floor.

use serde::{Deserialize, Serialize};

use crate::data::{AnalysisConfig, Dep, FitSpec, Kernel, Sample, Side, SmoothnessBounds};
use crate::error::{Error, Result};
use crate::folded_normal::CriticalValue;
use crate::local_poly::{side_weights, SideIndex};
use crate::moments::NnVarianceComponents;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthResult {
    /// Unconstrained minimizer over the candidate set.
    pub h_star: f64,
    /// Smallest candidate meeting the weight-concentration cap.
    pub h_min: f64,
    pub h_used: f64,
    /// Interval half-length `cv * sd` at `h_used`.
    pub objective: f64,
    /// Whether the unconstrained minimizer lies below the floor.
    pub floor_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HFloor {
    pub h_min: f64,
    /// False when no candidate meets the cap and the largest one was returned.
    pub feasible: bool,
}

/// Everything the inference needs from one bandwidth, independent of `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub h: f64,
    pub tau_y: f64,
    pub tau_t: f64,
    pub var_y: f64,
    pub cov_yt: f64,
    pub var_t: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    pub w_ratio: f64,
}

impl Candidate {
    pub fn tau(&self, c: f64) -> f64 {
        self.tau_y - c * self.tau_t
    }

    pub fn sd(&self, c: f64) -> f64 {
        (self.var_y - 2.0 * c * self.cov_yt + c * c * self.var_t)
            .max(0.0)
            .sqrt()
    }

    pub fn bias(&self, bounds: &SmoothnessBounds, c: f64) -> f64 {
        bounds.combined(Side::Right, c) * self.g_plus + bounds.combined(Side::Left, c) * self.g_minus
    }

    pub fn dep_tau(&self, dep: Dep) -> f64 {
        match dep {
            Dep::Outcome => self.tau_y,
            Dep::Treatment => self.tau_t,
        }
    }

    pub fn dep_sd(&self, dep: Dep) -> f64 {
        match dep {
            Dep::Outcome => self.var_y.max(0.0).sqrt(),
            Dep::Treatment => self.var_t.max(0.0).sqrt(),
        }
    }

    pub fn dep_bias(&self, bounds: &SmoothnessBounds, dep: Dep) -> f64 {
        bounds.for_dep(Side::Right, dep) * self.g_plus + bounds.for_dep(Side::Left, dep) * self.g_minus
    }
}

/// Smallest bandwidth at which each side has `p + 1` distinct in-window points.
fn definable_from(x: &[f64], index: &SideIndex, p: usize) -> Result<f64> {
    let mut need = 0.0f64;
    for side in [Side::Left, Side::Right] {
        let mut distinct = 0;
        let mut last = f64::NAN;
        let mut found = None;
        for &i in index.side(side) {
            if x[i] != last {
                distinct += 1;
                last = x[i];
                if distinct == p + 1 {
                    found = Some(x[i].abs());
                    break;
                }
            }
        }
        match found {
            Some(v) => need = need.max(v),
            None => {
                return Err(Error::InsufficientSupport {
                    side,
                    h: f64::INFINITY,
                    needed: p + 1,
                })
            }
        }
    }
    Ok(need)
}

fn candidates_indexed(x: &[f64], index: &SideIndex, fit: &FitSpec, max_candidates: usize) -> Result<Vec<f64>> {
    let need = definable_from(x, index, fit.p)?;
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    mags.sort_by(f64::total_cmp);
    mags.dedup();
    let mut all = Vec::with_capacity(2 * mags.len());
    for k in 0..mags.len() {
        all.push(mags[k]);
        if k + 1 < mags.len() {
            all.push(0.5 * (mags[k] + mags[k + 1]));
        }
    }
    let ok = |h: f64| match fit.kernel {
        Kernel::Uniform => h >= need,
        _ => h > need,
    };
    let valid: Vec<f64> = all.into_iter().filter(|&h| ok(h)).collect();
    if valid.is_empty() {
        return Err(Error::NoValidBandwidth);
    }
    if valid.len() <= max_candidates {
        return Ok(valid);
    }
    let last = (valid.len() - 1) as f64;
    let m = (max_candidates - 1) as f64;
    let mut out: Vec<f64> = (0..max_candidates)
        .map(|k| valid[(k as f64 * last / m).round() as usize])
        .collect();
    out.dedup();
    Ok(out)
}

/// Candidate bandwidths: distinct `|x|` values and midpoints between them, from
/// the smallest one giving well-defined weights up to `max |x|`, thinned to at
/// most `max_candidates` evenly spaced entries.
pub fn candidate_bandwidths(s: &Sample, fit: &FitSpec, max_candidates: usize) -> Result<Vec<f64>> {
    s.require_both_sides()?;
    candidates_indexed(s.x(), &SideIndex::new(s.x()), fit, max_candidates.max(2))
}

/// Candidate summaries with the floor located.
#[derive(Debug, Clone)]
pub(crate) struct BandwidthPath {
    pub cands: Vec<Candidate>,
    pub floor: usize,
    pub floor_feasible: bool,
}

impl BandwidthPath {
    pub fn build(
        s: &Sample,
        fit: &FitSpec,
        nv: Option<&NnVarianceComponents>,
        max_candidates: usize,
        eta: f64,
        fixed: Option<f64>,
    ) -> Result<BandwidthPath> {
        s.require_both_sides()?;
        let x = s.x();
        let index = SideIndex::new(x);
        let hs = match fixed {
            Some(h) => vec![h],
            None => candidates_indexed(x, &index, fit, max_candidates.max(2))?,
        };
        let mut cands = Vec::with_capacity(hs.len());
        let mut first_err = None;
        for &h in &hs {
            match summarize(s, &index, &fit.with_h(h), nv) {
                Ok(c) => cands.push(c),
                Err(e) => {
                    if fixed.is_some() {
                        return Err(e);
                    }
                    first_err.get_or_insert(e);
                }
            }
        }
        if cands.is_empty() {
            return Err(first_err.unwrap_or(Error::NoValidBandwidth));
        }
        let (floor, floor_feasible) = if fixed.is_some() {
            (0, true)
        } else {
            match cands.iter().position(|c| c.w_ratio < eta) {
                Some(i) => (i, true),
                None => (cands.len() - 1, false),
            }
        };
        Ok(BandwidthPath {
            cands,
            floor,
            floor_feasible,
        })
    }

    /// Summaries at `factor` times each candidate bandwidth; `None` where the
    /// smaller window no longer identifies the fit.
    pub fn rescaled(
        &self,
        s: &Sample,
        fit: &FitSpec,
        nv: Option<&NnVarianceComponents>,
        factor: f64,
    ) -> Vec<Option<Candidate>> {
        let index = SideIndex::new(s.x());
        self.cands
            .iter()
            .map(|k| summarize(s, &index, &fit.with_h(k.h * factor), nv).ok())
            .collect()
    }

    pub fn from_config(s: &Sample, nv: &NnVarianceComponents, cfg: &AnalysisConfig) -> Result<BandwidthPath> {
        BandwidthPath::build(s, &cfg.fit, Some(nv), cfg.max_candidates, cfg.eta, cfg.fixed_bandwidth)
    }

    /// Minimizer of `cv(bias/sd) * sd` over candidates `from..`, where
    /// `eval` returns `(bias, sd)`. Ties go to the larger bandwidth.
    fn argmin_from<F>(&self, cvs: &CriticalValue, from: usize, hint: Option<usize>, eval: &F) -> Option<(usize, f64)>
    where
        F: Fn(&Candidate) -> (f64, f64),
    {
        let cv0 = cvs.at(0.0);
        let z1 = cvs.one_sided();
        let objective = |i: usize| {
            let (b, sd) = eval(&self.cands[i]);
            (sd > 0.0).then_some((b, sd))
        };
        let mut best = f64::INFINITY;
        let mut best_i = None;
        // A good early incumbent lets the lower bound below skip most candidates.
        if let Some(h) = hint.filter(|&h| h >= from && h < self.cands.len()) {
            if let Some((b, sd)) = objective(h) {
                best = cvs.at(b / sd) * sd;
                best_i = Some(h);
            }
        }
        for i in from..self.cands.len() {
            let Some((b, sd)) = objective(i) else { continue };
            // cv(r) >= max(cv(0), r + z_{1-alpha}).
            let lb = (cv0 * sd).max(b + z1 * sd);
            if lb > best {
                continue;
            }
            let obj = cvs.at(b / sd) * sd;
            if obj < best || (obj == best && Some(i) > best_i) {
                best = obj;
                best_i = Some(i);
            }
        }
        best_i.map(|i| (i, best))
    }

    fn degenerate(&self) -> Error {
        Error::DegenerateVariance {
            h: self.cands.last().map_or(f64::NAN, |c| c.h),
        }
    }

    fn full<F>(&self, cvs: &CriticalValue, eval: F) -> Result<(usize, BandwidthResult)>
    where
        F: Fn(&Candidate) -> (f64, f64),
    {
        let (used, objective) = self
            .argmin_from(cvs, self.floor, None, &eval)
            .ok_or_else(|| self.degenerate())?;
        let (star, _) = self.argmin_from(cvs, 0, Some(used), &eval).unwrap_or((used, objective));
        Ok((
            used,
            BandwidthResult {
                h_star: self.cands[star].h,
                h_min: self.cands[self.floor].h,
                h_used: self.cands[used].h,
                objective,
                floor_bound: star < self.floor,
            },
        ))
    }

    /// Chosen candidate index for the statistic of `y - c t`.
    pub fn choose(&self, bounds: &SmoothnessBounds, cvs: &CriticalValue, c: f64, hint: Option<usize>) -> Result<usize> {
        self.argmin_from(cvs, self.floor, hint, &|k: &Candidate| (k.bias(bounds, c), k.sd(c)))
            .map(|r| r.0)
            .ok_or_else(|| self.degenerate())
    }

    /// Bandwidth for the auxiliary statistic at `c`, with diagnostics.
    pub fn optimize(&self, bounds: &SmoothnessBounds, cvs: &CriticalValue, c: f64) -> Result<(usize, BandwidthResult)> {
        self.full(cvs, |k| (k.bias(bounds, c), k.sd(c)))
    }

    /// Bandwidth for a single column.
    pub fn optimize_dep(
        &self,
        bounds: &SmoothnessBounds,
        cvs: &CriticalValue,
        dep: Dep,
    ) -> Result<(usize, BandwidthResult)> {
        self.full(cvs, |k| (k.dep_bias(bounds, dep), k.dep_sd(dep)))
    }
}

fn summarize(s: &Sample, index: &SideIndex, fit: &FitSpec, nv: Option<&NnVarianceComponents>) -> Result<Candidate> {
    let x = s.x();
    let plus = side_weights(x, &index.right, fit, Side::Right)?;
    let minus = side_weights(x, &index.left, fit, Side::Left)?;
    let (p, v) = (fit.p, fit.v);
    let f = crate::local_poly::factorial(p + 1);
    let sgn = if (p - v) % 2 == 0 { 1.0 } else { -1.0 };
    let mut c = Candidate {
        h: fit.bandwidth.max(),
        tau_y: 0.0,
        tau_t: 0.0,
        var_y: 0.0,
        cov_yt: 0.0,
        var_t: 0.0,
        g_plus: 0.0,
        g_minus: 0.0,
        w_ratio: 0.0,
    };
    let (mut mx, mut tot) = (0.0f64, 0.0);
    let (mut sp, mut sm) = (0.0, 0.0);
    for (list, sign) in [(&plus, 1.0), (&minus, -1.0)] {
        for &(i, wi) in list.iter() {
            let w = sign * wi;
            c.tau_y += w * s.y()[i];
            c.tau_t += w * s.t()[i];
            let w2 = w * w;
            if let Some(nv) = nv {
                c.var_y += w2 * nv.sig2_y[i];
                c.cov_yt += w2 * nv.sig_yt[i];
                c.var_t += w2 * nv.sig2_t[i];
            }
            mx = mx.max(w2);
            tot += w2;
            let mut xp = x[i];
            for _ in 0..p {
                xp *= x[i];
            }
            if sign > 0.0 {
                sp += wi * xp;
            } else {
                sm += wi * xp;
            }
        }
    }
    c.g_plus = (sgn * sp / f).max(0.0);
    c.g_minus = (-sm / f).max(0.0);
    c.w_ratio = if tot > 0.0 { mx / tot } else { 1.0 };
    Ok(c)
}

/// Smallest candidate bandwidth whose weight ratio is strictly below `eta`.
pub fn h_floor(s: &Sample, spec: &FitSpec, eta: f64, max_candidates: usize) -> Result<HFloor> {
    if !(eta > 0.0) {
        return Err(crate::error::invalid(format!("eta must be positive, got {eta}")));
    }
    let path = BandwidthPath::build(s, spec, None, max_candidates, eta, None)?;
    Ok(HFloor {
        h_min: path.cands[path.floor].h,
        feasible: path.floor_feasible,
    })
}

/// Length-minimizing bandwidth for the statistic of `y - c t`, floored.
pub fn optimize_bandwidth(
    s: &Sample,
    nv: &NnVarianceComponents,
    cfg: &AnalysisConfig,
    c: f64,
) -> Result<BandwidthResult> {
    cfg.validate()?;
    let path = BandwidthPath::from_config(s, nv, cfg)?;
    let cvs = CriticalValue::new(cfg.alpha)?;
    Ok(path.optimize(&cfg.bounds, &cvs, c)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_poly::{w_ratio, weights};
    use crate::moments::{aux_bundle, nn_variances};

    fn grid_sample() -> Sample {
        let x: Vec<f64> = (1..=50).flat_map(|k| [-0.02 * k as f64, 0.02 * k as f64]).collect();
        Sample::sharp(x.clone(), vec![0.0; x.len()]).unwrap()
    }

    #[test]
    fn candidates_cover_support_and_midpoints() {
        let s = Sample::sharp(vec![-0.3, -0.2, -0.1, 0.1, 0.2, 0.3], vec![0.0; 6]).unwrap();
        let tri = candidate_bandwidths(&s, &FitSpec::local_linear(Kernel::Triangular, 1.0), 100).unwrap();
        assert_eq!(tri.len(), 2);
        assert!((tri[0] - 0.25).abs() < 1e-12 && (tri[1] - 0.3).abs() < 1e-12);
        let uni = candidate_bandwidths(&s, &FitSpec::local_linear(Kernel::Uniform, 1.0), 100).unwrap();
        assert_eq!(uni.len(), 3);
        let thin = candidate_bandwidths(&grid_sample(), &FitSpec::local_linear(Kernel::Triangular, 1.0), 10).unwrap();
        assert_eq!(thin.len(), 10);
        assert!((thin[9] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floor_on_regular_grid() {
        let s = grid_sample();
        let spec = FitSpec::local_linear(Kernel::Triangular, 1.0);
        let f = h_floor(&s, &spec, 1.0, 1000).unwrap();
        assert!((f.h_min - 0.05).abs() < 1e-12 && f.feasible);
        let f = h_floor(&s, &spec, 0.075, 1000).unwrap();
        assert!(f.feasible);
        let r = w_ratio(&weights(&s, &spec.with_h(f.h_min)).unwrap()).unwrap();
        assert!(r < 0.075);
        assert!(f.h_min > 0.9 && f.h_min <= 1.0, "{}", f.h_min);
        let f = h_floor(&s, &spec, 1e-6, 1000).unwrap();
        assert!(!f.feasible && (f.h_min - 1.0).abs() < 1e-12);
    }

    fn noisy_sample(n: usize) -> Sample {
        let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| v * v + if v >= 0.0 { 1.0 } else { 0.0 } + 0.3 * (((i * 7919) % 101) as f64 / 101.0 - 0.5))
            .collect();
        let t: Vec<f64> = (0..n)
            .map(|i| if x[i] >= 0.0 || i % 5 == 0 { 1.0 } else { 0.0 })
            .collect();
        Sample::new(x, y, t).unwrap()
    }

    #[test]
    fn optimizer_is_argmin_and_reproducible() {
        let s = noisy_sample(300);
        let nv = nn_variances(&s, 5).unwrap();
        let mut cfg = AnalysisConfig::new(SmoothnessBounds::new(2.0, 0.5));
        cfg.eta = 1.0;
        let cvs = CriticalValue::new(cfg.alpha).unwrap();
        for c in [-1.0, 0.0, 0.7, 3.0] {
            let r = optimize_bandwidth(&s, &nv, &cfg, c).unwrap();
            let hs = candidate_bandwidths(&s, &cfg.fit, cfg.max_candidates).unwrap();
            for h in hs {
                let wv = weights(&s, &cfg.fit.with_h(h)).unwrap();
                let b = aux_bundle(&s, &wv, &nv, &cfg.bounds, c).unwrap();
                let obj = cvs.at(b.ratio) * b.sd;
                assert!(r.objective <= obj * (1.0 + 1e-10));
                if (h - r.h_used).abs() < 1e-15 {
                    assert!((obj - r.objective).abs() <= 1e-10 * obj);
                }
            }
        }
    }

    #[test]
    fn fixed_bandwidth_skips_search() {
        let s = noisy_sample(200);
        let nv = nn_variances(&s, 5).unwrap();
        let mut cfg = AnalysisConfig::new(SmoothnessBounds::new(2.0, 0.5));
        cfg.fixed_bandwidth = Some(0.4321);
        let r = optimize_bandwidth(&s, &nv, &cfg, 1.0).unwrap();
        assert_eq!(r.h_used, 0.4321);
        assert!(!r.floor_bound);
    }

    #[test]
    fn floor_raises_small_bandwidths() {
        let s = noisy_sample(300);
        let nv = nn_variances(&s, 5).unwrap();
        let mut cfg = AnalysisConfig::new(SmoothnessBounds::new(500.0, 0.0));
        cfg.eta = 0.02;
        let r = optimize_bandwidth(&s, &nv, &cfg, 0.0).unwrap();
        assert!(r.h_used >= r.h_min && r.h_used >= r.h_star);
        assert!(r.floor_bound);
    }
}
