//! Delta-method intervals for the ratio parameter: bias-aware, naive and
//! undersmoothed. These are baselines; they break down when the first stage
//! is weak.

use serde::{Deserialize, Serialize};

use crate::bandwidth::{BandwidthPath, Candidate};
use crate::data::{AnalysisConfig, Dep, Sample, SmoothnessBounds};
use crate::error::{Error, Result};
use crate::folded_normal::CriticalValue;
use crate::inversion::ArPipeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmInference {
    pub theta_hat: f64,
    /// Linearized influence terms built from the preliminary estimates.
    pub u_hat: Vec<f64>,
    pub bias_bound_u: f64,
    pub sd_u: f64,
    pub ci: (f64, f64),
    pub h: f64,
    /// Preliminary jump estimates used for the linearization.
    pub prelim: (f64, f64),
}

impl DmInference {
    pub fn contains(&self, v: f64) -> bool {
        self.ci.0 <= v && v <= self.ci.1
    }
    pub fn length(&self) -> f64 {
        self.ci.1 - self.ci.0
    }
}

fn check_floor(tau_t: f64, floor: f64) -> Result<()> {
    if !(tau_t.abs() >= floor) {
        return Err(Error::WeakIdentification { tau_t, floor });
    }
    Ok(())
}

/// Interval at candidate `k` given preliminary `(tau_y, tau_t)`.
fn interval_at(
    k: &Candidate,
    prelim: (f64, f64),
    bounds: &SmoothnessBounds,
    cv: f64,
    floor: f64,
) -> Result<(f64, f64, f64, (f64, f64))> {
    check_floor(k.tau_t, floor)?;
    let (ty, tt) = prelim;
    let theta_pre = ty / tt;
    let scale = tt.abs();
    let sd = k.sd(theta_pre) / scale;
    if !(sd > 0.0) {
        return Err(Error::DegenerateVariance { h: k.h });
    }
    let bias = k.bias(bounds, theta_pre) / scale;
    let theta = k.tau_y / k.tau_t;
    Ok((theta, bias, sd, (theta - cv * sd, theta + cv * sd)))
}

fn u_hat(s: &Sample, prelim: (f64, f64)) -> Vec<f64> {
    let (ty, tt) = prelim;
    s.y()
        .iter()
        .zip(s.t())
        .map(|(y, t)| (y - ty) / tt - ty * (t - tt) / (tt * tt))
        .collect()
}

/// Bias-aware delta-method interval. The preliminary jump estimates come from
/// `prelim_h` when given, otherwise from each column's own bias-aware bandwidth.
/// The final bandwidth minimizes the interval length (`cfg.fixed_bandwidth`
/// overrides it).
pub fn dm_ci_bias_aware(s: &Sample, cfg: &AnalysisConfig, prelim_h: Option<f64>) -> Result<DmInference> {
    let pipe = ArPipeline::new(s, cfg)?;
    let sample = pipe.sample();
    let prelim = match prelim_h {
        Some(h) => {
            let p = ArPipeline::with_fixed_h(sample, &without_donut(cfg), h)?;
            (p.srd_ci(Dep::Outcome)?.estimate, p.srd_ci(Dep::Treatment)?.estimate)
        }
        None => (
            pipe.srd_ci(Dep::Outcome)?.estimate,
            pipe.srd_ci(Dep::Treatment)?.estimate,
        ),
    };
    check_floor(prelim.1, cfg.weak_id_floor)?;
    let cvs = CriticalValue::new(cfg.alpha)?;
    // Bias and sd of the linearization are those of y - theta_pre t divided by
    // |tau_t|, so the length-minimizing bandwidth is the one chosen at theta_pre.
    let theta_pre = prelim.0 / prelim.1;
    let path = pipe.bandwidth_path();
    let i = path.choose(&cfg.bounds, &cvs, theta_pre, None)?;
    finish(sample, path, i, prelim, cfg, &cvs, false)
}

fn without_donut(cfg: &AnalysisConfig) -> AnalysisConfig {
    AnalysisConfig {
        donut: None,
        ..cfg.clone()
    }
}

fn finish(
    s: &Sample,
    path: &BandwidthPath,
    i: usize,
    prelim: (f64, f64),
    cfg: &AnalysisConfig,
    cvs: &CriticalValue,
    ignore_bias: bool,
) -> Result<DmInference> {
    let k = &path.cands[i];
    let sd_probe = interval_at(k, prelim, &cfg.bounds, 0.0, cfg.weak_id_floor)?;
    let (bias, sd) = (sd_probe.1, sd_probe.2);
    let cv = if ignore_bias { cvs.at(0.0) } else { cvs.at(bias / sd) };
    let (theta, _, _, ci) = interval_at(k, prelim, &cfg.bounds, cv, cfg.weak_id_floor)?;
    Ok(DmInference {
        theta_hat: theta,
        u_hat: u_hat(s, prelim),
        bias_bound_u: if ignore_bias { 0.0 } else { bias },
        sd_u: sd,
        ci,
        h: k.h,
        prelim,
    })
}

/// Delta-method interval at bandwidth `h` that ignores bias: the
/// linearization uses the estimates at `h` and the critical value is `cv(0)`.
pub fn dm_ci_naive(s: &Sample, cfg: &AnalysisConfig, h: f64) -> Result<DmInference> {
    let cfg0 = AnalysisConfig {
        bounds: SmoothnessBounds::new(0.0, 0.0),
        ..cfg.clone()
    };
    let pipe = ArPipeline::with_fixed_h(s, &cfg0, h)?;
    let path = pipe.bandwidth_path();
    let k = &path.cands[0];
    let prelim = (k.tau_y, k.tau_t);
    check_floor(prelim.1, cfg.weak_id_floor)?;
    let cvs = CriticalValue::new(cfg.alpha)?;
    finish(pipe.sample(), path, 0, prelim, &cfg0, &cvs, true)
}

/// Naive interval at `base_h * n^(-1/20)`.
pub fn dm_ci_undersmoothed(s: &Sample, cfg: &AnalysisConfig, base_h: f64) -> Result<DmInference> {
    dm_ci_naive(s, cfg, undersmoothed_h(base_h, s.n()))
}

pub fn undersmoothed_h(base_h: f64, n: usize) -> f64 {
    base_h * (n as f64).powf(-1.0 / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CGrid, Kernel};
    use crate::inversion::srd_ci;
    use crate::local_poly::weights;
    use crate::simulate::{draw_dgp_rep, DgpSpec, RunVar};

    fn cfg(by: f64, bt: f64) -> AnalysisConfig {
        let mut c = AnalysisConfig::new(SmoothnessBounds::new(by, bt));
        c.c_grid = CGrid::new(-8.0, 12.0, 100);
        c
    }

    #[test]
    fn nearly_sharp_design_reduces_to_outcome_interval() {
        let spec = DgpSpec::standard(RunVar::ContinuousUniform, 0.5, 1.0, 0.0);
        let d = draw_dgp_rep(&spec, 3, 0);
        // Treatment equal to the cutoff indicator up to 1e-7, so its variance is tiny but positive.
        let t: Vec<f64> = d
            .x()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let u = 1e-7 * ((i * 7919) % 101) as f64 / 101.0;
                if x >= 0.0 {
                    1.0 - u
                } else {
                    u
                }
            })
            .collect();
        let s = Sample::new(d.x().to_vec(), d.y().to_vec(), t).unwrap();
        let c = cfg(1.0, 0.0);
        let dm = dm_ci_bias_aware(&s, &c, None).unwrap();
        let y = srd_ci(&s, Dep::Outcome, &c).unwrap();
        assert!((dm.ci.0 - y.lower).abs() < 1e-5 && (dm.ci.1 - y.upper).abs() < 1e-5);
    }

    #[test]
    fn exactly_sharp_treatment_is_degenerate() {
        let spec = DgpSpec::standard(RunVar::ContinuousUniform, 0.5, 1.0, 0.0);
        let d = draw_dgp_rep(&spec, 3, 0);
        let s = Sample::sharp(d.x().to_vec(), d.y().to_vec()).unwrap();
        let err = dm_ci_bias_aware(&s, &cfg(1.0, 0.0), None).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance { .. }), "{err}");
    }

    #[test]
    fn naive_equals_zero_bound_version_at_same_h() {
        let spec = DgpSpec::standard(RunVar::ContinuousUniform, 0.5, 1.0, 0.2);
        let s = draw_dgp_rep(&spec, 5, 1);
        let h = 0.4;
        let naive = dm_ci_naive(&s, &cfg(1.0, 0.2), h).unwrap();
        let mut c0 = cfg(0.0, 0.0);
        c0.fixed_bandwidth = Some(h);
        let ba = dm_ci_bias_aware(&s, &c0, Some(h)).unwrap();
        assert!((naive.ci.0 - ba.ci.0).abs() < 1e-12 && (naive.ci.1 - ba.ci.1).abs() < 1e-12);
        // Linearization at its own plug-in point sums to zero under the weights.
        let wv = weights(&s, &crate::data::FitSpec::local_linear(Kernel::Triangular, h)).unwrap();
        assert!(wv.apply(&naive.u_hat).abs() < 1e-9);
        let half = naive.length() / 2.0;
        assert!((half - 1.959964 * naive.sd_u).abs() < 1e-5);
    }

    #[test]
    fn weak_first_stage_is_rejected() {
        let x: Vec<f64> = (0..200).map(|i| -1.0 + (i as f64 + 0.5) / 100.0).collect();
        let y: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let t: Vec<f64> = (0..200)
            .map(|i| if i % 2 == 0 { 0.5 } else { 0.5 + 1e-6 * (i % 3) as f64 })
            .collect();
        let s = Sample::new(x, y, t).unwrap();
        let mut c = cfg(1.0, 0.0);
        c.fixed_bandwidth = Some(0.9);
        match dm_ci_bias_aware(&s, &c, Some(0.9)) {
            Err(Error::WeakIdentification { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
