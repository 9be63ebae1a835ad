//! Confidence sets for the ratio of jumps in `v`-th derivatives (kink designs),
//! and the coefficient `beta_vp` whose sign drives the bias bound.

use serde::{Deserialize, Serialize};

use crate::data::{AnalysisConfig, Bandwidth, FitSpec, Kernel, Sample, Side, SmoothnessBounds, MAX_ORDER};
use crate::error::{invalid, Error, Result};
use crate::inversion::{ArPipeline, ConfidenceSet};
use crate::local_poly::side_weights;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RkdSpec {
    pub v: usize,
    pub p: usize,
    /// Bounds on the `(p+1)`-th derivative.
    pub bounds: SmoothnessBounds,
}

impl RkdSpec {
    /// Kink in the first derivative, local quadratic fit.
    pub fn kink(bounds: SmoothnessBounds) -> RkdSpec {
        RkdSpec { v: 1, p: 2, bounds }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > MAX_ORDER || self.v > self.p || self.p == 0 {
            return Err(invalid(format!(
                "unsupported orders v = {}, p = {} (need 0 <= v <= p <= {MAX_ORDER}, p >= 1)",
                self.v, self.p
            )));
        }
        self.bounds.validate()
    }

    /// `cfg` with this fit order and these bounds.
    pub fn apply(&self, cfg: &AnalysisConfig) -> AnalysisConfig {
        let mut out = cfg.clone();
        out.fit.p = self.p;
        out.fit.v = self.v;
        out.bounds = self.bounds;
        out
    }
}

pub fn rkd_cs(s: &Sample, cfg: &AnalysisConfig, spec: &RkdSpec) -> Result<ConfidenceSet> {
    spec.validate()?;
    ArPipeline::new(s, &spec.apply(cfg))?.confidence_set()
}

pub fn rkd_cs_fixed_h(s: &Sample, cfg: &AnalysisConfig, spec: &RkdSpec, h: f64) -> Result<ConfidenceSet> {
    spec.validate()?;
    ArPipeline::with_fixed_h(s, &spec.apply(cfg), h)?.confidence_set()
}

/// `v`-th derivative at zero of the kernel-weighted order-`p` fit of
/// `1{x >= t} (x - t)^p` on the nonnegative points `chi`, bandwidth `h`.
pub fn beta_vp(t: f64, chi: &[f64], h: f64, kernel: Kernel, v: usize, p: usize) -> Result<f64> {
    let spec = FitSpec {
        kernel,
        p,
        v,
        bandwidth: Bandwidth::Common(h),
    };
    spec.validate()?;
    if chi.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(invalid("beta_vp needs nonnegative finite points"));
    }
    let mut order: Vec<usize> = (0..chi.len()).collect();
    order.sort_by(|&a, &b| chi[a].total_cmp(&chi[b]).then(a.cmp(&b)));
    let w = side_weights(chi, &order, &spec, Side::Right).map_err(|e| match e {
        Error::InsufficientSupport { .. } => {
            Error::RankDeficient("beta_vp: fewer than p+1 distinct points in the window")
        }
        e => e,
    })?;
    Ok(w.iter()
        .map(|&(i, wi)| {
            if chi[i] >= t {
                wi * (chi[i] - t).powi(p as i32)
            } else {
                0.0
            }
        })
        .sum())
}
