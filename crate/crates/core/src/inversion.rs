//! Anderson-Rubin confidence sets by inverting the auxiliary jump test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{BandwidthPath, BandwidthResult, Candidate};
use crate::data::{apply_donut, AnalysisConfig, CGrid, Dep, Sample, SmoothnessBounds};
use crate::error::{Error, Result};
use crate::folded_normal::CriticalValue;
use crate::moments::{nn_variances, NnVarianceComponents};
use crate::roots::brent;

/// Statistic, bias bound, bandwidth and pseudo p-value at one candidate `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxInference {
    pub c: f64,
    pub tau_hat: f64,
    pub sd: f64,
    pub bias_bound: f64,
    pub ratio: f64,
    pub h_used: f64,
    /// `1 - alpha - F(|tau_hat/sd|, ratio)`; `c` is in the set iff this is `>= 0`.
    pub p_value: f64,
}

/// Bias-aware interval for the jump in one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrdCi {
    pub dep: Dep,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub sd: f64,
    pub bias_bound: f64,
    pub ratio: f64,
    pub cv: f64,
    pub bandwidth: BandwidthResult,
}

impl SrdCi {
    pub fn half_length(&self) -> f64 {
        self.cv * self.sd
    }
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `[a1, a2]`
    Interval,
    /// `(-inf, a1] U [a2, inf)`
    ComplementOfInterval,
    RealLine,
    /// `(-inf, a1]`
    HalfLineLeft,
    /// `[a1, inf)`
    HalfLineRight,
    /// `[a1, a2] U [a3, a4] U ...`; arises only with a data-dependent bandwidth.
    UnionOfIntervals,
    /// `(-inf, a1] U [a2, a3] U ... U [aS, inf)`
    UnionWithTails,
}

impl Shape {
    fn left_tail(self) -> bool {
        matches!(
            self,
            Shape::ComplementOfInterval | Shape::RealLine | Shape::HalfLineLeft | Shape::UnionWithTails
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub shape: Shape,
    pub endpoints: Vec<f64>,
    pub alpha: f64,
    pub diagnostics: Vec<AuxInference>,
    pub tau_t_ci: SrdCi,
    /// Grid actually used, after any expansions.
    pub c_grid: CGrid,
    pub expansions: usize,
}

impl ConfidenceSet {
    /// Closed pieces, with infinite ends for unbounded ones.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.endpoints.len() + 2);
        if self.shape.left_tail() {
            pts.push(f64::NEG_INFINITY);
        }
        pts.extend_from_slice(&self.endpoints);
        if pts.len() % 2 == 1 {
            pts.push(f64::INFINITY);
        }
        pts.chunks(2).map(|p| (p[0], p[1])).collect()
    }

    pub fn contains(&self, c: f64) -> bool {
        self.pieces().iter().any(|&(a, b)| a <= c && c <= b)
    }

    /// Total length; infinite for unbounded sets.
    pub fn length(&self) -> f64 {
        self.pieces().iter().map(|(a, b)| b - a).sum()
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.shape, Shape::Interval | Shape::UnionOfIntervals)
    }
}

/// Sample, variance estimates and bandwidth path prepared once, so that the
/// pseudo p-value can be evaluated cheaply at many `c`.
#[derive(Debug, Clone)]
pub struct ArPipeline {
    sample: Sample,
    cfg: AnalysisConfig,
    path: BandwidthPath,
    cvs: CriticalValue,
    nv: NnVarianceComponents,
    naive: bool,
    /// Statistics evaluated at a multiple of the chosen bandwidth.
    rescaled: Option<(f64, Vec<Option<Candidate>>)>,
}

impl ArPipeline {
    /// Bandwidth chosen separately at every `c` (or `cfg.fixed_bandwidth`).
    pub fn new(s: &Sample, cfg: &AnalysisConfig) -> Result<ArPipeline> {
        ArPipeline::build(s, cfg, cfg.fixed_bandwidth)
    }

    /// One bandwidth `h` for every `c`.
    pub fn with_fixed_h(s: &Sample, cfg: &AnalysisConfig, h: f64) -> Result<ArPipeline> {
        ArPipeline::build(s, cfg, Some(h))
    }

    fn build(s: &Sample, cfg: &AnalysisConfig, fixed: Option<f64>) -> Result<ArPipeline> {
        cfg.validate()?;
        let sample = match &cfg.donut {
            Some(ex) if !ex.is_empty() => apply_donut(s, ex)?.0,
            _ => s.clone(),
        };
        sample.require_both_sides()?;
        let nv = nn_variances(&sample, cfg.r_neighbors)?;
        let path = BandwidthPath::build(&sample, &cfg.fit, Some(&nv), cfg.max_candidates, cfg.eta, fixed)?;
        Ok(ArPipeline {
            sample,
            cfg: cfg.clone(),
            path,
            cvs: CriticalValue::new(cfg.alpha)?,
            nv,
            naive: false,
            rescaled: None,
        })
    }

    /// Bandwidths are still chosen with the bias bounds, but the critical
    /// value ignores bias.
    pub fn naive(mut self) -> ArPipeline {
        self.naive = true;
        self
    }

    /// Statistics are evaluated at `factor` times the chosen bandwidth.
    pub fn rescaled(mut self, factor: f64) -> Result<ArPipeline> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(crate::error::invalid(format!(
                "bandwidth factor must be positive, got {factor}"
            )));
        }
        let cands = self.path.rescaled(&self.sample, &self.cfg.fit, Some(&self.nv), factor);
        self.rescaled = Some((factor, cands));
        Ok(self)
    }

    fn eval_candidate(&self, i: usize) -> Result<&Candidate> {
        match &self.rescaled {
            None => Ok(&self.path.cands[i]),
            Some((factor, cands)) => match &cands[i] {
                Some(k) => Ok(k),
                None => {
                    // Recompute the weights only to report why they fail.
                    let fit = self.cfg.fit.with_h(self.path.cands[i].h * factor);
                    Err(crate::local_poly::weights(&self.sample, &fit)
                        .err()
                        .unwrap_or(Error::NoValidBandwidth))
                }
            },
        }
    }

    fn ratio_for_cv(&self, ratio: f64) -> f64 {
        if self.naive {
            0.0
        } else {
            ratio
        }
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.cfg
    }

    pub fn variances(&self) -> &NnVarianceComponents {
        &self.nv
    }

    pub(crate) fn bandwidth_path(&self) -> &BandwidthPath {
        &self.path
    }

    pub fn bandwidth_at(&self, c: f64) -> Result<BandwidthResult> {
        Ok(self.path.optimize(&self.cfg.bounds, &self.cvs, c)?.1)
    }

    /// Pseudo p-value and its ingredients at `c`.
    pub fn p_hat(&self, c: f64) -> Result<AuxInference> {
        Ok(self.p_hat_hinted(c, None)?.0)
    }

    fn p_hat_hinted(&self, c: f64, hint: Option<usize>) -> Result<(AuxInference, usize)> {
        let i = self.path.choose(&self.cfg.bounds, &self.cvs, c, hint)?;
        Ok((self.aux_at(i, &self.cfg.bounds, c)?, i))
    }

    fn aux_at(&self, i: usize, bounds: &SmoothnessBounds, c: f64) -> Result<AuxInference> {
        let k = self.eval_candidate(i)?;
        let tau = k.tau(c);
        let sd = k.sd(c);
        let bias = k.bias(bounds, c);
        let ratio = bias / sd;
        Ok(AuxInference {
            c,
            tau_hat: tau,
            sd,
            bias_bound: bias,
            ratio,
            h_used: k.h,
            p_value: self.cvs.p_value(tau / sd, self.ratio_for_cv(ratio)),
        })
    }

    /// Bias-aware interval for the jump in `dep`, at its own length-minimizing bandwidth.
    pub fn srd_ci(&self, dep: Dep) -> Result<SrdCi> {
        let (i, bw) = self.path.optimize_dep(&self.cfg.bounds, &self.cvs, dep)?;
        let k = self.eval_candidate(i)?;
        let sd = k.dep_sd(dep);
        let bias = k.dep_bias(&self.cfg.bounds, dep);
        let ratio = bias / sd;
        let cv = self.cvs.at(self.ratio_for_cv(ratio));
        let est = k.dep_tau(dep);
        Ok(SrdCi {
            dep,
            estimate: est,
            lower: est - cv * sd,
            upper: est + cv * sd,
            sd,
            bias_bound: bias,
            ratio,
            cv,
            bandwidth: bw,
        })
    }

    /// Runs the grid search, root refinement and shape classification.
    pub fn confidence_set(&self) -> Result<ConfidenceSet> {
        let ci_t = self.srd_ci(Dep::Treatment)?;
        let zero_in = ci_t.contains(0.0);
        let knife = {
            let a = ci_t.estimate.abs();
            let b = ci_t.half_length();
            (a - b).abs() <= 1e-7 * a.max(b).max(f64::MIN_POSITIVE)
        };
        let probe = {
            let k = self.eval_candidate(self.path.optimize_dep(&self.cfg.bounds, &self.cvs, Dep::Treatment)?.0)?;
            (k.tau_t != 0.0).then(|| k.tau_y / k.tau_t)
        };
        let mut grid = self.cfg.c_grid;
        let mut last_roots = Vec::new();
        for expansion in 0..=self.cfg.max_expansions {
            let (roots, in_first) = self.scan(&grid, probe)?;
            if let Some(shape) = classify(roots.len(), in_first, zero_in, knife) {
                let diagnostics = roots.iter().map(|&c| self.p_hat(c)).collect::<Result<Vec<_>>>()?;
                return Ok(ConfidenceSet {
                    shape,
                    endpoints: if shape == Shape::RealLine { Vec::new() } else { roots },
                    alpha: self.cfg.alpha,
                    diagnostics,
                    tau_t_ci: ci_t,
                    c_grid: grid,
                    expansions: expansion,
                });
            }
            last_roots = roots;
            let mid = 0.5 * (grid.low + grid.high);
            let half = grid.high - grid.low;
            grid = CGrid::new(mid - half, mid + half, grid.points * 2);
        }
        Err(Error::Classification {
            expansions: self.cfg.max_expansions,
            roots: last_roots,
            ci_lo: ci_t.lower,
            ci_hi: ci_t.upper,
        })
    }

    /// Sign changes of the pseudo p-value on the grid, refined by Brent's method.
    fn scan(&self, grid: &CGrid, probe: Option<f64>) -> Result<(Vec<f64>, bool)> {
        let mut cs = grid.values();
        if let Some(p) = probe.filter(|p| *p > grid.low && *p < grid.high) {
            cs.push(p);
            cs.sort_by(f64::total_cmp);
        }
        // Neighboring c values share good bandwidths, so each chunk runs in
        // order and passes its last choice on as a hint.
        let chunks: Vec<Vec<(f64, usize)>> = cs
            .par_chunks(16)
            .map(|chunk| {
                let mut hint = None;
                chunk
                    .iter()
                    .map(|&c| {
                        let (a, i) = self.p_hat_hinted(c, hint)?;
                        hint = Some(i);
                        Ok((a.p_value, i))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let evals: Vec<(f64, usize)> = chunks.into_iter().flatten().collect();
        let vals: Vec<f64> = evals.iter().map(|e| e.0).collect();
        let mut roots = Vec::new();
        for j in 0..cs.len() - 1 {
            let (a, b) = (vals[j] >= 0.0, vals[j + 1] >= 0.0);
            if a != b {
                let hint = Some(evals[j].1);
                let xtol = 1e-12 * (1.0 + cs[j].abs().max(cs[j + 1].abs()));
                let r = brent(
                    |c| self.p_hat_hinted(c, hint).map(|v| v.0.p_value),
                    cs[j],
                    cs[j + 1],
                    vals[j],
                    vals[j + 1],
                    xtol,
                    0.0,
                )?;
                roots.push(r);
            }
        }
        Ok((roots, vals[0] >= 0.0))
    }
}

fn classify(s: usize, in_first: bool, zero_in: bool, knife: bool) -> Option<Shape> {
    match s {
        0 if zero_in && in_first => Some(Shape::RealLine),
        2 if zero_in && in_first => Some(Shape::ComplementOfInterval),
        2 if !zero_in && !in_first => Some(Shape::Interval),
        1 if knife => Some(if in_first {
            Shape::HalfLineLeft
        } else {
            Shape::HalfLineRight
        }),
        s if s >= 4 && s % 2 == 0 && zero_in && in_first => Some(Shape::UnionWithTails),
        s if s >= 4 && s % 2 == 0 && !zero_in && !in_first => Some(Shape::UnionOfIntervals),
        _ => None,
    }
}

/// Pseudo p-value at `c` with the bandwidth chosen for that `c`.
pub fn p_hat(s: &Sample, nv: &NnVarianceComponents, cfg: &AnalysisConfig, c: f64) -> Result<AuxInference> {
    cfg.validate()?;
    let path = BandwidthPath::from_config(s, nv, cfg)?;
    let cvs = CriticalValue::new(cfg.alpha)?;
    let (i, _) = path.optimize(&cfg.bounds, &cvs, c)?;
    let k = &path.cands[i];
    let (tau, sd, bias) = (k.tau(c), k.sd(c), k.bias(&cfg.bounds, c));
    Ok(AuxInference {
        c,
        tau_hat: tau,
        sd,
        bias_bound: bias,
        ratio: bias / sd,
        h_used: k.h,
        p_value: cvs.p_value(tau / sd, bias / sd),
    })
}

/// Confidence set with the bandwidth re-optimized at each `c`.
pub fn compute_cs(s: &Sample, cfg: &AnalysisConfig) -> Result<ConfidenceSet> {
    ArPipeline::new(s, cfg)?.confidence_set()
}

/// Confidence set with one bandwidth for all `c`.
pub fn compute_cs_fixed_h(s: &Sample, cfg: &AnalysisConfig, h: f64) -> Result<ConfidenceSet> {
    ArPipeline::with_fixed_h(s, cfg, h)?.confidence_set()
}

/// Bias-aware interval for the jump in the outcome or the treatment.
pub fn srd_ci(s: &Sample, dep: Dep, cfg: &AnalysisConfig) -> Result<SrdCi> {
    ArPipeline::new(s, cfg)?.srd_ci(dep)
}
