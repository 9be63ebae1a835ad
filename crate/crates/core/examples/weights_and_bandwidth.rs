//! Local polynomial weights, the worst-case bias they imply, and the
//! weight-concentration floor on the bandwidth.

use honest_frd::bandwidth::{h_floor, optimize_bandwidth};
use honest_frd::data::{AnalysisConfig, FitSpec, Kernel, Sample, SmoothnessBounds};
use honest_frd::local_poly::{w_ratio, weights};
use honest_frd::moments::{bias_bound, nn_variances};
use honest_frd::simulate::{draw_dgp, DgpSpec, RunVar};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x: Vec<f64> = (1..=50).flat_map(|k| [-0.02 * k as f64, 0.02 * k as f64]).collect();
    let grid = Sample::sharp(x.clone(), vec![0.0; x.len()])?;
    let bounds = SmoothnessBounds::new(1.0, 0.0);
    for h in [0.1, 0.25, 0.5, 1.0] {
        let wv = weights(&grid, &FitSpec::local_linear(Kernel::Triangular, h))?;
        println!(
            "h = {h:<4}  effective n {:>2}+{:<2}  w_ratio {:.4}  bias bound {:.5}",
            wv.effective_n_minus,
            wv.effective_n_plus,
            w_ratio(&wv)?,
            bias_bound(&wv, grid.x(), &bounds, 0.0)?
        );
    }
    let floor = h_floor(&grid, &FitSpec::local_linear(Kernel::Triangular, 1.0), 0.075, 400)?;
    println!(
        "floor at eta = 0.075: {:.3} (feasible: {})",
        floor.h_min, floor.feasible
    );

    let s = draw_dgp(&DgpSpec::standard(RunVar::ContinuousUniform, 0.5, 1.0, 0.2), 1);
    let nv = nn_variances(&s, 5)?;
    let cfg = AnalysisConfig::new(SmoothnessBounds::new(1.0, 0.2));
    for c in [0.0, 2.0, 5.0] {
        let b = optimize_bandwidth(&s, &nv, &cfg, c)?;
        println!(
            "c = {c}: h* {:.3}, floor {:.3}, used {:.3}, half-length {:.4}",
            b.h_star, b.h_min, b.h_used, b.objective
        );
    }
    Ok(())
}
