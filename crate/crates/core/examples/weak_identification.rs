//! The set shapes that appear as the first stage weakens: a bounded interval,
//! the complement of an interval, and the whole line.

use honest_frd::data::{AnalysisConfig, SmoothnessBounds};
use honest_frd::inversion::compute_cs_fixed_h;
use honest_frd::simulate::{draw_dgp, DgpSpec, RunVar};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        ("strong", 0.5, 1.0, 0.2),
        ("weak", 0.05, 0.3, 0.2),
        ("none", 0.0, 0.0, 20.0),
    ];
    for (label, tau_t, tau_y, b_t) in cases {
        let mut spec = DgpSpec::standard(RunVar::ContinuousUniform, tau_t, 1.0, 0.2);
        spec.tau_y = tau_y;
        let s = draw_dgp(&spec, 0);
        let cfg = AnalysisConfig::new(SmoothnessBounds::new(1.0, b_t));
        let cs = compute_cs_fixed_h(&s, &cfg, 0.5)?;
        let t = &cs.tau_t_ci;
        println!(
            "{label:>6}: first stage [{:.3}, {:.3}] -> {:?} {:?}",
            t.lower,
            t.upper,
            cs.shape,
            cs.pieces()
        );
    }
    Ok(())
}
