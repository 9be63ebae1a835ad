//! How the confidence set moves with the smoothness bounds.

use honest_frd::data::{AnalysisConfig, SmoothnessBounds};
use honest_frd::inversion::compute_cs;
use honest_frd::simulate::{draw_dgp, DgpSpec, RunVar};

fn main() {
    let s = draw_dgp(&DgpSpec::standard(RunVar::ContinuousUniform, 0.5, 1.0, 0.2), 7);
    let bys = [0.5, 1.0, 2.0, 5.0];
    print!("{:>6}", "B_T");
    for by in bys {
        print!("{:>24}", format!("B_Y = {by}"));
    }
    println!();
    for bt in [0.1, 0.2, 1.0, 5.0] {
        print!("{bt:>6}");
        for by in bys {
            let cell = match compute_cs(&s, &AnalysisConfig::new(SmoothnessBounds::new(by, bt))) {
                Ok(cs) if cs.is_bounded() => format!("[{:.2}, {:.2}]", cs.endpoints[0], cs.endpoints[1]),
                Ok(cs) => format!("{:?}", cs.shape),
                Err(e) => format!("error: {e}"),
            };
            print!("{cell:>24}");
        }
        println!();
    }
}
