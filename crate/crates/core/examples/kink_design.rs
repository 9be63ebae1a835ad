//! Regression kink design: the ratio of slope changes, with bounds on the
//! third derivative and a local quadratic fit.

use honest_frd::data::{AnalysisConfig, Kernel, Sample, SmoothnessBounds};
use honest_frd::rkd::{beta_vp, rkd_cs, RkdSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let n = 3000;
    let (mut x, mut y, mut t) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let v: f64 = r.gen_range(-1.0..1.0);
        let (e, u): (f64, f64) = (r.sample(StandardNormal), r.sample(StandardNormal));
        x.push(v);
        y.push(0.5 * v + 0.6 * v.max(0.0) + 0.05 * e);
        t.push((0.5 + 0.1 * v + 0.2 * v.max(0.0) + 0.02 * u).clamp(0.0, 1.0));
    }
    let s = Sample::new(x, y, t)?;

    let spec = RkdSpec::kink(SmoothnessBounds::new(1.0, 0.5));
    let cs = rkd_cs(&s, &AnalysisConfig::new(spec.bounds), &spec)?;
    println!("kink ratio (true 3): {:?} {:?}", cs.shape, cs.pieces());

    // The bias bound rests on the sign of this coefficient.
    let chi: Vec<f64> = (1..=40).map(|k| k as f64 / 40.0).collect();
    for tt in [0.0, 0.25, 0.5, 0.9] {
        println!(
            "beta_12({tt}) = {:+.5}",
            beta_vp(tt, &chi, 1.0, Kernel::Triangular, 1, 2)?
        );
    }
    Ok(())
}
