//! Critical values of the folded normal as the bias-to-sd ratio grows.

use honest_frd::folded_normal::{folded_cdf, CriticalValue};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for alpha in [0.1, 0.05, 0.01] {
        let cv = CriticalValue::new(alpha)?;
        print!("alpha {alpha:<5}");
        for r in [0.0, 0.25, 0.5, 1.0, 2.0, 5.0] {
            let c = cv.at(r);
            debug_assert!((folded_cdf(c, r)? - (1.0 - alpha)).abs() < 1e-8);
            print!("  cv({r}) = {c:.4}");
        }
        println!();
    }
    Ok(())
}
