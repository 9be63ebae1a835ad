//! Rule-of-thumb bounds and the constrained fits that show what a bound
//! allows. Writes CSV and SVG files to a temporary directory.

use honest_frd::data::Dep;
use honest_frd::simulate::{draw_dgp, DgpSpec, RunVar};
use honest_frd::smoothness::{extreme_function, rot1, rot2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = draw_dgp(&DgpSpec::standard(RunVar::ContinuousUniform, 0.5, 10.0, 0.2), 3);
    for dep in [Dep::Outcome, Dep::Treatment] {
        let (a, b) = (rot1(&s, dep)?, rot2(&s, dep)?);
        println!(
            "{dep:?}: ROT1 {:.3} (R2 {:.3}/{:.3}), ROT2 {:.3}",
            a.value, a.fit_r2.left, a.fit_r2.right, b.value
        );
    }

    let dir = std::env::temp_dir().join("honest_frd_extreme");
    std::fs::create_dir_all(&dir)?;
    for bound in [0.0, 1.0, 10.0, 50.0] {
        let e = extreme_function(&s, Dep::Outcome, bound, 0.1, 20)?;
        let stem = dir.join(format!("extreme_y_b{bound}"));
        e.write_csv(&stem.with_extension("csv"))?;
        std::fs::write(
            stem.with_extension("svg"),
            e.svg(&s, Dep::Outcome, &format!("B = {bound}")),
        )?;
        println!(
            "B = {bound:>4}: RSS {:.2}, f'' next to the cutoff {:.2} / {:.2}",
            e.rss,
            e.second_derivative(-0.1),
            e.second_derivative(0.1)
        );
    }
    println!("plots in {}", dir.display());
    Ok(())
}
