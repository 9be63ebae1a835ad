//! Small Monte Carlo comparison of several constructions, plus coverage of
//! wrong ratio values (power). Pass the replication count as an argument.

use honest_frd::simulate::{coverage_study_with, preset, Method, StudyOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let spec = preset("table1-row1")?;
    let methods = [
        Method::ArTrue,
        Method::ArRot1,
        Method::ArNaive,
        Method::DmTrue,
        Method::DmNaive,
    ];
    let report = coverage_study_with(&spec, &methods, &StudyOptions::new(reps, 1))?;
    println!(
        "{:<10}{:>10}{:>10}{:>14}{:>10}",
        "method", "coverage", "mc se", "median len", "failed"
    );
    for m in &report.methods {
        println!(
            "{:<10}{:>10.3}{:>10.3}{:>14.3}{:>10}",
            m.method,
            m.coverage[0],
            m.mc_se[0],
            m.median_length.unwrap_or(f64::NAN),
            m.failures
        );
    }

    let mut opts = StudyOptions::new(reps, 2);
    opts.lengths = false;
    opts.theta_grid = Some((0..=8).map(|k| k as f64 * 0.5).collect());
    let power = coverage_study_with(&spec, &[Method::ArTrue], &opts)?;
    let cov = &power.method(Method::ArTrue).expect("requested").coverage;
    for (th, c) in power.thetas.iter().zip(cov) {
        println!("theta {th:>4}: covered {c:.3}");
    }
    Ok(())
}
