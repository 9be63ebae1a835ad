//! Bias-aware inference for fuzzy regression discontinuity and kink designs.
//!
//! The ratio of the outcome and treatment jumps at the cutoff is inverted
//! from a test of `tau_Y - c tau_T = 0` that accounts for the worst-case bias
//! of local polynomial estimates under bounds on the second (or higher)
//! derivatives. The resulting confidence sets stay valid when the first
//! stage is weak, and can be unbounded.
//!
//! ```no_run
//! use honest_frd::data::{AnalysisConfig, SmoothnessBounds};
//! use honest_frd::inversion::compute_cs;
//! use honest_frd::simulate::{draw_dgp, DgpSpec, RunVar};
//!
//! let s = draw_dgp(&DgpSpec::standard(RunVar::ContinuousUniform, 0.5, 1.0, 0.2), 1);
//! let cs = compute_cs(&s, &AnalysisConfig::new(SmoothnessBounds::new(1.0, 0.2))).unwrap();
//! println!("{:?} {:?}", cs.shape, cs.pieces());
//! ```

pub mod bandwidth;
pub mod cli;
pub mod data;
pub mod dm;
pub mod error;
pub mod folded_normal;
pub mod inversion;
pub mod linalg;
pub mod local_poly;
pub mod moments;
pub mod plot;
pub mod rkd;
pub mod roots;
pub mod simulate;
pub mod smoothness;
