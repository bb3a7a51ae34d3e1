//! Special functions, finite differences, random streams and Adam.

mod adam;
mod finite_diff;
mod rng;
pub mod special;

pub use adam::{adam_step, AdamState};
pub use finite_diff::{central_diff, finite_diff_divergence, finite_diff_divergence_many, gradient, FiniteDiffConfig};
pub use rng::RngStream;
pub use special::{
    erf, erfc, erfcx, ln_radial_cdf, ln_std_normal_cdf, log_sum_exp, radial_cdf, std_normal_cdf, std_normal_pdf, std_normal_sf,
};
