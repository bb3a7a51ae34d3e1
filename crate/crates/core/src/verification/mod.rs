//! Oracles the estimators are judged against: transport residuals, boundary
//! decay, closed-form expectation gradients and unbiasedness z-tests.

mod decay;
mod oracle;
mod residual;
mod ztest;

pub use decay::{boundary_decay_probe, DecayProfile, RayFrame, VANISHING_FLUX};
pub use oracle::{analytic_grad_oracle, AnalyticGradient};
pub use residual::{null_residual, transport_residual, transport_residuals, ResidualReport, RESIDUAL_FLOOR};
pub use ztest::{unbiasedness_ztest, ztest_from_moments, ZTestReport, Z_THRESHOLD};
