//! Stability certificates for linear time-delay systems
//! `ẋ(t) = A x(t) + A_d x(t − h)`.
//!
//! Two complementary routes are provided:
//!
//! * **sufficiency** — the Bessel–Legendre LMI hierarchy of order `n`
//!   ([`lmi`]), solved by a small interior-point SDP solver, with delay
//!   bisection and `(λ, h)` region sweeps;
//! * **necessity** — certificates built analytically from the delay Lyapunov
//!   matrix `U(θ)` ([`lyapunov`], [`converse`]), together with the explicit
//!   order `N*` beyond which the LMIs are guaranteed feasible for a stable
//!   system.
//!
//! [`spectrum`] is an independent characteristic-root oracle used to check
//! the verdicts of both.

pub mod config;
pub mod converse;
pub mod error;
pub mod format;
pub mod legendre;
pub mod lmi;
pub mod lyapunov;
pub mod model;
pub mod numerics;
pub mod spectrum;

pub mod cli;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use numerics::Matrix;
