//! Deviation rates for the number of weak records of left- and
//! right-continuous integer random walks.
//!
//! A weak record is a time `m` with `S_m ≥ max(S_0, …, S_{m-1})`. For a
//! critical skip-free walk the record count `A_n` is a renewal process whose
//! inter-record times have infinite mean. This crate computes
//!
//! * the large-deviation rate of `P(A_n ≥ x n)` through the Legendre
//!   transform of the log moment generating function of the renewal time
//!   ([`rates`]),
//! * the moderate-deviation constants and rates ([`rates::mdp_constants`]),
//! * exact finite-`n` distributions of `A_n` by two independent routes
//!   ([`oracle`]), and
//! * Monte Carlo estimates with reproducible parallel streams ([`montecarlo`]).

pub mod cli;
pub mod error;
pub mod fixed_point;
pub mod law;
pub mod montecarlo;
pub mod output;
pub mod oracle;
pub mod rates;
pub mod series;
pub mod verify;

pub use error::{Error, Result};
pub use law::{IncrementLaw, LawSpec, Orientation};
pub use series::SeriesPoly;
