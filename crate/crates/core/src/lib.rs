//! Off-policy policy evaluation laboratory for gradient expected-Sarsa
//! learning with eligibility traces and linear function approximation.
//!
//! The crate splits into five layers:
//!
//! * [`mdp`] / [`features`] — finite MDPs, policies, state-action pair
//!   enumeration, stationary distributions, and feature maps;
//! * [`analysis`] — the key matrices (A, b, M), the projected-Bellman
//!   objective, TD fixed points, spectral stability with verified safe step
//!   sizes, linear-rate constants, and Lyapunov diagnostics;
//! * [`learners`] — the online stochastic learner, the deterministic
//!   saddle-point iteration, the expected off-line update, step-size
//!   schedules, averaged iterates, and the primal-dual gap;
//! * [`envs`] — the two-state counterexample, the seven-state star, and
//!   mountain-car with grid tile coding, all as seeded transition streams;
//! * [`harness`] — experiment configs, step-size sweeps, Monte-Carlo
//!   estimation, CSV/SVG emission, and the divergence demonstration.

pub mod analysis;
pub mod envs;
pub mod error;
pub mod features;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod mdp;

pub use error::{Error, Result};
