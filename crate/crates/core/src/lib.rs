//! Max-min throughput optimization for a two-user wireless powered
//! communication network in which the near user relays the far user's
//! message, optionally receiving it by backscatter during energy transfer.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: physical parameters, path-loss gains and the energy ledger.
//! - [`link`]: erfc, energy-detector BER, BSC capacity and backscatter rate.
//! - [`rates`]: per-link achievable rates in perspective form, schedule
//!   evaluation and feasibility reports.
//! - [`solver`]: bisection over the common rate with a log-barrier Newton
//!   phase-1 feasibility test.
//! - [`oracle`]: brute-force grid search used to cross-check the solver.
//! - [`mcsim`]: Monte Carlo simulation of the backscatter energy detector.

// `!(x > y)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod link;
pub mod mcsim;
pub mod model;
pub mod oracle;
pub mod rates;
pub mod solver;

pub use error::{Error, Result};
pub use link::{backscatter_ber, backscatter_rate, bsc_capacity, erfc, Ber, BerInputs};
pub use mcsim::{ber_curve, simulate_ber, BerRow, DetectorRun};
pub use model::{
    active_power_p3, channel_gain, energy_budget, gains_from_geometry, harvest_phase1,
    harvest_phase2, ActivePower, ChannelGains, EnergySplit, Geometry, SystemParams,
    TimeAllocation,
};
pub use oracle::{cross_validate, grid_solve, CrossReport, CrossRow, GridResult};
pub use rates::{
    compose_r1, evaluate, feasible, rate_r12, rate_r13, rate_relay, rate_wd2, ConstantsRho,
    PerspectiveRate, RateReport, SchemeKind, Violations,
};
pub use solver::{
    objective_upper_bound, recover_powers, solve, solve_all_schemes, Diagnostics,
    PowerAllocation, Solution, SolverOptions, Status,
};
