//! Fair division of indivisible goods when the allocator only sees noisy
//! estimates of the agents' cardinal values.
//!
//! The crate is organised by algorithm family:
//!
//! - [`valuation`]: valuation matrices, allocations and envy metrics.
//! - [`allocators`]: Round-Robin, observed-welfare maximisation and the
//!   adversarial lower-bound construction.
//! - [`lp`] and [`lp_round`]: a dense two-phase simplex solver and the
//!   min-max-envy linear program followed by randomized rounding.
//! - [`discrepancy`]: online noisy vector balancing, the multicolour tree and
//!   the online envy-minimising allocator built on it.
//! - [`btl`]: Bradley-Terry-Luce comparison simulation, maximum-likelihood
//!   estimation and the estimate-then-Round-Robin pipeline.
//! - [`noise`]: noise models, distribution samplers and the MHR pipeline.
//! - [`statcheck`]: exact finite oracles for the correlation inequalities.
//! - [`oracle`]: brute-force reference implementations used by the
//!   verification harness.
//! - [`rng`]: counter-based, splittable random streams.
//!
//! ```
//! use fairdiv_core::allocators::{round_robin, PickOrder};
//! use fairdiv_core::{envy_report, ValuationMatrix};
//!
//! let estimates =
//!     ValuationMatrix::from_rows(&[vec![0.9, 0.1, 0.5], vec![0.2, 0.8, 0.4]]).unwrap();
//! let alloc = round_robin(&estimates, &PickOrder::identity(2)).unwrap();
//! assert_eq!(alloc.bundle(0), &[0, 2]);
//! let report = envy_report(&estimates, &alloc).unwrap();
//! assert!(report.is_ef1);
//! ```

pub mod allocators;
pub mod btl;
pub mod discrepancy;
pub mod error;
pub mod lp;
pub mod lp_round;
pub mod noise;
pub mod oracle;
pub mod rng;
pub mod statcheck;
pub mod valuation;

pub use error::{FairDivError, Result};
pub use valuation::{
    envy_report, is_balanced, Allocation, EnvyReport, NoisyInstance, ValuationMatrix,
};

/// Absolute tolerance used when classifying envy against zero.
pub const ENVY_TOL: f64 = 1e-9;
