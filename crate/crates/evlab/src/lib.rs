//! evlab: a numerical laboratory for laws of rare events in chaotic
//! dynamics. Extreme value laws, extremal indices, compound Poisson cluster
//! statistics, and hitting/return-time laws for piecewise expanding circle
//! and interval maps — deterministic or perturbed by additive noise — are
//! measured three independent ways and cross-checked:
//!
//! 1. Monte Carlo simulation of orbits on an exact integer lattice, so that
//!    billions of steps of an expanding map stay exact (naive f64 iteration
//!    of the doubling map collapses to 0 in ~53 steps);
//! 2. spectral perturbation of Ulam-discretized transfer operators with a
//!    hole (escape-rate route to the extremal index);
//! 3. closed-form predictions from the return geometry of the target point,
//!    in exact rational arithmetic.
//!
//! ```
//! use evlab::exact::rat;
//! use evlab::maps::doubling;
//! use evlab::theory::ei_rychlik_periodic;
//!
//! // The fixed point 0 of x -> 2x mod 1 has |Df| = 2, so half of each
//! // cluster of extremes escapes per step: extremal index 1/2.
//! let map = doubling();
//! assert_eq!(map.derivative(0.0).unwrap(), 2.0);
//! assert_eq!(ei_rychlik_periodic(&rat(2, 1)).unwrap(), rat(1, 2));
//! ```

pub mod cli;
pub mod exact;
pub mod extremes;
pub mod hitting;
pub mod maps;
pub mod report;
pub mod spectral;
pub mod stochastic;
pub mod theory;
pub mod verify;
