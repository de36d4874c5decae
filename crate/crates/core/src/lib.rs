//! Link-level simulation library for cell-free massive MIMO with integrated
//! sensing and communication.
//!
//! The crate covers the full uplink chain:
//!
//! * [`sysmodel`]: network drops, three-slope path loss, shadowing and
//!   Rayleigh small-scale fading on a wrapped square.
//! * [`pilots`]: orthonormal pilot bases and the random, greedy and tabu
//!   assignment baselines.
//! * [`manifold`]: pilot design by Riemannian conjugate-gradient ascent of the
//!   uplink sum rate on the complex circle manifold.
//! * [`metrics`]: MMSE channel-estimation statistics, SINR, rates and net
//!   throughput.
//! * [`detection`]: MR, LMMSE, EP and GaBP receivers plus an exhaustive ML
//!   reference and a BER harness.
//! * [`sensing`]: periodic/aperiodic autocorrelation, sidelobe profiles and
//!   matched-filter range profiles.
//!
//! Every random operation takes an explicit RNG; [`seed::derive_seed`] maps a
//! master seed and a trial index to an independent stream.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detection;
pub mod error;
pub mod manifold;
pub mod metrics;
pub mod pilots;
pub mod seed;
pub mod sensing;
pub mod sysmodel;

pub use config::{SinrPower, SystemConfig};
pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used for pilots, channels and Gram matrices.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense real matrix (large-scale fading, rates per drop).
pub type RMatrix = nalgebra::DMatrix<f64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
