//! Channel models and capacity bounds for diffusion-based molecular
//! communication.
//!
//! The crate is organised around five groups of functionality:
//!
//! - [`diffusion`]: Green's functions of free diffusion, first-hitting-time
//!   laws (Lévy and inverse Gaussian), slot hitting probabilities and a
//!   seeded Brownian first-passage simulator.
//! - [`channels`]: finite discrete memoryless channels, the LTI-Poisson
//!   channel with intersymbol interference, the linear Gaussian model and
//!   the ligand-receptor binomial channel.
//! - [`capacity`]: mutual information, Blahut–Arimoto, the symmetrized KL
//!   upper bound, Topsøe's bound, i.i.d. single-letter lower bounds and the
//!   block-memoryless sandwich for channels with finite memory.
//! - [`cascade`]: cascades of identical memoryless channels: communicating
//!   classes and periods, limiting capacity, strong data processing
//!   envelopes and zero-error signaling.
//! - [`timing`]: the delay-selector channel and additive inverse Gaussian
//!   noise (AIGN) bounds.
//!
//! All information quantities are in nats unless a function name says
//! otherwise.
//!
//! ```
//! use molcap::channels::make_bsc;
//! use molcap::capacity::{blahut_arimoto, BaOptions};
//!
//! let bsc = make_bsc(0.1).unwrap();
//! let ba = blahut_arimoto(&bsc, &BaOptions::default(), None).unwrap();
//! let bits = ba.capacity / std::f64::consts::LN_2;
//! assert!((bits - 0.531_004_406).abs() < 1e-8);
//! ```

pub mod capacity;
pub mod cascade;
pub mod channels;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod math;
pub mod quad;
pub mod stats;
pub mod timing;

pub use error::{Error, Result};
