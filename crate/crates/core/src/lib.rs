//! Simulation and analysis toolkit for diffusion-based molecular channels.
//!
//! A message released into a fluid reaches the receiver after a random
//! first-passage time. Messages released in sequence can therefore overtake
//! each other, so the physical channel is a random permutation of the input
//! sequence followed by a noisy receiver. This crate provides:
//!
//! - [`fpt`]: the first-passage-time law of Brownian motion with drift,
//!   release schedules and arrival-time simulation, crossing bounds.
//! - [`permchan`]: the permutation channel induced by arrival order,
//!   restricted to finite windows.
//! - [`receiver`]: finite-alphabet receiver channels, block channels and
//!   the cascade operator that assembles the full molecular channel.
//! - [`infotheory`]: variational and d̄ distances, entropies, mutual
//!   information, quantile capacity and the window/mixing diagnostic scans.
//! - [`coding`]: random block codes, maximum-likelihood decoding and
//!   Monte-Carlo evaluation of coding experiments.
//!
//! Everything random takes an explicit seeded generator. Monte-Carlo loops
//! fan out over fixed-size batches whose generator streams are keyed by the
//! batch index, so results do not depend on the number of worker threads.

pub mod block;
pub mod coding;
pub mod config;
mod error;
pub mod fpt;
pub mod infotheory;
pub mod mc;
pub mod permchan;
pub mod quadrature;
pub mod receiver;
pub mod source;
pub mod transport;

pub use error::{Error, Result};

/// A symbol of a finite alphabet `{0, 1, .., q-1}`.
pub type Symbol = u8;
