//! Core algorithms for a 5G NR downlink SISO-OFDM channel-estimation workbench.
//!
//! The crate covers the full desk-scale pipeline, IO excluded:
//!
//! * [`grid`] — resource-grid geometry (51 PRB x 14 symbols by default) and
//!   seeded QPSK pilot patterns on the DM-RS positions.
//! * [`chansim`] — tapped-delay-line Rayleigh fading (3GPP TR 38.901 TDL-A..E
//!   tables), analytic frequency response, AWGN application, and sample
//!   synthesis for dataset generation.
//! * [`estimators`] — least-squares estimation at pilots, separable 2D linear
//!   interpolation, and a delay-domain denoising ("practical") estimator with
//!   a built-in noise-power estimate.
//! * [`graph`] — k-nearest-pilot graph construction over the grid.
//! * [`gnn`] — a small three-layer GraphSAGE-style network with a pooled
//!   noise-regression head, hand-written backpropagation, and Adam. No
//!   external ML framework is involved.
//! * [`modem`] — Gray-mapped 16QAM and per-RE MMSE equalization for
//!   link-level evaluation.
//!
//! Everything is deterministic given explicit seeds; see [`rng`] for the seed
//! derivation scheme. The crate is `no_std`-compatible (`alloc` required):
//! disable the default `std` feature to use it in freestanding builds.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod chansim;
pub mod estimators;
pub mod flt;
pub mod gnn;
pub mod graph;
pub mod grid;
pub mod modem;
pub mod rng;
pub mod tdl;

pub use num_complex::Complex64;
