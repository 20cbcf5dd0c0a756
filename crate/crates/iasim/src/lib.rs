//! Closed-form interference alignment (IA) for the 3-user square MIMO
//! interference channel, evaluated under *distributed* channel state
//! information: each transmitter holds its own imperfect estimate of the
//! whole multi-user channel and computes its precoder alone.
//!
//! The crate is organized as a small stack:
//!
//! - [`numkit`] — dense complex-matrix kernel (products, inverses, general
//!   eigendecomposition, orthonormal complements, chordal distances).
//! - [`channel`] — Rayleigh multi-user channel generation and the
//!   unit-norm / phase-canonical link normalization.
//! - [`csit`] — per-transmitter CSI models: random vector quantization,
//!   the Gaussian-perturbation surrogate, and the bit/SNR scaling laws.
//! - [`ia3`] — the closed-form 3-user IA solver (cascade matrix,
//!   eigenvector precoder, chained precoders, receive filters) and its
//!   distributed per-TX variant.
//! - [`metrics`] — instantaneous rates, interference leakage, precoder
//!   distances and DoF slope fits.
//! - [`harness`] — scenario files, the Monte-Carlo sweep engine, the
//!   experiment suite and CSV/SVG emitters backing the CLI.

pub mod channel;
pub mod csit;
pub mod error;
pub mod harness;
pub mod ia3;
pub mod metrics;
pub mod numkit;
pub mod rng;

pub use error::{Error, Result};
