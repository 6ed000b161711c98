//! Fitting asymptotically stable reduced-order rational transfer functions to
//! SISO frequency-response data.
//!
//! The crate implements a real-valued variant of the AAA greedy rational
//! approximation loop together with a convex stability-enforcement step:
//! when the unconstrained fit has unstable poles, a small semidefinite
//! program projects the barycentric weights onto the set of weights whose
//! denominator is minimum phase, which guarantees stable model poles.
//!
//! Modules:
//! * [`data`] — dataset ingestion, normalization, error metrics
//! * [`barycentric`] — the conjugate-symmetric barycentric model, its
//!   state-space realizations, poles/zeros and pole-residue form
//! * [`loewner`] — Loewner and real quasi-Loewner matrices, Loewner ROM baseline
//! * [`aaa`] — the greedy fitting loop with enforced realness
//! * [`stability`] — denominator realizations, stability classification,
//!   strict-positive-realness certificates
//! * [`sdp`] — the stability-enforcement semidefinite program and a dense
//!   primal-dual interior-point solver for it
//! * [`stabaaa`] — the outer loop combining all of the above, plus the
//!   truncate-and-refit baseline
//! * [`synth`] — deterministic synthetic test systems

pub mod aaa;
pub mod barycentric;
pub mod data;
mod eig;
pub mod error;
pub mod loewner;
pub mod sdp;
pub mod stabaaa;
pub mod stability;
pub mod synth;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
