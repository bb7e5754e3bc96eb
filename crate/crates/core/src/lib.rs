//! Cross-dataset bias analysis.
//!
//! The crate is organised the way an experiment flows:
//!
//! * [`data`] holds samples, datasets, normalisation, splitting, CSV ingestion
//!   and a seeded multi-domain generator.
//! * [`linear`] is the deterministic max-margin learner everything else builds on.
//! * [`debias`] learns a shared visual-world model plus per-dataset offsets.
//! * [`adapt`] contains subspace alignment, the geodesic flow kernel, landmark
//!   selection, the domain adaptation machine, latent-domain discovery and
//!   self-labeling.
//! * [`metrics`] computes %Drop, CD, AP and recognition rates, and runs the
//!   name-the-dataset, cross-dataset and noisy-source protocols.

pub mod adapt;
pub mod data;
pub mod debias;
mod error;
pub mod linalg;
pub mod linear;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};
