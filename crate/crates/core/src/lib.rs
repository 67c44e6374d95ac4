//! Adaptive Bayesian tomography of a single qubit.
//!
//! States live in the Bloch ball as Stokes vectors. A particle filter tracks
//! the posterior, [`design`] picks the next measurement by expected
//! information gain, and [`simlab`] stands in for the optical apparatus.

pub mod design;
pub mod error;
pub mod inference;
pub mod likelihood;
pub mod numerics;
pub mod priors;
pub mod qubit;
pub mod runner;
pub mod simlab;
pub mod waveplate;

pub use design::{block_size, info_gain, CandidateConfig, MubAlignment, Selector, Strategy};
pub use error::{Result, TomoError};
pub use inference::{FilterConfig, Particle, Posterior, PosteriorSnapshot};
pub use likelihood::{outcome_probs, NoiseModel, OutcomeCounts};
pub use priors::{sample_prior, PriorKind};
pub use qubit::{
    born_probs, bures_distance, fidelity, MeasurementConfig, Povm, QubitState, SphereCoord,
};
pub use runner::fit::{fit_power_law, PowerLawFit};
pub use simlab::{Apparatus, EventRecord};
