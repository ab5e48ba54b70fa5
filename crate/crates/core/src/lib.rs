//! Phase-field damage and fatigue simulation of a tensile specimen, with the
//! machinery to turn virtual-sensor damage histories into labeled patterns and
//! classify failure presence and location.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`mesh`] builds the dog-bone specimen, its triangle mesh and the sensor layout.
//! * [`constitutive`] and [`assembly`] provide the material laws and the global
//!   finite element operators.
//! * [`timestepper`] advances displacement, damage and fatigue with the staggered
//!   semi-implicit scheme.
//! * [`sensing`] and [`labeling`] produce pattern matrices and label vectors.
//! * [`classify`] holds k-NN, the feed-forward network and the evaluation tools.
//! * [`uq`] runs Monte Carlo accuracy studies under algorithmic and data noise.

pub mod assembly;
pub mod cases;
pub mod classify;
pub mod constitutive;
pub mod error;
pub mod io;
pub mod labeling;
pub mod mesh;
pub mod sensing;
pub mod sparse;
pub mod timestepper;
pub mod uq;

pub use error::{Error, Result};
