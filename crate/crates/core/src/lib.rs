//! Finite-size-free security analysis of twin-field quantum key distribution
//! with four-intensity decoy states, plus a stochastic model of the phase
//! stabilization loop that makes the interference usable in practice.

pub mod channel;
pub mod decoy;
pub mod error;
pub mod keyrate;
pub mod leakage;
pub mod phasesim;
pub mod photonics;
pub mod simplex;

pub use channel::{ChannelParams, DecoyYields, IntensityPair, IntensitySchedule, Level};
pub use error::{Error, Result};
pub use photonics::{CountPair, PhotonIntensity, Probability};
