//! Euler-discretization errors of Brownian barrier-hitting and extreme
//! events, their weak limits, and Gaussian-walk counterparts.
//!
//! The crate is organised bottom-up:
//!
//! - [`rng`]: seeded shardable streams and primitive samplers;
//! - [`paths`]: mesh paths, Brownian-bridge laws, Bessel(3), reflection maps;
//! - [`events`]: hitting and minimum events on discrete and continuous paths
//!   and the normalized error triplets;
//! - [`limits`]: direct samplers for the limiting laws;
//! - [`walks`]: Gaussian walks coupled to their Brownian interpolation;
//! - [`analysis`]: KS statistics, intervals, rate fits, and `beta`;
//! - [`correction`]: the shifted-barrier approximation for discretely
//!   monitored crossing probabilities;
//! - [`experiment`] and [`verify`]: sharded experiment runs and the
//!   acceptance suite.

pub mod analysis;
pub mod correction;
pub mod error;
pub mod events;
pub mod experiment;
pub mod limits;
pub mod paths;
pub mod rng;
pub mod verify;
pub mod walks;

pub use analysis::{beta_constant, EmpiricalSummary};
pub use error::{Error, Result};
pub use events::{ErrorTriplet, HitRecord};
pub use limits::LimitTriplet;
pub use paths::{BarrierSpec, PathGrid};
pub use rng::{create_stream, Stream};
