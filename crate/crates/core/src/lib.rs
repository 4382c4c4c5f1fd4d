//! Polar occupancy decoding for nested star-convex structures (optic disc and
//! cup), with shape-prior fusion, clinical metrics, losses, test-time search
//! over the polar frame, and synthetic ground truth for end-to-end checks.

pub mod config;
pub mod decoder;
pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod pipeline;
pub mod prior;
pub mod synth;
pub mod tta;

pub use config::RunConfig;
pub use decoder::{HeadFields, NestedOccupancy};
pub use error::{Error, Result};
pub use geometry::{AngularProfile, CartesianImage, PolarField, PolarGridSpec, ProfileKind};
pub use metrics::{BinaryMask, MetricsReport};
pub use pipeline::{DecodeParams, Decoded, Prediction, Predictor};
pub use tta::{Hypothesis, HypothesisScore, TtaConfig, TtaOutcome};
