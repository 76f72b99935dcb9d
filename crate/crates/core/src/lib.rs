//! Predict the expected physical-activity level of small geographic cells
//! from counts of urban points of interest.
//!
//! The pipeline runs from raw accelerometer/GPS streams ([`sensing`]) and
//! POI files ([`environment`]) through per-cell datasets ([`cohort`]) to a
//! random-forest classifier ([`forest`]) and exported prediction maps
//! ([`heatmap`]). Cells are geohashes ([`geocode`]).

pub mod cohort;
mod csvio;
pub mod environment;
pub mod error;
pub mod forest;
pub mod geocode;
pub mod heatmap;
pub mod registry;
pub mod rng;
pub mod sensing;

pub use error::{Error, Result};
