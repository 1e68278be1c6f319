pub mod bench;
pub mod cli;
pub mod embedding;
pub mod error;
pub mod features;
pub mod heatmap;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod synthetic;
pub mod verify;

pub use error::{Error, Result};
