//! Furniture-free occupancy mapping from a vertically mounted rotating lidar.

pub mod app;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod labeling;
pub mod map;
pub mod oracle;
pub mod pipeline;
pub mod rearrange;
pub mod walls;

pub use error::{Error, Result};
