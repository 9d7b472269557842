//! File formats, simulation, benchmarking and command implementations for
//! the `ogm` occupancy grid tool.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod logs;
pub mod pgm;
pub mod polygon_io;
pub mod sim;
pub mod world;

pub use error::FormatError;
