//! RSSI-based relative localization and tracking simulator.

pub mod channel;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod lqg;
pub mod policy;
pub mod sim;
pub mod speed;
pub mod tdoa;

pub use error::{Error, Result};
