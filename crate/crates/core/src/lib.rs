//! Woodpile photonic-crystal cavity toolkit.
//!
//! Geometry construction, plane-wave band structure, FDTD ringdown,
//! resonance extraction, mode volumes and cavity-QED figures of merit.

pub mod constants;
pub mod cqed;
pub mod error;
pub mod fdtd;
pub mod geometry;
pub mod modevol;
pub mod pwe;
pub mod specfit;

pub use error::{Error, Result};
