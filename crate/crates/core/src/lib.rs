//! Simulation toolkit for the Brownian side of the mating-of-trees description
//! of quantum disks: the correlated boundary-length process, Brownian motion in
//! the cone `C_theta`, the quantum disk area law, field-average processes of
//! wedges, disks and beads, and mated-CRT maps with boundary.

pub mod area;
pub mod bm;
pub mod cli;
pub mod cone;
pub mod error;
pub mod excursion;
pub mod matedcrt;
pub mod params;
pub mod processes;
pub mod rng;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use params::{derive_params, GammaParams};
pub use rng::RngStream;
