//! File formats, Monte Carlo campaigns and the command-line front end for
//! [`hdpbsid_core`].

pub mod campaign;
pub mod check;
pub mod cli;
pub mod config;
pub mod formats;

pub use hdpbsid_core as core;
