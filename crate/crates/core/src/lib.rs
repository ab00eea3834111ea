#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod error;
pub mod hermite;
pub mod ident;
pub mod linalg;
pub mod lti;
pub mod operators;

pub use error::{Error, Result};
