//! Construction, search and normalization of cryptographic S-boxes.

pub mod aco;
pub mod affine;
pub mod analysis;
pub mod cost;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod gf2;
pub mod localsearch;
pub mod memetic;
pub mod normalize;
pub mod rng;
pub mod sa;
pub mod sbox;

pub use affine::{AffineMap, Side, TransformCertificate};
pub use error::{Error, Result};
pub use gf2::BitMatrix;
pub use sbox::SBox;
