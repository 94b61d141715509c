//! Blocked adaptive randomized SVD with sparse random test matrices.
//!
//! The crate is `no_std` + `alloc`. The default `std` feature only turns on
//! runtime CPU feature detection in the GEMM backend and the optional
//! column-split threading in [`matrix::matmul`].
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bounds;
pub mod farpca;
mod fmath;
pub mod matrix;
pub mod rng;
pub mod sketch;
pub mod statcheck;

pub use farpca::{ApproxSvd, FarpcaConfig, FarpcaError, ShiftConvention, Whitening};
pub use matrix::{DenseMatrix, LinalgError};
pub use sketch::{SketchBlock, SketchKind, SketchSpec, SparseSketch};
