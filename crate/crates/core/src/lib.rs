//! Convolutional sentence models over word embeddings: wide one-dimensional
//! convolutions interleaved with dynamic k-max pooling and folding, plus the
//! Max-TDNN and neural bag-of-words baselines, trained from scratch with
//! cross-entropy + L2 and Adagrad.
//!
//! The crate is `no_std` (with `alloc`); all float transcendentals go through
//! [`libm`], so results are bit-identical across platforms. File formats,
//! corpus ingestion and the command-line front end live in the companion
//! `dcnn-cli` crate.

#![no_std]

extern crate alloc;

pub mod conv;
pub mod error;
pub mod inspect;
pub mod network;
pub mod numerics;
pub mod pooling;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Mat, Rng};
