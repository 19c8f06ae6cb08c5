//! Disentangled, locally fair representation learning for tabular data.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, CSV ingestion
//! and the command-line driver live in the `locfair` companion crate.
//!
//! Pipeline: an attribute encoder is trained to predict the sensitive
//! attribute; a second encoder is then trained adversarially to hide the
//! attribute while a decoder reconstructs the input from both embeddings.
//! A KNN-based local fairness term balances each sample's same-label
//! neighborhood across groups, and a classifier head is finetuned on the
//! frozen attribute-free embedding.
#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;
