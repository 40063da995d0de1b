//! Skeletonization of 3D density volumes: persistence on the cubical
//! complex, discrete Morse graph extraction, graph cleanup, rooted
//! spanning forests and tree simplification, plus evaluation tools.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod eval;
pub mod forest;
pub mod geom;
pub mod graph_simplify;
pub mod morse;
pub mod persistence;
pub mod phantom;
pub mod pipeline;
pub mod tree;
pub mod volume;

pub use error::{Error, Result};
