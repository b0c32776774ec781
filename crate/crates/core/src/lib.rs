//! Relation extraction with an auxiliary dependency-edge objective and an
//! entity-conditioned control mechanism.

pub mod attention;
pub mod check;
pub mod classifier;
pub mod control;
pub mod corpus;
pub mod depsupervise;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
