//! Highest-density-region sampling for surrogate training, together with the
//! surrogate models, reliability estimators and benchmark harness needed to
//! compare it against natural sampling on rare-event problems.

pub mod bench;
pub mod error;
pub mod hdr;
pub mod points;
pub mod problems;
pub mod randvec;
pub mod reliability;
pub mod rng;
pub mod special;
pub mod surrogate;

pub use error::{Error, Result};
pub use points::PointSet;
pub use randvec::{GaussianCopula, Marginal, RandomVector};
