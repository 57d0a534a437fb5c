//! Monte Carlo construction of simply-laced Toda correlation functions on
//! the Riemann sphere. See the guide in `book/` for a tour.

pub mod chaos;
pub mod correlation;
pub mod error;
pub mod field;
pub mod gaussian;
pub mod geometry;
pub mod insertion;
pub mod job;
pub mod lie;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/algebra.md")]
    mod algebra {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/correlations.md")]
    mod correlations {}
    #[doc = include_str!("../../../book/src/checks.md")]
    mod checks {}
    #[doc = include_str!("../../../book/src/gaussian.md")]
    mod gaussian {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
