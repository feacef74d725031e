//! Explicit-state model checking of parameterised interleaved interpreted
//! systems, with cutoff reduction for indexed temporal-epistemic formulae.

pub mod checker;
pub mod cutoff;
pub mod error;
pub mod iis;
pub mod logic;
pub mod pispl;
pub mod simrel;
pub mod template;

pub use error::{Error, Result};

/// Bundled example sources.
pub mod corpus {
    /// Parameterised autonomous robots with formulae `AR1`..`AR4`.
    pub const ROBOT: &str = include_str!("../examples/robot.pispl");
    /// Two-train train-gate-controller with formula `SAFE`.
    pub const TGC: &str = include_str!("../examples/tgc.pispl");
}
