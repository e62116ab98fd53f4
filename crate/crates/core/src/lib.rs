// Checks like `!(x > 0.0)` are written that way so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod expr;
pub mod grid;
pub mod minmode;
pub mod operators;
pub mod saddle;

pub use energy::{EnergyModel, GinzburgLandau, GinzburgLandauParams, LandauBrazovskii, LandauBrazovskiiParams};
pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use minmode::{Metric, MinModeOptions, MinModeResult};
pub use operators::{project, BackendKind, Operators};
