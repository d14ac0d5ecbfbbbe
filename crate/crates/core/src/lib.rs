pub mod error;
pub mod levy_model;
pub mod montecarlo;
pub mod numerics;
pub mod parisian;
pub mod quadrature;
pub mod scale_fn;
pub mod transition;
pub mod verify;

pub use error::{Error, Result};
pub use levy_model::{LaplaceExponent, LevyModel};
