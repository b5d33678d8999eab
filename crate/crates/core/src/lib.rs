pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod master_equation;
pub mod model;
pub mod predictor;
pub mod quantiles;
pub mod roots;
pub mod stats;
pub mod transforms;

pub use error::{Error, Result};

/// Dense column-major real matrix used throughout.
pub type Matrix = faer::Mat<f64>;
