pub mod designs;
pub mod error;
pub mod exec;
pub mod float_repr;
pub mod imputation;
pub mod linear_model;
pub mod numerics;
pub mod pca;
pub mod randvar;
pub mod sim;
pub mod study;
pub mod table;

pub use error::{Error, Result};
