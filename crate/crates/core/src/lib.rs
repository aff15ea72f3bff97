pub mod cli;
pub mod environments;
pub mod error;
pub mod fdr;
pub mod kernels;
pub mod langevin;
pub mod linalg;
pub mod qbm;

pub use error::{Error, Result};
