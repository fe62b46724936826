pub mod autodiff;
pub mod error;
pub mod inr;
pub mod metrics;
pub mod tasks;
pub mod toy;
pub mod video;

pub use error::{Error, Result};
