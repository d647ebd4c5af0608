pub mod complex;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod linktheory;
pub mod plchain;
pub mod ring;

pub use error::{Error, Result};
