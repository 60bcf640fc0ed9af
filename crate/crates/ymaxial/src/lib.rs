pub mod bargmann;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod limits;
pub mod measure;
pub mod lie;
pub mod quad;
pub mod surface;

pub use error::{Error, Result};
