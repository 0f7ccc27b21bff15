pub mod cavity;
pub mod crystal;
pub mod error;
pub mod linalg;
pub mod ode;
pub mod singlemode;
pub mod twomode;

pub use error::{Error, Result};
