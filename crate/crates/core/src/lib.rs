pub mod bases;
pub mod error;
pub mod evolution;
pub mod fourier;
pub mod function_space;
pub mod io;
pub mod operators;
pub mod padic;
pub mod scalars;
pub mod verify;

pub use error::{Error, Result};
