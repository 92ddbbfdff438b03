pub mod construct;
pub mod dsolve;
pub mod error;
pub mod ode;
pub mod quad;
pub mod scenario;
pub mod spatial;
pub mod verify;
pub mod specfun;

pub use error::{Error, Result};
