pub mod asymptotics;
pub mod bench;
pub mod closed_form;
pub mod error;
pub mod fd;
pub mod flux;
pub mod green;
pub mod par;
pub mod problem;
pub mod quad;
pub mod specfun;
pub mod volterra;

pub use error::{Error, Result};
