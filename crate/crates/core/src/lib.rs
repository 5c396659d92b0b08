pub mod channels;
pub mod classical;
pub mod cli;
pub mod conjectures;
pub mod error;
pub mod extend;
pub mod info;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod rng;
pub mod states;

pub use error::{Error, Result};
