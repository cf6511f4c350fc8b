pub mod cone;
pub mod error;
pub mod foliate;
pub mod functional;
pub mod grid;
pub mod higgs;
pub mod io;
pub mod lp;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
