pub mod ddm;
pub mod driver;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod ife;
pub mod mesh;
pub mod oracle;
pub mod particles;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
