pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod lightfield;
pub mod networks;
pub mod render;
pub mod scene;
pub mod train;

pub use error::{LfError, Result};
