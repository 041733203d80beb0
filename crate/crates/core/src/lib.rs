pub mod automata;
pub mod error;
pub mod experiments;
pub mod forms;
pub mod measures;
pub mod samplers;
pub mod stratify;
pub mod subgraph;
pub mod words;

pub use error::{Error, Result};
