//! File formats, a parallel executor and the sweep driver around
//! [`opinion_mf_core`].

pub use opinion_mf_core as core;

pub mod error;
pub mod exec;
pub mod io;
pub mod rules;
pub mod sweep;

pub use error::{Error, Result};
pub use exec::RayonExecutor;
