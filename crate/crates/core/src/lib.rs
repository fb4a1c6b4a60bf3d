//! Out-of-core state-vector simulation of random quantum circuits.

pub mod circuit;
pub mod costmodel;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod plan;
pub mod storage;
pub mod tensornet;

pub use error::{Error, Result};
