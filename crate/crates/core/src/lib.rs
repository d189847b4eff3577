//! Frequent Directions sketching for ridge regression.
//!
//! [`sketch`] holds the streaming FD/RFD sketch, [`ridge`] the solvers built
//! on it and on random sketches ([`random_sketch`]), [`stats`] the analytic
//! bias/variance diagnostics, [`data`] the instance generators and parsers,
//! and [`experiment`] the CSV-producing harness behind the `fdridge` binary.
//!
//! Data-parallel loops go through [`par::Exec`]; building without the
//! default `parallel` feature makes every loop sequential.

pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod par;
pub mod random_sketch;
pub mod ridge;
pub mod rows;
pub mod sketch;
pub mod stats;

pub use error::{Error, Result};
pub use par::Exec;
pub use rows::RowSource;
pub use sketch::{SketchMode, SketchOutput, StreamingSketch};
