//! File formats, experiment orchestration and plots around
//! [`edgecoop_core`], plus the `edgecoop` command-line tool.

pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics_io;
pub mod plot;
pub mod topology_file;
pub mod trace_io;

pub use config::ExperimentConfig;

// The dense kernels allocate aligned scratch buffers on every product; the
// glibc allocator fragments badly under that pattern during training.
#[global_allocator]
static ALLOCATOR: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub use edgecoop_core as core;
pub use error::{Error, Result};
