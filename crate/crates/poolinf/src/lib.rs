//! Experiment harness around `poolinf-core`: scenario configuration, file
//! formats, event-log ingestion, the parallel runner, result files, sweeps
//! and the `poolinf` command line.
//!
//! Typical library use mirrors `poolinf simulate`:
//!
//! ```no_run
//! use poolinf::{config, pipeline, runner};
//! let cfg = config::load_scenario("presets/web-weak.json".as_ref())?;
//! let pool = runner::thread_pool(None)?;
//! let report = pipeline::simulate(&cfg, "out".as_ref(), &pool, Default::default())?;
//! println!("{:?}", report.aucs());
//! # Ok::<(), poolinf::Error>(())
//! ```

pub mod config;
mod error;
pub mod ingest;
pub mod io;
pub mod output;
pub mod pipeline;
pub mod runner;
pub mod sweep;

pub use error::{Error, Result};

/// Directory holding the bundled presets and fixtures.
pub fn presets_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("presets")
}
