//! Configuration, file formats and the command runners behind the CLI.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_grid, parse_init, parse_scale, RunConfig, WeightConfig};
pub use output::{fmt_f64, read_init_csv, write_init_csv, SCHEMA_VERSION};
pub use run::{replay, resolve_out_dir, run, Command, RunManifest, MANIFEST_FILE, OUT_DIR_ENV};
