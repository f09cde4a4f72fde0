//! Command-line front end: system files, the `bounds`, `generate`, `bench`
//! and `verify` commands, and their reports.

pub mod commands;
pub mod error;
pub mod report;
pub mod system;

pub use commands::{
    cmd_bench, cmd_bounds, cmd_generate, check_word, verify_report, BenchOptions, BenchSetting, BoundsOptions,
    GenerateOptions, MethodChoice,
};
pub use error::{exit, CliError};
pub use report::{render, RunReport};
pub use system::{load_system, parse_system, System, SystemFile};
