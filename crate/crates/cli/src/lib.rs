//! Command-line front end for the `pprzf` library: experiment configs,
//! sweeps with CSV output, validation suites and figure reproductions.

pub mod config;
pub mod repro;
pub mod run;
pub mod validate;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// The command line or config file could not be understood.
    pub const CONFIG: u8 = 2;
    /// A computation failed, or a validation check did not pass.
    pub const FAILURE: u8 = 3;
}
