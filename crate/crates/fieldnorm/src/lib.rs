//! File formats, reports and the `fieldnorm` command line on top of
//! [`fieldnorm_core`].

pub mod cli;
pub mod io;
pub mod report;

pub use fieldnorm_core as core;
