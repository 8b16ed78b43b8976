//! Config files, weight blobs and report rendering for the `rnnt-memcost` binary.

pub mod config;
pub mod render;
pub mod units;
pub mod weights_io;
