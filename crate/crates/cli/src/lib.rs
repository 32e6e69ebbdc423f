//! Library side of the `adapterd` binary: bundled scenarios and the
//! command implementations, callable without spawning a process.

pub mod commands;
pub mod scenarios;
