//! File formats, property battery and command-line front end for
//! `hcdr-core`.

pub mod cli;
pub mod io;
pub mod output;
pub mod verify;
