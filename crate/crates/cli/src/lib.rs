//! Batch front-end for the deflation library: manifest parsing, commands and
//! CSV output.

pub mod commands;
pub mod manifest;
pub mod output;
