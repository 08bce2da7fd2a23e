//! Harness around the token-merging library: config files, synthetic clips, runs,
//! metrics CSVs, tensor dumps and run comparison.

pub mod compare;
pub mod config;
pub mod error;
pub mod metrics;
pub mod run;
pub mod synth;
pub mod tensor_io;
