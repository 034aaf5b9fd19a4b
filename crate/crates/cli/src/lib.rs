//! Command-line pipeline: corpus scanning and ablation, language-model
//! training and evaluation, learning-dynamics analysis and the end-to-end
//! synthetic experiment.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod provenance;
pub mod report;
pub mod runs;
pub mod seeds;
pub mod svg;
