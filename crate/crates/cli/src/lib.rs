//! Command-line driver for cross-dataset bias experiments: configuration,
//! dispatch, atomic report emission and heatmaps.

pub mod commands;
pub mod config;
pub mod heatmap;
pub mod output;
