//! I/O around the pheromone engine: CSV files, the JSON-lines event log and
//! live stream, the operator command endpoint, and the CLI plumbing.

pub mod broadcast;
pub mod cli;
pub mod config;
pub mod csv_io;
pub mod eventlog;
pub mod line;
pub mod server;
pub mod summary;
