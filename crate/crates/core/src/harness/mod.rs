//! Synthetic experiments, data ingestion and plotting.

pub mod covariance;
pub mod csv_io;
pub mod experiment;
pub mod generate;
pub mod plot;
pub mod stats;
pub mod validate;
