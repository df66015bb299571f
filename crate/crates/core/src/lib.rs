//! Maritime anomaly detection: ingestion, contract-governed stores,
//! training and prediction pipelines, and a hexagonal API service.

pub mod api;
pub mod cli;
pub mod contract;
pub mod domain;
pub mod ingestion;
pub mod pipelines;
pub mod store;
