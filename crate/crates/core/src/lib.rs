pub mod app;
pub mod consensus;
pub mod data;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod sampling;
pub mod simgen;
pub mod validation;
