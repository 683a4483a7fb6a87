pub mod classifier;
pub mod dataset;
pub mod metrics;
pub mod resplit;
pub mod sparql;
