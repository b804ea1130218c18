//! Repository adapters, build runners, caching, the mining pipeline, and
//! dataset export around the `regress-core` algorithms.

pub mod cache;
pub mod config;
pub mod export;
pub mod gitrepo;
pub mod labels;
pub mod metrics;
pub mod pipeline;
pub mod repos;
pub mod runner;
