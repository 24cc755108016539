//! Orchestration for the finscale pipeline: run configuration, the staged
//! fetch-to-report driver, synthetic fixture generation, and the plot and
//! report emitters. Algorithms live in `finscale-core`; this crate only
//! plumbs artifacts between them.

pub mod config;
pub mod fixtures;
pub mod pipeline;
pub mod plot;
pub mod report;

pub use config::RunConfig;
pub use pipeline::run_pipeline;
pub use report::RunReport;


