//! Core library for building a deduplicated financial-text corpus from
//! SEC-style filings and fitting scaling curves to the resulting loss traces.
//!
//! The pipeline stages mirror the module layout: [`edgar`] fetches filings,
//! [`extract`] keeps the narrative sections, `dedup` drops near-duplicates,
//! `pack` tokenizes into fixed-length rows, `trainer` produces loss traces,
//! and `analysis` fits and compares the curves.

pub mod analysis;
pub mod dedup;
pub mod edgar;
pub mod error;
pub mod extract;
pub mod hashing;
pub mod kv;
pub mod pack;
pub mod trainer;

pub use error::{Error, Result};
pub use extract::{ItemLabel, SectionRecord};
