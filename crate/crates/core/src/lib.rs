//! Mining radiology figures from full-text biomedical articles.
//!
//! The pipeline parses BioC XML articles, links each figure to its caption
//! and to the passages citing it, splits compound figures into panels,
//! classifies panel modality (CT, CXR, other), mines negation-aware symptom
//! and finding mentions, and reports term frequencies with Fisher's exact
//! test.

pub mod ingest;
pub mod linker;
pub mod raster;
pub mod splitter;
pub mod classifier;
pub mod synthetic;
pub mod textmine;
pub mod stats;
pub mod config;
pub mod manifest;
pub mod pipeline;
