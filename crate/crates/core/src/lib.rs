//! Compile a node-positioned graph into a pyramid of zoom layers whose
//! tiles respect fixed node and rail quotas, then label, export, and verify
//! the result.

pub mod dataset;
pub mod geometry;
pub mod ingest;
pub mod labeling;
pub mod layers;
pub mod pipeline;
pub mod verify;
