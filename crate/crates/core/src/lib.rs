//! Rotation-consistency evaluation for vision-language models.

pub mod aggregation;
pub mod dataset;
pub mod pipeline;
pub mod reliability;
pub mod rotation;
pub mod scoring;
