//! Feature-level Shapley attribution for generative language models over
//! code and natural-language inputs.

pub mod client;
pub mod comparators;
pub mod error;
pub mod grammar;
pub mod harness;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod sampler;
pub mod shapley;
pub mod splitters;
pub mod stats;

pub use error::Error;
pub use pipeline::{attribute, attribute_partition, AttributionConfig};
