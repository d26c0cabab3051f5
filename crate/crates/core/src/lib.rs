pub mod grad;
pub mod nn;
pub mod corpus;
pub mod summarizer;
pub mod eval;
pub mod classifier;
pub mod checkpoint;
pub mod config;
pub mod pipeline;
