//! Relational neural networks: layered relational logistic regression units
//! over populations of objects, with learnable per-object latent properties
//! and exact back-propagation.

pub mod data;
pub mod engine;
pub mod experiment;
pub mod learn;
pub mod metrics;
pub mod modelspec;
pub mod oracle;
pub mod relcore;
pub mod rng;
