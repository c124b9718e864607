pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod difficulty;
pub mod harness;
pub mod judge;
pub mod rdf;
pub mod sampler;
pub mod study;
pub mod sparql;
