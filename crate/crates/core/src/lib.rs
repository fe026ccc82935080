pub mod batch;
pub mod corpus;
pub mod dzn;
pub mod evaluator;
pub mod gateway;
pub mod grammar;
pub mod harness;
pub mod strategies;
