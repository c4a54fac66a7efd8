pub mod builders;
pub mod cli;
pub mod demos;
pub mod error;
pub mod evaluator;
pub mod formula;
pub mod linalg;
pub mod planner;
