//! Validation, consistency scoring and stage-wise beam sampling for
//! block-level code execution traces.

pub mod dbs;
pub mod fixtures;
pub mod grpo;
pub mod literal;
pub mod parser;
pub mod records;
pub mod reward;
pub mod trace;
