pub mod cli;
pub mod criteria;
pub mod expr;
pub mod finite;
pub mod fixtures;
pub mod model;
pub mod ratio;
pub mod versions;
