pub mod eigentime;
pub mod error;
pub mod generator;
pub mod graph;
pub mod linalg;
pub mod derivatives;
pub mod optimizer;
pub mod dp;
pub mod discrete_time;
pub mod experiments;
pub mod sample;
pub mod cli;
