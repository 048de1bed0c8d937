pub mod asymptotic;
pub mod bootstrap;
pub mod cli;
pub mod data;
pub mod error;
pub mod grid;
pub mod inference;
pub mod io;
pub mod mle;
pub mod simulation;
pub mod stats;
