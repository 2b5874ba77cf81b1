pub mod bench;
pub mod cli;
pub mod cvar;
pub mod error;
pub mod generators;
pub mod io;
pub mod problem;
pub mod projection;
pub mod solver;
