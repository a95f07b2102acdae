//! Configuration, randomized sweeps, reports and the acceptance suite around `speedlimit`.

pub mod config;
pub mod error;
pub mod random;
pub mod report;
pub mod run;
pub mod suite;
