//! Experiment runner behind the `rkadapt` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;
