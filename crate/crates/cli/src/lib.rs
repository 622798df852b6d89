//! Configuration, staged pipeline and reports behind the `woodpile` command.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod selftest;
pub mod units;
