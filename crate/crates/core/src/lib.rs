//! Simulation harness for the p-beauty contest played by scripted and
//! LLM-backed agents: game engine, agent policies, provider gateway,
//! analysis, and experiment orchestration.

pub mod agents;
pub mod analysis;
pub mod config;
pub mod error;
pub mod experiments;
pub mod game;
pub mod gateway;
pub mod seed;

pub use error::{Error, ReadError, Result};
