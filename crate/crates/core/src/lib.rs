pub mod components;
pub mod data;
pub mod engine;
pub mod error;
pub mod graph;
pub mod harness;
pub mod inference;
pub mod interval;
pub mod polyroot;
pub mod state;
