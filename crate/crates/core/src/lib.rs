//! Deterministic procedural planet generation.

pub mod cli;
pub mod config;
pub mod lod;
pub mod mesh;
pub mod noise;
pub mod scene;
pub mod service;
pub mod spline;
pub mod terrain;
pub mod verify;
