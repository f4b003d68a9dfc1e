//! Hand-gesture locomotion: tracking data types, signal processing, the
//! finger-count classifier, the four speed interfaces with palm steering,
//! and a deterministic simulator with synthetic pilots for benchmarking
//! them on a pursuit task and a gate course.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod dsp;
pub mod features;
pub mod gestures;
pub mod handmodel;
pub mod metrics;
pub mod pilot;
pub mod rng;
pub mod sim;
