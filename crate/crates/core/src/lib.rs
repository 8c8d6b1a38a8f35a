//! An audio-guided active-perception agent for question answering over video.
//!
//! The agent runs a bounded think, act, observe, reflect loop. Each step a planner picks one
//! tool from a modality-aware toolset, the tool answers from the media, and a reflection
//! step grades the accumulated evidence. A deterministic audio-video scene simulator stands
//! in for real perception models, so every run is reproducible from a seed.

pub mod action;
pub mod analytics;
pub mod cost;
pub mod episode;
pub mod fsutil;
pub mod gateway;
pub mod planner;
pub mod retrieval;
pub mod scene;
pub mod time;
pub mod tools;
