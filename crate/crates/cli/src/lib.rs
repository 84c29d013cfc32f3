//! HTTP service and batch commands on top of the `eicharvest` engine.

pub mod api;
pub mod commands;
