//! Exact and learned temporal aggregation of a storage/VRE co-scheduling LP.

pub mod acs;
pub mod clustering;
pub mod data;
pub mod exec;
pub mod lp;
pub mod ml;
pub mod model;
pub mod pipeline;
pub mod tsa;
