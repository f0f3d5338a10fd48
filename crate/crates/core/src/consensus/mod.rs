//! The warm-up protocol that lets nodes learn the network size and their
//! own stationary weight, plus the plain/corrected averaging demo.

mod demo;
mod table;
mod warmup;

pub use demo::{gossip_average_demo, normal_initial_values, DemoTrace, DEMO_VARIANCE};
pub use table::{draw_ids, merge_tables, NodeId, WeightTable};
pub use warmup::{
    run_warmup, warmup_sim, NodeEstimate, WarmupResult, WarmupRounds, DEFAULT_WARMUP_TOLERANCE,
};
