//! Field client for the disaster alert server: builds reports step by step,
//! submits them over unreliable links and watches push topics.

pub mod build;
pub mod link;
pub mod retry;
pub mod sleep;
pub mod transport;
pub mod watch;
