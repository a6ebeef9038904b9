//! Core of the disaster alerting and reporting server.
//!
//! * [`domain`]: reports, actors and the report lifecycle
//! * [`cap`]: CAP 1.1 codec and the report mapping
//! * [`geo`]: administrative regions, neighbor villages, affected areas
//! * [`routing`]: responsible unit and recipients of a report
//! * [`ledger`]: verification records and reliability scores
//! * [`server`]: the alert server engine (store, push topics, audit log, replay)

pub mod cap;
pub mod config;
pub mod domain;
pub mod fixtures;
pub mod geo;
pub mod ledger;
pub mod routing;
pub mod server;

#[cfg(test)]
mod testutil;
