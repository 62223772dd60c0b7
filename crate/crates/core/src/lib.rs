//! Domain-level routing: DLSR and DBD routing headers, per-domain options,
//! border-router forwarding, a path-vector control plane and a
//! deterministic simulator with per-domain OAM analysis.

pub mod control;
pub mod forwarding;
pub mod oam;
pub mod options;
pub mod resolver;
pub mod scenarios;
pub mod sim;
pub mod tables;
pub mod topology;
pub mod wire;

pub use wire::{DomainId, Packet, RoutingHeader};
