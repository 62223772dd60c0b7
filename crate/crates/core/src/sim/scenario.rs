//! Scenario files (TOML). See `docs/scenario.md` for the full schema.

use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};

use crate::forwarding::{DropReason, NodeKind};
use crate::tables::Prefix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub processing: ProcessingDelays,
    pub domains: Vec<DomainSpec>,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub records: Vec<RecordSpec>,
    #[serde(default)]
    pub feasibility: Vec<FeasibilitySpec>,
    #[serde(default)]
    pub service_chains: Vec<ChainSpec>,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

/// Constant per-node processing delay by node kind, µs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingDelays {
    #[serde(default)]
    pub host_us: u64,
    #[serde(default)]
    pub interior_us: u64,
    #[serde(default)]
    pub border_us: u64,
}

impl ProcessingDelays {
    pub fn for_kind(&self, kind: NodeKind) -> u64 {
        match kind {
            NodeKind::Host => self.host_us,
            NodeKind::Interior => self.interior_us,
            NodeKind::Border => self.border_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub id: u32,
    #[serde(default)]
    pub prefixes: Vec<Prefix>,
    /// Committed maximum residence, µs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sla_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    pub domain: u32,
    pub addresses: Vec<Ipv6Addr>,
    /// Offset applied to every telemetry stamp this node writes.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub clock_offset_ns: i64,
}

fn is_zero(v: &i64) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub latency_us: u64,
    #[serde(default)]
    pub jitter_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSpec {
    pub name: String,
    pub path: Vec<u32>,
    pub destination: Ipv6Addr,
    #[serde(default)]
    pub options: FlowOptions,
}

/// Lower bound on the remaining delay from `node` to destinations in
/// `prefix`, used for the ingress deadline check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilitySpec {
    pub node: String,
    pub prefix: Prefix,
    pub min_residual_us: u32,
}

/// Domains hosting the chain's functions, in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub id: u32,
    pub functions: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dlsr,
    Dbd,
    Plain,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_us: Option<u32>,
    /// Telemetry slots to pre-allocate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub telemetry: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_chain: Option<u32>,
}

impl FlowOptions {
    pub fn is_empty(&self) -> bool {
        self == &FlowOptions::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub name: String,
    /// Source host node id.
    pub src: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst: Option<Ipv6Addr>,
    /// Resolver record supplying destination, path and options.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolve: Option<String>,
    pub mode: Mode,
    /// Explicit DLSR path (traversal order).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<u32>>,
    #[serde(default)]
    pub start_us: u64,
    #[serde(default = "one")]
    pub count: u32,
    #[serde(default = "default_interval")]
    pub interval_us: u64,
    #[serde(default = "default_payload")]
    pub payload_len: usize,
    #[serde(default, skip_serializing_if = "FlowOptions::is_empty")]
    pub options: FlowOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

fn one() -> u32 {
    1
}

fn default_interval() -> u64 {
    1000
}

fn default_payload() -> usize {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectedOutcome {
    Delivered,
    Dropped,
}

/// What every packet of a flow is expected to do.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub outcome: ExpectedOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<DropReason>,
    /// Domain sequence actually traversed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domains: Option<Vec<u32>>,
    /// Node where a dropped packet ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_budget_us: Option<u32>,
}
