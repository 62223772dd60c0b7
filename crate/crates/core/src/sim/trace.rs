//! Line-delimited trace log: a header line, one `step` line per node
//! processing step and one `outcome` line per injected packet.

use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};

use crate::forwarding::DropReason;
use crate::wire::{DomainId, Packet};

pub const TRACE_SCHEMA: &str = "dlr-trace/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepAction {
    Forward,
    Deliver,
    Drop,
}

/// Where in its domain a node handled the packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Source,
    Transit,
    Ingress,
    Egress,
    IngressEgress,
    Sink,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub time: u64,
    pub flow: String,
    pub seq: u32,
    pub node: String,
    pub domain: DomainId,
    pub role: Role,
    pub action: StepAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_hop: Option<Ipv6Addr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domains_left_before: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domains_left_after: Option<u8>,
    pub destination_before: Ipv6Addr,
    pub destination_after: Ipv6Addr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<DropReason>,
    /// The routing header differs after this step.
    pub rh_modified: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Delivered,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub flow: String,
    pub seq: u32,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<DropReason>,
    pub node: String,
    pub injected_at: u64,
    pub finished_at: u64,
    /// Domains entered, in order, starting with the source domain.
    pub domains: Vec<DomainId>,
    pub destination: Ipv6Addr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_destination: Option<Ipv6Addr>,
    pub payload_intact: bool,
    /// Final routing header, hex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing_header: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_budget_us: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deadline_debits_us: Vec<u32>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub deadline_overrun_us: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

impl Outcome {
    pub fn delivered(&self) -> bool {
        self.status == Status::Delivered
    }

    /// Decodes the final routing header, if one was carried.
    pub fn final_packet_header(&self) -> Option<crate::wire::RoutingHeader> {
        let bytes = crate::wire::from_hex(self.routing_header.as_deref()?).ok()?;
        crate::wire::RoutingHeader::decode(&bytes).ok().map(|(rh, _)| rh)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Line {
    Header { schema: String, seed: u64 },
    Step(Step),
    Outcome(Outcome),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceLog {
    pub seed: u64,
    pub steps: Vec<Step>,
    pub outcomes: Vec<Outcome>,
    /// Final packets, parallel to `outcomes` (not serialized).
    pub packets: Vec<Packet>,
}

impl TraceLog {
    pub fn outcome(&self, flow: &str, seq: u32) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| o.flow == flow && o.seq == seq)
    }

    pub fn packet(&self, flow: &str, seq: u32) -> Option<&Packet> {
        let i = self.outcomes.iter().position(|o| o.flow == flow && o.seq == seq)?;
        self.packets.get(i)
    }

    pub fn steps_of<'a>(&'a self, flow: &'a str, seq: u32) -> impl Iterator<Item = &'a Step> + 'a {
        self.steps.iter().filter(move |s| s.flow == flow && s.seq == seq)
    }

    pub fn delivered(&self) -> usize {
        self.outcomes.iter().filter(|o| o.delivered()).count()
    }

    pub fn dropped(&self) -> usize {
        self.outcomes.len() - self.delivered()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &Line| {
            out.push_str(&serde_json::to_string(line).expect("trace line serializes"));
            out.push('\n');
        };
        push(&Line::Header {
            schema: TRACE_SCHEMA.into(),
            seed: self.seed,
        });
        for s in &self.steps {
            push(&Line::Step(s.clone()));
        }
        for o in &self.outcomes {
            push(&Line::Outcome(o.clone()));
        }
        out
    }

    /// Parses a serialized log. Final packets are not restored.
    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut log = TraceLog::default();
        let mut saw_header = false;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line = serde_json::from_str(raw).map_err(|e| format!("line {}: {e}", i + 1))?;
            match line {
                Line::Header { schema, seed } => {
                    if schema != TRACE_SCHEMA {
                        return Err(format!("line {}: unsupported schema `{schema}`", i + 1));
                    }
                    saw_header = true;
                    log.seed = seed;
                }
                Line::Step(s) => log.steps.push(s),
                Line::Outcome(o) => log.outcomes.push(o),
            }
        }
        if !saw_header {
            return Err("missing trace header".into());
        }
        Ok(log)
    }
}
