//! Deterministic discrete-event simulation of a multi-domain network.
//!
//! Events are processed in (time, insertion order). Link delay is latency
//! plus a jitter draw from a per-link stream seeded by (seed, link id);
//! every node adds a constant processing delay for its kind.

pub mod gen;
pub mod report;
pub mod scenario;
pub mod trace;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::net::Ipv6Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::control::{self, ControlError, RoutingState};
use crate::forwarding::{self, DropReason, ForwardingAction, NodeIdentity, NodeKind};
use crate::options::{
    self, deadline_check, deadline_debit, service_chain_step, telemetry_stamp, Boundary,
    DeadlineOption, Feasibility, ServiceChainOption, StampOutcome, TelemetryOption,
};
use crate::resolver::{PathRecord, PathStore};
use crate::tables::Prefix;
use crate::topology::{Domain, Link, NodeIdx, Topology, ValidationError};
use crate::wire::{
    DomainId, Packet, RoutingHeader, TlvOption, MAX_DOMAINS, OPT_DEADLINE, OPT_SERVICE_CHAIN,
    OPT_TELEMETRY,
};

pub use scenario::{ExpectedOutcome, Expectation, FlowOptions, Mode, Scenario};
pub use trace::{Outcome, Role, Status, Step, StepAction, TraceLog};

/// Hop limit given to every injected packet.
pub const INITIAL_HOP_LIMIT: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("{flow}#{seq} was not delivered")]
    NotDelivered { flow: String, seq: u32 },
}

/// A flow with every reference resolved.
#[derive(Debug, Clone)]
pub struct FlowPlan {
    pub name: String,
    pub src: NodeIdx,
    pub destination: Ipv6Addr,
    pub mode: Mode,
    pub path: Option<Vec<DomainId>>,
    pub start_ns: u64,
    pub count: u32,
    pub interval_ns: u64,
    pub payload_len: usize,
    pub options: Vec<TlvOption>,
    pub deadline_us: Option<u32>,
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub seed: u64,
    pub topology: Topology,
    pub routing: RoutingState,
    pub resolver: PathStore,
    pub flows: Vec<FlowPlan>,
    /// Per-domain SLA, ns.
    pub sla_ns: BTreeMap<DomainId, u64>,
    /// Per-node service chains: chain id → hosting domains in order.
    pub chains: BTreeMap<u32, Vec<DomainId>>,
    feasibility: Vec<Vec<(Prefix, u32)>>,
    clock_offsets: Vec<i64>,
    processing_ns: [u64; 3],
}

fn kind_slot(kind: NodeKind) -> usize {
    match kind {
        NodeKind::Host => 0,
        NodeKind::Interior => 1,
        NodeKind::Border => 2,
    }
}

fn flow_options(opts: &FlowOptions, chains: &BTreeMap<u32, Vec<DomainId>>) -> Vec<TlvOption> {
    let mut out = Vec::new();
    if let Some(b) = opts.deadline_us {
        out.push(DeadlineOption::new(b).to_tlv());
    }
    if let Some(c) = opts.telemetry {
        out.push(TelemetryOption::with_capacity(c).to_tlv());
    }
    if let Some(id) = opts.service_chain {
        let len = chains.get(&id).map_or(0, |f| f.len());
        out.push(
            ServiceChainOption {
                chain_id: id,
                service_index: len.min(255) as u8,
            }
            .to_tlv(),
        );
    }
    out
}

fn check_options(path: &str, opts: &FlowOptions, chains: &BTreeMap<u32, Vec<DomainId>>) -> Result<(), ValidationError> {
    if let Some(c) = opts.telemetry {
        if c == 0 || c > options::MAX_TELEMETRY_CAPACITY {
            return Err(ValidationError::new(
                format!("{path}.telemetry"),
                format!("capacity must be 1..={}", options::MAX_TELEMETRY_CAPACITY),
            ));
        }
    }
    if let Some(id) = opts.service_chain {
        if !chains.contains_key(&id) {
            return Err(ValidationError::new(format!("{path}.service_chain"), format!("unknown chain {id}")));
        }
    }
    Ok(())
}

/// Validates a scenario, converges the control plane and loads the resolver.
pub fn build(scenario: &Scenario) -> Result<Simulation, SimError> {
    let domains: Vec<Domain> = scenario
        .domains
        .iter()
        .map(|d| Domain {
            id: DomainId(d.id),
            prefixes: d.prefixes.clone(),
            sla_us: d.sla_us,
        })
        .collect();
    let nodes: Vec<NodeIdentity> = scenario
        .nodes
        .iter()
        .map(|n| NodeIdentity {
            node_id: n.id.clone(),
            kind: n.kind,
            domain: DomainId(n.domain),
            addresses: n.addresses.clone(),
        })
        .collect();
    let name_index: BTreeMap<&str, NodeIdx> =
        scenario.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let node_ref = |path: String, name: &str| {
        name_index
            .get(name)
            .copied()
            .ok_or_else(|| ValidationError::new(path, format!("unknown node `{name}`")))
    };
    let mut links = Vec::with_capacity(scenario.links.len());
    for (i, l) in scenario.links.iter().enumerate() {
        links.push(Link {
            a: node_ref(format!("links[{i}].a"), &l.a)?,
            b: node_ref(format!("links[{i}].b"), &l.b)?,
            latency_us: l.latency_us,
            jitter_us: l.jitter_us,
        });
    }
    let topology = Topology::new(domains, nodes, links)?;
    let known = |id: u32| topology.domain(DomainId(id)).is_some();

    let mut chains = BTreeMap::new();
    for (i, c) in scenario.service_chains.iter().enumerate() {
        if let Some(j) = c.functions.iter().position(|&d| !known(d)) {
            return Err(ValidationError::new(
                format!("service_chains[{i}].functions[{j}]"),
                format!("unknown domain {}", c.functions[j]),
            )
            .into());
        }
        if chains.insert(c.id, c.functions.iter().copied().map(DomainId).collect()).is_some() {
            return Err(ValidationError::new(format!("service_chains[{i}].id"), format!("duplicate chain {}", c.id)).into());
        }
    }

    let mut resolver = PathStore::new();
    for (i, r) in scenario.records.iter().enumerate() {
        if let Some(j) = r.path.iter().position(|&d| !known(d)) {
            return Err(ValidationError::new(format!("records[{i}].path[{j}]"), format!("unknown domain {}", r.path[j])).into());
        }
        check_options(&format!("records[{i}].options"), &r.options, &chains)?;
        let record = PathRecord {
            name: r.name.clone(),
            domain_path: r.path.iter().copied().map(DomainId).collect(),
            destination: r.destination,
            options: flow_options(&r.options, &chains),
        };
        resolver
            .register(record, |a| topology.owner_of(a))
            .map_err(|e| ValidationError::new(format!("records[{i}]"), e.to_string()))?;
    }

    let mut feasibility = vec![Vec::new(); topology.nodes.len()];
    for (i, f) in scenario.feasibility.iter().enumerate() {
        let n = node_ref(format!("feasibility[{i}].node"), &f.node)?;
        if topology.nodes[n].kind != NodeKind::Border {
            return Err(ValidationError::new(format!("feasibility[{i}].node"), "not a border router").into());
        }
        feasibility[n].push((f.prefix, f.min_residual_us));
    }

    let mut flows = Vec::with_capacity(scenario.flows.len());
    for (i, f) in scenario.flows.iter().enumerate() {
        let at = |field: &str| format!("flows[{i}].{field}");
        let src = node_ref(at("src"), &f.src)?;
        if topology.nodes[src].kind != NodeKind::Host {
            return Err(ValidationError::new(at("src"), format!("`{}` is not a host", f.src)).into());
        }
        let record = match &f.resolve {
            Some(name) => Some(
                resolver
                    .query(name)
                    .map_err(|e| ValidationError::new(at("resolve"), e.to_string()))?
                    .clone(),
            ),
            None => None,
        };
        let destination = match (f.dst, &record) {
            (Some(d), _) => d,
            (None, Some(r)) => r.destination,
            (None, None) => return Err(ValidationError::new(at("dst"), "flow needs `dst` or `resolve`").into()),
        };
        let path = match (&f.path, &record) {
            (Some(p), _) => {
                if let Some(j) = p.iter().position(|&d| !known(d)) {
                    return Err(ValidationError::new(format!("flows[{i}].path[{j}]"), format!("unknown domain {}", p[j])).into());
                }
                Some(p.iter().copied().map(DomainId).collect::<Vec<_>>())
            }
            (None, Some(r)) => Some(r.domain_path.clone()),
            (None, None) => None,
        };
        if f.mode == Mode::Dlsr {
            let Some(p) = &path else {
                return Err(ValidationError::new(at("path"), "dlsr flow needs `path` or `resolve`").into());
            };
            if p.is_empty() || p.len() > MAX_DOMAINS {
                return Err(ValidationError::new(at("path"), format!("path must hold 1..={MAX_DOMAINS} domains")).into());
            }
            if p[0] != topology.nodes[src].domain {
                return Err(ValidationError::new(
                    at("path"),
                    format!("path starts in {} but `{}` is in {}", p[0], f.src, topology.nodes[src].domain),
                )
                .into());
            }
        }
        check_options(&at("options"), &f.options, &chains)?;
        if f.count > 0 && f.interval_us == 0 && f.count > 1 {
            return Err(ValidationError::new(at("interval_us"), "interval must be positive").into());
        }
        let mut opts = flow_options(&f.options, &chains);
        let mut deadline_us = f.options.deadline_us;
        if let Some(r) = &record {
            for o in &r.options {
                if options::find(&opts, o.option_type).is_none() {
                    if o.option_type == OPT_DEADLINE {
                        deadline_us = DeadlineOption::from_tlv(o).ok().map(|d| d.budget_remaining);
                    }
                    opts.push(o.clone());
                }
            }
        }
        if let Some(e) = &f.expect {
            if let Some(n) = &e.drop_node {
                node_ref(format!("flows[{i}].expect.drop_node"), n)?;
            }
        }
        flows.push(FlowPlan {
            name: f.name.clone(),
            src,
            destination,
            mode: f.mode,
            path,
            start_ns: f.start_us * 1000,
            count: f.count,
            interval_ns: f.interval_us * 1000,
            payload_len: f.payload_len,
            options: opts,
            deadline_us,
            expect: f.expect.clone(),
        });
    }

    let routing = control::converge(&topology)?;
    let sla_ns = topology
        .domains
        .iter()
        .filter_map(|d| d.sla_us.map(|s| (d.id, s * 1000)))
        .collect();
    let clock_offsets = scenario.nodes.iter().map(|n| n.clock_offset_ns).collect();
    let p = &scenario.processing;
    Ok(Simulation {
        seed: scenario.seed,
        topology,
        routing,
        resolver,
        flows,
        sla_ns,
        chains,
        feasibility,
        clock_offsets,
        processing_ns: [p.host_us * 1000, p.interior_us * 1000, p.border_us * 1000],
    })
}

/// Parses, validates and builds a scenario file.
pub fn load(text: &str) -> Result<Simulation, LoadError> {
    let scenario = Scenario::from_toml(text).map_err(|e| LoadError::Parse(e.to_string()))?;
    build(&scenario).map_err(LoadError::Sim)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("scenario: {0}")]
    Parse(String),
    #[error(transparent)]
    Sim(SimError),
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Inject { flow: usize, seq: u32 },
    Arrive { node: NodeIdx, packet: usize, link: usize },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: u64,
    order: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.order) == (other.time, other.order)
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.order).cmp(&(self.time, self.order))
    }
}

struct InFlight {
    flow: usize,
    seq: u32,
    packet: Packet,
    payload: Vec<u8>,
    injected_at: u64,
    domains: Vec<DomainId>,
    entered_at: u64,
    left_source: bool,
    debits: Vec<u32>,
    overrun: u32,
}

struct Run<'a> {
    sim: &'a Simulation,
    queue: BinaryHeap<Event>,
    order: u64,
    rngs: Vec<ChaCha8Rng>,
    packets: Vec<Option<InFlight>>,
    finished: Vec<(u64, usize, Outcome, Packet)>,
    log: TraceLog,
}

fn payload_for(flow: usize, seq: u32, len: usize) -> Vec<u8> {
    (0..len).map(|i| (i as u8) ^ (seq as u8) ^ (flow as u8).rotate_left(3)).collect()
}

impl Simulation {
    /// Runs until the queue is empty or the next event is later than `until`
    /// (ns). Packets still in flight at that point get no outcome.
    pub fn run(&self, until: Option<u64>) -> TraceLog {
        let mut run = Run {
            sim: self,
            queue: BinaryHeap::new(),
            order: 0,
            rngs: (0..self.topology.links.len())
                .map(|l| {
                    let mut r = ChaCha8Rng::seed_from_u64(self.seed);
                    r.set_stream(l as u64);
                    r
                })
                .collect(),
            packets: Vec::new(),
            finished: Vec::new(),
            log: TraceLog {
                seed: self.seed,
                ..TraceLog::default()
            },
        };
        for (f, plan) in self.flows.iter().enumerate() {
            for seq in 0..plan.count {
                let t = plan.start_ns + u64::from(seq) * plan.interval_ns;
                run.push(t, EventKind::Inject { flow: f, seq });
            }
        }
        while let Some(ev) = run.queue.pop() {
            if until.is_some_and(|u| ev.time > u) {
                break;
            }
            match ev.kind {
                EventKind::Inject { flow, seq } => run.inject(ev.time, flow, seq),
                EventKind::Arrive { node, packet, link } => run.handle(ev.time, node, packet, Some(link)),
            }
        }
        let mut finished = run.finished;
        finished.sort_by_key(|(_, id, _, _)| *id);
        let mut log = run.log;
        for (_, _, outcome, packet) in finished {
            log.outcomes.push(outcome);
            log.packets.push(packet);
        }
        log
    }

    /// Checks every flow's declared expectation; returns one message per miss.
    pub fn check_expectations(&self, log: &TraceLog) -> Vec<String> {
        let mut misses = Vec::new();
        for plan in &self.flows {
            let Some(e) = &plan.expect else { continue };
            for seq in 0..plan.count {
                let tag = format!("{}#{seq}", plan.name);
                let Some(o) = log.outcome(&plan.name, seq) else {
                    misses.push(format!("{tag}: no outcome"));
                    continue;
                };
                let want = match e.outcome {
                    ExpectedOutcome::Delivered => Status::Delivered,
                    ExpectedOutcome::Dropped => Status::Dropped,
                };
                if o.status != want {
                    misses.push(format!("{tag}: expected {:?}, got {:?}", want, o.status));
                }
                if e.reason.is_some() && o.drop_reason != e.reason {
                    misses.push(format!("{tag}: expected reason {:?}, got {:?}", e.reason, o.drop_reason));
                }
                if let Some(d) = &e.domains {
                    let got: Vec<u32> = o.domains.iter().map(|d| d.0).collect();
                    if &got != d {
                        misses.push(format!("{tag}: expected domains {d:?}, got {got:?}"));
                    }
                }
                if let Some(n) = &e.drop_node {
                    if o.status != Status::Dropped || &o.node != n {
                        misses.push(format!("{tag}: expected drop at `{n}`, ended at `{}`", o.node));
                    }
                }
                if let Some(b) = e.final_budget_us {
                    if o.deadline_budget_us != Some(b) {
                        misses.push(format!("{tag}: expected final budget {b}, got {:?}", o.deadline_budget_us));
                    }
                }
            }
        }
        misses
    }

    /// Deadline budgets per flow, ns, for attribution.
    pub fn budgets_ns(&self) -> BTreeMap<String, u64> {
        self.flows
            .iter()
            .filter_map(|f| f.deadline_us.map(|b| (f.name.clone(), u64::from(b) * 1000)))
            .collect()
    }

    fn min_residual(&self, node: NodeIdx, destination: Ipv6Addr) -> Option<u32> {
        self.feasibility[node]
            .iter()
            .filter(|(p, _)| p.contains(destination))
            .max_by_key(|(p, _)| p.len())
            .map(|(_, v)| *v)
    }

    fn stamp_time(&self, node: NodeIdx, t: u64) -> u64 {
        (t as i64 + self.clock_offsets[node]).max(1) as u64
    }
}

/// Delivery time minus injection time.
pub fn end_to_end_delay(log: &TraceLog, flow: &str, seq: u32) -> Result<u64, SimError> {
    match log.outcome(flow, seq) {
        Some(o) if o.delivered() => Ok(o.finished_at - o.injected_at),
        _ => Err(SimError::NotDelivered {
            flow: flow.to_string(),
            seq,
        }),
    }
}

fn typed_option<T>(
    packet: &mut Packet,
    option_type: u8,
    decode: impl Fn(&TlvOption) -> Result<T, crate::wire::WireError>,
) -> Option<(usize, T)> {
    let opts = packet.routing.as_mut()?.options_mut()?;
    let (i, o) = options::find(opts, option_type)?;
    decode(o).ok().map(|v| (i, v))
}

fn put_option(packet: &mut Packet, index: usize, tlv: TlvOption) {
    if let Some(opts) = packet.routing.as_mut().and_then(|r| r.options_mut()) {
        opts[index] = tlv;
    }
}

fn is_dlr(packet: &Packet) -> bool {
    matches!(packet.routing, Some(RoutingHeader::Dlsr(_)) | Some(RoutingHeader::Dbd(_)))
}

fn domains_left(packet: &Packet) -> Option<u8> {
    packet.dlsr().map(|h| h.domains_left)
}

impl Run<'_> {
    fn push(&mut self, time: u64, kind: EventKind) {
        self.queue.push(Event {
            time,
            order: self.order,
            kind,
        });
        self.order += 1;
    }

    fn inject(&mut self, now: u64, flow: usize, seq: u32) {
        let sim = self.sim;
        let plan = &sim.flows[flow];
        let node = &sim.topology.nodes[plan.src];
        let payload = payload_for(flow, seq, plan.payload_len);
        let mut packet = Packet::new(node.primary_address(), plan.destination, payload.clone());
        packet.base.hop_limit = INITIAL_HOP_LIMIT;
        let packet = match plan.mode {
            Mode::Plain => packet,
            Mode::Dbd => forwarding::encapsulate_dbd(packet, plan.options.clone()),
            Mode::Dlsr => {
                let path = plan.path.as_deref().unwrap_or_default();
                forwarding::encapsulate_dlsr(packet, path, plan.options.clone())
                    .expect("path validated at build")
            }
        };
        let id = self.packets.len();
        self.packets.push(Some(InFlight {
            flow,
            seq,
            packet,
            payload,
            injected_at: now,
            domains: vec![node.domain],
            entered_at: now,
            left_source: false,
            debits: Vec::new(),
            overrun: 0,
        }));
        self.handle(now, plan.src, id, None);
    }

    fn handle(&mut self, now: u64, n: NodeIdx, id: usize, via: Option<usize>) {
        let sim = self.sim;
        let topo = &sim.topology;
        let node = &topo.nodes[n];
        let mut p = self.packets[id].take().expect("packet in flight");
        let mut notes = Vec::new();
        let rh_before = p.packet.routing.clone();
        let dest_before = p.packet.base.destination;
        let dl_before = domains_left(&p.packet);
        let border_dlr = node.kind == NodeKind::Border && is_dlr(&p.packet);
        let ingress = via.is_some_and(|l| topo.is_inter_domain(l));
        let depart = now + sim.processing_ns[kind_slot(node.kind)];

        let mut verdict: Option<ForwardingAction> = None;
        if ingress {
            if p.domains.contains(&node.domain) {
                notes.push(format!("revisit {}", node.domain));
            }
            p.domains.push(node.domain);
            p.entered_at = now;
            if border_dlr {
                verdict = self.ingress_duties(n, &mut p, now, &mut notes);
            }
        }

        let action = match verdict {
            Some(a) => a,
            None if via.is_none() => forwarding::host_send(node, &sim.routing.fibs[n], &p.packet.base),
            None => {
                let (packet, action) =
                    forwarding::process(node, &sim.routing.dets[n], &sim.routing.fibs[n], p.packet);
                p.packet = packet;
                action
            }
        };

        let mut action = action;
        let mut egress = false;
        let mut hop = None;
        if let ForwardingAction::ForwardTo(nh) = action {
            match topo.link_toward(n, nh) {
                Some((link, next)) => {
                    egress = topo.is_inter_domain(link);
                    hop = Some((link, next));
                }
                None => action = ForwardingAction::Drop(DropReason::NextHopUnreachable),
            }
        }
        if egress && border_dlr {
            self.egress_duties(n, &mut p, depart, &mut notes);
        }
        if matches!(action, ForwardingAction::Deliver) && is_dlr(&p.packet) {
            self.sink_duties(n, &mut p, depart, &mut notes);
        }

        let role = match (via.is_none(), ingress, egress, action) {
            (true, ..) => Role::Source,
            (_, true, true, _) => Role::IngressEgress,
            (_, true, false, _) => Role::Ingress,
            (_, false, true, _) => Role::Egress,
            (_, _, _, ForwardingAction::Deliver) => Role::Sink,
            _ => Role::Transit,
        };
        let plan = &sim.flows[p.flow];
        let (step_action, next_hop, drop_reason) = match action {
            ForwardingAction::ForwardTo(nh) => (StepAction::Forward, Some(nh), None),
            ForwardingAction::Deliver => (StepAction::Deliver, None, None),
            ForwardingAction::Drop(r) => (StepAction::Drop, None, Some(r)),
        };
        self.log.steps.push(Step {
            time: now,
            flow: plan.name.clone(),
            seq: p.seq,
            node: node.node_id.clone(),
            domain: node.domain,
            role,
            action: step_action,
            next_hop,
            domains_left_before: dl_before,
            domains_left_after: domains_left(&p.packet),
            destination_before: dest_before,
            destination_after: p.packet.base.destination,
            drop_reason,
            rh_modified: rh_before != p.packet.routing,
            notes,
        });

        match action {
            ForwardingAction::ForwardTo(_) => {
                let (link, next) = hop.expect("resolved above");
                let l = &topo.links[link];
                let jitter = if l.jitter_us > 0 {
                    self.rngs[link].gen_range(0..=l.jitter_us * 1000)
                } else {
                    0
                };
                let arrive = depart + l.latency_us * 1000 + jitter;
                self.packets[id] = Some(p);
                self.push(arrive, EventKind::Arrive { node: next, packet: id, link });
            }
            ForwardingAction::Deliver => self.finish(id, p, n, depart, None),
            ForwardingAction::Drop(r) => self.finish(id, p, n, now, Some(r)),
        }
    }

    /// Telemetry ingress stamp, service chain step and deadline check.
    fn ingress_duties(
        &mut self,
        n: NodeIdx,
        p: &mut InFlight,
        now: u64,
        notes: &mut Vec<String>,
    ) -> Option<ForwardingAction> {
        let sim = self.sim;
        let domain = sim.topology.nodes[n].domain;
        if let Some((i, mut t)) = typed_option(&mut p.packet, OPT_TELEMETRY, TelemetryOption::from_tlv) {
            let outcome = telemetry_stamp(&mut t, domain, sim.stamp_time(n, now), Boundary::Ingress);
            notes.push(stamp_note("ingress", outcome));
            put_option(&mut p.packet, i, t.to_tlv());
        }
        self.chain_step(p, domain, notes);
        if let Some((_, d)) = typed_option(&mut p.packet, OPT_DEADLINE, DeadlineOption::from_tlv) {
            let od = p.packet.routing.as_ref().and_then(|r| r.original_destination());
            if let Some(bound) = od.and_then(|od| sim.min_residual(n, od)) {
                let f = deadline_check(&d, bound);
                notes.push(format!(
                    "deadline:check {} budget={} bound={bound}",
                    if f == Feasibility::Pass { "pass" } else { "fail" },
                    d.budget_remaining
                ));
                if f == Feasibility::Fail {
                    return Some(ForwardingAction::Drop(DropReason::DeadlineInfeasible));
                }
            }
        }
        None
    }

    fn chain_step(&self, p: &mut InFlight, domain: DomainId, notes: &mut Vec<String>) {
        let Some((i, c)) = typed_option(&mut p.packet, OPT_SERVICE_CHAIN, ServiceChainOption::from_tlv) else {
            return;
        };
        let functions = self.sim.chains.get(&c.chain_id).map(Vec::as_slice).unwrap_or_default();
        let pos = functions.len().checked_sub(usize::from(c.service_index));
        let hosts = match pos {
            Some(k) if k < functions.len() => functions[k] == domain,
            _ => functions.contains(&domain),
        };
        let step = service_chain_step(&c, hosts);
        if step.applied {
            notes.push(format!("sfc:applied chain={} index={}", c.chain_id, step.option.service_index));
            put_option(&mut p.packet, i, step.option.to_tlv());
        } else if step.chain_complete {
            notes.push(format!("sfc:complete chain={}", c.chain_id));
        }
    }

    /// Closes the domain's telemetry record and debits its residence.
    fn egress_duties(&mut self, n: NodeIdx, p: &mut InFlight, depart: u64, notes: &mut Vec<String>) {
        let sim = self.sim;
        let domain = sim.topology.nodes[n].domain;
        if let Some((i, mut t)) = typed_option(&mut p.packet, OPT_TELEMETRY, TelemetryOption::from_tlv) {
            let ts = sim.stamp_time(n, depart);
            if !p.left_source {
                // Hosts do not stamp: the source domain's record opens here.
                let o = telemetry_stamp(&mut t, domain, ts, Boundary::Ingress);
                notes.push(stamp_note("open", o));
            }
            let o = telemetry_stamp(&mut t, domain, ts, Boundary::Egress);
            notes.push(stamp_note("egress", o));
            put_option(&mut p.packet, i, t.to_tlv());
        }
        if !p.left_source {
            self.chain_step(p, domain, notes);
        }
        self.debit(p, depart, notes);
        p.left_source = true;
    }

    fn sink_duties(&mut self, n: NodeIdx, p: &mut InFlight, at: u64, notes: &mut Vec<String>) {
        let sim = self.sim;
        let domain = sim.topology.nodes[n].domain;
        if let Some((i, mut t)) = typed_option(&mut p.packet, OPT_TELEMETRY, TelemetryOption::from_tlv) {
            if t.records.last().is_some_and(|r| r.domain == domain && !r.is_complete()) {
                let o = telemetry_stamp(&mut t, domain, sim.stamp_time(n, at), Boundary::Egress);
                notes.push(stamp_note("sink", o));
                put_option(&mut p.packet, i, t.to_tlv());
            }
        }
        self.debit(p, at, notes);
    }

    fn debit(&mut self, p: &mut InFlight, at: u64, notes: &mut Vec<String>) {
        let Some((i, d)) = typed_option(&mut p.packet, OPT_DEADLINE, DeadlineOption::from_tlv) else {
            return;
        };
        let residence = ((at - p.entered_at) / 1000).min(u64::from(u32::MAX)) as u32;
        let debit = deadline_debit(&d, residence);
        notes.push(format!("deadline:debit {residence}us remaining={}", debit.option.budget_remaining));
        p.debits.push(residence);
        p.overrun = p.overrun.saturating_add(debit.overrun);
        put_option(&mut p.packet, i, debit.option.to_tlv());
    }

    fn finish(&mut self, id: usize, mut p: InFlight, n: NodeIdx, at: u64, drop: Option<DropReason>) {
        let sim = self.sim;
        let plan = &sim.flows[p.flow];
        let deadline = typed_option(&mut p.packet, OPT_DEADLINE, DeadlineOption::from_tlv).map(|(_, d)| d);
        let routing = p.packet.routing.as_ref();
        let outcome = Outcome {
            flow: plan.name.clone(),
            seq: p.seq,
            status: if drop.is_some() { Status::Dropped } else { Status::Delivered },
            drop_reason: drop,
            node: sim.topology.nodes[n].node_id.clone(),
            injected_at: p.injected_at,
            finished_at: at,
            domains: p.domains.clone(),
            destination: p.packet.base.destination,
            original_destination: routing.and_then(|r| r.original_destination()),
            payload_intact: p.packet.payload == p.payload,
            routing_header: routing.and_then(|r| r.encode().ok()).map(|b| crate::wire::to_hex(&b)),
            deadline_budget_us: deadline.map(|d| d.budget_remaining),
            deadline_debits_us: p.debits.clone(),
            deadline_overrun_us: p.overrun,
        };
        self.finished.push((at, id, outcome, p.packet));
    }
}

fn stamp_note(what: &str, outcome: StampOutcome) -> String {
    match outcome {
        StampOutcome::Stamped => format!("telemetry:{what}"),
        StampOutcome::Overflow => format!("telemetry:{what} overflow"),
        StampOutcome::MismatchedEgress => format!("telemetry:{what} mismatch"),
    }
}
