#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use dlr_core::sim::gen::{self, GenParams};
use dlr_core::sim::scenario::{FlowOptions, Mode, Scenario};
use dlr_core::sim::{self, Simulation, TraceLog};
use dlr_core::tables::Prefix;
use dlr_core::DomainId;

/// Hop count between two domains by breadth-first search.
pub fn bfs(graph: &BTreeMap<DomainId, Vec<DomainId>>, src: DomainId, dst: DomainId) -> Option<usize> {
    let mut dist = BTreeMap::from([(src, 0usize)]);
    let mut queue = VecDeque::from([src]);
    while let Some(d) = queue.pop_front() {
        if d == dst {
            return dist.get(&d).copied();
        }
        for &n in graph.get(&d).into_iter().flatten() {
            if !dist.contains_key(&n) {
                dist.insert(n, dist[&d] + 1);
                queue.push_back(n);
            }
        }
    }
    None
}

/// Random topology with one DBD packet per ordered domain pair, each
/// carrying a deadline and a full-size telemetry option.
pub fn dbd_corpus_scenario(seed: u64) -> Scenario {
    let mut sc = gen::random_scenario(seed, &GenParams::default());
    sc.flows = gen::all_pairs_flows(&sc, Mode::Dbd);
    for f in &mut sc.flows {
        f.options = FlowOptions {
            deadline_us: Some(1_000_000),
            telemetry: Some(12),
            service_chain: None,
        };
    }
    sc
}

/// Source and destination domain positions encoded in a generated flow name.
pub fn pair_of(flow: &str) -> (usize, usize) {
    let (s, d) = flow.split_once('-').expect("generated flow name");
    (s.parse().unwrap(), d.parse().unwrap())
}

/// The converged AS path from the source host of `flow` to its destination.
pub fn converged_path(sim: &Simulation, sc: &Scenario, flow: &str) -> Option<Vec<DomainId>> {
    let (s, d) = pair_of(flow);
    let host = sim.topology.node_index(&gen::host_name(s)).unwrap();
    let prefix: Prefix = sc.domains[d].prefixes[0];
    sim.routing.domain_path(host, &prefix).map(<[DomainId]>::to_vec)
}

pub fn run(sc: &Scenario) -> (Simulation, TraceLog) {
    let s = sim::build(sc).expect("scenario builds");
    let log = s.run(None);
    (s, log)
}
