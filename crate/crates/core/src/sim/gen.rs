//! Seeded random multi-domain topologies.
//!
//! Every domain gets one interior router, one host and 1..=`max_dbrs`
//! border routers, each border router linked to the interior. Peerings
//! form a random spanning tree over the domains plus extra random edges,
//! each between randomly chosen border routers of the two domains.

use std::net::Ipv6Addr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forwarding::NodeKind;
use crate::tables::Prefix;

use super::scenario::{DomainSpec, FlowOptions, FlowSpec, LinkSpec, Mode, NodeSpec, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub min_domains: usize,
    pub max_domains: usize,
    pub max_dbrs: usize,
    /// Chance, per unordered domain pair, of an extra peering beyond the tree.
    pub extra_peering: f64,
    /// Leave the spanning tree out, so some domains may be unreachable.
    pub allow_partition: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            min_domains: 2,
            max_domains: 20,
            max_dbrs: 4,
            extra_peering: 0.15,
            allow_partition: false,
        }
    }
}

fn addr(domain_slot: usize, host: usize) -> Ipv6Addr {
    Ipv6Addr::new(0xfd00, 0, domain_slot as u16, 0, 0, 0, 0, host as u16)
}

/// Host node id of the domain at position `k` in the scenario.
pub fn host_name(k: usize) -> String {
    format!("h{k}")
}

pub fn random_scenario(seed: u64, params: &GenParams) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(params.min_domains..=params.max_domains);
    let mut ids: Vec<u32> = (1..=(4 * n as u32).max(8)).collect();
    ids.shuffle(&mut rng);
    ids.truncate(n);

    let mut domains = Vec::with_capacity(n);
    let mut nodes = Vec::new();
    let mut links = Vec::new();
    let mut dbrs: Vec<Vec<String>> = Vec::with_capacity(n);
    for (k, &id) in ids.iter().enumerate() {
        let slot = k + 1;
        domains.push(DomainSpec {
            id,
            prefixes: vec![Prefix::new(addr(slot, 0), 48).expect("aligned")],
            sla_us: None,
        });
        let node = |name: String, kind, host| NodeSpec {
            id: name,
            kind,
            domain: id,
            addresses: vec![addr(slot, host)],
            clock_offset_ns: 0,
        };
        let interior = format!("r{k}");
        nodes.push(node(interior.clone(), NodeKind::Interior, 1));
        nodes.push(node(host_name(k), NodeKind::Host, 2));
        links.push(LinkSpec {
            a: host_name(k),
            b: interior.clone(),
            latency_us: rng.gen_range(1..=20),
            jitter_us: 0,
        });
        let count = rng.gen_range(1..=params.max_dbrs);
        let mut mine = Vec::with_capacity(count);
        for j in 0..count {
            let name = format!("b{k}_{j}");
            nodes.push(node(name.clone(), NodeKind::Border, 0x10 + j));
            links.push(LinkSpec {
                a: name.clone(),
                b: interior.clone(),
                latency_us: rng.gen_range(1..=50),
                jitter_us: 0,
            });
            mine.push(name);
        }
        dbrs.push(mine);
    }

    let mut pairs = Vec::new();
    if !params.allow_partition {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for i in 1..n {
            let parent = order[rng.gen_range(0..i)];
            pairs.push((order[i], parent));
        }
    }
    for x in 0..n {
        for y in (x + 1)..n {
            let present = pairs.iter().any(|&(a, b)| (a, b) == (x, y) || (a, b) == (y, x));
            if !present && rng.gen_bool(params.extra_peering) {
                pairs.push((x, y));
            }
        }
    }
    for (x, y) in pairs {
        let a = dbrs[x].choose(&mut rng).expect("nonempty").clone();
        let b = dbrs[y].choose(&mut rng).expect("nonempty").clone();
        links.push(LinkSpec {
            a,
            b,
            latency_us: rng.gen_range(100..=2000),
            jitter_us: 0,
        });
    }

    Scenario {
        seed,
        processing: Default::default(),
        domains,
        nodes,
        links,
        records: vec![],
        feasibility: vec![],
        service_chains: vec![],
        flows: vec![],
    }
}

/// One single-packet flow per ordered pair of distinct domains, host to host.
pub fn all_pairs_flows(scenario: &Scenario, mode: Mode) -> Vec<FlowSpec> {
    let n = scenario.domains.len();
    let mut flows = Vec::with_capacity(n * n.saturating_sub(1));
    for s in 0..n {
        for d in 0..n {
            if s == d {
                continue;
            }
            flows.push(FlowSpec {
                name: format!("{s}-{d}"),
                src: host_name(s),
                dst: Some(addr(d + 1, 2)),
                resolve: None,
                mode,
                path: None,
                start_us: 0,
                count: 1,
                interval_us: 1000,
                payload_len: 16,
                options: FlowOptions::default(),
                expect: None,
            });
        }
    }
    flows
}
