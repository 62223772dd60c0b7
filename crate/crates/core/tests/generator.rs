mod common;

use dlr_core::forwarding::NodeKind;
use dlr_core::sim::gen::{all_pairs_flows, random_scenario, GenParams};
use dlr_core::sim::{self, Mode, Scenario};

#[test]
fn same_seed_same_topology() {
    let p = GenParams::default();
    assert_eq!(random_scenario(42, &p), random_scenario(42, &p));
    assert_ne!(random_scenario(42, &p), random_scenario(43, &p));
}

#[test]
fn sizes_within_bounds_and_toml_round_trips() {
    let p = GenParams { min_domains: 3, max_domains: 6, ..Default::default() };
    for seed in 0..30 {
        let sc = random_scenario(seed, &p);
        assert!((3..=6).contains(&sc.domains.len()));
        for d in &sc.domains {
            let dbrs = sc.nodes.iter().filter(|n| n.domain == d.id && n.kind == NodeKind::Border).count();
            assert!((1..=4).contains(&dbrs));
        }
        assert_eq!(Scenario::from_toml(&sc.to_toml()).unwrap(), sc);
    }
}

#[test]
fn default_topologies_are_connected() {
    for seed in 0..20 {
        let sc = random_scenario(seed, &GenParams::default());
        let s = sim::build(&sc).unwrap();
        let graph = s.topology.domain_graph();
        let ids: Vec<_> = graph.keys().copied().collect();
        for &d in &ids[1..] {
            assert!(common::bfs(&graph, ids[0], d).is_some(), "seed {seed}");
        }
    }
}

#[test]
fn all_pairs_flow_names() {
    let mut sc = random_scenario(5, &GenParams { min_domains: 4, max_domains: 4, ..Default::default() });
    sc.flows = all_pairs_flows(&sc, Mode::Plain);
    assert_eq!(sc.flows.len(), 12);
    assert_eq!(sc.flows[0].name, "0-1");
    let log = sim::build(&sc).unwrap().run(None);
    assert_eq!(log.delivered(), 12);
}
