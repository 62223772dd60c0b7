//! Path-vector route dissemination between border routers.
//!
//! Each DBR keeps, per prefix, the latest route heard from every peering
//! session and from every sibling DBR of its own domain (a full internal
//! mesh). The best route is the shortest AS path, ties broken by the
//! lexicographically smaller path, then by source. Exchange runs in
//! synchronous rounds until no messages remain.
//!
//! After convergence every node gets a FIB: host routes for its own
//! domain's nodes (shortest latency path), host routes for the foreign DBR
//! interfaces adjacent to the domain, and one route per foreign prefix
//! pointing at the closest DBR that holds the domain's best path.

use std::collections::BTreeMap;
use std::net::Ipv6Addr;

use thiserror::Error;

use crate::forwarding::{NodeIdentity, NodeKind};
use crate::tables::{DomainEntryTable, Fib, Prefix, RouteEntry};
use crate::topology::{NodeIdx, PeeringSession, Topology};
use crate::wire::DomainId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error("route exchange did not converge within {rounds} rounds ({pending} messages pending)")]
    NonConvergence { rounds: usize, pending: usize },
    #[error("{prefix} is not a prefix of {domain}")]
    ForeignPrefix { prefix: Prefix, domain: DomainId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteUpdate {
    pub prefix: Prefix,
    /// Starts with the advertising neighbor's domain.
    pub as_path: Vec<DomainId>,
    pub advertiser_address: Ipv6Addr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Advert {
    Announce(RouteUpdate),
    Withdraw(Prefix),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    /// Index into the sender's session list.
    Session(usize),
    Sibling(NodeIdx),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outbound {
    pub to: Target,
    pub advert: Advert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RouteSource {
    Local,
    Peer(usize),
    Sibling(NodeIdx),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub as_path: Vec<DomainId>,
    pub source: RouteSource,
    /// Address of the neighbor DBR the route was heard from (peer routes).
    pub next_hop: Option<Ipv6Addr>,
}

impl Candidate {
    fn rank(&self) -> (usize, &[DomainId], RouteSource) {
        (self.as_path.len(), &self.as_path, self.source)
    }
}

/// Routing state of one DBR.
#[derive(Debug, Clone)]
pub struct DbrState {
    pub node: NodeIdentity,
    pub index: NodeIdx,
    pub sessions: Vec<PeeringSession>,
    pub siblings: Vec<NodeIdx>,
    pub local_prefixes: Vec<Prefix>,
    rib_in: BTreeMap<Prefix, BTreeMap<RouteSource, Candidate>>,
    best: BTreeMap<Prefix, Candidate>,
    pub det: DomainEntryTable,
}

impl DbrState {
    pub fn new(topology: &Topology, index: NodeIdx) -> Self {
        let node = topology.nodes[index].clone();
        let siblings = topology
            .nodes_in(node.domain)
            .filter(|&n| n != index && topology.nodes[n].kind == NodeKind::Border)
            .collect();
        let local_prefixes = topology
            .domain(node.domain)
            .map(|d| d.prefixes.clone())
            .unwrap_or_default();
        DbrState {
            sessions: topology.sessions_of(index),
            node,
            index,
            siblings,
            local_prefixes,
            rib_in: BTreeMap::new(),
            best: BTreeMap::new(),
            det: DomainEntryTable::new(),
        }
    }

    pub fn best(&self, prefix: &Prefix) -> Option<&Candidate> {
        self.best.get(prefix)
    }

    pub fn best_routes(&self) -> impl Iterator<Item = (&Prefix, &Candidate)> {
        self.best.iter()
    }

    /// Installs the domain's own prefixes and returns their announcements.
    pub fn originate_all(&mut self) -> Result<Vec<Outbound>, ControlError> {
        let mut out = Vec::new();
        for prefix in self.local_prefixes.clone() {
            originate(&self.node, prefix, &self.local_prefixes)?;
            self.rib_in.entry(prefix).or_default().insert(
                RouteSource::Local,
                Candidate {
                    as_path: Vec::new(),
                    source: RouteSource::Local,
                    next_hop: None,
                },
            );
            out.extend(self.reselect(prefix));
        }
        Ok(out)
    }

    /// Handles an announcement or withdrawal heard on `session`.
    pub fn process_update(&mut self, session: &PeeringSession, advert: &Advert) -> Vec<Outbound> {
        let Some(idx) = self.sessions.iter().position(|s| s == session) else {
            return Vec::new();
        };
        let source = RouteSource::Peer(idx);
        match advert {
            Advert::Withdraw(prefix) => self.forget(*prefix, source),
            Advert::Announce(update) => {
                if update.as_path.is_empty() || update.as_path.contains(&self.node.domain) {
                    // Loop: the neighbor's route no longer usable.
                    return self.forget(update.prefix, source);
                }
                self.rib_in.entry(update.prefix).or_default().insert(
                    source,
                    Candidate {
                        as_path: update.as_path.clone(),
                        source,
                        next_hop: Some(update.advertiser_address),
                    },
                );
                self.reselect(update.prefix)
            }
        }
    }

    /// Handles a route shared by a sibling DBR of the same domain.
    pub fn process_sibling(&mut self, from: NodeIdx, advert: &Advert) -> Vec<Outbound> {
        let source = RouteSource::Sibling(from);
        match advert {
            Advert::Withdraw(prefix) => self.forget(*prefix, source),
            Advert::Announce(update) => {
                if update.as_path.contains(&self.node.domain) {
                    return self.forget(update.prefix, source);
                }
                self.rib_in.entry(update.prefix).or_default().insert(
                    source,
                    Candidate {
                        as_path: update.as_path.clone(),
                        source,
                        next_hop: None,
                    },
                );
                self.reselect(update.prefix)
            }
        }
    }

    fn forget(&mut self, prefix: Prefix, source: RouteSource) -> Vec<Outbound> {
        let removed = self
            .rib_in
            .get_mut(&prefix)
            .and_then(|m| m.remove(&source))
            .is_some();
        if removed {
            self.reselect(prefix)
        } else {
            Vec::new()
        }
    }

    fn reselect(&mut self, prefix: Prefix) -> Vec<Outbound> {
        let new_best = self
            .rib_in
            .get(&prefix)
            .and_then(|m| m.values().min_by(|a, b| a.rank().cmp(&b.rank())))
            .cloned();
        if self.best.get(&prefix) == new_best.as_ref() {
            return Vec::new();
        }
        let mut out = Vec::new();
        match &new_best {
            Some(c) => {
                if let (RouteSource::Peer(_), Some(nh), Some(first)) =
                    (c.source, c.next_hop, c.as_path.first())
                {
                    self.det.insert(*first, nh);
                }
                let mut path = Vec::with_capacity(c.as_path.len() + 1);
                path.push(self.node.domain);
                path.extend_from_slice(&c.as_path);
                for s in 0..self.sessions.len() {
                    out.push(Outbound {
                        to: Target::Session(s),
                        advert: Advert::Announce(RouteUpdate {
                            prefix,
                            as_path: path.clone(),
                            advertiser_address: self.node.primary_address(),
                        }),
                    });
                }
                let to_siblings = match c.source {
                    RouteSource::Peer(_) => Some(Advert::Announce(RouteUpdate {
                        prefix,
                        as_path: c.as_path.clone(),
                        advertiser_address: self.node.primary_address(),
                    })),
                    RouteSource::Sibling(_) => Some(Advert::Withdraw(prefix)),
                    RouteSource::Local => None,
                };
                if let Some(advert) = to_siblings {
                    out.extend(self.siblings.iter().map(|&n| Outbound {
                        to: Target::Sibling(n),
                        advert: advert.clone(),
                    }));
                }
                self.best.insert(prefix, c.clone());
            }
            None => {
                self.best.remove(&prefix);
                for s in 0..self.sessions.len() {
                    out.push(Outbound {
                        to: Target::Session(s),
                        advert: Advert::Withdraw(prefix),
                    });
                }
                out.extend(self.siblings.iter().map(|&n| Outbound {
                    to: Target::Sibling(n),
                    advert: Advert::Withdraw(prefix),
                }));
            }
        }
        out
    }
}

/// The announcement a DBR makes for one of its own domain's prefixes.
pub fn originate(
    dbr: &NodeIdentity,
    prefix: Prefix,
    domain_prefixes: &[Prefix],
) -> Result<RouteUpdate, ControlError> {
    if !domain_prefixes.contains(&prefix) {
        return Err(ControlError::ForeignPrefix {
            prefix,
            domain: dbr.domain,
        });
    }
    Ok(RouteUpdate {
        prefix,
        as_path: vec![dbr.domain],
        advertiser_address: dbr.primary_address(),
    })
}

/// Converged control-plane state for every node.
#[derive(Debug, Clone)]
pub struct RoutingState {
    pub fibs: Vec<Fib>,
    /// Per node; DBRs of a domain share their domain's merged table.
    pub dets: Vec<DomainEntryTable>,
    pub dbrs: BTreeMap<NodeIdx, DbrState>,
    pub rounds: usize,
}

impl RoutingState {
    /// The best AS path the domain of `node` uses toward `prefix`.
    pub fn domain_path(&self, node: NodeIdx, prefix: &Prefix) -> Option<&[DomainId]> {
        self.fibs[node].get(prefix).map(|e| e.as_path.as_slice())
    }
}

pub fn default_round_limit(topology: &Topology) -> usize {
    16 + 4 * topology.nodes.len()
}

/// Runs route exchange to a fixpoint and builds every node's FIB and DET.
pub fn converge(topology: &Topology) -> Result<RoutingState, ControlError> {
    converge_with_limit(topology, default_round_limit(topology))
}

pub fn converge_with_limit(
    topology: &Topology,
    max_rounds: usize,
) -> Result<RoutingState, ControlError> {
    let mut dbrs: BTreeMap<NodeIdx, DbrState> = (0..topology.nodes.len())
        .filter(|&n| topology.nodes[n].kind == NodeKind::Border)
        .map(|n| (n, DbrState::new(topology, n)))
        .collect();

    let mut pending: Vec<(NodeIdx, Outbound)> = Vec::new();
    for (&n, state) in dbrs.iter_mut() {
        pending.extend(state.originate_all()?.into_iter().map(|o| (n, o)));
    }

    let mut rounds = 0;
    while !pending.is_empty() {
        if rounds >= max_rounds {
            return Err(ControlError::NonConvergence {
                rounds,
                pending: pending.len(),
            });
        }
        rounds += 1;
        let mut next = Vec::new();
        for (from, out) in std::mem::take(&mut pending) {
            match out.to {
                Target::Session(s) => {
                    let session = dbrs[&from].sessions[s].clone();
                    let receiver = session.remote_dbr;
                    let state = dbrs.get_mut(&receiver).expect("peer is a DBR");
                    let Some(back) = state
                        .sessions
                        .iter()
                        .find(|r| r.link == session.link)
                        .cloned()
                    else {
                        continue;
                    };
                    next.extend(
                        state
                            .process_update(&back, &out.advert)
                            .into_iter()
                            .map(|o| (receiver, o)),
                    );
                }
                Target::Sibling(receiver) => {
                    let state = dbrs.get_mut(&receiver).expect("sibling is a DBR");
                    next.extend(
                        state
                            .process_sibling(from, &out.advert)
                            .into_iter()
                            .map(|o| (receiver, o)),
                    );
                }
            }
        }
        pending = next;
    }

    let (fibs, dets) = build_tables(topology, &dbrs);
    Ok(RoutingState {
        fibs,
        dets,
        dbrs,
        rounds,
    })
}

fn build_tables(
    topology: &Topology,
    dbrs: &BTreeMap<NodeIdx, DbrState>,
) -> (Vec<Fib>, Vec<DomainEntryTable>) {
    let n_nodes = topology.nodes.len();
    let paths: Vec<_> = (0..n_nodes).map(|n| topology.intra_domain_paths(n)).collect();
    let mut fibs = vec![Fib::new(); n_nodes];
    let mut dets = vec![DomainEntryTable::new(); n_nodes];

    for domain in &topology.domains {
        let members: Vec<NodeIdx> = topology.nodes_in(domain.id).collect();
        let borders: Vec<NodeIdx> = members
            .iter()
            .copied()
            .filter(|&n| topology.nodes[n].kind == NodeKind::Border)
            .collect();

        // Learned entries first, then statically configured peerings for
        // neighbors no adopted route went through.
        let mut det = DomainEntryTable::new();
        for b in &borders {
            for (d, a) in dbrs[b].det.iter() {
                det.insert(d, a);
            }
        }
        for b in &borders {
            for s in &dbrs[b].sessions {
                det.insert(s.remote_domain, s.remote_ingress_address);
            }
        }

        // Foreign DBR interfaces adjacent to this domain: address -> local DBRs.
        let mut adjacent: BTreeMap<Ipv6Addr, (DomainId, Vec<NodeIdx>)> = BTreeMap::new();
        for &b in &borders {
            for s in &dbrs[&b].sessions {
                let remote = &topology.nodes[s.remote_dbr];
                for &addr in &remote.addresses {
                    adjacent
                        .entry(addr)
                        .or_insert_with(|| (remote.domain, Vec::new()))
                        .1
                        .push(b);
                }
            }
        }

        // Domain-best path per foreign prefix and the DBRs that learned it
        // from a peer.
        let mut exits: BTreeMap<Prefix, (Vec<DomainId>, Vec<(NodeIdx, Ipv6Addr)>)> = BTreeMap::new();
        for &b in &borders {
            for (prefix, cand) in dbrs[&b].best_routes() {
                if cand.source == RouteSource::Local {
                    continue;
                }
                let entry = exits
                    .entry(*prefix)
                    .or_insert_with(|| (cand.as_path.clone(), Vec::new()));
                if (cand.as_path.len(), &cand.as_path) < (entry.0.len(), &entry.0) {
                    *entry = (cand.as_path.clone(), Vec::new());
                }
                if cand.as_path == entry.0 {
                    if let (RouteSource::Peer(_), Some(nh)) = (cand.source, cand.next_hop) {
                        entry.1.push((b, nh));
                    }
                }
            }
        }

        for &n in &members {
            let reach = &paths[n];
            let fib = &mut fibs[n];
            let hop_addr = |first: NodeIdx| topology.nodes[first].primary_address();
            let closest = |candidates: &mut dyn Iterator<Item = NodeIdx>| {
                candidates
                    .filter_map(|c| reach[c].map(|(d, first)| (d, c, first)))
                    .min()
            };

            for &m in &members {
                if m == n {
                    continue;
                }
                if let Some((_, first)) = reach[m] {
                    for &addr in &topology.nodes[m].addresses {
                        fib.install(RouteEntry::intra(Prefix::host(addr), hop_addr(first)));
                    }
                }
            }

            for (&addr, (remote_domain, locals)) in &adjacent {
                let Some((_, local, first)) = closest(&mut locals.iter().copied()) else {
                    continue;
                };
                let next_hop = if local == n {
                    topology.nodes[topology.node_by_addr(addr).expect("adjacent DBR")].primary_address()
                } else {
                    hop_addr(first)
                };
                fib.install(RouteEntry::inter(Prefix::host(addr), next_hop, vec![*remote_domain]));
            }

            for (prefix, (as_path, holders)) in &exits {
                if domain.prefixes.contains(prefix) {
                    continue;
                }
                let Some((_, exit, first)) = closest(&mut holders.iter().map(|(b, _)| *b)) else {
                    continue;
                };
                let next_hop = if exit == n {
                    holders
                        .iter()
                        .find(|(b, _)| *b == n)
                        .map(|(_, nh)| *nh)
                        .expect("holder")
                } else {
                    hop_addr(first)
                };
                fib.install(RouteEntry::inter(*prefix, next_hop, as_path.clone()));
            }
            dets[n] = det.clone();
        }
    }
    (fibs, dets)
}
