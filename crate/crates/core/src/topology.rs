//! Domains, nodes and links. Inter-domain links are the peerings: both
//! endpoints must be border routers of different domains.

use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::net::Ipv6Addr;

use thiserror::Error;

use crate::forwarding::{NodeIdentity, NodeKind};
use crate::tables::Prefix;
use crate::wire::DomainId;

pub type NodeIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    /// Location of the offending field, e.g. `links[3].b`.
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationError {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub id: DomainId,
    pub prefixes: Vec<Prefix>,
    /// Maximum committed residence time, if the domain has an SLA.
    pub sla_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub a: NodeIdx,
    pub b: NodeIdx,
    pub latency_us: u64,
    pub jitter_us: u64,
}

impl Link {
    pub fn other(&self, n: NodeIdx) -> NodeIdx {
        if self.a == n {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeeringSession {
    pub local_dbr: NodeIdx,
    pub remote_dbr: NodeIdx,
    pub remote_domain: DomainId,
    pub remote_ingress_address: Ipv6Addr,
    pub link: usize,
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub domains: Vec<Domain>,
    pub nodes: Vec<NodeIdentity>,
    pub links: Vec<Link>,
    by_name: HashMap<String, NodeIdx>,
    by_addr: HashMap<Ipv6Addr, NodeIdx>,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Validates and indexes a topology.
    pub fn new(
        domains: Vec<Domain>,
        nodes: Vec<NodeIdentity>,
        links: Vec<Link>,
    ) -> Result<Self, ValidationError> {
        let mut seen_domains = BTreeMap::new();
        for (i, d) in domains.iter().enumerate() {
            if seen_domains.insert(d.id, i).is_some() {
                return Err(ValidationError::new(format!("domains[{i}].id"), format!("duplicate domain {}", d.id)));
            }
        }
        let mut by_name = HashMap::new();
        let mut by_addr = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if by_name.insert(n.node_id.clone(), i).is_some() {
                return Err(ValidationError::new(format!("nodes[{i}].id"), format!("duplicate node `{}`", n.node_id)));
            }
            if !seen_domains.contains_key(&n.domain) {
                return Err(ValidationError::new(format!("nodes[{i}].domain"), format!("unknown domain {}", n.domain)));
            }
            if n.addresses.is_empty() {
                return Err(ValidationError::new(format!("nodes[{i}].addresses"), "node has no address"));
            }
            for (j, a) in n.addresses.iter().enumerate() {
                if by_addr.insert(*a, i).is_some() {
                    return Err(ValidationError::new(format!("nodes[{i}].addresses[{j}]"), format!("address {a} assigned twice")));
                }
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            for (end, n) in [("a", l.a), ("b", l.b)] {
                if n >= nodes.len() {
                    return Err(ValidationError::new(format!("links[{i}].{end}"), "unknown node"));
                }
            }
            if l.a == l.b {
                return Err(ValidationError::new(format!("links[{i}]"), "link connects a node to itself"));
            }
            if l.latency_us == 0 {
                return Err(ValidationError::new(format!("links[{i}].latency_us"), "latency must be positive"));
            }
            let (na, nb) = (&nodes[l.a], &nodes[l.b]);
            if na.domain != nb.domain && (na.kind != NodeKind::Border || nb.kind != NodeKind::Border) {
                return Err(ValidationError::new(
                    format!("links[{i}]"),
                    format!("inter-domain link {}-{} must join two border routers", na.node_id, nb.node_id),
                ));
            }
            adjacency[l.a].push(i);
            adjacency[l.b].push(i);
        }
        Ok(Topology {
            domains,
            nodes,
            links,
            by_name,
            by_addr,
            adjacency,
        })
    }

    pub fn node_index(&self, name: &str) -> Option<NodeIdx> {
        self.by_name.get(name).copied()
    }

    pub fn node_by_addr(&self, addr: Ipv6Addr) -> Option<NodeIdx> {
        self.by_addr.get(&addr).copied()
    }

    pub fn domain(&self, id: DomainId) -> Option<&Domain> {
        self.domains.iter().find(|d| d.id == id)
    }

    /// Links incident to `n`, in declaration order.
    pub fn links_of(&self, n: NodeIdx) -> impl Iterator<Item = (usize, &Link)> + '_ {
        self.adjacency[n].iter().map(move |&i| (i, &self.links[i]))
    }

    /// The link from `from` to the neighbor owning `addr`, if adjacent.
    pub fn link_toward(&self, from: NodeIdx, addr: Ipv6Addr) -> Option<(usize, NodeIdx)> {
        let target = self.node_by_addr(addr)?;
        self.adjacency[from]
            .iter()
            .find(|&&l| self.links[l].other(from) == target)
            .map(|&l| (l, target))
    }

    pub fn is_inter_domain(&self, link: usize) -> bool {
        let l = &self.links[link];
        self.nodes[l.a].domain != self.nodes[l.b].domain
    }

    /// Domain owning `addr` by node address or by domain prefix.
    pub fn owner_of(&self, addr: Ipv6Addr) -> Option<DomainId> {
        if let Some(n) = self.node_by_addr(addr) {
            return Some(self.nodes[n].domain);
        }
        self.domains
            .iter()
            .filter_map(|d| {
                d.prefixes
                    .iter()
                    .filter(|p| p.contains(addr))
                    .map(|p| p.len())
                    .max()
                    .map(|len| (len, d.id))
            })
            .max_by_key(|(len, _)| *len)
            .map(|(_, id)| id)
    }

    pub fn nodes_in(&self, domain: DomainId) -> impl Iterator<Item = NodeIdx> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.nodes[i].domain == domain)
    }

    /// Peering sessions of DBR `n`, one per inter-domain link, link order.
    pub fn sessions_of(&self, n: NodeIdx) -> Vec<PeeringSession> {
        self.links_of(n)
            .filter(|(i, _)| self.is_inter_domain(*i))
            .map(|(i, l)| {
                let remote = l.other(n);
                PeeringSession {
                    local_dbr: n,
                    remote_dbr: remote,
                    remote_domain: self.nodes[remote].domain,
                    remote_ingress_address: self.nodes[remote].primary_address(),
                    link: i,
                }
            })
            .collect()
    }

    /// Domain adjacency derived from the peerings.
    pub fn domain_graph(&self) -> BTreeMap<DomainId, Vec<DomainId>> {
        let mut g: BTreeMap<DomainId, Vec<DomainId>> =
            self.domains.iter().map(|d| (d.id, Vec::new())).collect();
        for (i, l) in self.links.iter().enumerate() {
            if self.is_inter_domain(i) {
                let (da, db) = (self.nodes[l.a].domain, self.nodes[l.b].domain);
                for (x, y) in [(da, db), (db, da)] {
                    let v = g.entry(x).or_default();
                    if !v.contains(&y) {
                        v.push(y);
                    }
                }
            }
        }
        for v in g.values_mut() {
            v.sort();
        }
        g
    }

    /// Shortest paths by latency from `src` over links inside its domain.
    /// Returns per node `(distance_us, first_hop)`; ties go to the lower
    /// node index.
    pub fn intra_domain_paths(&self, src: NodeIdx) -> Vec<Option<(u64, NodeIdx)>> {
        let domain = self.nodes[src].domain;
        let mut best: Vec<Option<(u64, NodeIdx)>> = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        best[src] = Some((0, src));
        heap.push(Reverse((0u64, src, src)));
        let mut done = vec![false; self.nodes.len()];
        while let Some(Reverse((dist, n, first))) = heap.pop() {
            if done[n] {
                continue;
            }
            done[n] = true;
            best[n] = Some((dist, first));
            for (_, l) in self.links_of(n) {
                let m = l.other(n);
                if self.nodes[m].domain != domain || done[m] {
                    continue;
                }
                let hop = if n == src { m } else { first };
                let cand = (dist + l.latency_us, hop);
                let better = match best[m] {
                    None => true,
                    Some(cur) => cand < cur,
                };
                if better {
                    best[m] = Some(cand);
                    heap.push(Reverse((cand.0, m, cand.1)));
                }
            }
        }
        best
    }
}
