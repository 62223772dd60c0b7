//! Per-node packet processing.
//!
//! Only border routers look at the domain-level routing header. Hosts and
//! interior routers forward on the base-header destination alone; their
//! entry point ([`interior_forward`]) only ever sees the base header.

use std::fmt;
use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tables::{DomainEntryTable, Fib};
use crate::wire::{
    DbdHeader, DlsrHeader, DomainId, Ipv6BaseHeader, Packet, RoutingHeader, TlvOption, WireError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Host,
    Interior,
    Border,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeIdentity {
    pub node_id: String,
    pub kind: NodeKind,
    pub domain: DomainId,
    pub addresses: Vec<Ipv6Addr>,
}

impl NodeIdentity {
    pub fn owns(&self, addr: Ipv6Addr) -> bool {
        self.addresses.contains(&addr)
    }

    /// The address used for peering and as a next hop.
    pub fn primary_address(&self) -> Ipv6Addr {
        self.addresses[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    NoRoute,
    NoRouteToNextDomain,
    HopLimitExceeded,
    Malformed,
    DeadlineInfeasible,
    NextHopUnreachable,
}

impl DropReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::NoRoute => "no-route",
            DropReason::NoRouteToNextDomain => "no-route-to-next-domain",
            DropReason::HopLimitExceeded => "hop-limit-exceeded",
            DropReason::Malformed => "malformed",
            DropReason::DeadlineInfeasible => "deadline-infeasible",
            DropReason::NextHopUnreachable => "next-hop-unreachable",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardingAction {
    ForwardTo(Ipv6Addr),
    Deliver,
    Drop(DropReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForwardingError {
    #[error("empty domain path")]
    EmptyPath,
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Adds a DLSR routing header for `path` (traversal order, source domain
/// first). The base destination is left untouched.
pub fn encapsulate_dlsr(
    mut packet: Packet,
    path: &[DomainId],
    options: Vec<TlvOption>,
) -> Result<Packet, ForwardingError> {
    if path.is_empty() {
        return Err(ForwardingError::EmptyPath);
    }
    let inner = inner_next_header(&packet);
    let header = DlsrHeader::from_path(inner, packet.base.destination, path, options)?;
    packet.routing = Some(RoutingHeader::Dlsr(header));
    packet.base.next_header = crate::wire::NEXT_HEADER_ROUTING;
    Ok(packet)
}

pub fn encapsulate_dbd(mut packet: Packet, options: Vec<TlvOption>) -> Packet {
    let inner = inner_next_header(&packet);
    packet.routing = Some(RoutingHeader::Dbd(DbdHeader {
        next_header: inner,
        original_destination: packet.base.destination,
        options,
    }));
    packet.base.next_header = crate::wire::NEXT_HEADER_ROUTING;
    packet
}

fn inner_next_header(packet: &Packet) -> u8 {
    match &packet.routing {
        Some(rh) => rh.next_header(),
        None => packet.base.next_header,
    }
}

/// Destination-based forwarding for a router; decrements the hop limit.
pub fn interior_forward(
    node: &NodeIdentity,
    fib: &Fib,
    base: &mut Ipv6BaseHeader,
) -> ForwardingAction {
    if node.owns(base.destination) {
        return ForwardingAction::Deliver;
    }
    if base.hop_limit <= 1 {
        base.hop_limit = 0;
        return ForwardingAction::Drop(DropReason::HopLimitExceeded);
    }
    base.hop_limit -= 1;
    match fib.lookup(base.destination) {
        Ok(route) => ForwardingAction::ForwardTo(route.next_hop),
        Err(_) => ForwardingAction::Drop(DropReason::NoRoute),
    }
}

/// Forwarding for a host sending its own packet (no hop-limit decrement).
pub fn host_send(node: &NodeIdentity, fib: &Fib, base: &Ipv6BaseHeader) -> ForwardingAction {
    if node.owns(base.destination) {
        return ForwardingAction::Deliver;
    }
    match fib.lookup(base.destination) {
        Ok(route) => ForwardingAction::ForwardTo(route.next_hop),
        Err(_) => ForwardingAction::Drop(DropReason::NoRoute),
    }
}

/// DLSR processing at a border router.
///
/// The header is acted on when the packet is addressed to this DBR or when
/// the entry under `domains_left` names this DBR's domain (the egress of
/// the first domain). Exactly one decrement happens per domain, by the DBR
/// that rewrites the destination toward the next domain's ingress.
pub fn dlsr_process(
    node: &NodeIdentity,
    det: &DomainEntryTable,
    fib: &Fib,
    mut packet: Packet,
) -> (Packet, ForwardingAction) {
    let Some(RoutingHeader::Dlsr(h)) = packet.routing.as_mut() else {
        let action = interior_forward(node, fib, &mut packet.base);
        return (packet, action);
    };
    let i = usize::from(h.domains_left);
    if i >= h.domain_list.len() || h.domains_left > h.first_domain {
        return (packet, ForwardingAction::Drop(DropReason::Malformed));
    }
    let addressed = node.owns(packet.base.destination);
    let here = h.domain_list[i] == node.domain;
    match (addressed, here) {
        (false, false) => {}
        (true, false) => return (packet, ForwardingAction::Drop(DropReason::Malformed)),
        (_, true) if i == 0 => packet.base.destination = h.original_destination,
        (_, true) => {
            let next = h.domain_list[i - 1];
            match det.lookup(next) {
                Ok(ingress) => {
                    packet.base.destination = ingress;
                    h.domains_left -= 1;
                }
                Err(_) => {
                    return (packet, ForwardingAction::Drop(DropReason::NoRouteToNextDomain))
                }
            }
        }
    }
    let action = interior_forward(node, fib, &mut packet.base);
    (packet, action)
}

/// DBD processing at a border router.
pub fn dbd_process(
    node: &NodeIdentity,
    det: &DomainEntryTable,
    fib: &Fib,
    mut packet: Packet,
) -> (Packet, ForwardingAction) {
    let Some(RoutingHeader::Dbd(h)) = packet.routing.as_ref() else {
        let action = interior_forward(node, fib, &mut packet.base);
        return (packet, action);
    };
    let od = h.original_destination;
    let dst = packet.base.destination;
    if node.owns(dst) || dst == od {
        let next_domain = match fib.lookup(od) {
            Ok(e) => e.next_domain,
            Err(_) => return (packet, ForwardingAction::Drop(DropReason::NoRoute)),
        };
        match next_domain {
            Some(nd) if nd != node.domain => match det.lookup(nd) {
                Ok(ingress) => packet.base.destination = ingress,
                Err(_) => {
                    return (packet, ForwardingAction::Drop(DropReason::NoRouteToNextDomain))
                }
            },
            _ => packet.base.destination = od,
        }
    }
    let action = interior_forward(node, fib, &mut packet.base);
    (packet, action)
}

/// Dispatches on node kind and routing type. Border routers pass unknown
/// routing types through unmodified.
pub fn process(
    node: &NodeIdentity,
    det: &DomainEntryTable,
    fib: &Fib,
    mut packet: Packet,
) -> (Packet, ForwardingAction) {
    match (node.kind, &packet.routing) {
        (NodeKind::Border, Some(RoutingHeader::Dlsr(_))) => dlsr_process(node, det, fib, packet),
        (NodeKind::Border, Some(RoutingHeader::Dbd(_))) => dbd_process(node, det, fib, packet),
        (NodeKind::Host, _) if node.owns(packet.base.destination) => {
            (packet, ForwardingAction::Deliver)
        }
        _ => {
            let action = interior_forward(node, fib, &mut packet.base);
            (packet, action)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{Prefix, RouteEntry};
    use crate::wire::NEXT_HEADER_ROUTING;

    fn addr(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    fn ids(v: &[u32]) -> Vec<DomainId> {
        v.iter().copied().map(DomainId).collect()
    }

    const SRC: &str = "2001:db8:0::10";
    const DST: &str = "2001:db8:5::9";
    const X: &str = "2001:db8:0::1";
    const A: &str = "2001:db8:1::a";
    const B: &str = "2001:db8:1::b";
    const D: &str = "2001:db8:2::d";
    const Y: &str = "2001:db8:5::1";

    fn border(id: &str, domain: u32, address: &str) -> NodeIdentity {
        NodeIdentity {
            node_id: id.into(),
            kind: NodeKind::Border,
            domain: DomainId(domain),
            addresses: vec![addr(address)],
        }
    }

    fn fig2_packet() -> Packet {
        let p = Packet::new(addr(SRC), addr(DST), b"payload".to_vec());
        encapsulate_dlsr(p, &ids(&[0, 1, 2, 5]), vec![]).unwrap()
    }

    fn fib_with(entries: Vec<RouteEntry>) -> Fib {
        let mut fib = Fib::new();
        for e in entries {
            fib.install(e);
        }
        fib
    }

    #[test]
    fn encapsulation_fields() {
        let p = fig2_packet();
        let h = p.dlsr().unwrap();
        assert_eq!(h.domain_list, ids(&[5, 2, 1, 0]));
        assert_eq!((h.first_domain, h.domains_left), (3, 3));
        assert_eq!(h.original_destination, addr(DST));
        assert_eq!(p.base.destination, addr(DST));
        assert_eq!(p.base.next_header, NEXT_HEADER_ROUTING);
        assert_eq!(h.next_header, crate::wire::NEXT_HEADER_NONE);

        let single = encapsulate_dlsr(Packet::new(addr(SRC), addr(DST), vec![]), &ids(&[0]), vec![]).unwrap();
        assert_eq!(single.dlsr().unwrap().domains_left, 0);

        assert_eq!(
            encapsulate_dlsr(Packet::new(addr(SRC), addr(DST), vec![]), &[], vec![]),
            Err(ForwardingError::EmptyPath)
        );
    }

    #[test]
    fn first_domain_egress_rewrites_toward_next_ingress() {
        let x = border("x", 0, X);
        let mut det = DomainEntryTable::new();
        det.insert(DomainId(1), addr(A));
        let fib = fib_with(vec![RouteEntry::inter(Prefix::host(addr(A)), addr(A), ids(&[1]))]);
        let (p, action) = dlsr_process(&x, &det, &fib, fig2_packet());
        assert_eq!(p.dlsr().unwrap().domains_left, 2);
        assert_eq!(p.base.destination, addr(A));
        assert_eq!(action, ForwardingAction::ForwardTo(addr(A)));
        assert_eq!(p.payload, b"payload");
    }

    #[test]
    fn transit_ingress_and_last_domain_restore() {
        let a = border("a", 1, A);
        let mut det = DomainEntryTable::new();
        det.insert(DomainId(2), addr(D));
        let fib = fib_with(vec![RouteEntry::intra(Prefix::host(addr(D)), addr(B))]);
        let mut p = fig2_packet();
        if let Some(RoutingHeader::Dlsr(h)) = p.routing.as_mut() {
            h.domains_left = 2;
        }
        p.base.destination = addr(A);
        let (p, action) = dlsr_process(&a, &det, &fib, p);
        assert_eq!(p.base.destination, addr(D));
        assert_eq!(p.dlsr().unwrap().domains_left, 1);
        assert_eq!(action, ForwardingAction::ForwardTo(addr(B)));

        let y = border("y", 5, Y);
        let fib = fib_with(vec![RouteEntry::intra(Prefix::host(addr(DST)), addr("2001:db8:5::2"))]);
        let mut p = p;
        if let Some(RoutingHeader::Dlsr(h)) = p.routing.as_mut() {
            h.domains_left = 0;
        }
        p.base.destination = addr(Y);
        let (p, action) = dlsr_process(&y, &DomainEntryTable::new(), &fib, p);
        assert_eq!(p.base.destination, addr(DST));
        assert_eq!(action, ForwardingAction::ForwardTo(addr("2001:db8:5::2")));
    }

    #[test]
    fn missing_det_entry_drops() {
        let a = border("a", 1, A);
        let mut p = fig2_packet();
        if let Some(RoutingHeader::Dlsr(h)) = p.routing.as_mut() {
            h.domains_left = 2;
        }
        p.base.destination = addr(A);
        let (_, action) = dlsr_process(&a, &DomainEntryTable::new(), &Fib::new(), p);
        assert_eq!(action, ForwardingAction::Drop(DropReason::NoRouteToNextDomain));
    }

    #[test]
    fn uninvolved_border_router_just_forwards() {
        let b = border("b", 1, B);
        let fib = fib_with(vec![RouteEntry::inter(Prefix::host(addr(D)), addr(D), ids(&[2]))]);
        let mut p = fig2_packet();
        if let Some(RoutingHeader::Dlsr(h)) = p.routing.as_mut() {
            h.domains_left = 1;
        }
        p.base.destination = addr(D);
        let before = p.routing.clone();
        let (p, action) = dlsr_process(&b, &DomainEntryTable::new(), &fib, p);
        assert_eq!(p.routing, before);
        assert_eq!(action, ForwardingAction::ForwardTo(addr(D)));
    }

    #[test]
    fn bad_index_is_malformed() {
        let x = border("x", 0, X);
        let mut p = fig2_packet();
        if let Some(RoutingHeader::Dlsr(h)) = p.routing.as_mut() {
            h.domains_left = 7;
        }
        let (_, action) = dlsr_process(&x, &DomainEntryTable::new(), &Fib::new(), p);
        assert_eq!(action, ForwardingAction::Drop(DropReason::Malformed));
    }

    fn dbd_packet() -> Packet {
        encapsulate_dbd(Packet::new(addr(SRC), addr(DST), b"q".to_vec()), vec![])
    }

    #[test]
    fn dbd_first_domain_and_last_domain() {
        let x = border("x", 0, X);
        let mut det = DomainEntryTable::new();
        det.insert(DomainId(1), addr(A));
        let fib = fib_with(vec![
            RouteEntry::inter("2001:db8:5::/48".parse().unwrap(), addr(A), ids(&[1, 2, 5])),
            RouteEntry::inter(Prefix::host(addr(A)), addr(A), ids(&[1])),
        ]);
        let (p, action) = dbd_process(&x, &det, &fib, dbd_packet());
        assert_eq!(p.base.destination, addr(A));
        assert_eq!(action, ForwardingAction::ForwardTo(addr(A)));

        let y = border("y", 5, Y);
        let fib = fib_with(vec![RouteEntry::intra(Prefix::host(addr(DST)), addr("2001:db8:5::2"))]);
        let mut p = p;
        p.base.destination = addr(Y);
        let (p, action) = dbd_process(&y, &DomainEntryTable::new(), &fib, p);
        assert_eq!(p.base.destination, addr(DST));
        assert_eq!(action, ForwardingAction::ForwardTo(addr("2001:db8:5::2")));
    }

    #[test]
    fn dbd_unreachable_destination() {
        let x = border("x", 0, X);
        let (_, action) = dbd_process(&x, &DomainEntryTable::new(), &Fib::new(), dbd_packet());
        assert_eq!(action, ForwardingAction::Drop(DropReason::NoRoute));
    }

    #[test]
    fn dbd_det_miss() {
        let x = border("x", 0, X);
        let fib = fib_with(vec![RouteEntry::inter("2001:db8:5::/48".parse().unwrap(), addr(A), ids(&[1, 5]))]);
        let (_, action) = dbd_process(&x, &DomainEntryTable::new(), &fib, dbd_packet());
        assert_eq!(action, ForwardingAction::Drop(DropReason::NoRouteToNextDomain));
    }

    #[test]
    fn interior_rules() {
        let r = NodeIdentity {
            node_id: "r".into(),
            kind: NodeKind::Interior,
            domain: DomainId(1),
            addresses: vec![addr("2001:db8:1::5")],
        };
        let fib = fib_with(vec![RouteEntry::intra(Prefix::host(addr(D)), addr(B))]);
        let mut base = Ipv6BaseHeader::new(addr(SRC), addr(D), 59);
        assert_eq!(interior_forward(&r, &fib, &mut base), ForwardingAction::ForwardTo(addr(B)));
        assert_eq!(base.hop_limit, 63);

        base.hop_limit = 1;
        assert_eq!(
            interior_forward(&r, &fib, &mut base),
            ForwardingAction::Drop(DropReason::HopLimitExceeded)
        );
        assert_eq!(base.hop_limit, 0);

        let mut local = Ipv6BaseHeader::new(addr(SRC), addr("2001:db8:1::5"), 59);
        assert_eq!(interior_forward(&r, &fib, &mut local), ForwardingAction::Deliver);

        let mut lost = Ipv6BaseHeader::new(addr(SRC), addr("2400::1"), 59);
        assert_eq!(interior_forward(&r, &fib, &mut lost), ForwardingAction::Drop(DropReason::NoRoute));
    }

    #[test]
    fn opaque_routing_header_passes_border_router() {
        let x = border("x", 0, X);
        let fib = fib_with(vec![RouteEntry::inter("2001:db8:5::/48".parse().unwrap(), addr(A), ids(&[1, 5]))]);
        let mut p = Packet::new(addr(SRC), addr(DST), vec![1]);
        let raw = {
            let mut r = vec![59, 2, 4, 0, 0, 0, 0, 0];
            r.extend_from_slice(&[0u8; 16]);
            r
        };
        p.routing = Some(RoutingHeader::Opaque { routing_type: 4, bytes: raw });
        let before = p.routing.clone();
        let (p, action) = process(&x, &DomainEntryTable::new(), &fib, p);
        assert_eq!(p.routing, before);
        assert_eq!(action, ForwardingAction::ForwardTo(addr(A)));
    }
}
