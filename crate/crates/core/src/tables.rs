//! Domain Entry Table and the FIB with its next-domain column.
//!
//! The Next Domain Table is not a separate structure: every [`RouteEntry`]
//! carries an optional `next_domain`, so one longest-prefix lookup yields
//! both the next hop and the next domain.

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv6Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::wire::DomainId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("no route to next domain {0}")]
    NoSuchDomain(DomainId),
    #[error("no route to {0}")]
    NoRoute(Ipv6Addr),
    #[error("invalid prefix `{0}`")]
    InvalidPrefix(String),
}

/// An IPv6 prefix. The address is always stored with host bits cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    network: u128,
    len: u8,
}

impl Prefix {
    pub fn new(addr: Ipv6Addr, len: u8) -> Result<Self, TableError> {
        if len > 128 {
            return Err(TableError::InvalidPrefix(format!("{addr}/{len}")));
        }
        Ok(Prefix {
            network: u128::from(addr) & mask(len),
            len,
        })
    }

    pub fn host(addr: Ipv6Addr) -> Self {
        Prefix {
            network: u128::from(addr),
            len: 128,
        }
    }

    pub fn default_route() -> Self {
        Prefix { network: 0, len: 0 }
    }

    pub fn addr(&self) -> Ipv6Addr {
        Ipv6Addr::from(self.network)
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_default(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, addr: Ipv6Addr) -> bool {
        u128::from(addr) & mask(self.len) == self.network
    }
}

fn mask(len: u8) -> u128 {
    if len == 0 {
        0
    } else {
        u128::MAX << (128 - u32::from(len))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr(), self.len)
    }
}

impl FromStr for Prefix {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TableError::InvalidPrefix(s.to_string());
        match s.split_once('/') {
            Some((a, l)) => {
                let addr: Ipv6Addr = a.trim().parse().map_err(|_| bad())?;
                let len: u8 = l.trim().parse().map_err(|_| bad())?;
                Prefix::new(addr, len).map_err(|_| bad())
            }
            None => s.trim().parse().map(Prefix::host).map_err(|_| bad()),
        }
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Peering domain → address of that domain's ingress DBR.
///
/// Holds one address per domain; the first one installed is kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainEntryTable {
    entries: BTreeMap<DomainId, Ipv6Addr>,
}

impl DomainEntryTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the domain already had an entry (which is kept).
    pub fn insert(&mut self, domain: DomainId, ingress: Ipv6Addr) -> bool {
        use std::collections::btree_map::Entry;
        match self.entries.entry(domain) {
            Entry::Vacant(v) => {
                v.insert(ingress);
                true
            }
            Entry::Occupied(_) => false,
        }
    }

    pub fn lookup(&self, domain: DomainId) -> Result<Ipv6Addr, TableError> {
        self.entries
            .get(&domain)
            .copied()
            .ok_or(TableError::NoSuchDomain(domain))
    }

    pub fn iter(&self) -> impl Iterator<Item = (DomainId, Ipv6Addr)> + '_ {
        self.entries.iter().map(|(d, a)| (*d, *a))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn det_lookup(det: &DomainEntryTable, domain: DomainId) -> Result<Ipv6Addr, TableError> {
    det.lookup(domain)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteEntry {
    pub prefix: Prefix,
    pub next_hop: Ipv6Addr,
    /// `None` for intra-domain routes.
    pub next_domain: Option<DomainId>,
    pub as_path: Vec<DomainId>,
}

impl RouteEntry {
    pub fn intra(prefix: Prefix, next_hop: Ipv6Addr) -> Self {
        RouteEntry {
            prefix,
            next_hop,
            next_domain: None,
            as_path: Vec::new(),
        }
    }

    pub fn inter(prefix: Prefix, next_hop: Ipv6Addr, as_path: Vec<DomainId>) -> Self {
        RouteEntry {
            prefix,
            next_hop,
            next_domain: as_path.first().copied(),
            as_path,
        }
    }
}

impl fmt::Display for RouteEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} via {} nd=", self.prefix, self.next_hop)?;
        match self.next_domain {
            Some(d) => write!(f, "{}", d.0)?,
            None => f.write_str("-")?,
        }
        f.write_str(" path=")?;
        if self.as_path.is_empty() {
            f.write_str("-")
        } else {
            let parts: Vec<String> = self.as_path.iter().map(|d| d.0.to_string()).collect();
            f.write_str(&parts.join(","))
        }
    }
}

/// Forwarding table with longest-prefix-match lookup.
///
/// Entries are kept per prefix length; a lookup probes lengths from /128
/// down to /0, masking the destination once per populated length.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fib {
    by_len: BTreeMap<u8, BTreeMap<u128, RouteEntry>>,
}

impl Fib {
    pub fn new() -> Self {
        Self::default()
    }

    /// Installs `entry`, replacing any entry for the identical prefix.
    pub fn install(&mut self, entry: RouteEntry) -> Option<RouteEntry> {
        self.by_len
            .entry(entry.prefix.len)
            .or_default()
            .insert(entry.prefix.network, entry)
    }

    pub fn lookup(&self, destination: Ipv6Addr) -> Result<&RouteEntry, TableError> {
        let dst = u128::from(destination);
        self.by_len
            .iter()
            .rev()
            .find_map(|(len, routes)| routes.get(&(dst & mask(*len))))
            .ok_or(TableError::NoRoute(destination))
    }

    pub fn get(&self, prefix: &Prefix) -> Option<&RouteEntry> {
        self.by_len.get(&prefix.len)?.get(&prefix.network)
    }

    pub fn len(&self) -> usize {
        self.by_len.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries ordered by prefix address, then length.
    pub fn entries(&self) -> Vec<&RouteEntry> {
        let mut all: Vec<&RouteEntry> = self.by_len.values().flat_map(BTreeMap::values).collect();
        all.sort_by_key(|e| (e.prefix.network, e.prefix.len));
        all
    }

    /// One line per entry: `<prefix> via <next_hop> nd=<next_domain> path=<as_path>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in self.entries() {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

pub fn fib_lookup(fib: &Fib, destination: Ipv6Addr) -> Result<&RouteEntry, TableError> {
    fib.lookup(destination)
}

pub fn install_route(fib: &mut Fib, entry: RouteEntry) {
    fib.install(entry);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn det_hits_and_misses() {
        let mut det = DomainEntryTable::new();
        assert_eq!(det.lookup(DomainId(1)), Err(TableError::NoSuchDomain(DomainId(1))));
        det.insert(DomainId(1), a("2001:db8:1::a"));
        assert_eq!(det_lookup(&det, DomainId(1)), Ok(a("2001:db8:1::a")));
        assert_eq!(det_lookup(&det, DomainId(99)), Err(TableError::NoSuchDomain(DomainId(99))));
    }

    #[test]
    fn det_keeps_first_entry() {
        let mut det = DomainEntryTable::new();
        assert!(det.insert(DomainId(2), a("2001:db8:2::d")));
        assert!(!det.insert(DomainId(2), a("2001:db8:2::e")));
        assert_eq!(det.lookup(DomainId(2)), Ok(a("2001:db8:2::d")));
    }

    #[test]
    fn lpm_prefers_longer_prefix() {
        let mut fib = Fib::new();
        fib.install(RouteEntry::inter(p("2001:db8:5::/48"), a("fe80::1"), vec![DomainId(2), DomainId(5)]));
        assert_eq!(fib.lookup(a("2001:db8:5::9")).unwrap().next_domain, Some(DomainId(2)));

        fib.install(RouteEntry::intra(p("2001:db8::/32"), a("fe80::2")));
        fib.install(RouteEntry::intra(p("2001:db8:5::/48"), a("fe80::3")));
        assert_eq!(fib.lookup(a("2001:db8:5::9")).unwrap().next_hop, a("fe80::3"));
        assert_eq!(fib.lookup(a("2001:db8:6::9")).unwrap().next_hop, a("fe80::2"));
        assert_eq!(fib.lookup(a("2002::1")), Err(TableError::NoRoute(a("2002::1"))));
    }

    #[test]
    fn install_replaces_and_default_catches_all() {
        let mut fib = Fib::new();
        install_route(&mut fib, RouteEntry::intra(p("::/0"), a("fe80::1")));
        assert_eq!(fib_lookup(&fib, a("2400::7")).unwrap().next_hop, a("fe80::1"));
        install_route(&mut fib, RouteEntry::intra(p("::/0"), a("fe80::2")));
        assert_eq!(fib.len(), 1);
        assert_eq!(fib_lookup(&fib, a("2400::7")).unwrap().next_hop, a("fe80::2"));
    }

    #[test]
    fn prefix_parsing_masks_host_bits() {
        let pre = p("2001:db8:5::9/48");
        assert_eq!(pre.to_string(), "2001:db8:5::/48");
        assert!(pre.contains(a("2001:db8:5:ffff::1")));
        assert!(!pre.contains(a("2001:db8:6::1")));
        assert_eq!(p("2001:db8::1").len(), 128);
        assert!("2001:db8::/129".parse::<Prefix>().is_err());
        assert!("nonsense/3".parse::<Prefix>().is_err());
    }

    #[test]
    fn dump_format() {
        let mut fib = Fib::new();
        fib.install(RouteEntry::inter(p("2001:db8:5::/48"), a("2001:db8:1::a"), vec![DomainId(1), DomainId(2), DomainId(5)]));
        fib.install(RouteEntry::intra(p("2001:db8::10/128"), a("2001:db8::1")));
        assert_eq!(
            fib.dump(),
            "2001:db8::10/128 via 2001:db8::1 nd=- path=-\n\
             2001:db8:5::/48 via 2001:db8:1::a nd=1 path=1,2,5\n"
        );
    }

    fn arb_prefix() -> impl Strategy<Value = Prefix> {
        // Few distinct high bits so prefixes overlap often.
        (0u8..4, 0u8..=128).prop_map(|(hi, len)| {
            let base = (u128::from(hi) << 124) | 0x2001_0db8_u128 << 64;
            Prefix::new(Ipv6Addr::from(base), len).unwrap()
        })
    }

    proptest! {
        #[test]
        fn lpm_matches_brute_force(
            prefixes in proptest::collection::vec(arb_prefix(), 0..24),
            probe_hi in 0u8..4,
            probe_lo in any::<u64>(),
        ) {
            let mut fib = Fib::new();
            let mut reference: BTreeMap<Prefix, Ipv6Addr> = BTreeMap::new();
            for (i, pre) in prefixes.iter().enumerate() {
                let nh = Ipv6Addr::from(0xfe80_u128 << 112 | i as u128);
                fib.install(RouteEntry::intra(*pre, nh));
                reference.insert(*pre, nh);
            }
            let dst = Ipv6Addr::from((u128::from(probe_hi) << 124) | 0x2001_0db8_u128 << 64 | u128::from(probe_lo));
            let expected = reference
                .iter()
                .filter(|(pre, _)| pre.contains(dst))
                .max_by_key(|(pre, _)| pre.len())
                .map(|(_, nh)| *nh);
            prop_assert_eq!(fib.lookup(dst).ok().map(|e| e.next_hop), expected);
        }
    }
}
