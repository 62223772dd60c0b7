//! Name → domain-level path records, used by hosts to source DLSR paths.

use std::collections::BTreeMap;
use std::net::Ipv6Addr;

use thiserror::Error;

use crate::wire::{DomainId, TlvOption};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolverError {
    #[error("invalid path for `{name}`: {reason}")]
    InvalidPath { name: String, reason: String },
    #[error("name `{0}` not found")]
    NameNotFound(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRecord {
    pub name: String,
    /// Traversal order; the last domain owns `destination`.
    pub domain_path: Vec<DomainId>,
    pub destination: Ipv6Addr,
    /// Options a host attaches when using this record.
    pub options: Vec<TlvOption>,
}

#[derive(Debug, Clone, Default)]
pub struct PathStore {
    records: BTreeMap<String, PathRecord>,
}

impl PathStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `record`, replacing any earlier record of the same name.
    /// `owner` maps an address to the domain it belongs to.
    pub fn register(
        &mut self,
        record: PathRecord,
        owner: impl Fn(Ipv6Addr) -> Option<DomainId>,
    ) -> Result<(), ResolverError> {
        let invalid = |reason: String| ResolverError::InvalidPath {
            name: record.name.clone(),
            reason,
        };
        let Some(&last) = record.domain_path.last() else {
            return Err(invalid("empty domain path".into()));
        };
        if record.domain_path.len() > crate::wire::MAX_DOMAINS {
            return Err(invalid(format!("{} domains exceed 255", record.domain_path.len())));
        }
        match owner(record.destination) {
            Some(d) if d == last => {}
            Some(d) => {
                return Err(invalid(format!(
                    "path ends in {last} but {} belongs to {d}",
                    record.destination
                )))
            }
            None => return Err(invalid(format!("{} belongs to no domain", record.destination))),
        }
        self.records.insert(record.name.clone(), record);
        Ok(())
    }

    pub fn query(&self, name: &str) -> Result<&PathRecord, ResolverError> {
        self.records
            .get(name)
            .ok_or_else(|| ResolverError::NameNotFound(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PathRecord> {
        self.records.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forwarding::encapsulate_dlsr;
    use crate::wire::{encode_dlsr, Packet};

    fn dst() -> Ipv6Addr {
        "2001:db8:5::9".parse().unwrap()
    }

    fn owner(a: Ipv6Addr) -> Option<DomainId> {
        let seg = a.segments()[2];
        (a.segments()[0] == 0x2001).then_some(DomainId(u32::from(seg)))
    }

    fn record(name: &str, path: &[u32]) -> PathRecord {
        PathRecord {
            name: name.into(),
            domain_path: path.iter().copied().map(DomainId).collect(),
            destination: dst(),
            options: vec![],
        }
    }

    #[test]
    fn register_query_replace() {
        let mut store = PathStore::new();
        store.register(record("render", &[0, 1, 2, 5]), owner).unwrap();
        assert_eq!(store.query("render").unwrap(), &record("render", &[0, 1, 2, 5]));
        store.register(record("render", &[0, 3, 4, 5]), owner).unwrap();
        assert_eq!(store.query("render").unwrap().domain_path, record("x", &[0, 3, 4, 5]).domain_path);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn invalid_paths_and_unknown_names() {
        let mut store = PathStore::new();
        assert!(matches!(store.register(record("r", &[0, 1, 2]), owner), Err(ResolverError::InvalidPath { .. })));
        assert!(matches!(store.register(record("r", &[]), owner), Err(ResolverError::InvalidPath { .. })));
        assert_eq!(store.query("nope"), Err(ResolverError::NameNotFound("nope".into())));
    }

    #[test]
    fn record_builds_fig2_header() {
        let mut store = PathStore::new();
        store.register(record("render", &[0, 1, 2, 5]), owner).unwrap();
        let r = store.query("render").unwrap();
        let src: Ipv6Addr = "2001:db8:0::10".parse().unwrap();
        let p = encapsulate_dlsr(Packet::new(src, r.destination, vec![]), &r.domain_path, r.options.clone()).unwrap();
        let h = p.dlsr().unwrap();
        assert_eq!(h.domain_list, vec![DomainId(5), DomainId(2), DomainId(1), DomainId(0)]);
        assert_eq!((h.first_domain, h.domains_left), (3, 3));
        assert_eq!(encode_dlsr(h).unwrap().len(), 40);
    }
}
