//! Wire formats: the IPv6 base header and the two domain-level routing
//! headers (source-routed and domain-by-domain), with their TLV options.
//!
//! DLSR routing header:
//!
//! ```text
//!  0                   1                   2                   3
//!  0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |  Next Header  |      Len      | Routing Type  | Domains Left  |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! | First Domain  |                   Reserved                    |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |                                                               |
//! +              Original Destination (128 bits)                  +
//! |                                                               |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |                     Domain ID List[0]                         |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |                           ...                                 |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |                     Domain ID List[n-1]                       |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |                 Options (TLV, variable)                       |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! ```
//!
//! The domain list is stored last-domain-first: entry 0 is the final
//! domain, entry `first_domain` is the source domain. The DBD header is the
//! same without the index octets and the list; its 40 bits after the
//! routing type are reserved.
//!
//! All multi-octet fields are big-endian. Every encoded routing header is a
//! multiple of 8 octets; the encoder appends Pad1/PadN options as needed and
//! the decoder strips them again.

use std::fmt;
use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// IPv6 next-header value announcing a routing header.
pub const NEXT_HEADER_ROUTING: u8 = 43;
/// "No next header"; used for opaque payloads in the simulator.
pub const NEXT_HEADER_NONE: u8 = 59;

pub const ROUTING_TYPE_DLSR: u8 = 253;
pub const ROUTING_TYPE_DBD: u8 = 254;

pub const OPT_PAD1: u8 = 0;
pub const OPT_PADN: u8 = 1;
pub const OPT_DEADLINE: u8 = 3;
pub const OPT_TELEMETRY: u8 = 4;
pub const OPT_SERVICE_CHAIN: u8 = 5;

pub const BASE_HEADER_LEN: usize = 40;
/// Fixed part of either routing header: 8 octets plus the original destination.
pub const RH_FIXED_LEN: usize = 24;
pub const MAX_DOMAINS: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("buffer truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("wrong routing type: expected {expected}, found {found}")]
    WrongRoutingType { expected: u8, found: u8 },
    #[error("index out of range: domains_left={domains_left}, first_domain={first_domain}, list holds {list_len}")]
    IndexOutOfRange {
        domains_left: u8,
        first_domain: u8,
        list_len: usize,
    },
    #[error("malformed TLV option at offset {offset}")]
    MalformedTlv { offset: usize },
    #[error("domain list too long: {0} entries (max 255)")]
    DomainListTooLong(usize),
    #[error("domain list is empty")]
    EmptyDomainList,
    #[error("option value too long: {0} bytes (max 255)")]
    OptionTooLong(usize),
    #[error("routing header too long: {0} bytes")]
    HeaderTooLong(usize),
    #[error("not an IPv6 packet (version {0})")]
    BadVersion(u8),
    #[error("payload length {declared} does not match {actual} trailing bytes")]
    PayloadLength { declared: usize, actual: usize },
    #[error("malformed option value for type {option_type}")]
    BadOptionValue { option_type: u8 },
}

/// AS number identifying a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(pub u32);

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AS{}", self.0)
    }
}

impl From<u32> for DomainId {
    fn from(v: u32) -> Self {
        DomainId(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ipv6BaseHeader {
    pub traffic_class: u8,
    /// Only the low 20 bits are carried.
    pub flow_label: u32,
    pub payload_length: u16,
    pub next_header: u8,
    pub hop_limit: u8,
    pub source: Ipv6Addr,
    pub destination: Ipv6Addr,
}

impl Ipv6BaseHeader {
    pub fn new(source: Ipv6Addr, destination: Ipv6Addr, next_header: u8) -> Self {
        Ipv6BaseHeader {
            traffic_class: 0,
            flow_label: 0,
            payload_length: 0,
            next_header,
            hop_limit: 64,
            source,
            destination,
        }
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        let word = (6u32 << 28) | (u32::from(self.traffic_class) << 20) | (self.flow_label & 0xf_ffff);
        out.extend_from_slice(&word.to_be_bytes());
        out.extend_from_slice(&self.payload_length.to_be_bytes());
        out.push(self.next_header);
        out.push(self.hop_limit);
        out.extend_from_slice(&self.source.octets());
        out.extend_from_slice(&self.destination.octets());
    }

    pub fn read(buf: &[u8]) -> Result<Self, WireError> {
        check_len(buf, BASE_HEADER_LEN)?;
        let word = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]);
        let version = (word >> 28) as u8;
        if version != 6 {
            return Err(WireError::BadVersion(version));
        }
        Ok(Ipv6BaseHeader {
            traffic_class: ((word >> 20) & 0xff) as u8,
            flow_label: word & 0xf_ffff,
            payload_length: u16::from_be_bytes([buf[4], buf[5]]),
            next_header: buf[6],
            hop_limit: buf[7],
            source: read_addr(&buf[8..24]),
            destination: read_addr(&buf[24..40]),
        })
    }
}

/// A single TLV option. Pad1/PadN never appear here after decoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlvOption {
    pub option_type: u8,
    pub value: Vec<u8>,
}

impl TlvOption {
    pub fn new(option_type: u8, value: Vec<u8>) -> Self {
        TlvOption { option_type, value }
    }

    fn encoded_len(&self) -> usize {
        if self.option_type == OPT_PAD1 {
            1
        } else {
            2 + self.value.len()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlsrHeader {
    pub next_header: u8,
    pub domains_left: u8,
    pub first_domain: u8,
    pub original_destination: Ipv6Addr,
    /// Last domain first.
    pub domain_list: Vec<DomainId>,
    pub options: Vec<TlvOption>,
}

impl DlsrHeader {
    /// Builds a header for a path given in traversal order.
    pub fn from_path(
        next_header: u8,
        original_destination: Ipv6Addr,
        path: &[DomainId],
        options: Vec<TlvOption>,
    ) -> Result<Self, WireError> {
        if path.is_empty() {
            return Err(WireError::EmptyDomainList);
        }
        if path.len() > MAX_DOMAINS {
            return Err(WireError::DomainListTooLong(path.len()));
        }
        let last = (path.len() - 1) as u8;
        Ok(DlsrHeader {
            next_header,
            domains_left: last,
            first_domain: last,
            original_destination,
            domain_list: path.iter().rev().copied().collect(),
            options,
        })
    }

    /// The domain path in traversal order.
    pub fn path(&self) -> Vec<DomainId> {
        self.domain_list.iter().rev().copied().collect()
    }

    /// The domain currently indexed by `domains_left`.
    pub fn current_domain(&self) -> Option<DomainId> {
        self.domain_list.get(usize::from(self.domains_left)).copied()
    }

    pub fn encoded_len(&self) -> usize {
        aligned_len(RH_FIXED_LEN + 4 * self.domain_list.len() + options_len(&self.options))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbdHeader {
    pub next_header: u8,
    pub original_destination: Ipv6Addr,
    pub options: Vec<TlvOption>,
}

impl DbdHeader {
    pub fn encoded_len(&self) -> usize {
        aligned_len(RH_FIXED_LEN + options_len(&self.options))
    }
}

/// The routing header carried after the base header, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoutingHeader {
    Dlsr(DlsrHeader),
    Dbd(DbdHeader),
    /// Any other routing type, kept byte-for-byte.
    Opaque { routing_type: u8, bytes: Vec<u8> },
}

impl RoutingHeader {
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        match self {
            RoutingHeader::Dlsr(h) => encode_dlsr(h),
            RoutingHeader::Dbd(h) => encode_dbd(h),
            RoutingHeader::Opaque { bytes, .. } => Ok(bytes.clone()),
        }
    }

    pub fn next_header(&self) -> u8 {
        match self {
            RoutingHeader::Dlsr(h) => h.next_header,
            RoutingHeader::Dbd(h) => h.next_header,
            RoutingHeader::Opaque { bytes, .. } => bytes.first().copied().unwrap_or(NEXT_HEADER_NONE),
        }
    }

    pub fn original_destination(&self) -> Option<Ipv6Addr> {
        match self {
            RoutingHeader::Dlsr(h) => Some(h.original_destination),
            RoutingHeader::Dbd(h) => Some(h.original_destination),
            RoutingHeader::Opaque { .. } => None,
        }
    }

    pub fn options(&self) -> &[TlvOption] {
        match self {
            RoutingHeader::Dlsr(h) => &h.options,
            RoutingHeader::Dbd(h) => &h.options,
            RoutingHeader::Opaque { .. } => &[],
        }
    }

    pub fn options_mut(&mut self) -> Option<&mut Vec<TlvOption>> {
        match self {
            RoutingHeader::Dlsr(h) => Some(&mut h.options),
            RoutingHeader::Dbd(h) => Some(&mut h.options),
            RoutingHeader::Opaque { .. } => None,
        }
    }

    /// Decodes a routing header from the start of `buf`, dispatching on the
    /// routing type. Returns the header and the number of bytes it occupies.
    pub fn decode(buf: &[u8]) -> Result<(Self, usize), WireError> {
        check_len(buf, 8)?;
        let total = 8 * (usize::from(buf[1]) + 1);
        check_len(buf, total)?;
        let rh = match buf[2] {
            ROUTING_TYPE_DLSR => RoutingHeader::Dlsr(decode_dlsr(buf)?),
            ROUTING_TYPE_DBD => RoutingHeader::Dbd(decode_dbd(buf)?),
            other => RoutingHeader::Opaque {
                routing_type: other,
                bytes: buf[..total].to_vec(),
            },
        };
        Ok((rh, total))
    }
}

/// Base header, optional routing header and an opaque upper-layer payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub base: Ipv6BaseHeader,
    pub routing: Option<RoutingHeader>,
    pub payload: Vec<u8>,
}

impl Packet {
    pub fn new(source: Ipv6Addr, destination: Ipv6Addr, payload: Vec<u8>) -> Self {
        Packet {
            base: Ipv6BaseHeader::new(source, destination, NEXT_HEADER_NONE),
            routing: None,
            payload,
        }
    }

    pub fn dlsr(&self) -> Option<&DlsrHeader> {
        match &self.routing {
            Some(RoutingHeader::Dlsr(h)) => Some(h),
            _ => None,
        }
    }

    pub fn dbd(&self) -> Option<&DbdHeader> {
        match &self.routing {
            Some(RoutingHeader::Dbd(h)) => Some(h),
            _ => None,
        }
    }

    /// Serializes the packet, recomputing `payload_length` and the base
    /// header's next-header value.
    pub fn to_bytes(&self) -> Result<Vec<u8>, WireError> {
        let rh = match &self.routing {
            Some(rh) => rh.encode()?,
            None => Vec::new(),
        };
        let after_base = rh.len() + self.payload.len();
        let payload_length =
            u16::try_from(after_base).map_err(|_| WireError::HeaderTooLong(after_base))?;
        let mut base = self.base.clone();
        base.payload_length = payload_length;
        if self.routing.is_some() {
            base.next_header = NEXT_HEADER_ROUTING;
        }
        let mut out = Vec::with_capacity(BASE_HEADER_LEN + after_base);
        base.write(&mut out);
        out.extend_from_slice(&rh);
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let base = Ipv6BaseHeader::read(buf)?;
        let rest = &buf[BASE_HEADER_LEN..];
        if usize::from(base.payload_length) != rest.len() {
            return Err(WireError::PayloadLength {
                declared: usize::from(base.payload_length),
                actual: rest.len(),
            });
        }
        let (routing, consumed) = if base.next_header == NEXT_HEADER_ROUTING {
            let (rh, n) = RoutingHeader::decode(rest)?;
            (Some(rh), n)
        } else {
            (None, 0)
        };
        Ok(Packet {
            base,
            routing,
            payload: rest[consumed..].to_vec(),
        })
    }
}

/// Encodes a DLSR routing header. `len` is computed and padding appended.
pub fn encode_dlsr(header: &DlsrHeader) -> Result<Vec<u8>, WireError> {
    let n = header.domain_list.len();
    if n == 0 {
        return Err(WireError::EmptyDomainList);
    }
    if n > MAX_DOMAINS {
        return Err(WireError::DomainListTooLong(n));
    }
    if usize::from(header.first_domain) + 1 != n || header.domains_left > header.first_domain {
        return Err(WireError::IndexOutOfRange {
            domains_left: header.domains_left,
            first_domain: header.first_domain,
            list_len: n,
        });
    }
    let mut out = Vec::with_capacity(header.encoded_len());
    out.extend_from_slice(&[header.next_header, 0, ROUTING_TYPE_DLSR, header.domains_left]);
    out.extend_from_slice(&[header.first_domain, 0, 0, 0]);
    out.extend_from_slice(&header.original_destination.octets());
    for d in &header.domain_list {
        out.extend_from_slice(&d.0.to_be_bytes());
    }
    write_options(&mut out, &header.options)?;
    finish_len(out)
}

pub fn decode_dlsr(buf: &[u8]) -> Result<DlsrHeader, WireError> {
    let total = header_extent(buf, ROUTING_TYPE_DLSR)?;
    let domains_left = buf[3];
    let first_domain = buf[4];
    let n = usize::from(first_domain) + 1;
    if RH_FIXED_LEN + 4 * n > total || domains_left > first_domain {
        return Err(WireError::IndexOutOfRange {
            domains_left,
            first_domain,
            list_len: (total.saturating_sub(RH_FIXED_LEN)) / 4,
        });
    }
    let domain_list = buf[RH_FIXED_LEN..RH_FIXED_LEN + 4 * n]
        .chunks_exact(4)
        .map(|c| DomainId(u32::from_be_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let options = read_options(buf, RH_FIXED_LEN + 4 * n, total)?;
    Ok(DlsrHeader {
        next_header: buf[0],
        domains_left,
        first_domain,
        original_destination: read_addr(&buf[8..24]),
        domain_list,
        options,
    })
}

pub fn encode_dbd(header: &DbdHeader) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(header.encoded_len());
    out.extend_from_slice(&[header.next_header, 0, ROUTING_TYPE_DBD, 0, 0, 0, 0, 0]);
    out.extend_from_slice(&header.original_destination.octets());
    write_options(&mut out, &header.options)?;
    finish_len(out)
}

pub fn decode_dbd(buf: &[u8]) -> Result<DbdHeader, WireError> {
    let total = header_extent(buf, ROUTING_TYPE_DBD)?;
    let options = read_options(buf, RH_FIXED_LEN, total)?;
    Ok(DbdHeader {
        next_header: buf[0],
        original_destination: read_addr(&buf[8..24]),
        options,
    })
}

/// Encoded size of a DLSR routing header with `n_domains` entries.
pub fn dlsr_overhead(n_domains: usize, options: &[TlvOption]) -> usize {
    aligned_len(RH_FIXED_LEN + 4 * n_domains + options_len(options))
}

/// Size of an SRv6 segment routing header holding `n_segments` SIDs
/// (8 fixed octets plus 16 per segment), for comparison.
pub fn srv6_comparison_length(n_segments: usize) -> usize {
    8 + 16 * n_segments
}

/// Lower-case hex, two digits per byte, no separators.
pub fn to_hex(bytes: &[u8]) -> String {
    hex::encode(bytes)
}

/// Canonical dump: one 8-octet unit per line, bytes separated by spaces.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 3);
    for unit in bytes.chunks(8) {
        let line: Vec<String> = unit.iter().map(|b| format!("{b:02x}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses hex text, ignoring any whitespace.
pub fn from_hex(text: &str) -> Result<Vec<u8>, hex::FromHexError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    hex::decode(compact)
}

fn aligned_len(n: usize) -> usize {
    n.div_ceil(8) * 8
}

fn options_len(options: &[TlvOption]) -> usize {
    options.iter().map(TlvOption::encoded_len).sum()
}

fn check_len(buf: &[u8], needed: usize) -> Result<(), WireError> {
    if buf.len() < needed {
        Err(WireError::Truncated {
            needed,
            available: buf.len(),
        })
    } else {
        Ok(())
    }
}

fn read_addr(b: &[u8]) -> Ipv6Addr {
    let mut octets = [0u8; 16];
    octets.copy_from_slice(&b[..16]);
    Ipv6Addr::from(octets)
}

/// Validates the common prefix of a routing header and returns its length.
fn header_extent(buf: &[u8], routing_type: u8) -> Result<usize, WireError> {
    check_len(buf, 8)?;
    if buf[2] != routing_type {
        return Err(WireError::WrongRoutingType {
            expected: routing_type,
            found: buf[2],
        });
    }
    let total = 8 * (usize::from(buf[1]) + 1);
    check_len(buf, total.max(RH_FIXED_LEN))?;
    if total < RH_FIXED_LEN {
        return Err(WireError::Truncated {
            needed: RH_FIXED_LEN,
            available: total,
        });
    }
    Ok(total)
}

fn write_options(out: &mut Vec<u8>, options: &[TlvOption]) -> Result<(), WireError> {
    for opt in options {
        if opt.option_type == OPT_PAD1 {
            out.push(OPT_PAD1);
            continue;
        }
        let len = u8::try_from(opt.value.len()).map_err(|_| WireError::OptionTooLong(opt.value.len()))?;
        out.push(opt.option_type);
        out.push(len);
        out.extend_from_slice(&opt.value);
    }
    match (8 - out.len() % 8) % 8 {
        0 => {}
        1 => out.push(OPT_PAD1),
        k => {
            out.push(OPT_PADN);
            out.push((k - 2) as u8);
            out.resize(out.len() + k - 2, 0);
        }
    }
    Ok(())
}

fn finish_len(mut out: Vec<u8>) -> Result<Vec<u8>, WireError> {
    let units = out.len() / 8 - 1;
    out[1] = u8::try_from(units).map_err(|_| WireError::HeaderTooLong(out.len()))?;
    Ok(out)
}

fn read_options(buf: &[u8], start: usize, end: usize) -> Result<Vec<TlvOption>, WireError> {
    let mut options = Vec::new();
    let mut at = start;
    while at < end {
        let option_type = buf[at];
        if option_type == OPT_PAD1 {
            at += 1;
            continue;
        }
        if at + 2 > end {
            return Err(WireError::MalformedTlv { offset: at });
        }
        let len = usize::from(buf[at + 1]);
        let value_end = at + 2 + len;
        if value_end > end {
            return Err(WireError::MalformedTlv { offset: at });
        }
        if option_type != OPT_PADN {
            options.push(TlvOption::new(option_type, buf[at + 2..value_end].to_vec()));
        }
        at = value_end;
    }
    Ok(options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dst() -> Ipv6Addr {
        "2001:db8:5::9".parse().unwrap()
    }

    fn path(ids: &[u32]) -> Vec<DomainId> {
        ids.iter().copied().map(DomainId).collect()
    }

    fn dlsr(n: u32, options: Vec<TlvOption>) -> DlsrHeader {
        let p: Vec<_> = (1..=n).map(DomainId).collect();
        DlsrHeader::from_path(NEXT_HEADER_NONE, dst(), &p, options).unwrap()
    }

    #[test]
    fn ten_domains_is_64_bytes() {
        let bytes = encode_dlsr(&dlsr(10, vec![])).unwrap();
        assert_eq!(bytes.len(), 64);
        assert_eq!(bytes[1], 7);
    }

    #[test]
    fn even_lists_need_no_padding() {
        let bytes = encode_dlsr(&dlsr(2, vec![])).unwrap();
        assert_eq!(bytes.len(), 32);
        assert_eq!(bytes[1], 3);
    }

    #[test]
    fn odd_lists_get_padn() {
        let bytes = encode_dlsr(&dlsr(3, vec![])).unwrap();
        assert_eq!(bytes.len(), 40);
        assert_eq!(bytes[1], 4);
        assert_eq!(&bytes[36..], &[OPT_PADN, 2, 0, 0]);
        assert_eq!(decode_dlsr(&bytes).unwrap().options, vec![]);
    }

    #[test]
    fn single_byte_gap_uses_pad1() {
        // 24 + 4 + (2 + 1) = 31
        let h = dlsr(1, vec![TlvOption::new(9, vec![0xaa])]);
        let bytes = encode_dlsr(&h).unwrap();
        assert_eq!(bytes.len(), 32);
        assert_eq!(bytes[31], OPT_PAD1);
        assert_eq!(decode_dlsr(&bytes).unwrap(), h);
    }

    #[test]
    fn fig2_path_is_stored_reversed() {
        let h = DlsrHeader::from_path(6, dst(), &path(&[0, 1, 2, 5]), vec![]).unwrap();
        let decoded = decode_dlsr(&encode_dlsr(&h).unwrap()).unwrap();
        assert_eq!(decoded.domain_list, path(&[5, 2, 1, 0]));
        assert_eq!(decoded.first_domain, 3);
        assert_eq!(decoded.domains_left, 3);
        assert_eq!(decoded.path(), path(&[0, 1, 2, 5]));
    }

    #[test]
    fn rejects_other_routing_types() {
        let mut buf: Vec<u8> = (0..64u8).map(|i| i.wrapping_mul(37)).collect();
        buf[1] = 7;
        buf[2] = 4;
        assert_eq!(
            decode_dlsr(&buf),
            Err(WireError::WrongRoutingType { expected: ROUTING_TYPE_DLSR, found: 4 })
        );
        assert!(matches!(decode_dbd(&buf), Err(WireError::WrongRoutingType { .. })));
    }

    #[test]
    fn domains_left_past_list_is_rejected() {
        let mut bytes = encode_dlsr(&dlsr(4, vec![])).unwrap();
        bytes[3] = 9;
        assert!(matches!(decode_dlsr(&bytes), Err(WireError::IndexOutOfRange { .. })));
        // first_domain claiming more entries than the header holds
        let mut bytes = encode_dlsr(&dlsr(4, vec![])).unwrap();
        bytes[4] = 9;
        assert!(matches!(decode_dlsr(&bytes), Err(WireError::IndexOutOfRange { .. })));
    }

    #[test]
    fn truncated_buffers() {
        let bytes = encode_dlsr(&dlsr(4, vec![])).unwrap();
        assert!(matches!(decode_dlsr(&bytes[..20]), Err(WireError::Truncated { .. })));
        assert!(matches!(decode_dlsr(&bytes[..32]), Err(WireError::Truncated { .. })));
        assert!(matches!(decode_dbd(&[0, 0, ROUTING_TYPE_DBD, 0]), Err(WireError::Truncated { .. })));
    }

    #[test]
    fn option_running_past_header_is_malformed() {
        let h = DbdHeader { next_header: 6, original_destination: dst(), options: vec![TlvOption::new(7, vec![1, 2, 3, 4])] };
        let mut bytes = encode_dbd(&h).unwrap();
        bytes[RH_FIXED_LEN + 1] = 40;
        assert!(matches!(decode_dbd(&bytes), Err(WireError::MalformedTlv { .. })));
    }

    #[test]
    fn dbd_sizes() {
        let empty = DbdHeader { next_header: 17, original_destination: dst(), options: vec![] };
        let bytes = encode_dbd(&empty).unwrap();
        assert_eq!(bytes.len(), 24);
        assert_eq!(bytes[1], 2);

        let with_opt = DbdHeader {
            options: vec![TlvOption::new(OPT_TELEMETRY, vec![0x5a; 68])],
            ..empty
        };
        let bytes = encode_dbd(&with_opt).unwrap();
        assert_eq!(bytes.len(), 96);
        assert_eq!(bytes[1], 11);
        assert_eq!(decode_dbd(&bytes).unwrap(), with_opt);
    }

    #[test]
    fn reserved_bits_are_zero_and_ignored() {
        let h = dlsr(2, vec![]);
        let mut bytes = encode_dlsr(&h).unwrap();
        assert_eq!(&bytes[5..8], &[0, 0, 0]);
        bytes[5..8].copy_from_slice(&[0xff, 0xee, 0xdd]);
        assert_eq!(decode_dlsr(&bytes).unwrap(), h);

        let d = DbdHeader { next_header: 6, original_destination: dst(), options: vec![] };
        let mut bytes = encode_dbd(&d).unwrap();
        assert_eq!(&bytes[3..8], &[0; 5]);
        bytes[3..8].copy_from_slice(&[1, 2, 3, 4, 5]);
        assert_eq!(decode_dbd(&bytes).unwrap(), d);
    }

    #[test]
    fn overhead_formula() {
        assert_eq!(dlsr_overhead(10, &[]), 64);
        assert_eq!(dlsr_overhead(1, &[]), 32);
        assert_eq!(dlsr_overhead(20, &[]), 104);
        assert_eq!(srv6_comparison_length(10), 168);
        assert_eq!(srv6_comparison_length(1), 24);
        assert_eq!(srv6_comparison_length(4), 72);
    }

    #[test]
    fn long_inputs_are_rejected() {
        let p: Vec<_> = (0..256).map(DomainId).collect();
        assert_eq!(
            DlsrHeader::from_path(6, dst(), &p, vec![]),
            Err(WireError::DomainListTooLong(256))
        );
        let h = dlsr(2, vec![TlvOption::new(9, vec![0; 256])]);
        assert_eq!(encode_dlsr(&h), Err(WireError::OptionTooLong(256)));
    }

    #[test]
    fn unknown_options_survive() {
        let h = dlsr(2, vec![TlvOption::new(200, vec![9, 9, 9])]);
        assert_eq!(decode_dlsr(&encode_dlsr(&h).unwrap()).unwrap(), h);
    }

    #[test]
    fn packet_roundtrip_with_routing_header() {
        let mut p = Packet::new("2001:db8::1".parse().unwrap(), dst(), b"hello".to_vec());
        p.routing = Some(RoutingHeader::Dlsr(
            DlsrHeader::from_path(NEXT_HEADER_NONE, dst(), &path(&[0, 1]), vec![]).unwrap(),
        ));
        let bytes = p.to_bytes().unwrap();
        assert_eq!(bytes[6], NEXT_HEADER_ROUTING);
        assert_eq!(bytes.len(), 40 + 32 + 5);
        let mut back = Packet::from_bytes(&bytes).unwrap();
        assert_eq!(back.base.payload_length, 37);
        back.base.payload_length = 0;
        back.base.next_header = p.base.next_header;
        assert_eq!(back, p);
    }

    #[test]
    fn unknown_routing_type_is_opaque() {
        let mut raw = vec![6, 2, 4, 0, 0, 0, 0, 0];
        raw.extend_from_slice(&[0u8; 16]);
        let (rh, used) = RoutingHeader::decode(&raw).unwrap();
        assert_eq!(used, 24);
        assert_eq!(rh, RoutingHeader::Opaque { routing_type: 4, bytes: raw.clone() });
        assert_eq!(rh.encode().unwrap(), raw);
    }

    #[test]
    fn hex_is_whitespace_insensitive() {
        assert_eq!(from_hex("de ad\nbe\tef").unwrap(), vec![0xde, 0xad, 0xbe, 0xef]);
        assert_eq!(to_hex(&[0x0a, 0xff]), "0aff");
        let dump = hex_dump(&[1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(dump, "01 02 03 04 05 06 07 08\n09\n");
        assert_eq!(from_hex(&dump).unwrap(), (1..=9).collect::<Vec<u8>>());
    }
}
