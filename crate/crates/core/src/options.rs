//! Typed views of the functional routing-header options and the per-domain
//! operations DBRs apply to them.
//!
//! Value layouts (big-endian, fields in order):
//!
//! * deadline (type 3): `budget_remaining_us: u32`, `accumulated_us: u32`
//! * telemetry (type 4): `capacity: u8`, `next_free: u8`, `flags: u8`,
//!   reserved `u8`, then `capacity` slots of
//!   `{domain: u32, ingress_ns: u64, egress_ns: u64}` (20 bytes each)
//! * service chain (type 5): `chain_id: u32`, `service_index: u8`

use serde::{Deserialize, Serialize};

use crate::wire::{DomainId, TlvOption, WireError, OPT_DEADLINE, OPT_SERVICE_CHAIN, OPT_TELEMETRY};

pub const TELEMETRY_RECORD_LEN: usize = 20;
const TELEMETRY_HEADER_LEN: usize = 4;
/// Largest capacity whose option value still fits the 255-byte TLV limit.
pub const MAX_TELEMETRY_CAPACITY: u8 = 12;

const FLAG_OVERFLOW: u8 = 0x01;
const FLAG_MISMATCH: u8 = 0x02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadlineOption {
    pub budget_remaining: u32,
    pub accumulated: u32,
}

impl DeadlineOption {
    pub fn new(budget_us: u32) -> Self {
        DeadlineOption {
            budget_remaining: budget_us,
            accumulated: 0,
        }
    }

    pub fn to_tlv(&self) -> TlvOption {
        let mut v = Vec::with_capacity(8);
        v.extend_from_slice(&self.budget_remaining.to_be_bytes());
        v.extend_from_slice(&self.accumulated.to_be_bytes());
        TlvOption::new(OPT_DEADLINE, v)
    }

    pub fn from_tlv(opt: &TlvOption) -> Result<Self, WireError> {
        let v = expect_value(opt, OPT_DEADLINE, 8)?;
        Ok(DeadlineOption {
            budget_remaining: be_u32(&v[0..4]),
            accumulated: be_u32(&v[4..8]),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Pass,
    Fail,
}

/// Feasible iff the remaining budget covers the lower bound on the delay
/// still ahead.
pub fn deadline_check(option: &DeadlineOption, min_residual_delay_us: u32) -> Feasibility {
    if option.budget_remaining >= min_residual_delay_us {
        Feasibility::Pass
    } else {
        Feasibility::Fail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Debit {
    pub option: DeadlineOption,
    /// Portion of the residence not covered by the remaining budget.
    pub overrun: u32,
}

pub fn deadline_debit(option: &DeadlineOption, residence_us: u32) -> Debit {
    let overrun = residence_us.saturating_sub(option.budget_remaining);
    Debit {
        option: DeadlineOption {
            budget_remaining: option.budget_remaining.saturating_sub(residence_us),
            accumulated: option.accumulated.saturating_add(residence_us),
        },
        overrun,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub domain: DomainId,
    pub ingress_ts: u64,
    /// 0 while the domain has not been left.
    pub egress_ts: u64,
}

impl TelemetryRecord {
    pub fn is_complete(&self) -> bool {
        self.egress_ts != 0
    }
}

/// Pre-allocated per-domain trace. `records.len()` is the next free slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryOption {
    pub capacity: u8,
    pub records: Vec<TelemetryRecord>,
    pub overflow: bool,
    /// Set when an egress stamp found no matching open record.
    pub mismatch: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Ingress,
    Egress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StampOutcome {
    Stamped,
    /// No free slot; overflow flag set, nothing recorded.
    Overflow,
    /// Egress without a matching open record; trace anomaly only.
    MismatchedEgress,
}

impl TelemetryOption {
    pub fn with_capacity(capacity: u8) -> Self {
        TelemetryOption {
            capacity: capacity.min(MAX_TELEMETRY_CAPACITY),
            records: Vec::new(),
            overflow: false,
            mismatch: false,
        }
    }

    pub fn next_free(&self) -> usize {
        self.records.len()
    }

    pub fn to_tlv(&self) -> TlvOption {
        let cap = usize::from(self.capacity);
        let mut v = Vec::with_capacity(TELEMETRY_HEADER_LEN + cap * TELEMETRY_RECORD_LEN);
        let mut flags = 0;
        if self.overflow {
            flags |= FLAG_OVERFLOW;
        }
        if self.mismatch {
            flags |= FLAG_MISMATCH;
        }
        v.extend_from_slice(&[self.capacity, self.records.len() as u8, flags, 0]);
        for slot in 0..cap {
            match self.records.get(slot) {
                Some(r) => {
                    v.extend_from_slice(&r.domain.0.to_be_bytes());
                    v.extend_from_slice(&r.ingress_ts.to_be_bytes());
                    v.extend_from_slice(&r.egress_ts.to_be_bytes());
                }
                None => v.extend_from_slice(&[0; TELEMETRY_RECORD_LEN]),
            }
        }
        TlvOption::new(OPT_TELEMETRY, v)
    }

    pub fn from_tlv(opt: &TlvOption) -> Result<Self, WireError> {
        let bad = WireError::BadOptionValue { option_type: OPT_TELEMETRY };
        if opt.option_type != OPT_TELEMETRY || opt.value.len() < TELEMETRY_HEADER_LEN {
            return Err(bad);
        }
        let v = &opt.value;
        let capacity = v[0];
        let next_free = v[1];
        if next_free > capacity
            || v.len() != TELEMETRY_HEADER_LEN + usize::from(capacity) * TELEMETRY_RECORD_LEN
        {
            return Err(bad);
        }
        let records = v[TELEMETRY_HEADER_LEN..]
            .chunks_exact(TELEMETRY_RECORD_LEN)
            .take(usize::from(next_free))
            .map(|c| TelemetryRecord {
                domain: DomainId(be_u32(&c[0..4])),
                ingress_ts: be_u64(&c[4..12]),
                egress_ts: be_u64(&c[12..20]),
            })
            .collect();
        Ok(TelemetryOption {
            capacity,
            records,
            overflow: v[2] & FLAG_OVERFLOW != 0,
            mismatch: v[2] & FLAG_MISMATCH != 0,
        })
    }
}

/// Applies an ingress or egress stamp for `domain` at time `ts` (ns).
pub fn telemetry_stamp(
    option: &mut TelemetryOption,
    domain: DomainId,
    ts: u64,
    boundary: Boundary,
) -> StampOutcome {
    match boundary {
        Boundary::Ingress => {
            if option.overflow || option.records.len() >= usize::from(option.capacity) {
                option.overflow = true;
                return StampOutcome::Overflow;
            }
            option.records.push(TelemetryRecord {
                domain,
                ingress_ts: ts,
                egress_ts: 0,
            });
            StampOutcome::Stamped
        }
        Boundary::Egress => match option.records.last_mut() {
            Some(r) if r.domain == domain && !r.is_complete() => {
                r.egress_ts = ts;
                StampOutcome::Stamped
            }
            _ if option.overflow => StampOutcome::Overflow,
            _ => {
                option.mismatch = true;
                StampOutcome::MismatchedEgress
            }
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceChainOption {
    pub chain_id: u32,
    pub service_index: u8,
}

impl ServiceChainOption {
    pub fn to_tlv(&self) -> TlvOption {
        let mut v = self.chain_id.to_be_bytes().to_vec();
        v.push(self.service_index);
        TlvOption::new(OPT_SERVICE_CHAIN, v)
    }

    pub fn from_tlv(opt: &TlvOption) -> Result<Self, WireError> {
        let v = expect_value(opt, OPT_SERVICE_CHAIN, 5)?;
        Ok(ServiceChainOption {
            chain_id: be_u32(&v[0..4]),
            service_index: v[4],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainStep {
    pub option: ServiceChainOption,
    pub applied: bool,
    /// The domain hosts a function but the chain was already exhausted.
    pub chain_complete: bool,
}

pub fn service_chain_step(option: &ServiceChainOption, hosts_function: bool) -> ChainStep {
    if !hosts_function {
        return ChainStep {
            option: *option,
            applied: false,
            chain_complete: false,
        };
    }
    match option.service_index.checked_sub(1) {
        Some(next) => ChainStep {
            option: ServiceChainOption {
                service_index: next,
                ..*option
            },
            applied: true,
            chain_complete: false,
        },
        None => ChainStep {
            option: *option,
            applied: false,
            chain_complete: true,
        },
    }
}

/// Finds the first option of `option_type` in `options`.
pub fn find(options: &[TlvOption], option_type: u8) -> Option<(usize, &TlvOption)> {
    options
        .iter()
        .enumerate()
        .find(|(_, o)| o.option_type == option_type)
}

fn expect_value(opt: &TlvOption, option_type: u8, len: usize) -> Result<&[u8], WireError> {
    if opt.option_type != option_type || opt.value.len() != len {
        return Err(WireError::BadOptionValue { option_type });
    }
    Ok(&opt.value)
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

fn be_u64(b: &[u8]) -> u64 {
    let mut a = [0u8; 8];
    a.copy_from_slice(&b[..8]);
    u64::from_be_bytes(a)
}
