//! Per-domain accountability from the telemetry option: residence times,
//! inter-domain gaps, SLA verdicts, timestamp cross-examination and delay
//! attribution.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::options::TelemetryOption;
use crate::wire::DomainId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OamError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Compliant,
    Violated,
    Unverifiable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Compliant => "compliant",
            Verdict::Violated => "violated",
            Verdict::Unverifiable => "unverifiable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainReport {
    pub domain: DomainId,
    /// Egress minus ingress, ns. Negative only for forged stamps.
    pub residence: i64,
    /// Time to the next domain's ingress stamp; none for the last record.
    pub inter_domain_gap: Option<i64>,
    pub sla_limit: Option<u64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analysis {
    pub reports: Vec<DomainReport>,
    /// The option overflowed: domains after the last record went unmeasured.
    pub unverifiable_tail: bool,
}

impl Analysis {
    pub fn total_residence(&self) -> i64 {
        self.reports.iter().map(|r| r.residence).sum()
    }

    pub fn total_gap(&self) -> i64 {
        self.reports.iter().filter_map(|r| r.inter_domain_gap).sum()
    }
}

/// Builds one report per record, in visit order. `sla` is in ns.
pub fn analyze(option: &TelemetryOption, sla: &BTreeMap<DomainId, u64>) -> Result<Analysis, OamError> {
    let records = &option.records;
    for (i, r) in records.iter().enumerate() {
        if !r.is_complete() {
            return Err(OamError::MalformedTrace(format!("record {i} ({}) has no egress stamp", r.domain)));
        }
        if i > 0 && r.ingress_ts < records[i - 1].ingress_ts {
            return Err(OamError::MalformedTrace(format!("record {i} ({}) ingress precedes record {}", r.domain, i - 1)));
        }
    }
    let reports = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let residence = r.egress_ts as i64 - r.ingress_ts as i64;
            let sla_limit = sla.get(&r.domain).copied();
            let verdict = match sla_limit {
                _ if residence < 0 => Verdict::Unverifiable,
                Some(limit) if residence > limit as i64 => Verdict::Violated,
                Some(_) => Verdict::Compliant,
                None => Verdict::Unverifiable,
            };
            DomainReport {
                domain: r.domain,
                residence,
                inter_domain_gap: records
                    .get(i + 1)
                    .map(|next| next.ingress_ts as i64 - r.egress_ts as i64),
                sla_limit,
                verdict,
            }
        })
        .collect();
    Ok(Analysis {
        reports,
        unverifiable_tail: option.overflow,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Anomaly {
    /// A domain claims to have released the packet before receiving it.
    EgressBeforeIngress { domain: DomainId, ingress: u64, egress: u64 },
    /// A domain claims to have released the packet after the next domain
    /// already stamped its arrival.
    EgressAfterNextIngress {
        domain: DomainId,
        next_domain: DomainId,
        egress: u64,
        next_ingress: u64,
    },
}

impl Anomaly {
    /// The domain whose stamp is contradicted.
    pub fn domain(&self) -> DomainId {
        match self {
            Anomaly::EgressBeforeIngress { domain, .. } => *domain,
            Anomaly::EgressAfterNextIngress { domain, .. } => *domain,
        }
    }
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anomaly::EgressBeforeIngress { domain, ingress, egress } => {
                write!(f, "{domain} egress {egress} before its ingress {ingress}")
            }
            Anomaly::EgressAfterNextIngress { domain, next_domain, egress, next_ingress } => write!(
                f,
                "{domain} egress {egress} after {next_domain} ingress {next_ingress}"
            ),
        }
    }
}

/// Checks every stamp against its own record and the next domain's ingress.
pub fn cross_examine(option: &TelemetryOption) -> Vec<Anomaly> {
    let mut out = Vec::new();
    for (i, r) in option.records.iter().enumerate() {
        if !r.is_complete() {
            continue;
        }
        if r.egress_ts < r.ingress_ts {
            out.push(Anomaly::EgressBeforeIngress {
                domain: r.domain,
                ingress: r.ingress_ts,
                egress: r.egress_ts,
            });
        }
        if let Some(next) = option.records.get(i + 1) {
            if r.egress_ts > next.ingress_ts {
                out.push(Anomaly::EgressAfterNextIngress {
                    domain: r.domain,
                    next_domain: next.domain,
                    egress: r.egress_ts,
                    next_ingress: next.ingress_ts,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub domain_delay: i64,
    pub link_delay: i64,
    pub budget: u64,
    /// Measured delay beyond the budget (0 when within it).
    pub overrun: i64,
    /// Violating domains and their excess over the SLA.
    pub culprits: Vec<(DomainId, i64)>,
    /// Compliant domains and the slack they left unused.
    pub contributors: Vec<(DomainId, i64)>,
}

pub fn attribute(reports: &[DomainReport], total_budget: u64) -> Attribution {
    let domain_delay: i64 = reports.iter().map(|r| r.residence).sum();
    let link_delay: i64 = reports.iter().filter_map(|r| r.inter_domain_gap).sum();
    let mut culprits = Vec::new();
    let mut contributors = Vec::new();
    for r in reports {
        let Some(limit) = r.sla_limit else { continue };
        match r.verdict {
            Verdict::Violated => culprits.push((r.domain, r.residence - limit as i64)),
            Verdict::Compliant => contributors.push((r.domain, limit as i64 - r.residence)),
            Verdict::Unverifiable => {}
        }
    }
    Attribution {
        domain_delay,
        link_delay,
        budget: total_budget,
        overrun: (domain_delay + link_delay - total_budget as i64).max(0),
        culprits,
        contributors,
    }
}

/// Column header of [`render_rows`].
pub const REPORT_HEADER: &str = "#kind\tflow\tseq\tdomain\tresidence_ns\tgap_ns\tsla_ns\tverdict";

/// One tab-separated `domain` row per record; `-` marks an absent value.
pub fn render_rows(flow: &str, seq: u32, analysis: &Analysis) -> String {
    let mut out = String::new();
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    for r in &analysis.reports {
        let _ = writeln!(
            out,
            "domain\t{flow}\t{seq}\t{}\t{}\t{}\t{}\t{}",
            r.domain.0,
            r.residence,
            opt(r.inter_domain_gap.map(|g| g.to_string())),
            opt(r.sla_limit.map(|s| s.to_string())),
            r.verdict
        );
    }
    if analysis.unverifiable_tail {
        let _ = writeln!(out, "domain\t{flow}\t{seq}\t*\t-\t-\t-\tunverifiable");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::options::TelemetryRecord;

    fn trace(records: &[(u32, u64, u64)]) -> TelemetryOption {
        TelemetryOption {
            capacity: 8,
            records: records
                .iter()
                .map(|&(d, i, e)| TelemetryRecord { domain: DomainId(d), ingress_ts: i, egress_ts: e })
                .collect(),
            overflow: false,
            mismatch: false,
        }
    }

    fn sla(v: &[(u32, u64)]) -> BTreeMap<DomainId, u64> {
        v.iter().map(|&(d, s)| (DomainId(d), s)).collect()
    }

    #[test]
    fn residence_and_verdicts() {
        let a = analyze(&trace(&[(1, 10, 25), (2, 30, 41)]), &sla(&[(1, 20), (2, 10)])).unwrap();
        assert_eq!(a.reports[0].residence, 15);
        assert_eq!(a.reports[0].verdict, Verdict::Compliant);
        assert_eq!(a.reports[0].inter_domain_gap, Some(5));
        assert_eq!(a.reports[1].residence, 11);
        assert_eq!(a.reports[1].verdict, Verdict::Violated);
        assert_eq!(a.total_residence() + a.total_gap(), 41 - 10);
    }

    #[test]
    fn single_domain_has_no_gap() {
        let a = analyze(&trace(&[(3, 5, 9)]), &sla(&[])).unwrap();
        assert_eq!(a.reports.len(), 1);
        assert_eq!(a.reports[0].inter_domain_gap, None);
        assert_eq!(a.reports[0].verdict, Verdict::Unverifiable);
    }

    #[test]
    fn overflow_marks_tail() {
        let mut t = trace(&[(1, 10, 20), (2, 25, 30)]);
        t.overflow = true;
        let a = analyze(&t, &sla(&[(1, 100), (2, 100)])).unwrap();
        assert_eq!(a.reports.len(), 2);
        assert!(a.unverifiable_tail);
        assert!(render_rows("f", 0, &a).ends_with("domain\tf\t0\t*\t-\t-\t-\tunverifiable\n"));
    }

    #[test]
    fn incomplete_or_unordered_is_malformed() {
        assert!(analyze(&trace(&[(1, 10, 0)]), &sla(&[])).is_err());
        assert!(analyze(&trace(&[(1, 10, 20), (2, 5, 30)]), &sla(&[])).is_err());
    }

    #[test]
    fn cross_examination() {
        assert!(cross_examine(&trace(&[(1, 10, 25), (2, 30, 41)])).is_empty());

        let hidden = cross_examine(&trace(&[(1, 10, 8), (2, 30, 41)]));
        assert_eq!(hidden, vec![Anomaly::EgressBeforeIngress { domain: DomainId(1), ingress: 10, egress: 8 }]);

        let late = cross_examine(&trace(&[(1, 10, 35), (2, 30, 41)]));
        assert_eq!(late.len(), 1);
        assert_eq!(late[0].domain(), DomainId(1));
    }

    #[test]
    fn attribution() {
        let ok = analyze(&trace(&[(1, 0, 10), (2, 12, 20)]), &sla(&[(1, 10), (2, 10)])).unwrap();
        let s = attribute(&ok.reports, 100);
        assert!(s.culprits.is_empty());
        assert_eq!(s.overrun, 0);
        assert_eq!(s.contributors, vec![(DomainId(1), 0), (DomainId(2), 2)]);

        // AS1 exceeds by 5 and that is exactly the overrun.
        let bad = analyze(&trace(&[(1, 0, 15), (2, 15, 25)]), &sla(&[(1, 10), (2, 10)])).unwrap();
        let s = attribute(&bad.reports, 20);
        assert_eq!(s.culprits, vec![(DomainId(1), 5)]);
        assert_eq!(s.overrun, 5);
        assert_eq!(s.domain_delay + s.link_delay, 25);
    }
}
