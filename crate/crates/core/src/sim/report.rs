//! Tab-separated OAM report over the outcomes of a run.
//!
//! Row kinds (first column):
//! - `packet  flow seq status reason e2e_ns`
//! - `domain  flow seq domain residence_ns gap_ns sla_ns verdict`
//! - `prestamp flow seq ns` (source host to first telemetry stamp)
//! - `anomaly flow seq domain kind detail`
//! - `attribution flow seq domain_delay link_delay budget overrun culprits contributors`
//! - `error   flow seq message`
//! - `summary key=value ...`

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::oam::{self, Anomaly, REPORT_HEADER};
use crate::options::{self, TelemetryOption};
use crate::wire::{DomainId, OPT_TELEMETRY};

use super::trace::{Outcome, TraceLog};

pub const REPORT_SCHEMA: &str = "dlr-report/1";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summary {
    pub packets: usize,
    pub delivered: usize,
    pub dropped: usize,
    pub anomalies: usize,
    pub violations: usize,
    pub malformed: usize,
}

fn telemetry_of(o: &Outcome) -> Option<TelemetryOption> {
    let rh = o.final_packet_header()?;
    let (_, t) = options::find(rh.options(), OPT_TELEMETRY)?;
    TelemetryOption::from_tlv(t).ok()
}

fn pairs(v: &[(DomainId, i64)]) -> String {
    if v.is_empty() {
        return "-".into();
    }
    v.iter().map(|(d, x)| format!("{}:{x}", d.0)).collect::<Vec<_>>().join(",")
}

fn anomaly_kind(a: &Anomaly) -> &'static str {
    match a {
        Anomaly::EgressBeforeIngress { .. } => "egress-before-ingress",
        Anomaly::EgressAfterNextIngress { .. } => "egress-after-next-ingress",
    }
}

/// Renders the report. `sla` and `budgets` (per flow) are in ns.
pub fn render(log: &TraceLog, sla: &BTreeMap<DomainId, u64>, budgets: &BTreeMap<String, u64>) -> (String, Summary) {
    let mut out = String::new();
    let mut sum = Summary::default();
    let _ = writeln!(out, "# {REPORT_SCHEMA} seed={}", log.seed);
    let _ = writeln!(out, "{REPORT_HEADER}");
    for o in &log.outcomes {
        sum.packets += 1;
        let (flow, seq) = (&o.flow, o.seq);
        let status = if o.delivered() {
            sum.delivered += 1;
            "delivered"
        } else {
            sum.dropped += 1;
            "dropped"
        };
        let reason = o.drop_reason.map_or("-", |r| r.as_str());
        let e2e = if o.delivered() { (o.finished_at - o.injected_at).to_string() } else { "-".into() };
        let _ = writeln!(out, "packet\t{flow}\t{seq}\t{status}\t{reason}\t{e2e}");
        if !o.delivered() {
            continue;
        }
        let Some(t) = telemetry_of(o) else { continue };
        for a in oam::cross_examine(&t) {
            sum.anomalies += 1;
            let _ = writeln!(out, "anomaly\t{flow}\t{seq}\t{}\t{}\t{a}", a.domain().0, anomaly_kind(&a));
        }
        let analysis = match oam::analyze(&t, sla) {
            Ok(a) => a,
            Err(e) => {
                sum.malformed += 1;
                let _ = writeln!(out, "error\t{flow}\t{seq}\t{e}");
                continue;
            }
        };
        if let Some(first) = t.records.first() {
            let _ = writeln!(out, "prestamp\t{flow}\t{seq}\t{}", first.ingress_ts as i64 - o.injected_at as i64);
        }
        out.push_str(&oam::render_rows(flow, seq, &analysis));
        sum.violations += analysis
            .reports
            .iter()
            .filter(|r| r.verdict == oam::Verdict::Violated)
            .count();
        if let Some(&budget) = budgets.get(flow) {
            let a = oam::attribute(&analysis.reports, budget);
            let _ = writeln!(
                out,
                "attribution\t{flow}\t{seq}\t{}\t{}\t{}\t{}\t{}\t{}",
                a.domain_delay,
                a.link_delay,
                a.budget,
                a.overrun,
                pairs(&a.culprits),
                pairs(&a.contributors)
            );
        }
    }
    let _ = writeln!(
        out,
        "summary\tpackets={}\tdelivered={}\tdropped={}\tanomalies={}\tviolations={}\tmalformed={}",
        sum.packets, sum.delivered, sum.dropped, sum.anomalies, sum.violations, sum.malformed
    );
    (out, sum)
}

impl super::Simulation {
    pub fn report(&self, log: &TraceLog) -> (String, Summary) {
        render(log, &self.sla_ns, &self.budgets_ns())
    }
}
