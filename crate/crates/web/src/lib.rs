//! Browser demo bindings. Each export has a plain Rust counterpart so the
//! logic can be tested natively.

use std::net::Ipv6Addr;

use dlr_core::options::{DeadlineOption, TelemetryOption};
use dlr_core::sim::{self, scenario::Scenario};
use dlr_core::wire::{self, DbdHeader, DlsrHeader, DomainId};
use wasm_bindgen::prelude::*;

pub use dlr_core::scenarios;

/// Encodes a DLSR header (non-empty `path`) or a DBD header (empty `path`)
/// and returns its hex dump.
pub fn encode_header(path: &str, dest: &str, deadline_us: u32, telemetry: u8) -> Result<String, String> {
    let dest: Ipv6Addr = dest.trim().parse().map_err(|_| format!("bad destination `{dest}`"))?;
    let mut options = Vec::new();
    if deadline_us > 0 {
        options.push(DeadlineOption::new(deadline_us).to_tlv());
    }
    if telemetry > 0 {
        if telemetry > dlr_core::options::MAX_TELEMETRY_CAPACITY {
            return Err(format!("telemetry capacity {telemetry} too large"));
        }
        options.push(TelemetryOption::with_capacity(telemetry).to_tlv());
    }
    let path = path.trim();
    let bytes = if path.is_empty() {
        wire::encode_dbd(&DbdHeader { next_header: 59, original_destination: dest, options })
    } else {
        let ids = path
            .split(',')
            .map(|s| s.trim().parse().map(DomainId).map_err(|_| format!("bad domain `{s}`")))
            .collect::<Result<Vec<_>, _>>()?;
        let h = DlsrHeader::from_path(59, dest, &ids, options).map_err(|e| e.to_string())?;
        wire::encode_dlsr(&h)
    }
    .map_err(|e| e.to_string())?;
    Ok(wire::hex_dump(&bytes))
}

/// `n`, DLSR bytes and SRv6 bytes for 1..=max domains, one row per line.
pub fn overhead_table(max: usize) -> String {
    (1..=max)
        .map(|n| format!("{n}\t{}\t{}\n", wire::dlsr_overhead(n, &[]), wire::srv6_comparison_length(n)))
        .collect()
}

/// Runs a scenario and lists per-packet outcomes followed by every trace step.
pub fn run_scenario(toml: &str, seed: Option<u64>) -> Result<String, String> {
    let mut sc = Scenario::from_toml(toml).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let sim = sim::build(&sc).map_err(|e| e.to_string())?;
    let log = sim.run(None);
    let mut out = String::new();
    for o in &log.outcomes {
        let domains: Vec<String> = o.domains.iter().map(|d| format!("AS{}", d.0)).collect();
        let status = o.drop_reason.map_or("delivered".to_string(), |r| format!("dropped ({r})"));
        out += &format!("{} #{}: {status} at {} via {}\n", o.flow, o.seq, o.node, domains.join(" > "));
    }
    for m in sim.check_expectations(&log) {
        out += &format!("expectation miss: {m}\n");
    }
    out.push('\n');
    for st in &log.steps {
        let left = match (st.domains_left_before, st.domains_left_after) {
            (Some(a), Some(b)) if a != b => format!(" left {a}->{b}"),
            _ => String::new(),
        };
        let dst = if st.destination_before != st.destination_after {
            format!(" dst {} -> {}", st.destination_before, st.destination_after)
        } else {
            String::new()
        };
        out += &format!(
            "{:>10} {}#{} {} AS{} {:?}{left}{dst}",
            st.time, st.flow, st.seq, st.node, st.domain.0, st.action
        );
        for n in &st.notes {
            out += &format!(" [{n}]");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Runs a scenario and returns its OAM report.
pub fn scenario_report(toml: &str) -> Result<String, String> {
    let sim = sim::load(toml).map_err(|e| e.to_string())?;
    Ok(sim.report(&sim.run(None)).0)
}

#[wasm_bindgen(js_name = encodeHeader)]
pub fn js_encode_header(path: &str, dest: &str, deadline_us: u32, telemetry: u8) -> Result<String, JsError> {
    encode_header(path, dest, deadline_us, telemetry).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = overheadTable)]
pub fn js_overhead_table(max: usize) -> String {
    overhead_table(max)
}

#[wasm_bindgen(js_name = runScenario)]
pub fn js_run_scenario(toml: &str, seed: Option<u64>) -> Result<String, JsError> {
    run_scenario(toml, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = scenarioReport)]
pub fn js_scenario_report(toml: &str) -> Result<String, JsError> {
    scenario_report(toml).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = shippedScenario)]
pub fn js_shipped_scenario(name: &str) -> Option<String> {
    scenarios::all().into_iter().find(|(n, _)| *n == name).map(|(_, t)| t.to_string())
}
