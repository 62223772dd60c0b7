//! `dlr`: encode/decode routing headers, run scenarios, list domain paths
//! and verify telemetry traces.
//!
//! Exit status: 0 success or expectations met, 1 expectations or
//! verification failed, 2 usage or validation error.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Read};
use std::net::Ipv6Addr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dlr_core::forwarding::NodeKind;
use dlr_core::options::{DeadlineOption, ServiceChainOption, TelemetryOption, MAX_TELEMETRY_CAPACITY};
use dlr_core::sim::{self, report, Scenario, TraceLog};
use dlr_core::tables::Prefix;
use dlr_core::wire::{
    self, DbdHeader, DlsrHeader, DomainId, RoutingHeader, TlvOption, OPT_DEADLINE, OPT_SERVICE_CHAIN, OPT_TELEMETRY,
};

#[derive(Parser)]
#[command(name = "dlr", version, about = "Domain-level routing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeaderType {
    Dlsr,
    Dbd,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a routing header and print its hex dump.
    Encode {
        #[arg(long = "type", value_enum)]
        kind: HeaderType,
        /// Domain path in traversal order, e.g. 0,1,2,5 (dlsr only).
        #[arg(long, value_parser = parse_path)]
        path: Option<DomainPath>,
        #[arg(long)]
        dest: Ipv6Addr,
        #[arg(long, default_value_t = wire::NEXT_HEADER_NONE)]
        next_header: u8,
        /// Deadline budget, µs.
        #[arg(long)]
        deadline: Option<u32>,
        /// Telemetry records to pre-allocate.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=MAX_TELEMETRY_CAPACITY as i64))]
        telemetry: Option<u8>,
        /// Service chain as CHAIN_ID:INDEX.
        #[arg(long, value_parser = parse_chain)]
        chain: Option<ServiceChainOption>,
    },
    /// Decode a hex routing header (argument or standard input).
    Decode { hex: Option<String> },
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List converged and alternative domain paths.
    Paths {
        topology: PathBuf,
        #[arg(long)]
        src: u32,
        /// Destination prefix or address.
        #[arg(long)]
        dst: Prefix,
        /// Longest alternative path listed, in domains.
        #[arg(long, default_value_t = 8)]
        max_len: usize,
    },
    /// Analyze the telemetry carried in a trace.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone)]
struct DomainPath(Vec<DomainId>);

fn parse_path(s: &str) -> Result<DomainPath, String> {
    if s.trim().is_empty() {
        return Err("path is empty".into());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u32>().map(DomainId).map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()
        .map(DomainPath)
}

fn parse_chain(s: &str) -> Result<ServiceChainOption, String> {
    let (id, index) = s.split_once(':').ok_or("expected CHAIN_ID:INDEX")?;
    Ok(ServiceChainOption {
        chain_id: id.parse().map_err(|e| format!("chain id: {e}"))?,
        service_index: index.parse().map_err(|e| format!("index: {e}"))?,
    })
}

/// Failure with an exit code and a message for standard error.
struct Fail(u8, String);

fn usage(msg: impl std::fmt::Display) -> Fail {
    Fail(2, msg.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode { kind, path, dest, next_header, deadline, telemetry, chain } => {
            encode(kind, path, dest, next_header, deadline, telemetry, chain)
        }
        Command::Decode { hex } => decode(hex),
        Command::Run { scenario, trace, report, seed } => run(&scenario, trace, report, seed),
        Command::Paths { topology, src, dst, max_len } => paths(&topology, DomainId(src), dst, max_len),
        Command::Verify { scenario, trace, report } => verify(&scenario, &trace, report),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("dlr: {msg}");
            ExitCode::from(code)
        }
    }
}

fn encode(
    kind: HeaderType,
    path: Option<DomainPath>,
    dest: Ipv6Addr,
    next_header: u8,
    deadline: Option<u32>,
    telemetry: Option<u8>,
    chain: Option<ServiceChainOption>,
) -> Result<u8, Fail> {
    let mut options = Vec::new();
    if let Some(b) = deadline {
        options.push(DeadlineOption::new(b).to_tlv());
    }
    if let Some(c) = telemetry {
        options.push(TelemetryOption::with_capacity(c).to_tlv());
    }
    if let Some(c) = chain {
        options.push(c.to_tlv());
    }
    let bytes = match kind {
        HeaderType::Dlsr => {
            let path = path.ok_or_else(|| usage("--path is required for --type dlsr"))?;
            let h = DlsrHeader::from_path(next_header, dest, &path.0, options).map_err(usage)?;
            wire::encode_dlsr(&h).map_err(usage)?
        }
        HeaderType::Dbd => {
            if path.is_some() {
                return Err(usage("--path applies to --type dlsr only"));
            }
            let h = DbdHeader { next_header, original_destination: dest, options };
            wire::encode_dbd(&h).map_err(usage)?
        }
    };
    print!("{}", wire::hex_dump(&bytes));
    Ok(0)
}

fn describe_option(o: &TlvOption) -> Vec<String> {
    let fallback = || vec![format!("option type={} value={}", o.option_type, wire::to_hex(&o.value))];
    match o.option_type {
        OPT_DEADLINE => match DeadlineOption::from_tlv(o) {
            Ok(d) => vec![format!(
                "option deadline budget_remaining={} accumulated={}",
                d.budget_remaining, d.accumulated
            )],
            Err(_) => fallback(),
        },
        OPT_TELEMETRY => match TelemetryOption::from_tlv(o) {
            Ok(t) => {
                let mut lines = vec![format!(
                    "option telemetry capacity={} records={} overflow={} mismatch={}",
                    t.capacity,
                    t.records.len(),
                    u8::from(t.overflow),
                    u8::from(t.mismatch)
                )];
                lines.extend(
                    t.records
                        .iter()
                        .map(|r| format!("record domain={} ingress={} egress={}", r.domain.0, r.ingress_ts, r.egress_ts)),
                );
                lines
            }
            Err(_) => fallback(),
        },
        OPT_SERVICE_CHAIN => match ServiceChainOption::from_tlv(o) {
            Ok(c) => vec![format!("option service-chain chain_id={} service_index={}", c.chain_id, c.service_index)],
            Err(_) => fallback(),
        },
        _ => fallback(),
    }
}

fn decode(arg: Option<String>) -> Result<u8, Fail> {
    let text = match arg {
        Some(t) => t,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(usage)?;
            s
        }
    };
    let bytes = wire::from_hex(&text).map_err(|e| usage(format!("bad hex: {e}")))?;
    let (rh, used) = RoutingHeader::decode(&bytes).map_err(usage)?;
    if used != bytes.len() {
        return Err(usage(format!("{} trailing bytes after the header", bytes.len() - used)));
    }
    let mut lines = vec![];
    match &rh {
        RoutingHeader::Dlsr(h) => {
            let path: Vec<String> = h.path().iter().map(|d| d.0.to_string()).collect();
            lines.push("type=dlsr".to_string());
            lines.push(format!("length={used}"));
            lines.push(format!("next_header={}", h.next_header));
            lines.push(format!("domains_left={}", h.domains_left));
            lines.push(format!("first_domain={}", h.first_domain));
            lines.push(format!("path={}", path.join(",")));
            lines.push(format!("dest={}", h.original_destination));
        }
        RoutingHeader::Dbd(h) => {
            lines.push("type=dbd".to_string());
            lines.push(format!("length={used}"));
            lines.push(format!("next_header={}", h.next_header));
            lines.push(format!("dest={}", h.original_destination));
        }
        RoutingHeader::Opaque { routing_type, .. } => {
            lines.push(format!("type=opaque routing_type={routing_type}"));
            lines.push(format!("length={used}"));
            lines.push(format!("next_header={}", rh.next_header()));
        }
    }
    for o in rh.options() {
        lines.extend(describe_option(o));
    }
    for l in lines {
        println!("{l}");
    }
    Ok(0)
}

fn read(path: &PathBuf) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, Fail> {
    Scenario::from_toml(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &PathBuf, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn run(path: &PathBuf, trace: Option<PathBuf>, report: Option<PathBuf>, seed: Option<u64>) -> Result<u8, Fail> {
    let mut scenario = load_scenario(path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let sim = sim::build(&scenario).map_err(usage)?;
    let log = sim.run(None);
    if let Some(p) = &trace {
        write(p, &log.to_jsonl())?;
    }
    let (text, summary) = sim.report(&log);
    if let Some(p) = &report {
        write(p, &text)?;
    }
    for o in &log.outcomes {
        let domains: Vec<String> = o.domains.iter().map(|d| d.0.to_string()).collect();
        let status = match o.drop_reason {
            Some(r) => format!("dropped:{r}"),
            None => "delivered".into(),
        };
        println!("{}\t{}\t{status}\t{}\t{}", o.flow, o.seq, o.node, domains.join(","));
    }
    println!(
        "packets={} delivered={} dropped={} anomalies={} violations={}",
        summary.packets, summary.delivered, summary.dropped, summary.anomalies, summary.violations
    );
    let misses = sim.check_expectations(&log);
    for m in &misses {
        println!("expectation-miss\t{m}");
    }
    Ok(if misses.is_empty() { 0 } else { 1 })
}

/// Simple domain paths from `src` to `dst` with at most `max_len` domains,
/// shortest first, then lexicographic.
fn simple_paths(graph: &BTreeMap<DomainId, Vec<DomainId>>, src: DomainId, dst: DomainId, max_len: usize) -> Vec<Vec<DomainId>> {
    fn walk(
        graph: &BTreeMap<DomainId, Vec<DomainId>>,
        dst: DomainId,
        max_len: usize,
        path: &mut Vec<DomainId>,
        seen: &mut BTreeSet<DomainId>,
        out: &mut Vec<Vec<DomainId>>,
    ) {
        let here = *path.last().expect("nonempty");
        if here == dst {
            out.push(path.clone());
            return;
        }
        if path.len() >= max_len {
            return;
        }
        for &n in graph.get(&here).into_iter().flatten() {
            if seen.insert(n) {
                path.push(n);
                walk(graph, dst, max_len, path, seen, out);
                path.pop();
                seen.remove(&n);
            }
        }
    }
    let mut out = Vec::new();
    walk(graph, dst, max_len, &mut vec![src], &mut BTreeSet::from([src]), &mut out);
    out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    out
}

fn join(path: &[DomainId]) -> String {
    path.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

fn paths(path: &PathBuf, src: DomainId, dst: Prefix, max_len: usize) -> Result<u8, Fail> {
    let scenario = load_scenario(path)?;
    let sim = sim::build(&scenario).map_err(usage)?;
    let topo = &sim.topology;
    if topo.domain(src).is_none() {
        return Err(usage(format!("--src: unknown domain {src}")));
    }
    let dst_domain = topo
        .owner_of(dst.addr())
        .ok_or_else(|| usage(format!("--dst: {dst} belongs to no domain")))?;
    println!("src\t{src}");
    println!("dst\t{dst}\t{dst_domain}");

    let members: Vec<usize> = topo.nodes_in(src).collect();
    let lookup = |n: usize| sim.routing.fibs[n].lookup(dst.addr()).ok().map(|e| e.as_path.clone());
    let best = if src == dst_domain {
        Some(vec![src])
    } else {
        members.iter().find_map(|&n| lookup(n)).map(|p| {
            let mut full = vec![src];
            full.extend(p);
            full
        })
    };
    match &best {
        Some(p) if p.len() == 1 => println!("best\t{}\tintra-domain", join(p)),
        Some(p) => println!("best\t{}", join(p)),
        None => println!("best\tunreachable"),
    }
    for &n in &members {
        let node = &topo.nodes[n];
        if node.kind != NodeKind::Border {
            continue;
        }
        match lookup(n) {
            Some(p) if src != dst_domain => println!("dbr\t{}\t{}", node.node_id, join(&p)),
            _ if src == dst_domain => println!("dbr\t{}\t-", node.node_id),
            _ => println!("dbr\t{}\tunreachable", node.node_id),
        }
    }
    for p in simple_paths(&topo.domain_graph(), src, dst_domain, max_len) {
        let tag = if Some(&p) == best.as_ref() { "\tbest" } else { "" };
        println!("path\t{}{tag}", join(&p));
    }
    Ok(0)
}

fn verify(scenario: &PathBuf, trace: &PathBuf, report_out: Option<PathBuf>) -> Result<u8, Fail> {
    let sim = sim::build(&load_scenario(scenario)?).map_err(usage)?;
    let log = TraceLog::from_jsonl(&read(trace)?).map_err(|e| usage(format!("{}: {e}", trace.display())))?;
    let (text, summary) = report::render(&log, &sim.sla_ns, &sim.budgets_ns());
    match &report_out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(if summary.anomalies + summary.violations + summary.malformed == 0 { 0 } else { 1 })
}
