use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn dlr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlr")).args(args).output().expect("binary runs")
}

fn dlr_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dlr"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scenario(name: &str) -> String {
    format!("{}/../core/scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dlr-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn encode_dlsr_is_40_bytes() {
    let o = dlr(&["encode", "--type", "dlsr", "--path", "0,1,2,5", "--dest", "2001:db8:5::9"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.split_whitespace().count(), 40);
    assert!(text.starts_with("3b 04 fd 03 03 00 00 00\n"));
}

#[test]
fn encode_dbd_is_24_bytes() {
    let o = dlr(&["encode", "--type", "dbd", "--dest", "2001:db8:5::9"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).split_whitespace().count(), 24);
}

#[test]
fn encode_flag_errors_exit_2() {
    for args in [
        &["encode", "--type", "dlsr", "--path", "", "--dest", "2001:db8:5::9"][..],
        &["encode", "--type", "dlsr", "--dest", "2001:db8:5::9"],
        &["encode", "--type", "dbd", "--path", "1", "--dest", "2001:db8:5::9"],
        &["encode", "--type", "srv6", "--dest", "2001:db8:5::9"],
        &["encode", "--type", "dbd", "--dest", "nope"],
        &["encode", "--type", "dbd", "--dest", "::1", "--telemetry", "13"],
    ] {
        let o = dlr(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn encode_decode_round_trip() {
    let enc = dlr(&[
        "encode", "--type", "dlsr", "--path", "7,65000,3", "--dest", "2001:db8::42", "--next-header", "6",
        "--deadline", "1500", "--telemetry", "3", "--chain", "9:2",
    ]);
    assert_eq!(enc.status.code(), Some(0));
    let dec = dlr_stdin(&["decode"], &stdout(&enc));
    assert_eq!(dec.status.code(), Some(0));
    let text = stdout(&dec);
    for line in [
        "type=dlsr",
        "next_header=6",
        "domains_left=2",
        "path=7,65000,3",
        "dest=2001:db8::42",
        "option deadline budget_remaining=1500 accumulated=0",
        "option telemetry capacity=3 records=0 overflow=0 mismatch=0",
        "option service-chain chain_id=9 service_index=2",
    ] {
        assert!(text.lines().any(|l| l == line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn decode_rejects_garbage() {
    assert_eq!(dlr(&["decode", "zz"]).status.code(), Some(2));
    assert_eq!(dlr(&["decode", "3b 04 fd 03"]).status.code(), Some(2));
}

#[test]
fn run_fig2_meets_expectations() {
    let trace = scratch("fig2.jsonl");
    let report = scratch("fig2.tsv");
    let o = dlr(&[
        "run",
        &scenario("fig2"),
        "--trace",
        trace.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().any(|l| l == "dlsr\t0\tdelivered\tdst\t0,1,2,5"));
    let t = std::fs::read_to_string(&trace).unwrap();
    assert!(t.lines().next().unwrap().contains("dlr-trace/1"));
    let r = std::fs::read_to_string(&report).unwrap();
    assert!(r.lines().any(|l| l.starts_with("domain\tdlsr\t0\t1\t")));

    let v = dlr(&["verify", "--scenario", &scenario("fig2"), "--trace", trace.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    assert_eq!(stdout(&v), r);
}

#[test]
fn run_deadline_drop_is_expected() {
    let o = dlr(&["run", &scenario("deadline_drop")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("dropped:deadline-infeasible\ti3"));
}

#[test]
fn run_is_deterministic_and_seed_overridable() {
    let out = |seed: &str, name: &str| {
        let p = scratch(name);
        let o = dlr(&["run", &scenario("fig2"), "--seed", seed, "--trace", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(p).unwrap()
    };
    assert_eq!(out("3", "a.jsonl"), out("3", "b.jsonl"));
    assert!(out("4", "c.jsonl").contains("\"seed\":4"));
}

#[test]
fn run_failed_expectation_exits_1() {
    let text = std::fs::read_to_string(scenario("fig2")).unwrap().replace(
        "outcome = \"delivered\"\ndomains = [0, 1, 2, 5]",
        "outcome = \"dropped\"\ndomains = [0, 1, 2, 5]",
    );
    let p = scratch("bad-expect.toml");
    std::fs::write(&p, text).unwrap();
    let o = dlr(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("expectation-miss"));
}

#[test]
fn run_malformed_scenario_exits_2() {
    let p = scratch("broken.toml");
    std::fs::write(&p, "[[domains]]\nid = \"x\"\n").unwrap();
    assert_eq!(dlr(&["run", p.to_str().unwrap()]).status.code(), Some(2));
    let p = scratch("unknown-node.toml");
    let text = std::fs::read_to_string(scenario("fig2")).unwrap().replace("a = \"src\"", "a = \"ghost\"");
    std::fs::write(&p, text).unwrap();
    let o = dlr(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("links[0].a"));
    assert_eq!(dlr(&["run", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn paths_fig2() {
    let o = dlr(&["paths", &scenario("fig2"), "--src", "0", "--dst", "2001:db8:5::/48"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "best\tAS0,AS1,AS2,AS5"));
    assert!(text.lines().any(|l| l == "path\tAS0,AS1,AS2,AS5\tbest"));
    assert!(text.lines().any(|l| l == "path\tAS0,AS3,AS4,AS5"));
}

#[test]
fn paths_same_domain_and_unreachable() {
    let o = dlr(&["paths", &scenario("fig2"), "--src", "5", "--dst", "2001:db8:5::9"]);
    assert!(stdout(&o).lines().any(|l| l == "best\tAS5\tintra-domain"));

    let text = std::fs::read_to_string(scenario("deadline_drop"))
        .unwrap()
        .replace("a = \"e2\"\nb = \"i3\"", "a = \"e2\"\nb = \"r2\"")
        .replace("[[flows]]", "[[unused]]");
    let text = text.split("[[unused]]").next().unwrap().to_string();
    let p = scratch("partitioned.toml");
    std::fs::write(&p, text).unwrap();
    let o = dlr(&["paths", p.to_str().unwrap(), "--src", "1", "--dst", "2001:db8:4::/48"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().any(|l| l == "best\tunreachable"));
}

#[test]
fn verify_flags_forged_trace() {
    let text = std::fs::read_to_string(scenario("fig2"))
        .unwrap()
        .replace("id = \"b\"\nkind = \"border\"\ndomain = 1\n", "id = \"b\"\nkind = \"border\"\ndomain = 1\nclock_offset_ns = 3000000\n");
    let p = scratch("forged.toml");
    std::fs::write(&p, &text).unwrap();
    let trace = scratch("forged.jsonl");
    assert_eq!(dlr(&["run", p.to_str().unwrap(), "--trace", trace.to_str().unwrap()]).status.code(), Some(0));
    let v = dlr(&["verify", "--scenario", p.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
    assert!(stdout(&v).lines().any(|l| l.starts_with("anomaly\tdlsr\t0\t1\tegress-after-next-ingress")));
}
