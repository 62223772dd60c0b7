//! Runs a shipped scenario and prints its trace steps, outcomes and report.

use dlr_core::{scenarios, sim};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "fig2".into());
    let (_, text) = scenarios::all()
        .into_iter()
        .find(|(n, _)| *n == name)
        .expect("unknown scenario");
    let s = sim::load(text).expect("scenario builds");
    let log = s.run(None);
    for st in &log.steps {
        println!(
            "{:>8} {}#{} {:<4} {:?} {:?} {} -> {} dl={:?}->{:?} {:?} {:?}",
            st.time, st.flow, st.seq, st.node, st.role, st.action, st.destination_before,
            st.destination_after, st.domains_left_before, st.domains_left_after, st.drop_reason, st.notes
        );
    }
    for o in &log.outcomes {
        println!("{} {} {:?} {:?} {:?} budget={:?}", o.flow, o.seq, o.status, o.drop_reason, o.domains, o.deadline_budget_us);
    }
    print!("{}", s.report(&log).0);
    for m in s.check_expectations(&log) {
        println!("MISS {m}");
    }
}
