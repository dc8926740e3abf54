use std::path::PathBuf;

use flocksim_core::scenario::Scenario;
use flocksim_core::sim;
use flocksim_core::trace::{Trace, TraceRow};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn row_bits(r: &TraceRow) -> Vec<u64> {
    let mut bits = vec![r.t.to_bits()];
    for a in &r.agents {
        bits.extend([a.x, a.y, a.theta, a.v, a.w, a.u, a.tau].map(f64::to_bits));
    }
    bits.extend([r.d_min, r.v1, r.v2].map(f64::to_bits));
    bits.extend([r.edges, r.added, r.removed, r.engaged].map(|c| c as u64));
    bits
}

fn first_difference(a: &[TraceRow], b: &[TraceRow]) -> Option<usize> {
    if a.len() != b.len() {
        return Some(a.len().min(b.len()));
    }
    a.iter().zip(b).position(|(x, y)| row_bits(x) != row_bits(y))
}

#[test]
fn three_agent_trace_matches_golden_file() {
    let scenario = Scenario::from_file(&data("golden_n3.toml")).unwrap();
    let trace = sim::run(&scenario).unwrap();
    let golden = data("golden_n3.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, trace.to_csv()).unwrap();
    }
    let text = std::fs::read_to_string(&golden).expect("golden file; regenerate with UPDATE_GOLDEN=1");
    let expected = Trace::parse_csv(&text, 3).unwrap();
    assert_eq!(first_difference(&trace.rows, &expected), None, "trace departs from the golden file");
}

#[test]
fn thread_count_does_not_change_the_trace() {
    let mut s = Scenario::canonical_obstacle(3);
    s.horizon_s = 20.0;
    let one = sim::run(&s).unwrap();
    s.threads = 4;
    let four = sim::run(&s).unwrap();
    assert_eq!(first_difference(&one.rows, &four.rows), None);
    assert_eq!(one.to_csv(), four.to_csv());
}

#[test]
fn repeated_runs_are_identical() {
    let mut s = Scenario::canonical_free_flock(5);
    s.horizon_s = 10.0;
    let a = sim::run(&s).unwrap();
    let b = sim::run(&s).unwrap();
    assert_eq!(first_difference(&a.rows, &b.rows), None);
}
