use bvfim::counters::OracleCounters;
use bvfim::io::*;
use bvfim::trace::{Trace, TraceRecord};
use proptest::prelude::*;

fn spec(text: &str) -> RunSpec {
    parse_runspec(&format!("schema_version = 1\n[problem]\nid = toy(a=0)\n{text}")).unwrap()
}

#[test]
fn two_stages_give_two_rows() {
    let s = spec("[run]\nK = 2\nL = 1\nrecord_every = 1\n");
    let run = execute(&s);
    assert!(run.error.is_none());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_trace_csv(&run.trace, &path).unwrap();
    let rows = read_trace_csv(&path).unwrap();
    assert_eq!(rows.len(), 2);
    let expected: Vec<TraceRow> = run.trace.records.iter().map(TraceRow::from).collect();
    assert_eq!(rows, expected);
    assert_eq!(rows[1].step, 2);
    assert_eq!(rows[0].calls_hvp + rows[1].calls_jvp, 0);
}

#[test]
fn identical_specs_give_identical_bytes() {
    let s = spec("[run]\nK = 20\nwall_clock = false\nx0 = 3\ny0 = 3\n");
    let bytes = || {
        let mut buf = Vec::new();
        write_trace_csv_to(&execute(&s).trace, &mut buf).unwrap();
        buf
    };
    let a = bytes();
    assert_eq!(a, bytes());
    assert!(String::from_utf8(a).unwrap().lines().count() == 21);
}

#[test]
fn zero_stages_write_an_empty_trace() {
    let run = execute(&spec("[run]\nK = 0\n"));
    assert!(run.error.is_none());
    assert!(run.trace.records.is_empty());
    let mut buf = Vec::new();
    write_trace_csv_to(&run.trace, &mut buf).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 1);
}

#[test]
fn report_round_trip_and_hash() {
    let s = spec("[run]\nK = 5\n");
    let run = execute(&s);
    let report = RunReport::new(&s, &run);
    assert_eq!(report.second_order_calls, 0);
    assert_eq!(report.spec_hash.len(), 64);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.json");
    write_report_json(&report, &path).unwrap();
    let back: RunReport = read_report_json(&path).unwrap();
    assert_eq!(back, report);
    let text = std::fs::read_to_string(&path).unwrap();
    write_report_json(&back, &path).unwrap();
    assert_eq!(text, std::fs::read_to_string(&path).unwrap());
}

#[test]
fn hash_ignores_formatting_and_output_dir() {
    let a = spec("[run]\nK = 5\n");
    let b = parse_runspec("# comment\nschema_version=1\n[run]\nK=5\noutput_dir = /tmp/x\n[problem]\nid = toy(a=0.0)\n").unwrap();
    assert_eq!(spec_hash(&a), spec_hash(&b));
    assert_ne!(spec_hash(&a), spec_hash(&spec("[run]\nK = 6\n")));
}

#[test]
fn f32_precision_runs() {
    let run = execute(&spec("[run]\nK = 3\nprecision = f32\n"));
    assert!(run.error.is_none());
    assert_eq!(run.trace.records.len(), 3);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_trace_csv(std::path::Path::new("/nonexistent/trace.csv")).unwrap_err();
    assert!(matches!(err, bvfim::Error::Io { .. }));
}

fn record(v: [f64; 6], opt: (bool, bool), n: [u64; 6], k: usize) -> TraceRecord {
    TraceRecord {
        k,
        l: 0,
        step: k + 1,
        x: vec![],
        x_norm: 0.0,
        x_truncated: false,
        upper: v[0],
        lower: v[1],
        f_reg: opt.0.then_some(v[2]),
        grad_norm: v[3],
        dist_x: opt.1.then_some(v[4]),
        dist_y: None,
        dist_ll: None,
        wall_ms: v[5],
        counters: OracleCounters {
            grad_upper_y: n[0],
            grad_lower_y: n[1],
            grad_upper_x: n[2],
            grad_lower_x: n[3],
            hvp: n[4],
            jvp: n[5],
            ..Default::default()
        },
    }
}

proptest! {
    #[test]
    fn csv_is_lossless_for_finite_floats(
        rows in prop::collection::vec(
            (prop::array::uniform6(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO),
             any::<(bool, bool)>(),
             prop::array::uniform6(0u64..1_000_000)),
            0..8)
    ) {
        let trace = Trace {
            records: rows.iter().enumerate().map(|(k, (v, o, n))| record(*v, *o, *n, k)).collect(),
            warnings: vec![],
        };
        let mut buf = Vec::new();
        write_trace_csv_to(&trace, &mut buf).unwrap();
        let back = read_trace_csv_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), trace.records.len());
        for (a, r) in back.iter().zip(&trace.records) {
            let b = TraceRow::from(r);
            prop_assert_eq!(a.upper.to_bits(), b.upper.to_bits());
            prop_assert_eq!(a.lower.to_bits(), b.lower.to_bits());
            prop_assert_eq!(a.f_reg.map(f64::to_bits), b.f_reg.map(f64::to_bits));
            prop_assert_eq!(a.dist_x.map(f64::to_bits), b.dist_x.map(f64::to_bits));
            prop_assert_eq!(a.grad_norm.to_bits(), b.grad_norm.to_bits());
            prop_assert_eq!(a.wall_ms.to_bits(), b.wall_ms.to_bits());
            prop_assert_eq!(a, &b);
        }
    }

    #[test]
    fn json_is_lossless_for_finite_floats(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL) {
        let text = to_sorted_json(&vec![v]).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back[0].to_bits(), v.to_bits());
    }
}
