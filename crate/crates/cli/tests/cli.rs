use std::process::{Command, Output};

use greencoin::analytics::{distribution, expected_mined_explicit, expected_mined_implicit, Scheme};
use greencoin::nursing::loss_probability_exact;
use greencoin::ProtocolParams;

fn greencoin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greencoin")).args(args).output().unwrap()
}

fn csv(args: &[&str]) -> (Vec<String>, Vec<Vec<String>>) {
    let out = greencoin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn num(field: &str) -> f64 {
    field.parse().unwrap_or_else(|_| panic!("not a number: {field}"))
}

/// Twelve significant digits survive the text roundtrip.
fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-11 * b.abs().max(1e-300)
}

#[test]
fn expected_table_reads_back() {
    let (header, rows) =
        csv(&["expected", "--k", "8", "--N", "2^32", "--n-min", "1", "--n-max", "2^20", "--points-per-decade", "3"]);
    assert_eq!(header, ["n", "expected_explicit", "expected_implicit", "upper_bound", "upper_bound_implicit"]);
    let params = ProtocolParams::new(8, 1 << 32, 256).unwrap();
    assert!(rows.len() >= 18);
    for row in rows {
        let n: u64 = row[0].parse().unwrap();
        assert!(close(num(&row[1]), expected_mined_explicit(&params, n).unwrap()), "{row:?}");
        assert!(close(num(&row[2]), expected_mined_implicit(&params, n).unwrap()), "{row:?}");
        assert!(num(&row[1]) <= num(&row[3]) && num(&row[2]) <= num(&row[4]));
    }
}

#[test]
fn distribution_table_is_a_law() {
    let (_, rows) = csv(&["distribution", "--k", "4", "--N", "256", "--n", "200", "--scheme", "implicit"]);
    let params = ProtocolParams::new(4, 256, 256).unwrap();
    let exact = distribution(&params, 200, Scheme::Implicit).unwrap();
    let total: f64 = rows.iter().map(|r| num(&r[1])).sum();
    assert!((total - 1.0).abs() < 1e-10);
    for (m, row) in rows.iter().enumerate() {
        assert_eq!(row[0], m.to_string());
        assert!((num(&row[1]) - exact.pmf()[m]).abs() <= 1e-12);
        assert!(num(&row[2]) <= num(&row[3]) + 1e-12);
    }
}

#[test]
fn nursing_row_matches_library() {
    let (header, rows) = csv(&["nursing", "--m", "50", "--trials", "2000", "--seed", "1"]);
    assert_eq!(header[0], "x");
    let params = ProtocolParams::new(8, 1 << 32, 256).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(close(num(&rows[0][2]), loss_probability_exact(&params, 50, 100).unwrap()));
    assert!((0.0..=1.0).contains(&num(&rows[0][4])));
}

#[test]
fn simulate_reports_exact_mean_alongside() {
    let (header, rows) = csv(&["simulate", "--k", "2", "--N", "16", "--n", "8", "--trials", "4000", "--seed", "9"]);
    assert_eq!(header, ["n", "trials", "mean", "stderr", "exact_mean", "histogram"]);
    let row = &rows[0];
    assert!((num(&row[2]) - num(&row[4])).abs() <= 4.0 * num(&row[3]));
    let histogram: u64 = row[5].split(';').map(|e| e.split(':').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(histogram, 4000);
}

#[test]
fn network_reports_both_fork_rates() {
    let (header, rows) = csv(&["network", "--k", "4", "--N", "2^16", "--duration", "3600", "--seed", "2"]);
    assert_eq!(header, ["metric", "value"]);
    let metrics: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    for key in ["blocks_accepted", "forks_observed", "fork_rate_per_hour", "forks_per_block", "liveness_violations"] {
        assert!(metrics.contains(&key), "missing {key}");
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("greencoin-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("params.csv");
    let out = greencoin(&["--out", path.to_str().unwrap(), "params", "--k", "2", "--N", "16"]);
    assert!(out.status.success() && out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("level,probability,call_value,call_value_hex\n"));
    assert_eq!(text.lines().count(), 4);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    for args in
        [&["params", "--k", "0"][..], &["params", "--N", "1"], &["params", "--H", "0"], &["expected", "--n", "2^40"]]
    {
        let out = greencoin(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}
