use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn mpsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpsc")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = mpsc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Compares against `tests/golden/<name>`; set `MPSC_UPDATE_GOLDEN=1` to rewrite.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("MPSC_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

#[test]
fn m_stationarity_line() {
    let out = stdout(&["stationarity", "--kind", "M", fixture("ladder.mpsc").to_str().unwrap()]);
    assert_eq!(out, "M: HOLDS, λ = (0; ; -1; 0)\n");
}

#[test]
fn licq_along_direction() {
    let out = stdout(&["cq", "--name", "licq", "--dir", "0,-1", fixture("ladder.mpsc").to_str().unwrap()]);
    assert!(out.contains("MPSC-LICQ(d): HOLDS"), "{out}");
}

#[test]
fn counterexample_report() {
    let out = stdout(&["analyze", fixture("counterexample.mpsc").to_str().unwrap()]);
    assert!(out.contains("TNLP-CPLD: VIOLATED-ON-SAMPLES"), "{out}");
    assert!(out.contains("piecewise CPLD: HOLDS"), "{out}");
}

#[test]
fn golden_outputs() {
    let ex = fixture("ladder.mpsc");
    let ce = fixture("counterexample.mpsc");
    let (ex, ce) = (ex.to_str().unwrap(), ce.to_str().unwrap());
    golden("ladder_analyze.txt", &stdout(&["analyze", "--dir", "0,-1", "--dir", "1,0", ex]));
    golden("ladder_analyze.records", &stdout(&["analyze", "--dir", "0,-1", "--output", "records", ex]));
    golden("counterexample_analyze.records", &stdout(&["analyze", "--output", "records", ce]));
    golden("ladder_cones.txt", &stdout(&["cones", "--at", "0,0", "--dir", "0,-1", "--dir", "1,0", ex]));
    golden("counterexample_branches.txt", &stdout(&["branches", ce]));
    golden("ladder_errorbound.records", &stdout(&["errorbound", "--dir", "0,-1", "--samples", "2000", "--output", "records", ex]));
}

#[test]
fn records_are_deterministic_across_runs_and_jobs() {
    for f in ["ladder.mpsc", "counterexample.mpsc"] {
        let path = fixture(f);
        let p = path.to_str().unwrap();
        let base = stdout(&["analyze", "--dir", "0,-1", "--output", "records", p]);
        for _ in 0..2 {
            assert_eq!(stdout(&["analyze", "--dir", "0,-1", "--output", "records", p]), base);
        }
        for jobs in ["2", "4", "8"] {
            assert_eq!(stdout(&["analyze", "--dir", "0,-1", "--output", "records", "--jobs", jobs, p]), base, "jobs {jobs}");
        }
    }
}

#[test]
fn record_numbers_round_trip() {
    let out = stdout(&["analyze", "--dir", "0,-1", "--output", "records", fixture("counterexample.mpsc").to_str().unwrap()]);
    let mut checked = 0;
    for line in out.lines() {
        let (k, v) = line.split_once('\t').unwrap_or_else(|| panic!("not a record: {line}"));
        assert!(!k.is_empty() && !k.contains(' '), "{k}");
        for field in v.split([',', ';']) {
            if let Ok(x) = field.parse::<f64>() {
                if field.contains('.') || field.contains('e') {
                    assert_eq!(mpsc_cli::format::num(x), field, "{line}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 20, "only {checked} numbers");
}

#[test]
fn seed_changes_sampled_witness_only() {
    let ce = fixture("counterexample.mpsc");
    let a = stdout(&["cq", "--name", "tnlp-cpld", "--output", "records", ce.to_str().unwrap()]);
    let b = stdout(&["cq", "--name", "tnlp-cpld", "--output", "records", "--seed", "7", ce.to_str().unwrap()]);
    assert!(a.starts_with("cq.TNLP-CPLD\tVIOLATED-ON-SAMPLES\n"));
    assert!(b.starts_with("cq.TNLP-CPLD\tVIOLATED-ON-SAMPLES\n"));
    assert_ne!(a, b);
}

#[test]
fn errors_exit_with_one() {
    let ex = fixture("ladder.mpsc");
    let ex = ex.to_str().unwrap();
    let cases: [&[&str]; 5] = [
        &["analyze", "/nonexistent/file.mpsc"],
        &["analyze", "--point", "0,0,0", ex],
        &["analyze", "--tol-act", "0", ex],
        &["cq", "--name", "nonsense", ex],
        &["stationarity", "--kind", "Q", "--bipartition", "1;1", ex],
    ];
    for args in cases {
        let out = mpsc(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "), "{args:?}");
    }
}

#[test]
fn parse_errors_carry_position() {
    let dir = std::env::temp_dir().join(format!("mpsc-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.mpsc");
    std::fs::write(&bad, "vars: x y\nobjective: x + w\n").unwrap();
    let out = mpsc(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":2:16: unknown variable `w`"), "{err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bipartition_flag_selects_one_branch() {
    let ex = fixture("ladder.mpsc");
    let out = stdout(&["stationarity", "--kind", "Q", "--bipartition", ";1", ex.to_str().unwrap()]);
    assert!(out.starts_with("Q({}, {1}): HOLDS"), "{out}");
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn penalty_weight_override() {
    let ex = fixture("ladder.mpsc");
    let ex = ex.to_str().unwrap();
    let ok = stdout(&["penalty", "--samples", "2000", "--output", "records", ex]);
    assert!(ok.contains("penalty\tHOLDS\n"), "{ok}");
    let bad = stdout(&["penalty", "--samples", "2000", "--weight", "0.5", "--output", "records", ex]);
    let witness = bad.lines().find_map(|l| l.strip_prefix("penalty.witness\t")).expect("witness");
    let w: Vec<f64> = witness.split(',').map(|x| x.parse().unwrap()).collect();
    assert!(w[0] < 0.0 && w[1].abs() < 1e-12, "{witness}");
}
