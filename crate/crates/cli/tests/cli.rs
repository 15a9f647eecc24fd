use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bmf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmf"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run bmf")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn summary_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
}

fn section<'a>(text: &'a str, name: &str) -> &'a str {
    let start = text.find(&format!("[{name}]")).expect("section");
    let rest = &text[start..];
    let end = rest.find("\n\n").unwrap_or(rest.len());
    rest[..end].trim_end()
}

#[test]
fn simulate_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["--seed", "4", "simulate", "--m", "100", "--n", "100", "--rank", "5", "--fraction", "0.2"];
    ok(&bmf(&[&["--output-dir", "a"], &args[..]].concat(), d));
    ok(&bmf(&[&["--output-dir", "b"], &args[..]].concat(), d));
    let obs = fs::read_to_string(d.join("a/observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 2001);
    for f in ["observations.csv", "truth.csv", "a_true.csv", "b_true.csv"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }

    ok(&bmf(&["--output-dir", "full", "simulate", "--m", "3", "--n", "4", "--rank", "2"], d));
    let obs = fs::read_to_string(d.join("full/observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 13);

    for bad in ["0", "1.5", "-0.1"] {
        let out = bmf(&["simulate", "--m", "3", "--n", "3", "--rank", "1", "--fraction", bad], d);
        assert_eq!(out.status.code(), Some(1), "fraction {bad}");
    }
}

#[test]
fn sample_then_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&bmf(&["--output-dir", "data", "--seed", "2", "simulate", "--m", "6", "--n", "5", "--rank", "2", "--fraction", "0.7"], d));
    fs::write(
        d.join("smoke.txt"),
        "m = 6\nn = 5\nrank = 2\nchains = 1\niterations = 2\nobs_path = data/observations.csv\n",
    )
    .unwrap();
    ok(&bmf(&["--config", "smoke.txt", "--output-dir", "smoke", "sample"], d));
    let trace = fs::read_to_string(d.join("smoke/trace_chain_0.csv")).unwrap();
    assert_eq!(trace.lines().collect::<Vec<_>>().len(), 3);
    assert!(trace.starts_with("iter,A[0][0]\n1,"));
    let summary = fs::read_to_string(d.join("smoke/summary.txt")).unwrap();
    for s in ["PARTITION", "RANKS", "BROKEN", "RMSE", "TAU_INT", "SEEDS"] {
        assert!(summary.contains(&format!("[{s}]")), "{s}");
    }

    fs::write(
        d.join("cfg.txt"),
        "m = 6\nn = 5\nrank = 2\nmean_mode = uniform\nchains = 2\niterations = 400\nburn_in = 100\n\
         monitors = A[0][0], A[0][1], tau_eta\nobs_path = data/observations.csv\ntruth_path = data/truth.csv\n",
    )
    .unwrap();
    ok(&bmf(&["--config", "cfg.txt", "--output-dir", "run", "sample"], d));
    ok(&bmf(&["--output-dir", "diag", "diagnose", "--input-dir", "run", "--max-lag", "20", "--scatter", "A[0][0],A[0][1]"], d));
    let acf = fs::read_to_string(d.join("diag/acf.csv")).unwrap();
    assert!(acf.starts_with("monitor,chain,lag,rho\nA[0][0],0,0,1\n"));
    assert_eq!(acf.lines().count(), 1 + 3 * 2 * 21);
    let scatter = fs::read_to_string(d.join("diag/scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 1 + 2 * 300);

    // scoring the reconstruction against itself
    ok(&bmf(&["--output-dir", "diag", "diagnose", "--input-dir", "run", "--truth", "run/reconstruction.csv"], d));
    assert_eq!(fs::read_to_string(d.join("diag/rmse.txt")).unwrap(), "rmse: 0\n");

    let out = bmf(&["--output-dir", "diag", "diagnose", "--input-dir", "run", "--scatter", "A[0][0],B[9][9]"], d);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("B[9][9]") && err.contains("A[0][1]"), "{err}");
}

#[test]
fn diagnose_white_noise_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("wn")).unwrap();
    // xorshift noise; the trace file is hand-built so it does not depend on a sampler
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    let mut text = String::from("iter,x\n");
    for i in 1..=20_000 {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        text.push_str(&format!("{i},{}\n", (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5));
    }
    fs::write(d.join("wn/trace_chain_0.csv"), text).unwrap();
    ok(&bmf(&["--output-dir", "wn", "diagnose", "--max-lag", "10"], d));
    let acf = fs::read_to_string(d.join("wn/acf.csv")).unwrap();
    let rho: Vec<f64> = acf.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(rho[0], 1.0);
    assert!(rho[1..].iter().all(|r| r.abs() < 0.03), "{rho:?}");
}

#[test]
fn check_symmetry_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = "m = 5\nn = 4\nrank = 3\n";
    fs::write(d.join("zero.txt"), base).unwrap();
    ok(&bmf(&["--config", "zero.txt", "--output-dir", "zero", "check-symmetry"], d));
    let rep = fs::read_to_string(d.join("zero/symmetry.txt")).unwrap();
    assert_eq!(summary_value(&rep, "broken"), Some("false"));
    assert_eq!(summary_value(&rep, "counterexample_verified"), Some("true"));
    assert_eq!(summary_value(&rep, "w_row_2"), Some("0,0,-1"));

    fs::write(d.join("uni.txt"), format!("{base}mean_mode = uniform\n")).unwrap();
    ok(&bmf(&["--config", "uni.txt", "--output-dir", "uni", "check-symmetry"], d));
    let rep = fs::read_to_string(d.join("uni/symmetry.txt")).unwrap();
    assert_eq!(summary_value(&rep, "broken"), Some("true"));
    assert_eq!(summary_value(&rep, "counterexample"), Some("none"));

    // stacked M_a (5 rows) over M_b (4 rows); columns 0 and 2 coincide
    let rows = [
        "0.1,0.5,0.1", "0.7,0.2,0.7", "0.3,0.9,0.3", "0.8,0.4,0.8", "0.6,0.3,0.6",
        "0.2,0.6,0.2", "0.9,0.1,0.9", "0.4,0.8,0.4", "0.5,0.7,0.5",
    ];
    fs::write(d.join("means.csv"), rows.join("\n") + "\n").unwrap();
    fs::write(d.join("dup.txt"), format!("{base}mean_mode = file\nmean_path = means.csv\n")).unwrap();
    ok(&bmf(&["--config", "dup.txt", "--output-dir", "dup", "check-symmetry"], d));
    let rep = fs::read_to_string(d.join("dup/symmetry.txt")).unwrap();
    assert_eq!(summary_value(&rep, "broken"), Some("false"));
    assert_eq!(summary_value(&rep, "rank_0"), Some("size=3 rank=2"));
    assert_eq!(summary_value(&rep, "counterexample_verified"), Some("true"));
}

#[test]
fn sample_summary_matches_check_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&bmf(&["--output-dir", "data", "simulate", "--m", "7", "--n", "6", "--rank", "3", "--fraction", "0.6"], d));
    for (name, means) in [("z", "zero"), ("u", "uniform")] {
        fs::write(
            d.join(format!("{name}.txt")),
            format!(
                "m = 7\nn = 6\nrank = 3\ntau_a = 1, 2, 1\ntau_b = 2, 1, 2\nmean_mode = {means}\niterations = 20\n\
                 obs_path = data/observations.csv\nseed = 8\n"
            ),
        )
        .unwrap();
        let cfg = format!("{name}.txt");
        ok(&bmf(&["--config", &cfg, "--output-dir", name, "sample"], d));
        ok(&bmf(&["--config", &cfg, "--output-dir", name, "check-symmetry"], d));
        let summary = fs::read_to_string(d.join(name).join("summary.txt")).unwrap();
        let report = fs::read_to_string(d.join(name).join("symmetry.txt")).unwrap();
        for s in ["PARTITION", "RANKS", "BROKEN"] {
            assert_eq!(section(&summary, s), section(&report, s), "{name} {s}");
        }
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(bmf(&["repro", "--example", "3"], d).status.code(), Some(1));
    assert_eq!(bmf(&["repro", "--example", "1", "--scale", "huge"], d).status.code(), Some(1));
    assert_eq!(bmf(&["sample"], d).status.code(), Some(1));
    assert_eq!(bmf(&["frobnicate"], d).status.code(), Some(1));
    fs::write(d.join("bad.txt"), "m = 4\nn = 4\nrank = 2\ncolour = blue\n").unwrap();
    let out = bmf(&["--config", "bad.txt", "check-symmetry"], d);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("colour"), "{err}");
    assert_eq!(bmf(&["--help"], d).status.code(), Some(0));
}

#[test]
fn repro_example_four_writes_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&bmf(&["--output-dir", "ex4", "repro", "--example", "4"], d));
    let cmp = fs::read_to_string(d.join("ex4/comparison.txt")).unwrap();
    assert!(cmp.contains("B[4][6].ratio: "));
    assert!(cmp.contains("tau_eta fixed at 100"));
    let cfg = fs::read_to_string(d.join("ex4/nonzero/config.txt")).unwrap();
    assert!(cfg.contains("mean_lo = -3.5") && cfg.contains("mean_hi = 3.5"));
    assert!(cfg.contains("tau_a = 25, 25"));
    for arm in ["zero", "nonzero"] {
        assert!(d.join("ex4").join(arm).join("trace_chain_3.csv").is_file());
    }
}
