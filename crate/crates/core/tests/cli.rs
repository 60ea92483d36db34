use carl_core::cli::{run, Outcome};

fn carl(args: &str) -> Outcome {
    run(std::iter::once("carl").chain(args.split_whitespace()))
}

fn data_rows(out: &str) -> Vec<Vec<String>> {
    out.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(out: &str, name: &str) -> Vec<Option<f64>> {
    let header: Vec<&str> = out.lines().find(|l| !l.starts_with('#')).unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    data_rows(out).iter().map(|r| r[idx].parse().ok()).collect()
}

#[test]
fn classify_reports_regimes() {
    let cases = [
        ("--delta 1 --chi 1", "regime: ii\n"),
        ("--delta -1 --chi 1", "regime: iii\n"),
        ("--delta 0 --chi 1", "regime: iv (threshold delta=0)\n"),
        ("--delta 2 --chi 0", "regime: i\n"),
    ];
    for (args, want) in cases {
        let out = carl(&format!("classify {args}"));
        assert_eq!(out.code, 0, "{}", out.stderr);
        assert!(out.stdout.contains(want), "{args}: {}", out.stdout);
    }
}

#[test]
fn usage_errors_exit_two() {
    for args in ["classify --delta 1 --chi -1", "classify --delta nan --chi 1", "classify --chi 1", "bogus", "evolve --preset fig3b"] {
        let out = carl(args);
        assert_eq!(out.code, 2, "{args}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(carl("sweep --preset fig1 --phi-max 7").code, 2);
    assert_eq!(carl("threshold --delta-c 1 --chi 1").code, 2);
    assert_eq!(carl("--jobs 0 classify --delta 1 --chi 1").code, 2);
    assert_eq!(carl("--help").code, 0);
}

#[test]
fn json_carries_schema_version() {
    for args in [
        "classify --delta 1 --chi 1",
        "evolve --delta 1 --chi 1 --times 0.5,1",
        "sweep --delta 1 --chi 1 --alpha2-min 0 --alpha2-max 1 --alpha2-count 2 --phi-min 0 --phi-max 1 --phi-count 1 --t 1",
        "threshold --delta-c 0 --chi 1",
        "oracle-compare --delta 1 --chi 1 --times 0.5",
    ] {
        let out = carl(&format!("--json {args}"));
        assert_eq!(out.code, 0, "{args}: {}", out.stderr);
        let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["schema_version"], 1, "{args}");
    }
    let v: serde_json::Value = serde_json::from_str(&carl("--json classify --delta -1 --chi 1").stdout).unwrap();
    assert_eq!(v["regime"], "iii");
}

#[test]
fn evolve_is_deterministic_and_marks_undefined() {
    let args = "evolve --delta 1 --chi 1 --alpha2 0 --t-start 0 --t-end 2 --steps 5";
    let a = carl(args);
    assert_eq!(a, carl(args));
    assert!(a.stdout.lines().any(|l| l == "t,n1,n3,g11,g33,g13,classical_bound,quantum_bound"));
    // t=0 vacuum: every correlator is 0/0
    let first = &data_rows(&a.stdout)[0];
    assert_eq!(first[3..].iter().filter(|f| f.is_empty()).count(), 5);
    let t: Vec<_> = column(&a.stdout, "t").into_iter().flatten().collect();
    assert_eq!(t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    let mantissa = data_rows(&a.stdout)[1][1].split('e').next().unwrap().to_string();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn evolve_overflow_truncates_with_footer() {
    let out = carl("evolve --delta 1 --chi 1 --times 10,500,600");
    assert_eq!(out.code, 3);
    assert_eq!(data_rows(&out.stdout).len(), 1);
    assert!(out.stdout.trim_end().ends_with("# overflow at t=5.0000000000000000e2"));
}

#[test]
fn fig3a_violates_classical_bound_early() {
    let out = carl("evolve --preset fig3a");
    assert_eq!(out.code, 0);
    let g13 = column(&out.stdout, "g13");
    let cb = column(&out.stdout, "classical_bound");
    assert_eq!(g13.len(), 120);
    assert!(g13[0].unwrap() > cb[0].unwrap());
}

#[test]
fn phase_can_remove_the_violation() {
    let clean = (0..64).any(|k| {
        let phi = std::f64::consts::TAU * k as f64 / 64.0;
        let out = carl(&format!("evolve --preset fig3c --phi {phi}"));
        let g13 = column(&out.stdout, "g13");
        let cb = column(&out.stdout, "classical_bound");
        g13.iter().zip(&cb).all(|(g, c)| g.unwrap() <= c.unwrap())
    });
    assert!(clean);
}

#[test]
fn regime_iii_stays_bounded() {
    let out = carl("evolve --delta -1 --chi 1 --t-start 30 --t-end 40 --steps 101");
    assert_eq!(out.code, 0);
    let g13: Vec<f64> = column(&out.stdout, "g13").into_iter().flatten().collect();
    let cb: Vec<f64> = column(&out.stdout, "classical_bound").into_iter().flatten().collect();
    assert!(g13.iter().zip(&cb).all(|(g, c)| g < c));
    let (lo, hi) = g13.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
    assert!(hi - lo < 1e-6 && lo > 1.0);
}

#[test]
fn single_cell_sweep_matches_evolve() {
    let sweep = carl("sweep --delta 1 --chi 0.5 --alpha2-min 3 --alpha2-max 3 --alpha2-count 1 --phi-min 0.7 --phi-max 0.7 --phi-count 1 --t 1.25");
    let evolve = carl("evolve --delta 1 --chi 0.5 --alpha2 3 --phi 0.7 --times 1.25");
    let s = &data_rows(&sweep.stdout)[0];
    let e = &data_rows(&evolve.stdout)[0];
    assert_eq!(data_rows(&sweep.stdout).len(), 1);
    assert_eq!(&s[2..], &e[..]);
}

#[test]
fn worker_count_does_not_change_output() {
    let base = "sweep --preset fig2 --alpha2-count 4 --phi-count 5";
    let one = carl(&format!("--jobs 1 {base}"));
    let many = carl(&format!("--jobs 4 {base}"));
    assert_eq!(one.code, 0);
    assert_eq!(one.stdout, many.stdout);
    // row-major: alpha2 outermost
    let a: Vec<f64> = column(&one.stdout, "alpha2").into_iter().flatten().collect();
    assert!(a.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(a.len(), 20);
}

#[test]
fn fig2_surfaces_differ() {
    let out = carl("sweep --preset fig2 --alpha2-count 5 --phi-count 8");
    let g11 = column(&out.stdout, "g11");
    let g33 = column(&out.stdout, "g33");
    let max_diff = g11.iter().zip(&g33).map(|(a, b)| (a.unwrap() - b.unwrap()).abs()).fold(0.0, f64::max);
    assert!(max_diff > 1e-3, "{max_diff}");
}

#[test]
fn fig1_long_time_surface_spans_coherent_to_superchaotic() {
    let out = carl("sweep --preset fig1 --alpha2-max 40 --alpha2-count 5 --phi-count 16");
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(!out.stdout.contains("# failed"), "{}", out.stdout);
    let g11: Vec<f64> = column(&out.stdout, "g11").into_iter().flatten().collect();
    let g33: Vec<f64> = column(&out.stdout, "g33").into_iter().flatten().collect();
    assert_eq!(g11.len(), 80);
    let (lo, hi) = g11.iter().chain(&g33).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
    assert!(lo >= 1.0 - 1e-9 && hi <= 3.0 + 1e-6, "[{lo}, {hi}]");
    assert!(lo < 1.5 && hi > 2.9, "[{lo}, {hi}]");
}

#[test]
fn sweep_cell_failures_leave_empty_fields() {
    // the stable regime has no long-time limit
    let out = carl("sweep --delta 2 --chi 0 --alpha2-min 1 --alpha2-max 1 --alpha2-count 1 --phi-min 0 --phi-max 0 --phi-count 1 --long-time");
    assert_eq!(out.code, 0);
    assert_eq!(data_rows(&out.stdout)[0][2..], ["", "", ""]);
    assert!(out.stdout.contains("# failed"));
}

#[test]
fn threshold_examples() {
    let value = |args: &str| column(&carl(&format!("threshold {args}")).stdout, "g2")[0].unwrap();
    assert_eq!(value("--delta-c 0 --chi 1"), 3.0);
    assert!((value("--delta-c 0 --chi 1 --alpha2 100 --phi 0") - 1.0).abs() < 0.02);
    let g = value("--delta-c 4 --chi 1 --alpha2 4 --phi 0.7853981633974483");
    assert!((1.0..=3.0).contains(&g));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = std::env::temp_dir().join(format!("carl-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.cfg");
    std::fs::write(&path, "# test\ndelta = -1\nchi=1\n").unwrap();
    let cfg = path.display();
    assert!(carl(&format!("--config {cfg} classify")).stdout.contains("regime: iii"));
    assert!(carl(&format!("--config {cfg} classify --delta 1")).stdout.contains("regime: ii\n"));
    std::fs::write(&path, "delta=1\nchi=1\nunknown=3\n").unwrap();
    assert_eq!(carl(&format!("--config {cfg} classify")).code, 2);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn oracle_compare_examples() {
    let pass = carl("oracle-compare --delta 1 --chi 1 --alpha2 0 --times 0.5,1 --g2-tol 1e-4");
    assert_eq!(pass.code, 0, "{}", pass.stdout);
    assert!(pass.stdout.contains("# result: PASS"));

    let exact = carl("oracle-compare --delta 1 --chi 0 --alpha2 4 --times 2 --occ-tol 1e-10 --g2-tol 1e-10");
    assert_eq!(exact.code, 0, "{}", exact.stdout);

    let forced = carl("oracle-compare --delta 1 --chi 1 --alpha2 25 --times 0.1,2 --dim-cap 4096");
    assert_eq!(forced.code, 1);
    assert!(forced.stdout.contains("truncation inadequate"));
    // the early time is still compared
    assert!(forced.stdout.lines().any(|l| l.starts_with("1.0000000000000001e-1,n1,")));
}
