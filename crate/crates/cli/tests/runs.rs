use std::path::Path;
use std::process::{Command, Output};

use pprzf::detequiv::de_sum_rate;
use pprzf::montecarlo::ergodic_sum_rate_mc_with;
use pprzf::optimize::optimize_joint;
use pprzf::{PrecoderParams, RngSpec, Scenario};
use pprzf_cli::config::{ExperimentSpec, Mode};
use pprzf_cli::run::{run, CsvSink, RunError, Units, FAILURE_MARKER, HEADER};

fn pprzf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pprzf"))
        .args(args)
        .env_remove("PPRZF_THREADS")
        .output()
        .unwrap()
}

fn body(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    lines.map(|l| format!("{l}\n")).collect()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    body(path)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn empty_snr_grid_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("x.cfg");
    std::fs::write(&cfg, "network.n = 10\nsweep.snr_db = []\n").unwrap();
    let out = pprzf(&["de-sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.snr_db"));

    std::fs::write(&cfg, "network.n == ten\n").unwrap();
    let out = pprzf(&["de-sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(
        pprzf(&["optimize", "--objective", "sideways"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn de_sweep_matches_library_and_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = pprzf(&["de-sweep", "--snr=-10,0,10,20", "-o", p.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(body(&a), body(&b));
    assert!(body(&a).starts_with(HEADER));
    let rows = rows(&a);
    assert_eq!(rows.len(), 4);
    for (row, snr) in rows.iter().zip([-10.0, 0.0, 10.0, 20.0]) {
        let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(snr);
        let opt = optimize_joint(&cfg).unwrap();
        assert_eq!(num(&row[0]), snr);
        assert_eq!(num(&row[1]), opt.alpha_opt);
        assert_eq!(num(&row[2]), opt.beta_opt);
        assert_eq!(num(&row[3]), opt.objective);
        assert!(row[4].is_empty() && row[5].is_empty());
        assert_eq!(row[6], "transmit");
    }
}

#[test]
fn mc_sweep_is_thread_independent_and_bits_rescale() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    let many = dir.path().join("many.csv");
    let bits = dir.path().join("bits.csv");
    let args = [
        "mc-sweep", "--snr", "10", "--trials", "300", "--seed", "9", "-o",
    ];
    let run_with = |path: &Path, extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_pprzf"));
        cmd.args(args).arg(path).args(extra);
        match env {
            Some(v) => cmd.env("PPRZF_THREADS", v),
            None => cmd.env_remove("PPRZF_THREADS"),
        };
        assert!(cmd.output().unwrap().status.success());
    };
    run_with(&one, &["--threads", "1"], Some("3"));
    run_with(&many, &[], Some("3"));
    run_with(&bits, &["--bits"], None);
    assert_eq!(body(&one), body(&many));

    let nats = &rows(&one)[0];
    let bits = &rows(&bits)[0];
    for c in [3, 4, 5] {
        let ratio = num(&nats[c]) / num(&bits[c]);
        assert!(
            (ratio - std::f64::consts::LN_2).abs() < 1e-12,
            "column {c}: {ratio}"
        );
    }
    for c in [0, 1, 2, 7, 8, 9, 10] {
        assert_eq!(nats[c], bits[c]);
    }
}

#[test]
fn grid_sweep_emits_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.cfg");
    let out = dir.path().join("grid.csv");
    std::fs::write(
        &cfg,
        format!(
            "network.n = 10\nconstraint.kind = sum\nsweep.snr_db = [0, 10]\nsweep.alpha = [0.01, 0.1, 1]\n\
             sweep.beta = [0, 0.5]\nrun.mode = de_sweep\nrun.output = {}\n",
            out.display()
        ),
    )
    .unwrap();
    assert!(pprzf(&["run", "--config", cfg.to_str().unwrap()])
        .status
        .success());
    let rows = rows(&out);
    assert_eq!(rows.len(), 2 * 3 * 2);
    let spec = pprzf_cli::config::parse(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    for row in rows {
        let cfg = spec.scenario.at_snr(num(&row[0]));
        let de = de_sum_rate(
            &cfg,
            &PrecoderParams::new(num(&row[1]), num(&row[2])).unwrap(),
        )
        .unwrap();
        assert_eq!(num(&row[3]), de);
        assert!(["transmit", "sum_interference"].contains(&row[6].as_str()));
    }
}

#[test]
fn numerical_failure_flushes_a_marker_row() {
    // Bypasses validation: more primary users than antennas cannot be sampled.
    let mut spec = ExperimentSpec {
        scenario: Scenario::uniform(4, 2, 6, 1.0, 0.6, 0.0),
        snr_grid_db: vec![0.0, 10.0],
        beta_grid: Some(vec![0.0]),
        alpha_grid: Some(vec![0.1]),
        mode: Mode::DeSweep,
        ..ExperimentSpec::default()
    };
    let mut sink = CsvSink::new(Vec::new(), Units::Nats).unwrap();
    let err = run(&spec, &mut sink).unwrap_err();
    assert!(matches!(err, RunError::Numerical { snr_db, .. } if snr_db == 0.0));
    let text = String::from_utf8(sink.into_inner()).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("0,0.1,0,NaN"));
    assert!(last.contains(FAILURE_MARKER));

    // A good run before the failing SNR keeps its rows.
    spec.scenario = Scenario::uniform(8, 4, 4, 1.0, 0.6, 0.0);
    spec.snr_grid_db = vec![0.0, 10.0];
    let mut sink = CsvSink::new(Vec::new(), Units::Nats).unwrap();
    run(&spec, &mut sink).unwrap();
    assert_eq!(
        String::from_utf8(sink.into_inner())
            .unwrap()
            .lines()
            .count(),
        4
    );
}

#[test]
fn validate_exit_codes() {
    let out = pprzf(&["validate", "--suite", "specialcases"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("0 failed") && !text.contains("FAIL "));

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("checks.csv");
    let out = pprzf(&[
        "validate",
        "--suite",
        "rmt",
        "--n",
        "16",
        "--trials",
        "3",
        "--tolerance",
        "1e-9",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL rmt"));
    let checks = std::fs::read_to_string(csv).unwrap();
    assert!(checks.starts_with("suite,name,"));
    assert!(checks.contains(",false"));
}

#[test]
fn optimize_with_mc_objective_reports_the_grid_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("opt.cfg");
    let out = dir.path().join("opt.csv");
    std::fs::write(
        &cfg,
        "network.n = 8\nnetwork.k = 4\nnetwork.l = 2\nsweep.snr_db = [10]\n\
         sweep.alpha = [0.01, 0.1, 1]\nsweep.beta = [0, 1]\n",
    )
    .unwrap();
    let args = [
        "optimize",
        "--objective",
        "mc",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "200",
        "-o",
        out.to_str().unwrap(),
    ];
    assert!(pprzf(&args).status.success());
    let row = &rows(&out)[0];
    assert!([0.01, 0.1, 1.0].contains(&num(&row[1])));
    assert!([0.0, 1.0].contains(&num(&row[2])));
    assert!(num(&row[5]) > 0.0);
    // The reported objective is the Monte-Carlo mean on the first SNR's stream.
    let spec = pprzf_cli::config::parse(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    let config = spec.scenario.at_snr(10.0);
    let params = PrecoderParams::new(num(&row[1]), num(&row[2])).unwrap();
    let mc = ergodic_sum_rate_mc_with(
        &config,
        &params,
        200,
        RngSpec::new(spec.seed).derive(0),
        spec.nu,
    )
    .unwrap();
    assert_eq!(num(&row[4]), mc.mean);
}

#[test]
fn figure_two_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = pprzf(&[
        "repro",
        "--figure",
        "2",
        "--trials",
        "400",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["n10_p-10", "n10_p0", "n16_p-10", "n16_p0"] {
        let rows = rows(&dir.path().join(format!("{name}.csv")));
        assert_eq!(rows.len(), 9, "{name}");
        for row in &rows {
            let (de, mc) = (num(&row[3]), num(&row[4]));
            // Finite-size effects at N = 10 and 16 keep the two within a few
            // percent; the tolerance here only guards the plumbing.
            assert!((mc - de).abs() / de < 0.10, "{name}: {row:?}");
        }
    }
    // Saturation of the small array at P = -10 dB.
    let small = rows(&dir.path().join("n10_p-10.csv"));
    let (r20, r30) = (num(&small[6][3]), num(&small[8][3]));
    assert!((r30 - r20).abs() / r20 < 0.05);
}
