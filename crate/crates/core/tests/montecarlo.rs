use num_complex::Complex64;
use pprzf::montecarlo::{ergodic_rates_mc, ergodic_sum_rate_mc_with, InterferenceEstimate};
use pprzf::{
    build_precoder, ergodic_sum_rate_mc, estimate_expectations, sample_channels, Binding,
    Constraint, ExpectationEstimate, NuMode, PrecoderParams, RngSpec, Scenario,
};

fn p(alpha: f64, beta: f64) -> PrecoderParams {
    PrecoderParams::new(alpha, beta).unwrap()
}

/// With the normalization estimated on the very draws it is averaged over,
/// both averaged constraints hold and the binding one is tight.
#[test]
fn averaged_constraints_hold_on_the_estimation_draws() {
    let n_trials = 400;
    for (p_db, case) in [(0.0, false), (-10.0, false), (-10.0, true)] {
        let mut scenario = Scenario::uniform(12, 6, 4, 1.0, 0.6, p_db);
        if case {
            scenario = scenario.with_case(pprzf::ConstraintCase::Sum);
        }
        let cfg = scenario.at_snr(10.0);
        let params = p(0.2, 0.4);
        let rng = RngSpec::new(77);
        let est = estimate_expectations(&cfg, &params, n_trials, rng).unwrap();
        let mut tx = 0.0;
        let mut pu = vec![0.0; cfg.n_pus];
        let mut binding = None;
        for t in 0..n_trials {
            let real = sample_channels(&cfg, rng.trial(t as u64)).unwrap();
            let out = build_precoder(&real, &params, &cfg, &est).unwrap();
            binding = Some(out.binding);
            let g = &out.g_unnormalized * Complex64::new(out.xi2.sqrt(), 0.0);
            tx += (&g * g.adjoint()).trace().re / cfg.n_antennas as f64;
            let leak = &real.f * &g;
            for (l, acc) in pu.iter_mut().enumerate() {
                *acc += leak.row(l).norm_squared();
            }
        }
        let n = n_trials as f64;
        let tx = tx / n;
        let pu: Vec<f64> = pu.iter().map(|v| v / n).collect();
        let tol = 1e-10;
        assert!(tx <= cfg.p_t * (1.0 + tol), "transmit {tx} > {}", cfg.p_t);
        match &cfg.constraint {
            Constraint::PerPu { thetas } => {
                for (q, th) in pu.iter().zip(thetas) {
                    assert!(*q <= th * cfg.p_t * (1.0 + tol));
                }
                match binding.unwrap() {
                    Binding::Transmit => assert!((tx / cfg.p_t - 1.0).abs() < tol),
                    Binding::Pu(l) => assert!((pu[l] / (thetas[l] * cfg.p_t) - 1.0).abs() < tol),
                    Binding::SumInterference => unreachable!(),
                }
            }
            Constraint::SumPower { theta_all } => {
                let total: f64 = pu.iter().sum();
                assert!(total <= theta_all * cfg.p_t * (1.0 + tol));
                if binding.unwrap() == Binding::SumInterference {
                    assert!((total / (theta_all * cfg.p_t) - 1.0).abs() < tol);
                }
            }
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(10.0);
    let params = p(0.1, 0.7);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                ergodic_sum_rate_mc_with(
                    &cfg,
                    &params,
                    300,
                    RngSpec::new(5),
                    NuMode::Mc { batch: 200 },
                )
                .unwrap()
            })
    };
    let one = run(1);
    for threads in [2, 3, 8] {
        let other = run(threads);
        assert_eq!(one.mean.to_bits(), other.mean.to_bits());
        assert_eq!(one.std_err.to_bits(), other.std_err.to_bits());
    }
}

#[test]
fn std_err_halves_when_trials_quadruple() {
    let cfg = Scenario::uniform(8, 4, 3, 1.0, 0.6, 0.0).at_snr(10.0);
    let params = p(0.2, 0.5);
    let small = ergodic_sum_rate_mc(&cfg, &params, 1000, RngSpec::new(21)).unwrap();
    let large = ergodic_sum_rate_mc(&cfg, &params, 4000, RngSpec::new(22)).unwrap();
    let ratio = small.std_err / large.std_err;
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn statistically_identical_users_get_equal_rates() {
    let cfg = Scenario::uniform(12, 6, 4, 1.0, 0.6, 0.0).at_snr(10.0);
    let rates = ergodic_rates_mc(&cfg, &p(0.15, 0.5), 3000, RngSpec::new(3), NuMode::De).unwrap();
    let mean = rates.iter().map(|r| r.mean).sum::<f64>() / rates.len() as f64;
    for r in &rates {
        // Users share draws, so the spread of their means is at most that of
        // independent estimates.
        assert!(
            (r.mean - mean).abs() < 4.0 * r.std_err,
            "{} vs {mean} (se {})",
            r.mean,
            r.std_err
        );
    }
}

#[test]
fn sum_rate_vanishes_at_vanishing_snr() {
    let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(-60.0);
    assert!((cfg.rho() - 1e-6).abs() < 1e-18);
    let est = ergodic_sum_rate_mc(&cfg, &p(1.0, 0.0), 200, RngSpec::new(1)).unwrap();
    assert!(est.mean < 0.05 && est.mean >= 0.0);
}

#[test]
fn pu_quadratic_matches_its_deterministic_equivalent() {
    let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(10.0);
    let params = p(0.1, 0.0);
    let mc = estimate_expectations(&cfg, &params, 10_000, RngSpec::new(52)).unwrap();
    let de = ExpectationEstimate::deterministic(&cfg, &params).unwrap();
    let (InterferenceEstimate::PerPu(q_mc), InterferenceEstimate::PerPu(q_de)) =
        (&mc.interference, &de.interference)
    else {
        panic!("per-PU constraint expected");
    };
    for (a, b) in q_mc.iter().zip(q_de) {
        assert!((a - b).abs() / b < 0.05, "MC {a} vs DE {b}");
    }
    assert!((mc.transmit_trace - de.transmit_trace).abs() / de.transmit_trace < 0.05);
}

#[test]
fn full_projection_estimates_zero_interference() {
    let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(10.0);
    let mc = estimate_expectations(&cfg, &p(0.1, 1.0), 50, RngSpec::new(9)).unwrap();
    let InterferenceEstimate::PerPu(q) = &mc.interference else {
        panic!("per-PU constraint expected");
    };
    assert!(q.iter().all(|v| v.abs() < 1e-10));
}
