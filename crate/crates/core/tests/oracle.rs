use pprzf::oracle::{
    appendix_b_quadratic_checks, lemma4_check, lemma5_check, test_matrices, theorem2_check,
};
use pprzf::{zeta_closed_form, CMat, PrecoderParams, RngSpec, Scenario};

fn p(alpha: f64, beta: f64) -> PrecoderParams {
    PrecoderParams::new(alpha, beta).unwrap()
}

#[test]
fn square_projection_is_exact() {
    // With as many rows as columns the projected matrix is unitary.
    let n = 24;
    for (name, q) in test_matrices(n, RngSpec::new(2)) {
        let probe = lemma5_check(&q, 0.7, 1.0, n, 3, RngSpec::new(3)).unwrap();
        assert!(probe.rel_error < 1e-10, "{name}: {probe:?}");
        let tr = q.trace().re / n as f64;
        assert!((probe.de_value - tr / 1.7).abs() < 1e-12);
    }
}

#[test]
fn projector_trace_is_exact_per_draw() {
    let n = 40;
    let probe = lemma5_check(&CMat::identity(n, n), 0.3, 0.25, n, 5, RngSpec::new(1)).unwrap();
    assert!(probe.rel_error < 1e-12);
}

#[test]
fn two_sided_identity_with_unit_covariances_is_zeta() {
    let (n, k) = (32, 16);
    let probe = lemma4_check(
        &CMat::identity(n, n),
        &CMat::identity(k, k),
        &CMat::identity(n, n),
        0.5,
        20,
        RngSpec::new(6),
    )
    .unwrap();
    let z = zeta_closed_form(1.0, 0.5, 0.5).unwrap().zeta;
    assert!((probe.de_value - z).abs() < 1e-10 * z);
    assert!(probe.rel_error < 0.03);
}

#[test]
fn quadratic_form_bias_shrinks_with_n() {
    let errors: Vec<Vec<f64>> = [32, 128]
        .iter()
        .map(|&n| {
            let cfg = Scenario::uniform(n, n / 2, 3 * n / 8, 1.0, 0.6, 0.0).at_snr(10.0);
            appendix_b_quadratic_checks(&cfg, &p(0.2, 0.5), 4000 / n, RngSpec::new(n as u64))
                .unwrap()
                .iter()
                .map(|probe| probe.rel_error)
                .collect()
        })
        .collect();
    // The leave-one-out forms carry an O(1/N) bias well above sampling noise.
    for (i, (small, large)) in errors[0].iter().zip(&errors[1]).take(6).enumerate() {
        assert!(large < small, "probe {i}: {small} -> {large}");
    }
}

#[test]
fn trace_probe_is_reproducible() {
    let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(10.0);
    let q = test_matrices(16, RngSpec::new(1)).remove(1).1;
    let a = theorem2_check(&cfg, &p(0.3, 0.4), &q, 10, RngSpec::new(8)).unwrap();
    let b = theorem2_check(&cfg, &p(0.3, 0.4), &q, 10, RngSpec::new(8)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.q.as_ref(), Some(&q));
}
