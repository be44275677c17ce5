//! Monte-Carlo probes of the random-matrix identities behind the
//! deterministic equivalents.
//!
//! Each probe averages a random trace or quadratic form over independent
//! draws and compares it with its deterministic limit.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{gaussian_rows, partially_project, sample_channels, NetworkConfig, RngSpec};
use crate::detequiv::{de_sinr, solve_fixed_point, FixedPointState};
use crate::error::{invalid, Error, Result};
use crate::linalg::{
    hermitian_eigenvalues, hermitian_inverse, hermitian_solve, hermitian_sqrt, is_hermitian,
    regularized_gram, spectral_norm_hermitian, trace_of_product, CMat, CVec, RankOneDowndate,
};
use crate::precoder::PrecoderParams;

/// Largest spectral norm accepted for a test matrix `Q`.
pub const DEFAULT_Q_NORM_CAP: f64 = 16.0;

/// One Monte-Carlo average next to its deterministic limit.
#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesProbe {
    pub name: String,
    /// The test matrix, for trace probes.
    pub q: Option<CMat>,
    pub alpha_or_omega: f64,
    pub n_trials: usize,
    pub mc_value: f64,
    pub de_value: f64,
    /// `|mc - de| / max(|de|, 1e-12)`.
    pub rel_error: f64,
}

impl StieltjesProbe {
    fn new(
        name: &str,
        q: Option<CMat>,
        x: f64,
        n_trials: usize,
        mc_value: f64,
        de_value: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            q,
            alpha_or_omega: x,
            n_trials,
            mc_value,
            de_value,
            rel_error: (mc_value - de_value).abs() / de_value.abs().max(1e-12),
        }
    }
}

fn check_trials(n_trials: usize) -> Result<()> {
    if n_trials == 0 {
        return Err(invalid("n_trials", "must be positive"));
    }
    Ok(())
}

fn check_q(q: &CMat, n: usize) -> Result<()> {
    if q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Q is {:?}, expected {n}x{n}",
            q.shape()
        )));
    }
    if !is_hermitian(q, 1e-12) {
        return Err(invalid("q", "must be Hermitian"));
    }
    let norm = spectral_norm_hermitian(q);
    // Rounding in the norm computation must not reject a matrix built at the cap.
    if norm > DEFAULT_Q_NORM_CAP * (1.0 + 1e-9) {
        return Err(invalid(
            "q",
            format!("spectral norm {norm} exceeds the cap {DEFAULT_Q_NORM_CAP}"),
        ));
    }
    Ok(())
}

fn normalized_trace(q: &CMat) -> f64 {
    q.trace().re / q.nrows() as f64
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `l` orthonormal rows of an `n x n` Haar unitary: orthonormalize a complex
/// Gaussian matrix and fix the phases so that `R` has a positive diagonal.
pub fn haar_rows(n: usize, l: usize, rng: RngSpec) -> Result<CMat> {
    if l == 0 || l > n {
        return Err(invalid("l", format!("need 1 <= l <= n, got l={l} n={n}")));
    }
    let g = gaussian_rows(&mut rng.rng(), &vec![n as f64; l], n);
    let qr = g.adjoint().qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..l {
        let d = r[(j, j)];
        if d.norm() < 1e-12 {
            return Err(Error::Singular("Gaussian draw is rank deficient".into()));
        }
        let phase = d / d.norm();
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    Ok(q.adjoint())
}

/// The test matrices used across probes: identity, a random diagonal with
/// entries in `[0, 2]` and a rank-one spike at the norm cap.
pub fn test_matrices(n: usize, rng: RngSpec) -> Vec<(&'static str, CMat)> {
    let mut gen = rng.rng();
    let diag = CMat::from_diagonal(&CVec::from_fn(n, |_, _| {
        Complex64::new(gen.random_range(0.0..2.0), 0.0)
    }));
    let u = gaussian_rows(&mut gen, &[1.0], n).adjoint();
    let u = &u / Complex64::new(u.norm(), 0.0);
    let spike = &u * u.adjoint() * Complex64::new(DEFAULT_Q_NORM_CAP, 0.0);
    vec![
        ("identity", CMat::identity(n, n)),
        ("diagonal", diag),
        ("spike", spike),
    ]
}

/// `(1/N) tr Q (H^_^H H^_ + alpha I)^{-1}` against `(t1 + t2)/alpha (1/N) tr Q`.
pub fn theorem2_check(
    config: &NetworkConfig,
    params: &PrecoderParams,
    q: &CMat,
    n_trials: usize,
    rng: RngSpec,
) -> Result<StieltjesProbe> {
    check_trials(n_trials)?;
    config.validate()?;
    params.validate()?;
    let n = config.n_antennas;
    check_q(q, n)?;
    let samples: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let real = sample_channels(config, rng.trial(t as u64))?;
            let hc = partially_project(&real, params.beta)?;
            let solved = hermitian_solve(&regularized_gram(&hc, params.alpha), q)?;
            Ok(solved.trace().re / n as f64)
        })
        .collect::<Result<_>>()?;
    let st = solve_fixed_point(config, params)?;
    let de = (st.t1 + st.t2) / params.alpha * normalized_trace(q);
    Ok(StieltjesProbe::new(
        "theorem2",
        Some(q.clone()),
        params.alpha,
        n_trials,
        mean(&samples),
        de,
    ))
}

/// `(1/N) tr Q (W^H W + omega I)^{-1}` for Haar rows `W` against
/// `(c2/(omega+1) + (1-c2)/omega) (1/N) tr Q`, with `c2 = round(c2 n)/n`.
pub fn lemma5_check(
    q: &CMat,
    omega: f64,
    c2: f64,
    n: usize,
    n_trials: usize,
    rng: RngSpec,
) -> Result<StieltjesProbe> {
    check_trials(n_trials)?;
    if !(omega > 0.0) {
        return Err(invalid("omega", format!("must be positive, got {omega}")));
    }
    if !(c2 > 0.0 && c2 <= 1.0) {
        return Err(invalid("c2", format!("must lie in (0, 1], got {c2}")));
    }
    check_q(q, n)?;
    let l = ((c2 * n as f64).round() as usize).max(1);
    let samples: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let w = haar_rows(n, l, rng.trial(t as u64))?;
            let solved = hermitian_solve(&regularized_gram(&w, omega), q)?;
            Ok(solved.trace().re / n as f64)
        })
        .collect::<Result<_>>()?;
    let c2 = l as f64 / n as f64;
    let delta = c2 / (omega + 1.0) + (1.0 - c2) / omega;
    Ok(StieltjesProbe::new(
        "lemma5",
        Some(q.clone()),
        omega,
        n_trials,
        mean(&samples),
        delta * normalized_trace(q),
    ))
}

/// Coupled fixed point `e = (1/N) tr R (omega I + e~ R)^{-1}`,
/// `e~ = (1/N) tr T (I + e T)^{-1}`, in terms of eigenvalues.
fn lemma4_fixed_point(t_eig: &[f64], r_eig: &[f64], omega: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    let mut e = 1.0 / omega;
    for it in 0..100_000 {
        let et = t_eig.iter().map(|&l| l / (1.0 + e * l)).sum::<f64>() / nf;
        let next = r_eig.iter().map(|&l| l / (omega + et * l)).sum::<f64>() / nf;
        let next = 0.5 * (e + next);
        if (next - e).abs() <= 1e-13 * next.max(1.0) {
            return Ok(next);
        }
        e = next;
        if !e.is_finite() {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: f64::NAN,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: 100_000,
        residual: f64::NAN,
    })
}

/// `(1/N) tr Q (T^{1/2} X R X^H T^{1/2} + omega I)^{-1}` with `X` an `N x K`
/// Gaussian matrix of variance `1/N`, against `(1/N) tr Q (omega I + omega e T)^{-1}`.
pub fn lemma4_check(
    t: &CMat,
    r: &CMat,
    q: &CMat,
    omega: f64,
    n_trials: usize,
    rng: RngSpec,
) -> Result<StieltjesProbe> {
    check_trials(n_trials)?;
    if !(omega > 0.0) {
        return Err(invalid("omega", format!("must be positive, got {omega}")));
    }
    let n = t.nrows();
    let k = r.nrows();
    check_q(q, n)?;
    check_q(t, n)?;
    check_q(r, k)?;
    let t_half = hermitian_sqrt(t)?;
    let r_half = hermitian_sqrt(r)?;
    let samples: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            // Rows of `x` are the K columns of X.
            let x = gaussian_rows(&mut rng.trial(trial as u64).rng(), &vec![1.0; k], n);
            let y = &r_half * x * &t_half; // (T^{1/2} X R^{1/2})^H
            let solved = hermitian_solve(&regularized_gram(&y, omega), q)?;
            Ok(solved.trace().re / n as f64)
        })
        .collect::<Result<_>>()?;
    let t_eigen = t.clone().symmetric_eigen();
    let r_eig = hermitian_eigenvalues(r);
    let t_eig: Vec<f64> = t_eigen.eigenvalues.iter().copied().collect();
    let e = lemma4_fixed_point(&t_eig, &r_eig, omega, n)?;
    let u = &t_eigen.eigenvectors;
    let rotated = u.adjoint() * q * u;
    let de = (0..n)
        .map(|i| rotated[(i, i)].re / (omega * (1.0 + e * t_eig[i])))
        .sum::<f64>()
        / n as f64;
    Ok(StieltjesProbe::new(
        "lemma4",
        Some(q.clone()),
        omega,
        n_trials,
        mean(&samples),
        de,
    ))
}

/// Named quantities of one realization, averaged over users where per-user.
struct QuadraticSample {
    values: [f64; 10],
}

const QUADRATIC_NAMES: [&str; 10] = [
    "h^H A_k^-1 hc",
    "hc^H A_k^-1 hc",
    "h^H A_k^-1 h",
    "h^H A_k^-2 h",
    "hc^H A_k^-2 h",
    "hc^H A_k^-2 hc",
    "signal h^H A^-1 hc",
    "interference",
    "transmit trace",
    "pu quadratic",
];

fn quadratic_sample(
    config: &NetworkConfig,
    params: &PrecoderParams,
    rng: RngSpec,
) -> Result<QuadraticSample> {
    let real = sample_channels(config, rng)?;
    let hc = partially_project(&real, params.beta)?;
    let a_inv = hermitian_inverse(regularized_gram(&hc, params.alpha))?;
    let gu = &a_inv * hc.adjoint();
    let y = &real.h * &gu;
    let k_users = config.n_sus;
    let mut v = [0.0; 10];
    for k in 0..k_users {
        let h: CVec = real.h.row(k).adjoint();
        let hck: CVec = hc.row(k).adjoint();
        let loo = RankOneDowndate::new(&a_inv, &hck)?;
        let xh = loo.apply(&h);
        let xc = loo.apply(&hck);
        v[0] += h.dotc(&xc).re;
        v[1] += hck.dotc(&xc).re;
        v[2] += h.dotc(&xh).re;
        v[3] += xh.norm_squared();
        v[4] += xc.dotc(&xh).re;
        v[5] += xc.norm_squared();
        v[6] += y[(k, k)].re;
        v[7] += y.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>() - y[(k, k)].norm_sqr();
    }
    for x in v.iter_mut().take(8) {
        *x /= k_users as f64;
    }
    v[8] = gu.iter().map(|z| z.norm_sqr()).sum::<f64>() / config.n_antennas as f64;
    let leak = &real.f * &gu;
    v[9] = leak.iter().map(|z| z.norm_sqr()).sum::<f64>() / config.n_pus as f64;
    Ok(QuadraticSample { values: v })
}

/// Deterministic limits of the quadratic forms, in the order of
/// `QUADRATIC_NAMES`, averaged over users.
fn quadratic_limits(
    config: &NetworkConfig,
    params: &PrecoderParams,
    st: &FixedPointState,
) -> Result<[f64; 10]> {
    let alpha = params.alpha;
    let keep = 1.0 - params.beta;
    let b2 = keep * keep;
    let (e, t1, t2, de) = (st.e, st.t1, st.t2, st.de_dalpha);
    let dt1 = -t1 / (1.0 + e) * de;
    let dt2 = -b2 * t2 / (1.0 + b2 * e) * de;
    // -(d/dalpha)((t1 + w t2) / alpha)
    let neg_slope = |w: f64| (t1 + w * t2) / (alpha * alpha) - (dt1 + w * dt2) / alpha;
    let r_mean = mean(&config.r1);
    let r2_mean = mean(&config.r2);
    let result = de_sinr(config, params)?;
    Ok([
        r_mean * (t1 + keep * t2) / alpha,
        r_mean * (t1 + b2 * t2) / alpha,
        r_mean * (t1 + t2) / alpha,
        r_mean * neg_slope(1.0),
        r_mean * neg_slope(keep),
        r_mean * neg_slope(b2),
        mean(&result.a_bar),
        mean(&result.b_bar),
        dt1 + dt2,
        r2_mean / config.c2() * dt2,
    ])
}

/// Every quadratic-form identity used to assemble the SINR limit: the
/// leave-one-out forms and their squared-resolvent versions, the signal and
/// interference terms, the transmit trace and the primary-user quadratic.
pub fn appendix_b_quadratic_checks(
    config: &NetworkConfig,
    params: &PrecoderParams,
    n_trials: usize,
    rng: RngSpec,
) -> Result<Vec<StieltjesProbe>> {
    check_trials(n_trials)?;
    config.validate()?;
    params.validate()?;
    let samples: Vec<QuadraticSample> = (0..n_trials)
        .into_par_iter()
        .map(|t| quadratic_sample(config, params, rng.trial(t as u64)))
        .collect::<Result<_>>()?;
    let st = solve_fixed_point(config, params)?;
    let limits = quadratic_limits(config, params, &st)?;
    Ok(QUADRATIC_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mc = samples.iter().map(|s| s.values[i]).sum::<f64>() / n_trials as f64;
            StieltjesProbe::new(name, None, params.alpha, n_trials, mc, limits[i])
        })
        .collect())
}

/// Squared-resolvent form `h^H A_k^{-2} h` computed directly (`mc_value`)
/// and as the central difference `-d/dalpha h^H A_k^{-1} h` on the same
/// draws (`de_value`).
pub fn derivative_consistency_check(
    config: &NetworkConfig,
    params: &PrecoderParams,
    n_trials: usize,
    rng: RngSpec,
) -> Result<StieltjesProbe> {
    check_trials(n_trials)?;
    config.validate()?;
    params.validate()?;
    let step = 1e-4 * params.alpha;
    let pairs: Vec<(f64, f64)> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let real = sample_channels(config, rng.trial(t as u64))?;
            let hc = partially_project(&real, params.beta)?;
            let h: CVec = real.h.row(0).adjoint();
            let hck: CVec = hc.row(0).adjoint();
            let first_order = |alpha: f64| -> Result<(f64, f64)> {
                let a_inv = hermitian_inverse(regularized_gram(&hc, alpha))?;
                let x = RankOneDowndate::new(&a_inv, &hck)?.apply(&h);
                Ok((h.dotc(&x).re, x.norm_squared()))
            };
            let (_, direct) = first_order(params.alpha)?;
            let (up, _) = first_order(params.alpha + step)?;
            let (down, _) = first_order(params.alpha - step)?;
            Ok((direct, -(up - down) / (2.0 * step)))
        })
        .collect::<Result<_>>()?;
    let direct = pairs.iter().map(|p| p.0).sum::<f64>() / n_trials as f64;
    let fd = pairs.iter().map(|p| p.1).sum::<f64>() / n_trials as f64;
    Ok(StieltjesProbe::new(
        "h^H A_k^-2 h vs -d/dalpha",
        None,
        params.alpha,
        n_trials,
        direct,
        fd,
    ))
}

/// `(1/N) tr(Q)` helper for callers building custom probes.
pub fn trace_weight(q: &CMat) -> f64 {
    normalized_trace(q)
}

/// `tr(W Q W^H) / N`, the part of `(1/N) tr Q` inside the row space of `W`.
pub fn row_space_weight(w: &CMat, q: &CMat) -> f64 {
    trace_of_product(&(w * q), &w.adjoint()).re / q.nrows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn haar_rows_are_orthonormal() {
        for (n, l) in [(8, 3), (16, 16), (5, 1)] {
            let w = haar_rows(n, l, RngSpec::new(n as u64)).unwrap();
            assert_eq!(w.shape(), (l, n));
            assert!((&w * w.adjoint() - CMat::identity(l, l)).norm() < 1e-10);
            let p = w.adjoint() * &w;
            assert!((p.trace().re / n as f64 - l as f64 / n as f64).abs() < 1e-12);
        }
        let w = haar_rows(6, 6, RngSpec::new(1)).unwrap();
        assert!((w.adjoint() * &w - CMat::identity(6, 6)).norm() < 1e-10);
        assert!(haar_rows(4, 5, RngSpec::new(0)).is_err());
    }

    #[test]
    fn haar_entries_have_variance_one_over_n() {
        let n = 8;
        let mut acc = vec![0.0; n];
        let draws = 1000;
        for t in 0..draws {
            let w = haar_rows(n, 3, RngSpec::new(4).trial(t)).unwrap();
            for j in 0..n {
                acc[j] += w.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>() / 3.0;
            }
        }
        for a in acc {
            assert!((a / draws as f64 * n as f64 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn zero_q_gives_zero_on_both_sides() {
        let cfg = Scenario::uniform(8, 4, 3, 1.0, 0.6, 0.0).at_snr(10.0);
        let probe = theorem2_check(
            &cfg,
            &PrecoderParams::new(0.5, 0.3).unwrap(),
            &CMat::zeros(8, 8),
            3,
            RngSpec::new(0),
        )
        .unwrap();
        assert_eq!(probe.mc_value, 0.0);
        assert_eq!(probe.de_value, 0.0);
        assert_eq!(probe.rel_error, 0.0);
    }

    #[test]
    fn lemma5_is_exact_for_square_w() {
        let q = test_matrices(12, RngSpec::new(2)).remove(1).1;
        let probe = lemma5_check(&q, 0.7, 1.0, 12, 3, RngSpec::new(0)).unwrap();
        assert!(probe.rel_error < 1e-12);
    }

    #[test]
    fn lemma4_with_zero_r() {
        let n = 10;
        let q = test_matrices(n, RngSpec::new(3)).remove(1).1;
        let probe = lemma4_check(
            &CMat::identity(n, n),
            &CMat::zeros(5, 5),
            &q,
            0.4,
            3,
            RngSpec::new(0),
        )
        .unwrap();
        assert!(probe.rel_error < 1e-12);
        assert!((probe.de_value - trace_weight(&q) / 0.4).abs() < 1e-12);
    }

    #[test]
    fn q_cap_is_enforced() {
        let q = CMat::identity(8, 8) * Complex64::new(DEFAULT_Q_NORM_CAP * 2.0, 0.0);
        assert!(lemma5_check(&q, 1.0, 0.5, 8, 2, RngSpec::new(0)).is_err());
    }

    #[test]
    fn derivative_forms_agree_per_draw() {
        let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(10.0);
        let probe = derivative_consistency_check(
            &cfg,
            &PrecoderParams::new(0.2, 0.5).unwrap(),
            5,
            RngSpec::new(1),
        )
        .unwrap();
        assert!(probe.rel_error < 1e-6, "{probe:?}");
    }
}
