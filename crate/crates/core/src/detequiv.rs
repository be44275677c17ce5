//! Large-system deterministic equivalents of the PP-RZF SINR and sum-rate.
//!
//! Everything here is driven by one scalar `e`, the solution of
//!
//! ```text
//! e  = (1/N) sum_k r_k / (alpha + s(e) r_k),   s(e) = t1 + (1-beta)^2 t2,
//! t1 = (1 - c2) / (1 + e),                     t2 = c2 / (1 + (1-beta)^2 e).
//! ```
//!
//! `t1` and `t2` split the resolvent mass between the null space of the
//! primary-user channels (dimension `N - L`) and their row space (dimension
//! `L`, where the projected channel is shrunk by `1 - beta`).
//!
//! The printed forms of the interference and normalization terms carry a
//! factor `de/dalpha`, which is negative. Power terms are positive, so they
//! use `|de/dalpha| = -de/dalpha` throughout; [`e_alpha_derivative`] itself
//! returns the signed derivative.

use crate::channel::{Constraint, NetworkConfig};
use crate::error::{invalid, Error, Result};
use crate::precoder::{Binding, PrecoderParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Weight of the new iterate in `e <- (1 - w) e + w * rhs(e)`.
    pub damping: f64,
    /// Stop once `|e_new - e| <= tol * max(1, e)`.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_e: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-13,
            max_iter: 100_000,
            initial_e: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointState {
    pub e: f64,
    pub t1: f64,
    pub t2: f64,
    /// `de/dalpha`, negative.
    pub de_dalpha: f64,
    /// `|e - rhs(e)|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Non-fatal conditions reported alongside a deterministic equivalent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeWarning {
    /// `beta = 1` with `L = N`: the null space of the primary channels is
    /// trivial, the projected channel vanishes and every SINR is zero.
    NullSpaceEmpty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    /// Deterministic equivalent of the signal amplitude `h_k^H A^{-1} h^_k`.
    pub a_bar: Vec<f64>,
    /// Deterministic equivalent of the inter-user interference power.
    pub b_bar: Vec<f64>,
    /// Deterministic equivalent of `nu = P_T / xi^2`.
    pub nu_bar: f64,
    pub gamma_bar: Vec<f64>,
    /// `sum_k ln(1 + gamma_bar_k)`, in nats.
    pub r_sum_bar: f64,
    pub state: FixedPointState,
    /// Which constraint attains the maximum in `nu_bar`.
    pub binding: Binding,
    pub warning: Option<DeWarning>,
}

/// Marchenko-Pastur style closed form `zeta(mu, eta, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpParams {
    pub mu: f64,
    pub eta: f64,
    pub alpha: f64,
    pub zeta: f64,
}

impl MpParams {
    /// Defect of `zeta` in `alpha z^2 + (alpha + eta - mu) z - mu = 0`, the
    /// quadratic whose positive root is the closed form.
    pub fn quadratic_residual(&self) -> f64 {
        let z = self.zeta;
        (self.alpha * z * z + (self.alpha + self.eta - self.mu) * z - self.mu).abs()
    }

    /// The closed form evaluated literally, without the cancellation-free
    /// rearrangement used to build `zeta`.
    pub fn literal(&self) -> f64 {
        let d = (self.mu - self.eta) / self.alpha;
        0.5 * (d - 1.0 + (d * d + 2.0 * (self.mu + self.eta) / self.alpha + 1.0).sqrt())
    }
}

fn check_params(params: &PrecoderParams) -> Result<()> {
    if !(params.alpha.is_finite() && params.alpha > 0.0) {
        return Err(invalid(
            "alpha",
            format!("must be positive, got {}", params.alpha),
        ));
    }
    if !(0.0..=1.0).contains(&params.beta) {
        return Err(invalid(
            "beta",
            format!("must lie in [0, 1], got {}", params.beta),
        ));
    }
    Ok(())
}

struct Weights {
    t1: f64,
    t2: f64,
}

fn weights(c2: f64, b2: f64, e: f64) -> Weights {
    Weights {
        t1: (1.0 - c2) / (1.0 + e),
        t2: c2 / (1.0 + b2 * e),
    }
}

fn fixed_point_rhs(config: &NetworkConfig, alpha: f64, b2: f64, e: f64) -> f64 {
    let w = weights(config.c2(), b2, e);
    let s = w.t1 + b2 * w.t2;
    let n = config.n_antennas as f64;
    config.r1.iter().map(|&r| r / (alpha + s * r)).sum::<f64>() / n
}

pub fn solve_fixed_point(
    config: &NetworkConfig,
    params: &PrecoderParams,
) -> Result<FixedPointState> {
    solve_fixed_point_with(config, params, &FixedPointOptions::default())
}

/// Damped Picard iteration of the coupled `(e, t1, t2)` map; `t1` and `t2`
/// are refreshed from the current `e` at every step.
pub fn solve_fixed_point_with(
    config: &NetworkConfig,
    params: &PrecoderParams,
    opts: &FixedPointOptions,
) -> Result<FixedPointState> {
    config.validate()?;
    check_params(params)?;
    if !(opts.initial_e > 0.0 && opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(invalid(
            "fixed-point options",
            "initial e must be positive and damping in (0, 1]",
        ));
    }
    let b2 = (1.0 - params.beta).powi(2);
    let mut e = opts.initial_e;
    let mut iterations = 0;
    loop {
        let next =
            (1.0 - opts.damping) * e + opts.damping * fixed_point_rhs(config, params.alpha, b2, e);
        iterations += 1;
        let step = (next - e).abs();
        e = next;
        if !e.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual: f64::NAN,
            });
        }
        if step <= opts.tol * e.max(1.0) {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: (e - fixed_point_rhs(config, params.alpha, b2, e)).abs(),
            });
        }
    }
    let w = weights(config.c2(), b2, e);
    let mut state = FixedPointState {
        e,
        t1: w.t1,
        t2: w.t2,
        de_dalpha: 0.0,
        residual: (e - fixed_point_rhs(config, params.alpha, b2, e)).abs(),
        iterations,
    };
    state.de_dalpha = e_alpha_derivative(&state, config, params)?;
    Ok(state)
}

/// Implicit derivative of the fixed point with respect to `alpha`.
///
/// The returned value is `-num / den`; `num / den` is the magnitude.
pub fn e_alpha_derivative(
    state: &FixedPointState,
    config: &NetworkConfig,
    params: &PrecoderParams,
) -> Result<f64> {
    check_params(params)?;
    let b2 = (1.0 - params.beta).powi(2);
    let (e, t1, t2) = (state.e, state.t1, state.t2);
    let s = t1 + b2 * t2;
    let n = config.n_antennas as f64;
    let alpha = params.alpha;
    let num = config
        .r1
        .iter()
        .map(|&r| r / (alpha + s * r).powi(2))
        .sum::<f64>()
        / n;
    let q = config
        .r1
        .iter()
        .map(|&r| (r / (alpha + s * r)).powi(2))
        .sum::<f64>()
        / n;
    let ds = t1 / (1.0 + e) + b2 * b2 * t2 / (1.0 + b2 * e);
    let den = 1.0 - ds * q;
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::DerivativeDenominator(den));
    }
    Ok(-num / den)
}

/// Per-constraint deterministic equivalents of the expectations that set
/// the precoder normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeTerms {
    pub state: FixedPointState,
    /// `(1/N) tr(A^{-1} H^H H A^{-1})`.
    pub transmit: f64,
    /// `f_l^H A^{-1} H^H H A^{-1} f_l` per unit path gain `r_{2,l}`.
    pub pu_per_gain: f64,
}

pub fn de_terms(config: &NetworkConfig, params: &PrecoderParams) -> Result<DeTerms> {
    let state = solve_fixed_point(config, params)?;
    Ok(terms_from_state(config, params, state))
}

fn terms_from_state(
    config: &NetworkConfig,
    params: &PrecoderParams,
    state: FixedPointState,
) -> DeTerms {
    let b2 = (1.0 - params.beta).powi(2);
    let slope = -state.de_dalpha;
    let g1 = state.t1 / (1.0 + state.e);
    let g2 = b2 * state.t2 / (1.0 + b2 * state.e);
    DeTerms {
        state,
        transmit: (g1 + g2) * slope,
        pu_per_gain: g2 / config.c2() * slope,
    }
}

/// `nu_bar` and its binding constraint.
pub(crate) fn normalization(config: &NetworkConfig, terms: &DeTerms) -> (f64, Binding) {
    match &config.constraint {
        Constraint::PerPu { thetas } => {
            let (idx, ratio) = config
                .r2
                .iter()
                .zip(thetas)
                .map(|(r, t)| r / t)
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                });
            let pu = ratio * terms.pu_per_gain;
            if pu > terms.transmit {
                (pu, Binding::Pu(idx))
            } else {
                (terms.transmit, Binding::Transmit)
            }
        }
        Constraint::SumPower { theta_all } => {
            let sum = config.r2.iter().sum::<f64>() / theta_all * terms.pu_per_gain;
            if sum > terms.transmit {
                (sum, Binding::SumInterference)
            } else {
                (terms.transmit, Binding::Transmit)
            }
        }
    }
}

/// Deterministic equivalents of every user's SINR and of the sum-rate.
pub fn de_sinr(config: &NetworkConfig, params: &PrecoderParams) -> Result<DeResult> {
    let terms = de_terms(config, params)?;
    let state = terms.state;
    let beta = params.beta;
    let alpha = params.alpha;
    let keep = 1.0 - beta;
    let b2 = keep * keep;
    let slope = -state.de_dalpha;
    let g1 = state.t1 / (1.0 + state.e);
    let g2 = b2 * state.t2 / (1.0 + b2 * state.e);

    let a_bar: Vec<f64> = config
        .r1
        .iter()
        .map(|&r| r * (state.t1 + state.t2 * keep) / (alpha + r * (state.t1 + state.t2 * b2)))
        .collect();
    let b_bar: Vec<f64> = config
        .r1
        .iter()
        .zip(&a_bar)
        .map(|(&r, &a)| r * ((1.0 - a).powi(2) * g1 + (1.0 - keep * a).powi(2) * g2) * slope)
        .collect();
    let (nu_bar, binding) = normalization(config, &terms);

    let null_space_empty = beta == 1.0 && config.n_pus == config.n_antennas;
    let rho = config.rho();
    let gamma_bar: Vec<f64> = if null_space_empty {
        vec![0.0; config.n_sus]
    } else {
        a_bar
            .iter()
            .zip(&b_bar)
            .map(|(&a, &b)| rho * a * a / (rho * b + nu_bar))
            .collect()
    };
    let r_sum_bar = gamma_bar.iter().map(|g| g.ln_1p()).sum();
    Ok(DeResult {
        a_bar,
        b_bar,
        nu_bar,
        gamma_bar,
        r_sum_bar,
        state,
        binding,
        warning: null_space_empty.then_some(DeWarning::NullSpaceEmpty),
    })
}

/// Deterministic-equivalent sum-rate; the optimizer objective.
pub fn de_sum_rate(config: &NetworkConfig, params: &PrecoderParams) -> Result<f64> {
    Ok(de_sinr(config, params)?.r_sum_bar)
}

/// `zeta(mu, eta, alpha) = t1 / alpha` for `R1 = I` and `beta = 1`; with
/// `mu = 1` it is the Marchenko-Pastur Stieltjes transform at `-alpha`.
pub fn zeta_closed_form(mu: f64, eta: f64, alpha: f64) -> Result<MpParams> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(invalid("eta", format!("must be positive, got {eta}")));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(invalid("mu", format!("must lie in [0, 1], got {mu}")));
    }
    // Positive root of alpha z^2 + b z - mu, picking the branch without
    // cancellation.
    let b = alpha + eta - mu;
    let disc = (b * b + 4.0 * alpha * mu).sqrt();
    let zeta = if b >= 0.0 {
        2.0 * mu / (b + disc)
    } else {
        (disc - b) / (2.0 * alpha)
    };
    Ok(MpParams {
        mu,
        eta,
        alpha,
        zeta,
    })
}

fn require_identity_r1(config: &NetworkConfig, what: &str) -> Result<()> {
    match config.uniform_r1() {
        Some(r) if r == 1.0 => Ok(()),
        _ => Err(Error::Regime(format!(
            "{what} requires r1 = 1 for every secondary user"
        ))),
    }
}

/// Closed-form SINR for `beta = 0` and unit path gains:
/// `rho (c1 (1+z)^2 - z^2) / (rho + nu0 (1+z)^2)` with `z = zeta(1, 1/c1, alpha)`.
pub fn beta_zero_sinr(config: &NetworkConfig, alpha: f64) -> Result<f64> {
    config.validate()?;
    require_identity_r1(config, "the beta = 0 closed form")?;
    let c1 = config.c1();
    let z = zeta_closed_form(1.0, 1.0 / c1, alpha)?.zeta;
    let rho = config.rho();
    Ok(rho * (c1 * (1.0 + z).powi(2) - z * z) / (rho + config.nu0() * (1.0 + z).powi(2)))
}

/// Closed-form SINR for `beta = 1`, unit path gains and `L < N`:
/// `rho (c1 (1-c2) (1+z)^2 - z^2) / (rho + (1+z)^2)` with `z = zeta(1-c2, 1/c1, alpha)`.
pub fn beta_one_sinr(config: &NetworkConfig, alpha: f64) -> Result<f64> {
    config.validate()?;
    require_identity_r1(config, "the beta = 1 closed form")?;
    let c2 = config.c2();
    if c2 >= 1.0 {
        return Err(Error::Regime("the beta = 1 closed form needs L < N".into()));
    }
    let c1 = config.c1();
    let z = zeta_closed_form(1.0 - c2, 1.0 / c1, alpha)?.zeta;
    let rho = config.rho();
    Ok(rho * (c1 * (1.0 - c2) * (1.0 + z).powi(2) - z * z) / (rho + (1.0 + z).powi(2)))
}

/// The `L = N`, `R1 = r1 I` specialization of the deterministic equivalent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corollary1 {
    pub gamma: f64,
    /// Solution of the scalar fixed point of this regime.
    pub e: f64,
    /// `r1 * max{1, interference_ratio}`.
    pub nu0: f64,
    /// For the sum constraint: whether the threshold, not noise, caps the SINR.
    pub interference_limited: Option<bool>,
    /// For the sum constraint: the SINR from the SNR-free two-branch form.
    pub two_branch: Option<f64>,
}

pub fn corollary1_detail(config: &NetworkConfig, params: &PrecoderParams) -> Result<Corollary1> {
    config.validate()?;
    check_params(params)?;
    if config.n_pus != config.n_antennas {
        return Err(Error::Regime(format!(
            "needs L = N, got L={} N={}",
            config.n_pus, config.n_antennas
        )));
    }
    let r1 = config
        .uniform_r1()
        .ok_or_else(|| Error::Regime("needs equal path gains r1 for all secondary users".into()))?;
    if params.beta >= 1.0 {
        return Err(Error::Regime("needs beta < 1".into()));
    }
    let c1 = config.c1();
    let alpha = params.alpha;
    let b2 = (1.0 - params.beta).powi(2);

    // e = r1 (1 + b2 e) / (c1 alpha (1 + b2 e) + c1 r1 b2) rearranges to
    // c1 alpha b2 e^2 + (c1 alpha + b2 r1 (c1 - 1)) e - r1 = 0.
    let qa = c1 * alpha * b2;
    let qb = c1 * alpha + b2 * r1 * (c1 - 1.0);
    let disc = (qb * qb + 4.0 * qa * r1).sqrt();
    let e = if qb >= 0.0 {
        2.0 * r1 / (qb + disc)
    } else {
        (disc - qb) / (2.0 * qa)
    };

    let nu0 = r1 * config.nu0();
    let rho = config.rho();
    let x = c1 * alpha * e;
    let signal = c1 * r1 * r1 - (x - r1).powi(2);
    let gamma = rho * signal / (rho * x * x + nu0);

    let (interference_limited, two_branch) = match config.constraint {
        Constraint::SumPower { theta_all } => {
            let tr_r2: f64 = config.r2.iter().sum();
            let p_all = theta_all * config.p_t;
            let load = rho * config.sigma2 * tr_r2 / p_all;
            let limited = load > 1.0;
            let floor = if limited {
                r1 * config.sigma2 * tr_r2 / p_all
            } else {
                r1 / rho
            };
            let g = signal / (x * x + floor);
            debug_assert!(
                (g - gamma).abs() <= 1e-9 * gamma.abs().max(1.0),
                "two-branch form {g} disagrees with {gamma}"
            );
            (Some(limited), Some(g))
        }
        Constraint::PerPu { .. } => (None, None),
    };
    Ok(Corollary1 {
        gamma,
        e,
        nu0,
        interference_limited,
        two_branch,
    })
}

/// Common SINR of every secondary user when `L = N` and `R1 = r1 I`.
pub fn corollary1_sinr(config: &NetworkConfig, params: &PrecoderParams) -> Result<f64> {
    Ok(corollary1_detail(config, params)?.gamma)
}
