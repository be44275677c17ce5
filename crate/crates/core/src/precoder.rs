//! The PP-RZF precoder `G = xi (H^_^H H^_ + alpha I)^{-1} H^_^H`, where
//! `H^_ = H (I - beta W^H W)` is the partially projected channel, together
//! with its constraint-aware power normalization and the resulting SINR.

use crate::channel::{partially_project, ChannelRealization, NetworkConfig};
use crate::error::{invalid, Error, Result};
use crate::linalg::{frobenius_sq, hermitian_solve, regularized_gram, CMat};
use crate::montecarlo::ExpectationEstimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecoderParams {
    /// Regularization, strictly positive.
    pub alpha: f64,
    /// Projection weight in `[0, 1]`; `0` is plain RZF, `1` full null-space
    /// projection.
    pub beta: f64,
}

impl PrecoderParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid(
                "alpha",
                format!("must be positive, got {}", self.alpha),
            ));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid(
                "beta",
                format!("must lie in [0, 1], got {}", self.beta),
            ));
        }
        Ok(())
    }
}

/// The constraint that sets the power normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binding {
    Transmit,
    /// Interference threshold of primary user `l` (0-based).
    Pu(usize),
    SumInterference,
}

impl std::fmt::Display for Binding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Binding::Transmit => write!(f, "transmit"),
            Binding::Pu(l) => write!(f, "pu{l}"),
            Binding::SumInterference => write!(f, "sum_interference"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderOutput {
    /// `N x K` matrix `(H^_^H H^_ + alpha I)^{-1} H^_^H`.
    pub g_unnormalized: CMat,
    /// Squared normalization `xi^2`.
    pub xi2: f64,
    /// `P_T / xi^2`.
    pub nu: f64,
    pub binding: Binding,
}

/// Regularized inverse of one projected realization, shared by the SINR and
/// the constraint terms.
#[derive(Debug, Clone)]
pub(crate) struct Resolvent {
    /// `N x K`, `A^{-1} H^_^H` with `A = H^_^H H^_ + alpha I`.
    pub(crate) gu: CMat,
}

impl Resolvent {
    pub(crate) fn new(real: &ChannelRealization, params: &PrecoderParams) -> Result<Self> {
        params.validate()?;
        let hc = partially_project(real, params.beta)?;
        let a = regularized_gram(&hc, params.alpha);
        let gu = hermitian_solve(&a, &hc.adjoint())?;
        Ok(Self { gu })
    }

    /// Per-user SINR. Row `k` of `H A^{-1} H^_^H` holds the useful amplitude
    /// on the diagonal and the leakage towards every other user off it.
    pub(crate) fn sinr(&self, h: &CMat, rho: f64, nu: f64) -> Vec<f64> {
        let y = h * &self.gu;
        (0..y.nrows())
            .map(|k| {
                let row = y.row(k);
                let signal = row[k].norm_sqr();
                let interference: f64 = row.iter().map(|z| z.norm_sqr()).sum::<f64>() - signal;
                rho * signal / (rho * interference.max(0.0) + nu)
            })
            .collect()
    }

    /// `(1/N) tr(A^{-1} H^_^H H^_ A^{-1})`.
    pub(crate) fn transmit_trace(&self) -> f64 {
        frobenius_sq(&self.gu) / self.gu.nrows() as f64
    }

    /// `f_l^H A^{-1} H^_^H H^_ A^{-1} f_l` for every primary user.
    pub(crate) fn pu_quadratics(&self, f: &CMat) -> Vec<f64> {
        let leak = f * &self.gu;
        leak.row_iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}

fn check_dimensions(real: &ChannelRealization, config: &NetworkConfig) -> Result<()> {
    let got = (real.n_antennas(), real.n_sus(), real.n_pus());
    let want = (config.n_antennas, config.n_sus, config.n_pus);
    if got != want {
        return Err(Error::Dimension(format!(
            "realization is (N, K, L) = {got:?} but the configuration expects {want:?}"
        )));
    }
    Ok(())
}

/// Builds the precoder for one realization. The normalization comes from
/// `expectations`, i.e. it is fixed over channel draws.
pub fn build_precoder(
    real: &ChannelRealization,
    params: &PrecoderParams,
    config: &NetworkConfig,
    expectations: &ExpectationEstimate,
) -> Result<PrecoderOutput> {
    config.validate()?;
    check_dimensions(real, config)?;
    let res = Resolvent::new(real, params)?;
    let (nu, binding) = expectations.nu(config)?;
    Ok(PrecoderOutput {
        g_unnormalized: res.gu,
        xi2: config.p_t / nu,
        nu,
        binding,
    })
}

/// SINR of every secondary user for one realization, given `nu = P_T / xi^2`.
pub fn instantaneous_sinr(
    real: &ChannelRealization,
    params: &PrecoderParams,
    config: &NetworkConfig,
    nu: f64,
) -> Result<Vec<f64>> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(invalid("nu", format!("must be positive, got {nu}")));
    }
    config.validate()?;
    check_dimensions(real, config)?;
    let res = Resolvent::new(real, params)?;
    Ok(res.sinr(&real.h, config.rho(), nu))
}

/// `sum_k ln(1 + gamma_k)` in nats.
pub fn sum_rate_instantaneous(gammas: &[f64]) -> Result<f64> {
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0)) {
        return Err(invalid(
            "gamma",
            format!("SINR must be nonnegative, got {g}"),
        ));
    }
    Ok(gammas.iter().map(|g| g.ln_1p()).sum())
}
