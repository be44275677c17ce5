//! Reproducible Monte-Carlo estimates over channel realizations.
//!
//! Trial `t` of a batch rooted at `rng` always draws from `rng.trial(t)`, so
//! results do not depend on how trials are spread over threads. Per-trial
//! values are collected in trial order and reduced sequentially.

use rayon::prelude::*;

use crate::channel::{sample_channels, ChannelRealization, Constraint, NetworkConfig, RngSpec};
use crate::detequiv::{self, de_terms};
use crate::error::{invalid, Error, Result};
use crate::precoder::{sum_rate_instantaneous, Binding, PrecoderParams, Resolvent};

/// Trial count used when callers do not specify one.
pub const DEFAULT_TRIALS: usize = 10_000;
/// Batch size of the Monte-Carlo estimate of `nu`.
pub const DEFAULT_NU_BATCH: usize = 500;
/// Tag of the stream family reserved for `nu` estimation, disjoint from the
/// rate-estimation trials.
const NU_STREAM_TAG: u64 = 0x6e75;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// `sample_std / sqrt(n_trials)`.
    pub std_err: f64,
    pub n_trials: usize,
    pub seed: RngSpec,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64], seed: RngSpec) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(invalid(
                "n_trials",
                format!("need at least 2 samples, got {n}"),
            ));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        Ok(Self {
            mean,
            std_err: (var / n as f64).sqrt(),
            n_trials: n,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InterferenceEstimate {
    /// `E[f_l^H A^{-1} H^_^H H^_ A^{-1} f_l]` for each primary user.
    PerPu(Vec<f64>),
    /// The sum of the above over all primary users.
    Sum(f64),
}

/// Channel-averaged terms that fix the precoder normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationEstimate {
    /// `E[(1/N) tr(A^{-1} H^_^H H^_ A^{-1})]`.
    pub transmit_trace: f64,
    pub interference: InterferenceEstimate,
}

impl ExpectationEstimate {
    /// The large-system deterministic equivalents of every term.
    pub fn deterministic(config: &NetworkConfig, params: &PrecoderParams) -> Result<Self> {
        let t = de_terms(config, params)?;
        let interference = match config.constraint {
            Constraint::PerPu { .. } => {
                InterferenceEstimate::PerPu(config.r2.iter().map(|r| r * t.pu_per_gain).collect())
            }
            Constraint::SumPower { .. } => {
                InterferenceEstimate::Sum(config.r2.iter().sum::<f64>() * t.pu_per_gain)
            }
        };
        Ok(Self {
            transmit_trace: t.transmit,
            interference,
        })
    }

    /// The terms of one realization, i.e. a per-realization normalization.
    /// Reports per-PU values; [`ExpectationEstimate::nu`] sums them for the
    /// sum constraint.
    pub fn from_realization(real: &ChannelRealization, params: &PrecoderParams) -> Result<Self> {
        let res = Resolvent::new(real, params)?;
        Ok(Self {
            transmit_trace: res.transmit_trace(),
            interference: InterferenceEstimate::PerPu(res.pu_quadratics(&real.f)),
        })
    }

    /// `nu = max{transmit, interference / threshold}` and the constraint
    /// attaining it. Ties go to the transmit constraint.
    pub fn nu(&self, config: &NetworkConfig) -> Result<(f64, Binding)> {
        let mut best = (self.transmit_trace, Binding::Transmit);
        match (&config.constraint, &self.interference) {
            (Constraint::PerPu { thetas }, InterferenceEstimate::PerPu(q)) => {
                if q.len() != thetas.len() {
                    return Err(Error::Dimension(format!(
                        "{} interference terms for {} thresholds",
                        q.len(),
                        thetas.len()
                    )));
                }
                for (l, (q, t)) in q.iter().zip(thetas).enumerate() {
                    if q / t > best.0 {
                        best = (q / t, Binding::Pu(l));
                    }
                }
            }
            (Constraint::SumPower { theta_all }, interference) => {
                let total = match interference {
                    InterferenceEstimate::PerPu(q) => q.iter().sum(),
                    InterferenceEstimate::Sum(s) => *s,
                };
                if total / theta_all > best.0 {
                    best = (total / theta_all, Binding::SumInterference);
                }
            }
            (Constraint::PerPu { .. }, InterferenceEstimate::Sum(_)) => {
                return Err(Error::Dimension(
                    "per-PU constraint needs one interference term per primary user".into(),
                ))
            }
        }
        if !(best.0.is_finite() && best.0 > 0.0) {
            return Err(Error::Singular(format!(
                "normalization nu = {} is not positive",
                best.0
            )));
        }
        Ok(best)
    }
}

/// How the precoder normalization `nu` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NuMode {
    /// Deterministic equivalents of the expectations.
    #[default]
    De,
    /// Sample means over `batch` realizations drawn from a stream family
    /// disjoint from the rate trials.
    Mc { batch: usize },
    /// Each realization normalized by its own traces.
    PerRealization,
}

/// Sample means of the normalization terms over `n_trials` realizations.
pub fn estimate_expectations(
    config: &NetworkConfig,
    params: &PrecoderParams,
    n_trials: usize,
    rng: RngSpec,
) -> Result<ExpectationEstimate> {
    if n_trials < 2 {
        return Err(invalid(
            "n_trials",
            format!("need at least 2 trials, got {n_trials}"),
        ));
    }
    config.validate()?;
    params.validate()?;
    let per_trial: Vec<(f64, Vec<f64>)> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let real = sample_channels(config, rng.trial(t as u64))?;
            let res = Resolvent::new(&real, params)?;
            Ok((res.transmit_trace(), res.pu_quadratics(&real.f)))
        })
        .collect::<Result<_>>()?;
    let n = n_trials as f64;
    let transmit_trace = per_trial.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mut pu = vec![0.0; config.n_pus];
    for (_, q) in &per_trial {
        for (acc, v) in pu.iter_mut().zip(q) {
            *acc += v;
        }
    }
    pu.iter_mut().for_each(|v| *v /= n);
    let interference = match config.constraint {
        Constraint::PerPu { .. } => InterferenceEstimate::PerPu(pu),
        Constraint::SumPower { .. } => InterferenceEstimate::Sum(pu.iter().sum()),
    };
    Ok(ExpectationEstimate {
        transmit_trace,
        interference,
    })
}

/// `nu` for a fixed `(alpha, beta)`; `None` in per-realization mode.
pub fn normalization(
    config: &NetworkConfig,
    params: &PrecoderParams,
    mode: NuMode,
    rng: RngSpec,
) -> Result<Option<(f64, Binding)>> {
    match mode {
        NuMode::De => {
            let t = de_terms(config, params)?;
            Ok(Some(detequiv::normalization(config, &t)))
        }
        NuMode::Mc { batch } => {
            let est = estimate_expectations(config, params, batch, rng.derive(NU_STREAM_TAG))?;
            est.nu(config).map(Some)
        }
        NuMode::PerRealization => Ok(None),
    }
}

fn trial_sinr(
    config: &NetworkConfig,
    params: &PrecoderParams,
    real: &ChannelRealization,
    nu: Option<f64>,
) -> Result<Vec<f64>> {
    let res = Resolvent::new(real, params)?;
    let nu = match nu {
        Some(v) => v,
        None => {
            let est = ExpectationEstimate {
                transmit_trace: res.transmit_trace(),
                interference: InterferenceEstimate::PerPu(res.pu_quadratics(&real.f)),
            };
            est.nu(config)?.0
        }
    };
    Ok(res.sinr(&real.h, config.rho(), nu))
}

/// Per-trial SINR vectors, in trial order.
pub fn sinr_samples(
    config: &NetworkConfig,
    params: &PrecoderParams,
    n_trials: usize,
    rng: RngSpec,
    mode: NuMode,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    params.validate()?;
    let nu = normalization(config, params, mode, rng)?.map(|(v, _)| v);
    (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let real = sample_channels(config, rng.trial(t as u64))?;
            trial_sinr(config, params, &real, nu)
        })
        .collect()
}

/// Ergodic sum-rate in nats with `nu` from the deterministic equivalents.
pub fn ergodic_sum_rate_mc(
    config: &NetworkConfig,
    params: &PrecoderParams,
    n_trials: usize,
    rng: RngSpec,
) -> Result<McEstimate> {
    ergodic_sum_rate_mc_with(config, params, n_trials, rng, NuMode::De)
}

pub fn ergodic_sum_rate_mc_with(
    config: &NetworkConfig,
    params: &PrecoderParams,
    n_trials: usize,
    rng: RngSpec,
    mode: NuMode,
) -> Result<McEstimate> {
    if n_trials < 2 {
        return Err(invalid(
            "n_trials",
            format!("need at least 2 trials, got {n_trials}"),
        ));
    }
    let rates = sinr_samples(config, params, n_trials, rng, mode)?
        .iter()
        .map(|g| sum_rate_instantaneous(g))
        .collect::<Result<Vec<_>>>()?;
    McEstimate::from_samples(&rates, rng)
}

/// Ergodic rate of each secondary user separately.
pub fn ergodic_rates_mc(
    config: &NetworkConfig,
    params: &PrecoderParams,
    n_trials: usize,
    rng: RngSpec,
    mode: NuMode,
) -> Result<Vec<McEstimate>> {
    if n_trials < 2 {
        return Err(invalid(
            "n_trials",
            format!("need at least 2 trials, got {n_trials}"),
        ));
    }
    let samples = sinr_samples(config, params, n_trials, rng, mode)?;
    (0..config.n_sus)
        .map(|k| {
            let r: Vec<f64> = samples.iter().map(|g| g[k].ln_1p()).collect();
            McEstimate::from_samples(&r, rng)
        })
        .collect()
}

/// Ergodic sum-rate at many `(alpha, beta)` cells with common random numbers:
/// trial `t` uses the same channel draw in every cell.
pub fn sum_rate_grid(
    config: &NetworkConfig,
    cells: &[PrecoderParams],
    n_trials: usize,
    rng: RngSpec,
    mode: NuMode,
) -> Result<Vec<McEstimate>> {
    if n_trials < 2 {
        return Err(invalid(
            "n_trials",
            format!("need at least 2 trials, got {n_trials}"),
        ));
    }
    config.validate()?;
    let nus: Vec<Option<f64>> = cells
        .iter()
        .map(|p| Ok(normalization(config, p, mode, rng)?.map(|(v, _)| v)))
        .collect::<Result<_>>()?;
    let per_trial: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let real = sample_channels(config, rng.trial(t as u64))?;
            cells
                .iter()
                .zip(&nus)
                .map(|(p, nu)| sum_rate_instantaneous(&trial_sinr(config, p, &real, *nu)?))
                .collect()
        })
        .collect::<Result<_>>()?;
    (0..cells.len())
        .map(|c| {
            let col: Vec<f64> = per_trial.iter().map(|row| row[c]).collect();
            McEstimate::from_samples(&col, rng)
        })
        .collect()
}
