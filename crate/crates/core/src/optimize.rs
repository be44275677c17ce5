//! Choice of `(alpha, beta)`: nested line searches on the deterministic
//! sum-rate, the closed-form optimal curve of the `L = N` regime and a
//! brute-force Monte-Carlo grid used as reference.

use rayon::prelude::*;

use crate::channel::{NetworkConfig, RngSpec};
use crate::detequiv::de_sum_rate;
use crate::error::{invalid, Error, Result};
use crate::montecarlo::{sum_rate_grid, NuMode};
use crate::precoder::PrecoderParams;

pub const ALPHA_MIN: f64 = 1e-6;
pub const ALPHA_MAX: f64 = 1e3;
const COARSE_POINTS: usize = 64;
const GOLDEN_REL_WIDTH: f64 = 1e-6;

/// One probe of an optimizer: the best `alpha` found for `beta` and its
/// objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRecord {
    pub beta: f64,
    pub alpha: f64,
    pub objective: f64,
    /// Present for Monte-Carlo objectives.
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub alpha_opt: f64,
    pub beta_opt: f64,
    pub objective: f64,
    pub trace: Vec<ProbeRecord>,
}

/// Points `lo * (hi/lo)^(i/(n-1))`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `{0, step, 2 step, ..., 1}`; `step` must divide 1 up to rounding.
pub fn beta_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(invalid(
            "beta_step",
            format!("must lie in (0, 1], got {step}"),
        ));
    }
    let n = (1.0 / step).round() as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

fn objective(config: &NetworkConfig, alpha: f64, beta: f64) -> f64 {
    match de_sum_rate(config, &PrecoderParams { alpha, beta }) {
        Ok(v) if v.is_finite() => v,
        _ => f64::NEG_INFINITY,
    }
}

/// Maximizes the deterministic sum-rate over `alpha` for fixed `beta`:
/// a 64-point log grid on `[1e-6, 1e3]`, then golden-section search in
/// `ln(alpha)` around the best grid point. The refined point replaces the
/// grid point only if it is at least as good. Returns `(alpha, objective)`.
pub fn optimize_alpha_given_beta(config: &NetworkConfig, beta: f64) -> Result<(f64, f64)> {
    config.validate()?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid("beta", format!("must lie in [0, 1], got {beta}")));
    }
    let grid = log_grid(ALPHA_MIN, ALPHA_MAX, COARSE_POINTS);
    let values: Vec<f64> = grid.iter().map(|&a| objective(config, a, beta)).collect();
    let (best, &best_val) =
        values
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| {
                if *v > *acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
    if best_val == f64::NEG_INFINITY {
        return Err(Error::NonFiniteObjective);
    }

    let mut lo = grid[best.saturating_sub(1)].ln();
    let mut hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let f = |x: f64| objective(config, x.exp(), beta);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    // Width in ln(alpha) equals relative width in alpha to first order.
    while hi - lo > GOLDEN_REL_WIDTH {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    if fx >= best_val {
        Ok((x.exp(), fx))
    } else {
        Ok((grid[best], best_val))
    }
}

pub fn optimize_joint(config: &NetworkConfig) -> Result<OptResult> {
    optimize_joint_with(config, 0.01)
}

/// Exhaustive search over the `beta` grid with an `alpha` line search at
/// each point. Ties keep the smallest `beta`.
pub fn optimize_joint_with(config: &NetworkConfig, beta_step: f64) -> Result<OptResult> {
    config.validate()?;
    let betas = beta_grid(beta_step)?;
    let probes: Vec<Option<ProbeRecord>> = betas
        .par_iter()
        .map(|&beta| {
            optimize_alpha_given_beta(config, beta)
                .ok()
                .map(|(alpha, objective)| ProbeRecord {
                    beta,
                    alpha,
                    objective,
                    std_err: None,
                })
        })
        .collect();
    let trace: Vec<ProbeRecord> = probes.into_iter().flatten().collect();
    best_of(trace)
}

fn best_of(trace: Vec<ProbeRecord>) -> Result<OptResult> {
    let best = trace
        .iter()
        .filter(|r| r.objective.is_finite())
        .fold(None::<&ProbeRecord>, |acc, r| match acc {
            Some(b) if b.objective >= r.objective => Some(b),
            _ => Some(r),
        })
        .copied()
        .ok_or(Error::NonFiniteObjective)?;
    Ok(OptResult {
        alpha_opt: best.alpha,
        beta_opt: best.beta,
        objective: best.objective,
        trace,
    })
}

/// The curve of asymptotically optimal `(alpha, beta)` pairs when `L = N`
/// and all secondary users share one path gain:
/// `alpha = max{1, interference_ratio} (1 - beta)^2 / (rho c1)`.
pub fn proposition1_relation(config: &NetworkConfig, beta: f64) -> Result<f64> {
    config.validate()?;
    if config.n_pus != config.n_antennas {
        return Err(Error::Regime(format!(
            "the optimal curve needs L = N, got L={} N={}",
            config.n_pus, config.n_antennas
        )));
    }
    if config.uniform_r1().is_none() {
        return Err(Error::Regime(
            "the optimal curve needs equal secondary path gains".into(),
        ));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(invalid("beta", format!("must lie in [0, 1), got {beta}")));
    }
    Ok(config.nu0() * (1.0 - beta).powi(2) / (config.rho() * config.c1()))
}

/// Cells of the Monte-Carlo reference optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct McGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for McGrid {
    fn default() -> Self {
        Self {
            alphas: log_grid(1e-4, 10.0, 16),
            betas: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

/// Argmax of the Monte-Carlo sum-rate over `grid`, using the same channel
/// draws in every cell. The trace lists every cell with its standard error.
pub fn optimize_mc(
    config: &NetworkConfig,
    n_trials: usize,
    grid: &McGrid,
    rng: RngSpec,
    mode: NuMode,
) -> Result<OptResult> {
    if grid.alphas.is_empty() || grid.betas.is_empty() {
        return Err(invalid("grid", "needs at least one alpha and one beta"));
    }
    let cells: Vec<PrecoderParams> = grid
        .betas
        .iter()
        .flat_map(|&beta| {
            grid.alphas
                .iter()
                .map(move |&alpha| PrecoderParams { alpha, beta })
        })
        .map(|p| p.validate().map(|_| p))
        .collect::<Result<_>>()?;
    let estimates = sum_rate_grid(config, &cells, n_trials, rng, mode)?;
    let trace = cells
        .iter()
        .zip(&estimates)
        .map(|(p, e)| ProbeRecord {
            beta: p.beta,
            alpha: p.alpha,
            objective: e.mean,
            std_err: Some(e.std_err),
        })
        .collect();
    best_of(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn grids() {
        let g = log_grid(1e-6, 1e3, 64);
        assert_eq!(g.len(), 64);
        assert!((g[0] - 1e-6).abs() < 1e-18 && (g[63] - 1e3).abs() < 1e-9);
        let b = beta_grid(0.01).unwrap();
        assert_eq!(b.len(), 101);
        assert_eq!(b[100], 1.0);
        assert!(beta_grid(0.0).is_err());
    }

    #[test]
    fn relation_hand_values() {
        // N = L = K = 4, unit gains, rho = 1, no interference pressure.
        let mut cfg = Scenario::uniform(4, 4, 4, 1.0, 0.6, 10.0).at_snr(0.0);
        assert_eq!(cfg.nu0(), 1.0);
        assert!((proposition1_relation(&cfg, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((proposition1_relation(&cfg, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(proposition1_relation(&cfg, 1.0).is_err());
        cfg.n_pus = 3;
        cfg.r2.pop();
        if let crate::channel::Constraint::PerPu { thetas } = &mut cfg.constraint {
            thetas.pop();
        }
        assert!(matches!(
            proposition1_relation(&cfg, 0.2),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn alpha_search_finds_known_extremes() {
        let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(10.0);
        let (a0, _) = optimize_alpha_given_beta(&cfg, 0.0).unwrap();
        let expect0 = cfg.nu0() / (cfg.c1() * cfg.rho());
        assert!((a0 / expect0 - 1.0).abs() < 0.02, "{a0} vs {expect0}");
        let (a1, _) = optimize_alpha_given_beta(&cfg, 1.0).unwrap();
        let expect1 = 1.0 / (cfg.c1() * cfg.rho());
        assert!((a1 / expect1 - 1.0).abs() < 0.02, "{a1} vs {expect1}");
    }

    #[test]
    fn joint_trace_dominated_by_optimum() {
        let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(10.0);
        let opt = optimize_joint_with(&cfg, 0.05).unwrap();
        assert_eq!(opt.trace.len(), 21);
        assert!(opt.trace.iter().all(|r| r.objective <= opt.objective));
    }
}
