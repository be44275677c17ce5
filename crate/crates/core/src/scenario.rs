//! SNR-parameterized network descriptions.
//!
//! Experiments sweep the transmit SNR while the primary users' interference
//! threshold stays fixed in absolute terms, so the threshold-to-budget ratio
//! `theta` changes with SNR. Noise variance is held at `sigma2` and the budget
//! is `P_T = sigma2 * 10^(snr_db / 10)`.

use crate::channel::{Constraint, NetworkConfig};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintCase {
    PerPu,
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_antennas: usize,
    pub n_sus: usize,
    pub n_pus: usize,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub sigma2: f64,
    /// Interference threshold per primary user, in dB (absolute power).
    pub p_db: f64,
    pub case: ConstraintCase,
}

impl Scenario {
    /// Equal path gains for every user, per-PU constraint, unit noise.
    pub fn uniform(n: usize, k: usize, l: usize, r1: f64, r2: f64, p_db: f64) -> Self {
        Self {
            n_antennas: n,
            n_sus: k,
            n_pus: l,
            r1: vec![r1; k],
            r2: vec![r2; l],
            sigma2: 1.0,
            p_db,
            case: ConstraintCase::PerPu,
        }
    }

    pub fn with_case(mut self, case: ConstraintCase) -> Self {
        self.case = case;
        self
    }

    /// The network at transmit SNR `snr_db`. In the sum case the total
    /// threshold is `L` times the per-user one.
    pub fn at_snr(&self, snr_db: f64) -> NetworkConfig {
        let p_t = self.sigma2 * db_to_linear(snr_db);
        let p = db_to_linear(self.p_db);
        let constraint = match self.case {
            ConstraintCase::PerPu => Constraint::PerPu {
                thetas: vec![p / p_t; self.n_pus],
            },
            ConstraintCase::Sum => Constraint::SumPower {
                theta_all: self.n_pus as f64 * p / p_t,
            },
        };
        NetworkConfig {
            n_antennas: self.n_antennas,
            n_sus: self.n_sus,
            n_pus: self.n_pus,
            r1: self.r1.clone(),
            r2: self.r2.clone(),
            sigma2: self.sigma2,
            p_t,
            constraint,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_track_snr() {
        let s = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0);
        let cfg = s.at_snr(20.0);
        assert!((cfg.rho() - 100.0).abs() < 1e-9);
        match cfg.constraint {
            Constraint::PerPu { ref thetas } => assert!((thetas[0] - 0.01).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert!((cfg.nu0() - 60.0).abs() < 1e-9);
        cfg.validate().unwrap();
    }

    #[test]
    fn sum_case_scales_with_l() {
        let s = Scenario::uniform(16, 8, 6, 1.0, 0.6, -10.0).with_case(ConstraintCase::Sum);
        let cfg = s.at_snr(0.0);
        match cfg.constraint {
            Constraint::SumPower { theta_all } => assert!((theta_all - 0.6).abs() < 1e-12),
            _ => unreachable!(),
        }
    }
}
