//! Channel model, reproducible random streams and the partial projection
//! onto the null space of the primary-user channels.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_solve, symmetrize, CMat};

/// Average interference constraint protecting the primary users.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `E[f_l^H G G^H f_l] <= theta_l P_T` for every primary user.
    PerPu { thetas: Vec<f64> },
    /// `E[tr(F G G^H F^H)] <= theta_all P_T`.
    SumPower { theta_all: f64 },
}

/// Dimensions, path gains and power budgets of one cognitive-radio downlink.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Transmit antennas at the secondary base station (`N`).
    pub n_antennas: usize,
    /// Secondary users (`K`).
    pub n_sus: usize,
    /// Primary users (`L`), at most `N`.
    pub n_pus: usize,
    /// Path gains to the secondary users.
    pub r1: Vec<f64>,
    /// Path gains to the primary users.
    pub r2: Vec<f64>,
    /// Noise variance.
    pub sigma2: f64,
    /// Transmit power budget, linear scale.
    pub p_t: f64,
    pub constraint: Constraint,
}

fn positive_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let (n, k, l) = (self.n_antennas, self.n_sus, self.n_pus);
        if n == 0 || k == 0 || l == 0 {
            return Err(Error::InvalidConfig(format!(
                "dimensions must be positive (N={n}, K={k}, L={l})"
            )));
        }
        if l > n {
            return Err(Error::InvalidConfig(format!(
                "more primary users than antennas (L={l} > N={n})"
            )));
        }
        if self.r1.len() != k {
            return Err(Error::InvalidConfig(format!(
                "r1 has {} entries, expected K={k}",
                self.r1.len()
            )));
        }
        if self.r2.len() != l {
            return Err(Error::InvalidConfig(format!(
                "r2 has {} entries, expected L={l}",
                self.r2.len()
            )));
        }
        for &g in &self.r1 {
            positive_finite("r1", g)?;
        }
        for &g in &self.r2 {
            positive_finite("r2", g)?;
        }
        positive_finite("sigma2", self.sigma2)?;
        positive_finite("p_t", self.p_t)?;
        match &self.constraint {
            Constraint::PerPu { thetas } => {
                if thetas.len() != l {
                    return Err(Error::InvalidConfig(format!(
                        "per-PU constraint has {} thresholds, expected L={l}",
                        thetas.len()
                    )));
                }
                for &t in thetas {
                    positive_finite("theta", t)?;
                }
            }
            Constraint::SumPower { theta_all } => positive_finite("theta_all", *theta_all)?,
        }
        if !self.interference_ratio().is_finite() {
            return Err(Error::InvalidConfig(
                "path-gain to threshold ratio overflows".into(),
            ));
        }
        Ok(())
    }

    /// `c1 = N / K`.
    pub fn c1(&self) -> f64 {
        self.n_antennas as f64 / self.n_sus as f64
    }

    /// `c2 = L / N`.
    pub fn c2(&self) -> f64 {
        self.n_pus as f64 / self.n_antennas as f64
    }

    /// Transmit SNR `rho = P_T / sigma^2`.
    pub fn rho(&self) -> f64 {
        self.p_t / self.sigma2
    }

    /// The largest `r_{2,l} / theta_l` (per-PU) or `tr(R2) / theta_all` (sum).
    pub fn interference_ratio(&self) -> f64 {
        match &self.constraint {
            Constraint::PerPu { thetas } => self
                .r2
                .iter()
                .zip(thetas)
                .map(|(r, t)| r / t)
                .fold(f64::NEG_INFINITY, f64::max),
            Constraint::SumPower { theta_all } => self.r2.iter().sum::<f64>() / theta_all,
        }
    }

    /// `max{1, interference_ratio}`; the power back-off of plain RZF.
    pub fn nu0(&self) -> f64 {
        self.interference_ratio().max(1.0)
    }

    /// The common path gain when every `r_{1,k}` is equal.
    pub fn uniform_r1(&self) -> Option<f64> {
        let first = *self.r1.first()?;
        self.r1.iter().all(|&r| r == first).then_some(first)
    }
}

/// A seed plus a substream index. Equal specs reproduce equal draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    /// The generator for this spec. ChaCha streams are independent counters,
    /// so any stream can be produced without touching the others.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Substream for trial `t` of a batch rooted at `self`.
    pub fn trial(&self, t: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: self.stream_id.wrapping_add(t),
        }
    }

    /// A statistically unrelated family of streams, keyed by `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        let seed = splitmix64(self.seed ^ splitmix64(self.stream_id ^ splitmix64(tag)));
        Self { seed, stream_id: 0 }
    }
}

/// One draw of the secondary and primary channels.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// `K x N`; row `k` is `h_k^H`.
    pub h: CMat,
    /// `L x N`; row `l` is `f_l^H`.
    pub f: CMat,
    /// `W^H W = F^H (F F^H)^{-1} F`, the orthogonal projector onto the row
    /// space of `F`.
    pub gram: CMat,
}

impl ChannelRealization {
    /// Builds a realization from explicit channel matrices.
    pub fn from_matrices(h: CMat, f: CMat) -> Result<Self> {
        if h.ncols() != f.ncols() {
            return Err(Error::Dimension(format!(
                "H has {} columns but F has {}",
                h.ncols(),
                f.ncols()
            )));
        }
        if f.nrows() > f.ncols() {
            return Err(Error::Dimension("F has more rows than columns".into()));
        }
        let gram = projector_onto_rows(&f)?;
        Ok(Self { h, f, gram })
    }

    pub fn n_antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_sus(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_pus(&self) -> usize {
        self.f.nrows()
    }
}

/// `F^H (F F^H)^{-1} F`, solved through a Cholesky factorization of `F F^H`.
pub fn projector_onto_rows(f: &CMat) -> Result<CMat> {
    let ffh = f * f.adjoint();
    let solved = hermitian_solve(&ffh, f).map_err(|_| {
        Error::Singular(format!(
            "F F^H ({0}x{0}) is singular; primary-user channels are linearly dependent",
            f.nrows()
        ))
    })?;
    let mut gram = f.ad_mul(&solved);
    symmetrize(&mut gram);
    Ok(gram)
}

/// Fills an `rows x cols` matrix with circularly-symmetric complex Gaussians;
/// row `i` has per-entry variance `gains[i] / cols`.
pub(crate) fn gaussian_rows<R: Rng>(rng: &mut R, gains: &[f64], cols: usize) -> CMat {
    let rows = gains.len();
    let mut m = CMat::zeros(rows, cols);
    for (i, &g) in gains.iter().enumerate() {
        let scale = (g / cols as f64).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..cols {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            m[(i, j)] = Complex64::new(x * scale, y * scale);
        }
    }
    m
}

/// Draws `H = R1^{1/2} H~` and `F = R2^{1/2} F~` with i.i.d. unit-variance
/// Gaussian entries scaled by `1/sqrt(N)`, and the projector `W^H W`.
pub fn sample_channels(config: &NetworkConfig, rng: RngSpec) -> Result<ChannelRealization> {
    config.validate()?;
    let mut gen = rng.rng();
    let n = config.n_antennas;
    let h = gaussian_rows(&mut gen, &config.r1, n);
    let f = gaussian_rows(&mut gen, &config.r2, n);
    ChannelRealization::from_matrices(h, f)
}

/// `H (I - beta W^H W)`. Returns `H` unchanged for `beta = 0`.
pub fn partially_project(real: &ChannelRealization, beta: f64) -> Result<CMat> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(invalid("beta", format!("must lie in [0, 1], got {beta}")));
    }
    if beta == 0.0 {
        return Ok(real.h.clone());
    }
    let mut hc = &real.h * &real.gram;
    hc *= Complex64::new(-beta, 0.0);
    hc += &real.h;
    Ok(hc)
}
