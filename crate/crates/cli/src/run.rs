//! Sweeps, optimization runs and CSV emission.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use pprzf::detequiv::de_sinr;
use pprzf::montecarlo::{ergodic_sum_rate_mc_with, normalization, McEstimate};
use pprzf::optimize::{optimize_alpha_given_beta, optimize_joint_with, optimize_mc, McGrid};
use pprzf::{NetworkConfig, PrecoderParams, RngSpec};

use crate::config::{ExperimentSpec, Mode, Objective};

pub const HEADER: &str =
    "snr_db,alpha,beta,de_sum_rate,mc_sum_rate,mc_std_err,binding_constraint,e,t1,t2,nu_bar";

/// Marker written in `binding_constraint` for a cell that failed.
pub const FAILURE_MARKER: &str = "error";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub snr_db: f64,
    pub alpha: f64,
    pub beta: f64,
    pub de_sum_rate: f64,
    pub mc: Option<McEstimate>,
    pub binding: String,
    pub e: f64,
    pub t1: f64,
    pub t2: f64,
    pub nu_bar: f64,
}

/// Output units for rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    fn scale(self, v: f64) -> f64 {
        match self {
            Units::Nats => v,
            Units::Bits => v / std::f64::consts::LN_2,
        }
    }
}

/// Writes the header on creation and flushes after every row, so a run that
/// stops early leaves every finished row on disk.
pub struct CsvSink<W: Write> {
    out: W,
    units: Units,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W, units: Units) -> std::io::Result<Self> {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(
            out,
            "# pprzf {} generated at unix time {stamp}",
            env!("CARGO_PKG_VERSION")
        )?;
        writeln!(out, "{HEADER}")?;
        out.flush()?;
        Ok(Self { out, units })
    }

    pub fn row(&mut self, r: &Row) -> std::io::Result<()> {
        let u = self.units;
        let (mc, se) = match &r.mc {
            Some(m) => (u.scale(m.mean).to_string(), u.scale(m.std_err).to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            self.out,
            "{},{},{},{},{mc},{se},{},{},{},{},{}",
            r.snr_db,
            r.alpha,
            r.beta,
            u.scale(r.de_sum_rate),
            r.binding,
            r.e,
            r.t1,
            r.t2,
            r.nu_bar
        )?;
        self.out.flush()
    }

    /// A row marking a failed cell; unknown parameters are written as NaN.
    pub fn failure(&mut self, snr_db: f64, alpha: f64, beta: f64) -> std::io::Result<()> {
        writeln!(
            self.out,
            "{snr_db},{alpha},{beta},NaN,NaN,NaN,{FAILURE_MARKER},NaN,NaN,NaN,NaN"
        )?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("numerical failure at snr_db={snr_db}: {source}")]
    Numerical {
        snr_db: f64,
        #[source]
        source: pprzf::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Evaluates one `(alpha, beta)` cell: the deterministic equivalent and,
/// when `trials` is set, the Monte-Carlo estimate on stream `rng`.
pub fn evaluate_cell(
    spec: &ExperimentSpec,
    config: &NetworkConfig,
    snr_db: f64,
    params: PrecoderParams,
    trials: Option<usize>,
    rng: RngSpec,
) -> pprzf::Result<Row> {
    let de = de_sinr(config, &params)?;
    let mut binding = de.binding.to_string();
    let mc = match trials {
        Some(n) => {
            if let Some((_, b)) = normalization(config, &params, spec.nu, rng)? {
                binding = b.to_string();
            } else {
                binding = "per_realization".into();
            }
            Some(ergodic_sum_rate_mc_with(config, &params, n, rng, spec.nu)?)
        }
        None => None,
    };
    Ok(Row {
        snr_db,
        alpha: params.alpha,
        beta: params.beta,
        de_sum_rate: de.r_sum_bar,
        mc,
        binding,
        e: de.state.e,
        t1: de.state.t1,
        t2: de.state.t2,
        nu_bar: de.nu_bar,
    })
}

/// The `(alpha, beta)` cells swept at one SNR: the full grid when both grids
/// are given, the best `alpha` per `beta` when only betas are given, and the
/// deterministic-equivalent optimum otherwise.
fn sweep_cells(
    spec: &ExperimentSpec,
    config: &NetworkConfig,
) -> pprzf::Result<Vec<PrecoderParams>> {
    match (&spec.alpha_grid, &spec.beta_grid) {
        (Some(alphas), Some(betas)) => Ok(betas
            .iter()
            .flat_map(|&beta| {
                alphas
                    .iter()
                    .map(move |&alpha| PrecoderParams { alpha, beta })
            })
            .collect()),
        (None, Some(betas)) => betas
            .iter()
            .map(|&beta| {
                if beta >= 1.0 && config.n_pus == config.n_antennas {
                    // Nothing transmits; any alpha gives the same zero rate.
                    return Ok(PrecoderParams { alpha: 1.0, beta });
                }
                Ok(PrecoderParams {
                    alpha: optimize_alpha_given_beta(config, beta)?.0,
                    beta,
                })
            })
            .collect(),
        _ => {
            let opt = optimize_joint_with(config, spec.beta_step)?;
            Ok(vec![PrecoderParams {
                alpha: opt.alpha_opt,
                beta: opt.beta_opt,
            }])
        }
    }
}

/// The Monte-Carlo stream for SNR index `i`. Every cell at one SNR shares it,
/// so cells are compared on common channel draws.
fn snr_stream(spec: &ExperimentSpec, i: usize) -> RngSpec {
    RngSpec::new(spec.seed).derive(i as u64)
}

pub fn run<W: Write>(spec: &ExperimentSpec, sink: &mut CsvSink<W>) -> Result<(), RunError> {
    for (i, &snr_db) in spec.snr_grid_db.iter().enumerate() {
        let config = spec.scenario.at_snr(snr_db);
        let rng = snr_stream(spec, i);
        let fail = |sink: &mut CsvSink<W>, alpha, beta, source| -> Result<(), RunError> {
            sink.failure(snr_db, alpha, beta)?;
            Err(RunError::Numerical { snr_db, source })
        };
        match spec.mode {
            Mode::DeSweep | Mode::McSweep => {
                let trials = (spec.mode == Mode::McSweep).then_some(spec.trials);
                let cells = match sweep_cells(spec, &config) {
                    Ok(c) => c,
                    Err(e) => return fail(sink, f64::NAN, f64::NAN, e),
                };
                for params in cells {
                    match evaluate_cell(spec, &config, snr_db, params, trials, rng) {
                        Ok(row) => sink.row(&row)?,
                        Err(e) => return fail(sink, params.alpha, params.beta, e),
                    }
                }
            }
            Mode::Optimize => {
                let found = match spec.objective {
                    Objective::De => {
                        optimize_joint_with(&config, spec.beta_step).map(|o| (o, None))
                    }
                    Objective::Mc => mc_grid(spec).and_then(|grid| {
                        let o = optimize_mc(&config, spec.trials, &grid, rng, spec.nu)?;
                        let best = o
                            .trace
                            .iter()
                            .find(|p| p.alpha == o.alpha_opt && p.beta == o.beta_opt)
                            .and_then(|p| p.std_err);
                        Ok((o, best))
                    }),
                };
                let (opt, std_err) = match found {
                    Ok(v) => v,
                    Err(e) => return fail(sink, f64::NAN, f64::NAN, e),
                };
                let params = PrecoderParams {
                    alpha: opt.alpha_opt,
                    beta: opt.beta_opt,
                };
                let mut row = match evaluate_cell(spec, &config, snr_db, params, None, rng) {
                    Ok(r) => r,
                    Err(e) => return fail(sink, params.alpha, params.beta, e),
                };
                if let Some(se) = std_err {
                    row.mc = Some(McEstimate {
                        mean: opt.objective,
                        std_err: se,
                        n_trials: spec.trials,
                        seed: rng,
                    });
                }
                sink.row(&row)?;
            }
            Mode::Validate => {}
        }
    }
    Ok(())
}

fn mc_grid(spec: &ExperimentSpec) -> pprzf::Result<McGrid> {
    // The default Monte-Carlo grid is coarse; a dense beta step would multiply
    // the cost of every trial.
    let d = McGrid::default();
    Ok(McGrid {
        alphas: spec.alpha_grid.clone().unwrap_or(d.alphas),
        betas: spec.beta_grid.clone().unwrap_or(d.betas),
    })
}
