//! Desk-scale reproductions of the sum-rate and optimal-parameter figures.
//! Each figure writes one CSV per curve into an output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use pprzf::optimize::{optimize_joint_with, proposition1_relation};
use pprzf::{PrecoderParams, RngSpec, Scenario};

use crate::config::{ExperimentSpec, Mode, Objective};
use crate::run::{evaluate_cell, run, CsvSink, RunError, Units};

pub const DEFAULT_REPRO_TRIALS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
    #[value(name = "5")]
    Five,
    #[value(name = "6")]
    Six,
}

#[derive(Debug, Clone, Copy)]
pub struct ReproOptions {
    pub trials: usize,
    pub seed: u64,
    pub units: Units,
}

fn snr_grid() -> Vec<f64> {
    (0..=8).map(|i| -10.0 + 5.0 * i as f64).collect()
}

fn spec(scenario: Scenario, mode: Mode, o: &ReproOptions) -> ExperimentSpec {
    ExperimentSpec {
        scenario,
        snr_grid_db: snr_grid(),
        trials: o.trials,
        seed: o.seed,
        mode,
        ..ExperimentSpec::default()
    }
}

fn p_name(p_db: f64) -> String {
    format!("p{p_db}")
}

/// The named experiments behind one figure.
pub fn figure_specs(figure: Figure, o: &ReproOptions) -> Vec<(String, ExperimentSpec)> {
    let mut out = Vec::new();
    match figure {
        Figure::Two => {
            for n in [10, 16] {
                for p_db in [-10.0, 0.0] {
                    let s = spec(Scenario::uniform(n, 8, 6, 1.0, 0.6, p_db), Mode::McSweep, o);
                    out.push((format!("n{n}_{}", p_name(p_db)), s));
                }
            }
        }
        Figure::Three => {
            let base = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0);
            out.push(("de_optimum".into(), spec(base.clone(), Mode::McSweep, o)));
            let mut mc = spec(base.clone(), Mode::Optimize, o);
            mc.objective = Objective::Mc;
            out.push(("mc_optimum".into(), mc));
            for beta in [0.0, 1.0] {
                let mut s = spec(base.clone(), Mode::McSweep, o);
                s.beta_grid = Some(vec![beta]);
                out.push((format!("beta{beta}"), s));
            }
        }
        Figure::Four | Figure::Five => {
            for p_db in [-10.0, 0.0] {
                let base = Scenario::uniform(16, 8, 6, 1.0, 0.6, p_db);
                out.push((
                    format!("{}_de", p_name(p_db)),
                    spec(base.clone(), Mode::Optimize, o),
                ));
                let mut mc = spec(base, Mode::Optimize, o);
                mc.objective = Objective::Mc;
                out.push((format!("{}_mc", p_name(p_db)), mc));
            }
        }
        Figure::Six => {}
    }
    out
}

fn create(
    dir: &Path,
    name: &str,
    units: Units,
) -> Result<(CsvSink<BufWriter<File>>, PathBuf), RunError> {
    let path = dir.join(format!("{name}.csv"));
    let sink = CsvSink::new(BufWriter::new(File::create(&path)?), units)?;
    Ok((sink, path))
}

/// Sum-rate along the optimal curve `alpha(beta)` of the square
/// primary-channel case, next to the joint optimum.
fn figure_six(dir: &Path, o: &ReproOptions) -> Result<Vec<PathBuf>, RunError> {
    let s = spec(
        Scenario::uniform(10, 8, 10, 1.0, 0.6, 0.0),
        Mode::McSweep,
        o,
    );
    let mut written = Vec::new();
    for beta in [0.0, 0.2, 0.4, 0.6, 0.8] {
        let (mut sink, path) = create(dir, &format!("curve_beta{beta}"), o.units)?;
        for (i, &snr_db) in s.snr_grid_db.iter().enumerate() {
            let cfg = s.scenario.at_snr(snr_db);
            let rng = RngSpec::new(s.seed).derive(i as u64);
            let cell = proposition1_relation(&cfg, beta).and_then(|alpha| {
                evaluate_cell(
                    &s,
                    &cfg,
                    snr_db,
                    PrecoderParams { alpha, beta },
                    Some(s.trials),
                    rng,
                )
            });
            match cell {
                Ok(row) => sink.row(&row)?,
                Err(source) => {
                    sink.failure(snr_db, f64::NAN, beta)?;
                    return Err(RunError::Numerical { snr_db, source });
                }
            }
        }
        written.push(path);
    }
    let (mut sink, path) = create(dir, "de_optimum", o.units)?;
    run(&s, &mut sink)?;
    written.push(path);
    // The joint search on a beta grid is also written, to show that it lands
    // on the curve.
    let cfg = s.scenario.at_snr(10.0);
    if let Ok(opt) = optimize_joint_with(&cfg, s.beta_step) {
        let on_curve = proposition1_relation(&cfg, opt.beta_opt.min(0.99)).unwrap_or(f64::NAN);
        eprintln!(
            "figure 6: joint optimum at 10 dB alpha={:.4e} beta={:.2}; curve alpha at that beta {:.4e}",
            opt.alpha_opt, opt.beta_opt, on_curve
        );
    }
    Ok(written)
}

pub fn reproduce(figure: Figure, dir: &Path, o: &ReproOptions) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir)?;
    if figure == Figure::Six {
        return figure_six(dir, o);
    }
    let mut written = Vec::new();
    for (name, s) in figure_specs(figure, o) {
        let (mut sink, path) = create(dir, &name, o.units)?;
        run(&s, &mut sink)?;
        written.push(path);
    }
    Ok(written)
}
