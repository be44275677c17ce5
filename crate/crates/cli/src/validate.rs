//! Validation suites: Monte-Carlo probes of the random-matrix identities and
//! closed-form cross-checks of the deterministic equivalents.

use std::io::Write;

use pprzf::detequiv::{beta_one_sinr, beta_zero_sinr, corollary1_sinr, de_sinr, zeta_closed_form};
use pprzf::oracle::{
    appendix_b_quadratic_checks, derivative_consistency_check, lemma4_check, lemma5_check,
    test_matrices, theorem2_check,
};
use pprzf::{CMat, PrecoderParams, RngSpec, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Rmt,
    Appendix,
    Specialcases,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub mc_value: f64,
    pub de_value: f64,
    pub rel_error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.rel_error <= self.tolerance
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    /// Dimension of the random-matrix probes; user and PU counts scale with it.
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Relative tolerance of the Monte-Carlo probes.
    pub tolerance: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            n: 128,
            trials: 200,
            seed: 1,
            tolerance: 0.03,
        }
    }
}

/// Tolerance of identities that hold up to rounding.
const EXACT_TOLERANCE: f64 = 1e-10;

fn p(alpha: f64, beta: f64) -> PrecoderParams {
    PrecoderParams { alpha, beta }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn rmt(o: &ValidateOptions) -> pprzf::Result<Vec<Check>> {
    let n = o.n;
    let k = n / 2;
    let seed = RngSpec::new(o.seed);
    let qs = test_matrices(n, seed.derive(1));
    let square = Scenario::uniform(n, n, n / 2, 1.0, 0.6, 0.0).at_snr(10.0);
    let tall = Scenario::uniform(n, k, n / 2, 1.0, 0.6, 0.0).at_snr(10.0);
    let reference = Scenario::uniform(n, k, 3 * n / 8, 1.0, 0.6, 0.0).at_snr(10.0);
    let t = test_matrices(n, seed.derive(2)).remove(1).1;
    let r = test_matrices(k, seed.derive(3)).remove(1).1;
    let probes = vec![
        theorem2_check(&square, &p(0.5, 0.0), &qs[0].1, o.trials, seed)?,
        theorem2_check(&tall, &p(0.5, 1.0), &qs[0].1, o.trials, seed)?,
        theorem2_check(&reference, &p(0.2, 0.5), &qs[1].1, o.trials, seed)?,
        theorem2_check(&reference, &p(0.2, 0.5), &qs[2].1, o.trials, seed)?,
        lemma5_check(&qs[0].1, 1.0, 0.5, n, o.trials, seed)?,
        lemma5_check(&qs[1].1, 1.0, 0.5, n, o.trials, seed)?,
        lemma4_check(
            &CMat::identity(n, n),
            &CMat::identity(k, k),
            &qs[0].1,
            0.5,
            o.trials,
            seed,
        )?,
        lemma4_check(&t, &r, &qs[1].1, 0.5, o.trials, seed)?,
    ];
    let labels = [
        "c1=1 beta=0 Q=I",
        "c1=2 beta=1 Q=I",
        "beta=0.5 Q=diag",
        "beta=0.5 Q=spike",
        "Q=I",
        "Q=diag",
        "T=I R=I",
        "T,R diag",
    ];
    Ok(probes
        .into_iter()
        .zip(labels)
        .map(|(pr, label)| Check {
            suite: "rmt",
            name: format!("{} ({label})", pr.name),
            mc_value: pr.mc_value,
            de_value: pr.de_value,
            rel_error: pr.rel_error,
            tolerance: o.tolerance,
        })
        .collect())
}

fn appendix(o: &ValidateOptions) -> pprzf::Result<Vec<Check>> {
    let n = o.n;
    let seed = RngSpec::new(o.seed).derive(4);
    let reference = Scenario::uniform(n, n / 2, 3 * n / 8, 1.0, 0.6, 0.0).at_snr(10.0);
    let mut probes = appendix_b_quadratic_checks(&reference, &p(0.2, 0.5), o.trials, seed)?;
    let d = derivative_consistency_check(&reference, &p(0.2, 0.5), o.trials, seed)?;
    let mut checks: Vec<Check> = probes
        .drain(..)
        .map(|pr| Check {
            suite: "appendix",
            name: pr.name,
            mc_value: pr.mc_value,
            de_value: pr.de_value,
            rel_error: pr.rel_error,
            tolerance: o.tolerance,
        })
        .collect();
    // Both sides use the same draws, so only the difference step matters.
    checks.push(Check {
        suite: "appendix",
        name: d.name,
        mc_value: d.mc_value,
        de_value: d.de_value,
        rel_error: d.rel_error,
        tolerance: 1e-6,
    });
    Ok(checks)
}

fn exact(name: String, value: f64, reference: f64) -> Check {
    Check {
        suite: "specialcases",
        name,
        mc_value: value,
        de_value: reference,
        rel_error: rel(value, reference),
        tolerance: EXACT_TOLERANCE,
    }
}

fn special_cases() -> pprzf::Result<Vec<Check>> {
    let mut checks = Vec::new();
    for snr in [0.0, 10.0, 20.0] {
        let cfg = Scenario::uniform(16, 8, 6, 1.0, 0.6, 0.0).at_snr(snr);
        for alpha in [0.05, 0.5] {
            let general = de_sinr(&cfg, &p(alpha, 0.0))?.gamma_bar[0];
            checks.push(exact(
                format!("beta=0 closed form snr={snr} alpha={alpha}"),
                general,
                beta_zero_sinr(&cfg, alpha)?,
            ));
            let general = de_sinr(&cfg, &p(alpha, 1.0))?.gamma_bar[0];
            checks.push(exact(
                format!("beta=1 closed form snr={snr} alpha={alpha}"),
                general,
                beta_one_sinr(&cfg, alpha)?,
            ));
        }
        let square = Scenario::uniform(10, 8, 10, 1.0, 0.6, 0.0).at_snr(snr);
        for beta in [0.0, 0.5, 0.9] {
            let params = p(0.1, beta);
            let general = de_sinr(&square, &params)?.gamma_bar[0];
            checks.push(exact(
                format!("L=N closed form snr={snr} beta={beta}"),
                general,
                corollary1_sinr(&square, &params)?,
            ));
        }
    }
    let z = zeta_closed_form(1.0, 1.0, 0.5)?;
    checks.push(exact("zeta(1,1,0.5)".into(), z.zeta, 1.0));
    let z = zeta_closed_form(0.7, 0.4, 0.03)?;
    checks.push(exact(
        "zeta rearranged vs literal".into(),
        z.zeta,
        z.literal(),
    ));
    Ok(checks)
}

pub fn run_suite(suite: Suite, o: &ValidateOptions) -> pprzf::Result<Vec<Check>> {
    Ok(match suite {
        Suite::Rmt => rmt(o)?,
        Suite::Appendix => appendix(o)?,
        Suite::Specialcases => special_cases()?,
        Suite::All => {
            let mut all = special_cases()?;
            all.extend(rmt(o)?);
            all.extend(appendix(o)?);
            all
        }
    })
}

pub const CHECK_HEADER: &str = "suite,name,mc_value,de_value,rel_error,tolerance,pass";

pub fn write_checks<W: Write>(mut out: W, checks: &[Check]) -> std::io::Result<()> {
    writeln!(out, "{CHECK_HEADER}")?;
    for c in checks {
        writeln!(
            out,
            "{},\"{}\",{},{},{},{},{}",
            c.suite,
            c.name.replace('"', "'"),
            c.mc_value,
            c.de_value,
            c.rel_error,
            c.tolerance,
            c.pass()
        )?;
    }
    out.flush()
}
