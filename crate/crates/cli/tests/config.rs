use pprzf::montecarlo::NuMode;
use pprzf::{ConstraintCase, Scenario};
use pprzf_cli::config::{parse, serialize, ExperimentSpec, Mode, Objective};
use proptest::prelude::*;

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (1usize..64, 1usize..24)
        .prop_flat_map(|(n, k)| (Just(n), Just(k), 1..=n))
        .prop_flat_map(|(n, k, l)| {
            (
                prop::collection::vec(finite(0.01, 5.0), k),
                prop::collection::vec(finite(0.01, 5.0), l),
                finite(0.01, 10.0),
                finite(-30.0, 30.0),
                any::<bool>(),
            )
                .prop_map(move |(r1, r2, sigma2, p_db, sum)| Scenario {
                    n_antennas: n,
                    n_sus: k,
                    n_pus: l,
                    r1,
                    r2,
                    sigma2,
                    p_db,
                    case: if sum {
                        ConstraintCase::Sum
                    } else {
                        ConstraintCase::PerPu
                    },
                })
        })
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![
        Just(Mode::DeSweep),
        Just(Mode::McSweep),
        Just(Mode::Optimize),
        Just(Mode::Validate)
    ]
}

fn nu() -> impl Strategy<Value = NuMode> {
    prop_oneof![
        Just(NuMode::De),
        Just(NuMode::PerRealization),
        (2usize..100_000).prop_map(|batch| NuMode::Mc { batch })
    ]
}

prop_compose! {
    fn spec()(scenario in scenario(),
              snr in prop::collection::vec(finite(-40.0, 40.0), 1..12),
              alphas in prop::collection::vec(finite(1e-6, 1e3), 1..6),
              betas in prop::option::of(prop::collection::vec(finite(0.0, 1.0), 1..6)),
              with_alpha in any::<bool>(),
              trials in 2usize..1_000_000, seed in any::<u64>(), mode in mode(),
              mc in any::<bool>(), nu in nu(), beta_step in finite(1e-3, 1.0),
              output in "[a-zA-Z0-9_./-]{1,24}") -> ExperimentSpec {
        ExperimentSpec {
            scenario,
            snr_grid_db: snr,
            alpha_grid: (with_alpha && betas.is_some()).then_some(alphas),
            beta_grid: betas,
            trials,
            seed,
            mode,
            objective: if mc { Objective::Mc } else { Objective::De },
            nu,
            beta_step,
            output_path: output,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialized_specs_parse_back_identically(s in spec()) {
        let text = serialize(&s);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, s);
    }
}

#[test]
fn defaults_and_broadcast() {
    let s = parse(
        "# fig 2 network\n\
         network.n = 10   # antennas\n\
         network.r1 = 1\n\
         network.r2 = 0.6\n\
         constraint.p_db = -10\n\
         sweep.snr_db = [-10, 0, 10]\n",
    )
    .unwrap();
    assert_eq!(s.scenario, Scenario::uniform(10, 8, 6, 1.0, 0.6, -10.0));
    assert_eq!(s.snr_grid_db, vec![-10.0, 0.0, 10.0]);
    assert_eq!(s.mode, Mode::McSweep);
    assert_eq!(s.trials, 10_000);
    assert_eq!(parse("").unwrap(), ExperimentSpec::default());
}

fn field_of(text: &str) -> String {
    parse(text).unwrap_err().field
}

#[test]
fn errors_name_the_field() {
    assert_eq!(field_of("sweep.snr_db = []"), "sweep.snr_db");
    assert_eq!(field_of("network.bogus = 3"), "network.bogus");
    assert_eq!(field_of("network.n = four"), "network.n");
    assert_eq!(field_of("network.n = 4\nnetwork.l = 6"), "network.l");
    assert_eq!(field_of("network.r1 = [1, 2]"), "network.r1");
    assert_eq!(field_of("network.r2 = [1, -1, 1, 1, 1, 1]"), "network.r2");
    assert_eq!(field_of("sweep.alpha = [0.1]"), "sweep.beta");
    assert_eq!(
        field_of("sweep.alpha = [0]\nsweep.beta = [0]"),
        "sweep.alpha"
    );
    assert_eq!(field_of("sweep.beta = [1.5]"), "sweep.beta");
    assert_eq!(field_of("run.trials = 1"), "run.trials");
    assert_eq!(field_of("run.mode = fast"), "run.mode");
    assert_eq!(field_of("run.seed = 1\nrun.seed = 2"), "run.seed");
    assert_eq!(field_of("constraint.kind = total"), "constraint.kind");
    assert_eq!(field_of("network.sigma2 = nan"), "network.sigma2");
    assert!(parse("network.n 16")
        .unwrap_err()
        .field
        .starts_with("line 1"));
    // Validation mode needs no SNR grid; de sweeps need no trials.
    assert!(parse("run.mode = validate\nsweep.snr_db = []").is_ok());
    assert!(parse("run.mode = de_sweep\nrun.trials = 0").is_ok());
}
