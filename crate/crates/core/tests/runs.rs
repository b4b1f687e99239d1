use std::io::Write;

use lexcast_core::experiment::{self, simulate, ComparatorSpec, ExperimentConfig};
use lexcast_core::protocol::read_round_log;
use lexcast_core::registry::Selector;
use lexcast_core::{Branch, Forecast};

fn generators() -> Vec<Selector> {
    vec![
        Selector::named("iid_logistic").with("weights", serde_json::json!([0.2, 2.5, -1.0])),
        Selector::named("deterministic")
            .with("rule", "x>0.1")
            .with("noise_rate", 0.1),
        Selector::named("adversarial"),
    ]
}

fn config(game: &str, generator: Selector, horizon: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        game: Selector::named(game),
        kernel: Selector::named("sobolev"),
        generator,
        horizon,
        seed,
        comparators: vec![
            ComparatorSpec::Zero,
            ComparatorSpec::Random {
                centers: 5,
                norm: 1.0,
                seed: None,
            },
            ComparatorSpec::Matched,
        ],
        epsilon_root: 1e-9,
        grid_size: None,
    }
}

#[test]
fn runs_satisfy_round_invariants() {
    for game in ["square", "absolute", "log"] {
        for generator in generators() {
            let name = generator.name.clone();
            let o = simulate(&config(game, generator, 300, 17)).unwrap();
            let g = o.engine.game();
            let st = o.engine.forecaster();
            assert!(o.report.all_pass, "{game}/{name}");
            assert!((st.agg_a() - st.recompute_agg_a()).abs() <= 1e-9);
            let logged: f64 = o.engine.round_log().iter().map(|r| r.loss).sum();
            assert!((logged - o.engine.cumulative_loss()).abs() <= 1e-9);
            for r in o.engine.round_log() {
                let f = Forecast { p: r.p, q: r.q };
                assert!(g.check_forecast(f).is_ok());
                let d = g.canonical_choice(f).unwrap();
                assert_eq!(d.gamma, r.gamma);
                let identity =
                    d.loss(r.y) - d.expected_loss(r.p) - (r.y as f64 - r.p) * d.exposure();
                assert!(identity.abs() <= 1e-12, "{game}/{name}: {identity}");
                if r.branch == Branch::Root {
                    assert!(r.s_residual <= 1e-9);
                }
                if game == "log" {
                    assert!(r.p > 0.0 && r.p < 1.0);
                }
                if game == "absolute" && r.q != 0.5 {
                    assert!(r.p == 0.5 || r.branch != Branch::Root, "{r:?}");
                }
            }
        }
    }
}

#[test]
fn replay_of_a_round_log_reproduces_forecasts() {
    let dir = tempfile::tempdir().unwrap();
    for game in ["square", "absolute", "log"] {
        let first = dir.path().join(format!("{game}_first"));
        let cfg = config(game, generators()[0].clone(), 120, 3);
        let a = experiment::run(&cfg, &first).unwrap();
        let replay_cfg = ExperimentConfig {
            generator: Selector::named("replay")
                .with("file", a.round_log_path.to_string_lossy().as_ref()),
            ..cfg
        };
        let b = experiment::run(&replay_cfg, &dir.path().join(format!("{game}_replay"))).unwrap();
        let la = read_round_log(&a.round_log_path).unwrap();
        let lb = read_round_log(&b.round_log_path).unwrap();
        assert_eq!(la, lb, "{game}");
    }
}

#[test]
fn relative_replay_paths_resolve_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = std::fs::File::create(dir.path().join("data.csv")).unwrap();
    writeln!(data, "x,y\n0.5,1\n-0.5,0\n0.25,1").unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{"game":"square","kernel":"sobolev","generator":{"name":"replay","file":"data.csv"},"horizon":3,"seed":0}"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let o = simulate(&cfg).unwrap();
    assert_eq!(o.engine.rounds(), 3);

    let too_long = ExperimentConfig { horizon: 4, ..cfg };
    assert!(simulate(&too_long).is_err());
}

#[test]
fn custom_and_gaussian_runs_certify() {
    let boundary = serde_json::json!([[0.0, 2.0], [0.3, 0.9], [1.0, 0.4], [2.0, 0.0]]);
    let cfg = ExperimentConfig {
        game: Selector::named("custom").with("boundary", boundary),
        kernel: Selector::named("gaussian").with("width", 0.4),
        ..config("square", generators()[1].clone(), 250, 9)
    };
    let o = simulate(&cfg).unwrap();
    assert!(o.report.all_pass, "{:#?}", o.report.regret);
}

#[test]
fn identical_configs_give_identical_logs() {
    for generator in generators() {
        let cfg = config("absolute", generator, 80, 99);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.engine.round_log(), b.engine.round_log());
        assert_eq!(a.report, b.report);
    }
}
