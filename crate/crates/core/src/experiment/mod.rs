//! Config-driven experiment runs and their artifacts.
//!
//! A run builds the game, kernel and generator from the registries, plays the
//! protocol for `horizon` rounds, evaluates the configured comparators, and
//! writes `round_log.csv` and `report.json`.

pub mod comparators;
pub mod generators;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};
use crate::forecaster::{ForecasterState, SolverConfig};
use crate::game::{Constant, Game};
use crate::kernel::Kernel;
use crate::protocol::{read_round_log, Comparator, Engine, RegretReport, RoundRecord};
use crate::registry::{self, Selector};

pub use comparators::ComparatorSpec;
use generators::Generator;

pub const ROUND_LOG_FILE: &str = "round_log.csv";
pub const REPORT_FILE: &str = "report.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: Selector,
    pub kernel: Selector,
    pub generator: Selector,
    pub horizon: usize,
    pub seed: u64,
    #[serde(default)]
    pub comparators: Vec<ComparatorSpec>,
    #[serde(default = "default_epsilon")]
    pub epsilon_root: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
}

fn default_epsilon() -> f64 {
    SolverConfig::default().epsilon_root
}

impl ExperimentConfig {
    /// Reads a JSON config; a relative replay `file` is resolved against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        if let Some(Value::String(file)) = cfg.generator.params.get("file") {
            let p = Path::new(file);
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                let joined = base.join(p).to_string_lossy().into_owned();
                cfg.generator
                    .params
                    .insert("file".into(), Value::String(joined));
            }
        }
        Ok(cfg)
    }

    pub fn solver(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            epsilon_root: self.epsilon_root,
            grid_size: self.grid_size.unwrap_or(d.grid_size),
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        self.solver().validate()?;
        for c in &self.comparators {
            c.validate()?;
        }
        Ok(())
    }
}

/// Game, kernel and generator instantiated from a config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub game: Arc<dyn Game>,
    pub kernel: Arc<dyn Kernel>,
    pub generator: Arc<dyn Generator>,
}

impl Setup {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let setup = Setup {
            game: registry::games().build(&cfg.game)?,
            kernel: registry::kernels().build(&cfg.kernel)?,
            generator: registry::generators().build(&cfg.generator)?,
        };
        if let Some(max) = setup.generator.max_horizon() {
            if cfg.horizon > max {
                return Err(invalid(format!(
                    "horizon {} exceeds the {max} rows available to {}",
                    cfg.horizon,
                    setup.generator.name()
                )));
            }
        }
        Ok(setup)
    }
}

/// Regret of every comparator after `n` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub own_loss: f64,
    pub comparator_loss: Vec<f64>,
    pub regret: Vec<f64>,
    pub bound: Vec<Constant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub game: String,
    pub kernel: String,
    pub generator: String,
    pub regret: RegretReport,
    pub regret_curve: Vec<CurvePoint>,
    pub all_pass: bool,
}

/// A completed run held in memory.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub engine: Engine,
    pub comparators: Vec<Comparator>,
    pub report: RunReport,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub round_log_path: PathBuf,
    pub report_path: PathBuf,
    pub report: RunReport,
}

/// Why a run stopped before its horizon.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    /// Forecaster state at the failure, for the diagnostic dump.
    pub engine: Option<Box<Engine>>,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure {
            error,
            engine: None,
        }
    }
}

/// Plays the protocol and evaluates comparators without touching the disk.
pub fn simulate(cfg: &ExperimentConfig) -> std::result::Result<RunOutcome, RunFailure> {
    cfg.validate()?;
    let setup = Setup::from_config(cfg)?;
    let state =
        ForecasterState::with_config(setup.game.clone(), setup.kernel.clone(), cfg.solver())?;
    let mut engine = Engine::new(state);
    for n in 1..=cfg.horizon {
        let step = (|| -> Result<()> {
            let x = setup.generator.datum(cfg.seed, n)?;
            engine.decide(x.clone())?;
            let p = engine.pending_forecast().expect("pending").p;
            let y = setup.generator.outcome(cfg.seed, n, &x, p)?;
            engine.observe(y)
        })();
        if let Err(error) = step {
            return Err(RunFailure {
                error,
                engine: Some(Box::new(engine)),
            });
        }
    }

    let log = engine.round_log();
    let xs: Vec<_> = log.iter().map(|r| r.x.clone()).collect();
    let ys: Vec<u8> = log.iter().map(|r| r.y).collect();
    let comparators = cfg
        .comparators
        .iter()
        .map(|spec| {
            spec.build(
                setup.game.as_ref(),
                &setup.kernel,
                setup.generator.as_ref(),
                &xs,
                &ys,
                cfg.seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let regret = engine.regret_report(&comparators)?;
    let regret_curve = regret_curve(&engine, &comparators)?;
    let all_pass = regret.all_pass();
    let report = RunReport {
        config: cfg.clone(),
        game: setup.game.name().to_string(),
        kernel: setup.kernel.name().to_string(),
        generator: setup.generator.name().to_string(),
        regret,
        regret_curve,
        all_pass,
    };
    Ok(RunOutcome {
        engine,
        comparators,
        report,
    })
}

/// Regret at `n = 1, 2, 4, …` and at the horizon, from cached prefix sums.
pub fn regret_curve(engine: &Engine, comparators: &[Comparator]) -> Result<Vec<CurvePoint>> {
    let n_max = engine.rounds();
    let prefix = |losses: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(losses.iter().map(|l| {
                acc += l;
                acc
            }))
            .collect()
    };
    let own: Vec<f64> = engine.round_log().iter().map(|r| r.loss).collect();
    let own = prefix(&own);
    let theirs = comparators
        .iter()
        .map(|c| Ok(prefix(&engine.comparator_losses(c)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut ns: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(2))
        .take_while(|&n| n <= n_max)
        .collect();
    if n_max > 0 && ns.last() != Some(&n_max) {
        ns.push(n_max);
    }
    ns.into_iter()
        .map(|n| {
            let comparator_loss: Vec<f64> = theirs.iter().map(|t| t[n]).collect();
            Ok(CurvePoint {
                n,
                own_loss: own[n],
                regret: comparator_loss.iter().map(|c| own[n] - c).collect(),
                bound: comparators
                    .iter()
                    .map(|c| engine.regret_bound_at(c, n))
                    .collect::<Result<_>>()?,
                comparator_loss,
            })
        })
        .collect()
}

/// Runs `cfg` and writes the artifacts into `out`. On a forecaster failure the
/// forecaster history is dumped to `diagnostics.csv` before the error returns.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(out)?;
    let outcome = match simulate(cfg) {
        Ok(o) => o,
        Err(RunFailure { error, engine }) => {
            if let Some(engine) = engine {
                let f = fs::File::create(out.join(DIAGNOSTICS_FILE))?;
                engine.forecaster().write_diagnostics(BufWriter::new(f))?;
            }
            return Err(error);
        }
    };
    let round_log_path = out.join(ROUND_LOG_FILE);
    let report_path = out.join(REPORT_FILE);
    outcome
        .engine
        .write_round_log(BufWriter::new(fs::File::create(&round_log_path)?))?;
    let mut json = serde_json::to_string_pretty(&outcome.report)?;
    json.push('\n');
    fs::write(&report_path, json)?;
    Ok(RunArtifacts {
        round_log_path,
        report_path,
        report: outcome.report,
    })
}

/// Reads back the artifacts of a run directory.
pub fn load_artifacts(dir: &Path) -> Result<(Vec<RoundRecord>, RunReport)> {
    let log = read_round_log(&dir.join(ROUND_LOG_FILE))?;
    let report: RunReport = serde_json::from_str(&fs::read_to_string(dir.join(REPORT_FILE))?)?;
    Ok((log, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(game: &str, generator: Selector, horizon: usize) -> ExperimentConfig {
        ExperimentConfig {
            game: Selector::named(game),
            kernel: Selector::named("sobolev"),
            generator,
            horizon,
            seed: 11,
            comparators: vec![ComparatorSpec::Zero, ComparatorSpec::Matched],
            epsilon_root: 1e-9,
            grid_size: None,
        }
    }

    #[test]
    fn single_round_forecasts_half() {
        let gen = Selector::named("deterministic")
            .with("rule", "x>0")
            .with("noise_rate", 0.0);
        let o = simulate(&config("square", gen, 1)).unwrap();
        assert_eq!(o.engine.round_log().len(), 1);
        assert!((o.engine.round_log()[0].p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let r = simulate(&config("square", Selector::named("adversarial"), 0));
        assert!(matches!(
            r,
            Err(RunFailure {
                error: Error::InvalidInput(_),
                ..
            })
        ));
    }

    #[test]
    fn curve_samples_powers_of_two_and_horizon() {
        let o = simulate(&config("absolute", Selector::named("adversarial"), 20)).unwrap();
        let ns: Vec<usize> = o.report.regret_curve.iter().map(|c| c.n).collect();
        assert_eq!(ns, [1, 2, 4, 8, 16, 20]);
        let last = o.report.regret_curve.last().unwrap();
        assert!((last.own_loss - o.engine.cumulative_loss()).abs() < 1e-9);
        assert!(o.report.all_pass);
    }

    #[test]
    fn config_parses_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"game":"log","kernel":{"name":"gaussian","width":0.5},
                "generator":{"name":"iid_logistic","weights":[0.0,2.0]},
                "horizon":10,"seed":3}"#,
        )
        .unwrap();
        assert_eq!(cfg.epsilon_root, 1e-9);
        assert!(cfg.comparators.is_empty());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"game":"log"}"#).is_err());
    }

    #[test]
    fn artifacts_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("log", Selector::named("iid_logistic"), 9);
        let a = run(&cfg, dir.path()).unwrap();
        let (log, report) = load_artifacts(dir.path()).unwrap();
        assert_eq!(report, a.report);
        assert_eq!(log.len(), 9);
    }
}
