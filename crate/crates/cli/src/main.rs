//! `lexcast`: run experiments, re-certify round logs, print game constants.
//!
//! Exit status is 0 when every checked inequality holds, 1 when one fails,
//! and 2 on errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;

use lexcast_core::experiment::{self, ExperimentConfig, RunReport, REPORT_FILE};
use lexcast_core::forecaster::{ForecastRound, K29Certificate};
use lexcast_core::game::{Constant, CustomConvex, Game};
use lexcast_core::kernel::Kernel;
use lexcast_core::protocol::{read_round_log, regret_slack, rounds_from_log, RoundRecord};
use lexcast_core::registry::{self, Selector};

#[derive(Parser)]
#[command(
    name = "lexcast",
    version,
    about = "Kernel defensive forecasting for binary-outcome games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write round_log.csv and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute certificates from a round log.
    Certify {
        #[arg(long)]
        log: PathBuf,
        /// Game name; defaults to the one in a report.json next to the log.
        #[arg(long)]
        game: Option<String>,
        /// Kernel name; defaults to the one in a report.json next to the log.
        #[arg(long)]
        kernel: Option<String>,
        /// Root tolerance for residual checks.
        #[arg(long)]
        epsilon_root: Option<f64>,
    },
    /// Print C_F of a kernel and C_{λ,F} of a game under it.
    Constants {
        /// Registered game name, or a path to a custom game JSON file.
        #[arg(long)]
        game: String,
        #[arg(long, default_value = "sobolev")]
        kernel: String,
        /// Gaussian kernel width.
        #[arg(long)]
        width: Option<f64>,
        /// Linear kernel offset.
        #[arg(long)]
        offset: Option<f64>,
        /// Data range `lo,hi` for kernels with an unbounded diagonal.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        range: Option<Vec<f64>>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run(&config, &out),
        Command::Certify {
            log,
            game,
            kernel,
            epsilon_root,
        } => certify(&log, game, kernel, epsilon_root),
        Command::Constants {
            game,
            kernel,
            width,
            offset,
            range,
        } => constants(&game, &kernel, width, offset, range),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run(config: &Path, out: &Path) -> Result<bool> {
    let cfg =
        ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let a = experiment::run(&cfg, out)?;
    print_report(&a.report);
    println!(
        "wrote {} and {}",
        a.round_log_path.display(),
        a.report_path.display()
    );
    Ok(a.report.all_pass)
}

fn print_report(r: &RunReport) {
    let g = &r.regret;
    println!(
        "{} / {} / {}: N={} loss={:.6} Σ|S|={:e}",
        r.game, r.kernel, r.generator, g.rounds, g.cumulative_loss, g.sum_abs_residual
    );
    let k = &g.k29.certificate;
    println!(
        "{} k29: lhs={:.6} ≤ rhs={:.6} + slack={:e}",
        verdict(g.k29.pass),
        k.lhs,
        k.rhs,
        k.slack
    );
    for c in &g.comparators {
        println!(
            "{} regret[{}]: {:.6} ≤ bound={} + slack={:e} (‖f‖={:.4})",
            verdict(c.pass),
            c.label,
            c.regret,
            c.bound,
            c.slack,
            c.norm
        );
        let res = &c.resolution.certificate;
        println!(
            "{} resolution[{}]: {:.6} ≤ {:.6} + slack={:e}",
            verdict(c.resolution.pass),
            c.label,
            res.lhs,
            res.bound,
            res.slack
        );
    }
}

/// Game and kernel selectors from a report.json beside the log, if any.
fn sibling_selectors(log: &Path) -> Option<(Selector, Selector, f64)> {
    let dir = log.parent()?;
    let text = std::fs::read_to_string(dir.join(REPORT_FILE)).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    let cfg: ExperimentConfig = serde_json::from_value(v.get("config")?.clone()).ok()?;
    Some((cfg.game, cfg.kernel, cfg.epsilon_root))
}

fn certify(
    log: &Path,
    game: Option<String>,
    kernel: Option<String>,
    eps: Option<f64>,
) -> Result<bool> {
    let sibling = sibling_selectors(log);
    let game_sel = match (game, &sibling) {
        (Some(g), _) => Selector::named(g),
        (None, Some((g, _, _))) => g.clone(),
        (None, None) => bail!("--game is required when no report.json sits next to the log"),
    };
    let kernel_sel = match (kernel, &sibling) {
        (Some(k), _) => Selector::named(k),
        (None, Some((_, k, _))) => k.clone(),
        (None, None) => Selector::named("sobolev"),
    };
    let eps = eps.or(sibling.as_ref().map(|s| s.2)).unwrap_or(1e-9);
    let game = registry::games().build(&game_sel)?;
    let kernel = registry::kernels().build(&kernel_sel)?;

    let records = read_round_log(log)?;
    let rounds = rounds_from_log(game.as_ref(), &records)?;
    let k29 = lexcast_core::forecaster::k29_certificate(kernel.as_ref(), &rounds);
    let checks = [
        ("k29", k29.holds(), describe_k29(&k29)),
        residual_check(&rounds, eps),
        loss_check(game.as_ref(), &records),
        zero_regret_check(game.as_ref(), kernel.as_ref(), &records, &k29)?,
    ];
    println!(
        "{} rounds, game {}, kernel {}",
        records.len(),
        game.name(),
        kernel.name()
    );
    let mut all = true;
    for (name, pass, detail) in checks {
        println!("{} {name}: {detail}", verdict(pass));
        all &= pass;
    }
    Ok(all)
}

fn describe_k29(k: &K29Certificate) -> String {
    format!("lhs={:.6} ≤ rhs={:.6} + slack={:e}", k.lhs, k.rhs, k.slack)
}

fn residual_check(rounds: &[ForecastRound], eps: f64) -> (&'static str, bool, String) {
    let worst = rounds.iter().map(|r| r.s_residual).fold(0.0, f64::max);
    (
        "root_residual",
        worst <= eps,
        format!("max |S|={worst:e} ≤ ε={eps:e}"),
    )
}

/// Logged losses agree with the logged decisions.
fn loss_check(game: &dyn Game, records: &[RoundRecord]) -> (&'static str, bool, String) {
    let worst = records
        .iter()
        .map(|r| match game.loss(r.y, r.gamma) {
            Ok(l) => (l - r.loss).abs(),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    (
        "losses",
        worst <= 1e-12,
        format!("max |λ(y,γ) − loss|={worst:e}"),
    )
}

/// Regret against the constant decision with zero exposure.
fn zero_regret_check(
    game: &dyn Game,
    kernel: &dyn Kernel,
    records: &[RoundRecord],
    k29: &K29Certificate,
) -> Result<(&'static str, bool, String)> {
    let d = game.decision(game.decision_from_exposure(0.0)?)?;
    let own: f64 = records.iter().map(|r| r.loss).sum();
    let theirs: f64 = records.iter().map(|r| d.loss(r.y)).sum();
    let c_lambda = match kernel.c_f(None) {
        Constant::Finite(c) => game.clambda(c)?,
        Constant::Unbounded => Constant::Unbounded,
    };
    let sum_abs: f64 = records.iter().map(|r| r.s_residual).sum();
    let slack = regret_slack(0.0, k29.rhs, sum_abs);
    let n = records.len() as f64;
    Ok(match c_lambda {
        Constant::Finite(c) => {
            let bound = c * n.sqrt();
            let regret = own - theirs;
            let pass = regret <= bound + slack + 1e-12 * own.abs().max(1.0) * n.sqrt().max(1.0);
            (
                "regret[zero]",
                pass,
                format!("{regret:.6} ≤ bound={bound:.6} + slack={slack:e}"),
            )
        }
        Constant::Unbounded => ("regret[zero]", true, "bound unbounded".to_string()),
    })
}

fn constants(
    game: &str,
    kernel: &str,
    width: Option<f64>,
    offset: Option<f64>,
    range: Option<Vec<f64>>,
) -> Result<bool> {
    let game: Arc<dyn Game> = if Path::new(game).is_file() {
        let text = std::fs::read_to_string(game).with_context(|| format!("reading {game}"))?;
        Arc::new(CustomConvex::from_json(&text)?)
    } else {
        registry::games().build(&Selector::named(game))?
    };
    let mut sel = Selector::named(kernel);
    if let Some(w) = width {
        sel = sel.with("width", w);
    }
    if let Some(o) = offset {
        sel = sel.with("offset", o);
    }
    if let Some(r) = range {
        sel = sel.with("range", serde_json::json!(r));
    }
    let kernel = registry::kernels().build(&sel)?;
    let c_f = kernel.c_f(None);
    println!("C_F({}) = {c_f}", kernel.name());
    let c_lambda = match c_f {
        Constant::Finite(c) => game.clambda(c)?,
        Constant::Unbounded => Constant::Unbounded,
    };
    println!("C_lambda({}, {}) = {c_lambda}", game.name(), kernel.name());
    Ok(true)
}
