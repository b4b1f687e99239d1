//! The online decision loop: datum, decision, observation.
//!
//! An [`Engine`] turns forecasts into decisions through the game's canonical
//! choice function, keeps the round log and cumulative loss, and checks the
//! regret bound against [`Comparator`] rules.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecaster::{
    rounding_allowance, Branch, ForecastRound, ForecasterState, K29Certificate,
    ResolutionCertificate, RootReport,
};
use crate::game::{Constant, Decision, Forecast, Game};
use crate::kernel::{Datum, KernelExpansion};

/// A benchmark rule `D` given by a kernel expansion of its exposure function.
#[derive(Debug, Clone)]
pub struct Comparator {
    label: String,
    exposure_fn: KernelExpansion,
    norm: f64,
}

impl Comparator {
    pub fn new(label: impl Into<String>, exposure_fn: KernelExpansion) -> Result<Self> {
        let norm = exposure_fn.rkhs_norm()?;
        Ok(Comparator {
            label: label.into(),
            exposure_fn,
            norm,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn exposure_fn(&self) -> &KernelExpansion {
        &self.exposure_fn
    }

    /// Cached RKHS norm of the exposure function.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `D(x)`; fails when the exposure leaves the game's exposure range.
    pub fn decision(&self, game: &dyn Game, x: &Datum) -> Result<Decision> {
        let e = self.exposure_fn.eval(x);
        game.decision_from_exposure(e)
            .and_then(|gamma| game.decision(gamma))
            .map_err(|err| {
                Error::RejectedComparator(format!(
                    "{}: exposure {e:?} at x = {x}: {err}",
                    self.label
                ))
            })
    }
}

/// One logged round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub x: Datum,
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    pub y: u8,
    pub loss: f64,
    pub s_residual: f64,
    pub branch: Branch,
}

pub const ROUND_LOG_HEADER: [&str; 9] = [
    "n",
    "x",
    "p",
    "q",
    "gamma",
    "y",
    "loss",
    "s_residual",
    "branch",
];

#[derive(Debug, Clone)]
struct Pending {
    x: Datum,
    report: RootReport,
    decision: Decision,
}

/// Per-comparator line of a [`RegretReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorRow {
    pub label: String,
    pub norm: f64,
    pub own_loss: f64,
    pub comparator_loss: f64,
    pub regret: f64,
    pub bound: Constant,
    pub slack: f64,
    pub pass: bool,
    pub resolution: CertificateRow<ResolutionCertificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow<C> {
    #[serde(flatten)]
    pub certificate: C,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub rounds: usize,
    pub cumulative_loss: f64,
    pub sum_abs_residual: f64,
    pub c_f: Constant,
    pub c_lambda: Constant,
    pub comparators: Vec<ComparatorRow>,
    pub k29: CertificateRow<K29Certificate>,
}

impl RegretReport {
    pub fn all_pass(&self) -> bool {
        self.k29.pass && self.comparators.iter().all(|c| c.pass && c.resolution.pass)
    }
}

/// Slack for inexact roots in the regret inequality.
///
/// With `r = Σ p(1−p)‖Φ‖²` and `s = 2Σ|S_n|` the exact chain gives
/// `regret ≤ (1 + ‖f‖)·√(r + s)`, which exceeds the bound by at most
/// `(1 + ‖f‖)(√(r + s) − √r)`. The larger of that and `(1 + ‖f‖)·s` is used.
pub fn regret_slack(norm: f64, rhs: f64, sum_abs_residual: f64) -> f64 {
    let s = 2.0 * sum_abs_residual;
    let sqrt_gap = (rhs + s).sqrt() - rhs.sqrt();
    (1.0 + norm) * s.max(sqrt_gap)
}

/// Online decision maker for one sequence.
#[derive(Debug, Clone)]
pub struct Engine {
    forecaster: ForecasterState,
    cumulative_loss: f64,
    log: Vec<RoundRecord>,
    pending: Option<Pending>,
}

impl Engine {
    pub fn new(forecaster: ForecasterState) -> Self {
        Engine {
            forecaster,
            cumulative_loss: 0.0,
            log: Vec::new(),
            pending: None,
        }
    }

    pub fn forecaster(&self) -> &ForecasterState {
        &self.forecaster
    }

    pub fn game(&self) -> &dyn Game {
        self.forecaster.game().as_ref()
    }

    pub fn cumulative_loss(&self) -> f64 {
        self.cumulative_loss
    }

    pub fn round_log(&self) -> &[RoundRecord] {
        &self.log
    }

    pub fn rounds(&self) -> usize {
        self.log.len()
    }

    /// Forecast behind the decision awaiting its observation.
    pub fn pending_forecast(&self) -> Option<Forecast> {
        self.pending.as_ref().map(|p| p.report.forecast)
    }

    /// Forecasts for `x` and announces `γ_n = G(p_n, q_n)`.
    pub fn decide(&mut self, x: Datum) -> Result<f64> {
        if self.pending.is_some() {
            return Err(Error::Usage(
                "decide called twice without an observation".into(),
            ));
        }
        let report = self.forecaster.next_forecast(&x)?;
        let decision = self.game().canonical_choice(report.forecast)?;
        self.pending = Some(Pending {
            x,
            report,
            decision,
        });
        Ok(decision.gamma)
    }

    pub fn observe(&mut self, y: u8) -> Result<()> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Usage("observe called without a pending decision".into()))?;
        if let Err(e) = self
            .forecaster
            .update(pending.x.clone(), &pending.report, y)
        {
            self.pending = Some(pending);
            return Err(e);
        }
        let loss = pending.decision.loss(y);
        self.cumulative_loss += loss;
        let f = pending.report.forecast;
        self.log.push(RoundRecord {
            x: pending.x,
            p: f.p,
            q: f.q,
            gamma: pending.decision.gamma,
            y,
            loss,
            s_residual: pending.report.s_residual,
            branch: pending.report.branch,
        });
        Ok(())
    }

    /// Per-round losses of `c` replayed over the log.
    pub fn comparator_losses(&self, c: &Comparator) -> Result<Vec<f64>> {
        self.log
            .iter()
            .map(|r| Ok(c.decision(self.game(), &r.x)?.loss(r.y)))
            .collect()
    }

    /// `Σ_n λ(y_n, D(x_n))`.
    pub fn comparator_loss(&self, c: &Comparator) -> Result<f64> {
        Ok(self.comparator_losses(c)?.iter().sum())
    }

    pub fn c_f(&self) -> Constant {
        self.forecaster.kernel().c_f(None)
    }

    pub fn c_lambda(&self) -> Result<Constant> {
        match self.c_f() {
            Constant::Finite(c) => self.game().clambda(c),
            Constant::Unbounded => Ok(Constant::Unbounded),
        }
    }

    /// `C_{λ,F}(‖f‖ + 1)√n` at horizon `n`.
    pub fn regret_bound_at(&self, c: &Comparator, n: usize) -> Result<Constant> {
        if n == 0 {
            return Ok(Constant::Finite(0.0));
        }
        Ok(match self.c_lambda()? {
            Constant::Finite(cl) => Constant::Finite(cl * (c.norm + 1.0) * (n as f64).sqrt()),
            Constant::Unbounded => Constant::Unbounded,
        })
    }

    pub fn regret_bound(&self, c: &Comparator) -> Result<Constant> {
        self.regret_bound_at(c, self.rounds())
    }

    /// Regret rows for each comparator plus both certificates.
    pub fn regret_report(&self, comparators: &[Comparator]) -> Result<RegretReport> {
        let rounds = self.forecaster.history();
        let k29 = self.forecaster.k29_certificate();
        let sum_abs_residual = self.forecaster.sum_abs_residual();
        let mut rows = Vec::with_capacity(comparators.len());
        for c in comparators {
            let comparator_loss = self.comparator_loss(c)?;
            let regret = self.cumulative_loss - comparator_loss;
            let bound = self.regret_bound(c)?;
            let slack = regret_slack(c.norm, k29.rhs, sum_abs_residual);
            let scale = self.cumulative_loss.abs().max(comparator_loss.abs());
            let rounding = rounding_allowance(scale, rounds.len());
            let pass = match bound {
                Constant::Finite(b) => regret <= b + slack + rounding,
                Constant::Unbounded => true,
            };
            let res = self.forecaster.resolution_certificate(&c.exposure_fn)?;
            rows.push(ComparatorRow {
                label: c.label.clone(),
                norm: c.norm,
                own_loss: self.cumulative_loss,
                comparator_loss,
                regret,
                bound,
                slack,
                pass,
                resolution: CertificateRow {
                    pass: res.holds(),
                    certificate: res,
                },
            });
        }
        Ok(RegretReport {
            rounds: rounds.len(),
            cumulative_loss: self.cumulative_loss,
            sum_abs_residual,
            c_f: self.c_f(),
            c_lambda: self.c_lambda()?,
            comparators: rows,
            k29: CertificateRow {
                pass: k29.holds(),
                certificate: k29,
            },
        })
    }

    /// Writes the round log as CSV with [`ROUND_LOG_HEADER`].
    pub fn write_round_log<W: Write>(&self, out: W) -> Result<()> {
        write_round_log(&self.log, out)
    }
}

pub fn write_round_log<W: Write>(log: &[RoundRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROUND_LOG_HEADER)?;
    for (i, r) in log.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.x.to_string(),
            format!("{:?}", r.p),
            format!("{:?}", r.q),
            format!("{:?}", r.gamma),
            r.y.to_string(),
            format!("{:?}", r.loss),
            format!("{:?}", r.s_residual),
            r.branch.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_round_log`].
pub fn read_round_log(path: &Path) -> Result<Vec<RoundRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != ROUND_LOG_HEADER {
        return Err(err(
            1,
            format!("expected header {}", ROUND_LOG_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| {
                err(
                    line,
                    format!(
                        "column {}: {:?} is not a number",
                        ROUND_LOG_HEADER[i], &rec[i]
                    ),
                )
            })
        };
        let x = crate::experiment::generators::parse_datum(&rec[1])
            .map_err(|m| err(line, format!("column x: {m}")))?;
        let y = match &rec[5] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(err(
                    line,
                    format!("column y: expected 0 or 1, got {other:?}"),
                ))
            }
        };
        let branch = Branch::parse(&rec[8])
            .ok_or_else(|| err(line, format!("unknown branch {:?}", &rec[8])))?;
        out.push(RoundRecord {
            x,
            p: num(2)?,
            q: num(3)?,
            gamma: num(4)?,
            y,
            loss: num(6)?,
            s_residual: num(7)?,
            branch,
        });
    }
    Ok(out)
}

/// Forecaster rounds reconstructed from a round log, with exposures taken
/// from the logged decisions.
pub fn rounds_from_log(game: &dyn Game, log: &[RoundRecord]) -> Result<Vec<ForecastRound>> {
    log.iter()
        .map(|r| {
            Ok(ForecastRound {
                x: r.x.clone(),
                p: r.p,
                q: r.q,
                y: r.y,
                exposure: game.exposure(r.gamma)?,
                s_residual: r.s_residual,
                branch: r.branch,
            })
        })
        .collect()
}
