//! The lexicographic algorithm of large numbers with the merged kernel
//! `K((p,q,x),(p',q',x')) = Exp_G(p,q)·Exp_G(p',q') + K(x,x')`.
//!
//! At round `n` the defensive function is
//!
//! ```text
//! S_n(p,q) = Σ_{i<n} [e(p,q)·e_i + K(x,x_i)]·(y_i − p_i) + ½[e(p,q)² + K(x,x)]·(1 − 2p)
//!          = A·e + B + ½e²(1 − 2p) + C·p
//! ```
//!
//! with `e(p,q)` the exposure of the canonical choice `G(p,q)`. Forecasts are
//! roots of `S_n` on the game's (possibly stripped) lexicographic square, so a
//! bettor following `S_n` never gains capital.

mod solver;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::{check_outcome, Forecast, Game};
use crate::kernel::{Datum, Kernel, KernelExpansion};

pub use solver::SCoefficients;

/// Root-finder settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Maximum `|S_n|` accepted at a reported root.
    pub epsilon_root: f64,
    /// Points in the initial uniform `p` scan.
    pub grid_size: usize,
    /// Initial distance from a stripped edge of the square.
    pub delta_start: f64,
    /// Smallest edge distance tried before giving up.
    pub delta_min: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon_root: 1e-9,
            grid_size: 1024,
            delta_start: 1e-6,
            delta_min: 1e-15,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_root > 0.0 && self.epsilon_root.is_finite()) {
            return Err(invalid("epsilon_root must be positive"));
        }
        if self.grid_size < 2 {
            return Err(invalid("grid_size must be at least 2"));
        }
        if !(self.delta_min > 0.0 && self.delta_min <= self.delta_start && self.delta_start < 0.5) {
            return Err(invalid("need 0 < delta_min ≤ delta_start < ½"));
        }
        Ok(())
    }
}

/// Which case of the algorithm produced a forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Root,
    /// `S_n > 0` everywhere; `p = 1`.
    EndpointPositive,
    /// `S_n < 0` everywhere; `p = 0`.
    EndpointNegative,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Root => "root",
            Branch::EndpointPositive => "endpoint_positive",
            Branch::EndpointNegative => "endpoint_negative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "root" => Some(Branch::Root),
            "endpoint_positive" => Some(Branch::EndpointPositive),
            "endpoint_negative" => Some(Branch::EndpointNegative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub forecast: Forecast,
    /// `|S_n|` at the forecast; zero when an endpoint rule fired.
    pub s_residual: f64,
    pub branch: Branch,
}

/// One completed round of the forecasting protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRound {
    pub x: Datum,
    pub p: f64,
    pub q: f64,
    pub y: u8,
    /// Exposure of the chosen decision `G(p, q)`.
    pub exposure: f64,
    pub s_residual: f64,
    pub branch: Branch,
}

impl ForecastRound {
    pub fn residual(&self) -> f64 {
        self.y as f64 - self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K29Certificate {
    /// `‖Σ (y_n − p_n) Φ(p_n,q_n,x_n)‖²` under the merged kernel.
    pub lhs: f64,
    /// `Σ p_n(1 − p_n) ‖Φ(p_n,q_n,x_n)‖²`
    pub rhs: f64,
    /// `2 Σ |s_residual|`
    pub slack: f64,
    /// Floating-point allowance for the `O(N²)` sums.
    pub rounding: f64,
}

impl K29Certificate {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + self.slack + self.rounding
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionCertificate {
    /// `|Σ (y_n − p_n) f(x_n)|`
    pub lhs: f64,
    /// `‖f‖ · √(Σ p_n(1 − p_n)(e_n² + K(x_n,x_n)))`
    pub bound: f64,
    /// `‖f‖ · (√(rhs + 2Σ|s_residual|) − √rhs)`
    pub slack: f64,
    pub rounding: f64,
}

impl ResolutionCertificate {
    pub fn holds(&self) -> bool {
        self.lhs <= self.bound + self.slack + self.rounding
    }
}

pub(crate) fn rounding_allowance(scale: f64, terms: usize) -> f64 {
    1e-12 * scale.max(1.0) * (terms.max(1) as f64).sqrt()
}

/// Online state of the forecaster: one writer per sequence.
#[derive(Debug, Clone)]
pub struct ForecasterState {
    game: Arc<dyn Game>,
    kernel: Arc<dyn Kernel>,
    config: SolverConfig,
    history: Vec<ForecastRound>,
    agg_a: f64,
}

impl ForecasterState {
    pub fn new(game: Arc<dyn Game>, kernel: Arc<dyn Kernel>) -> Self {
        ForecasterState {
            game,
            kernel,
            config: SolverConfig::default(),
            history: Vec::new(),
            agg_a: 0.0,
        }
    }

    pub fn with_config(
        game: Arc<dyn Game>,
        kernel: Arc<dyn Kernel>,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(ForecasterState {
            config,
            ..Self::new(game, kernel)
        })
    }

    pub fn game(&self) -> &Arc<dyn Game> {
        &self.game
    }

    pub fn kernel(&self) -> &Arc<dyn Kernel> {
        &self.kernel
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn history(&self) -> &[ForecastRound] {
        &self.history
    }

    /// Number of completed rounds.
    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    /// Running `A = Σ e_i (y_i − p_i)`.
    pub fn agg_a(&self) -> f64 {
        self.agg_a
    }

    pub fn sum_abs_residual(&self) -> f64 {
        self.history.iter().map(|r| r.s_residual).sum()
    }

    /// `(A, B, C)` of the coefficient form of `S_n` at datum `x`; `O(n)`.
    pub fn coefficients(&self, x: &Datum) -> Result<SCoefficients> {
        self.kernel.check_datum(x)?;
        let kxx = self.kernel.eval(x.as_slice(), x.as_slice());
        let b: f64 = self
            .history
            .iter()
            .map(|r| self.kernel.eval(x.as_slice(), r.x.as_slice()) * r.residual())
            .sum();
        Ok(SCoefficients {
            a: self.agg_a,
            b: b + 0.5 * kxx,
            c: -kxx,
        })
    }

    /// `S_n(p, q)` at datum `x` by direct summation over the history.
    pub fn s_value(&self, p: f64, q: f64, x: &Datum) -> Result<f64> {
        self.kernel.check_datum(x)?;
        let e = self.game.canonical_choice(Forecast::new(p, q)?)?.exposure();
        let mut s = 0.0;
        for r in &self.history {
            s += (e * r.exposure + self.kernel.eval(x.as_slice(), r.x.as_slice())) * r.residual();
        }
        s += 0.5 * (e * e + self.kernel.eval(x.as_slice(), x.as_slice())) * (1.0 - 2.0 * p);
        Ok(s)
    }

    /// The forecast for datum `x`: the lexicographically first root of `S_n`,
    /// or the endpoint rule when `S_n` has constant sign.
    pub fn next_forecast(&self, x: &Datum) -> Result<RootReport> {
        let coeffs = self.coefficients(x)?;
        solver::solve(
            self.game.as_ref(),
            &coeffs,
            &self.config,
            self.history.len() + 1,
        )
    }

    /// Appends a completed round; `report` must come from [`Self::next_forecast`]
    /// on this state for the same `x`.
    pub fn update(&mut self, x: Datum, report: &RootReport, y: u8) -> Result<()> {
        check_outcome(y)?;
        self.kernel.check_datum(&x)?;
        let f = report.forecast;
        let e = self.game.canonical_choice(f)?.exposure();
        self.agg_a += e * (y as f64 - f.p);
        self.history.push(ForecastRound {
            x,
            p: f.p,
            q: f.q,
            y,
            exposure: e,
            s_residual: report.s_residual,
            branch: report.branch,
        });
        Ok(())
    }

    /// `A` recomputed from the history.
    pub fn recompute_agg_a(&self) -> f64 {
        self.history.iter().map(|r| r.exposure * r.residual()).sum()
    }

    /// Both sides of the large-numbers inequality for the merged feature map;
    /// `O(N²)` kernel evaluations.
    pub fn k29_certificate(&self) -> K29Certificate {
        k29_certificate(self.kernel.as_ref(), &self.history)
    }

    /// Resolution inequality for `f` in the RKHS of the state's kernel.
    pub fn resolution_certificate(&self, f: &KernelExpansion) -> Result<ResolutionCertificate> {
        if !same_kernel(self.kernel.as_ref(), f.kernel().as_ref()) {
            return Err(invalid(format!(
                "expansion kernel {} differs from forecaster kernel {}",
                f.kernel().name(),
                self.kernel.name()
            )));
        }
        resolution_certificate(self.kernel.as_ref(), &self.history, f)
    }

    /// CSV dump of `(n, x, p, q, e, y, s_residual, branch)` rows.
    pub fn write_diagnostics<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "x", "p", "q", "e", "y", "s_residual", "branch"])?;
        for (i, r) in self.history.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                r.x.to_string(),
                format!("{:?}", r.p),
                format!("{:?}", r.q),
                format!("{:?}", r.exposure),
                r.y.to_string(),
                format!("{:?}", r.s_residual),
                r.branch.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// K29 certificate of a completed sequence of rounds.
pub fn k29_certificate(kernel: &dyn Kernel, rounds: &[ForecastRound]) -> K29Certificate {
    let mut exp_sum = 0.0;
    let mut kernel_part = 0.0;
    let mut rhs = 0.0;
    for (n, rn) in rounds.iter().enumerate() {
        let r = rn.residual();
        exp_sum += rn.exposure * r;
        let kxx = kernel.eval(rn.x.as_slice(), rn.x.as_slice());
        kernel_part += kxx * r * r;
        for rm in &rounds[..n] {
            kernel_part += 2.0 * kernel.eval(rn.x.as_slice(), rm.x.as_slice()) * r * rm.residual();
        }
        rhs += rn.p * (1.0 - rn.p) * (rn.exposure * rn.exposure + kxx);
    }
    let lhs = exp_sum * exp_sum + kernel_part;
    let slack = 2.0 * rounds.iter().map(|r| r.s_residual).sum::<f64>();
    K29Certificate {
        lhs,
        rhs,
        slack,
        rounding: rounding_allowance(lhs.abs().max(rhs), rounds.len() * rounds.len()),
    }
}

/// Resolution certificate of `f` over a completed sequence of rounds.
pub fn resolution_certificate(
    kernel: &dyn Kernel,
    rounds: &[ForecastRound],
    f: &KernelExpansion,
) -> Result<ResolutionCertificate> {
    let norm = f.rkhs_norm()?;
    let lhs = rounds
        .iter()
        .map(|r| r.residual() * f.eval(&r.x))
        .sum::<f64>()
        .abs();
    let rhs: f64 = rounds
        .iter()
        .map(|r| {
            r.p * (1.0 - r.p)
                * (r.exposure * r.exposure + kernel.eval(r.x.as_slice(), r.x.as_slice()))
        })
        .sum();
    let two_s = 2.0 * rounds.iter().map(|r| r.s_residual).sum::<f64>();
    let bound = norm * rhs.sqrt();
    Ok(ResolutionCertificate {
        lhs,
        bound,
        slack: norm * ((rhs + two_s).sqrt() - rhs.sqrt()),
        rounding: rounding_allowance(bound, rounds.len() * f.centers().len().max(1)),
    })
}

/// Identity of kernels: same object, or same name and kind agreeing on probes.
pub(crate) fn same_kernel(a: &dyn Kernel, b: &dyn Kernel) -> bool {
    if std::ptr::addr_eq(a as *const dyn Kernel, b as *const dyn Kernel) {
        return true;
    }
    if a.name() != b.name() || a.kind() != b.kind() || a.dim() != b.dim() {
        return false;
    }
    let d = a.dim();
    [(-1.3, 0.4), (0.0, 0.0), (2.1, -0.7)]
        .iter()
        .all(|&(u, v)| {
            let x = vec![u; d];
            let z = vec![v; d];
            a.eval(&x, &z) == b.eval(&x, &z)
        })
}
