//! Binary-outcome loss games.
//!
//! A game is a decision set `Γ` with losses `λ(0, γ)` and `λ(1, γ)`. Everything
//! the engine needs from a game goes through the [`Game`] trait: the loss pair
//! of a decision, the canonical choice function `G(p, q)` mapping a point of the
//! lexicographic square to an expected-loss minimising decision, and the
//! breakpoints where the optimal face `[A(p), B(p)]` is a proper segment.
//!
//! Built-in games ([`SquareLoss`], [`AbsoluteLoss`], [`LogLoss`]) and polyline
//! games ([`CustomConvex`]) are registered by name in [`crate::registry`].

mod builtin;
mod custom;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::golden_section_max;

pub use builtin::{AbsoluteLoss, LogLoss, SquareLoss, LOG_LOSS_CLAMP};
pub use custom::CustomConvex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameKind {
    SquareLoss,
    AbsoluteLoss,
    LogLoss,
    CustomConvex,
}

/// Domain of the canonical choice function on the lexicographic square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// `[0,1] × [0,1]`
    FullSquare,
    /// `(0,1) × [0,1]`
    StrippedBoth,
    /// `(0,1] × [0,1]`
    StrippedLeft,
    /// `[0,1) × [0,1]`
    StrippedRight,
}

impl Domain {
    pub fn includes_zero(self) -> bool {
        matches!(self, Domain::FullSquare | Domain::StrippedRight)
    }

    pub fn includes_one(self) -> bool {
        matches!(self, Domain::FullSquare | Domain::StrippedLeft)
    }

    pub fn contains_p(self, p: f64) -> bool {
        if !(0.0..=1.0).contains(&p) {
            return false;
        }
        (p > 0.0 || self.includes_zero()) && (p < 1.0 || self.includes_one())
    }

    pub fn label(self) -> &'static str {
        match self {
            Domain::FullSquare => "full square",
            Domain::StrippedBoth => "stripped square",
            Domain::StrippedLeft => "left-stripped square",
            Domain::StrippedRight => "right-stripped square",
        }
    }
}

/// A point `(p, q)` of the lexicographic square: probability forecast `p` and
/// tie-breaker `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub p: f64,
    pub q: f64,
}

impl Forecast {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return Err(invalid(format!("forecast ({p}, {q}) outside [0,1]²")));
        }
        Ok(Forecast { p, q })
    }

    /// Strict lexicographic comparison.
    pub fn lex_lt(&self, other: &Forecast) -> bool {
        self.p < other.p || (self.p == other.p && self.q < other.q)
    }
}

/// A decision together with its loss pair `(λ(0,γ), λ(1,γ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub gamma: f64,
    pub loss0: f64,
    pub loss1: f64,
}

impl Decision {
    pub fn exposure(&self) -> f64 {
        self.loss1 - self.loss0
    }

    pub fn loss(&self, y: u8) -> f64 {
        if y == 1 {
            self.loss1
        } else {
            self.loss0
        }
    }

    pub fn expected_loss(&self, p: f64) -> f64 {
        p * self.loss1 + (1.0 - p) * self.loss0
    }
}

/// A constant that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constant {
    Finite(f64),
    Unbounded,
}

impl Constant {
    pub fn finite(self) -> Option<f64> {
        match self {
            Constant::Finite(v) => Some(v),
            Constant::Unbounded => None,
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Finite(v) => write!(f, "{v}"),
            Constant::Unbounded => f.write_str("unbounded"),
        }
    }
}

pub(crate) fn check_outcome(y: u8) -> Result<()> {
    if y > 1 {
        return Err(invalid(format!("observation {y} is not binary")));
    }
    Ok(())
}

/// A binary-outcome game with a convex, closed superdecision set.
///
/// Implementors provide the loss pair of a decision and the canonical choice
/// function; the derived quantities (exposure, expected loss, exposure
/// interval, `C_{λ,F}`) are provided methods.
pub trait Game: Send + Sync + fmt::Debug {
    /// Registry name.
    fn name(&self) -> &str;

    fn kind(&self) -> GameKind;

    /// Human-readable description of the decision set `Γ`.
    fn decision_set(&self) -> String;

    fn domain(&self) -> Domain;

    /// `inf_γ λ(0,γ)`
    fn c0(&self) -> f64;

    /// `inf_γ λ(1,γ)`
    fn c1(&self) -> f64;

    /// Loss pair of `gamma`, rejecting decisions outside `Γ`.
    fn decision(&self, gamma: f64) -> Result<Decision>;

    /// `G(p, q)` for a point already known to lie in [`Game::domain`].
    fn choose(&self, p: f64, q: f64) -> Decision;

    /// Values of `p` at which `A(p) ≠ B(p)`, ascending.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Closed interval of exposures attained by decisions of this game.
    fn exposure_range(&self) -> (f64, f64);

    /// The decision whose exposure is `e`.
    fn decision_from_exposure(&self, e: f64) -> Result<f64>;

    /// `C_{λ,F}` in closed form, when one is known.
    fn clambda_closed_form(&self, _c_f: f64) -> Option<Constant> {
        None
    }

    fn loss(&self, y: u8, gamma: f64) -> Result<f64> {
        check_outcome(y)?;
        Ok(self.decision(gamma)?.loss(y))
    }

    fn expected_loss(&self, p: f64, gamma: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("probability {p} outside [0,1]")));
        }
        Ok(self.decision(gamma)?.expected_loss(p))
    }

    fn exposure(&self, gamma: f64) -> Result<f64> {
        Ok(self.decision(gamma)?.exposure())
    }

    fn check_forecast(&self, f: Forecast) -> Result<()> {
        if !(0.0..=1.0).contains(&f.q) || !self.domain().contains_p(f.p) {
            return Err(Error::ForecastDomain {
                p: f.p,
                q: f.q,
                domain: self.domain().label(),
            });
        }
        Ok(())
    }

    /// The canonical choice function `G`.
    fn canonical_choice(&self, f: Forecast) -> Result<Decision> {
        self.check_forecast(f)?;
        Ok(self.choose(f.p, f.q))
    }

    /// Exposures `(e_hi, e_lo)` at the ends `A(p)` and `B(p)` of the optimal face.
    fn exposure_interval(&self, p: f64) -> Result<(f64, f64)> {
        self.check_forecast(Forecast { p, q: 0.0 })?;
        Ok((
            self.choose(p, 0.0).exposure(),
            self.choose(p, 1.0).exposure(),
        ))
    }

    /// `C_{λ,F}` for a kernel with sup-norm constant `c_f`.
    fn clambda(&self, c_f: f64) -> Result<Constant> {
        if !(c_f >= 0.0 && c_f.is_finite()) {
            return Err(invalid(format!(
                "C_F must be finite and non-negative, got {c_f}"
            )));
        }
        Ok(self
            .clambda_closed_form(c_f)
            .unwrap_or_else(|| clambda_numeric(self, c_f)))
    }
}

/// Number of log-spaced grid points used by [`clambda_numeric`].
pub const CLAMBDA_GRID: usize = 4096;

/// `C_{λ,F}` as a numeric supremum over `p ∈ (0,1)` of
/// `p(1−p)(Exp² + C_F²)`, taking whichever face end maximises `|Exp|`.
///
/// The grid is log-spaced towards both ends of `(0,1)` and the best bracket
/// is refined by golden-section search. A supremand still growing when probed
/// far beyond the grid is reported as [`Constant::Unbounded`].
pub fn clambda_numeric<G: Game + ?Sized>(game: &G, c_f: f64) -> Constant {
    let supremand = |p: f64| -> f64 {
        let (hi, lo) = (
            game.choose(p, 0.0).exposure(),
            game.choose(p, 1.0).exposure(),
        );
        let e2 = (hi * hi).max(lo * lo);
        p * (1.0 - p) * (e2 + c_f * c_f)
    };

    let half = CLAMBDA_GRID / 2;
    let lo_exp = -12.0_f64;
    let mut grid: Vec<f64> = (0..half)
        .map(|k| 10f64.powf(lo_exp + (0.5f64.log10() - lo_exp) * k as f64 / (half - 1) as f64))
        .collect();
    let mirror: Vec<f64> = grid.iter().map(|p| 1.0 - p).collect();
    grid.extend(mirror);
    grid.extend(
        game.breakpoints()
            .into_iter()
            .filter(|p| *p > 0.0 && *p < 1.0),
    );
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let values: Vec<f64> = grid.iter().map(|&p| supremand(p)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Constant::Unbounded;
    }
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");

    if best == 0 || best == grid.len() - 1 {
        if let Some(c) = probe_tail(&supremand, best == 0, best_val) {
            return c;
        }
    }

    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (_, refined) = golden_section_max(lo, hi, 200, supremand);
    Constant::Finite(refined.max(best_val).sqrt())
}

/// Looks beyond the grid end where the supremum was found. `Some(Unbounded)`
/// when the supremand keeps growing, `None` when the grid maximum stands.
fn probe_tail(supremand: &impl Fn(f64) -> f64, left: bool, grid_max: f64) -> Option<Constant> {
    let probes: Vec<f64> = if left {
        (1..=70).map(|j| 10f64.powi(-12 - 4 * j)).collect()
    } else {
        (13..=16).map(|j| 1.0 - 10f64.powi(-j)).collect()
    };
    let vals: Vec<f64> = probes.iter().map(|&p| supremand(p)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Some(Constant::Unbounded);
    }
    let increasing = vals.windows(2).all(|w| w[1] >= w[0]);
    let last = *vals.last().expect("probes");
    if increasing && last > 2.0 * grid_max {
        Some(Constant::Unbounded)
    } else if last > grid_max {
        Some(Constant::Finite(
            vals.iter().cloned().fold(grid_max, f64::max).sqrt(),
        ))
    } else {
        None
    }
}
