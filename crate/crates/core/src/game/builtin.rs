use crate::error::{invalid, Result};
use crate::numeric::golden_section_max;

use super::{Constant, Decision, Domain, Game, GameKind};

/// Log-loss decisions are clamped to `[LOG_LOSS_CLAMP, 1 − LOG_LOSS_CLAMP]`
/// before evaluation so that losses stay finite.
pub const LOG_LOSS_CLAMP: f64 = 1e-12;

fn check_unit(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid(format!("decision {gamma} outside [0,1]")));
    }
    Ok(())
}

fn unit_from_exposure(e: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&e) {
        return Err(invalid(format!("exposure {e} outside [-1,1]")));
    }
    Ok((1.0 - e) / 2.0)
}

/// `λ(y,γ) = (y − γ)²` on `Γ = [0,1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquareLoss;

impl Game for SquareLoss {
    fn name(&self) -> &str {
        "square"
    }

    fn kind(&self) -> GameKind {
        GameKind::SquareLoss
    }

    fn decision_set(&self) -> String {
        "[0,1]".into()
    }

    fn domain(&self) -> Domain {
        Domain::FullSquare
    }

    fn c0(&self) -> f64 {
        0.0
    }

    fn c1(&self) -> f64 {
        0.0
    }

    fn decision(&self, gamma: f64) -> Result<Decision> {
        check_unit(gamma)?;
        Ok(Decision {
            gamma,
            loss0: gamma * gamma,
            loss1: (1.0 - gamma) * (1.0 - gamma),
        })
    }

    fn choose(&self, p: f64, _q: f64) -> Decision {
        Decision {
            gamma: p,
            loss0: p * p,
            loss1: (1.0 - p) * (1.0 - p),
        }
    }

    fn exposure_range(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn decision_from_exposure(&self, e: f64) -> Result<f64> {
        unit_from_exposure(e)
    }

    fn clambda_closed_form(&self, c_f: f64) -> Option<Constant> {
        Some(Constant::Finite(if c_f >= 1.0 {
            c_f / 2.0
        } else {
            (1.0 + c_f * c_f) / 4.0
        }))
    }
}

/// `λ(y,γ) = |y − γ|` on `Γ = [0,1]`. The optimal face at `p = ½` is all of `Γ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AbsoluteLoss;

impl Game for AbsoluteLoss {
    fn name(&self) -> &str {
        "absolute"
    }

    fn kind(&self) -> GameKind {
        GameKind::AbsoluteLoss
    }

    fn decision_set(&self) -> String {
        "[0,1]".into()
    }

    fn domain(&self) -> Domain {
        Domain::FullSquare
    }

    fn c0(&self) -> f64 {
        0.0
    }

    fn c1(&self) -> f64 {
        0.0
    }

    fn decision(&self, gamma: f64) -> Result<Decision> {
        check_unit(gamma)?;
        Ok(Decision {
            gamma,
            loss0: gamma,
            loss1: 1.0 - gamma,
        })
    }

    fn choose(&self, p: f64, q: f64) -> Decision {
        let gamma = if p < 0.5 {
            0.0
        } else if p > 0.5 {
            1.0
        } else {
            q
        };
        Decision {
            gamma,
            loss0: gamma,
            loss1: 1.0 - gamma,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.5]
    }

    fn exposure_range(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn decision_from_exposure(&self, e: f64) -> Result<f64> {
        unit_from_exposure(e)
    }

    fn clambda_closed_form(&self, c_f: f64) -> Option<Constant> {
        Some(Constant::Finite(0.5 * (1.0 + c_f * c_f).sqrt()))
    }
}

/// `λ(y,γ) = −y ln γ − (1−y) ln(1−γ)` on `Γ = (0,1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogLoss;

impl LogLoss {
    fn clamped(gamma: f64) -> Decision {
        let g = gamma.clamp(LOG_LOSS_CLAMP, 1.0 - LOG_LOSS_CLAMP);
        Decision {
            gamma: g,
            loss0: -(1.0 - g).ln(),
            loss1: -g.ln(),
        }
    }
}

impl Game for LogLoss {
    fn name(&self) -> &str {
        "log"
    }

    fn kind(&self) -> GameKind {
        GameKind::LogLoss
    }

    fn decision_set(&self) -> String {
        "(0,1)".into()
    }

    fn domain(&self) -> Domain {
        Domain::StrippedBoth
    }

    fn c0(&self) -> f64 {
        0.0
    }

    fn c1(&self) -> f64 {
        0.0
    }

    fn decision(&self, gamma: f64) -> Result<Decision> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("log-loss decision {gamma} outside (0,1)")));
        }
        Ok(Self::clamped(gamma))
    }

    fn choose(&self, p: f64, _q: f64) -> Decision {
        Self::clamped(p)
    }

    fn exposure_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn decision_from_exposure(&self, e: f64) -> Result<f64> {
        if e.is_nan() {
            return Err(invalid("exposure is NaN"));
        }
        let gamma = 1.0 / (1.0 + e.exp());
        Ok(gamma.clamp(LOG_LOSS_CLAMP, 1.0 - LOG_LOSS_CLAMP))
    }

    /// Direct maximisation of `p(1−p)(ln²((1−p)/p) + C_F²)`, which is
    /// symmetric about `½`, over `(0, ½]`.
    fn clambda_closed_form(&self, c_f: f64) -> Option<Constant> {
        let c2 = c_f * c_f;
        let h = |p: f64| {
            let l = ((1.0 - p) / p).ln();
            p * (1.0 - p) * (l * l + c2)
        };
        let grid: Vec<f64> = (0..=2000)
            .map(|k| 10f64.powf(-15.0 + 15.0 * k as f64 / 2000.0) * 0.5)
            .collect();
        let (k, _) = grid
            .iter()
            .enumerate()
            .map(|(k, &p)| (k, h(p)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("grid");
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(grid.len() - 1)];
        let (_, v) = golden_section_max(lo, hi, 200, h);
        Some(Constant::Finite(v.max(h(grid[k])).sqrt()))
    }
}
