//! Data sequences for experiments.
//!
//! Randomness is keyed by `(seed, round)`: every round reseeds a ChaCha
//! stream, so a round's draws do not depend on how many numbers earlier
//! rounds consumed.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::kernel::Datum;

/// Source of data points and outcomes for the online protocol.
pub trait Generator: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Datum of round `round` (1-based).
    fn datum(&self, seed: u64, round: usize) -> Result<Datum>;

    /// Outcome of round `round` once the forecast `p` has been announced.
    fn outcome(&self, seed: u64, round: usize, x: &Datum, p: f64) -> Result<u8>;

    /// `P(y = 1 | x)` when the generator has one.
    fn conditional_probability(&self, _x: &Datum) -> Option<f64> {
        None
    }

    /// Largest horizon the generator can serve.
    fn max_horizon(&self) -> Option<usize> {
        None
    }
}

/// Stream reserved for the datum of each round; outcomes use the next one.
fn round_rng(seed: u64, round: usize, outcome: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * round as u64 + outcome as u64);
    rng
}

fn uniform_datum(seed: u64, round: usize) -> Datum {
    Datum::scalar(round_rng(seed, round, false).gen_range(-1.0..=1.0))
}

fn bernoulli(seed: u64, round: usize, prob: f64) -> u8 {
    round_rng(seed, round, true).gen_bool(prob.clamp(0.0, 1.0)) as u8
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `x ~ U[−1, 1]`, `y ~ Bernoulli(σ(Σ_k w_k x^k))`.
#[derive(Debug, Clone)]
pub struct IidLogistic {
    weights: Vec<f64>,
}

impl IidLogistic {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid(
                "iid_logistic needs a non-empty list of finite weights",
            ));
        }
        Ok(IidLogistic { weights })
    }
}

impl Generator for IidLogistic {
    fn name(&self) -> &str {
        "iid_logistic"
    }

    fn datum(&self, seed: u64, round: usize) -> Result<Datum> {
        Ok(uniform_datum(seed, round))
    }

    fn outcome(&self, seed: u64, round: usize, x: &Datum, _p: f64) -> Result<u8> {
        let prob = self.conditional_probability(x).expect("logistic model");
        Ok(bernoulli(seed, round, prob))
    }

    fn conditional_probability(&self, x: &Datum) -> Option<f64> {
        let t = x.as_slice()[0];
        let z = self.weights.iter().rev().fold(0.0, |acc, w| acc * t + w);
        Some(sigmoid(z))
    }
}

/// Threshold rule `x > c` or `x < c` on the first coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    pub threshold: f64,
    pub above: bool,
}

impl ThresholdRule {
    /// Parses `x>c` or `x<c`, whitespace allowed.
    pub fn parse(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || invalid(format!("rule {s:?} is not of the form x>c or x<c"));
        let rest = compact.strip_prefix('x').ok_or_else(bad)?;
        let (above, num) = if let Some(n) = rest.strip_prefix('>') {
            (true, n)
        } else if let Some(n) = rest.strip_prefix('<') {
            (false, n)
        } else {
            return Err(bad());
        };
        let threshold: f64 = num.parse().map_err(|_| bad())?;
        if !threshold.is_finite() {
            return Err(bad());
        }
        Ok(ThresholdRule { threshold, above })
    }

    pub fn apply(&self, x: &Datum) -> u8 {
        let t = x.as_slice()[0];
        (if self.above {
            t > self.threshold
        } else {
            t < self.threshold
        }) as u8
    }
}

/// `x ~ U[−1, 1]`, `y = rule(x)` flipped with probability `noise_rate`.
#[derive(Debug, Clone)]
pub struct Deterministic {
    rule: ThresholdRule,
    noise_rate: f64,
}

impl Deterministic {
    pub fn new(rule: &str, noise_rate: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&noise_rate) {
            return Err(invalid(format!("noise_rate {noise_rate} outside [0, ½]")));
        }
        Ok(Deterministic {
            rule: ThresholdRule::parse(rule)?,
            noise_rate,
        })
    }
}

impl Generator for Deterministic {
    fn name(&self) -> &str {
        "deterministic"
    }

    fn datum(&self, seed: u64, round: usize) -> Result<Datum> {
        Ok(uniform_datum(seed, round))
    }

    fn outcome(&self, seed: u64, round: usize, x: &Datum, _p: f64) -> Result<u8> {
        let y = self.rule.apply(x);
        Ok(y ^ bernoulli(seed, round, self.noise_rate))
    }

    fn conditional_probability(&self, x: &Datum) -> Option<f64> {
        Some(if self.rule.apply(x) == 1 {
            1.0 - self.noise_rate
        } else {
            self.noise_rate
        })
    }
}

/// `x ~ U[−1, 1]`; `y = 1` exactly when the announced `p ≤ ½`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Adversarial;

impl Generator for Adversarial {
    fn name(&self) -> &str {
        "adversarial"
    }

    fn datum(&self, seed: u64, round: usize) -> Result<Datum> {
        Ok(uniform_datum(seed, round))
    }

    fn outcome(&self, _seed: u64, _round: usize, _x: &Datum, p: f64) -> Result<u8> {
        Ok((p <= 0.5) as u8)
    }
}

/// A recorded `(x, y)` sequence read from a CSV file with `x` and `y` columns.
///
/// Multi-dimensional `x` values are space-separated within the cell.
#[derive(Debug, Clone)]
pub struct Replay {
    path: PathBuf,
    rows: Vec<(Datum, u8)>,
}

impl Replay {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut rdr = csv::Reader::from_path(&path)?;
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.clone(),
            line,
            message,
        };
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
        };
        let (xi, yi) = (col("x")?, col("y")?);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let x = parse_datum(rec.get(xi).unwrap_or(""))
                .map_err(|m| parse_err(line, format!("column x: {m}")))?;
            let y = match rec.get(yi).map(str::trim) {
                Some("0") => 0,
                Some("1") => 1,
                other => {
                    return Err(parse_err(
                        line,
                        format!("column y: expected 0 or 1, got {other:?}"),
                    ))
                }
            };
            rows.push((x, y));
        }
        if rows.is_empty() {
            return Err(parse_err(1, "no data rows".into()));
        }
        Ok(Replay { path, rows })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn rows(&self) -> &[(Datum, u8)] {
        &self.rows
    }

    fn row(&self, round: usize) -> Result<&(Datum, u8)> {
        round
            .checked_sub(1)
            .and_then(|i| self.rows.get(i))
            .ok_or_else(|| {
                invalid(format!(
                    "replay has {} rows, round {round} requested",
                    self.rows.len()
                ))
            })
    }
}

/// Parses a space-separated list of finite numbers.
pub(crate) fn parse_datum(cell: &str) -> std::result::Result<Datum, String> {
    let v: Vec<f64> = cell
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("{t:?} is not a number"))
        })
        .collect::<std::result::Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty datum".into());
    }
    if v.iter().any(|t| !t.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    Ok(Datum(v))
}

impl Generator for Replay {
    fn name(&self) -> &str {
        "replay"
    }

    fn datum(&self, _seed: u64, round: usize) -> Result<Datum> {
        Ok(self.row(round)?.0.clone())
    }

    fn outcome(&self, _seed: u64, round: usize, _x: &Datum, _p: f64) -> Result<u8> {
        Ok(self.row(round)?.1)
    }

    fn max_horizon(&self) -> Option<usize> {
        Some(self.rows.len())
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    #[test]
    fn deterministic_rule_without_noise() {
        let g = Deterministic::new("x>0", 0.0).unwrap();
        assert_eq!(g.outcome(1, 1, &Datum::scalar(0.5), 0.5).unwrap(), 1);
        assert_eq!(g.outcome(1, 1, &Datum::scalar(-0.5), 0.5).unwrap(), 0);
        let g = Deterministic::new(" x < 0.25 ", 0.0).unwrap();
        assert_eq!(g.outcome(1, 1, &Datum::scalar(0.0), 0.5).unwrap(), 1);
    }

    #[test]
    fn bad_rules_and_noise_are_rejected() {
        for rule in ["y>0", "x=0", "x>", "x>abc", "x>inf"] {
            assert!(Deterministic::new(rule, 0.0).is_err(), "{rule}");
        }
        assert!(Deterministic::new("x>0", 0.6).is_err());
        assert!(Deterministic::new("x>0", -0.1).is_err());
    }

    #[test]
    fn adversary_opposes_the_forecast() {
        let x = Datum::scalar(0.0);
        assert_eq!(Adversarial.outcome(0, 1, &x, 0.3).unwrap(), 1);
        assert_eq!(Adversarial.outcome(0, 1, &x, 0.5).unwrap(), 1);
        assert_eq!(Adversarial.outcome(0, 1, &x, 0.7).unwrap(), 0);
    }

    #[test]
    fn same_seed_gives_same_sequence() {
        let g = IidLogistic::new(vec![0.2, 2.0, -1.0]).unwrap();
        let draw = |seed| -> Vec<(Datum, u8)> {
            (1..=50)
                .map(|n| {
                    let x = g.datum(seed, n).unwrap();
                    let y = g.outcome(seed, n, &x, 0.5).unwrap();
                    (x, y)
                })
                .collect()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
        assert!(draw(9).iter().all(|(x, _)| x.as_slice()[0].abs() <= 1.0));
    }

    #[test]
    fn noise_rate_is_respected() {
        let g = Deterministic::new("x>0", 0.1).unwrap();
        let n = 20_000;
        let flips = (1..=n)
            .filter(|&r| {
                let x = g.datum(3, r).unwrap();
                g.outcome(3, r, &x, 0.5).unwrap() != (x.as_slice()[0] > 0.0) as u8
            })
            .count();
        let rate = flips as f64 / n as f64;
        assert!((rate - 0.1).abs() < 0.01, "{rate}");
    }

    #[test]
    fn logistic_probability() {
        let g = IidLogistic::new(vec![0.0, 3.0]).unwrap();
        assert_eq!(g.conditional_probability(&Datum::scalar(0.0)), Some(0.5));
        let p = g.conditional_probability(&Datum::scalar(1.0)).unwrap();
        assert!((p - 1.0 / (1.0 + (-3.0f64).exp())).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn replay_reads_x_and_y_columns() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "n,x,y\n1,0.5,1\n2,-0.25,0").unwrap();
        let r = Replay::from_path(f.path()).unwrap();
        assert_eq!(r.max_horizon(), Some(2));
        assert_eq!(r.datum(0, 2).unwrap(), Datum::scalar(-0.25));
        assert_eq!(r.outcome(0, 1, &Datum::scalar(0.5), 0.9).unwrap(), 1);
        assert!(r.datum(0, 3).is_err());
    }

    #[test]
    fn replay_parse_errors_carry_line_numbers() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x,y\n0.5,1\n0.1,0\nabc,1").unwrap();
        match Replay::from_path(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x,y\n0.5,2").unwrap();
        assert!(matches!(
            Replay::from_path(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x,z\n0.5,1").unwrap();
        assert!(matches!(
            Replay::from_path(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
