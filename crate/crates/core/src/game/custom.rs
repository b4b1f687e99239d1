use serde::Deserialize;

use crate::error::{invalid, Result};

use super::{Decision, Domain, Game, GameKind};

/// A convex game given by a polyline on the southwest boundary of its
/// superdecision set.
///
/// Vertices are loss pairs `(λ(0,γ), λ(1,γ))` with `λ(0,·)` strictly increasing
/// and `λ(1,·)` strictly decreasing. Decisions are the polyline parameter
/// `γ ∈ [0, m]`: `γ = i + t` is the point `(1−t)·v_i + t·v_{i+1}`.
#[derive(Debug, Clone)]
pub struct CustomConvex {
    vertices: Vec<(f64, f64)>,
    /// `p` at which segment `k` is the whole optimal face.
    thresholds: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct CustomDoc {
    kind: String,
    boundary: Vec<[f64; 2]>,
}

impl CustomConvex {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(invalid("custom game needs at least one boundary point"));
        }
        if vertices
            .iter()
            .any(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(invalid("custom game boundary must be finite"));
        }
        for (k, w) in vertices.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) || !(w[1].1 < w[0].1) {
                return Err(invalid(format!(
                    "boundary points {k} and {} must be strictly increasing in loss0 and strictly decreasing in loss1",
                    k + 1
                )));
            }
        }
        let slopes: Vec<f64> = vertices
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        for (k, s) in slopes.windows(2).enumerate() {
            if s[1] < s[0] - 1e-12 * s[0].abs().max(1.0) {
                return Err(invalid(format!(
                    "boundary is not convex at point {}",
                    k + 1
                )));
            }
        }
        // Segment k minimises (1−p)x + py exactly when (1−p) + p·slope = 0.
        let thresholds = slopes.iter().map(|s| 1.0 / (1.0 - s)).collect();
        Ok(CustomConvex {
            vertices,
            thresholds,
        })
    }

    /// Parses `{"kind":"custom","boundary":[[loss0,loss1],...]}`.
    pub fn from_json(doc: &str) -> Result<Self> {
        let d: CustomDoc = serde_json::from_str(doc)?;
        Self::from_doc(d)
    }

    pub fn from_value(v: &serde_json::Value) -> Result<Self> {
        let d: CustomDoc = serde_json::from_value(v.clone())?;
        Self::from_doc(d)
    }

    fn from_doc(d: CustomDoc) -> Result<Self> {
        if d.kind != "custom" {
            return Err(invalid(format!(
                "expected kind \"custom\", got {:?}",
                d.kind
            )));
        }
        Self::new(d.boundary.into_iter().map(|[a, b]| (a, b)).collect())
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    fn segments(&self) -> usize {
        self.vertices.len() - 1
    }

    fn point(&self, gamma: f64) -> (f64, f64) {
        let m = self.segments();
        if m == 0 {
            return self.vertices[0];
        }
        let i = (gamma.floor() as usize).min(m - 1);
        let t = gamma - i as f64;
        let (a0, b0) = self.vertices[i];
        let (a1, b1) = self.vertices[i + 1];
        (a0 + t * (a1 - a0), b0 + t * (b1 - b0))
    }

    /// Polyline parameter of the boundary point with first coordinate `loss0`.
    fn gamma_at_loss0(&self, loss0: f64) -> f64 {
        let m = self.segments();
        if m == 0 || loss0 <= self.vertices[0].0 {
            return 0.0;
        }
        if loss0 >= self.vertices[m].0 {
            return m as f64;
        }
        let i = self.vertices.partition_point(|v| v.0 <= loss0) - 1;
        let (a0, _) = self.vertices[i];
        let (a1, _) = self.vertices[i + 1];
        i as f64 + (loss0 - a0) / (a1 - a0)
    }

    fn make(&self, gamma: f64) -> Decision {
        let (loss0, loss1) = self.point(gamma);
        Decision {
            gamma,
            loss0,
            loss1,
        }
    }
}

impl Game for CustomConvex {
    fn name(&self) -> &str {
        "custom"
    }

    fn kind(&self) -> GameKind {
        GameKind::CustomConvex
    }

    fn decision_set(&self) -> String {
        format!("polyline parameter in [0,{}]", self.segments())
    }

    fn domain(&self) -> Domain {
        Domain::FullSquare
    }

    fn c0(&self) -> f64 {
        self.vertices[0].0
    }

    fn c1(&self) -> f64 {
        self.vertices[self.segments()].1
    }

    fn decision(&self, gamma: f64) -> Result<Decision> {
        let m = self.segments() as f64;
        if !(0.0..=m).contains(&gamma) {
            return Err(invalid(format!("decision {gamma} outside [0,{m}]")));
        }
        Ok(self.make(gamma))
    }

    fn choose(&self, p: f64, q: f64) -> Decision {
        let m = self.segments();
        if p <= 0.0 {
            return self.make(0.0);
        }
        if p >= 1.0 {
            return self.make(m as f64);
        }
        // Segments with threshold below p lie northwest of the optimum.
        let first = self.thresholds.partition_point(|t| *t < p);
        let last = self.thresholds.partition_point(|t| *t <= p);
        if first == last {
            return self.make(first as f64);
        }
        let (a, b) = (self.vertices[first], self.vertices[last]);
        let loss0 = (1.0 - q) * a.0 + q * b.0;
        let loss1 = (1.0 - q) * a.1 + q * b.1;
        Decision {
            gamma: self.gamma_at_loss0(loss0),
            loss0,
            loss1,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut t = self.thresholds.clone();
        t.dedup();
        t
    }

    fn exposure_range(&self) -> (f64, f64) {
        let (a0, b0) = self.vertices[0];
        let (am, bm) = self.vertices[self.segments()];
        (bm - am, b0 - a0)
    }

    fn decision_from_exposure(&self, e: f64) -> Result<f64> {
        let (lo, hi) = self.exposure_range();
        if !(lo..=hi).contains(&e) {
            return Err(invalid(format!("exposure {e} outside [{lo},{hi}]")));
        }
        let exps: Vec<f64> = self.vertices.iter().map(|(a, b)| b - a).collect();
        // Exposure strictly decreases along the polyline.
        for (i, w) in exps.windows(2).enumerate() {
            if e <= w[0] && e >= w[1] {
                return Ok(i as f64 + (w[0] - e) / (w[0] - w[1]));
            }
        }
        Ok(0.0)
    }
}
