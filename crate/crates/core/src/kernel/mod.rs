//! Kernels on the data space, Gram matrices, and finite kernel expansions.
//!
//! Hilbert-space quantities are always computed through kernel sums; feature
//! maps are never materialised.

mod builtin;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::Constant;
use crate::numeric::golden_section_max;

pub use builtin::{CustomKernel, Gaussian, Linear, Sobolev};

/// A point of the data space `X = ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Datum(pub Vec<f64>);

impl Datum {
    pub fn scalar(x: f64) -> Self {
        Datum(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<f64> for Datum {
    fn from(x: f64) -> Self {
        Datum::scalar(x)
    }
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v:?}")?;
        }
        Ok(())
    }
}

/// A compact box `[lo, hi]` in the data space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRange {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DataRange {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid(
                "data range bounds must have equal, non-zero length",
            ));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite())
        {
            return Err(invalid("data range must be a finite box with lo ≤ hi"));
        }
        Ok(DataRange { lo, hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Sobolev,
    Gaussian,
    Linear,
    Custom,
}

/// A symmetric positive-definite function on the data space.
pub trait Kernel: Send + Sync + fmt::Debug {
    /// Registry name.
    fn name(&self) -> &str;

    fn kind(&self) -> KernelKind;

    /// Dimension of the data space.
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64;

    /// `C_F = sup_x √K(x,x)`, over `range` when the diagonal is not constant.
    fn c_f(&self, range: Option<&DataRange>) -> Constant;

    fn check_datum(&self, x: &Datum) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(invalid(format!(
                "datum of dimension {} for a kernel on ℝ^{}",
                x.dim(),
                self.dim()
            )));
        }
        if x.0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("datum has non-finite coordinates"));
        }
        Ok(())
    }
}

/// `G[i][j] = K(points[i], points[j])`.
pub fn gram(kernel: &dyn Kernel, points: &[Datum]) -> DMatrix<f64> {
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(points[i].as_slice(), points[j].as_slice());
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Grid points per dimension for sup-diagonal searches over a box.
const SUP_GRID_POINTS: usize = 10_000;

/// `sup √K(x,x)` over a box, by grid search plus coordinate-wise golden-section
/// refinement around the best grid point.
pub fn sup_diagonal(kernel: &dyn Kernel, range: &DataRange) -> f64 {
    let d = range.lo.len();
    let per_dim = ((SUP_GRID_POINTS as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
    let diag = |x: &[f64]| kernel.eval(x, x).max(0.0);
    let coord = |i: usize, k: usize| {
        range.lo[i] + (range.hi[i] - range.lo[i]) * k as f64 / (per_dim - 1) as f64
    };

    let mut best = range.lo.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut idx = vec![0usize; d];
    'outer: loop {
        let x: Vec<f64> = idx.iter().enumerate().map(|(i, &k)| coord(i, k)).collect();
        let v = diag(&x);
        if v > best_val {
            best_val = v;
            best = x;
        }
        for k in idx.iter_mut() {
            *k += 1;
            if *k < per_dim {
                continue 'outer;
            }
            *k = 0;
        }
        break;
    }

    for i in 0..d {
        let step = (range.hi[i] - range.lo[i]) / (per_dim - 1) as f64;
        let lo = (best[i] - step).max(range.lo[i]);
        let hi = (best[i] + step).min(range.hi[i]);
        let (xi, v) = golden_section_max(lo, hi, 100, |t| {
            let mut probe = best.clone();
            probe[i] = t;
            diag(&probe)
        });
        if v > best_val {
            best_val = v;
            best[i] = xi;
        }
    }
    best_val.sqrt()
}

/// A function `f = Σ_i α_i K(z_i, ·)` in the RKHS of `kernel`.
#[derive(Debug, Clone)]
pub struct KernelExpansion {
    kernel: Arc<dyn Kernel>,
    centers: Vec<Datum>,
    weights: Vec<f64>,
}

/// Tolerance below zero for the quadratic form `αᵀGα`.
pub const PSD_TOLERANCE: f64 = 1e-8;

impl KernelExpansion {
    pub fn new(kernel: Arc<dyn Kernel>, centers: Vec<Datum>, weights: Vec<f64>) -> Result<Self> {
        if centers.len() != weights.len() {
            return Err(invalid(format!(
                "{} centers but {} weights",
                centers.len(),
                weights.len()
            )));
        }
        for c in &centers {
            kernel.check_datum(c)?;
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("expansion weights must be finite"));
        }
        Ok(KernelExpansion {
            kernel,
            centers,
            weights,
        })
    }

    pub fn zero(kernel: Arc<dyn Kernel>) -> Self {
        KernelExpansion {
            kernel,
            centers: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn kernel(&self) -> &Arc<dyn Kernel> {
        &self.kernel
    }

    pub fn centers(&self) -> &[Datum] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_i α_i K(z_i, x)`
    pub fn eval(&self, x: &Datum) -> f64 {
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(z, a)| a * self.kernel.eval(z.as_slice(), x.as_slice()))
            .sum()
    }

    /// `⟨f, g⟩` for two expansions over the same kernel.
    pub fn inner(&self, other: &KernelExpansion) -> f64 {
        let mut s = 0.0;
        for (zi, ai) in self.centers.iter().zip(&self.weights) {
            for (zj, aj) in other.centers.iter().zip(&other.weights) {
                s += ai * aj * self.kernel.eval(zi.as_slice(), zj.as_slice());
            }
        }
        s
    }

    /// `√(αᵀ G α)`.
    pub fn rkhs_norm(&self) -> Result<f64> {
        if self.centers.is_empty() {
            return Ok(0.0);
        }
        let g = gram(self.kernel.as_ref(), &self.centers);
        let a = DVector::from_column_slice(&self.weights);
        let q = a.dot(&(&g * &a));
        if q < -PSD_TOLERANCE {
            return Err(Error::NotPositiveDefinite(q));
        }
        Ok(q.max(0.0).sqrt())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        KernelExpansion {
            kernel: self.kernel.clone(),
            centers: self.centers.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }
}

#[cfg(test)]
mod tests;
