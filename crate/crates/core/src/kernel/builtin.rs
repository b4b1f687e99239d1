use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::game::Constant;

use super::{sup_diagonal, DataRange, Kernel, KernelKind};

/// `K(x,x') = ½ exp(−|x−x'|)` on ℝ, the kernel of the Sobolev space with norm
/// `√(∫f² + ∫f'²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sobolev;

impl Kernel for Sobolev {
    fn name(&self) -> &str {
        "sobolev"
    }

    fn kind(&self) -> KernelKind {
        KernelKind::Sobolev
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        0.5 * (-(a[0] - b[0]).abs()).exp()
    }

    fn c_f(&self, _range: Option<&DataRange>) -> Constant {
        Constant::Finite(std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// `K(x,x') = exp(−‖x−x'‖² / (2 w²))` on ℝ^d.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian {
    width: f64,
    dim: usize,
}

impl Gaussian {
    pub fn new(width: f64) -> Result<Self> {
        Self::with_dim(width, 1)
    }

    pub fn with_dim(width: f64, dim: usize) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid(format!(
                "gaussian width must be positive, got {width}"
            )));
        }
        if dim == 0 {
            return Err(invalid("kernel dimension must be positive"));
        }
        Ok(Gaussian { width, dim })
    }

    pub fn width(&self) -> f64 {
        self.width
    }
}

impl Kernel for Gaussian {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn kind(&self) -> KernelKind {
        KernelKind::Gaussian
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-d2 / (2.0 * self.width * self.width)).exp()
    }

    fn c_f(&self, _range: Option<&DataRange>) -> Constant {
        Constant::Finite(1.0)
    }
}

/// `K(x,x') = x·x' + offset` on ℝ^d. Its diagonal is unbounded, so `C_F`
/// needs a declared data range.
#[derive(Debug, Clone)]
pub struct Linear {
    offset: f64,
    dim: usize,
    range: Option<DataRange>,
}

impl Linear {
    pub fn new(offset: f64, range: Option<DataRange>) -> Result<Self> {
        let dim = range.as_ref().map_or(1, |r| r.lo.len());
        Self::with_dim(offset, dim, range)
    }

    pub fn with_dim(offset: f64, dim: usize, range: Option<DataRange>) -> Result<Self> {
        if !(offset >= 0.0 && offset.is_finite()) {
            return Err(invalid(format!(
                "linear kernel offset must be ≥ 0, got {offset}"
            )));
        }
        if dim == 0 {
            return Err(invalid("kernel dimension must be positive"));
        }
        if let Some(r) = &range {
            if r.lo.len() != dim {
                return Err(invalid(
                    "declared range dimension differs from kernel dimension",
                ));
            }
        }
        Ok(Linear { offset, dim, range })
    }
}

impl Kernel for Linear {
    fn name(&self) -> &str {
        "linear"
    }

    fn kind(&self) -> KernelKind {
        KernelKind::Linear
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() + self.offset
    }

    fn c_f(&self, range: Option<&DataRange>) -> Constant {
        match range.or(self.range.as_ref()) {
            Some(r) => Constant::Finite(sup_diagonal(self, r)),
            None => Constant::Unbounded,
        }
    }
}

type KernelFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A user-supplied kernel on fixed-length real vectors.
///
/// Symmetry and positive definiteness are the caller's responsibility; a
/// violation surfaces as [`crate::Error::NotPositiveDefinite`] from norm
/// computations.
#[derive(Clone)]
pub struct CustomKernel {
    name: String,
    dim: usize,
    f: Arc<KernelFn>,
    range: Option<DataRange>,
}

impl CustomKernel {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        range: Option<DataRange>,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("kernel dimension must be positive"));
        }
        if let Some(r) = &range {
            if r.lo.len() != dim {
                return Err(invalid(
                    "declared range dimension differs from kernel dimension",
                ));
            }
        }
        Ok(CustomKernel {
            name: name.into(),
            dim,
            f: Arc::new(f),
            range,
        })
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("range", &self.range)
            .finish_non_exhaustive()
    }
}

impl Kernel for CustomKernel {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> KernelKind {
        KernelKind::Custom
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        (self.f)(a, b)
    }

    fn c_f(&self, range: Option<&DataRange>) -> Constant {
        match range.or(self.range.as_ref()) {
            Some(r) => Constant::Finite(sup_diagonal(self, r)),
            None => Constant::Unbounded,
        }
    }
}
