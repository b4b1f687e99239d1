//! Comparator rules built from config specs and the realised data.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::{Game, GameKind};
use crate::kernel::{gram, Datum, Kernel, KernelExpansion};
use crate::protocol::Comparator;

use super::generators::Generator;

/// A comparator as written in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComparatorSpec {
    /// `D ≡ G(½, ½)`: exposure identically zero.
    Zero,
    /// Random centers drawn in the data's range, rescaled to the given norm.
    Random {
        #[serde(default = "default_centers")]
        centers: usize,
        #[serde(default = "default_norm")]
        norm: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Smoothed Bayes rule of the generator, or a kernel smoother of the
    /// realised outcomes when the generator has no conditional probability.
    Matched,
    Explicit {
        centers: Vec<Datum>,
        weights: Vec<f64>,
        #[serde(default)]
        label: Option<String>,
    },
}

fn default_centers() -> usize {
    5
}

fn default_norm() -> f64 {
    1.0
}

/// Centers of the matched fit.
pub const MATCHED_CENTERS: usize = 11;
/// Ridge term of the matched fit.
pub const MATCHED_RIDGE: f64 = 1e-3;
/// Matched target probabilities are clipped to `[CLIP, 1 − CLIP]`.
pub const MATCHED_CLIP: f64 = 0.02;

impl ComparatorSpec {
    pub fn label(&self) -> String {
        match self {
            ComparatorSpec::Zero => "zero".into(),
            ComparatorSpec::Random { centers, norm, .. } => format!("random_{centers}x{norm}"),
            ComparatorSpec::Matched => "matched".into(),
            ComparatorSpec::Explicit { label, .. } => {
                label.clone().unwrap_or_else(|| "explicit".into())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ComparatorSpec::Random { centers, norm, .. } => {
                if *centers == 0 || !(*norm >= 0.0 && norm.is_finite()) {
                    return Err(invalid(
                        "random comparator needs ≥ 1 center and a finite norm ≥ 0",
                    ));
                }
            }
            ComparatorSpec::Explicit {
                centers, weights, ..
            } if centers.len() != weights.len() => {
                return Err(invalid(
                    "explicit comparator needs as many weights as centers",
                ));
            }
            _ => {}
        }
        Ok(())
    }

    /// Builds the comparator for a run over data `xs` with outcomes `ys`.
    pub fn build(
        &self,
        game: &dyn Game,
        kernel: &Arc<dyn Kernel>,
        generator: &dyn Generator,
        xs: &[Datum],
        ys: &[u8],
        run_seed: u64,
    ) -> Result<Comparator> {
        let f = match self {
            ComparatorSpec::Zero => KernelExpansion::zero(kernel.clone()),
            ComparatorSpec::Random {
                centers,
                norm,
                seed,
            } => random_expansion(kernel, xs, *centers, *norm, seed.unwrap_or(run_seed))?,
            ComparatorSpec::Matched => matched_expansion(game, kernel, generator, xs, ys)?,
            ComparatorSpec::Explicit {
                centers, weights, ..
            } => KernelExpansion::new(kernel.clone(), centers.clone(), weights.clone())?,
        };
        Comparator::new(self.label(), f)
    }
}

/// Per-coordinate bounding box of the data, `[−1, 1]` when empty.
fn data_box(xs: &[Datum]) -> (Vec<f64>, Vec<f64>) {
    let d = xs.first().map_or(1, Datum::dim);
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for x in xs {
        for (i, v) in x.as_slice().iter().enumerate() {
            lo[i] = lo[i].min(*v);
            hi[i] = hi[i].max(*v);
        }
    }
    if xs.is_empty() {
        return (vec![-1.0; d], vec![1.0; d]);
    }
    (lo, hi)
}

fn random_expansion(
    kernel: &Arc<dyn Kernel>,
    xs: &[Datum],
    n: usize,
    norm: f64,
    seed: u64,
) -> Result<KernelExpansion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let (lo, hi) = data_box(xs);
    let centers: Vec<Datum> = (0..n)
        .map(|_| {
            Datum(
                lo.iter()
                    .zip(&hi)
                    .map(|(a, b)| a + (b - a) * rng.gen::<f64>())
                    .collect(),
            )
        })
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = KernelExpansion::new(kernel.clone(), centers, weights)?;
    let current = f.rkhs_norm()?;
    Ok(if current > 0.0 {
        f.scaled(norm / current)
    } else {
        f
    })
}

/// Up to [`MATCHED_CENTERS`] distinct data points at evenly spaced ranks of
/// the first coordinate.
fn quantile_centers(xs: &[Datum]) -> Vec<Datum> {
    let mut sorted: Vec<&Datum> = xs.iter().collect();
    sorted.sort_by(|a, b| a.as_slice()[0].total_cmp(&b.as_slice()[0]));
    sorted.dedup();
    let m = MATCHED_CENTERS.min(sorted.len());
    if m <= 1 {
        return sorted.into_iter().take(1).cloned().collect();
    }
    let mut out: Vec<Datum> = (0..m)
        .map(|k| sorted[k * (sorted.len() - 1) / (m - 1)].clone())
        .collect();
    out.dedup();
    out
}

fn matched_expansion(
    game: &dyn Game,
    kernel: &Arc<dyn Kernel>,
    generator: &dyn Generator,
    xs: &[Datum],
    ys: &[u8],
) -> Result<KernelExpansion> {
    let centers = quantile_centers(xs);
    if centers.is_empty() {
        return Ok(KernelExpansion::zero(kernel.clone()));
    }
    let prob = |z: &Datum| -> f64 {
        generator.conditional_probability(z).unwrap_or_else(|| {
            // Kernel-weighted average of the realised outcomes.
            let (mut num, mut den) = (0.0, 0.0);
            for (x, y) in xs.iter().zip(ys) {
                let w = kernel.eval(z.as_slice(), x.as_slice()).max(0.0);
                num += w * *y as f64;
                den += w;
            }
            if den > 0.0 {
                num / den
            } else {
                0.5
            }
        })
    };
    let targets: Vec<f64> = centers
        .iter()
        .map(|z| {
            let p = prob(z).clamp(MATCHED_CLIP, 1.0 - MATCHED_CLIP);
            game.choose(p, 0.5).exposure()
        })
        .collect();
    let n = centers.len();
    let g = gram(kernel.as_ref(), &centers) + DMatrix::identity(n, n) * MATCHED_RIDGE;
    let alpha = g
        .cholesky()
        .ok_or_else(|| invalid("matched comparator: Gram matrix is not positive definite"))?
        .solve(&DVector::from_vec(targets));
    let f = KernelExpansion::new(kernel.clone(), centers, alpha.iter().copied().collect())?;

    // Keep D inside Γ on the run's data for games with bounded exposures.
    let (e_min, e_max) = game.exposure_range();
    let bounded = matches!(
        game.kind(),
        GameKind::SquareLoss | GameKind::AbsoluteLoss | GameKind::CustomConvex
    );
    if bounded && e_min.is_finite() && e_max.is_finite() {
        let mut scale = 1.0f64;
        for x in xs {
            let v = f.eval(x);
            if v > e_max {
                scale = scale.min(e_max / v);
            } else if v < e_min {
                scale = scale.min(e_min / v);
            }
        }
        if scale < 1.0 {
            return Ok(f.scaled(scale.max(0.0) * (1.0 - 1e-9)));
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::generators::{Adversarial, Deterministic};
    use crate::game::{AbsoluteLoss, SquareLoss};
    use crate::kernel::Sobolev;

    fn data() -> (Vec<Datum>, Vec<u8>) {
        let xs: Vec<Datum> = (0..200)
            .map(|i| Datum::scalar((i as f64 * 0.37).sin()))
            .collect();
        let ys = xs.iter().map(|x| (x.as_slice()[0] > 0.0) as u8).collect();
        (xs, ys)
    }

    #[test]
    fn specs_parse() {
        let specs: Vec<ComparatorSpec> = serde_json::from_str(
            r#"[{"type":"zero"},{"type":"random"},{"type":"matched"},
                {"type":"explicit","centers":[[0.0]],"weights":[0.5],"label":"half"}]"#,
        )
        .unwrap();
        assert_eq!(specs[0], ComparatorSpec::Zero);
        assert_eq!(
            specs[1],
            ComparatorSpec::Random {
                centers: 5,
                norm: 1.0,
                seed: None
            }
        );
        assert_eq!(specs[3].label(), "half");
        for s in &specs {
            s.validate().unwrap();
        }
        let bad = ComparatorSpec::Explicit {
            centers: vec![],
            weights: vec![1.0],
            label: None,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn random_comparator_has_requested_norm() {
        let (xs, ys) = data();
        let k: Arc<dyn Kernel> = Arc::new(Sobolev);
        let spec = ComparatorSpec::Random {
            centers: 5,
            norm: 1.0,
            seed: Some(4),
        };
        let c = spec
            .build(&SquareLoss, &k, &Adversarial, &xs, &ys, 0)
            .unwrap();
        assert!((c.norm() - 1.0).abs() < 1e-12);
        assert_eq!(c.exposure_fn().centers().len(), 5);
        let again = spec
            .build(&SquareLoss, &k, &Adversarial, &xs, &ys, 0)
            .unwrap();
        assert_eq!(c.exposure_fn().weights(), again.exposure_fn().weights());
    }

    #[test]
    fn matched_comparator_is_admissible_and_informative() {
        let (xs, ys) = data();
        let k: Arc<dyn Kernel> = Arc::new(Sobolev);
        let gen = Deterministic::new("x>0", 0.0).unwrap();
        for game in [&SquareLoss as &dyn Game, &AbsoluteLoss] {
            for g in [&gen as &dyn Generator, &Adversarial] {
                let c = ComparatorSpec::Matched
                    .build(game, &k, g, &xs, &ys, 0)
                    .unwrap();
                let loss: f64 = xs
                    .iter()
                    .zip(&ys)
                    .map(|(x, y)| c.decision(game, x).unwrap().loss(*y))
                    .sum();
                let zero = ComparatorSpec::Zero
                    .build(game, &k, g, &xs, &ys, 0)
                    .unwrap();
                let base: f64 = xs
                    .iter()
                    .zip(&ys)
                    .map(|(x, y)| zero.decision(game, x).unwrap().loss(*y))
                    .sum();
                assert!(loss < base, "{} {}: {loss} ≥ {base}", game.name(), g.name());
            }
        }
    }

    #[test]
    fn quantile_centers_are_distinct() {
        let (xs, _) = data();
        let c = quantile_centers(&xs);
        assert_eq!(c.len(), MATCHED_CENTERS);
        assert!(c
            .windows(2)
            .all(|w| w[0].as_slice()[0] < w[1].as_slice()[0]));
        assert_eq!(quantile_centers(&[Datum::scalar(1.0)]).len(), 1);
        assert!(quantile_centers(&[]).is_empty());
    }
}
