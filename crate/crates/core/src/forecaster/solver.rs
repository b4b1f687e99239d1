//! Root finding for `S_n` on the lexicographic square.
//!
//! At fixed `p` the function is a quadratic in the exposure `e`, and `e` is
//! affine in `q` along the optimal face, so the search only has to be numeric
//! in `p`:
//!
//! 1. Scan a grid of `p` values (uniform, plus log-spaced tails at stripped
//!    edges, plus every breakpoint of the game and the midpoints between all
//!    of these), walking the lexicographic path in order.
//! 2. The first sign change between consecutive grid points is bisected in
//!    `p`. Cells next to a local minimum of `|S_n|` are probed by golden-section
//!    search for crossings the grid steps over.
//! 3. On a proper face the quadratic is solved in closed form and the root is
//!    mapped back to `q`.

use crate::error::{Error, Result};
use crate::game::{Forecast, Game};
use crate::numeric::{bisect, golden_section_min, quadratic_roots};

use super::{Branch, RootReport, SolverConfig};

/// `S_n(p, e) = A·e + B + ½e²(1 − 2p) + C·p`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SCoefficients {
    pub fn value(&self, p: f64, e: f64) -> f64 {
        self.a * e + self.b + 0.5 * e * e * (1.0 - 2.0 * p) + self.c * p
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    p: f64,
    q: f64,
    s: f64,
    /// Entry or exit point of a proper face.
    face_end: bool,
}

#[derive(Debug, Clone, Copy)]
enum Elem {
    Sample(Sample),
    Face { p: f64, e_hi: f64, e_lo: f64 },
}

enum Walk {
    Root {
        p: f64,
        q: f64,
    },
    /// No root; `S_n` has this sign everywhere on the scanned path.
    Constant(f64),
}

pub(crate) fn solve(
    game: &dyn Game,
    coeffs: &SCoefficients,
    config: &SolverConfig,
    round: usize,
) -> Result<RootReport> {
    let domain = game.domain();
    let mut delta = config.delta_start;
    loop {
        let left = if domain.includes_zero() { 0.0 } else { delta };
        let right = if domain.includes_one() {
            1.0
        } else {
            1.0 - delta
        };
        let points = scan_points(
            game,
            config.grid_size,
            left,
            right,
            !domain.includes_zero(),
            !domain.includes_one(),
        );
        let path = build_path(game, coeffs, &points);
        match walk(game, coeffs, config.epsilon_root, &path) {
            Walk::Root { p, q } => {
                let e = game.choose(p, q).exposure();
                let s = coeffs.value(p, e);
                if s.abs() > config.epsilon_root {
                    return Err(Error::RootNotFound {
                        round,
                        diagnostics: format!(
                            "bracketed root at (p={p:?}, q={q:?}) has |S|={:e} > ε={:e}; coefficients {coeffs:?}",
                            s.abs(),
                            config.epsilon_root
                        ),
                    });
                }
                return Ok(RootReport {
                    forecast: Forecast { p, q },
                    s_residual: s.abs(),
                    branch: Branch::Root,
                });
            }
            Walk::Constant(sign) if sign > 0.0 && domain.includes_one() => {
                return Ok(RootReport {
                    forecast: Forecast { p: 1.0, q: 0.5 },
                    s_residual: 0.0,
                    branch: Branch::EndpointPositive,
                });
            }
            Walk::Constant(sign) if sign < 0.0 && domain.includes_zero() => {
                return Ok(RootReport {
                    forecast: Forecast { p: 0.0, q: 0.5 },
                    s_residual: 0.0,
                    branch: Branch::EndpointNegative,
                });
            }
            Walk::Constant(sign) => {
                if delta / 2.0 < config.delta_min {
                    return Err(Error::RootNotFound {
                        round,
                        diagnostics: format!(
                            "S has constant sign {sign} on the {} down to edge distance {delta:e}; coefficients {coeffs:?}",
                            domain.label()
                        ),
                    });
                }
                delta /= 2.0;
            }
        }
    }
}

/// Scan grid for `p ∈ [left, right]`, including midpoints between nodes.
fn scan_points(
    game: &dyn Game,
    grid: usize,
    left: f64,
    right: f64,
    log_left: bool,
    log_right: bool,
) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..grid)
        .map(|k| left + (right - left) * k as f64 / (grid - 1) as f64)
        .collect();
    let tail = (grid / 2).max(2);
    let log_tail = |edge: f64| -> Vec<f64> {
        (0..tail)
            .map(|k| edge * (0.5 / edge).powf(k as f64 / (tail - 1) as f64))
            .collect()
    };
    if log_left {
        nodes.extend(log_tail(left));
    }
    if log_right {
        nodes.extend(log_tail(1.0 - right).into_iter().map(|t| 1.0 - t));
    }
    nodes.extend(
        game.breakpoints()
            .into_iter()
            .filter(|p| *p >= left && *p <= right),
    );
    nodes.retain(|p| *p >= left && *p <= right);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    let mut points = Vec::with_capacity(2 * nodes.len());
    for w in nodes.windows(2) {
        points.push(w[0]);
        let mid = w[0] + 0.5 * (w[1] - w[0]);
        if mid > w[0] && mid < w[1] {
            points.push(mid);
        }
    }
    points.extend(nodes.last());
    points
}

fn build_path(game: &dyn Game, coeffs: &SCoefficients, points: &[f64]) -> Vec<Elem> {
    let mut path = Vec::with_capacity(points.len() + 8);
    for &p in points {
        let e_hi = game.choose(p, 0.0).exposure();
        let e_lo = game.choose(p, 1.0).exposure();
        if e_hi == e_lo {
            path.push(Elem::Sample(Sample {
                p,
                q: 0.5,
                s: coeffs.value(p, e_hi),
                face_end: false,
            }));
        } else {
            path.push(Elem::Sample(Sample {
                p,
                q: 0.0,
                s: coeffs.value(p, e_hi),
                face_end: true,
            }));
            path.push(Elem::Face { p, e_hi, e_lo });
            path.push(Elem::Sample(Sample {
                p,
                q: 1.0,
                s: coeffs.value(p, e_lo),
                face_end: true,
            }));
        }
    }
    path
}

fn walk(game: &dyn Game, coeffs: &SCoefficients, eps: f64, path: &[Elem]) -> Walk {
    let sigma = path
        .iter()
        .find_map(|el| match el {
            Elem::Sample(s) if s.s != 0.0 => Some(s.s.signum()),
            _ => None,
        })
        .unwrap_or(1.0);

    // S at a point with a singleton face.
    let interior = |p: f64| coeffs.value(p, game.choose(p, 0.5).exposure());

    let sample_at = |i: usize| match path.get(i) {
        Some(Elem::Sample(s)) => Some(*s),
        _ => None,
    };
    let is_local_min = |i: usize| -> bool {
        let v = sigma * sample_at(i).expect("sample").s;
        let prev = i.checked_sub(1).and_then(sample_at);
        let next = sample_at(i + 1);
        if prev.is_none() && next.is_none() {
            return false;
        }
        prev.is_none_or(|s| v <= sigma * s.s) && next.is_none_or(|s| v <= sigma * s.s)
    };

    for (i, el) in path.iter().enumerate() {
        match *el {
            Elem::Sample(cur) => {
                if let Some(prev) = i.checked_sub(1).and_then(sample_at) {
                    if let Some(root) = search_cell(
                        prev,
                        cur,
                        sigma,
                        eps,
                        &interior,
                        is_local_min(i - 1) || is_local_min(i),
                    ) {
                        return root;
                    }
                }
                if !cur.face_end && cur.s.abs() <= eps {
                    return Walk::Root { p: cur.p, q: 0.5 };
                }
            }
            Elem::Face { p, e_hi, e_lo } => {
                if let Some(q) = face_root(coeffs, p, e_hi, e_lo, eps) {
                    return Walk::Root { p, q };
                }
            }
        }
    }
    Walk::Constant(sigma)
}

/// Looks for the first root of `S_n` strictly inside the cell `(prev.p, cur.p]`.
fn search_cell(
    prev: Sample,
    cur: Sample,
    sigma: f64,
    eps: f64,
    interior: &impl Fn(f64) -> f64,
    probe: bool,
) -> Option<Walk> {
    let (lo, hi) = (prev.p, cur.p);
    // Endpoint values are the one-sided limits stored on the samples.
    let s_at = |p: f64| {
        if p <= lo {
            prev.s
        } else if p >= hi {
            cur.s
        } else {
            interior(p)
        }
    };
    let pick = |p: f64| {
        let q = if p == hi {
            cur.q
        } else if p == lo {
            prev.q
        } else {
            0.5
        };
        Walk::Root { p, q }
    };

    if probe && hi > lo {
        let (m, vm) = golden_section_min(lo, hi, 100, |p| sigma * s_at(p));
        if vm < 0.0 {
            let (p, _) = bisect(lo, m, prev.s, s_at(m), s_at);
            return Some(pick(p));
        }
        if vm <= eps && m > lo && m < hi && sigma * cur.s > 0.0 {
            return Some(pick(m));
        }
    }
    if sigma * cur.s < 0.0 || (cur.s == 0.0 && !cur.face_end) {
        let (p, _) = bisect(lo, hi, prev.s, cur.s, s_at);
        return Some(pick(p));
    }
    None
}

/// Smallest `q` with `S_n(p, q) = 0` on a proper face, if any.
///
/// A face on which `S_n` vanishes identically leaves `q` free; `½` is taken.
fn face_root(coeffs: &SCoefficients, p: f64, e_hi: f64, e_lo: f64, eps: f64) -> Option<f64> {
    let a2 = 0.5 * (1.0 - 2.0 * p);
    let a1 = coeffs.a;
    let a0 = coeffs.b + coeffs.c * p;
    let f = |e: f64| (a2 * e + a1) * e + a0;
    let (f_hi, f_lo, f_mid) = (f(e_hi), f(e_lo), f(0.5 * (e_hi + e_lo)));
    if f_hi.abs() <= eps && f_lo.abs() <= eps && f_mid.abs() <= eps {
        return Some(0.5);
    }
    if f_hi.abs() <= eps {
        return Some(0.0);
    }
    let width = e_hi - e_lo;
    let tol = 1e-12 * width.max(1.0);
    let best = quadratic_roots(a2, a1, a0)
        .into_iter()
        .filter(|e| *e >= e_lo - tol && *e <= e_hi + tol)
        .map(|e| e.clamp(e_lo, e_hi))
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.max(e)))
        });
    match best {
        Some(e) => Some(((e_hi - e) / width).clamp(0.0, 1.0)),
        None if f_lo.abs() <= eps => Some(1.0),
        None => None,
    }
}
