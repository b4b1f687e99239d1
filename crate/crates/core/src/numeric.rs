//! Small scalar routines shared by the solver and the constant computations.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimises `f` on `[a, b]` by golden-section search, returning `(argmin, min)`.
///
/// Assumes `f` is unimodal on the bracket; otherwise a local minimum is returned.
pub fn golden_section_min(
    mut a: f64,
    mut b: f64,
    iters: usize,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if !(b - a > f64::EPSILON * (a.abs() + b.abs()).max(f64::MIN_POSITIVE)) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (fa, fb) = (f(a), f(b));
    [(a, fa), (c, fc), (d, fd), (b, fb)]
        .into_iter()
        .fold(
            (a, fa),
            |best, cand| if cand.1 < best.1 { cand } else { best },
        )
}

/// Maximises `f` on `[a, b]`; see [`golden_section_min`].
pub fn golden_section_max(a: f64, b: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let (x, v) = golden_section_min(a, b, iters, |t| -f(t));
    (x, -v)
}

/// Real roots of `a t² + b t + c = 0`, ascending.
///
/// A vanishing leading coefficient degrades to the linear case; the
/// identically-zero polynomial yields no roots (callers test for it first).
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-15 * scale {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        // Tangency lost to rounding still counts as a double root.
        if disc > -1e-14 * (b * b).max(4.0 * (a * c).abs()) {
            return vec![-b / (2.0 * a)];
        }
        return Vec::new();
    }
    let sq = disc.sqrt();
    // Numerically stable pairing of the two roots.
    let sign = if b >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (b + sign * sq);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    vec![lo, hi]
}

/// Bisects a sign change of `f` on `[lo, hi]` until the floating-point midpoint
/// stops moving. `f(lo)` and `f(hi)` must have opposite signs (or one be zero).
///
/// Returns the endpoint of the final bracket with the smaller `|f|`.
pub fn bisect(
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    mut f_hi: f64,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    for _ in 0..2100 {
        if f_lo == 0.0 || f_hi == 0.0 {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if (f_mid > 0.0) == (f_lo > 0.0) && f_mid != 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if f_lo.abs() <= f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots_cover_degenerate_cases() {
        assert_eq!(quadratic_roots(0.0, 0.0, 0.0), Vec::<f64>::new());
        assert_eq!(quadratic_roots(0.0, 2.0, -1.0), vec![0.5]);
        let r = quadratic_roots(1.0, -3.0, 2.0);
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 2.0).abs() < 1e-15);
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_empty());
        // Cancellation-prone pair.
        let r = quadratic_roots(1.0, -1e8, 1.0);
        assert!((r[0] - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, v) = golden_section_min(-3.0, 5.0, 200, |t| (t - 1.25) * (t - 1.25) + 2.0);
        assert!((x - 1.25).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisect_converges_to_float_precision() {
        let f = |t: f64| t * t - 2.0;
        let (x, fx) = bisect(0.0, 2.0, f(0.0), f(2.0), f);
        assert!((x - 2f64.sqrt()).abs() < 1e-15);
        assert!(fx.abs() < 1e-14);
    }
}
