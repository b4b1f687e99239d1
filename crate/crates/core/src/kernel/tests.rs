use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;

fn sobolev() -> Arc<dyn Kernel> {
    Arc::new(Sobolev)
}

fn builtins() -> Vec<Arc<dyn Kernel>> {
    vec![
        Arc::new(Sobolev),
        Arc::new(Gaussian::new(0.7).unwrap()),
        Arc::new(Linear::new(0.5, None).unwrap()),
    ]
}

fn pts(xs: &[f64]) -> Vec<Datum> {
    xs.iter().map(|&x| Datum::scalar(x)).collect()
}

#[test]
fn eval_examples() {
    assert_eq!(Sobolev.eval(&[0.0], &[0.0]), 0.5);
    assert_abs_diff_eq!(Sobolev.eval(&[0.0], &[2f64.ln()]), 0.25, epsilon = 1e-16);
    assert_eq!(Gaussian::new(1.0).unwrap().eval(&[0.0], &[0.0]), 1.0);
    assert_eq!(Linear::new(1.5, None).unwrap().eval(&[2.0], &[3.0]), 7.5);
}

#[test]
fn c_f_examples() {
    assert_abs_diff_eq!(
        Sobolev.c_f(None).finite().unwrap(),
        std::f64::consts::FRAC_1_SQRT_2,
        epsilon = 1e-15
    );
    for w in [0.1, 1.0, 25.0] {
        assert_eq!(Gaussian::new(w).unwrap().c_f(None), Constant::Finite(1.0));
    }
    let lin = Linear::new(0.0, None).unwrap();
    assert_eq!(lin.c_f(None), Constant::Unbounded);
    let r = DataRange::interval(-2.0, 2.0).unwrap();
    assert_abs_diff_eq!(lin.c_f(Some(&r)).finite().unwrap(), 2.0, epsilon = 1e-12);
    // A declared range stored on the kernel is used by default.
    let lin = Linear::new(1.0, Some(DataRange::interval(-1.0, 3.0).unwrap())).unwrap();
    assert_abs_diff_eq!(
        lin.c_f(None).finite().unwrap(),
        10f64.sqrt(),
        epsilon = 1e-12
    );
}

#[test]
fn c_f_of_custom_kernel_uses_grid_and_refinement() {
    // Diagonal 1 + sin(x)² peaks at x = π/2 inside [0, 3].
    let k = CustomKernel::new(
        "bump",
        1,
        Some(DataRange::interval(0.0, 3.0).unwrap()),
        |a, b| 1.0 + a[0].sin() * b[0].sin(),
    )
    .unwrap();
    assert_abs_diff_eq!(k.c_f(None).finite().unwrap(), 2f64.sqrt(), epsilon = 1e-12);
    let unranged = CustomKernel::new("bump", 1, None, |a, b| a[0] * b[0]).unwrap();
    assert_eq!(unranged.c_f(None), Constant::Unbounded);
}

#[test]
fn invalid_kernel_parameters_are_rejected() {
    assert!(Gaussian::new(0.0).is_err());
    assert!(Gaussian::new(-1.0).is_err());
    assert!(Linear::new(-0.1, None).is_err());
    assert!(DataRange::interval(1.0, 0.0).is_err());
}

#[test]
fn gram_examples() {
    let g = gram(&Sobolev, &pts(&[0.0]));
    assert_eq!(g[(0, 0)], 0.5);
    let g = gram(&Sobolev, &pts(&[0.0, 2f64.ln()]));
    assert_abs_diff_eq!(g[(0, 0)], 0.5);
    assert_abs_diff_eq!(g[(0, 1)], 0.25, epsilon = 1e-16);
    assert_abs_diff_eq!(g[(1, 0)], 0.25, epsilon = 1e-16);
    assert_abs_diff_eq!(g[(1, 1)], 0.5);
}

#[test]
fn gram_permutes_with_points() {
    let xs = [0.3, -1.2, 2.5, 0.0];
    let perm = [2, 0, 3, 1];
    let g = gram(&Sobolev, &pts(&xs));
    let permuted: Vec<f64> = perm.iter().map(|&i| xs[i]).collect();
    let gp = gram(&Sobolev, &pts(&permuted));
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(gp[(i, j)], g[(perm[i], perm[j])]);
        }
    }
}

#[test]
fn rkhs_norm_examples() {
    let zero = KernelExpansion::new(sobolev(), pts(&[1.0]), vec![0.0]).unwrap();
    assert_eq!(zero.rkhs_norm().unwrap(), 0.0);
    let one = KernelExpansion::new(sobolev(), pts(&[0.0]), vec![1.0]).unwrap();
    assert_abs_diff_eq!(one.rkhs_norm().unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
    // 0.5 − 2·0.25 + 0.5 = 0.5
    let two = KernelExpansion::new(sobolev(), pts(&[0.0, 2f64.ln()]), vec![1.0, -1.0]).unwrap();
    assert_abs_diff_eq!(two.rkhs_norm().unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
    assert_eq!(KernelExpansion::zero(sobolev()).rkhs_norm().unwrap(), 0.0);
}

#[test]
fn broken_custom_kernel_fails_norm() {
    let k: Arc<dyn Kernel> =
        Arc::new(CustomKernel::new("neg", 1, None, |a, b| -(a[0] * b[0]) - 1.0).unwrap());
    let f = KernelExpansion::new(k, pts(&[1.0]), vec![1.0]).unwrap();
    assert!(matches!(f.rkhs_norm(), Err(Error::NotPositiveDefinite(_))));
}

#[test]
fn expansion_validates_shape() {
    assert!(KernelExpansion::new(sobolev(), pts(&[0.0, 1.0]), vec![1.0]).is_err());
    assert!(KernelExpansion::new(sobolev(), vec![Datum(vec![0.0, 1.0])], vec![1.0]).is_err());
    assert!(KernelExpansion::new(sobolev(), pts(&[0.0]), vec![f64::NAN]).is_err());
}

#[test]
fn eval_expansion_examples() {
    let zero = KernelExpansion::new(sobolev(), pts(&[0.0, 3.0]), vec![0.0, 0.0]).unwrap();
    assert_eq!(zero.eval(&Datum::scalar(1.7)), 0.0);
    let single = KernelExpansion::new(sobolev(), pts(&[1.3]), vec![1.0]).unwrap();
    assert_eq!(single.eval(&Datum::scalar(1.3)), 0.5);
    let f = KernelExpansion::new(sobolev(), pts(&[0.0, 1.0]), vec![2.0, -1.0]).unwrap();
    assert_abs_diff_eq!(
        f.eval(&Datum::scalar(0.0)),
        0.8160602794142788,
        epsilon = 1e-12
    );
}

#[test]
fn gram_is_psd_for_random_point_sets() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for kernel in builtins() {
        for n in [1, 2, 5, 17, 64] {
            let points: Vec<Datum> = (0..n)
                .map(|_| Datum::scalar(rng.gen_range(-3.0..3.0)))
                .collect();
            let g = gram(kernel.as_ref(), &points);
            let eig = g.symmetric_eigen();
            let min = eig
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8, "{} n={n}: λ_min={min}", kernel.name());
        }
    }
}

fn expansion_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(-4.0..4.0f64, n),
            prop::collection::vec(-3.0..3.0f64, n),
        )
    })
}

proptest! {
    #[test]
    fn symmetric(a in -5.0..5.0f64, b in -5.0..5.0f64) {
        for k in builtins() {
            prop_assert_eq!(k.eval(&[a], &[b]), k.eval(&[b], &[a]));
        }
    }

    #[test]
    fn sobolev_diagonal_is_constant(x in -1e3..1e3f64) {
        let c = Sobolev.c_f(None).finite().unwrap();
        prop_assert!((c * c - Sobolev.eval(&[x], &[x])).abs() < 1e-15);
    }

    #[test]
    fn reproducing_property((centers, weights) in expansion_strategy(), x in -4.0..4.0f64) {
        for k in builtins() {
            let f = KernelExpansion::new(k.clone(), pts(&centers), weights.clone()).unwrap();
            let kx = KernelExpansion::new(k.clone(), pts(&[x]), vec![1.0]).unwrap();
            let direct = f.eval(&Datum::scalar(x));
            prop_assert!((direct - f.inner(&kx)).abs() <= 1e-10 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn cauchy_schwarz((centers, weights) in expansion_strategy(), x in -4.0..4.0f64) {
        for k in builtins() {
            let f = KernelExpansion::new(k.clone(), pts(&centers), weights.clone()).unwrap();
            let lhs = f.eval(&Datum::scalar(x)).abs();
            let rhs = f.rkhs_norm().unwrap() * k.eval(&[x], &[x]).sqrt();
            prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12, "{} {lhs} > {rhs}", k.name());
        }
    }

    #[test]
    fn norm_is_non_negative_and_homogeneous((centers, weights) in expansion_strategy(), s in -3.0..3.0f64) {
        let f = KernelExpansion::new(sobolev(), pts(&centers), weights).unwrap();
        let n = f.rkhs_norm().unwrap();
        prop_assert!(n >= 0.0);
        prop_assert!((f.scaled(s).rkhs_norm().unwrap() - s.abs() * n).abs() <= 1e-9 * (1.0 + n));
    }
}
