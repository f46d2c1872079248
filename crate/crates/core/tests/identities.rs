use condwalk::quad;
use condwalk::special_fns::*;
use condwalk::target_fns::{envelope, weighted_integral, Side, TargetFunction, WeightSpec};
use proptest::prelude::*;

const V_GRID: [f64; 4] = [0.05, 0.1, 0.25, 0.5];
const X_GRID: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];

#[test]
fn convolution_identities_on_grid() {
    for &v in &V_GRID {
        for &x in &X_GRID {
            for &s in &[-2.0, -0.5, 0.0, 0.3, 1.0, 2.5, 4.0] {
                let lhs = conv_normal_levy(v, s, x, false).unwrap();
                assert!((lhs - levy_psi(s, x, 1.0)).abs() <= 1e-8, "v={v} x={x} s={s}");
            }
            let r = rayleigh_levy_integral(v, x).unwrap();
            assert!((r - v.sqrt() * rayleigh(x).0).abs() <= 1e-8, "v={v} x={x}");
        }
    }
}

#[test]
fn rayleigh_sandwich_on_grid() {
    for &v in &V_GRID {
        for &x in &X_GRID {
            let c = conv_normal_rayleigh(v, x).unwrap();
            let lower = (1.0 - v).sqrt() * rayleigh(x).0;
            let upper = lower + v.sqrt() * (-x * x / (2.0 * v)).exp();
            assert!(lower <= c + 1e-14 && c <= upper + 1e-14, "v={v} x={x}: {lower} <= {c} <= {upper}");
        }
    }
}

#[test]
fn psi_normalization() {
    for &x in &[0.1, 0.5, 1.0, 2.0, 5.0] {
        let m = quad::integrate_panels(|s| levy_psi(s, x, 1.0), &quad::uniform_points(0.0, x + 12.0, 24, &[]), 1e-12).unwrap();
        assert!((m - psi_normalizer(x).unwrap()).abs() <= 1e-8, "x={x}");
    }
}

#[test]
fn psi_small_x_limit_is_rayleigh() {
    let x = 1e-3;
    let norm = 2.0 * normal_cdf(x) - 1.0;
    let worst = (0..=400)
        .map(|i| i as f64 * 0.01)
        .map(|s| (levy_psi(s, x, 1.0) / norm - rayleigh(s).0).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.01, "{worst}");
}

#[test]
fn kernel_is_a_probability_density() {
    for &eps in &[0.05, 0.1, 0.25, 0.45] {
        let spec = KernelSpec::new(eps).unwrap();
        // Tails decay like u^-4: integrate far and add the analytic tail bound.
        let l = 4000.0 * eps;
        let pts = quad::uniform_points(-l, l, 2000, &[]);
        let body = quad::integrate_panels(|u| smoothing_kernel(spec, u), &pts, 1e-12).unwrap();
        // int_{|u|>L} kappa_eps <= 2 * (3/(8 pi)) * 256 eps^3 / (3 L^3)
        let tail_bound = 2.0 * KERNEL_NORMALIZER * 256.0 * eps.powi(3) / (3.0 * l.powi(3));
        assert!((body - 1.0).abs() <= 1e-9 + tail_bound, "eps={eps}: {body}");
        assert!(tail_bound < 1e-9);
    }
}

#[test]
fn kernel_fourier_support() {
    for &eps in &[0.1, 0.25] {
        let spec = KernelSpec::new(eps).unwrap();
        for k in 1..=20 {
            let t = (1.0 + 0.25 * k as f64) / eps;
            let f = kernel_fourier(spec, t).unwrap();
            assert!(f.abs() <= 1e-6, "eps={eps} t={t}: {f}");
        }
        assert!((kernel_fourier(spec, 0.0).unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn envelope_integrals_are_ordered() {
    let shapes = [
        TargetFunction::indicator(0.0, 1.0).unwrap(),
        TargetFunction::exponential(1.0).unwrap(),
        TargetFunction::piecewise_constant(vec![0.0, 0.5, 2.0], vec![1.0, 3.0, 0.0]).unwrap(),
    ];
    for f in &shapes {
        for &(d, e) in &[(0.5, 0.1), (0.125, 0.0125), (0.25, 0.25)] {
            let up = envelope(f, d, e, Side::Upper).unwrap();
            let lo = envelope(f, d, e, Side::Lower).unwrap();
            let (iu, i, il) = (
                weighted_integral(&up, &WeightSpec::Unit).unwrap(),
                weighted_integral(f, &WeightSpec::Unit).unwrap(),
                weighted_integral(&lo, &WeightSpec::Unit).unwrap(),
            );
            assert!(iu >= i - 1e-12 && i >= il - 1e-12, "{f}: {iu} {i} {il}");
        }
    }
}

proptest! {
    #[test]
    fn psi_is_odd_in_s(s in -8.0f64..8.0, x in 0.0f64..6.0, v in 0.05f64..4.0) {
        let a = levy_psi(s, x, v);
        let b = levy_psi(-s, x, v);
        prop_assert!((a + b).abs() <= 1e-15 * (1.0 + a.abs()));
    }

    #[test]
    fn psi_is_positive(s in 1e-3f64..8.0, x in 1e-3f64..6.0) {
        prop_assert!(levy_psi(s, x, 1.0) > 0.0);
    }

    #[test]
    fn normal_cdf_is_monotone_and_symmetric(x in -30.0f64..30.0, h in 1e-6f64..1.0) {
        prop_assert!(normal_cdf(x + h) >= normal_cdf(x));
        prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() <= 2e-16);
    }

    #[test]
    fn brownian_exit_is_a_probability(x in 0.0f64..5.0, n in 0.1f64..50.0, w in 0.1f64..10.0) {
        let p = brownian_exit(x, 1.0, n, 0.0, x + w).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        let whole = brownian_exit(x, 1.0, n, 0.0, f64::INFINITY).unwrap();
        prop_assert!(p <= whole + 1e-9);
    }
}
