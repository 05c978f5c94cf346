//! Taylor coefficients checked against Cauchy integrals evaluated in complex arithmetic.

use std::f64::consts::PI;

use l0est::analytic::AnalyticFn;
use num_complex::Complex64;

fn eval_complex(f: &AnalyticFn, z: Complex64) -> Complex64 {
    match f {
        AnalyticFn::Linear { a, b } => z * *a + *b,
        AnalyticFn::Polynomial(c) => c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, v| acc * z + *v),
        AnalyticFn::Exp => z.exp(),
        AnalyticFn::LogisticFlip { p01, p11 } => (Complex64::new(1.0, 0.0) + (-z).exp()).inv() * (p11 - p01) + *p01,
        AnalyticFn::Custom(_) => unreachable!(),
    }
}

/// `a_k = (1 / 2 pi i) \oint f(t + z) z^{-k-1} dz` on `|z| = r` by the trapezoid rule.
fn cauchy_coeffs(f: &AnalyticFn, t: f64, r: f64, depth: usize) -> (Vec<f64>, f64) {
    let m = 512;
    let vals: Vec<Complex64> =
        (0..m).map(|j| eval_complex(f, Complex64::from_polar(r, 2.0 * PI * j as f64 / m as f64) + t)).collect();
    let sup = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let coeffs = (0..=depth)
        .map(|k| {
            let s: Complex64 = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * j) as f64 / m as f64))
                .sum();
            s.re / m as f64 / r.powi(k as i32)
        })
        .collect();
    (coeffs, sup)
}

#[test]
fn taylor_coefficients_match_cauchy_integrals() {
    let fns = [
        AnalyticFn::Linear { a: 0.7, b: -2.0 },
        AnalyticFn::Polynomial(vec![1.0, -0.5, 0.0, 2.0, 0.25]),
        AnalyticFn::Exp,
        AnalyticFn::logistic(),
        AnalyticFn::LogisticFlip { p01: 0.1, p11: 0.9 },
    ];
    for f in &fns {
        for t in [-3.0, -0.4, 0.0, 1.1, 5.0] {
            let rho = f.radius_at(t).unwrap();
            let r = if rho.is_finite() { 0.5 * rho } else { 1.0 };
            let (oracle, sup) = cauchy_coeffs(f, t, r, 25);
            let got = f.taylor_coeffs(t, 25);
            for k in 0..=25 {
                // Cauchy's estimate scales the tolerance to the coefficient size.
                let tol = 1e-12 * sup / r.powi(k as i32);
                assert!((got[k] - oracle[k]).abs() <= tol, "{f:?} at {t}, k = {k}: {} vs {}", got[k], oracle[k]);
            }
        }
    }
}

#[test]
fn logistic_pole_sits_at_the_reported_radius() {
    let f = AnalyticFn::LogisticFlip { p01: 0.2, p11: 0.7 };
    for t in [-2.0, 0.0, 0.5, 3.0] {
        let rho = f.radius_at(t).unwrap();
        assert!((rho - (t * t + PI * PI).sqrt()).abs() <= 1e-12);
        // 1 + e^{-z} vanishes at z = i pi, which lies at distance rho from t.
        let pole = Complex64::new(0.0, PI);
        assert!((pole - t).norm() - rho <= 1e-12);
        let near = eval_complex(&f, Complex64::new(0.0, PI * (1.0 - 1e-6)));
        assert!(near.norm() > 1e4);
    }
}
