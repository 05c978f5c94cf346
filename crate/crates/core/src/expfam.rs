//! Natural exponential families `p_t(y) = exp{t y - Lambda(t)}` and the
//! penalized negative log-likelihood.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, SparseParam};
use crate::domains::Interval;
use crate::error::{Error, Result};

/// Grid size for the custom-family curvature search.
pub const CURVATURE_GRID: usize = 10_000;
/// Relative amount subtracted from the refined custom-family minimum.
pub const CURVATURE_TOLERANCE: f64 = 1e-8;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied cumulant and derivatives.
#[derive(Clone)]
pub struct CustomFamily {
    pub name: String,
    pub lambda: ScalarFn,
    pub d1: ScalarFn,
    pub d2: ScalarFn,
    pub natural_interval: Interval,
}

#[derive(Clone)]
pub enum ExpFamily {
    /// `Lambda(t) = sigma2 t^2 / 2`.
    Gaussian {
        sigma2: f64,
    },
    /// `Lambda(t) = ln(1 + e^t)`.
    Bernoulli,
    Custom(CustomFamily),
}

impl fmt::Debug for ExpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpFamily::Gaussian { sigma2 } => write!(f, "Gaussian {{ sigma2: {sigma2} }}"),
            ExpFamily::Bernoulli => write!(f, "Bernoulli"),
            ExpFamily::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

/// `ln(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// The logistic function `e^t / (1 + e^t)`.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `(2 cosh(t / 2))^{-2}`, the logistic variance.
pub fn logistic_variance(t: f64) -> f64 {
    let c = 2.0 * (0.5 * t).cosh();
    1.0 / (c * c)
}

/// Curvature infimum together with the slack already subtracted from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    pub delta: f64,
    pub tolerance: f64,
}

impl ExpFamily {
    pub fn gaussian(sigma2: f64) -> Self {
        ExpFamily::Gaussian { sigma2 }
    }

    pub fn name(&self) -> &str {
        match self {
            ExpFamily::Gaussian { .. } => "gaussian",
            ExpFamily::Bernoulli => "bernoulli",
            ExpFamily::Custom(c) => &c.name,
        }
    }

    pub fn natural_interval(&self) -> Interval {
        match self {
            ExpFamily::Custom(c) => c.natural_interval,
            _ => Interval::real_line(),
        }
    }

    pub fn lambda(&self, t: f64) -> f64 {
        match self {
            ExpFamily::Gaussian { sigma2 } => 0.5 * sigma2 * t * t,
            ExpFamily::Bernoulli => softplus(t),
            ExpFamily::Custom(c) => (c.lambda)(t),
        }
    }

    /// `Lambda'(t)`, the mean.
    pub fn d1(&self, t: f64) -> f64 {
        match self {
            ExpFamily::Gaussian { sigma2 } => sigma2 * t,
            ExpFamily::Bernoulli => sigmoid(t),
            ExpFamily::Custom(c) => (c.d1)(t),
        }
    }

    /// `Lambda''(t)`, the variance.
    pub fn d2(&self, t: f64) -> f64 {
        match self {
            ExpFamily::Gaussian { sigma2 } => *sigma2,
            ExpFamily::Bernoulli => logistic_variance(t),
            ExpFamily::Custom(c) => (c.d2)(t),
        }
    }

    /// `delta = inf_{t in I} Lambda''(t)`.
    pub fn curvature_inf(&self, interval: &Interval) -> Result<Curvature> {
        if interval.is_empty() {
            return Err(Error::DegenerateInterval(interval.to_string()));
        }
        let out = match self {
            ExpFamily::Gaussian { sigma2 } => Curvature { delta: *sigma2, tolerance: 0.0 },
            ExpFamily::Bernoulli => Curvature { delta: logistic_variance(interval.sup_abs()), tolerance: 0.0 },
            ExpFamily::Custom(c) => {
                if !interval.is_subset_of(&c.natural_interval) {
                    return Err(Error::OutOfRange(format!(
                        "{interval} is not inside the natural interval {}",
                        c.natural_interval
                    )));
                }
                if !interval.is_bounded() {
                    return Err(Error::NonCompact(format!(
                        "curvature search needs a bounded interval, got {interval}"
                    )));
                }
                let m = grid_golden_min(&*c.d2, interval.lo, interval.hi);
                let tolerance = CURVATURE_TOLERANCE * m.abs();
                Curvature { delta: m - tolerance, tolerance }
            }
        };
        if !(out.delta > 0.0) {
            return Err(Error::FlatFamily(out.delta));
        }
        Ok(out)
    }

    fn check_natural(&self, eta: &[f64]) -> Result<()> {
        if let ExpFamily::Custom(c) = self {
            if let Some(row) = eta.iter().position(|&t| !c.natural_interval.contains(t)) {
                return Err(Error::NaturalParameter { row });
            }
        }
        Ok(())
    }

    /// `-[y^T eta - sum_i Lambda(eta_i)]` for a precomputed linear predictor.
    pub fn nll_eta(&self, eta: &[f64], y: &[f64]) -> Result<f64> {
        self.check_natural(eta)?;
        Ok(eta.iter().zip(y).map(|(&t, &yi)| self.lambda(t) - yi * t).sum())
    }

    /// Penalized objective `-[y^T X u - sum_i Lambda(X_i^T u)] + c_r |spt(u)|`.
    pub fn mle_objective(&self, u: &SparseParam, x: &DesignMatrix, y: &[f64], c_r: f64) -> Result<f64> {
        check_lengths(u, x, y)?;
        let nll = self.nll_eta(&x.apply(u), y)?;
        Ok(nll + penalty(c_r, u.support_size()))
    }

    /// Gradient and Hessian of the unpenalized objective on the coordinates in `support`.
    pub fn mle_gradient_hessian(
        &self,
        u: &SparseParam,
        x: &DesignMatrix,
        y: &[f64],
        support: &[usize],
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        check_lengths(u, x, y)?;
        let eta = x.apply(u);
        self.check_natural(&eta)?;
        let s = support.len();
        let mut g = DVector::zeros(s);
        let mut h = DMatrix::zeros(s, s);
        for (i, &t) in eta.iter().enumerate() {
            let r = self.d1(t) - y[i];
            let w = self.d2(t);
            for (a, &ja) in support.iter().enumerate() {
                let xa = x.get(i, ja);
                g[a] += xa * r;
                for (b, &jb) in support.iter().enumerate().skip(a) {
                    h[(a, b)] += w * xa * x.get(i, jb);
                }
            }
        }
        for a in 0..s {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        Ok((g, h))
    }
}

/// `c_r |S|`, taken as 0 for the empty support so that `c_r = inf` is usable.
pub fn penalty(c_r: f64, support_size: usize) -> f64 {
    if support_size == 0 {
        0.0
    } else {
        c_r * support_size as f64
    }
}

pub(crate) fn check_lengths(u: &SparseParam, x: &DesignMatrix, y: &[f64]) -> Result<()> {
    if u.len() != x.p() {
        return Err(Error::Dimension(format!("u has length {}, expected {}", u.len(), x.p())));
    }
    if y.len() != x.n() {
        return Err(Error::Dimension(format!("y has length {}, expected {}", y.len(), x.n())));
    }
    Ok(())
}

/// Minimum of `f` on `[lo, hi]`: a uniform grid followed by golden-section
/// refinement in the bracketing cell.
pub fn grid_golden_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return f(lo);
    }
    let m = CURVATURE_GRID;
    let step = (hi - lo) / (m - 1) as f64;
    let (mut best_i, mut best) = (0, f(lo));
    for i in 1..m {
        let v = f(lo + step * i as f64);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let mut a = (lo + step * best_i.saturating_sub(1) as f64).max(lo);
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    best.min(fc).min(fd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curvature_examples() {
        let g = ExpFamily::gaussian(1.0);
        assert_eq!(g.curvature_inf(&Interval::closed(-5.0, 3.0)).unwrap().delta, 1.0);
        let b = ExpFamily::Bernoulli;
        assert_eq!(b.curvature_inf(&Interval::point(0.0)).unwrap().delta, 0.25);
        let d = b.curvature_inf(&Interval::symmetric(2.0)).unwrap().delta;
        assert!((d - 0.104993585403507).abs() < 1e-12);
        assert_eq!(b.curvature_inf(&Interval::real_line()).unwrap_err(), Error::FlatFamily(0.0));
    }

    #[test]
    fn custom_curvature_matches_closed_form() {
        let fam = ExpFamily::Custom(CustomFamily {
            name: "logistic".into(),
            lambda: Arc::new(softplus),
            d1: Arc::new(sigmoid),
            d2: Arc::new(logistic_variance),
            natural_interval: Interval::real_line(),
        });
        let i = Interval::closed(-2.0, 1.0);
        let c = fam.curvature_inf(&i).unwrap();
        let exact = logistic_variance(2.0);
        assert!(c.delta <= exact && c.delta >= exact * (1.0 - 2e-8));
    }

    #[test]
    fn objective_examples() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b = ExpFamily::Bernoulli;
        let y = [1.0, 0.0];
        let zero = b.mle_objective(&SparseParam::zeros(2), &x, &y, 3.0).unwrap();
        assert!((zero - 2.0 * 2f64.ln()).abs() < 1e-15);
        for t in [-1.0, 0.0, 1.0] {
            let c_r = 0.7;
            let got = b.mle_objective(&SparseParam::new(vec![t, 0.0]), &x, &y, c_r).unwrap();
            let hand = -t + (1.0 + f64::exp(t)).ln() + 2f64.ln() + if t != 0.0 { c_r } else { 0.0 };
            assert!((got - hand).abs() < 1e-14, "t = {t}");
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-16);
        assert_eq!(sigmoid(-800.0), 0.0);
    }

    #[test]
    fn infinite_penalty_on_empty_support() {
        assert_eq!(penalty(f64::INFINITY, 0), 0.0);
        assert_eq!(penalty(f64::INFINITY, 1), f64::INFINITY);
    }

    #[test]
    fn natural_parameter_violation_reports_row() {
        let fam = ExpFamily::Custom(CustomFamily {
            name: "half".into(),
            lambda: Arc::new(|t: f64| -(-t).ln()),
            d1: Arc::new(|t: f64| -1.0 / t),
            d2: Arc::new(|t: f64| 1.0 / (t * t)),
            natural_interval: Interval::open(f64::NEG_INFINITY, 0.0),
        });
        let x = DesignMatrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let err = fam.mle_objective(&SparseParam::new(vec![1.0]), &x, &[1.0, 1.0], 0.0).unwrap_err();
        assert_eq!(err, Error::NaturalParameter { row: 1 });
    }
}
