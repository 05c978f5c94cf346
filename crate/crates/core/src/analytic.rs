//! Analytic link functions: Taylor coefficients, convergence radii, minimal
//! difference quotients and coefficient envelopes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, SparseParam};
use crate::domains::Interval;
use crate::error::{Error, Result};
use crate::expfam::{logistic_variance, sigmoid};

/// Default series truncation depth.
pub const DEFAULT_DEPTH: usize = 60;
/// Depth used for the lim-sup radius estimate of custom functions.
pub const LIMSUP_DEPTH: usize = 200;
/// Default grid size for slopes and grid envelopes.
pub const DEFAULT_GRID: usize = 2001;

type DerivFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// A user-supplied function given through its derivatives `f^(k)(t)`.
#[derive(Clone)]
pub struct CustomFn {
    pub name: String,
    pub deriv: DerivFn,
}

#[derive(Clone)]
pub enum AnalyticFn {
    /// `sum_j coeffs[j] t^j`.
    Polynomial(Vec<f64>),
    Exp,
    /// `p01 + (p11 - p01) e^t / (1 + e^t)`.
    LogisticFlip {
        p01: f64,
        p11: f64,
    },
    /// `a t + b`.
    Linear {
        a: f64,
        b: f64,
    },
    Custom(CustomFn),
}

impl fmt::Debug for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticFn::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            AnalyticFn::Exp => write!(f, "Exp"),
            AnalyticFn::LogisticFlip { p01, p11 } => write!(f, "LogisticFlip {{ p01: {p01}, p11: {p11} }}"),
            AnalyticFn::Linear { a, b } => write!(f, "Linear {{ a: {a}, b: {b} }}"),
            AnalyticFn::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

/// Taylor coefficients of `tanh((t + z) / 2)` in `z`, from `T' = (1 - T^2) / 2`.
fn tanh_half_series(t: f64, depth: usize) -> Vec<f64> {
    let mut tau = vec![0.0; depth + 1];
    tau[0] = (0.5 * t).tanh();
    if depth == 0 {
        return tau;
    }
    let c = (0.5 * t).cosh();
    tau[1] = 0.5 / (c * c);
    for k in 1..depth {
        let conv: f64 = (0..=k).map(|j| tau[j] * tau[k - j]).sum();
        tau[k + 1] = -0.5 * conv / (k + 1) as f64;
    }
    tau
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// `M(y) = sup_{|Im z| <= y} |2 cosh(z / 2)|^{-2} = 1 / (4 cos^2(y / 2))` for `y < pi`.
pub fn strip_derivative_bound(y: f64) -> f64 {
    let c = (0.5 * y).cos();
    1.0 / (4.0 * c * c)
}

/// `m(r) = inf_{|x| <= r} (2 cosh(x / 2))^{-2}`.
pub fn logistic_slope_floor(r: f64) -> f64 {
    logistic_variance(r)
}

impl AnalyticFn {
    pub fn logistic() -> Self {
        AnalyticFn::LogisticFlip { p01: 0.0, p11: 1.0 }
    }

    pub fn name(&self) -> &str {
        match self {
            AnalyticFn::Polynomial(_) => "polynomial",
            AnalyticFn::Exp => "exp",
            AnalyticFn::LogisticFlip { .. } => "logistic_flip",
            AnalyticFn::Linear { .. } => "linear",
            AnalyticFn::Custom(c) => &c.name,
        }
    }

    /// `p11 - p01` for the flipped logistic.
    pub fn flip_gap(&self) -> Option<f64> {
        match self {
            AnalyticFn::LogisticFlip { p01, p11 } => Some(p11 - p01),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            AnalyticFn::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * t + a),
            AnalyticFn::Exp => t.exp(),
            AnalyticFn::LogisticFlip { p01, p11 } => p01 + (p11 - p01) * sigmoid(t),
            AnalyticFn::Linear { a, b } => a * t + b,
            AnalyticFn::Custom(c) => (c.deriv)(0, t),
        }
    }

    /// `f'(t)`.
    pub fn d1(&self, t: f64) -> f64 {
        match self {
            AnalyticFn::LogisticFlip { p01, p11 } => (p11 - p01) * logistic_variance(t),
            AnalyticFn::Linear { a, .. } => *a,
            AnalyticFn::Exp => t.exp(),
            _ => self.deriv(1, t),
        }
    }

    /// `f^(k)(t)`.
    pub fn deriv(&self, k: usize, t: f64) -> f64 {
        match self {
            AnalyticFn::Custom(c) => (c.deriv)(k, t),
            AnalyticFn::Exp => t.exp(),
            _ => self.taylor_coeffs(t, k)[k] * ln_factorial(k).exp(),
        }
    }

    /// `a_k(t) = f^(k)(t) / k!` for `k = 0..=depth`.
    pub fn taylor_coeffs(&self, t: f64, depth: usize) -> Vec<f64> {
        match self {
            AnalyticFn::Polynomial(c) => {
                let mut out = vec![0.0; depth + 1];
                // a_k = sum_{j >= k} C(j, k) c_j t^{j-k}, via repeated synthetic division
                let mut work = c.clone();
                for slot in out.iter_mut() {
                    if work.is_empty() {
                        break;
                    }
                    let mut acc = 0.0;
                    let mut quotient = vec![0.0; work.len().saturating_sub(1)];
                    for j in (0..work.len()).rev() {
                        acc = acc * t + work[j];
                        if j > 0 {
                            quotient[j - 1] = acc;
                        }
                    }
                    *slot = acc;
                    work = quotient;
                }
                out
            }
            AnalyticFn::Exp => {
                let mut out = vec![t.exp(); depth + 1];
                for k in 1..=depth {
                    out[k] = out[k - 1] / k as f64;
                }
                out
            }
            AnalyticFn::LogisticFlip { p01, p11 } => {
                let gap = p11 - p01;
                let tau = tanh_half_series(t, depth);
                let mut out: Vec<f64> = tau.iter().map(|v| 0.5 * gap * v).collect();
                out[0] = p01 + gap * sigmoid(t);
                out
            }
            AnalyticFn::Linear { a, b } => {
                let mut out = vec![0.0; depth + 1];
                out[0] = a * t + b;
                if depth >= 1 {
                    out[1] = *a;
                }
                out
            }
            AnalyticFn::Custom(c) => (0..=depth)
                .map(|k| {
                    let v = (c.deriv)(k, t);
                    if v == 0.0 {
                        0.0
                    } else {
                        v.signum() * (v.abs().ln() - ln_factorial(k)).exp()
                    }
                })
                .collect(),
        }
    }

    /// Largest `k` with a possibly nonzero coefficient, when finite.
    pub fn degree(&self) -> Option<usize> {
        match self {
            AnalyticFn::Polynomial(c) => Some(c.iter().rposition(|v| *v != 0.0).unwrap_or(0)),
            AnalyticFn::Linear { a, .. } => Some(if *a != 0.0 { 1 } else { 0 }),
            AnalyticFn::LogisticFlip { p01, p11 } if p01 == p11 => Some(0),
            _ => None,
        }
    }

    /// `rho_c(f, t)`, the radius of convergence of the Taylor series at `t`.
    pub fn radius_at(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || !self.eval(t).is_finite() {
            return Err(Error::Singular(t));
        }
        Ok(match self {
            AnalyticFn::Polynomial(_) | AnalyticFn::Exp | AnalyticFn::Linear { .. } => f64::INFINITY,
            AnalyticFn::LogisticFlip { p01, p11 } => {
                if p01 == p11 {
                    f64::INFINITY
                } else {
                    // nearest of the poles (2k + 1) pi i
                    t.hypot(PI)
                }
            }
            AnalyticFn::Custom(_) => {
                let a = self.taylor_coeffs(t, LIMSUP_DEPTH);
                let root =
                    (LIMSUP_DEPTH / 2..=LIMSUP_DEPTH).map(|k| a[k].abs().powf(1.0 / k as f64)).fold(0.0, f64::max);
                if root == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / root
                }
            }
        })
    }

    /// Lower bound on `d(f, I) = inf |f(x) - f(y)| / |x - y|` over a uniform grid.
    pub fn min_slope(&self, interval: &Interval, grid: usize) -> Result<SlopeBound> {
        interval.require_proper()?;
        if let AnalyticFn::Linear { a, .. } = self {
            return Ok(SlopeBound { value: a.abs(), grid_value: a.abs(), closed_form: Some(a.abs()) });
        }
        let g = grid.max(2);
        let (lo, hi) = (interval.lo, interval.hi);
        let step = (hi - lo) / (g - 1) as f64;
        let xs: Vec<f64> = (0..g).map(|i| if i + 1 == g { hi } else { lo + step * i as f64 }).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        let mut q = f64::INFINITY;
        for a in 0..g {
            for b in (a + 1)..g {
                q = q.min(((fs[b] - fs[a]) / (xs[b] - xs[a])).abs());
            }
        }
        let curv = xs
            .iter()
            .chain(xs.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect::<Vec<_>>().iter())
            .map(|&x| self.deriv(2, x).abs())
            .fold(0.0, f64::max);
        let grid_value = (q - 0.5 * step * curv).max(0.0);
        let closed_form = self.flip_gap().map(|gap| gap.abs() * logistic_slope_floor(interval.sup_abs()));
        let value = closed_form.map_or(grid_value, |c| c.max(grid_value));
        Ok(SlopeBound { value, grid_value, closed_form })
    }

    /// `rho_0`: the infimum of the radius over `I`, or over the real line for a strip.
    pub fn region_radius(&self, region: &Region) -> Result<f64> {
        match (self, region) {
            (AnalyticFn::LogisticFlip { p01, p11 }, _) if p01 == p11 => Ok(f64::INFINITY),
            (AnalyticFn::LogisticFlip { .. }, Region::Strip) => Ok(PI),
            (AnalyticFn::LogisticFlip { .. }, Region::Interval(i)) => {
                let m = if i.lo <= 0.0 && i.hi >= 0.0 { 0.0 } else { i.lo.abs().min(i.hi.abs()) };
                Ok(m.hypot(PI))
            }
            (AnalyticFn::Custom(_), Region::Interval(i)) => {
                i.require_proper()?;
                let g = 101;
                let mut r = f64::INFINITY;
                for k in 0..g {
                    let x = i.lo + (i.hi - i.lo) * k as f64 / (g - 1) as f64;
                    r = r.min(self.radius_at(x)?);
                }
                Ok(r)
            }
            (AnalyticFn::Custom(_), Region::Strip) => {
                Err(Error::UnboundedEnvelope("custom functions have no closed-form strip radius".into()))
            }
            _ => Ok(f64::INFINITY),
        }
    }

    /// Envelope `d_k = sup |f^(k)| / k!` over `I`, or `dbar_k` over the real line.
    pub fn coefficient_envelope(
        &self,
        region: &Region,
        contour_radius: f64,
        depth: usize,
    ) -> Result<CoefficientEnvelope> {
        let rho0 = self.region_radius(region)?;
        if !(contour_radius > 0.0) {
            return Err(Error::OutOfRange(format!("contour radius {contour_radius} must be positive")));
        }
        if contour_radius >= rho0 {
            return Err(Error::ContourTouchesPole { radius: contour_radius, limit: rho0 });
        }
        let mut d = vec![0.0; depth + 1];
        let method = match self {
            AnalyticFn::Linear { a, .. } => {
                if depth >= 1 {
                    d[1] = a.abs();
                }
                EnvelopeMethod::Exact
            }
            AnalyticFn::LogisticFlip { p01, p11 } => {
                let gap = (p11 - p01).abs();
                if contour_radius >= PI {
                    return Err(Error::ContourTouchesPole { radius: contour_radius, limit: PI });
                }
                let m = strip_derivative_bound(contour_radius);
                for (k, dk) in d.iter_mut().enumerate().skip(1) {
                    *dk = gap * m / (k as f64 * contour_radius.powi(k as i32 - 1));
                }
                EnvelopeMethod::Contour
            }
            AnalyticFn::Polynomial(c) => match region {
                Region::Strip => {
                    let deg = self.degree().unwrap_or(0);
                    if deg >= 2 {
                        return Err(Error::UnboundedEnvelope(format!(
                            "polynomial of degree {deg} has unbounded derivatives on the real line"
                        )));
                    }
                    if depth >= 1 && deg == 1 {
                        d[1] = c[1].abs();
                    }
                    EnvelopeMethod::Exact
                }
                Region::Interval(i) => {
                    self.grid_envelope(i, &mut d)?;
                    EnvelopeMethod::Grid
                }
            },
            AnalyticFn::Exp | AnalyticFn::Custom(_) => match region {
                Region::Strip => {
                    return Err(Error::UnboundedEnvelope(format!(
                        "{} has unbounded derivatives on the real line",
                        self.name()
                    )))
                }
                Region::Interval(i) => {
                    self.grid_envelope(i, &mut d)?;
                    EnvelopeMethod::Grid
                }
            },
        };
        Ok(CoefficientEnvelope { d, rho0, contour_radius, depth, method, region: *region })
    }

    fn grid_envelope(&self, interval: &Interval, d: &mut [f64]) -> Result<()> {
        interval.require_proper()?;
        let depth = d.len() - 1;
        let g = DEFAULT_GRID;
        for i in 0..g {
            let x = if i + 1 == g {
                interval.hi
            } else {
                interval.lo + (interval.hi - interval.lo) * i as f64 / (g - 1) as f64
            };
            let a = self.taylor_coeffs(x, depth);
            for k in 1..=depth {
                d[k] = d[k].max(a[k].abs());
            }
        }
        Ok(())
    }

    /// `r(u) = min_i rho_c(f, X_i^T u)` and `A_k(u) = max_i |a_k(X_i^T u)|` for `k = 0..=depth`.
    pub fn multi_radius(&self, x: &DesignMatrix, u: &SparseParam, depth: usize) -> Result<(f64, Vec<f64>)> {
        self.radius_over(&x.apply(u), depth)
    }

    /// As [`AnalyticFn::multi_radius`] for a precomputed linear predictor.
    pub fn radius_over(&self, eta: &[f64], depth: usize) -> Result<(f64, Vec<f64>)> {
        let mut r = f64::INFINITY;
        let mut a = vec![0.0; depth + 1];
        for &t in eta {
            r = r.min(self.radius_at(t)?);
            for (acc, c) in a.iter_mut().zip(self.taylor_coeffs(t, depth)) {
                *acc = f64::max(*acc, c.abs());
            }
        }
        Ok((r, a))
    }
}

/// Result of [`AnalyticFn::min_slope`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeBound {
    /// The reported lower bound on `d(f, I)`.
    pub value: f64,
    /// Grid minimum minus the curvature correction.
    pub grid_value: f64,
    /// Exact value when known in closed form.
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "interval", rename_all = "snake_case")]
pub enum Region {
    Interval(Interval),
    /// The real line, with complex neighbourhoods of bounded imaginary part.
    Strip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMethod {
    Exact,
    Contour,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEnvelope {
    /// `d[k]` for `k = 0..=depth`; `d[0]` is unused and zero.
    pub d: Vec<f64>,
    pub rho0: f64,
    pub contour_radius: f64,
    pub depth: usize,
    pub method: EnvelopeMethod,
    pub region: Region,
}
