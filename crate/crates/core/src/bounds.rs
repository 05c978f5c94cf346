//! Constants `c1`, `c2`, `c_r = 3 c1^2 / c2` and `kappa_r = 3 c1 / c2` for each
//! error-bound theorem, and the resulting L2 error radius.

use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticFn, CoefficientEnvelope, EnvelopeMethod, Region};
use crate::design::{ColumnNorm, DesignMatrix};
use crate::domains::Interval;
use crate::error::{Error, Result};
use crate::expfam::{Curvature, ExpFamily};
use crate::grids::GridStatistics;
use crate::series::{certify, SeriesSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Glm,
    OneDisc,
    MultiDisc,
    UbStrip,
    UbInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UbMode {
    Strip,
    Interval,
}

/// Inputs echoed into a report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundsInputs {
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub q: f64,
    pub nu: f64,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<Curvature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub theorem: Theorem,
    pub c1: f64,
    pub c2: f64,
    pub c_r: f64,
    pub kappa_r: f64,
    /// `ln(p / q)` for the likelihood path, `ln(p (1 + 1/q))` for the series paths.
    pub lambda_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesSum>,
    pub inputs: BoundsInputs,
}

impl BoundsReport {
    fn assemble(
        theorem: Theorem,
        c1: f64,
        c2: f64,
        lambda_p: f64,
        series: Option<SeriesSum>,
        inputs: BoundsInputs,
    ) -> Self {
        Self { theorem, c1, c2, c_r: 3.0 * c1 * c1 / c2, kappa_r: 3.0 * c1 / c2, lambda_p, series, inputs }
    }

    /// `kappa_r sqrt(|spt|) / sqrt(n)`.
    pub fn error_radius(&self, spt_size: usize, n: usize) -> f64 {
        error_radius(self.kappa_r, spt_size, n)
    }
}

/// `kappa_r sqrt(spt_size) / sqrt(n)`.
pub fn error_radius(kappa_r: f64, spt_size: usize, n: usize) -> f64 {
    if spt_size == 0 {
        return 0.0;
    }
    kappa_r * (spt_size as f64).sqrt() / (n as f64).sqrt()
}

/// `ln(p (1 + 1/q))`.
pub fn lambda_p(p: usize, q: f64) -> f64 {
    (p as f64 * (1.0 + 1.0 / q)).ln()
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::OutOfRange(format!("q = {q} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::OutOfRange(format!("nu = {nu} must lie in (0, 1)")));
    }
    Ok(())
}

/// `sigma sqrt(ln(p / q) / (2n)) max_j ||V_j||_2`.
pub fn c1_glm(x: &DesignMatrix, sigma: f64, q: f64) -> f64 {
    let (n, p) = (x.n() as f64, x.p() as f64);
    sigma * ((p / q).ln() / (2.0 * n)).sqrt() * x.max_column_norm(ColumnNorm::L(2))
}

/// `nu delta (1 + mu) min_j ||V_j||_2^2 / (2n)`.
pub fn c2_glm(x: &DesignMatrix, nu: f64, delta: f64) -> f64 {
    let vmin = x.min_column_norm(ColumnNorm::L(2));
    nu * delta * (1.0 + x.coherence_or_zero()) * vmin * vmin / (2.0 * x.n() as f64)
}

/// `d(f, I)^2 nu (1 + mu) min_j ||V_j||_2^2 / n`.
pub fn c2_lse(x: &DesignMatrix, nu: f64, dmin: f64) -> Result<f64> {
    if !(dmin > 0.0) {
        return Err(Error::NonIdentifiable(dmin));
    }
    let vmin = x.min_column_norm(ColumnNorm::L(2));
    Ok(dmin * dmin * nu * (1.0 + x.coherence_or_zero()) * vmin * vmin / x.n() as f64)
}

/// Closed-form `kappa_r` of the likelihood theorem.
pub fn glm_kappa_closed_form(x: &DesignMatrix, sigma: f64, q: f64, nu: f64, delta: f64) -> f64 {
    let p = x.p() as f64;
    let vmin = x.min_column_norm(ColumnNorm::L(2));
    3.0 * sigma * (2.0 * (p / q).ln()).sqrt() / (nu * delta * (1.0 + x.coherence_or_zero()))
        * (x.n() as f64).sqrt()
        * x.max_column_norm(ColumnNorm::L(2))
        / (vmin * vmin)
}

/// Closed-form `c_r` of the likelihood theorem.
pub fn glm_cr_closed_form(x: &DesignMatrix, sigma: f64, q: f64, nu: f64, delta: f64) -> f64 {
    let p = x.p() as f64;
    let ratio = x.max_column_norm(ColumnNorm::L(2)) / x.min_column_norm(ColumnNorm::L(2));
    3.0 * sigma * sigma * (p / q).ln() / (nu * delta * (1.0 + x.coherence_or_zero())) * ratio * ratio
}

/// Logistic-regression `c_r`: `12 ln(p/q) / (nu (1 + mu)) * (max/min ||V||_2)^2 * cosh^2(M_I / 2)`.
pub fn logistic_cr_closed_form(x: &DesignMatrix, q: f64, nu: f64, m_i: f64) -> f64 {
    let p = x.p() as f64;
    let ratio = x.max_column_norm(ColumnNorm::L(2)) / x.min_column_norm(ColumnNorm::L(2));
    let ch = (0.5 * m_i).cosh();
    12.0 * (p / q).ln() / (nu * (1.0 + x.coherence_or_zero())) * ratio * ratio * ch * ch
}

/// Logistic-regression `kappa_r`: `12 sqrt(2 ln(p/q)) / (nu (1 + mu)) * sqrt(n) max ||V||_2 / min ||V||_2^2 * cosh^2(M_I / 2)`.
pub fn logistic_kappa_closed_form(x: &DesignMatrix, q: f64, nu: f64, m_i: f64) -> f64 {
    let ch = (0.5 * m_i).cosh();
    12.0 * (2.0 * (x.p() as f64 / q).ln()).sqrt() / (nu * (1.0 + x.coherence_or_zero())) * x.condition_ratio() * ch * ch
}

/// Report for the likelihood theorem, on `D = P(I, n(nu)/2)`.
pub fn glm_report(
    x: &DesignMatrix,
    family: &ExpFamily,
    interval: &Interval,
    sigma: f64,
    q: f64,
    nu: f64,
) -> Result<BoundsReport> {
    if !(q > 0.0 && q < 0.5) {
        return Err(Error::OutOfRange(format!("q = {q} must lie in (0, 1/2)")));
    }
    check_nu(nu)?;
    let curvature = family.curvature_inf(interval)?;
    let c1 = c1_glm(x, sigma, q);
    let c2 = c2_glm(x, nu, curvature.delta);
    let inputs = BoundsInputs {
        n: x.n(),
        p: x.p(),
        sigma,
        q,
        nu,
        mu: x.coherence_or_zero(),
        interval: Some(*interval),
        curvature: Some(curvature),
        ..Default::default()
    };
    let lp = (x.p() as f64 / q).ln();
    Ok(BoundsReport::assemble(Theorem::Glm, c1, c2, lp, None, inputs))
}

/// Per-order design factors `n^{-1/(2k)} max_j ||V_j||_{2k}` for `k = 1..=depth`.
fn design_factors(x: &DesignMatrix, depth: usize) -> Vec<f64> {
    (1..=depth).map(|k| x.series_norm_factor(k)).collect()
}

fn pow_or_zero(coef: f64, base: f64, e: i32) -> f64 {
    if coef == 0.0 {
        0.0
    } else {
        coef * base.powi(e)
    }
}

/// Single-disc `c1`: `sigma sqrt(2 lambda_p) sum_k sqrt(k) |f^(k)(0)| / (k-1)! (theta rho)^{k-1} g_k`.
///
/// `rho` is `rho_c(f, 0)`, optionally capped; a cap is required for entire
/// functions of infinite degree.
pub fn c1_one_disc(
    x: &DesignMatrix,
    f: &AnalyticFn,
    sigma: f64,
    q: f64,
    theta: f64,
    depth: usize,
    radius_cap: Option<f64>,
) -> Result<SeriesSum> {
    check_q(q)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::OutOfRange(format!("theta = {theta} must lie in (0, 1)")));
    }
    let rho = radius_cap.map_or(f.radius_at(0.0)?, |c| c.min(f.radius_at(0.0).unwrap_or(c)));
    let degree = f.degree();
    if rho.is_infinite() && degree.is_none_or(|d| d > depth) {
        return Err(Error::UnboundedEnvelope("entire function of unbounded degree needs a radius cap".into()));
    }
    let a = f.taylor_coeffs(0.0, depth);
    let g = design_factors(x, depth);
    let scale = sigma * (2.0 * lambda_p(x.p(), q)).sqrt();
    let terms: Vec<f64> = (1..=depth)
        .map(|k| {
            let kf = k as f64;
            scale * pow_or_zero(kf.sqrt() * kf * a[k].abs(), theta * rho, k as i32 - 1) * g[k - 1]
        })
        .collect();
    certify(&terms, theta, degree)
}

/// Multi-disc `c1`: `sqrt(2) sigma sum_k k sqrt(ln|G| + k lambda_p) A_k(G) b(G)^{k-1} g_k`.
pub fn c1_multi_disc(x: &DesignMatrix, stats: &GridStatistics, sigma: f64, q: f64, depth: usize) -> Result<SeriesSum> {
    check_q(q)?;
    if stats.a_sup.len() < depth + 1 {
        return Err(Error::Dimension(format!(
            "grid statistics hold {} coefficients, need {}",
            stats.a_sup.len(),
            depth + 1
        )));
    }
    if !(stats.b_inf < stats.r_inf) {
        return Err(Error::DomainExceedsRadius { d: stats.b_inf, r: stats.r_inf });
    }
    let lp = lambda_p(x.p(), q);
    let ln_g = (stats.size as f64).ln();
    let g = design_factors(x, depth);
    let terms: Vec<f64> = (1..=depth)
        .map(|k| {
            let kf = k as f64;
            let c = kf * (ln_g + kf * lp).sqrt() * stats.a_sup[k];
            2f64.sqrt() * sigma * pow_or_zero(c, stats.b_inf, k as i32 - 1) * g[k - 1]
        })
        .collect();
    let ratio = if stats.r_inf.is_infinite() { 0.0 } else { stats.b_inf / stats.r_inf };
    certify(&terms, ratio, stats.degree)
}

/// Envelope-based `c1` on a compact subset of `P(I, h/2)`:
/// `sqrt(2) sigma sum_k k sqrt(h ln(p Q) + k lambda_p) d_k rho1^{k-1} g_k`,
/// with `Q = 2 delta(D)/rho1 + 1` on a strip and `Q = 4 delta(D)/rho1 + 1` on an interval.
#[allow(clippy::too_many_arguments)]
pub fn c1_ub(
    x: &DesignMatrix,
    env: &CoefficientEnvelope,
    sigma: f64,
    q: f64,
    h: usize,
    delta_d: f64,
    rho1: f64,
    mode: UbMode,
) -> Result<SeriesSum> {
    check_q(q)?;
    if !(rho1 > 0.0) {
        return Err(Error::OutOfRange(format!("rho1 = {rho1} must be positive")));
    }
    if rho1 >= env.rho0 {
        return Err(Error::ContourTouchesPole { radius: rho1, limit: env.rho0 });
    }
    let depth = env.depth;
    let q_factor = match mode {
        UbMode::Strip => 2.0 * delta_d / rho1 + 1.0,
        UbMode::Interval => 4.0 * delta_d / rho1 + 1.0,
    };
    let grid_term = h as f64 * (x.p() as f64 * q_factor).ln();
    let lp = lambda_p(x.p(), q);
    let g = design_factors(x, depth);
    let terms: Vec<f64> = (1..=depth)
        .map(|k| {
            let kf = k as f64;
            let c = kf * (grid_term + kf * lp).sqrt() * env.d[k];
            2f64.sqrt() * sigma * pow_or_zero(c, rho1, k as i32 - 1) * g[k - 1]
        })
        .collect();
    let (ratio, last) = match env.method {
        EnvelopeMethod::Contour => (rho1 / env.contour_radius, None),
        EnvelopeMethod::Grid => (rho1 / env.rho0, None),
        EnvelopeMethod::Exact => (0.0, Some(env.d.iter().rposition(|v| *v != 0.0).unwrap_or(0))),
    };
    certify(&terms, ratio, last)
}

/// Report for the single-disc theorem.
#[allow(clippy::too_many_arguments)]
pub fn one_disc_report(
    x: &DesignMatrix,
    f: &AnalyticFn,
    interval: &Interval,
    sigma: f64,
    q: f64,
    nu: f64,
    theta: f64,
    depth: usize,
    radius_cap: Option<f64>,
) -> Result<BoundsReport> {
    check_nu(nu)?;
    if !interval.contains(0.0) {
        return Err(Error::OutOfRange(format!("0 must lie in {interval}")));
    }
    let slope = f.min_slope(interval, crate::analytic::DEFAULT_GRID)?.value;
    let series = c1_one_disc(x, f, sigma, q, theta, depth, radius_cap)?;
    let c2 = c2_lse(x, nu, slope)?;
    let rho = radius_cap.map_or(f.radius_at(0.0)?, |c| c.min(f.radius_at(0.0).unwrap_or(c)));
    let inputs = BoundsInputs {
        n: x.n(),
        p: x.p(),
        sigma,
        q,
        nu,
        mu: x.coherence_or_zero(),
        interval: Some(*interval),
        min_slope: Some(slope),
        theta: Some(theta),
        radius: rho.is_finite().then_some(rho),
        ..Default::default()
    };
    Ok(BoundsReport::assemble(Theorem::OneDisc, series.total, c2, lambda_p(x.p(), q), Some(series), inputs))
}

/// Report for the multi-disc theorem with a prebuilt grid.
#[allow(clippy::too_many_arguments)]
pub fn multi_disc_report(
    x: &DesignMatrix,
    f: &AnalyticFn,
    stats: &GridStatistics,
    interval: &Interval,
    sigma: f64,
    q: f64,
    nu: f64,
    depth: usize,
) -> Result<BoundsReport> {
    check_nu(nu)?;
    let slope = f.min_slope(interval, crate::analytic::DEFAULT_GRID)?.value;
    let series = c1_multi_disc(x, stats, sigma, q, depth)?;
    let c2 = c2_lse(x, nu, slope)?;
    let inputs = BoundsInputs {
        n: x.n(),
        p: x.p(),
        sigma,
        q,
        nu,
        mu: x.coherence_or_zero(),
        interval: Some(*interval),
        min_slope: Some(slope),
        grid_size: Some(stats.size),
        grid_b: Some(stats.b_inf),
        grid_r: stats.r_inf.is_finite().then_some(stats.r_inf),
        ..Default::default()
    };
    Ok(BoundsReport::assemble(Theorem::MultiDisc, series.total, c2, lambda_p(x.p(), q), Some(series), inputs))
}

/// Parameters of an envelope-based report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UbParams {
    pub mode: UbMode,
    pub h: usize,
    pub delta_d: f64,
    pub rho1: f64,
    pub contour_radius: f64,
    pub depth: usize,
}

/// Report for the envelope bounds.
pub fn ub_report(
    x: &DesignMatrix,
    f: &AnalyticFn,
    interval: &Interval,
    sigma: f64,
    q: f64,
    nu: f64,
    params: &UbParams,
) -> Result<BoundsReport> {
    check_nu(nu)?;
    let region = match params.mode {
        UbMode::Strip => Region::Strip,
        UbMode::Interval => Region::Interval(*interval),
    };
    let env = f.coefficient_envelope(&region, params.contour_radius, params.depth)?;
    let series = c1_ub(x, &env, sigma, q, params.h, params.delta_d, params.rho1, params.mode)?;
    let slope = f.min_slope(interval, crate::analytic::DEFAULT_GRID)?.value;
    let c2 = c2_lse(x, nu, slope)?;
    let theorem = match params.mode {
        UbMode::Strip => Theorem::UbStrip,
        UbMode::Interval => Theorem::UbInterval,
    };
    let inputs = BoundsInputs {
        n: x.n(),
        p: x.p(),
        sigma,
        q,
        nu,
        mu: x.coherence_or_zero(),
        interval: Some(*interval),
        min_slope: Some(slope),
        h: Some(params.h),
        delta_d: Some(params.delta_d),
        rho1: Some(params.rho1),
        contour_radius: Some(params.contour_radius),
        radius: env.rho0.is_finite().then_some(env.rho0),
        ..Default::default()
    };
    Ok(BoundsReport::assemble(theorem, series.total, c2, lambda_p(x.p(), q), Some(series), inputs))
}

/// Grid parameter `h` for domains inside `P(I, n(nu)/2)`: twice the largest
/// admissible support size.
pub fn ub_grid_h(x: &DesignMatrix, nu: f64) -> Result<usize> {
    let cap = x.capacity(nu)?;
    if cap.is_infinite() {
        return Ok(2 * x.p());
    }
    Ok(2 * ((cap / 2.0).floor() as usize).min(x.p()))
}
