//! Data and noise generation, empirical checks of the noise tail and of the
//! control event, and Monte Carlo coverage experiments.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticFn;
use crate::bounds::BoundsReport;
use crate::config::{DesignSpec, FamilySpec, ModelSpec};
use crate::design::{DesignMatrix, SparseParam};
use crate::domains::{in_domain, DomainSpec};
use crate::error::{Error, Result};
use crate::estimator::{fit, FitProblem};
use crate::expfam::sigmoid;

pub use crate::config::Config as ExperimentConfig;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;
/// Largest `sum_k p^k` enumerated by [`verify_control_event`].
pub const TUPLE_BUDGET: usize = 100_000;
/// Numerical slack when comparing an estimation error with the radius.
pub const HIT_TOLERANCE: f64 = 1e-6;
const SPECTRAL_TOL: f64 = 1e-8;
const RESCALE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    GaussianIid {
        sigma: f64,
    },
    /// `N(0, sigma^2 cov)` with the spectral radius of `cov` at most 1.
    GaussianCorrelated {
        sigma: f64,
        cov: Vec<Vec<f64>>,
    },
    /// Uniform on `[-sigma, sigma]`.
    BoundedIid {
        sigma: f64,
    },
    /// `z - prob` with `z ~ Bernoulli(prob)`.
    BernoulliResidual {
        #[serde(default = "half")]
        prob: f64,
    },
    /// Logistic responses passed through a binary channel with
    /// `Pr{z = 1 | y = 0} = p01`, `Pr{z = 1 | y = 1} = p11`.
    FlipChannel {
        p01: f64,
        p11: f64,
    },
}

fn half() -> f64 {
    0.5
}

/// Largest absolute eigenvalue of a symmetric matrix by power iteration.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * i as f64);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..100_000 {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (norm - est).abs() <= 1e-15 * norm {
            return norm;
        }
        est = norm;
    }
    est
}

impl NoiseModel {
    /// The constant in the sub-Gaussian tail bound this model satisfies.
    pub fn sigma(&self) -> f64 {
        match self {
            NoiseModel::GaussianIid { sigma }
            | NoiseModel::GaussianCorrelated { sigma, .. }
            | NoiseModel::BoundedIid { sigma } => *sigma,
            NoiseModel::BernoulliResidual { .. } | NoiseModel::FlipChannel { .. } => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        match self {
            NoiseModel::GaussianIid { sigma } | NoiseModel::BoundedIid { sigma } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return cfg(format!("sigma = {sigma} must be finite and nonnegative"));
                }
            }
            NoiseModel::GaussianCorrelated { sigma, cov } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return cfg(format!("sigma = {sigma} must be finite and nonnegative"));
                }
                let m = covariance_matrix(cov)?;
                let rho = spectral_radius(&m);
                if rho > 1.0 + SPECTRAL_TOL {
                    return Err(Error::SpectralRadius(rho));
                }
            }
            NoiseModel::BernoulliResidual { prob } => {
                if !(0.0..=1.0).contains(prob) {
                    return cfg(format!("prob = {prob} must lie in [0, 1]"));
                }
            }
            NoiseModel::FlipChannel { p01, p11 } => {
                if !((0.0..=1.0).contains(p01) && (0.0..=1.0).contains(p11)) {
                    return cfg(format!("p01 = {p01}, p11 = {p11} must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Sampler for mean-zero noise vectors of length `n`.
    pub fn sampler(&self, n: usize) -> Result<NoiseSampler> {
        self.validate()?;
        let root = match self {
            NoiseModel::GaussianCorrelated { cov, .. } => {
                let m = covariance_matrix(cov)?;
                if m.nrows() != n {
                    return Err(Error::Dimension(format!("covariance is {}x{}, need n = {n}", m.nrows(), m.nrows())));
                }
                Some(symmetric_sqrt(&m)?)
            }
            _ => None,
        };
        Ok(NoiseSampler { model: self.clone(), n, root })
    }
}

fn covariance_matrix(cov: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = cov.len();
    if n == 0 || cov.iter().any(|r| r.len() != n) {
        return Err(Error::Config("cov must be a nonempty square matrix".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
    if m.iter().any(|v| !v.is_finite()) || (0..n).any(|i| (0..i).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12)) {
        return Err(Error::Config("cov must be finite and symmetric".into()));
    }
    Ok(m)
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|l| *l < -1e-10 * scale) {
        return Err(Error::Config("cov is not positive semidefinite".into()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

pub struct NoiseSampler {
    model: NoiseModel,
    n: usize,
    root: Option<DMatrix<f64>>,
}

impl NoiseSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.n;
        match &self.model {
            NoiseModel::GaussianIid { sigma } => (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect(),
            NoiseModel::GaussianCorrelated { sigma, .. } => {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let root = self.root.as_ref().expect("correlated sampler has a root");
                (root * z * *sigma).iter().copied().collect()
            }
            NoiseModel::BoundedIid { sigma } => (0..n).map(|_| sigma * (2.0 * rng.random::<f64>() - 1.0)).collect(),
            NoiseModel::BernoulliResidual { prob } => (0..n).map(|_| bernoulli(rng, *prob) - prob).collect(),
            NoiseModel::FlipChannel { p01, p11 } => {
                let m = 0.5 * (p01 + p11);
                (0..n).map(|_| flip(rng, 0.0, *p01, *p11) - m).collect()
            }
        }
    }
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, prob: f64) -> f64 {
    if rng.random::<f64>() < prob {
        1.0
    } else {
        0.0
    }
}

/// A logistic response at natural parameter `t` passed through the channel.
fn flip<R: Rng + ?Sized>(rng: &mut R, t: f64, p01: f64, p11: f64) -> f64 {
    let latent = bernoulli(rng, sigmoid(t));
    bernoulli(rng, if latent == 1.0 { p11 } else { p01 })
}

/// Random number generator for replicate `replicate` on stream `stream`
/// (0 design, 1 instances, 2 tail checks, 3 control checks).
///
/// The replicate index is spread by a golden-ratio multiplier before the XOR
/// so that nearby seeds do not share replicate streams.
pub fn rng_for(seed: u64, replicate: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ replicate.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

const COLUMN_ATTEMPTS: usize = 100_000;

/// The design of an experiment; a deterministic function of `(spec, n, p, seed)`.
pub fn generate_design(spec: &DesignSpec, n: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
    let mut rng = rng_for(seed, 0, 0);
    let rng = &mut rng;
    let data = match spec {
        DesignSpec::Csv { path } => return DesignMatrix::from_csv_path(path),
        DesignSpec::BinaryIid => {
            let mut m = DMatrix::zeros(n, p);
            for j in 0..p {
                for _ in 0..COLUMN_ATTEMPTS {
                    for i in 0..n {
                        m[(i, j)] = bernoulli(rng, 0.5);
                    }
                    if m.column(j).iter().any(|v| *v != 0.0) {
                        break;
                    }
                }
            }
            m
        }
        DesignSpec::Pm1Iid => DMatrix::from_fn(n, p, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 }),
        DesignSpec::GaussianIid => DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal)),
        DesignSpec::LowCoherencePm1 { target_mu } => {
            let limit = target_mu * n as f64;
            let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
            for j in 0..p {
                let mut found = false;
                for _ in 0..COLUMN_ATTEMPTS {
                    let c: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                    let ok = cols.iter().all(|d| c.iter().zip(d).map(|(a, b)| a * b).sum::<f64>().abs() <= limit);
                    if ok {
                        cols.push(c);
                        found = true;
                        break;
                    }
                }
                if !found {
                    return Err(Error::OutOfRange(format!(
                        "no +-1 column {j} with coherence <= {target_mu} after {COLUMN_ATTEMPTS} draws"
                    )));
                }
            }
            DMatrix::from_fn(n, p, |i, j| cols[j][i])
        }
    };
    DesignMatrix::new(data)
}

/// The design of `cfg`.
pub fn experiment_design(cfg: &ExperimentConfig) -> Result<DesignMatrix> {
    generate_design(&cfg.design, cfg.n, cfg.p, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub beta: SparseParam,
    pub y: Vec<f64>,
}

/// A true parameter in the domain and responses for replicate `replicate` on design `x`.
pub fn draw_instance(cfg: &ExperimentConfig, x: &DesignMatrix, spec: &DomainSpec, replicate: u64) -> Result<Instance> {
    let mut rng = rng_for(cfg.seed, replicate, 1);
    let rng = &mut rng;
    let p = x.p();
    let k = cfg.spt_size;
    if k > p || k > spec.h_max(p) {
        return Err(Error::InfeasibleTruth(replicate as usize));
    }
    let mut vals = vec![0.0; p];
    for j in sample(rng, p, k).into_vec() {
        let mag: f64 = rng.random_range(0.5..=1.5);
        vals[j] = if rng.random::<bool>() { mag } else { -mag };
    }
    let mut beta = SparseParam::new(vals);
    let mut attempts = 0;
    while !in_domain(&beta, x, spec) {
        if attempts == RESCALE_ATTEMPTS {
            return Err(Error::InfeasibleTruth(replicate as usize));
        }
        beta = beta.scale(0.9);
        attempts += 1;
    }
    let eta = x.apply(&beta);
    let y = match &cfg.model {
        ModelSpec::Glm { family: FamilySpec::Bernoulli } => eta.iter().map(|&t| bernoulli(rng, sigmoid(t))).collect(),
        ModelSpec::Glm { family: FamilySpec::Gaussian { sigma2 } } => {
            eta.iter().map(|&t| sigma2 * t + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect()
        }
        ModelSpec::Lse { link, noise } => {
            let f = link.function();
            match noise {
                NoiseModel::FlipChannel { p01, p11 } => eta.iter().map(|&t| flip(rng, t, *p01, *p11)).collect(),
                NoiseModel::BernoulliResidual { .. } => eta
                    .iter()
                    .map(|&t| {
                        let m = f.eval(t);
                        if !(0.0..=1.0).contains(&m) {
                            return Err(Error::OutOfRange(format!("f({t}) = {m} is not a probability")));
                        }
                        Ok(bernoulli(rng, m))
                    })
                    .collect::<Result<_>>()?,
                other => {
                    let eps = other.sampler(x.n())?.draw(rng);
                    eta.iter().zip(eps).map(|(&t, e)| f.eval(t) + e).collect()
                }
            }
        }
    };
    Ok(Instance { beta, y })
}

/// `(X, beta, y)` for one replicate.
pub fn generate_instance(cfg: &ExperimentConfig, replicate: u64) -> Result<(DesignMatrix, SparseParam, Vec<f64>)> {
    let x = experiment_design(cfg)?;
    let spec = cfg.domain_spec(&x)?;
    let inst = draw_instance(cfg, &x, &spec, replicate)?;
    Ok((x, inst.beta, inst.y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub direction: usize,
    /// `t / sigma`.
    pub t: f64,
    pub frequency: f64,
    pub bound: f64,
    pub standard_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub sigma: f64,
    pub n: usize,
    pub trials: usize,
    pub rows: Vec<TailRow>,
    pub pass: bool,
}

/// Empirical `Pr{(a^T eps)^2 > t^2 ||a||^2}` for random unit `a` and
/// `t in {1, 2, 3} sigma`, against `2 exp(-t^2 / (2 sigma^2))` plus three
/// binomial standard errors.
pub fn verify_tail(noise: &NoiseModel, n: usize, trials: usize, directions: usize, seed: u64) -> Result<TailReport> {
    if trials < 10_000 {
        return Err(Error::OutOfRange(format!("trials = {trials} must be at least 10000")));
    }
    let sampler = noise.sampler(n)?;
    let sigma = noise.sigma();
    let mut rng = rng_for(seed, 0, 2);
    let dirs: Vec<DVector<f64>> = (0..directions)
        .map(|_| {
            let a = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = a.norm();
            a / norm
        })
        .collect();
    let ts = [1.0, 2.0, 3.0];
    let mut counts = vec![[0usize; 3]; directions];
    for _ in 0..trials {
        let eps = DVector::from_vec(sampler.draw(&mut rng));
        for (d, a) in dirs.iter().enumerate() {
            let s = a.dot(&eps);
            for (c, t) in counts[d].iter_mut().zip(ts) {
                if s * s > (t * sigma).powi(2) {
                    *c += 1;
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (d, cs) in counts.iter().enumerate() {
        for (c, t) in cs.iter().zip(ts) {
            let bound = 2.0 * (-0.5 * t * t).exp();
            let b = bound.min(1.0);
            let se = (b * (1.0 - b) / trials as f64).sqrt();
            let frequency = *c as f64 / trials as f64;
            rows.push(TailRow {
                direction: d,
                t,
                frequency,
                bound,
                standard_error: se,
                pass: frequency <= bound + 3.0 * se,
            });
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(TailReport { sigma, n, trials, rows, pass })
}

/// Both sides of the multinomial identity
/// `sum_{alpha in [p]^k} n_j(alpha) x_j^{n_j - 1} prod_{s != j} x_s^{n_s} = k (sum x)^{k-1}`.
pub fn multinomial_identity(x: &[f64], j: usize, k: usize) -> (f64, f64) {
    let p = x.len();
    let mut lhs = 0.0;
    for_each_tuple(p, k, |alpha| {
        let mut counts = vec![0i32; p];
        for &a in alpha {
            counts[a] += 1;
        }
        if counts[j] == 0 {
            return;
        }
        let mut term = counts[j] as f64 * x[j].powi(counts[j] - 1);
        for (s, &c) in counts.iter().enumerate() {
            if s != j {
                term *= x[s].powi(c);
            }
        }
        lhs += term;
    });
    let rhs = k as f64 * x.iter().sum::<f64>().powi(k as i32 - 1);
    (lhs, rhs)
}

/// Calls `visit` on every `alpha in {0..p}^k` in lexicographic order.
fn for_each_tuple(p: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut alpha = vec![0usize; k];
    loop {
        visit(&alpha);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            alpha[i] += 1;
            if alpha[i] < p {
                break;
            }
            alpha[i] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    /// Orders `k <= k_check` are checked; larger orders are not.
    pub k_check: usize,
    pub tuples: usize,
    pub trials: usize,
    pub frequency: f64,
    pub target: f64,
    pub standard_error: f64,
    pub pass: bool,
    /// Largest relative error of the multinomial identity, checked for `p <= 4`, `k <= 5`.
    pub multinomial_max_rel_error: Option<f64>,
}

/// Frequency of the event that
/// `|sum_i eps_i theta_ik X_{i alpha}| <= sigma sqrt(2 ln(p^k / q_k)) sqrt(sum_i theta_ik^2 X_{i alpha}^2)`
/// for all `k <= k_check` and `alpha in [p]^k`, with `q_k = (q / (1 + q))^k`.
///
/// `theta_ik` is the `k`-th Taylor coefficient of `f` at `X_i^T center`, or 1 without `f`.
#[allow(clippy::too_many_arguments)]
pub fn verify_control_event(
    x: &DesignMatrix,
    f: Option<&AnalyticFn>,
    center: &SparseParam,
    noise: &NoiseModel,
    q: f64,
    k_check: usize,
    trials: usize,
    seed: u64,
) -> Result<ControlReport> {
    if !(q > 0.0 && q < 0.5) {
        return Err(Error::OutOfRange(format!("q = {q} must lie in (0, 1/2)")));
    }
    let (n, p) = (x.n(), x.p());
    let tuples: usize = (1..=k_check).map(|k| p.saturating_pow(k as u32)).fold(0, usize::saturating_add);
    if tuples > TUPLE_BUDGET {
        return Err(Error::EnumerationBudget { count: tuples as f64, budget: TUPLE_BUDGET as f64 });
    }
    let sigma = noise.sigma();
    let sampler = noise.sampler(n)?;
    let eta = x.apply(center);
    let theta: Vec<Vec<f64>> = eta
        .iter()
        .map(|&t| match f {
            Some(f) => f.taylor_coeffs(t, k_check),
            None => vec![1.0; k_check + 1],
        })
        .collect();
    // rows: weight vectors c_alpha and thresholds
    let mut weights: Vec<f64> = Vec::with_capacity(tuples * n);
    let mut thresholds: Vec<f64> = Vec::with_capacity(tuples);
    let qq = q / (1.0 + q);
    for k in 1..=k_check {
        let ln_ratio = k as f64 * (p as f64).ln() - k as f64 * qq.ln();
        for_each_tuple(p, k, |alpha| {
            let mut ss = 0.0;
            for i in 0..n {
                let c = theta[i][k] * alpha.iter().map(|&j| x.get(i, j)).product::<f64>();
                weights.push(c);
                ss += c * c;
            }
            thresholds.push(sigma * (2.0 * ln_ratio).sqrt() * ss.sqrt());
        });
    }
    let mut rng = rng_for(seed, 0, 3);
    let mut holds = 0usize;
    for _ in 0..trials {
        let eps = sampler.draw(&mut rng);
        let ok = thresholds.iter().enumerate().all(|(a, thr)| {
            let s: f64 = weights[a * n..(a + 1) * n].iter().zip(&eps).map(|(c, e)| c * e).sum();
            s.abs() <= *thr
        });
        holds += ok as usize;
    }
    let multinomial_max_rel_error = (p <= 4).then(|| {
        let xs: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
        let mut worst = 0.0f64;
        for k in 1..=5 {
            for j in 0..p {
                let (l, r) = multinomial_identity(&xs, j, k);
                worst = worst.max((l - r).abs() / r.abs());
            }
        }
        worst
    });
    let target = 1.0 - 2.0 * q;
    let se = (target * (1.0 - target) / trials as f64).sqrt();
    let frequency = holds as f64 / trials as f64;
    Ok(ControlReport {
        k_check,
        tuples,
        trials,
        frequency,
        target,
        standard_error: se,
        pass: frequency >= target - 3.0 * se,
        multinomial_max_rel_error,
    })
}

/// Wilson score interval for `hits` successes out of `m`.
pub fn wilson_interval(hits: usize, m: usize, z: f64) -> (f64, f64) {
    if m == 0 {
        return (0.0, 1.0);
    }
    let mf = m as f64;
    let ph = hits as f64 / mf;
    let z2 = z * z;
    let denom = 1.0 + z2 / mf;
    let center = (ph + z2 / (2.0 * mf)) / denom;
    let half = z / denom * (ph * (1.0 - ph) / mf + z2 / (4.0 * mf * mf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    /// `||beta_hat - beta||_2`.
    pub error: Option<f64>,
    pub hit: bool,
    pub support_size: Option<usize>,
    /// `|spt(beta_hat)| <= |spt(beta)|`.
    pub support_within_truth: bool,
    /// The penalized objective at `beta_hat` does not exceed the one at `beta`.
    pub defining_inequality: Option<bool>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub report: BoundsReport,
    pub c_r: f64,
    pub radius: f64,
    pub replicates: Vec<ReplicateRecord>,
    pub hits: usize,
    pub coverage: f64,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    pub target: f64,
    pub pass: bool,
    pub failures: usize,
}

fn run_replicate(
    cfg: &ExperimentConfig,
    x: &DesignMatrix,
    spec: &DomainSpec,
    c_r: f64,
    radius: f64,
    r: u64,
) -> ReplicateRecord {
    let failed = |e: Error| ReplicateRecord {
        replicate: r,
        error: None,
        hit: false,
        support_size: None,
        support_within_truth: false,
        defining_inequality: None,
        failure: Some(e.to_string()),
    };
    let inst = match draw_instance(cfg, x, spec, r) {
        Ok(i) => i,
        Err(e) => return failed(e),
    };
    let mut problem = match FitProblem::new(x.clone(), inst.y, cfg.loss(), *spec, c_r) {
        Ok(p) => p,
        Err(e) => return failed(e),
    };
    problem.controls = cfg.controls;
    problem.mode = cfg.search;
    let res = match fit(&problem) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let error = res.beta_hat.sub(&inst.beta).norm2();
    let at_truth = problem.objective(&inst.beta);
    ReplicateRecord {
        replicate: r,
        error: Some(error),
        hit: error <= radius + HIT_TOLERANCE,
        support_size: Some(res.support.len()),
        support_within_truth: res.support.len() <= inst.beta.support_size(),
        defining_inequality: at_truth.map(|t| res.objective <= t + 1e-9 * t.abs().max(1.0)),
        failure: None,
    }
}

/// Replicates of generate, fit and compare with `kappa_r sqrt(spt) / sqrt(n)`.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageResult> {
    let x = experiment_design(cfg)?;
    let spec = cfg.domain_spec(&x)?;
    let report = cfg.bounds_report(&x)?;
    let c_r = cfg.c_r.unwrap_or(report.c_r);
    let radius = report.error_radius(cfg.spt_size, x.n());
    let replicates: Vec<ReplicateRecord> =
        (0..cfg.replicates as u64).into_par_iter().map(|r| run_replicate(cfg, &x, &spec, c_r, radius, r)).collect();
    let hits = replicates.iter().filter(|r| r.hit).count();
    let m = replicates.len();
    let (lo, hi) = wilson_interval(hits, m, Z95);
    let target = 1.0 - 2.0 * cfg.q;
    Ok(CoverageResult {
        report,
        c_r,
        radius,
        failures: replicates.iter().filter(|r| r.failure.is_some()).count(),
        replicates,
        hits,
        coverage: hits as f64 / m as f64,
        wilson_lower: lo,
        wilson_upper: hi,
        target,
        pass: lo >= target,
    })
}

/// One CSV row per replicate.
pub fn write_replicates_csv<W: Write>(result: &CoverageResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "error", "radius", "hit", "support_size", "defining_inequality", "failure"])?;
    for r in &result.replicates {
        let opt = |v: Option<String>| v.unwrap_or_default();
        w.write_record([
            r.replicate.to_string(),
            opt(r.error.map(|e| e.to_string())),
            result.radius.to_string(),
            r.hit.to_string(),
            opt(r.support_size.map(|s| s.to_string())),
            opt(r.defining_inequality.map(|b| b.to_string())),
            opt(r.failure.clone()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(200, 200, Z95);
        assert!((lo - 200.0 / (200.0 + Z95 * Z95)).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn spectral_radius_matches_eigenvalues() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        assert!((spectral_radius(&m) - (2.0 + 2f64.sqrt())).abs() < 1e-10);
        let neg = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 1.0]);
        assert!((spectral_radius(&neg) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn multinomial_small_case() {
        let (l, r) = multinomial_identity(&[1.0, 2.0], 0, 3);
        assert_eq!((l, r), (27.0, 27.0));
    }

    #[test]
    fn tuples_in_lexicographic_order() {
        let mut seen = Vec::new();
        for_each_tuple(2, 2, |a| seen.push(a.to_vec()));
        assert_eq!(seen, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn correlated_noise_checks_radius() {
        let too_big = NoiseModel::GaussianCorrelated { sigma: 1.0, cov: vec![vec![1.0, 0.5], vec![0.5, 1.0]] };
        assert!(matches!(too_big.validate(), Err(Error::SpectralRadius(r)) if (r - 1.5).abs() < 1e-9));
        let ok = NoiseModel::GaussianCorrelated { sigma: 1.0, cov: vec![vec![0.5, 0.5], vec![0.5, 0.5]] };
        ok.validate().unwrap();
    }
}
