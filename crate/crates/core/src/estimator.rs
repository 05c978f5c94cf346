//! The L0-penalized estimator `argmin_{u in D} loss(y, Xu) + c_r |spt(u)|`
//! by exhaustive support enumeration.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticFn;
use crate::design::{binomial, subsets, ColumnNorm, DesignMatrix, SparseParam};
use crate::domains::{in_domain, DomainSpec};
use crate::error::{Error, Result};
use crate::expfam::{penalty, ExpFamily};

/// Largest number of supports enumerated by [`fit`].
pub const SUBSET_BUDGET: f64 = 1e6;
/// Objective differences up to this size count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;
const ARMIJO: f64 = 1e-4;
const BOUNDARY_SLACK: f64 = 1e-7;

#[derive(Debug, Clone)]
pub enum Loss {
    /// Negative log-likelihood of a natural exponential family.
    Mle(ExpFamily),
    /// `||y - f(Xu)||_2^2`.
    Lse(AnalyticFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverControls {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub backtrack: f64,
    pub step_tol: f64,
    /// Refine boundary-blocked solutions with a log-barrier method.
    pub barrier: bool,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self { max_iter: 100, grad_tol: 1e-9, backtrack: 0.5, step_tol: 1e-12, barrier: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Exhaustive,
    /// Forward selection, for comparison only.
    Greedy,
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    pub x: DesignMatrix,
    pub y: Vec<f64>,
    pub loss: Loss,
    pub domain: DomainSpec,
    pub c_r: f64,
    pub controls: SolverControls,
    pub mode: SearchMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRecord {
    pub support: Vec<usize>,
    /// Penalized objective at the inner optimum, absent when infeasible.
    pub objective: Option<f64>,
    pub feasible: bool,
    /// Some domain constraint is active at the inner optimum.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta_hat: SparseParam,
    pub objective: f64,
    pub support: Vec<usize>,
    pub log: Vec<SupportRecord>,
    pub tie_break_applied: bool,
    /// The selected optimum sits on the boundary of the domain.
    pub boundary: bool,
}

/// Inner optimum over one support.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub u: SparseParam,
    /// Unpenalized loss.
    pub value: f64,
    pub feasible: bool,
    pub boundary: bool,
}

impl FitProblem {
    pub fn new(x: DesignMatrix, y: Vec<f64>, loss: Loss, domain: DomainSpec, c_r: f64) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::Dimension(format!("y has length {}, expected {}", y.len(), x.n())));
        }
        Ok(Self { x, y, loss, domain, c_r, controls: SolverControls::default(), mode: SearchMode::Exhaustive })
    }

    pub fn h_max(&self) -> usize {
        self.domain.h_max(self.x.p())
    }

    /// Loss at a linear predictor; `None` outside the family's natural interval.
    pub fn loss_eta(&self, eta: &[f64]) -> Option<f64> {
        let v = match &self.loss {
            Loss::Mle(fam) => fam.nll_eta(eta, &self.y).ok()?,
            Loss::Lse(f) => eta.iter().zip(&self.y).map(|(&t, &yi)| (yi - f.eval(t)).powi(2)).sum(),
        };
        v.is_finite().then_some(v)
    }

    pub fn loss(&self, u: &SparseParam) -> Option<f64> {
        self.loss_eta(&self.x.apply(u))
    }

    /// Penalized objective, `None` when `u` is outside the domain.
    pub fn objective(&self, u: &SparseParam) -> Option<f64> {
        if !in_domain(u, &self.x, &self.domain) {
            return None;
        }
        Some(self.loss(u)? + penalty(self.c_r, u.support_size()))
    }
}

/// Restriction of the problem to a fixed support.
struct Restricted<'a> {
    prob: &'a FitProblem,
    support: &'a [usize],
    xs: DMatrix<f64>,
    weights: Vec<f64>,
}

struct Linear {
    /// Constraint `a^T v <= b`.
    a: DVector<f64>,
    b: f64,
}

impl<'a> Restricted<'a> {
    fn new(prob: &'a FitProblem, support: &'a [usize]) -> Self {
        let x = &prob.x;
        let xs = DMatrix::from_fn(x.n(), support.len(), |i, a| x.get(i, support[a]));
        let weights = support.iter().map(|&j| x.column_norm(j, ColumnNorm::Inf)).collect();
        Self { prob, support, xs, weights }
    }

    fn k(&self) -> usize {
        self.support.len()
    }

    fn eta(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.xs * v
    }

    fn to_param(&self, v: &DVector<f64>) -> SparseParam {
        let mut u = vec![0.0; self.prob.x.p()];
        for (a, &j) in self.support.iter().enumerate() {
            u[j] = v[a];
        }
        SparseParam::new(u)
    }

    fn feasible(&self, v: &DVector<f64>, eta: &DVector<f64>) -> bool {
        let iv = &self.prob.domain.interval;
        if !eta.iter().all(|&t| iv.contains(t)) {
            return false;
        }
        if let Some(r) = self.prob.domain.l1inf_cap {
            let norm: f64 = v.iter().zip(&self.weights).map(|(a, w)| a.abs() * w).sum();
            if norm > r {
                return false;
            }
        }
        if let Loss::Mle(fam) = &self.prob.loss {
            let nat = fam.natural_interval();
            if !eta.iter().all(|&t| nat.contains(t)) {
                return false;
            }
        }
        true
    }

    fn value(&self, eta: &DVector<f64>) -> Option<f64> {
        self.prob.loss_eta(eta.as_slice())
    }

    /// Gradient and a positive semidefinite curvature matrix.
    fn derivatives(&self, eta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = eta.len();
        let y = &self.prob.y;
        let (gw, hw): (Vec<f64>, Vec<f64>) = match &self.prob.loss {
            Loss::Mle(fam) => (0..n).map(|i| (fam.d1(eta[i]) - y[i], fam.d2(eta[i]))).unzip(),
            Loss::Lse(f) => (0..n)
                .map(|i| {
                    let a = f.taylor_coeffs(eta[i], 2);
                    let (f0, f1, f2) = (a[0], a[1], 2.0 * a[2]);
                    let r = y[i] - f0;
                    (-2.0 * r * f1, 2.0 * (f1 * f1 - r * f2))
                })
                .unzip(),
        };
        let g = self.xs.transpose() * DVector::from_vec(gw);
        let hw_v = DVector::from_vec(hw);
        let mut h = self.xs.transpose() * DMatrix::from_diagonal(&hw_v) * &self.xs;
        if let Loss::Lse(f) = &self.prob.loss {
            if h.clone().cholesky().is_none() {
                // Gauss-Newton curvature when the full Hessian is indefinite
                let gn: Vec<f64> = eta.iter().map(|&t| 2.0 * f.d1(t).powi(2)).collect();
                h = self.xs.transpose() * DMatrix::from_diagonal(&DVector::from_vec(gn)) * &self.xs;
            }
        }
        (g, h)
    }

    fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        let k = h.nrows();
        let scale = (0..k).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut lambda = 0.0;
        for _ in 0..40 {
            let m = h + DMatrix::identity(k, k) * lambda;
            if let Some(ch) = m.cholesky() {
                return ch.solve(rhs);
            }
            lambda = if lambda == 0.0 { 1e-12 * scale } else { lambda * 10.0 };
        }
        rhs / scale
    }

    /// A feasible starting point, or `None`.
    fn start(&self) -> Option<DVector<f64>> {
        let k = self.k();
        let zero = DVector::zeros(k);
        if self.feasible(&zero, &self.eta(&zero)) {
            return Some(zero);
        }
        let target = DVector::from_element(self.prob.x.n(), self.prob.domain.interval.center());
        let gram = self.xs.transpose() * &self.xs;
        let v = Self::solve_spd(&gram, &(self.xs.transpose() * target));
        let mut s = 1.0;
        for _ in 0..60 {
            let w = &v * s;
            if self.feasible(&w, &self.eta(&w)) {
                return Some(w);
            }
            s *= 0.8;
        }
        None
    }

    /// Ridge fit of the linearized response, shrunk until feasible.
    fn ridge_start(&self, f: &AnalyticFn) -> Option<DVector<f64>> {
        let s0 = f.d1(0.0);
        if s0 == 0.0 || !s0.is_finite() {
            return None;
        }
        let f0 = f.eval(0.0);
        let z = DVector::from_iterator(self.prob.y.len(), self.prob.y.iter().map(|yi| (yi - f0) / s0));
        let gram = self.xs.transpose() * &self.xs;
        let tr = gram.trace() / self.k() as f64;
        let v =
            Self::solve_spd(&(gram + DMatrix::identity(self.k(), self.k()) * (1e-6 * tr)), &(self.xs.transpose() * z));
        let mut w = v;
        for _ in 0..60 {
            if self.feasible(&w, &self.eta(&w)) {
                return Some(w);
            }
            w *= 0.5;
        }
        None
    }

    /// Damped Newton with rejection backtracking. Returns the final point, its
    /// value and whether a step was blocked by the domain.
    fn descend(&self, mut v: DVector<f64>) -> (DVector<f64>, f64, bool) {
        let c = &self.prob.controls;
        let mut eta = self.eta(&v);
        let mut f = match self.value(&eta) {
            Some(f) => f,
            None => return (v, f64::INFINITY, false),
        };
        let mut blocked = false;
        for _ in 0..c.max_iter {
            let (g, h) = self.derivatives(&eta);
            if g.amax() <= c.grad_tol {
                break;
            }
            let step = -Self::solve_spd(&h, &g);
            let slope = g.dot(&step);
            let step = if slope < 0.0 { step } else { -g.clone() };
            let slope = g.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            let mut hit_domain = false;
            while t * step.amax() > c.step_tol {
                let w = &v + &step * t;
                let ew = self.eta(&w);
                if !self.feasible(&w, &ew) {
                    hit_domain = true;
                } else if let Some(fw) = self.value(&ew) {
                    if fw <= f + ARMIJO * t * slope {
                        v = w;
                        eta = ew;
                        let done = (f - fw).abs() <= 1e-16 * f.abs().max(1.0) && t == 1.0;
                        f = fw;
                        accepted = true;
                        if done {
                            return (v, f, blocked);
                        }
                        break;
                    }
                }
                t *= c.backtrack;
            }
            blocked |= hit_domain;
            if !accepted {
                break;
            }
        }
        (v, f, blocked)
    }

    fn constraints(&self) -> Vec<Linear> {
        let k = self.k();
        let mut out = Vec::new();
        let add_rows = |lo: f64, hi: f64, out: &mut Vec<Linear>| {
            for i in 0..self.xs.nrows() {
                let row = self.xs.row(i).transpose();
                if hi.is_finite() {
                    out.push(Linear { a: row.clone(), b: hi });
                }
                if lo.is_finite() {
                    out.push(Linear { a: -row, b: -lo });
                }
            }
        };
        let iv = self.prob.domain.interval;
        add_rows(iv.lo, iv.hi, &mut out);
        if let Loss::Mle(fam) = &self.prob.loss {
            let nat = fam.natural_interval();
            add_rows(nat.lo, nat.hi, &mut out);
        }
        if let Some(r) = self.prob.domain.l1inf_cap {
            for mask in 0..(1usize << k) {
                let a = DVector::from_fn(k, |j, _| if mask >> j & 1 == 1 { -self.weights[j] } else { self.weights[j] });
                out.push(Linear { a, b: r });
            }
        }
        out
    }

    /// Log-barrier refinement from a strictly feasible point.
    fn barrier(&self, v0: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
        let cons = self.constraints();
        if cons.is_empty() {
            return None;
        }
        let slack = |v: &DVector<f64>| -> Option<Vec<f64>> {
            let s: Vec<f64> = cons.iter().map(|c| c.b - c.a.dot(v)).collect();
            s.iter().all(|x| *x > 0.0).then_some(s)
        };
        // A blocked descent usually stops exactly on a face; pull it into the
        // interior toward a feasible anchor first.
        let anchors: Vec<DVector<f64>> = std::iter::once(DVector::zeros(self.k())).chain(self.start()).collect();
        let mut v = [0.0, 1e-8, 1e-6, 1e-4, 1e-2, 0.1, 0.5]
            .iter()
            .flat_map(|&lam| anchors.iter().map(move |a| v0 * (1.0 - lam) + a * lam))
            .find(|w| slack(w).is_some() && self.feasible(w, &self.eta(w)))?;
        let m = cons.len() as f64;
        let f0 = self.value(&self.eta(&v))?;
        let mut t = m / f0.abs().max(1.0);
        let phi = |v: &DVector<f64>, t: f64| -> Option<f64> {
            let s = slack(v)?;
            let eta = self.eta(v);
            if !self.feasible(v, &eta) {
                return None;
            }
            Some(t * self.value(&eta)? - s.iter().map(|x| x.ln()).sum::<f64>())
        };
        for _ in 0..40 {
            for _ in 0..100 {
                let eta = self.eta(&v);
                let s = slack(&v)?;
                let (g, h) = self.derivatives(&eta);
                let mut gb = g * t;
                let mut hb = h * t;
                for (c, sc) in cons.iter().zip(&s) {
                    gb += &c.a / *sc;
                    hb += (&c.a * c.a.transpose()) / (sc * sc);
                }
                let step = -Self::solve_spd(&hb, &gb);
                let dec = -gb.dot(&step);
                if dec <= 1e-14 * t.max(1.0) || !(dec.is_finite()) {
                    break;
                }
                let cur = phi(&v, t)?;
                let mut a = 1.0;
                let mut moved = false;
                while a * step.amax() > 1e-16 * (1.0 + v.amax()) {
                    let w = &v + &step * a;
                    if let Some(pw) = phi(&w, t) {
                        if pw <= cur - ARMIJO * a * dec {
                            v = w;
                            moved = true;
                            break;
                        }
                    }
                    a *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            if m / t <= 1e-12 * f0.abs().max(1.0) {
                break;
            }
            t *= 10.0;
        }
        let f = self.value(&self.eta(&v))?;
        Some((v, f))
    }

    fn on_boundary(&self, v: &DVector<f64>) -> bool {
        let cons = self.constraints();
        cons.iter().any(|c| {
            let scale = c.b.abs().max(1.0);
            c.b - c.a.dot(v) <= BOUNDARY_SLACK * scale
        })
    }

    fn solve(&self) -> InnerSolution {
        let infeasible = InnerSolution {
            u: SparseParam::zeros(self.prob.x.p()),
            value: f64::INFINITY,
            feasible: false,
            boundary: false,
        };
        if self.k() == 0 {
            let zero = SparseParam::zeros(self.prob.x.p());
            let ok = in_domain(&zero, &self.prob.x, &self.prob.domain);
            return match (ok, self.prob.loss(&zero)) {
                (true, Some(v)) => InnerSolution { u: zero, value: v, feasible: true, boundary: false },
                _ => infeasible,
            };
        }
        let mut starts = Vec::new();
        if let Some(s) = self.start() {
            starts.push(s);
        }
        if let Loss::Lse(f) = &self.prob.loss {
            if let Some(s) = self.ridge_start(f) {
                starts.push(s);
            }
        }
        let mut best: Option<(DVector<f64>, f64)> = None;
        for s in starts {
            let (mut v, mut f, blocked) = self.descend(s);
            if !f.is_finite() {
                continue;
            }
            if blocked && self.prob.controls.barrier {
                if let Some((vb, fb)) = self.barrier(&v) {
                    if fb < f {
                        let (vp, fp, _) = self.descend(vb.clone());
                        (v, f) = if fp < fb { (vp, fp) } else { (vb, fb) };
                    }
                }
            }
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((v, f));
            }
        }
        match best {
            Some((v, f)) => {
                let boundary = self.on_boundary(&v);
                InnerSolution { u: self.to_param(&v), value: f, feasible: true, boundary }
            }
            None => infeasible,
        }
    }
}

/// Inner optimum of the loss over parameters supported on `support`.
pub fn inner_solve(support: &[usize], problem: &FitProblem) -> InnerSolution {
    Restricted::new(problem, support).solve()
}

fn record(support: &[usize], sol: &InnerSolution, c_r: f64) -> SupportRecord {
    SupportRecord {
        support: support.to_vec(),
        objective: sol.feasible.then(|| sol.value + penalty(c_r, sol.u.support_size())),
        feasible: sol.feasible,
        boundary: sol.boundary,
    }
}

/// Index of the canonical minimizer among `(objective, support)` candidates
/// listed by size then lexicographically; also reports whether a tie was broken.
fn select(records: &[SupportRecord], sols: &[InnerSolution]) -> Option<(usize, bool)> {
    let best = records.iter().filter_map(|r| r.objective).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let mut tied: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.objective.is_some_and(|o| o <= best + TIE_TOLERANCE))
        .map(|(i, _)| i)
        .collect();
    tied.sort_by(|&a, &b| {
        let (ua, ub) = (sols[a].u.support(), sols[b].u.support());
        ua.len().cmp(&ub.len()).then_with(|| ua.cmp(&ub))
    });
    let distinct = tied.windows(2).any(|w| sols[w[0]].u.support() != sols[w[1]].u.support());
    Some((tied[0], distinct))
}

pub fn fit(problem: &FitProblem) -> Result<FitResult> {
    match problem.mode {
        SearchMode::Exhaustive => fit_exhaustive(problem),
        SearchMode::Greedy => fit_greedy(problem),
    }
}

fn fit_exhaustive(problem: &FitProblem) -> Result<FitResult> {
    let p = problem.x.p();
    let h = problem.h_max();
    let count: f64 = (0..=h).map(|k| binomial(p, k)).sum();
    if count > SUBSET_BUDGET {
        return Err(Error::EnumerationBudget { count, budget: SUBSET_BUDGET });
    }
    let supports: Vec<Vec<usize>> = (0..=h).flat_map(|k| subsets(p, k)).collect();
    let sols: Vec<InnerSolution> = supports.par_iter().map(|s| inner_solve(s, problem)).collect();
    finish(problem, &supports, sols)
}

fn finish(problem: &FitProblem, supports: &[Vec<usize>], sols: Vec<InnerSolution>) -> Result<FitResult> {
    let log: Vec<SupportRecord> = supports.iter().zip(&sols).map(|(s, sol)| record(s, sol, problem.c_r)).collect();
    let (i, tie) = select(&log, &sols).ok_or(Error::EmptyDomain)?;
    let best = &sols[i];
    Ok(FitResult {
        beta_hat: best.u.clone(),
        objective: log[i].objective.expect("selected support is feasible"),
        support: best.u.support(),
        log,
        tie_break_applied: tie,
        boundary: best.boundary,
    })
}

fn fit_greedy(problem: &FitProblem) -> Result<FitResult> {
    let p = problem.x.p();
    let h = problem.h_max();
    let mut supports = vec![Vec::new()];
    let mut sols = vec![inner_solve(&[], problem)];
    let mut current: Vec<usize> = Vec::new();
    let mut current_obj = record(&[], &sols[0], problem.c_r).objective.unwrap_or(f64::INFINITY);
    while current.len() < h {
        let cands: Vec<Vec<usize>> = (0..p)
            .filter(|j| !current.contains(j))
            .map(|j| {
                let mut s = current.clone();
                s.push(j);
                s.sort_unstable();
                s
            })
            .collect();
        let step: Vec<InnerSolution> = cands.par_iter().map(|s| inner_solve(s, problem)).collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, sol) in step.iter().enumerate() {
            if let Some(o) = record(&cands[i], sol, problem.c_r).objective {
                if best.is_none_or(|(_, bo)| o < bo - TIE_TOLERANCE) {
                    best = Some((i, o));
                }
            }
        }
        let improved = best.filter(|(_, o)| *o < current_obj - TIE_TOLERANCE);
        supports.extend(cands.iter().cloned());
        sols.extend(step);
        match improved {
            Some((i, o)) => {
                current = supports[supports.len() - cands.len() + i].clone();
                current_obj = o;
            }
            None => break,
        }
    }
    finish(problem, &supports, sols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Interval;

    fn problem(rows: &[Vec<f64>], y: Vec<f64>, loss: Loss, iv: Interval, h: f64, c_r: f64) -> FitProblem {
        FitProblem::new(DesignMatrix::from_rows(rows).unwrap(), y, loss, DomainSpec::new(iv, h), c_r).unwrap()
    }

    #[test]
    fn gaussian_inner_matches_normal_equations() {
        let rows = vec![vec![1.0, 2.0, 0.5], vec![0.3, -1.0, 1.0], vec![2.0, 0.1, -0.7], vec![-1.0, 1.0, 1.0]];
        let y = vec![1.0, -0.5, 2.0, 0.3];
        let prob = problem(&rows, y.clone(), Loss::Mle(ExpFamily::gaussian(1.0)), Interval::real_line(), 3.0, 0.0);
        let sol = inner_solve(&[0, 2], &prob);
        let xs = DMatrix::from_fn(4, 2, |i, a| rows[i][[0, 2][a]]);
        let v = (xs.transpose() * &xs).cholesky().unwrap().solve(&(xs.transpose() * DVector::from_vec(y)));
        assert!((sol.u.get(0) - v[0]).abs() < 1e-10 && (sol.u.get(2) - v[1]).abs() < 1e-10);
        assert!(!sol.boundary);
    }

    #[test]
    fn separated_bernoulli_hits_the_boundary() {
        // monotone likelihood in t: the optimum is t = 2 on I = [-2, 2]
        let prob = problem(
            &[vec![1.0], vec![1.0]],
            vec![1.0, 1.0],
            Loss::Mle(ExpFamily::Bernoulli),
            Interval::symmetric(2.0),
            1.0,
            0.0,
        );
        let sol = inner_solve(&[0], &prob);
        assert!(sol.feasible && sol.boundary);
        assert!((sol.u.get(0) - 2.0).abs() < 1e-8, "{}", sol.u.get(0));
        let open = problem(
            &[vec![1.0], vec![1.0]],
            vec![1.0, 1.0],
            Loss::Mle(ExpFamily::Bernoulli),
            Interval::open(-2.0, 2.0),
            1.0,
            0.0,
        );
        let sol = inner_solve(&[0], &open);
        assert!(sol.u.get(0) < 2.0 && sol.u.get(0) > 2.0 - 1e-8);
    }

    #[test]
    fn orthogonal_design_hard_thresholds() {
        let rows = vec![vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 3.0], vec![0.0, 0.0, 0.0]];
        let y = vec![1.0, 2.0, 0.5, 0.7];
        let lin = AnalyticFn::Linear { a: 1.0, b: 0.0 };
        for c_r in [0.1, 0.3, 1.0, 3.0, 5.0] {
            let prob = problem(&rows, y.clone(), Loss::Lse(lin.clone()), Interval::real_line(), 3.0, c_r);
            let res = fit(&prob).unwrap();
            let expect: Vec<usize> = (0..3)
                .filter(|&j| {
                    let vty: f64 = (0..4).map(|i| rows[i][j] * y[i]).sum();
                    let nn: f64 = (0..4).map(|i| rows[i][j] * rows[i][j]).sum();
                    vty * vty / nn > c_r
                })
                .collect();
            assert_eq!(res.support, expect, "c_r = {c_r}");
        }
    }

    #[test]
    fn infinite_penalty_returns_zero() {
        let rows = vec![vec![1.0, 0.5], vec![0.2, 1.0], vec![1.0, 1.0]];
        let prob = problem(
            &rows,
            vec![1.0, 0.0, 1.0],
            Loss::Mle(ExpFamily::Bernoulli),
            Interval::symmetric(3.0),
            2.0,
            f64::INFINITY,
        );
        let res = fit(&prob).unwrap();
        assert!(res.beta_hat.is_zero());
    }

    #[test]
    fn empty_domain_and_budget_errors() {
        let rows = vec![vec![1.0], vec![-1.0]];
        let prob =
            problem(&rows, vec![1.0, 0.0], Loss::Mle(ExpFamily::Bernoulli), Interval::closed(1.0, 2.0), 1.0, 0.0);
        assert_eq!(fit(&prob).unwrap_err(), Error::EmptyDomain);
        let wide: Vec<Vec<f64>> =
            (0..3).map(|i| (0..40).map(|j| ((i * 40 + j) % 7) as f64 - 3.0 + 0.5).collect()).collect();
        let prob = problem(&wide, vec![0.0; 3], Loss::Mle(ExpFamily::Bernoulli), Interval::real_line(), 8.0, 0.0);
        assert!(matches!(fit(&prob).unwrap_err(), Error::EnumerationBudget { .. }));
    }

    #[test]
    fn nonzero_interval_start() {
        // 0 is not in I = [0.5, 1]; the start comes from the least-squares point
        let prob = problem(
            &[vec![1.0], vec![1.5]],
            vec![1.0, 1.0],
            Loss::Mle(ExpFamily::Bernoulli),
            Interval::closed(0.5, 1.0),
            1.0,
            0.0,
        );
        let res = fit(&prob).unwrap();
        assert_eq!(res.support, vec![0]);
        assert!(in_domain(&res.beta_hat, &prob.x, &prob.domain));
    }
}
