#![allow(dead_code)]

use l0est::analytic::AnalyticFn;
use l0est::design::{DesignMatrix, SparseParam};
use l0est::domains::{DomainSpec, Interval};
use l0est::estimator::{FitProblem, Loss};
use l0est::expfam::ExpFamily;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pm1_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DesignMatrix {
    let rows: Vec<Vec<f64>> =
        (0..n).map(|_| (0..p).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()).collect();
    DesignMatrix::from_rows(&rows).unwrap()
}

pub fn gaussian_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DesignMatrix {
    let rows: Vec<Vec<f64>> =
        (0..n).map(|_| (0..p).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()).collect();
    DesignMatrix::from_rows(&rows).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

#[derive(Clone, Copy, Debug)]
pub enum OracleLoss {
    Bernoulli,
    /// `p01 + (p11 - p01) logistic(t)` least squares.
    Flip {
        p01: f64,
        p11: f64,
    },
}

/// A small instance on `D = {u : |spt u| <= h, X_i^T u in [lo, hi], ||u||_{1,inf} <= cap}`.
#[derive(Clone, Debug)]
pub struct OracleInstance {
    pub x: DesignMatrix,
    pub y: Vec<f64>,
    pub loss: OracleLoss,
    pub lo: f64,
    pub hi: f64,
    pub cap: f64,
    pub h: usize,
    pub c_r: f64,
    cols: Vec<Vec<f64>>,
    col_inf: Vec<f64>,
}

impl OracleInstance {
    pub fn random(seed: u64, loss: OracleLoss) -> Self {
        let mut r = rng(seed);
        let n = 15;
        let p = r.random_range(4..=6);
        let x = pm1_design(&mut r, n, p);
        let (lo, hi, cap, h) = (-2.0, 2.0, 1.5, 3);
        let k = r.random_range(1..=2);
        let mut beta = vec![0.0; p];
        for j in rand::seq::index::sample(&mut r, p, k) {
            beta[j] = r.random_range(-0.7..0.7);
        }
        let eta = x.apply(&SparseParam::new(beta));
        let y: Vec<f64> = eta
            .iter()
            .map(|&t| {
                let m = match loss {
                    OracleLoss::Bernoulli => logistic(t),
                    OracleLoss::Flip { p01, p11 } => p01 + (p11 - p01) * logistic(t),
                };
                if r.random::<f64>() < m {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let c_r = match loss {
            OracleLoss::Bernoulli => r.random_range(0.0..0.6),
            OracleLoss::Flip { .. } => r.random_range(0.0..0.2),
        };
        let cols: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| x.get(i, j)).collect()).collect();
        let col_inf = cols.iter().map(|c| c.iter().fold(0.0, |m: f64, v| m.max(v.abs()))).collect();
        Self { x, y, loss, lo, hi, cap, h, c_r, cols, col_inf }
    }

    pub fn problem(&self) -> FitProblem {
        let loss = match self.loss {
            OracleLoss::Bernoulli => Loss::Mle(ExpFamily::Bernoulli),
            OracleLoss::Flip { p01, p11 } => Loss::Lse(AnalyticFn::LogisticFlip { p01, p11 }),
        };
        let domain = DomainSpec::new(Interval::closed(self.lo, self.hi), self.h as f64).with_cap(self.cap);
        FitProblem::new(self.x.clone(), self.y.clone(), loss, domain, self.c_r).unwrap()
    }

    fn col_inf(&self, j: usize) -> f64 {
        self.col_inf[j]
    }

    /// Loss at `v` on support `s`, `None` outside the domain.
    pub fn value(&self, s: &[usize], v: &[f64]) -> Option<f64> {
        let w: f64 = s.iter().zip(v).map(|(&j, a)| a.abs() * self.col_inf[j]).sum();
        if w > self.cap {
            return None;
        }
        let mut total = 0.0;
        for i in 0..self.y.len() {
            let t: f64 = s.iter().zip(v).map(|(&j, a)| self.cols[j][i] * a).sum();
            if t < self.lo || t > self.hi {
                return None;
            }
            total += match self.loss {
                OracleLoss::Bernoulli => softplus(t) - self.y[i] * t,
                OracleLoss::Flip { p01, p11 } => (self.y[i] - p01 - (p11 - p01) * logistic(t)).powi(2),
            };
        }
        Some(total)
    }
}

fn supports(p: usize, h: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..h {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |l: &usize| l + 1);
            for j in start..p {
                let mut t: Vec<usize> = s.clone();
                t.push(j);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn stencil(k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|d| [-1.0, 0.0, 1.0].into_iter().map(move |s| [d.clone(), vec![s]].concat()))
            .collect();
    }
    out.into_iter().filter(|d| d.iter().any(|v| *v != 0.0)).collect()
}

fn polish(inst: &OracleInstance, s: &[usize], mut v: Vec<f64>, mut f: f64, step: f64) -> f64 {
    let dirs = stencil(s.len());
    let mut h = step;
    let mut moves = 0;
    while h > 1e-11 && moves < 100_000 {
        moves += 1;
        let mut best: Option<(Vec<f64>, f64)> = None;
        for d in &dirs {
            let w: Vec<f64> = v.iter().zip(d).map(|(a, b)| a + h * b).collect();
            if let Some(fw) = inst.value(s, &w) {
                if fw < best.as_ref().map_or(f, |b| b.1) {
                    best = Some((w, fw));
                }
            }
        }
        match best {
            Some((w, fw)) => {
                v = w;
                f = fw;
                h = (2.0 * h).min(step);
            }
            None => h *= 0.5,
        }
    }
    f
}

/// Brute-force minimum of the penalized objective: every support, a grid over
/// the coordinate box (step 0.01 up to two coordinates, 0.05 for three), then
/// a pattern-search polish from the best well-separated grid points.
pub fn oracle_minimum(inst: &OracleInstance) -> f64 {
    let mut best = f64::INFINITY;
    for s in supports(inst.x.p(), inst.h) {
        let k = s.len();
        let pen = if k == 0 { 0.0 } else { inst.c_r * k as f64 };
        if k == 0 {
            if let Some(v) = inst.value(&s, &[]) {
                best = best.min(v + pen);
            }
            continue;
        }
        let step = if k <= 2 { 0.01 } else { 0.05 };
        let bounds: Vec<f64> = s.iter().map(|&j| inst.cap / inst.col_inf(j)).collect();
        let counts: Vec<usize> = bounds.iter().map(|b| (2.0 * b / step).floor() as usize + 1).collect();
        let mut idx = vec![0usize; k];
        let mut v = vec![0.0; k];
        let mut cands: Vec<(usize, f64)> = Vec::new();
        let mut flat = 0usize;
        loop {
            for a in 0..k {
                v[a] = -bounds[a] + step * idx[a] as f64;
            }
            if let Some(f) = inst.value(&s, &v) {
                cands.push((flat, f));
            }
            flat += 1;
            let mut a = 0;
            loop {
                if a == k {
                    break;
                }
                idx[a] += 1;
                if idx[a] < counts[a] {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == k {
                break;
            }
        }
        if cands.is_empty() {
            continue;
        }
        let decode = |mut flat: usize| -> Vec<f64> {
            (0..k)
                .map(|a| {
                    let i = flat % counts[a];
                    flat /= counts[a];
                    -bounds[a] + step * i as f64
                })
                .collect()
        };
        cands.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut starts: Vec<(Vec<f64>, f64)> = Vec::new();
        for (c, f) in &cands {
            if starts.len() == 6 {
                break;
            }
            let pt = decode(*c);
            let far =
                starts.iter().all(|o| o.0.iter().zip(&pt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 5.0 * step);
            if far {
                starts.push((pt, *f));
            }
        }
        for (v, f) in starts {
            best = best.min(polish(inst, &s, v, f, step) + pen);
        }
    }
    best
}
