//! Finite `b/2`-covering grids for segment hulls of search domains, with
//! cardinality certificates.
//!
//! Spheres are taken in weighted coordinates `y_j = ||V_j||_inf u_j`, where
//! `||.||_{1,inf}` becomes the plain L1 norm.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticFn, Region};
use crate::design::{binomial, subsets, ColumnNorm, DesignMatrix, SparseParam};
use crate::domains::{in_domain, l1inf_radius, DomainSpec, PointSet};
use crate::error::{Error, Result};

/// Largest number of supports the builder will enumerate.
pub const SUPPORT_BUDGET: f64 = 1e6;
/// Largest number of candidate spheres the builder will generate.
pub const SPHERE_BUDGET: f64 = 2e6;
const POCS_SWEEPS: usize = 400;
const SHRINK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BRule {
    /// `b(u) = r(u) / 2`.
    HalfRadius,
    /// `b(u) = c`.
    Constant(f64),
}

/// Which cardinality argument the grid follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridCase {
    /// `f` analytic on a neighbourhood of the whole real line; spheres of radius `dbar_b / 2`.
    Strip,
    /// Spheres of radius `d_b / 4`, recentred onto feasible points.
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Singleton,
    PerSupportSphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub support: Vec<usize>,
    pub u: SparseParam,
    pub b: f64,
    #[serde(with = "crate::domains::inf_as_none")]
    pub r: f64,
    /// Whether the point was moved onto the domain.
    #[serde(default)]
    pub recentred: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringGrid {
    pub points: Vec<GridPoint>,
    pub construction: Construction,
    pub case: Option<GridCase>,
    pub h: usize,
    /// Radius `R` of the `||.||_{1,inf}` ball known to contain the domain.
    pub domain_radius: f64,
    /// Sphere radius used by the lattice.
    pub sphere_radius: f64,
    /// Lower bound on `b` used to size the lattice.
    pub b_floor: f64,
    pub cardinality_bound: f64,
    /// Whether `|points| <= cardinality_bound`.
    pub within_bound: bool,
}

/// Summary `(b(G), r(G), A_k(G))` of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridStatistics {
    pub size: usize,
    pub b_inf: f64,
    #[serde(with = "crate::domains::inf_as_none")]
    pub r_inf: f64,
    /// `A_k(G)` for `k = 0..=depth`.
    pub a_sup: Vec<f64>,
    /// Polynomial degree of `f`, when finite.
    pub degree: Option<usize>,
}

impl CoveringGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point_set(&self) -> PointSet {
        PointSet::new(self.points.iter().map(|g| g.u.clone()).collect())
    }

    /// Index of a grid point whose sphere contains `w`, if any.
    pub fn covering_point(&self, x: &DesignMatrix, w: &SparseParam) -> Option<usize> {
        self.points.iter().position(|g| x.weighted_l1_norm(&w.sub(&g.u), ColumnNorm::Inf) <= 0.5 * g.b)
    }
}

fn b_value(rule: BRule, r: f64) -> Result<f64> {
    match rule {
        BRule::HalfRadius => {
            if r.is_infinite() {
                Err(Error::Grid("half_radius needs a finite radius; use a constant b".into()))
            } else {
                Ok(0.5 * r)
            }
        }
        BRule::Constant(c) => {
            if !(c > 0.0 && c < r) {
                Err(Error::DomainExceedsRadius { d: c, r })
            } else {
                Ok(c)
            }
        }
    }
}

fn point_radius(f: &AnalyticFn, x: &DesignMatrix, u: &SparseParam) -> Result<f64> {
    x.apply(u).iter().try_fold(f64::INFINITY, |acc, &t| Ok(acc.min(f.radius_at(t)?)))
}

/// The one-point grid `{w}` for a domain inside `B(w, d/2)`.
pub fn singleton_grid(
    w: &SparseParam,
    spec: &DomainSpec,
    x: &DesignMatrix,
    f: &AnalyticFn,
    d: f64,
    nu: f64,
) -> Result<CoveringGrid> {
    let radius = l1inf_radius(x, spec, nu)?;
    let reach = x.weighted_l1_norm(w, ColumnNorm::Inf) + radius;
    if reach > 0.5 * d {
        return Err(Error::Grid(format!("domain reaches {reach} from w, beyond d/2 = {}", 0.5 * d)));
    }
    let r = point_radius(f, x, w)?;
    if d >= r {
        return Err(Error::DomainExceedsRadius { d, r });
    }
    let b = if r.is_finite() { 0.5 * (d + r) } else { 2.0 * d };
    Ok(CoveringGrid {
        points: vec![GridPoint { support: w.support(), u: w.clone(), b, r, recentred: false }],
        construction: Construction::Singleton,
        case: None,
        h: w.support_size(),
        domain_radius: radius,
        sphere_radius: 0.5 * d,
        b_floor: b,
        cardinality_bound: 1.0,
        within_bound: true,
    })
}

/// Lattice of L1-sphere centres of radius `d` covering the L1 ball of radius `rad` in `R^h`.
fn sphere_centres(h: usize, rad: f64, d: f64) -> Vec<Vec<f64>> {
    match h {
        0 => vec![vec![]],
        1 => {
            let m = ((rad / d).ceil() as usize).max(1);
            (0..m).map(|k| vec![-rad + d * (2 * k + 1) as f64]).collect()
        }
        2 => {
            // (a, b) = (y1 + y2, y1 - y2) turns the L1 ball into a square and
            // L1 spheres into squares of half-side d
            let m = ((rad / d).ceil() as usize).max(1);
            let axis: Vec<f64> = (0..m).map(|k| -rad + d * (2 * k + 1) as f64).collect();
            let mut out = Vec::with_capacity(m * m);
            for &a in &axis {
                for &b in &axis {
                    out.push(vec![0.5 * (a + b), 0.5 * (a - b)]);
                }
            }
            out
        }
        _ => {
            // cubes of side 2d/h sit inside L1 spheres of radius d about their centres
            let side = 2.0 * d / h as f64;
            let m = ((2.0 * rad / side).ceil() as usize).max(1);
            let axis: Vec<f64> = (0..m).map(|k| -rad + side * (k as f64 + 0.5)).collect();
            let mut out = Vec::new();
            let mut idx = vec![0usize; h];
            loop {
                let c: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
                // nearest point of the cell to the origin
                let near: f64 = c.iter().map(|v| (v.abs() - 0.5 * side).max(0.0)).sum();
                if near <= rad {
                    out.push(c);
                }
                let mut j = 0;
                while j < h {
                    idx[j] += 1;
                    if idx[j] < m {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == h {
                    return out;
                }
            }
        }
    }
}

fn lattice_size(h: usize, rad: f64, d: f64) -> f64 {
    match h {
        0 => 1.0,
        1 => (rad / d).ceil().max(1.0),
        2 => (rad / d).ceil().max(1.0).powi(2),
        _ => (2.0 * rad * h as f64 / (2.0 * d)).ceil().max(1.0).powi(h as i32),
    }
}

/// Euclidean projection onto `{y : ||y - c||_1 <= r}`.
fn project_l1(y: &mut [f64], c: &[f64], r: f64) {
    let v: Vec<f64> = y.iter().zip(c).map(|(a, b)| a - b).collect();
    let norm: f64 = v.iter().map(|a| a.abs()).sum();
    if norm <= r {
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|a| a.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let (mut cum, mut tau) = (0.0, 0.0);
    for (i, m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - r) / (i + 1) as f64;
        if t < *m {
            tau = t;
        }
    }
    for ((yi, vi), ci) in y.iter_mut().zip(&v).zip(c) {
        *yi = ci + vi.signum() * (vi.abs() - tau).max(0.0);
    }
}

struct SupportGeometry<'a> {
    x: &'a DesignMatrix,
    spec: &'a DomainSpec,
    support: &'a [usize],
    weights: Vec<f64>,
    /// Rows in weighted coordinates, `X_ij / w_j` for `j` in the support.
    rows: Vec<Vec<f64>>,
    radius: f64,
}

impl<'a> SupportGeometry<'a> {
    fn new(x: &'a DesignMatrix, spec: &'a DomainSpec, support: &'a [usize], radius: f64) -> Self {
        let weights: Vec<f64> = support.iter().map(|&j| x.column_norm(j, ColumnNorm::Inf)).collect();
        let rows = (0..x.n()).map(|i| support.iter().zip(&weights).map(|(&j, w)| x.get(i, j) / w).collect()).collect();
        Self { x, spec, support, weights, rows, radius }
    }

    fn to_param(&self, y: &[f64]) -> SparseParam {
        let mut u = SparseParam::zeros(self.x.p()).into_values();
        for ((&j, w), v) in self.support.iter().zip(&self.weights).zip(y) {
            u[j] = v / w;
        }
        SparseParam::new(u)
    }

    /// True when no domain point lies within L1 distance `d` of `c`.
    fn provably_empty(&self, c: &[f64], d: f64) -> bool {
        let norm: f64 = c.iter().map(|v| v.abs()).sum();
        if norm > self.radius + d {
            return true;
        }
        let iv = &self.spec.interval;
        self.rows.iter().any(|row| {
            let eta: f64 = row.iter().zip(c).map(|(a, b)| a * b).sum();
            let spread = d * row.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
            eta + spread < iv.lo || eta - spread > iv.hi
        })
    }

    fn feasible(&self, y: &[f64], c: &[f64], d: f64) -> Option<SparseParam> {
        let dist: f64 = y.iter().zip(c).map(|(a, b)| (a - b).abs()).sum();
        if dist > d {
            return None;
        }
        let u = self.to_param(y);
        if self.x.weighted_l1_norm(&u, ColumnNorm::Inf) > self.radius {
            return None;
        }
        in_domain(&u, self.x, self.spec).then_some(u)
    }

    /// A domain point within distance `d` of `c`: the centre, then bisection
    /// toward the origin, then alternating projections.
    fn recentre(&self, c: &[f64], d: f64) -> Option<SparseParam> {
        if let Some(u) = self.feasible(c, c, d) {
            return Some(u);
        }
        let norm: f64 = c.iter().map(|v| v.abs()).sum();
        if norm > 0.0 {
            let t_min = (1.0 - d / norm).max(0.0);
            for k in 1..=20 {
                let t = 1.0 - (1.0 - t_min) * k as f64 / 20.0;
                let y: Vec<f64> = c.iter().map(|v| v * t).collect();
                if let Some(u) = self.feasible(&y, c, d) {
                    return Some(u);
                }
            }
        }
        self.pocs(c, d)
    }

    fn pocs(&self, c: &[f64], d: f64) -> Option<SparseParam> {
        let iv = &self.spec.interval;
        let lo = if iv.lo.is_finite() { iv.lo + SHRINK * (1.0 + iv.lo.abs()) } else { f64::NEG_INFINITY };
        let hi = if iv.hi.is_finite() { iv.hi - SHRINK * (1.0 + iv.hi.abs()) } else { f64::INFINITY };
        if lo > hi {
            return None;
        }
        let origin = vec![0.0; c.len()];
        let mut y = c.to_vec();
        for _ in 0..POCS_SWEEPS {
            project_l1(&mut y, c, d * (1.0 - SHRINK));
            project_l1(&mut y, &origin, self.radius * (1.0 - SHRINK));
            for row in &self.rows {
                let eta: f64 = row.iter().zip(&y).map(|(a, b)| a * b).sum();
                let nn: f64 = row.iter().map(|a| a * a).sum();
                if nn == 0.0 {
                    continue;
                }
                let target = if eta < lo {
                    lo
                } else if eta > hi {
                    hi
                } else {
                    continue;
                };
                let s = (target - eta) / nn;
                for (yi, a) in y.iter_mut().zip(row) {
                    *yi += s * a;
                }
            }
            if let Some(u) = self.feasible(&y, c, d) {
                return Some(u);
            }
        }
        None
    }
}

/// Covers the segment hull of a compact domain inside `P(I, h/2)`.
pub fn build_grid(
    spec: &DomainSpec,
    x: &DesignMatrix,
    f: &AnalyticFn,
    rule: BRule,
    h: usize,
    case: GridCase,
    nu: f64,
) -> Result<CoveringGrid> {
    let p = x.p();
    let h_eff = h.min(p);
    if 2 * spec.h_max(p) > h && h < p {
        return Err(Error::Grid(format!("domain supports up to {} exceed h/2 = {}", spec.h_max(p), h as f64 / 2.0)));
    }
    let radius = l1inf_radius(x, spec, nu)?;
    if !radius.is_finite() {
        return Err(Error::NonCompact("unbounded domain radius".into()));
    }
    let n_supports = binomial(p, h_eff);
    if n_supports > SUPPORT_BUDGET {
        return Err(Error::EnumerationBudget { count: n_supports, budget: SUPPORT_BUDGET });
    }
    let (b_floor, sphere) = match case {
        GridCase::Strip => {
            let rho = f.region_radius(&Region::Strip)?;
            let db = b_value(rule, rho)?;
            (db, 0.5 * db)
        }
        GridCase::Interval => {
            spec.interval.require_proper()?;
            let rho = f.region_radius(&Region::Interval(spec.interval))?;
            let db = b_value(rule, rho)?;
            (db, 0.25 * db)
        }
    };
    let per_support = lattice_size(h_eff, radius, sphere);
    if per_support * n_supports > SPHERE_BUDGET {
        return Err(Error::EnumerationBudget { count: per_support * n_supports, budget: SPHERE_BUDGET });
    }
    let centres = sphere_centres(h_eff, radius, sphere);
    let supports = subsets(p, h_eff);
    let per: Vec<Result<Vec<GridPoint>>> = supports
        .par_iter()
        .map(|s| {
            let geo = SupportGeometry::new(x, spec, s, radius);
            let mut pts = Vec::new();
            for c in &centres {
                // a recentred point must cover twice the lattice radius
                let (u, need, recentred) = match case {
                    GridCase::Strip => (geo.to_param(c), sphere, false),
                    GridCase::Interval => {
                        if geo.provably_empty(c, sphere) {
                            continue;
                        }
                        match geo.recentre(c, sphere) {
                            Some(u) => (u, 2.0 * sphere, true),
                            None => (geo.to_param(c), sphere, false),
                        }
                    }
                };
                let r = point_radius(f, x, &u)?;
                let b = b_value(rule, r)?;
                if 0.5 * b < need {
                    return Err(Error::Grid(format!(
                        "no feasible centre near {c:?} on support {s:?} and b/2 = {} < {need}",
                        0.5 * b
                    )));
                }
                pts.push(GridPoint { support: s.clone(), u, b, r, recentred });
            }
            pts.sort_by(|a, b| {
                a.u.values()
                    .iter()
                    .zip(b.u.values())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            Ok(pts)
        })
        .collect();
    let mut points: Vec<GridPoint> = Vec::new();
    let mut seen = PointSet::default();
    let mut nonempty = 0usize;
    for group in per {
        let group = group?;
        if !group.is_empty() {
            nonempty += 1;
        }
        for g in group {
            if seen.push(g.u.clone()) {
                points.push(g);
            }
        }
    }
    let base = match case {
        GridCase::Strip => 2.0 * radius / b_floor + 1.0,
        GridCase::Interval => 4.0 * radius / b_floor + 1.0,
    };
    let per_s = base.powi(h_eff as i32);
    let counted = match case {
        GridCase::Strip => n_supports,
        GridCase::Interval => nonempty as f64,
    };
    let cardinality_bound = (counted * per_s).min(n_supports * per_s);
    let within_bound = points.len() as f64 <= cardinality_bound;
    Ok(CoveringGrid {
        points,
        construction: Construction::PerSupportSphere,
        case: Some(case),
        h: h_eff,
        domain_radius: radius,
        sphere_radius: sphere,
        b_floor,
        cardinality_bound,
        within_bound,
    })
}

/// `b(G)`, `r(G)` and `A_k(G)` over the grid points.
pub fn grid_statistics(g: &CoveringGrid, f: &AnalyticFn, x: &DesignMatrix, depth: usize) -> Result<GridStatistics> {
    if g.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    let mut b_inf = f64::INFINITY;
    let mut r_inf = f64::INFINITY;
    let mut a_sup = vec![0.0; depth + 1];
    for pt in &g.points {
        let (r, a) = f.multi_radius(x, &pt.u, depth)?;
        r_inf = r_inf.min(r);
        b_inf = b_inf.min(pt.b);
        for (acc, v) in a_sup.iter_mut().zip(a) {
            *acc = f64::max(*acc, v);
        }
    }
    if !(r_inf > b_inf) {
        return Err(Error::DomainExceedsRadius { d: b_inf, r: r_inf });
    }
    Ok(GridStatistics { size: g.len(), b_inf, r_inf, a_sup, degree: f.degree() })
}

/// Random members of the domain: random supports of size at most
/// `h_max`, directions uniform on the weighted L1 sphere, radii scaled down
/// until every row lies in `I`.
pub fn sample_domain<R: Rng + ?Sized>(
    x: &DesignMatrix,
    spec: &DomainSpec,
    radius: f64,
    count: usize,
    rng: &mut R,
) -> Result<PointSet> {
    let p = x.p();
    let h_max = spec.h_max(p);
    if !in_domain(&SparseParam::zeros(p), x, spec) {
        return Err(Error::EmptyDomain);
    }
    let mut out = PointSet::default();
    let mut attempts = 0usize;
    while out.len() < count && attempts < 100 * count + 100 {
        attempts += 1;
        let k = rng.random_range(0..=h_max);
        let s = sample(rng, p, k).into_vec();
        let mut y: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().ln()).collect();
        let tot: f64 = y.iter().sum();
        let scale = radius * rng.random::<f64>();
        for v in y.iter_mut() {
            *v *= scale / tot.max(f64::MIN_POSITIVE) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let mut vals = vec![0.0; p];
        for (&j, v) in s.iter().zip(&y) {
            vals[j] = v / x.column_norm(j, ColumnNorm::Inf);
        }
        let mut u = SparseParam::new(vals);
        for _ in 0..60 {
            if in_domain(&u, x, spec) {
                break;
            }
            u = u.scale(0.8);
        }
        if in_domain(&u, x, spec) {
            out.push(u);
        }
    }
    Ok(out)
}

/// Audit record for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridExportEntry {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
    pub b: f64,
    #[serde(with = "crate::domains::inf_as_none")]
    pub r: f64,
}

pub fn export(g: &CoveringGrid) -> Vec<GridExportEntry> {
    g.points
        .iter()
        .map(|pt| GridExportEntry {
            support: pt.support.clone(),
            values: pt.support.iter().map(|&j| pt.u.get(j)).collect(),
            b: pt.b,
            r: pt.r,
        })
        .collect()
}
