//! Search domains `D(I)` and `P(I, h)`, sampled segment hulls and enclosing radii.

use serde::{Deserialize, Serialize};

use crate::design::{ColumnNorm, DesignMatrix, SparseParam};
use crate::error::{Error, Result};

/// A real interval with optional infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "IntervalRepr", into = "IntervalRepr")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: Option<f64>,
    hi: Option<f64>,
    #[serde(default = "yes")]
    lo_closed: bool,
    #[serde(default = "yes")]
    hi_closed: bool,
}

fn yes() -> bool {
    true
}

impl From<IntervalRepr> for Interval {
    fn from(r: IntervalRepr) -> Self {
        let lo = r.lo.unwrap_or(f64::NEG_INFINITY);
        let hi = r.hi.unwrap_or(f64::INFINITY);
        Interval { lo, hi, lo_closed: r.lo_closed && lo.is_finite(), hi_closed: r.hi_closed && hi.is_finite() }
    }
}

impl From<Interval> for IntervalRepr {
    fn from(i: Interval) -> Self {
        IntervalRepr {
            lo: i.lo.is_finite().then_some(i.lo),
            hi: i.hi.is_finite().then_some(i.hi),
            lo_closed: i.lo_closed,
            hi_closed: i.hi_closed,
        }
    }
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn point(x: f64) -> Self {
        Self::closed(x, x)
    }

    pub fn real_line() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `[-r, r]`.
    pub fn symmetric(r: f64) -> Self {
        Self::closed(-r, r)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn is_compact(&self) -> bool {
        self.is_bounded() && self.lo_closed && self.hi_closed
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// `sup_{x in I} |x|`.
    pub fn sup_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// A reference interior point: the midpoint when bounded, else 0 clamped into `I`.
    pub fn center(&self) -> f64 {
        if self.is_bounded() {
            0.5 * (self.lo + self.hi)
        } else if self.contains(0.0) {
            0.0
        } else if self.lo.is_finite() {
            self.lo + 1.0
        } else {
            self.hi - 1.0
        }
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        let lo_ok = self.lo > other.lo || (self.lo == other.lo && (other.lo_closed || !self.lo_closed));
        let hi_ok = self.hi < other.hi || (self.hi == other.hi && (other.hi_closed || !self.hi_closed));
        lo_ok && hi_ok
    }

    /// Fails unless the interval has positive finite length.
    pub fn require_proper(&self) -> Result<()> {
        if !self.is_bounded() || !(self.hi > self.lo) {
            return Err(Error::DegenerateInterval(format!("[{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Membership rule for `P(I, h)` with an optional `||u||_{1,inf}` cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub interval: Interval,
    /// The support budget `h`; `+inf` when unconstrained.
    #[serde(with = "inf_as_none")]
    pub max_support: f64,
    #[serde(default)]
    pub l1inf_cap: Option<f64>,
}

pub(crate) mod inf_as_none {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() { Some(*x) } else { None }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl DomainSpec {
    pub fn new(interval: Interval, max_support: f64) -> Self {
        Self { interval, max_support, l1inf_cap: None }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.l1inf_cap = Some(cap);
        self
    }

    /// `h = n(nu) / 2` as used for the estimator domain.
    pub fn from_capacity(x: &DesignMatrix, interval: Interval, nu: f64) -> Result<Self> {
        Ok(Self::new(interval, x.capacity(nu)? / 2.0))
    }

    /// Largest admissible support size, `floor(max_support)` clipped at `p`.
    pub fn h_max(&self, p: usize) -> usize {
        if self.max_support.is_finite() {
            (self.max_support.max(0.0).floor() as usize).min(p)
        } else {
            p
        }
    }

    pub fn row_feasible(&self, eta: f64) -> bool {
        self.interval.contains(eta)
    }

    pub fn cap_feasible(&self, x: &DesignMatrix, u: &SparseParam) -> bool {
        match self.l1inf_cap {
            Some(r) => x.weighted_l1_norm(u, ColumnNorm::Inf) <= r,
            None => true,
        }
    }
}

/// Conjunction of the row, support-size and cap clauses, with exact comparisons.
pub fn in_domain(u: &SparseParam, x: &DesignMatrix, spec: &DomainSpec) -> bool {
    if u.support_size() as f64 > spec.max_support {
        return false;
    }
    if !spec.cap_feasible(x, u) {
        return false;
    }
    x.apply(u).iter().all(|&eta| spec.interval.contains(eta))
}

/// A finite set of parameter vectors without exact duplicates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointSet {
    points: Vec<SparseParam>,
}

impl PointSet {
    pub fn new(points: Vec<SparseParam>) -> Self {
        let mut out = PointSet::default();
        for p in points {
            out.push(p);
        }
        out
    }

    /// Inserts unless an identical point is present; returns whether it was added.
    pub fn push(&mut self, u: SparseParam) -> bool {
        if self.points.iter().any(|v| v.bit_eq(&u)) {
            return false;
        }
        self.points.push(u);
        true
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SparseParam] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SparseParam> {
        self.points.iter()
    }

    pub fn max_support(&self) -> usize {
        self.points.iter().map(|u| u.support_size()).max().unwrap_or(0)
    }
}

/// Points `(1 - s) u + s v` for all pairs in `E` and `s` on a uniform grid of `[0, 1]`.
pub fn segment_hull_sample(e: &PointSet, grid_per_edge: usize) -> Result<PointSet> {
    if e.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let pts = e.points();
    let mut out = PointSet::new(pts.to_vec());
    if grid_per_edge < 2 {
        return Ok(out);
    }
    let steps = (grid_per_edge - 1) as f64;
    for a in 0..pts.len() {
        for b in (a + 1)..pts.len() {
            for k in 1..grid_per_edge - 1 {
                out.push(pts[a].lerp(&pts[b], k as f64 / steps));
            }
        }
    }
    Ok(out)
}

/// Restricted 1-center radius under `||.||_{1,inf}`: an upper bound on the
/// true enclosing radius, at most twice it.
pub fn enclosing_radius(e: &PointSet, x: &DesignMatrix) -> Result<f64> {
    if e.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let pts = e.points();
    let mut best = f64::INFINITY;
    for c in pts {
        let r = pts.iter().map(|v| x.weighted_l1_norm(&v.sub(c), ColumnNorm::Inf)).fold(0.0, f64::max);
        best = best.min(r);
    }
    Ok(best)
}

/// Upper bound on `||u||_2^2` for `u in P(I, h)` with compact `I` and `h <= n(nu)`.
pub fn compactness_bound(x: &DesignMatrix, interval: &Interval, nu: f64) -> Result<f64> {
    if !interval.is_bounded() {
        return Err(Error::NonCompact(format!("interval {interval} is unbounded")));
    }
    if !(nu > 0.0) {
        return Err(Error::OutOfRange(format!("nu = {nu} must be positive")));
    }
    let mu = x.coherence_or_zero();
    let m = interval.sup_abs();
    let vmin = x.min_column_norm(ColumnNorm::L(2));
    Ok(x.n() as f64 * m * m / (nu * (1.0 + mu) * vmin * vmin))
}

/// Upper bound on `||u||_{1,inf}` over `P(I, h)`: the explicit cap when present,
/// otherwise derived from the separability inequality for compact `I`.
pub fn l1inf_radius(x: &DesignMatrix, spec: &DomainSpec, nu: f64) -> Result<f64> {
    if let Some(r) = spec.l1inf_cap {
        return Ok(r);
    }
    if !spec.interval.is_bounded() {
        return Err(Error::NonCompact("unbounded interval and no l1inf cap".to_string()));
    }
    let capacity = x.capacity(nu)?;
    let h = spec.h_max(x.p());
    if h as f64 > capacity {
        return Err(Error::SupportExceedsCapacity { support: h, capacity });
    }
    let mu = x.coherence_or_zero();
    let m = spec.interval.sup_abs();
    // sum_j u_j^2 ||V_j||_2^2 <= ||Xu||^2 / (nu (1 + mu)) <= n M^2 / (nu (1 + mu))
    let weighted = x.n() as f64 * m * m / (nu * (1.0 + mu));
    let ratio =
        (0..x.p()).map(|j| x.column_norm(j, ColumnNorm::Inf) / x.column_norm(j, ColumnNorm::L(2))).fold(0.0, f64::max);
    Ok((h as f64).sqrt() * ratio * weighted.sqrt())
}
