//! JSON configuration shared by the command-line tool and the harness.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticFn, DEFAULT_DEPTH};
use crate::bounds::{self, BoundsReport, UbMode, UbParams};
use crate::design::DesignMatrix;
use crate::domains::{l1inf_radius, DomainSpec, Interval};
use crate::error::{Error, Result};
use crate::estimator::{Loss, SearchMode, SolverControls};
use crate::expfam::ExpFamily;
use crate::grids::{self, BRule, CoveringGrid, GridCase};
use crate::harness::NoiseModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    /// Entries 0/1 with probability 1/2 each.
    BinaryIid,
    /// Entries +-1 with probability 1/2 each.
    Pm1Iid,
    GaussianIid,
    /// Random +-1 columns, rejecting any column whose coherence with the
    /// earlier ones exceeds `target_mu`.
    LowCoherencePm1 {
        target_mu: f64,
    },
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Gaussian { sigma2: f64 },
    Bernoulli,
}

impl FamilySpec {
    pub fn family(&self) -> ExpFamily {
        match self {
            FamilySpec::Gaussian { sigma2 } => ExpFamily::gaussian(*sigma2),
            FamilySpec::Bernoulli => ExpFamily::Bernoulli,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkSpec {
    Linear { a: f64, b: f64 },
    Logistic,
    LogisticFlip { p01: f64, p11: f64 },
    Exp,
    Polynomial { coeffs: Vec<f64> },
}

impl LinkSpec {
    pub fn function(&self) -> AnalyticFn {
        match self {
            LinkSpec::Linear { a, b } => AnalyticFn::Linear { a: *a, b: *b },
            LinkSpec::Logistic => AnalyticFn::logistic(),
            LinkSpec::LogisticFlip { p01, p11 } => AnalyticFn::LogisticFlip { p01: *p01, p11: *p11 },
            LinkSpec::Exp => AnalyticFn::Exp,
            LinkSpec::Polynomial { coeffs } => AnalyticFn::Polynomial(coeffs.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Responses from an exponential family with natural parameter `X beta`; MLE fit.
    Glm { family: FamilySpec },
    /// `y = f(X beta) + noise`; least-squares fit.
    Lse { link: LinkSpec, noise: NoiseModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TheoremSpec {
    Glm,
    OneDisc {
        theta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_cap: Option<f64>,
    },
    MultiDisc {
        rule: BRule,
        case: GridCase,
    },
    UbStrip {
        rho1: f64,
        contour_radius: f64,
    },
    UbInterval {
        rho1: f64,
        contour_radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub rule: BRule,
    pub case: GridCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailCheck {
    pub noise: NoiseModel,
    pub n: usize,
    pub trials: usize,
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlCheck {
    pub noise: NoiseModel,
    pub k_check: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlCheck>,
}

fn default_replicates() -> usize {
    200
}

fn default_q() -> f64 {
    0.1
}

fn default_nu() -> f64 {
    0.5
}

fn default_depth() -> usize {
    DEFAULT_DEPTH
}

fn default_design() -> DesignSpec {
    DesignSpec::Pm1Iid
}

/// Top-level configuration. Every subcommand reads the blocks it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(default)]
    pub spt_size: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_design")]
    pub design: DesignSpec,
    pub model: ModelSpec,
    pub interval: Interval,
    /// Largest support in the domain; defaults to half the capacity `n(nu)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_support: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1inf_cap: Option<f64>,
    pub theorem: TheoremSpec,
    /// Explicit penalty; the theorem's `c_r` is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_r: Option<f64>,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub search: SearchMode,
    #[serde(default)]
    pub controls: SolverControls,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must lie in [0, 1]")))
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Range and consistency checks that need no data.
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 0.25) {
            return Err(invalid(format!("q = {} must lie in (0, 0.25]", self.q)));
        }
        check_open_unit("nu", self.nu)?;
        if self.replicates == 0 {
            return Err(invalid("replicates must be positive"));
        }
        if self.depth == 0 {
            return Err(invalid("depth must be positive"));
        }
        if !matches!(self.design, DesignSpec::Csv { .. }) && (self.n == 0 || self.p == 0) {
            return Err(invalid("n and p must be positive for generated designs"));
        }
        if self.spt_size > self.p && self.p > 0 {
            return Err(invalid(format!("spt_size = {} exceeds p = {}", self.spt_size, self.p)));
        }
        if let DesignSpec::LowCoherencePm1 { target_mu } = self.design {
            check_open_unit("target_mu", target_mu)?;
        }
        if self.interval.is_empty() {
            return Err(invalid(format!("interval {} is empty", self.interval)));
        }
        if let Some(h) = self.max_support {
            if !(h >= 0.0) {
                return Err(invalid(format!("max_support = {h} must be nonnegative")));
            }
        }
        if let Some(c) = self.l1inf_cap {
            if !(c > 0.0) {
                return Err(invalid(format!("l1inf_cap = {c} must be positive")));
            }
        }
        if let Some(c) = self.c_r {
            if !(c >= 0.0) {
                return Err(invalid(format!("c_r = {c} must be nonnegative")));
            }
        }
        match &self.model {
            ModelSpec::Glm { family } => {
                if let FamilySpec::Gaussian { sigma2 } = family {
                    if !(*sigma2 > 0.0 && sigma2.is_finite()) {
                        return Err(invalid(format!("sigma2 = {sigma2} must be positive")));
                    }
                }
                if !matches!(self.theorem, TheoremSpec::Glm) {
                    return Err(invalid("a glm model pairs with the glm theorem"));
                }
            }
            ModelSpec::Lse { link, noise } => {
                validate_link(link)?;
                noise.validate()?;
                if matches!(self.theorem, TheoremSpec::Glm) {
                    return Err(invalid("the glm theorem needs a glm model"));
                }
                if let NoiseModel::FlipChannel { p01, p11 } = noise {
                    if *link != (LinkSpec::LogisticFlip { p01: *p01, p11: *p11 }) {
                        return Err(invalid("flip_channel noise needs the logistic_flip link with the same p01, p11"));
                    }
                }
            }
        }
        match &self.theorem {
            TheoremSpec::OneDisc { theta, radius_cap } => {
                check_open_unit("theta", *theta)?;
                if radius_cap.is_some_and(|c| !(c > 0.0)) {
                    return Err(invalid("radius_cap must be positive"));
                }
            }
            TheoremSpec::UbStrip { rho1, contour_radius } | TheoremSpec::UbInterval { rho1, contour_radius } => {
                if !(*rho1 > 0.0 && rho1 < contour_radius) {
                    return Err(invalid(format!("need 0 < rho1 = {rho1} < contour_radius = {contour_radius}")));
                }
            }
            TheoremSpec::MultiDisc { rule, .. } => validate_rule(rule)?,
            TheoremSpec::Glm => {}
        }
        if let Some(g) = &self.grid {
            validate_rule(&g.rule)?;
        }
        if let Some(v) = &self.verify {
            if let Some(t) = &v.tail {
                t.noise.validate()?;
                if t.trials < 10_000 || t.directions == 0 || t.n == 0 {
                    return Err(invalid("tail check needs trials >= 10000, directions >= 1 and n >= 1"));
                }
            }
            if let Some(c) = &v.control {
                c.noise.validate()?;
                if c.k_check == 0 || c.k_check > 6 || c.trials == 0 {
                    return Err(invalid("control check needs 1 <= k_check <= 6 and trials >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn loss(&self) -> Loss {
        match &self.model {
            ModelSpec::Glm { family } => Loss::Mle(family.family()),
            ModelSpec::Lse { link, .. } => Loss::Lse(link.function()),
        }
    }

    pub fn link(&self) -> Option<AnalyticFn> {
        match &self.model {
            ModelSpec::Glm { .. } => None,
            ModelSpec::Lse { link, .. } => Some(link.function()),
        }
    }

    /// The tail constant of the response noise.
    pub fn sigma(&self) -> f64 {
        match &self.model {
            ModelSpec::Glm { family: FamilySpec::Bernoulli } => 1.0,
            ModelSpec::Glm { family: FamilySpec::Gaussian { sigma2 } } => sigma2.sqrt(),
            ModelSpec::Lse { noise, .. } => noise.sigma(),
        }
    }

    pub fn domain_spec(&self, x: &DesignMatrix) -> Result<DomainSpec> {
        let spec = match self.max_support {
            Some(h) => DomainSpec::new(self.interval, h),
            None => DomainSpec::from_capacity(x, self.interval, self.nu)?,
        };
        Ok(match self.l1inf_cap {
            Some(c) => spec.with_cap(c),
            None => spec,
        })
    }

    /// Grid parameter `h`: twice the largest support of the domain, capped at `p`.
    fn grid_h(&self, x: &DesignMatrix, spec: &DomainSpec) -> usize {
        (2 * spec.h_max(x.p())).min(x.p())
    }

    fn link_or_err(&self) -> Result<AnalyticFn> {
        self.link().ok_or_else(|| invalid("this operation needs an lse model with a link"))
    }

    pub fn build_grid(&self, x: &DesignMatrix) -> Result<CoveringGrid> {
        let f = self.link_or_err()?;
        let spec = self.domain_spec(x)?;
        let g = match (&self.grid, &self.theorem) {
            (Some(g), _) => *g,
            (None, TheoremSpec::MultiDisc { rule, case }) => GridConfig { rule: *rule, case: *case },
            _ => return Err(invalid("no grid block and the theorem is not multi_disc")),
        };
        grids::build_grid(&spec, x, &f, g.rule, self.grid_h(x, &spec), g.case, self.nu)
    }

    pub fn bounds_report(&self, x: &DesignMatrix) -> Result<BoundsReport> {
        let sigma = self.sigma();
        match (&self.theorem, &self.model) {
            (TheoremSpec::Glm, ModelSpec::Glm { family }) => {
                bounds::glm_report(x, &family.family(), &self.interval, sigma, self.q, self.nu)
            }
            (TheoremSpec::OneDisc { theta, radius_cap }, ModelSpec::Lse { link, .. }) => bounds::one_disc_report(
                x,
                &link.function(),
                &self.interval,
                sigma,
                self.q,
                self.nu,
                *theta,
                self.depth,
                *radius_cap,
            ),
            (TheoremSpec::MultiDisc { .. }, ModelSpec::Lse { link, .. }) => {
                let f = link.function();
                let grid = self.build_grid(x)?;
                let stats = grids::grid_statistics(&grid, &f, x, self.depth)?;
                bounds::multi_disc_report(x, &f, &stats, &self.interval, sigma, self.q, self.nu, self.depth)
            }
            (
                TheoremSpec::UbStrip { rho1, contour_radius } | TheoremSpec::UbInterval { rho1, contour_radius },
                ModelSpec::Lse { link, .. },
            ) => {
                let mode =
                    if matches!(self.theorem, TheoremSpec::UbStrip { .. }) { UbMode::Strip } else { UbMode::Interval };
                let spec = self.domain_spec(x)?;
                let params = UbParams {
                    mode,
                    h: self.grid_h(x, &spec),
                    delta_d: l1inf_radius(x, &spec, self.nu)?,
                    rho1: *rho1,
                    contour_radius: *contour_radius,
                    depth: self.depth,
                };
                bounds::ub_report(x, &link.function(), &self.interval, sigma, self.q, self.nu, &params)
            }
            _ => Err(invalid("theorem and model do not match")),
        }
    }
}

fn validate_link(link: &LinkSpec) -> Result<()> {
    match link {
        LinkSpec::LogisticFlip { p01, p11 } => {
            check_prob("p01", *p01)?;
            check_prob("p11", *p11)
        }
        LinkSpec::Linear { a, b } if !(a.is_finite() && b.is_finite()) => Err(invalid("linear link needs finite a, b")),
        LinkSpec::Polynomial { coeffs } if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) => {
            Err(invalid("polynomial link needs finite coefficients"))
        }
        _ => Ok(()),
    }
}

fn validate_rule(rule: &BRule) -> Result<()> {
    match rule {
        BRule::Constant(c) if !(*c > 0.0) => Err(invalid(format!("constant b = {c} must be positive"))),
        _ => Ok(()),
    }
}
