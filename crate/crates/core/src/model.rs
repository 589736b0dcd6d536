//! Domain parameters shared by the theoretical and simulation engines.
//!
//! Lengths are in grid units throughout. The noise covariance is written as
//! `E[Z(s)Z(t)] = ρ(‖s − t‖²)`, so `ρ′ = ρ′(0)` has units of length⁻² and
//! `ρ″ = ρ″(0)` units of length⁻⁴.

use std::f64::consts::PI;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::randfield::GridSpec;

/// Isotropic noise covariance, described by the first two derivatives of
/// `ρ` at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovarianceRepr", into = "CovarianceRepr")]
pub struct CovarianceModel {
    rho_prime: f64,
    rho_double_prime: f64,
    kernel_bandwidth: Option<f64>,
    kappa: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CovarianceRepr {
    rho_prime: f64,
    rho_double_prime: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel_bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
}

impl TryFrom<CovarianceRepr> for CovarianceModel {
    type Error = Error;

    fn try_from(r: CovarianceRepr) -> Result<Self> {
        let mut model = CovarianceModel::new(r.rho_prime, r.rho_double_prime)?;
        if let Some(k) = r.kappa {
            if (k - model.kappa).abs() > 1e-9 * model.kappa.max(1.0) {
                return Err(Error::Parameter(format!(
                    "kappa {k} disagrees with -rho'/sqrt(rho'') = {}",
                    model.kappa
                )));
            }
        }
        if let Some(nu) = r.kernel_bandwidth {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::Parameter(format!("kernel bandwidth must be positive, got {nu}")));
            }
            model.kernel_bandwidth = Some(nu);
        }
        Ok(model)
    }
}

impl From<CovarianceModel> for CovarianceRepr {
    fn from(m: CovarianceModel) -> Self {
        CovarianceRepr {
            rho_prime: m.rho_prime,
            rho_double_prime: m.rho_double_prime,
            kernel_bandwidth: m.kernel_bandwidth,
            kappa: Some(m.kappa),
        }
    }
}

impl CovarianceModel {
    /// Builds a model from `ρ′ < 0` and `ρ″ > 0`.
    pub fn new(rho_prime: f64, rho_double_prime: f64) -> Result<Self> {
        if !(rho_prime < 0.0 && rho_prime.is_finite()) {
            return Err(Error::Parameter(format!("rho' must be negative, got {rho_prime}")));
        }
        if !(rho_double_prime > 0.0 && rho_double_prime.is_finite()) {
            return Err(Error::Parameter(format!(
                "rho'' must be positive, got {rho_double_prime}"
            )));
        }
        Ok(Self {
            rho_prime,
            rho_double_prime,
            kernel_bandwidth: None,
            kappa: -rho_prime / rho_double_prime.sqrt(),
        })
    }

    /// Squared-exponential covariance `ρ(t) = exp(−t/(2ν²))`, i.e. a
    /// correlation of `exp(−d²/(2ν²))` at distance `d`. Always `κ = 1`.
    pub fn from_kernel_bandwidth(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Parameter(format!("kernel bandwidth must be positive, got {nu}")));
        }
        let nu2 = nu * nu;
        let mut m = Self::new(-1.0 / (2.0 * nu2), 1.0 / (4.0 * nu2 * nu2))?;
        m.kappa = 1.0;
        m.kernel_bandwidth = Some(nu);
        Ok(m)
    }

    /// Covariance of white noise smoothed by a Gaussian kernel with standard
    /// deviation `sd`: the correlation is `exp(−d²/(4·sd²))`, the same model
    /// as [`from_kernel_bandwidth`](Self::from_kernel_bandwidth) at `√2·sd`.
    pub fn from_smoothing_kernel(sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::Parameter(format!("kernel sd must be positive, got {sd}")));
        }
        let s2 = sd * sd;
        let mut m = Self::new(-1.0 / (4.0 * s2), 1.0 / (16.0 * s2 * s2))?;
        m.kappa = 1.0;
        m.kernel_bandwidth = Some(std::f64::consts::SQRT_2 * sd);
        Ok(m)
    }

    pub fn rho_prime(&self) -> f64 {
        self.rho_prime
    }

    pub fn rho_double_prime(&self) -> f64 {
        self.rho_double_prime
    }

    pub fn kernel_bandwidth(&self) -> Option<f64> {
        self.kernel_bandwidth
    }

    /// `κ = −ρ′/√ρ″`
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Parameter `c = (1 − κ²)/2` of the GOI matrix governing the
    /// conditional Hessian.
    pub fn goi_c(&self) -> f64 {
        (1.0 - self.kappa * self.kappa) / 2.0
    }

    /// Whether GOI(c) is a valid distribution in `dim` dimensions
    /// (`c ≥ −1/N`).
    pub fn goi_feasible(&self, dim: usize) -> bool {
        dim >= 1 && self.goi_c() >= -1.0 / dim as f64
    }

    /// Variance of each gradient component, `−2ρ′`.
    pub fn gradient_variance(&self) -> f64 {
        -2.0 * self.rho_prime
    }
}

/// Standardized mean function `θ(s)` in units of the noise SD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanModel {
    Constant {
        theta0: f64,
        center: Vec<f64>,
    },
    /// `θ0 + θ″‖s − s0‖²/2`
    Paraboloid {
        theta0: f64,
        theta_pp: f64,
        center: Vec<f64>,
    },
    /// `θ0 exp(−‖s − s0‖²/(2ξ²))`
    GaussianBump {
        theta0: f64,
        xi: f64,
        center: Vec<f64>,
    },
}

impl MeanModel {
    pub fn constant(theta0: f64, center: Vec<f64>) -> Result<Self> {
        let m = MeanModel::Constant { theta0, center };
        m.validate()?;
        Ok(m)
    }

    pub fn paraboloid(theta0: f64, theta_pp: f64, center: Vec<f64>) -> Result<Self> {
        let m = MeanModel::Paraboloid { theta0, theta_pp, center };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian_bump(theta0: f64, xi: f64, center: Vec<f64>) -> Result<Self> {
        let m = MeanModel::GaussianBump { theta0, xi, center };
        m.validate()?;
        Ok(m)
    }

    /// Checks the shape invariants. A flat paraboloid (`θ″ = 0`) is allowed
    /// and treated as degenerate downstream.
    pub fn validate(&self) -> Result<()> {
        let center = self.center();
        if center.is_empty() || center.len() > 3 {
            return Err(Error::Parameter(format!(
                "mean center must have 1 to 3 coordinates, got {}",
                center.len()
            )));
        }
        if center.iter().any(|c| !c.is_finite()) || !self.theta0().is_finite() {
            return Err(Error::Parameter("mean parameters must be finite".into()));
        }
        match *self {
            MeanModel::Paraboloid { theta_pp, .. } if !(theta_pp <= 0.0) => Err(Error::Parameter(
                format!("paraboloid curvature must be <= 0, got {theta_pp}"),
            )),
            MeanModel::GaussianBump { xi, .. } if !(xi > 0.0 && xi.is_finite()) => Err(
                Error::Parameter(format!("gaussian bump bandwidth must be positive, got {xi}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn theta0(&self) -> f64 {
        match *self {
            MeanModel::Constant { theta0, .. }
            | MeanModel::Paraboloid { theta0, .. }
            | MeanModel::GaussianBump { theta0, .. } => theta0,
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            MeanModel::Constant { center, .. }
            | MeanModel::Paraboloid { center, .. }
            | MeanModel::GaussianBump { center, .. } => center,
        }
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    /// Same shape with the peak height shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        let mut m = self.clone();
        match &mut m {
            MeanModel::Constant { theta0, .. }
            | MeanModel::Paraboloid { theta0, .. }
            | MeanModel::GaussianBump { theta0, .. } => *theta0 += delta,
        }
        m
    }

    fn sq_dist(&self, s: &[f64]) -> f64 {
        self.center().iter().zip(s).map(|(c, x)| (x - c) * (x - c)).sum()
    }

    /// `θ(s)`
    pub fn value(&self, s: &[f64]) -> f64 {
        match *self {
            MeanModel::Constant { theta0, .. } => theta0,
            MeanModel::Paraboloid { theta0, theta_pp, .. } => theta0 + 0.5 * theta_pp * self.sq_dist(s),
            MeanModel::GaussianBump { theta0, xi, .. } => {
                theta0 * (-self.sq_dist(s) / (2.0 * xi * xi)).exp()
            }
        }
    }

    /// `∇θ(s)`
    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        let offs: Vec<f64> = self.center().iter().zip(s).map(|(c, x)| x - c).collect();
        let scale = match *self {
            MeanModel::Constant { .. } => 0.0,
            MeanModel::Paraboloid { theta_pp, .. } => theta_pp,
            MeanModel::GaussianBump { xi, .. } => -self.value(s) / (xi * xi),
        };
        offs.into_iter().map(|d| scale * d).collect()
    }

    /// `∇²θ(s)` as a row-major `N × N` matrix.
    pub fn hessian(&self, s: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let offs: Vec<f64> = self.center().iter().zip(s).map(|(c, x)| x - c).collect();
        let mut h = vec![0.0; n * n];
        match *self {
            MeanModel::Constant { .. } => {}
            MeanModel::Paraboloid { theta_pp, .. } => {
                for i in 0..n {
                    h[i * n + i] = theta_pp;
                }
            }
            MeanModel::GaussianBump { xi, .. } => {
                let v = self.value(s);
                let x2 = xi * xi;
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i * n + j] = v * (offs[i] * offs[j] / (x2 * x2) - delta / x2);
                    }
                }
            }
        }
        h
    }
}

/// `η = θ″/(−2ρ′)`: curvature of the signal peak relative to the gradient
/// variance of the noise.
pub fn eta(mean: &MeanModel, cov: &CovarianceModel) -> Result<f64> {
    match *mean {
        MeanModel::Paraboloid { theta_pp, .. } => Ok(theta_pp / cov.gradient_variance()),
        MeanModel::GaussianBump { theta0, xi, .. } => Ok(-theta0 / (xi * xi) / cov.gradient_variance()),
        MeanModel::Constant { .. } => Err(Error::Shape(
            "eta is undefined for a constant mean".into(),
        )),
    }
}

/// Second-order Taylor expansion of a Gaussian bump at its center:
/// `θ0 − θ0‖s − s0‖²/(2ξ²)`.
pub fn quadratic_approx(mean: &MeanModel) -> Result<MeanModel> {
    match mean {
        MeanModel::GaussianBump { theta0, xi, center } => Ok(MeanModel::Paraboloid {
            theta0: *theta0,
            theta_pp: -theta0 / (xi * xi),
            center: center.clone(),
        }),
        other => Err(Error::Shape(format!(
            "quadratic approximation needs a gaussian bump, got {}",
            other.variant_name()
        ))),
    }
}

impl MeanModel {
    pub fn variant_name(&self) -> &'static str {
        match self {
            MeanModel::Constant { .. } => "constant",
            MeanModel::Paraboloid { .. } => "paraboloid",
            MeanModel::GaussianBump { .. } => "gaussian_bump",
        }
    }
}

/// Search region: a ball of radius `radius` around the signal peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dim: usize,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl DomainSpec {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        let d = DomainSpec { dim, radius, grid: None };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Parameter(format!(
                "dimension must be 1, 2 or 3, got {}",
                self.dim
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Parameter(format!("domain radius must be positive, got {}", self.radius)));
        }
        if let Some(g) = &self.grid {
            if g.dims.len() != self.dim {
                return Err(Error::Dimension(format!(
                    "grid has {} axes, domain has dimension {}",
                    g.dims.len(),
                    self.dim
                )));
            }
        }
        Ok(())
    }

    /// Measure of the unit sphere surface in `dim` dimensions: 2, 2π, 4π.
    pub fn surface_constant(&self) -> f64 {
        match self.dim {
            1 => 2.0,
            2 => 2.0 * PI,
            _ => 4.0 * PI,
        }
    }

    /// Length, area or volume of the ball.
    pub fn volume(&self) -> f64 {
        let r = self.radius;
        match self.dim {
            1 => 2.0 * r,
            2 => PI * r * r,
            _ => 4.0 * PI * r * r * r / 3.0,
        }
    }
}

/// Peak-height threshold. `NegInf` selects all local maxima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    NegInf,
    Finite(f64),
}

impl Threshold {
    pub fn value(&self) -> f64 {
        match *self {
            Threshold::NegInf => f64::NEG_INFINITY,
            Threshold::Finite(u) => u,
        }
    }
}

impl From<f64> for Threshold {
    fn from(u: f64) -> Self {
        if u == f64::NEG_INFINITY {
            Threshold::NegInf
        } else {
            Threshold::Finite(u)
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Threshold::NegInf => s.serialize_str("-inf"),
            Threshold::Finite(u) => s.serialize_f64(u),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Threshold;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a finite number or the string \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Threshold, E> {
                if v.is_finite() {
                    Ok(Threshold::Finite(v))
                } else {
                    Err(E::custom("threshold must be finite or \"-inf\""))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Threshold, E> {
                Ok(Threshold::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Threshold, E> {
                Ok(Threshold::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Threshold, E> {
                match v {
                    "-inf" | "-infinity" => Ok(Threshold::NegInf),
                    _ => Err(E::custom(format!("unknown threshold sentinel {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// One evaluation request for the theoretical engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerQuery {
    pub u: Threshold,
    pub cov: CovarianceModel,
    pub mean: MeanModel,
    pub domain: DomainSpec,
}
