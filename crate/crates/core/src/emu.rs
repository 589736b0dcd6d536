//! Expected number of local maxima above a threshold.
//!
//! For a paraboloid mean centered on a ball domain the Kac–Rice integrand
//! depends on the location only through `r = ‖s − s0‖`, so
//!
//! ```text
//! E[M_u] = C_N ∫_0^R S_N r^{N−1} exp(θ″²r²/(4ρ′)) ∫_{ũ(r)}^∞ φ(x̃+η) H(x̃) dx̃ dr
//! ```
//!
//! with `C_N = (2ρ″/(−πρ′))^{N/2}`, `ũ(r) = u − θ(r) − η` and `S_N` the
//! surface measure of the unit sphere.
//!
//! `H(x̃)` is the GOI expectation `E[∏|λ_j − b|·1{λ_N < b}]`, `b = κx̃/√2`,
//! of the conditional Hessian. Its closed forms below were each checked
//! against direct integration over the GOI eigenvalue density and against
//! Monte Carlo (see [`crate::randfield::mc_h`]).

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{quadratic_approx, CovarianceModel, DomainSpec, MeanModel, PowerQuery, Threshold};
use crate::specfun::{adaptive_quad, bvn_cdf, norm_cdf, norm_pdf, psi, BivariateCov, QuadResult};

const OUTER_ABS_TOL: f64 = 1e-10;
const OUTER_REL_TOL: f64 = 1e-8;
const INNER_ABS_TOL: f64 = 1e-13;
const INNER_REL_TOL: f64 = 1e-10;

/// Half-width of the window around the mode of `φ(x̃ + η)` outside which
/// the inner integrand is dropped. `H` grows only like `|x̃|^N`, so the
/// discarded mass is below `φ(12)·12³ ≈ 10⁻²⁹`.
const INNER_HALF_WIDTH: f64 = 12.0;

/// Largest admissible `κ` in `dim` dimensions (exclusive).
pub fn kappa_upper_bound(dim: usize) -> f64 {
    match dim {
        1 => 3f64.sqrt(),
        2 => 2f64.sqrt(),
        _ => (5.0f64 / 3.0).sqrt(),
    }
}

fn check_kappa(dim: usize, kappa: f64) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Parameter(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    let hi = kappa_upper_bound(dim);
    if !(kappa > 0.0 && kappa < hi) {
        return Err(Error::Parameter(format!(
            "kappa must lie in (0, {hi:.6}) for dimension {dim}, got {kappa}"
        )));
    }
    Ok(())
}

fn h1_raw(x: f64, kappa: f64) -> f64 {
    let k2 = 3.0 - kappa * kappa;
    (k2 / 2.0).sqrt() * psi(kappa * x / k2.sqrt())
}

fn h2_raw(x: f64, kappa: f64) -> f64 {
    let k2 = kappa * kappa;
    let a = (3.0 - k2).sqrt();
    let c = (2.0 - k2).sqrt();
    let t1 = (2.0 * PI).sqrt() / a * norm_pdf(kappa * x / a) * norm_cdf(kappa * x / (a * c));
    let t2 = k2 / 2.0 * (x * x - 1.0) * norm_cdf(kappa * x / c);
    let t3 = kappa * c * x / 2.0 * norm_pdf(kappa * x / c);
    t1 + t2 + t3
}

fn h3_raw(x: f64, kappa: f64) -> f64 {
    let a = 1.0 - kappa * kappa;
    let b = kappa * x / std::f64::consts::SQRT_2;
    let b2 = b * b;
    let a2 = a * a;
    let a3 = a2 * a;
    let ap1 = a + 1.0;
    let ap2 = a + 2.0;
    let d = 3.0 * a + 2.0;

    let t1 = ((a3 + 6.0 * a2 + 12.0 * a + 24.0) / (2.0 * ap2 * ap2) * b2
        + (2.0 * a3 + 3.0 * a2 + 6.0 * a) / (4.0 * ap2)
        + 1.5)
        / (PI * ap2).sqrt()
        * (-b2 / ap2).exp()
        * norm_cdf(2.0 * std::f64::consts::SQRT_2 * b / (ap2 * d).sqrt());
    let t2 = (ap1 / 2.0 * b2 + (a2 - a) / 2.0 - 1.0) / (PI * ap1).sqrt()
        * (-b2 / ap1).exp()
        * norm_cdf(std::f64::consts::SQRT_2 * b / (ap1 * d).sqrt());
    let t3 = (a + 6.0 + (3.0 * a3 + 12.0 * a2 + 28.0 * a) / (2.0 * ap2)) * b
        / (2.0 * PI * ap2 * d.sqrt())
        * (-3.0 * b2 / d).exp();
    // both matrices are positive definite for every admissible κ
    let s1 = BivariateCov { a11: 1.5, a12: -1.0, a22: ap2 / 2.0 };
    let s2 = BivariateCov { a11: 1.5, a12: -0.5, a22: ap1 / 2.0 };
    let t4 = b * (b2 + 1.5 * (a - 1.0)) * (bvn_cdf(&s1, 0.0, b) + bvn_cdf(&s2, 0.0, b));
    t1 + t2 + t3 + t4
}

fn h_raw(dim: usize) -> fn(f64, f64) -> f64 {
    match dim {
        1 => h1_raw,
        2 => h2_raw,
        _ => h3_raw,
    }
}

/// `H(x̃)` in one dimension: `√((3−κ²)/2)·ψ(κx̃/√(3−κ²))`.
pub fn h_1d(x_tilde: f64, kappa: f64) -> Result<f64> {
    check_kappa(1, kappa)?;
    Ok(h1_raw(x_tilde, kappa))
}

/// `H(x̃)` in two dimensions.
pub fn h_2d(x_tilde: f64, kappa: f64) -> Result<f64> {
    check_kappa(2, kappa)?;
    Ok(h2_raw(x_tilde, kappa).max(0.0))
}

/// `H(x̃)` in three dimensions, written with `a = 1 − κ²`, `b = κx̃/√2`.
pub fn h_3d(x_tilde: f64, kappa: f64) -> Result<f64> {
    check_kappa(3, kappa)?;
    Ok(h3_raw(x_tilde, kappa).max(0.0))
}

pub fn h_nd(dim: usize, x_tilde: f64, kappa: f64) -> Result<f64> {
    match dim {
        1 => h_1d(x_tilde, kappa),
        2 => h_2d(x_tilde, kappa),
        3 => h_3d(x_tilde, kappa),
        _ => Err(Error::Parameter(format!("dimension must be 1, 2 or 3, got {dim}"))),
    }
}

/// `∫_a^∞ φ(x̃ + η) H(x̃) dx̃`, restricted to the window where `φ` matters.
fn inner_integral(
    h: fn(f64, f64) -> f64,
    kappa: f64,
    eta: f64,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    let hi = -eta + INNER_HALF_WIDTH;
    let lo = a.max(-eta - INNER_HALF_WIDTH);
    if lo >= hi {
        return Ok(QuadResult { value: 0.0, err: 0.0 });
    }
    adaptive_quad(|x| norm_pdf(x + eta) * h(x, kappa), lo, hi, abs_tol, rel_tol)
}

/// `E[M_u]` for a rotationally symmetric quadratic mean
/// `θ0 + θ″r²/2` on a ball of radius `radius`.
pub fn expected_peaks_radial(
    cov: &CovarianceModel,
    dim: usize,
    theta0: f64,
    theta_pp: f64,
    radius: f64,
    u: Threshold,
) -> Result<QuadResult> {
    check_kappa(dim, cov.kappa())?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Parameter(format!("domain radius must be positive, got {radius}")));
    }
    if theta_pp > 0.0 {
        return Err(Error::Parameter(format!("paraboloid curvature must be <= 0, got {theta_pp}")));
    }
    let (rp, rpp, kappa) = (cov.rho_prime(), cov.rho_double_prime(), cov.kappa());
    let h = h_raw(dim);
    let eta = theta_pp / cov.gradient_variance();
    let c_n = (2.0 * rpp / (-PI * rp)).powf(dim as f64 / 2.0);
    let domain = DomainSpec { dim, radius, grid: None };
    let lower = |r: f64| match u {
        Threshold::NegInf => f64::NEG_INFINITY,
        Threshold::Finite(u) => u - theta0 - 0.5 * theta_pp * r * r - eta,
    };

    if theta_pp == 0.0 {
        let inner = inner_integral(h, kappa, 0.0, lower(0.0), INNER_ABS_TOL, INNER_REL_TOL)?;
        let scale = c_n * domain.volume();
        return Ok(QuadResult { value: scale * inner.value, err: scale * inner.err });
    }

    let s_n = domain.surface_constant();
    let inner_err = Cell::new(0.0f64);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |r: f64| {
        let damp = (theta_pp * theta_pp * r * r / (4.0 * rp)).exp();
        if damp == 0.0 {
            return 0.0;
        }
        match inner_integral(h, kappa, eta, lower(r), INNER_ABS_TOL, INNER_REL_TOL) {
            Ok(q) => {
                let w = s_n * r.powi(dim as i32 - 1) * damp;
                inner_err.set(inner_err.get().max(q.err * w));
                w * q.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let outer = adaptive_quad(integrand, 0.0, radius, OUTER_ABS_TOL / c_n, OUTER_REL_TOL);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let outer = outer.map_err(|e| scale_quad_error(e, c_n))?;
    Ok(QuadResult {
        value: c_n * outer.value,
        err: c_n * (outer.err + radius * inner_err.get()),
    })
}

fn scale_quad_error(e: Error, c: f64) -> Error {
    match e {
        Error::Quadrature { value, err } => Error::Quadrature { value: c * value, err: c * err },
        other => other,
    }
}

/// `E[M_u]` for one query.
///
/// Constant and paraboloid means are evaluated exactly. A Gaussian bump is
/// replaced by its quadratic approximation in two and three dimensions
/// (see [`uses_quadratic_approx`]); in one dimension it goes through the
/// general-mean formula [`expected_peaks_1d_general`].
pub fn expected_peaks(q: &PowerQuery) -> Result<QuadResult> {
    expected_peaks_with(&q.cov, &q.mean, &q.domain, q.u)
}

pub fn expected_peaks_with(
    cov: &CovarianceModel,
    mean: &MeanModel,
    domain: &DomainSpec,
    u: Threshold,
) -> Result<QuadResult> {
    domain.validate()?;
    mean.validate()?;
    if mean.dim() != domain.dim {
        return Err(Error::Dimension(format!(
            "mean center has {} coordinates, domain dimension is {}",
            mean.dim(),
            domain.dim
        )));
    }
    match *mean {
        MeanModel::Constant { theta0, .. } => {
            expected_peaks_radial(cov, domain.dim, theta0, 0.0, domain.radius, u)
        }
        MeanModel::Paraboloid { theta0, theta_pp, .. } => {
            expected_peaks_radial(cov, domain.dim, theta0, theta_pp, domain.radius, u)
        }
        MeanModel::GaussianBump { theta0, xi, ref center } if domain.dim == 1 => {
            let s0 = center[0];
            let x2 = xi * xi;
            let theta = |s: f64| theta0 * (-(s - s0) * (s - s0) / (2.0 * x2)).exp();
            let theta_p = |s: f64| -(s - s0) / x2 * theta(s);
            let theta_pp = |s: f64| ((s - s0) * (s - s0) / (x2 * x2) - 1.0 / x2) * theta(s);
            expected_peaks_1d_general(
                cov,
                theta,
                theta_p,
                theta_pp,
                (s0 - domain.radius, s0 + domain.radius),
                u,
            )
        }
        MeanModel::GaussianBump { .. } => {
            let q = quadratic_approx(mean)?;
            expected_peaks_with(cov, &q, domain, u)
        }
    }
}

/// Whether [`expected_peaks`] evaluates this mean through its quadratic
/// approximation.
pub fn uses_quadratic_approx(mean: &MeanModel, dim: usize) -> bool {
    matches!(mean, MeanModel::GaussianBump { .. }) && dim >= 2
}

/// `E[M_u]` on an interval for an arbitrary smooth mean in one dimension:
///
/// ```text
/// ∫_D √(−2ρ′(3−κ²))/κ · φ(θ′/√(−2ρ′)) ∫_{u−θ−η}^∞ φ(x̃+η) ψ(κx̃/√(3−κ²)) dx̃ ds
/// ```
///
/// with the local curvature ratio `η(s) = θ″(s)/(−2ρ′)`.
pub fn expected_peaks_1d_general<T, Tp, Tpp>(
    cov: &CovarianceModel,
    theta: T,
    theta_p: Tp,
    theta_pp: Tpp,
    interval: (f64, f64),
    u: Threshold,
) -> Result<QuadResult>
where
    T: Fn(f64) -> f64,
    Tp: Fn(f64) -> f64,
    Tpp: Fn(f64) -> f64,
{
    check_kappa(1, cov.kappa())?;
    let (a, b) = interval;
    if !(a < b && a.is_finite() && b.is_finite()) {
        return Err(Error::Parameter(format!("invalid interval [{a}, {b}]")));
    }
    let kappa = cov.kappa();
    let gv = cov.gradient_variance();
    let prefactor = (gv * (3.0 - kappa * kappa)).sqrt() / kappa;
    let k3 = (3.0 - kappa * kappa).sqrt();
    let inner_err = Cell::new(0.0f64);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |s: f64| {
        let th = theta(s);
        let eta = theta_pp(s) / gv;
        let w = prefactor * norm_pdf(theta_p(s) / gv.sqrt());
        let lower = match u {
            Threshold::NegInf => f64::NEG_INFINITY,
            Threshold::Finite(u) => u - th - eta,
        };
        let hi = -eta + INNER_HALF_WIDTH;
        let lo = lower.max(-eta - INNER_HALF_WIDTH);
        if lo >= hi || w == 0.0 {
            return 0.0;
        }
        let f = |x: f64| norm_pdf(x + eta) * psi(kappa * x / k3);
        match adaptive_quad(f, lo, hi, INNER_ABS_TOL, INNER_REL_TOL) {
            Ok(q) => {
                inner_err.set(inner_err.get().max(q.err * w));
                w * q.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let outer = adaptive_quad(integrand, a, b, OUTER_ABS_TOL, OUTER_REL_TOL);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let outer = outer?;
    Ok(QuadResult { value: outer.value, err: outer.err + (b - a) * inner_err.get() })
}

/// `E[M_u]/max(1, E[M_{−∞}])`, a version of `E[M_u]` capped at one.
pub fn adjusted_expected_peaks(e_mu: f64, e_m_total: f64) -> Result<f64> {
    // quadrature noise may push e_mu a hair above the total
    let slack = 1e-9 * e_m_total.abs().max(1e-300);
    if !(e_mu >= 0.0 && e_mu <= e_m_total + slack) {
        return Err(Error::Consistency(format!(
            "need 0 <= E[M_u] <= E[M_-inf], got {e_mu} and {e_m_total}"
        )));
    }
    Ok(e_mu.min(e_m_total) / e_m_total.max(1.0))
}

/// Limit of `E[M_u]` for an infinitely sharp peak of height `θ0`:
/// `Φ(θ0 − u)`.
pub fn sharp_signal_approx(theta0: f64, u: f64) -> f64 {
    if u == f64::NEG_INFINITY {
        return 1.0;
    }
    norm_cdf(theta0 - u)
}

/// Null survival function of peak height, `P(height > u)` for a peak of a
/// centered field: `E[M_u]/E[M_{−∞}]` with `θ ≡ 0`. The domain factor
/// cancels, leaving a ratio of two inner integrals.
pub fn null_overshoot_survival(cov: &CovarianceModel, dim: usize, u: f64) -> Result<f64> {
    check_kappa(dim, cov.kappa())?;
    if u.is_nan() {
        return Err(Error::Parameter("threshold is NaN".into()));
    }
    if u == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let h = h_raw(dim);
    let kappa = cov.kappa();
    let total = inner_integral(h, kappa, 0.0, f64::NEG_INFINITY, 1e-15, 1e-13)?.value;
    // integrate whichever tail is smaller to keep relative accuracy
    let upper = if u >= 0.0 {
        inner_integral(h, kappa, 0.0, u, 1e-16, 1e-13)?.value
    } else {
        let lower = adaptive_quad(
            |x| norm_pdf(x) * h(x, kappa),
            -INNER_HALF_WIDTH,
            u.max(-INNER_HALF_WIDTH),
            1e-16,
            1e-13,
        )?
        .value;
        total - lower
    };
    Ok((upper / total).clamp(0.0, 1.0))
}

/// Threshold `u` with `null_overshoot_survival(u) = alpha`, found by
/// bracketing and bisection.
pub fn threshold_for_alpha(cov: &CovarianceModel, dim: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let f = |u: f64| null_overshoot_survival(cov, dim, u).map(|s| s - alpha);
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut step = 2.0;
    while f(lo)? < 0.0 {
        lo -= step;
        step *= 2.0;
        if lo < -2.0 * INNER_HALF_WIDTH {
            return Err(Error::Solver(format!("no lower bracket for alpha = {alpha}")));
        }
    }
    step = 2.0;
    while f(hi)? > 0.0 {
        hi += step;
        step *= 2.0;
        if hi > 2.0 * INNER_HALF_WIDTH {
            return Err(Error::Solver(format!("no upper bracket for alpha = {alpha}")));
        }
    }
    let mut best = (f64::INFINITY, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = f(mid)?;
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r.abs() <= 1e-10 || hi - lo < 1e-14 {
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > 1e-8 {
        return Err(Error::Solver(format!(
            "bisection stalled with residual {:e} for alpha = {alpha}",
            best.0
        )));
    }
    Ok(best.1)
}

/// `E[M_u]` and its derived quantities over a grid of thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub u_grid: Vec<f64>,
    pub e_mu: Vec<f64>,
    pub e_mu_adj: Vec<f64>,
    pub e_m_total: f64,
    pub sharp_approx: Option<Vec<f64>>,
    pub quadrature_err: Vec<f64>,
    /// Set when a Gaussian bump was replaced by its quadratic approximation.
    pub quadratic_approx: bool,
}

pub fn power_curve(
    cov: &CovarianceModel,
    mean: &MeanModel,
    domain: &DomainSpec,
    u_grid: &[f64],
) -> Result<PowerResult> {
    if u_grid.iter().any(|u| u.is_nan() || *u == f64::INFINITY) {
        return Err(Error::Parameter("thresholds must be finite or -inf".into()));
    }
    let total = expected_peaks_with(cov, mean, domain, Threshold::NegInf)?;
    let values: Vec<QuadResult> = u_grid
        .par_iter()
        .map(|&u| expected_peaks_with(cov, mean, domain, Threshold::from(u)))
        .collect::<Result<_>>()?;
    let e_mu: Vec<f64> = values.iter().map(|q| q.value.max(0.0)).collect();
    let e_mu_adj = e_mu
        .iter()
        .map(|&e| adjusted_expected_peaks(e, total.value))
        .collect::<Result<Vec<_>>>()?;
    let sharp = match mean {
        MeanModel::Constant { .. } => None,
        _ => Some(u_grid.iter().map(|&u| sharp_signal_approx(mean.theta0(), u)).collect()),
    };
    Ok(PowerResult {
        u_grid: u_grid.to_vec(),
        e_mu,
        e_mu_adj,
        e_m_total: total.value,
        sharp_approx: sharp,
        quadrature_err: values.iter().map(|q| q.err).collect(),
        quadratic_approx: uses_quadratic_approx(mean, domain.dim),
    })
}
