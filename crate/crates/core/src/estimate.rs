//! Parameter estimation from multi-subject image stacks.
//!
//! Each subject is modeled as `Y_i(s) = μ(s) + σ(s)ε_i(s)` with smooth
//! unit-variance noise `ε_i`. The group t-like field
//! `X = Ȳ/(σ̂/√n)` has unit-variance noise and mean `√n·μ/σ`, which is the
//! standardized signal that the theory consumes.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CovarianceModel, MeanModel};
use crate::randfield::GridSpec;

/// Subject images on a common grid, stored voxel-major:
/// `values[voxel · n_subjects + subject]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectStack {
    pub grid: GridSpec,
    pub n_subjects: usize,
    pub values: Vec<f64>,
}

impl SubjectStack {
    pub fn new(grid: GridSpec, n_subjects: usize, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() * n_subjects {
            return Err(Error::Dimension(format!(
                "stack has {} values, expected {} voxels x {} subjects",
                values.len(),
                grid.len(),
                n_subjects
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("subject stack contains non-finite values".into()));
        }
        Ok(Self { grid, n_subjects, values })
    }

    /// Builds a stack from images laid out one subject after another.
    pub fn from_subject_major(grid: GridSpec, n_subjects: usize, data: &[f64]) -> Result<Self> {
        let nv = grid.len();
        if data.len() != nv * n_subjects {
            return Err(Error::Dimension(format!(
                "payload has {} values, expected {} voxels x {} subjects",
                data.len(),
                nv,
                n_subjects
            )));
        }
        let mut values = vec![0.0; data.len()];
        for s in 0..n_subjects {
            for v in 0..nv {
                values[v * n_subjects + s] = data[s * nv + v];
            }
        }
        Self::new(grid, n_subjects, values)
    }

    /// Inverse of [`from_subject_major`](Self::from_subject_major).
    pub fn to_subject_major(&self) -> Vec<f64> {
        let nv = self.grid.len();
        let n = self.n_subjects;
        let mut out = vec![0.0; self.values.len()];
        for v in 0..nv {
            for s in 0..n {
                out[s * nv + v] = self.values[v * n + s];
            }
        }
        out
    }

    pub fn voxel(&self, v: usize) -> &[f64] {
        &self.values[v * self.n_subjects..(v + 1) * self.n_subjects]
    }

    fn require_subjects(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::Parameter(format!(
                "standardization needs at least 2 subjects, got {}",
                self.n_subjects
            )));
        }
        Ok(())
    }

    fn mean_sd(&self, v: usize) -> (f64, f64) {
        let y = self.voxel(v);
        let n = y.len() as f64;
        let m = y.iter().sum::<f64>() / n;
        let ss = y.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
        (m, (ss / (n - 1.0)).sqrt())
    }
}

/// Group-mean field in standard-error units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedField {
    pub grid: GridSpec,
    /// `NaN` at zero-variance voxels.
    pub values: Vec<f64>,
    pub zero_variance: Vec<usize>,
}

/// `X(s) = Ȳ(s)/(sd(s)/√n)` with the `n − 1` sample SD. Any zero-variance
/// voxel is an error.
pub fn standardize(stack: &SubjectStack) -> Result<StandardizedField> {
    standardize_within(stack, None)
}

/// As [`standardize`], but zero-variance voxels outside `mask` are only
/// flagged (their value is `NaN`).
pub fn standardize_within(stack: &SubjectStack, mask: Option<&[bool]>) -> Result<StandardizedField> {
    stack.require_subjects()?;
    let nv = stack.grid.len();
    if let Some(m) = mask {
        if m.len() != nv {
            return Err(Error::Dimension("mask length does not match the grid".into()));
        }
    }
    let rn = (stack.n_subjects as f64).sqrt();
    let mut values = Vec::with_capacity(nv);
    let mut zero = Vec::new();
    for v in 0..nv {
        let (m, sd) = stack.mean_sd(v);
        if sd > 0.0 {
            values.push(m / (sd / rn));
        } else {
            zero.push(v);
            values.push(f64::NAN);
        }
    }
    let fatal: Vec<usize> = zero.iter().copied().filter(|&v| mask.is_none_or(|m| m[v])).collect();
    if !fatal.is_empty() {
        let shown: Vec<_> = fatal.iter().take(10).collect();
        return Err(Error::Estimation(format!(
            "{} zero-variance voxels in the region of interest (first: {shown:?})",
            fatal.len()
        )));
    }
    Ok(StandardizedField { grid: stack.grid.clone(), values, zero_variance: zero })
}

/// Nonparametric smoothing-kernel estimate along lags `−w..=w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    /// Kernel values at lags `−w..=w`, unit L2 norm.
    pub radial_profile: Vec<f64>,
    /// Autocorrelation of the estimated kernel at lags `0..=w`.
    pub implied_correlation: Vec<f64>,
    /// Symmetrized, axis-averaged empirical correlation at lags `−w..=w`.
    pub empirical_correlation: Vec<f64>,
    /// Share of absolute spectral mass set to zero before the square root.
    pub clamped_fraction: f64,
    pub subdomain: GridSpec,
    pub center: Vec<usize>,
}

impl KernelEstimate {
    pub fn half_width(&self) -> usize {
        self.radial_profile.len() / 2
    }
}

/// Largest tolerated share of negative spectral mass.
pub const MAX_CLAMPED_FRACTION: f64 = 0.2;

/// Estimates the smoothing kernel from the correlation of standardized
/// residuals between `s0` and points along each axis.
///
/// The per-axis correlations are averaged with their mirror images and over
/// axes, then turned into a kernel by taking the square root of their
/// discrete Fourier coefficients. Negative coefficients are set to zero
/// first; more than [`MAX_CLAMPED_FRACTION`] of spectral mass clamped is an
/// error.
pub fn estimate_kernel(stack: &SubjectStack, s0: &[usize], w: usize) -> Result<KernelEstimate> {
    stack.require_subjects()?;
    let grid = &stack.grid;
    let ndim = grid.ndim();
    if s0.len() != ndim {
        return Err(Error::Dimension(format!(
            "peak location has {} coordinates, grid has {} axes",
            s0.len(),
            ndim
        )));
    }
    if w == 0 {
        return Err(Error::Parameter("subdomain half-width must be at least 1".into()));
    }
    for (a, (&c, &d)) in s0.iter().zip(&grid.dims).enumerate() {
        if c < w || c + w >= d {
            return Err(Error::Parameter(format!(
                "subdomain of half-width {w} around {s0:?} leaves the grid along axis {a}"
            )));
        }
    }
    let n = stack.n_subjects;
    let strides = grid.strides();
    let flat0: usize = s0.iter().zip(&strides).map(|(i, s)| i * s).sum();
    let residuals = |v: usize| -> Result<Vec<f64>> {
        let (m, sd) = stack.mean_sd(v);
        if !(sd > 0.0) {
            return Err(Error::Estimation(format!("zero-variance voxel {v} inside the subdomain")));
        }
        Ok(stack.voxel(v).iter().map(|y| (y - m) / sd).collect())
    };
    let r0 = residuals(flat0)?;
    let len = 2 * w + 1;
    let mut corr = vec![0.0; len];
    for &st in &strides {
        let mut axis = vec![0.0; len];
        for (j, slot) in axis.iter_mut().enumerate() {
            let v = (flat0 + j * st) - w * st;
            let r = residuals(v)?;
            *slot = r0.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / (n - 1) as f64;
        }
        for j in 0..len {
            corr[j] += 0.5 * (axis[j] + axis[len - 1 - j]) / ndim as f64;
        }
    }

    let (profile, clamped) = kernel_from_correlation(&corr)?;
    if clamped > MAX_CLAMPED_FRACTION {
        return Err(Error::Estimation(format!(
            "empirical correlation is far from positive definite: {:.1}% of spectral mass clamped",
            100.0 * clamped
        )));
    }
    if clamped > 0.0 {
        log::info!("clamped {:.3}% of spectral mass", 100.0 * clamped);
    }
    let implied = autocorrelation(&profile, w);
    Ok(KernelEstimate {
        radial_profile: profile,
        implied_correlation: implied,
        empirical_correlation: corr,
        clamped_fraction: clamped,
        subdomain: GridSpec { dims: vec![len; ndim], spacing: grid.spacing },
        center: s0.to_vec(),
    })
}

/// Spectral square root of a symmetric correlation vector given at lags
/// `−w..=w`. Returns the centered, L2-normalized kernel and the clamped
/// share of spectral mass.
pub fn kernel_from_correlation(corr: &[f64]) -> Result<(Vec<f64>, f64)> {
    let len = corr.len();
    if len % 2 == 0 || len < 3 {
        return Err(Error::Dimension(format!("correlation vector must have odd length >= 3, got {len}")));
    }
    let w = len / 2;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    // lag 0 first, negative lags wrapped to the end
    let mut buf: Vec<Complex<f64>> = (0..len).map(|j| Complex::new(corr[(j + w) % len], 0.0)).collect();
    fwd.process(&mut buf);
    let total: f64 = buf.iter().map(|c| c.re.abs()).sum();
    let negative: f64 = buf.iter().map(|c| (-c.re).max(0.0)).sum();
    let clamped = if total > 0.0 { negative / total } else { 1.0 };
    for c in buf.iter_mut() {
        *c = Complex::new(c.re.max(0.0).sqrt(), 0.0);
    }
    inv.process(&mut buf);
    let mut profile: Vec<f64> = (0..len).map(|j| buf[(j + len - w) % len].re).collect();
    let norm = profile.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Estimation("estimated kernel vanishes".into()));
    }
    profile.iter_mut().for_each(|v| *v /= norm);
    Ok((profile, clamped))
}

/// `Σ_j k_j k_{j+l}` for `l = 0..=max_lag`.
fn autocorrelation(k: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|l| (0..k.len().saturating_sub(l)).map(|j| k[j] * k[j + l]).sum())
        .collect()
}

/// Unit-norm sampled Gaussian profile at lags `−w..=w`.
pub fn gaussian_profile(sd: f64, w: usize, spacing: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..=2 * w)
        .map(|j| {
            let x = (j as f64 - w as f64) * spacing;
            (-x * x / (2.0 * sd * sd)).exp()
        })
        .collect();
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    p.iter_mut().for_each(|v| *v /= norm);
    p
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

/// Pearson correlation of two equally long vectors.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// How the noise covariance was read off a kernel estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMethod {
    GaussianFit,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedCovariance {
    pub cov: CovarianceModel,
    pub method: CovarianceMethod,
    /// SD of the best-fitting Gaussian kernel.
    pub gaussian_sd: f64,
    /// Relative L2 distance between the estimate and that Gaussian.
    pub gaussian_rel_l2: f64,
}

/// Relative L2 distance below which an estimated kernel is treated as
/// Gaussian.
pub const GAUSSIAN_FIT_TOLERANCE: f64 = 0.05;

/// Noise covariance `(ρ′, ρ″)` implied by a kernel estimate.
///
/// A near-Gaussian kernel with SD `σ` gives `κ = 1`, `ρ′ = −1/(4σ²)` and
/// `ρ″ = 1/(16σ⁴)`. Otherwise the implied correlation `c(d) = ρ(d²)` is
/// differentiated at zero with fourth-order central differences:
/// `ρ′ = c″(0)/2`, `ρ″ = c⁗(0)/12`.
pub fn implied_covariance(est: &KernelEstimate) -> Result<ImpliedCovariance> {
    let w = est.half_width();
    let h = est.subdomain.spacing;
    let k = &est.radial_profile;
    let dist = |sd: f64| rel_l2(k, &gaussian_profile(sd, w, h));
    // golden-section search for the best Gaussian SD
    let (mut lo, mut hi) = (0.05 * h, 2.0 * w as f64 * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (dist(x1), dist(x2));
    for _ in 0..100 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = dist(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = dist(x2);
        }
    }
    let sd = 0.5 * (lo + hi);
    let d = dist(sd);
    if d < GAUSSIAN_FIT_TOLERANCE {
        return Ok(ImpliedCovariance {
            cov: CovarianceModel::from_smoothing_kernel(sd)?,
            method: CovarianceMethod::GaussianFit,
            gaussian_sd: sd,
            gaussian_rel_l2: d,
        });
    }
    let c = &est.implied_correlation;
    if c.len() < 4 {
        return Err(Error::Estimation("need lags up to 3 for finite differences".into()));
    }
    let c2 = (-2.0 * c[2] + 32.0 * c[1] - 30.0 * c[0]) / (12.0 * h * h);
    let c4 = (-2.0 * c[3] + 24.0 * c[2] - 78.0 * c[1] + 56.0 * c[0]) / (6.0 * h.powi(4));
    let cov = CovarianceModel::new(c2 / 2.0, c4 / 12.0).map_err(|e| {
        Error::Estimation(format!("finite-difference covariance is invalid: {e}"))
    })?;
    Ok(ImpliedCovariance {
        cov,
        method: CovarianceMethod::FiniteDifference,
        gaussian_sd: sd,
        gaussian_rel_l2: d,
    })
}

/// Axis-aligned box of grid points: `lo[a] .. lo[a] + size[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<usize>,
    pub size: Vec<usize>,
}

impl BoxSpec {
    /// Box of `size` points per axis centered as closely as possible on
    /// `center`.
    pub fn around(center: &[usize], size: usize) -> Self {
        BoxSpec {
            lo: center.iter().map(|&c| c.saturating_sub((size - 1) / 2)).collect(),
            size: vec![size; center.len()],
        }
    }

    pub fn count(&self) -> usize {
        self.size.iter().product()
    }
}

/// Least-squares paraboloid `β0 + β1‖s‖² + β_lin·s` in coordinates
/// centered on the box center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticMeanFit {
    pub beta: Vec<f64>,
    /// Peak location in grid coordinates.
    pub center: Vec<f64>,
    pub theta_pp: f64,
    pub theta0: f64,
    pub residual_rmse: f64,
    /// Coordinate origin of `beta`.
    pub origin: Vec<f64>,
}

impl QuadraticMeanFit {
    /// Derives the peak from coefficients `(β0, β1, β_lin...)` given in
    /// coordinates centered at `origin`.
    pub fn from_beta(beta: Vec<f64>, origin: Vec<f64>, residual_rmse: f64) -> Result<Self> {
        let ndim = origin.len();
        if beta.len() != ndim + 2 {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                ndim + 2,
                beta.len()
            )));
        }
        let (b0, b1) = (beta[0], beta[1]);
        if !(b1 < 0.0) {
            return Err(Error::Estimation(format!(
                "fitted surface is not concave (coefficient of |s|^2 is {b1})"
            )));
        }
        let lin = &beta[2..];
        let center = lin.iter().zip(&origin).map(|(b, o)| o - b / (2.0 * b1)).collect();
        let lin2: f64 = lin.iter().map(|b| b * b).sum();
        Ok(Self {
            theta0: b0 - lin2 / (4.0 * b1),
            theta_pp: 2.0 * b1,
            center,
            beta,
            residual_rmse,
            origin,
        })
    }

    pub fn to_mean_model(&self) -> Result<MeanModel> {
        MeanModel::paraboloid(self.theta0, self.theta_pp, self.center.clone())
    }
}

/// Ordinary least squares of `field` on `[1, ‖s‖², s]` over the points of
/// `bx`.
pub fn fit_quadratic_mean(field: &[f64], grid: &GridSpec, bx: &BoxSpec) -> Result<QuadraticMeanFit> {
    let ndim = grid.ndim();
    if field.len() != grid.len() {
        return Err(Error::Dimension("field length does not match the grid".into()));
    }
    if bx.lo.len() != ndim || bx.size.len() != ndim {
        return Err(Error::Dimension(format!("box must have {ndim} axes")));
    }
    for a in 0..ndim {
        if bx.size[a] == 0 || bx.lo[a] + bx.size[a] > grid.dims[a] {
            return Err(Error::Parameter(format!("box leaves the grid along axis {a}")));
        }
    }
    let m = bx.count();
    let p = ndim + 2;
    if m < p {
        return Err(Error::Parameter(format!("box has {m} points, need at least {p}")));
    }
    let origin: Vec<f64> = (0..ndim)
        .map(|a| (bx.lo[a] as f64 + (bx.size[a] - 1) as f64 / 2.0) * grid.spacing)
        .collect();
    let strides = grid.strides();
    let mut x = DMatrix::<f64>::zeros(m, p);
    let mut y = DVector::<f64>::zeros(m);
    let mut idx = vec![0usize; ndim];
    for row in 0..m {
        let mut r = row;
        for a in (0..ndim).rev() {
            idx[a] = bx.lo[a] + r % bx.size[a];
            r /= bx.size[a];
        }
        let flat: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        let v = field[flat];
        if !v.is_finite() {
            return Err(Error::Estimation(format!("non-finite field value at {idx:?}")));
        }
        y[row] = v;
        x[(row, 0)] = 1.0;
        let mut r2 = 0.0;
        for a in 0..ndim {
            let s = idx[a] as f64 * grid.spacing - origin[a];
            x[(row, 2 + a)] = s;
            r2 += s * s;
        }
        x[(row, 1)] = r2;
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Estimation("quadratic design matrix is rank deficient".into()));
    }
    let beta = svd
        .solve(&y, 1e-12 * smax)
        .map_err(|e| Error::Estimation(format!("least squares failed: {e}")))?;
    let resid = &y - &x * &beta;
    let rmse = (resid.norm_squared() / m as f64).sqrt();
    QuadraticMeanFit::from_beta(beta.iter().copied().collect(), origin, rmse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn grid(d: &[usize]) -> GridSpec {
        GridSpec::new(d.to_vec()).unwrap()
    }

    #[test]
    fn constant_subjects_fail() {
        let g = grid(&[4, 4]);
        let s = SubjectStack::new(g, 3, vec![2.0; 48]).unwrap();
        assert!(matches!(standardize(&s), Err(Error::Estimation(_))));
    }

    #[test]
    fn single_subject_fails() {
        let g = grid(&[4, 4]);
        let s = SubjectStack::new(g, 1, (0..16).map(|i| i as f64).collect()).unwrap();
        assert!(matches!(standardize(&s), Err(Error::Parameter(_))));
    }

    #[test]
    fn zero_variance_outside_mask_is_flagged() {
        let g = grid(&[3, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut v: Vec<f64> = (0..9 * 4).map(|_| rng.sample(StandardNormal)).collect();
        v[..4].iter_mut().for_each(|x| *x = 1.0);
        let s = SubjectStack::new(g, 4, v).unwrap();
        let mut mask = vec![true; 9];
        mask[0] = false;
        let f = standardize_within(&s, Some(&mask)).unwrap();
        assert_eq!(f.zero_variance, vec![0]);
        assert!(f.values[0].is_nan());
        assert!(standardize(&s).is_err());
    }

    #[test]
    fn white_noise_standardizes_to_unit_sd() {
        let n = 80;
        let g = grid(&[100, 100]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..g.len() * n).map(|_| rng.sample(StandardNormal)).collect();
        let s = SubjectStack::new(g, n, v).unwrap();
        let x = standardize(&s).unwrap().values;
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt();
        assert!((0.9..=1.15).contains(&sd), "{sd}");
    }

    #[test]
    fn shift_and_scale() {
        let n = 10;
        let g = grid(&[3, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<f64> = (0..9 * n).map(|_| rng.sample(StandardNormal)).collect();
        let s = SubjectStack::new(g.clone(), n, v.clone()).unwrap();
        let x0 = standardize(&s).unwrap().values;
        let scaled = SubjectStack::new(g.clone(), n, v.iter().map(|x| 3.5 * x).collect()).unwrap();
        let x1 = standardize(&scaled).unwrap().values;
        for (a, b) in x0.iter().zip(&x1) {
            assert!((a - b).abs() < 1e-12);
        }
        let mu = 0.7;
        let shifted = SubjectStack::new(g, n, v.iter().map(|x| x + mu).collect()).unwrap();
        let x2 = standardize(&shifted).unwrap().values;
        for vox in 0..9 {
            let (_, sd) = s.mean_sd(vox);
            let want = x0[vox] + (n as f64).sqrt() * mu / sd;
            assert!((x2[vox] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn subject_major_round_trip() {
        let g = grid(&[3, 4]);
        let data: Vec<f64> = (0..36).map(|i| i as f64).collect();
        let s = SubjectStack::from_subject_major(g, 3, &data).unwrap();
        assert_eq!(s.voxel(1), &[1.0, 13.0, 25.0]);
        assert_eq!(s.to_subject_major(), data);
    }

    #[test]
    fn symmetric_correlation_round_trip() {
        // spectral square root of a kernel autocorrelation returns the kernel
        let k = gaussian_profile(2.0, 10, 1.0);
        let mut corr = vec![0.0; 21];
        let ac = autocorrelation(&k, 10);
        for l in 0..=10 {
            corr[10 + l] = ac[l];
            corr[10 - l] = ac[l];
        }
        let (p, clamped) = kernel_from_correlation(&corr).unwrap();
        assert!(clamped < 0.05);
        assert!(pearson(&p, &k) > 0.99);
        for j in 0..21 {
            assert!((p[j] - p[20 - j]).abs() < 1e-12);
        }
    }

    #[test]
    fn fitted_example_round_trips() {
        let fit = QuadraticMeanFit::from_beta(
            vec![13.03, -0.26, 0.20, 0.11, 0.39],
            vec![0.0; 3],
            0.0,
        )
        .unwrap();
        assert!((fit.theta_pp + 0.52).abs() < 1e-15);
        assert!((fit.center[0] - 0.2 / 0.52).abs() < 1e-12);
        let s = serde_json::to_string(&fit).unwrap();
        let back: QuadraticMeanFit = serde_json::from_str(&s).unwrap();
        assert_eq!(back, fit);
        assert!(QuadraticMeanFit::from_beta(vec![1.0, 0.1, 0.0], vec![0.0], 0.0).is_err());
    }

    fn planted(g: &GridSpec, beta: &[f64], origin: &[f64]) -> Vec<f64> {
        (0..g.len())
            .map(|f| {
                let s: Vec<f64> = g.position(&g.unravel(f)).iter().zip(origin).map(|(p, o)| p - o).collect();
                let r2: f64 = s.iter().map(|x| x * x).sum();
                beta[0] + beta[1] * r2 + s.iter().zip(&beta[2..]).map(|(x, b)| x * b).sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn exact_recovery_on_noiseless_paraboloid() {
        let g = grid(&[12, 12, 12]);
        let bx = BoxSpec { lo: vec![3, 3, 3], size: vec![6, 6, 6] };
        let origin = vec![5.5; 3];
        let beta = [13.03, -0.26, 0.20, 0.11, 0.39];
        let f = planted(&g, &beta, &origin);
        let fit = fit_quadratic_mean(&f, &g, &bx).unwrap();
        for (a, b) in fit.beta.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(fit.residual_rmse < 1e-10);
    }

    #[test]
    fn translation_equivariance() {
        let g = grid(&[20, 20]);
        let beta = [3.0, -0.1, 0.3, -0.2];
        let f = planted(&g, &beta, &[9.0, 9.0]);
        let a = fit_quadratic_mean(&f, &g, &BoxSpec { lo: vec![5, 5], size: vec![6, 6] }).unwrap();
        let b = fit_quadratic_mean(&f, &g, &BoxSpec { lo: vec![8, 7], size: vec![6, 6] }).unwrap();
        assert!((a.theta0 - b.theta0).abs() < 1e-9);
        assert!((a.theta_pp - b.theta_pp).abs() < 1e-9);
        for k in 0..2 {
            assert!((a.center[k] - b.center[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn design_checks() {
        let g = grid(&[10]);
        let f = vec![0.0; 10];
        assert!(fit_quadratic_mean(&f, &g, &BoxSpec { lo: vec![0], size: vec![2] }).is_err());
        assert!(fit_quadratic_mean(&f, &g, &BoxSpec { lo: vec![8], size: vec![5] }).is_err());
        // flat data gives β1 = 0: not concave
        let r = fit_quadratic_mean(&vec![1.0; 10], &g, &BoxSpec { lo: vec![2], size: vec![6] });
        assert!(matches!(r, Err(Error::Estimation(_))));
    }

    #[test]
    fn gaussian_kernel_gives_unit_kappa() {
        let k = gaussian_profile(3.0, 12, 1.0);
        let est = KernelEstimate {
            implied_correlation: autocorrelation(&k, 12),
            radial_profile: k,
            empirical_correlation: vec![],
            clamped_fraction: 0.0,
            subdomain: grid(&[25]),
            center: vec![12],
        };
        let ic = implied_covariance(&est).unwrap();
        assert_eq!(ic.method, CovarianceMethod::GaussianFit);
        assert!((ic.gaussian_sd - 3.0).abs() < 1e-4);
        assert_eq!(ic.cov.kappa(), 1.0);
    }

    #[test]
    fn finite_differences_for_non_gaussian_kernel() {
        // triangle-free smooth non-Gaussian kernel: a sum of two Gaussians
        let a = gaussian_profile(1.5, 15, 1.0);
        let b = gaussian_profile(5.0, 15, 1.0);
        let mut k: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
        k.iter_mut().for_each(|v| *v /= norm);
        let c = autocorrelation(&k, 15);
        let est = KernelEstimate {
            implied_correlation: c.clone(),
            radial_profile: k,
            empirical_correlation: vec![],
            clamped_fraction: 0.0,
            subdomain: grid(&[31]),
            center: vec![15],
        };
        let ic = implied_covariance(&est).unwrap();
        assert_eq!(ic.method, CovarianceMethod::FiniteDifference);
        // second-order differences as a rough cross-check
        let c2 = 2.0 * (c[1] - c[0]);
        assert!((ic.cov.rho_prime() - c2 / 2.0).abs() < 0.1 * c2.abs());
    }
}
