//! Monte Carlo engine: smoothed white-noise fields, grid peak counting and
//! GOI matrix sampling.
//!
//! Replicate `b` of a run with master seed `m` draws its white noise from a
//! ChaCha8 stream keyed by `m` with stream id `b`, so every replicate can be
//! regenerated on its own and results do not depend on the thread count.
//! Peak counts are accumulated as integers, which makes the reduction exact.

use std::sync::Arc;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MeanModel;

/// Regular grid; point `i` along an axis sits at coordinate `i·spacing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    #[serde(default = "unit_spacing")]
    pub spacing: f64,
}

fn unit_spacing() -> f64 {
    1.0
}

impl GridSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        let g = GridSpec { dims, spacing: 1.0 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.len() > 3 {
            return Err(Error::Parameter(format!(
                "grid must have 1 to 3 axes, got {}",
                self.dims.len()
            )));
        }
        if self.dims.iter().any(|&d| d < 3) {
            return Err(Error::Parameter(format!(
                "every grid axis needs at least 3 points, got {:?}",
                self.dims
            )));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Parameter(format!("grid spacing must be positive, got {}", self.spacing)));
        }
        Ok(())
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides (last axis fastest).
    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.ndim()];
        for a in (0..self.ndim()).rev() {
            idx[a] = flat % self.dims[a];
            flat /= self.dims[a];
        }
        idx
    }

    pub fn position(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| i as f64 * self.spacing).collect()
    }

    fn is_interior(&self, idx: &[usize]) -> bool {
        idx.iter().zip(&self.dims).all(|(&i, &d)| i > 0 && i + 1 < d)
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * dims[a + 1];
    }
    s
}

fn unravel(dims: &[usize], mut flat: usize, out: &mut [usize]) {
    for a in (0..dims.len()).rev() {
        out[a] = flat % dims[a];
        flat /= dims[a];
    }
}

/// Discrete smoothing kernel on a cube of `2·half_width + 1` points per
/// axis, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub dim: usize,
    pub half_width: usize,
    pub values: Vec<f64>,
}

impl Kernel {
    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Sampled Gaussian `exp(−‖s‖²/(2ν²))` truncated to the cube of half-width
/// `trunc_radius`, scaled to unit L2 norm so that smoothing unit white noise
/// gives unit variance. The smoothed noise has correlation
/// `exp(−d²/(4ν²))` at distance `d` (up to discretization).
pub fn gaussian_kernel(nu: f64, trunc_radius: f64, grid: &GridSpec) -> Result<Kernel> {
    grid.validate()?;
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Parameter(format!("kernel sd must be positive, got {nu}")));
    }
    if !(trunc_radius >= 4.0 * nu) || !trunc_radius.is_finite() {
        return Err(Error::Parameter(format!(
            "truncation radius {trunc_radius} is below 4 kernel sds ({})",
            4.0 * nu
        )));
    }
    let half = (trunc_radius / grid.spacing).floor() as usize;
    let side = 2 * half + 1;
    let dim = grid.ndim();
    let profile: Vec<f64> = (0..side)
        .map(|i| {
            let x = (i as f64 - half as f64) * grid.spacing;
            (-x * x / (2.0 * nu * nu)).exp()
        })
        .collect();
    let n = side.pow(dim as u32);
    let dims = vec![side; dim];
    let mut idx = vec![0; dim];
    let mut values = Vec::with_capacity(n);
    for flat in 0..n {
        unravel(&dims, flat, &mut idx);
        values.push(idx.iter().map(|&i| profile[i]).product::<f64>());
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(Kernel { dim, half_width: half, values })
}

/// Convolution back end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConvMethod {
    /// FFT when any padded axis has at least 64 points or the direct sum
    /// would exceed 2²⁶ multiply-adds; direct otherwise.
    #[default]
    Auto,
    Direct,
    Fft,
}

/// How the smoothed noise is scaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Rely on the unit L2 norm of the kernel.
    #[default]
    Theoretical,
    /// Additionally rescale each realization to zero mean and unit SD over
    /// the grid.
    Empirical,
}

/// A realization of `X = Z + θ` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate_index: u64,
}

struct FftPlan {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    kernel_hat: Vec<Complex<f64>>,
}

enum Backend {
    Direct { offsets: Vec<usize> },
    Fft(FftPlan),
}

/// Reusable smoother for one grid and kernel: white noise is drawn on the
/// grid padded by the kernel half-width on each side and only fully
/// supported outputs are kept, so every grid point sees stationary noise.
pub struct Synthesizer {
    grid: GridSpec,
    kernel: Kernel,
    padded: Vec<usize>,
    backend: Backend,
}

/// Smallest integer `>= n` whose prime factors are 2, 3 and 5.
fn good_fft_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn fft_nd(data: &mut [Complex<f64>], shape: &[usize], plans: &[Arc<dyn Fft<f64>>], line: &mut Vec<Complex<f64>>) {
    let st = strides(shape);
    let total: usize = shape.iter().product();
    for (a, plan) in plans.iter().enumerate() {
        let n = shape[a];
        let s = st[a];
        line.resize(n, Complex::new(0.0, 0.0));
        let outer = total / (n * s);
        for o in 0..outer {
            for i in 0..s {
                let start = o * n * s + i;
                for k in 0..n {
                    line[k] = data[start + k * s];
                }
                plan.process(line);
                for k in 0..n {
                    data[start + k * s] = line[k];
                }
            }
        }
    }
}

impl Synthesizer {
    pub fn new(grid: &GridSpec, kernel: &Kernel, method: ConvMethod) -> Result<Self> {
        grid.validate()?;
        if kernel.dim != grid.ndim() {
            return Err(Error::Dimension(format!(
                "kernel has {} axes, grid has {}",
                kernel.dim,
                grid.ndim()
            )));
        }
        let side = kernel.side();
        if kernel.values.len() != side.pow(kernel.dim as u32) {
            return Err(Error::Dimension("kernel value count does not match its side length".into()));
        }
        let padded: Vec<usize> = grid.dims.iter().map(|&d| d + side - 1).collect();
        let direct_cost = grid.len() as f64 * kernel.values.len() as f64;
        let use_fft = match method {
            ConvMethod::Direct => false,
            ConvMethod::Fft => true,
            ConvMethod::Auto => padded.iter().any(|&p| p >= 64) || direct_cost > (1u64 << 26) as f64,
        };
        let backend = if use_fft {
            let shape: Vec<usize> = padded.iter().map(|&p| good_fft_size(p)).collect();
            let mut planner = FftPlanner::<f64>::new();
            let forward: Vec<_> = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
            let inverse: Vec<_> = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
            let total: usize = shape.iter().product();
            let mut kernel_hat = vec![Complex::new(0.0, 0.0); total];
            let kdims = vec![side; kernel.dim];
            let st = strides(&shape);
            let mut idx = vec![0; kernel.dim];
            for (flat, &v) in kernel.values.iter().enumerate() {
                unravel(&kdims, flat, &mut idx);
                let pos: usize = idx.iter().zip(&st).map(|(i, s)| i * s).sum();
                kernel_hat[pos] = Complex::new(v, 0.0);
            }
            let mut line = Vec::new();
            fft_nd(&mut kernel_hat, &shape, &forward, &mut line);
            Backend::Fft(FftPlan { shape, forward, inverse, kernel_hat })
        } else {
            let kdims = vec![side; kernel.dim];
            let pst = strides(&padded);
            let mut idx = vec![0; kernel.dim];
            let offsets = (0..kernel.values.len())
                .map(|flat| {
                    unravel(&kdims, flat, &mut idx);
                    idx.iter().zip(&pst).map(|(i, s)| (side - 1 - i) * s).sum()
                })
                .collect();
            Backend::Direct { offsets }
        };
        Ok(Self { grid: grid.clone(), kernel: kernel.clone(), padded, backend })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn uses_fft(&self) -> bool {
        matches!(self.backend, Backend::Fft(_))
    }

    fn white_noise(&self, master_seed: u64, replicate_index: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(replicate_index);
        let n: usize = self.padded.iter().product();
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Valid-mode convolution of padded white noise with the kernel.
    fn smooth(&self, noise: &[f64]) -> Vec<f64> {
        let side = self.kernel.side();
        let dims = &self.grid.dims;
        let ndim = dims.len();
        let mut idx = vec![0; ndim];
        let mut out = Vec::with_capacity(self.grid.len());
        match &self.backend {
            Backend::Direct { offsets } => {
                let pst = strides(&self.padded);
                for flat in 0..self.grid.len() {
                    unravel(dims, flat, &mut idx);
                    let base: usize = idx.iter().zip(&pst).map(|(i, s)| i * s).sum();
                    let v: f64 = self
                        .kernel
                        .values
                        .iter()
                        .zip(offsets)
                        .map(|(k, &o)| k * noise[base + o])
                        .sum();
                    out.push(v);
                }
            }
            Backend::Fft(plan) => {
                let total: usize = plan.shape.iter().product();
                let st = strides(&plan.shape);
                let mut buf = vec![Complex::new(0.0, 0.0); total];
                let mut pidx = vec![0; ndim];
                for (flat, &v) in noise.iter().enumerate() {
                    unravel(&self.padded, flat, &mut pidx);
                    let pos: usize = pidx.iter().zip(&st).map(|(i, s)| i * s).sum();
                    buf[pos] = Complex::new(v, 0.0);
                }
                let mut line = Vec::new();
                fft_nd(&mut buf, &plan.shape, &plan.forward, &mut line);
                for (b, k) in buf.iter_mut().zip(&plan.kernel_hat) {
                    *b *= k;
                }
                fft_nd(&mut buf, &plan.shape, &plan.inverse, &mut line);
                let scale = 1.0 / total as f64;
                for flat in 0..self.grid.len() {
                    unravel(dims, flat, &mut idx);
                    let pos: usize = idx.iter().zip(&st).map(|(i, s)| (i + side - 1) * s).sum();
                    out.push(buf[pos].re * scale);
                }
            }
        }
        out
    }

    /// Smoothed unit-variance noise for one replicate.
    pub fn noise(&self, master_seed: u64, replicate_index: u64, norm: Normalization) -> Vec<f64> {
        let mut z = self.smooth(&self.white_noise(master_seed, replicate_index));
        if norm == Normalization::Empirical {
            let n = z.len() as f64;
            let m = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            z.iter_mut().for_each(|v| *v = (*v - m) / sd);
        }
        z
    }

    pub fn sample(
        &self,
        mean: &MeanModel,
        master_seed: u64,
        replicate_index: u64,
        norm: Normalization,
    ) -> Result<FieldSample> {
        let theta = mean_on_grid(mean, &self.grid)?;
        let mut values = self.noise(master_seed, replicate_index, norm);
        values.iter_mut().zip(&theta).for_each(|(v, t)| *v += t);
        Ok(FieldSample { grid: self.grid.clone(), values, seed: master_seed, replicate_index })
    }
}

/// `θ(s)` evaluated at every grid point.
pub fn mean_on_grid(mean: &MeanModel, grid: &GridSpec) -> Result<Vec<f64>> {
    if mean.dim() != grid.ndim() {
        return Err(Error::Dimension(format!(
            "mean center has {} coordinates, grid has {} axes",
            mean.dim(),
            grid.ndim()
        )));
    }
    Ok((0..grid.len()).map(|f| mean.value(&grid.position(&grid.unravel(f)))).collect())
}

/// One replicate of `white noise ⊛ kernel + θ`. Builds a fresh
/// [`Synthesizer`]; reuse one directly when drawing many replicates.
pub fn synthesize_field(
    grid: &GridSpec,
    kernel: &Kernel,
    mean: &MeanModel,
    master_seed: u64,
    replicate_index: u64,
) -> Result<FieldSample> {
    Synthesizer::new(grid, kernel, ConvMethod::Auto)?.sample(
        mean,
        master_seed,
        replicate_index,
        Normalization::Theoretical,
    )
}

/// Interior grid points within `radius` of `center`.
pub fn ball_mask(grid: &GridSpec, center: &[f64], radius: f64) -> Result<Vec<bool>> {
    if center.len() != grid.ndim() {
        return Err(Error::Dimension(format!(
            "center has {} coordinates, grid has {} axes",
            center.len(),
            grid.ndim()
        )));
    }
    let r2 = radius * radius * (1.0 + 1e-12);
    Ok((0..grid.len())
        .map(|f| {
            let idx = grid.unravel(f);
            let d2: f64 = grid.position(&idx).iter().zip(center).map(|(p, c)| (p - c) * (p - c)).sum();
            d2 <= r2 && grid.is_interior(&idx)
        })
        .collect())
}

/// Grid peaks: locations and heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub locations: Vec<Vec<usize>>,
    pub heights: Vec<f64>,
}

/// Precomputed mask points and Moore-neighbor offsets.
struct PeakScanner {
    points: Vec<usize>,
    neighbors: Vec<isize>,
}

impl PeakScanner {
    fn new(grid: &GridSpec, mask: &[bool]) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "mask has {} entries, grid has {} points",
                mask.len(),
                grid.len()
            )));
        }
        let points: Vec<usize> = (0..grid.len())
            .filter(|&f| mask[f] && grid.is_interior(&grid.unravel(f)))
            .collect();
        if points.is_empty() {
            return Err(Error::Parameter("domain mask has no interior grid points".into()));
        }
        let st = grid.strides();
        let n = grid.ndim();
        let mut neighbors = Vec::with_capacity(3usize.pow(n as u32) - 1);
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let mut off = 0isize;
            let mut zero = true;
            for s in st.iter().rev() {
                let d = (c % 3) as isize - 1;
                c /= 3;
                zero &= d == 0;
                off += d * *s as isize;
            }
            if !zero {
                neighbors.push(off);
            }
        }
        Ok(Self { points, neighbors })
    }

    fn heights<'a>(&'a self, values: &'a [f64]) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.points.iter().filter_map(move |&p| {
            let v = values[p];
            self.neighbors
                .iter()
                .all(|&o| v > values[(p as isize + o) as usize])
                .then_some((p, v))
        })
    }
}

/// Points of `field` inside `mask` that strictly exceed all `3^N − 1`
/// Moore neighbors and have height above `u`. Grid borders never qualify.
pub fn find_local_maxima(field: &FieldSample, mask: &[bool], u: f64) -> Result<PeakSet> {
    if field.values.len() != field.grid.len() {
        return Err(Error::Dimension("field value count does not match its grid".into()));
    }
    let scanner = PeakScanner::new(&field.grid, mask)?;
    let mut out = PeakSet { locations: Vec::new(), heights: Vec::new() };
    for (p, h) in scanner.heights(&field.values) {
        if h > u {
            out.locations.push(field.grid.unravel(p));
            out.heights.push(h);
        }
    }
    Ok(out)
}

/// Everything needed to simulate one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSetup {
    pub grid: GridSpec,
    /// Standard deviation of the Gaussian smoothing kernel.
    pub kernel_sd: f64,
    /// Kernel truncation radius; defaults to four kernel SDs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_radius: Option<f64>,
    pub mean: MeanModel,
    /// Radius of the ball around the mean's center in which peaks count.
    pub domain_radius: f64,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub conv_method: ConvMethod,
}

/// Empirical power and mean peak count at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCSummary {
    #[serde(rename = "B")]
    pub b: usize,
    pub u: f64,
    pub power_hat: f64,
    pub e_mu_hat: f64,
    pub se_power: f64,
    pub se_e_mu: f64,
    pub master_seed: u64,
}

fn install<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Parameter("thread count must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}"))),
    }
}

/// Simulates `b` replicates and reports empirical power
/// `mean(1{M_u ≥ 1})` and `mean(M_u)` for every threshold in `u_grid`,
/// from a single pass over the replicates. `threads = None` uses the
/// global pool; results are identical for any thread count.
pub fn mc_power_and_emu(
    b: usize,
    u_grid: &[f64],
    setup: &SimulationSetup,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<Vec<MCSummary>> {
    if b == 0 {
        return Err(Error::Parameter("replicate count must be at least 1".into()));
    }
    if u_grid.iter().any(|u| u.is_nan()) {
        return Err(Error::Parameter("threshold is NaN".into()));
    }
    setup.mean.validate()?;
    let trunc = setup.trunc_radius.unwrap_or(4.0 * setup.kernel_sd);
    let kernel = gaussian_kernel(setup.kernel_sd, trunc, &setup.grid)?;
    let synth = Synthesizer::new(&setup.grid, &kernel, setup.conv_method)?;
    let theta = mean_on_grid(&setup.mean, &setup.grid)?;
    let mask = ball_mask(&setup.grid, setup.mean.center(), setup.domain_radius)?;
    let scanner = PeakScanner::new(&setup.grid, &mask)?;
    log::info!(
        "simulating {b} replicates on grid {:?} ({} domain points, {} convolution)",
        setup.grid.dims,
        scanner.points.len(),
        if synth.uses_fft() { "fft" } else { "direct" }
    );

    let per_replicate = |rep: usize| -> Vec<u64> {
        let mut x = synth.noise(master_seed, rep as u64, setup.normalization);
        x.iter_mut().zip(&theta).for_each(|(v, t)| *v += t);
        let heights: Vec<f64> = scanner.heights(&x).map(|(_, h)| h).collect();
        u_grid.iter().map(|&u| heights.iter().filter(|&&h| h > u).count() as u64).collect()
    };
    let counts: Vec<Vec<u64>> = install(threads, || (0..b).into_par_iter().map(per_replicate).collect())?;

    let bf = b as f64;
    Ok(u_grid
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let (mut hits, mut sum, mut sum_sq) = (0u64, 0u64, 0u64);
            for c in &counts {
                hits += (c[i] > 0) as u64;
                sum += c[i];
                sum_sq += c[i] * c[i];
            }
            let p = hits as f64 / bf;
            let m = sum as f64 / bf;
            let var = (sum_sq as f64 / bf - m * m).max(0.0);
            MCSummary {
                b,
                u,
                power_hat: p,
                e_mu_hat: m,
                se_power: (p * (1.0 - p) / bf).sqrt(),
                se_e_mu: (var / bf).sqrt(),
                master_seed,
            }
        })
        .collect())
}

/// Sampler for GOI(c): symmetric `N × N` Gaussian matrices with
/// `E[G_ij G_kl] = ½(δ_ik δ_jl + δ_il δ_jk) + c δ_ij δ_kl`.
#[derive(Debug, Clone, Copy)]
pub struct GoiSampler {
    n: usize,
    alpha: f64,
}

impl GoiSampler {
    pub fn new(n: usize, c: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Parameter(format!("GOI dimension must be 1, 2 or 3, got {n}")));
        }
        if !(c >= -1.0 / n as f64) || !c.is_finite() {
            return Err(Error::Parameter(format!(
                "GOI parameter c = {c} is below -1/{n}"
            )));
        }
        // diagonal = z + α(Σz)·1 has covariance I + (2α + Nα²)J = I + cJ
        let alpha = ((1.0 + n as f64 * c).max(0.0).sqrt() - 1.0) / n as f64;
        Ok(Self { n, alpha })
    }

    /// One draw, row-major.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n * n];
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let shift = self.alpha * z.iter().sum::<f64>();
        for i in 0..n {
            g[i * n + i] = z[i] + shift;
        }
        for i in 0..n {
            for j in i + 1..n {
                let v: f64 = rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2;
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    }

    /// Eigenvalues of one draw, ascending.
    pub fn sample_eigenvalues<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        let g = self.sample(rng);
        symmetric_eigenvalues(self.n, &g)
    }
}

fn symmetric_eigenvalues(n: usize, g: &[f64]) -> [f64; 3] {
    let mut ev = [f64::NAN; 3];
    match n {
        1 => ev[0] = g[0],
        2 => {
            let (a, b, d) = (g[0], g[1], g[3]);
            let m = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            ev[0] = m - r;
            ev[1] = m + r;
        }
        _ => {
            let m = Matrix3::from_row_slice(g);
            let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            v.sort_by(f64::total_cmp);
            ev.copy_from_slice(&v);
        }
    }
    ev
}

/// A single GOI(c) draw from `seed`.
pub fn sample_goi(n: usize, c: f64, seed: u64) -> Result<Vec<f64>> {
    let s = GoiSampler::new(n, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(s.sample(&mut rng))
}

const MC_CHUNK: usize = 1 << 15;

/// Monte Carlo estimate of `H(x̃) = E[∏|λ_j − b|·1{λ_max < b}]`,
/// `b = κx̃/√2`, under GOI((1 − κ²)/2), with its standard error.
/// Samples are drawn in fixed chunks with one RNG stream each, so the
/// estimate does not depend on the thread count.
pub fn mc_h(x_tilde: f64, kappa: f64, n: usize, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(Error::Parameter("need at least 2 Monte Carlo samples".into()));
    }
    if !(kappa > 0.0) {
        return Err(Error::Parameter(format!("kappa must be positive, got {kappa}")));
    }
    let sampler = GoiSampler::new(n, (1.0 - kappa * kappa) / 2.0)?;
    let b = kappa * x_tilde / std::f64::consts::SQRT_2;
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let ev = sampler.sample_eigenvalues(&mut rng);
                if ev[n - 1] < b {
                    let v: f64 = ev[..n].iter().map(|l| (l - b).abs()).product();
                    s += v;
                    s2 += v * v;
                }
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let nf = n_samples as f64;
    let m = s / nf;
    let var = (s2 / nf - m * m).max(0.0) * nf / (nf - 1.0);
    Ok((m, (var / nf).sqrt()))
}
