//! Scalar special functions and one-dimensional adaptive quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate to a few ulps across the real line.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ψ(x) = φ(x) + xΦ(x) = ∫_{-∞}^x Φ(y) dy`.
///
/// `erfc` keeps relative accuracy in the lower tail, so the cancellation
/// between the two terms costs only about `log10(x²)` digits there.
#[inline]
pub fn psi(x: f64) -> f64 {
    norm_pdf(x) + x * norm_cdf(x)
}

/// Covariance matrix of a centered bivariate normal vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateCov {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl BivariateCov {
    pub fn new(a11: f64, a12: f64, a22: f64) -> Result<Self> {
        let det = a11 * a22 - a12 * a12;
        if !(a11 > 0.0 && a22 > 0.0 && det > 0.0) || !a12.is_finite() {
            return Err(Error::Parameter(format!(
                "bivariate covariance ({a11}, {a12}; {a12}, {a22}) is not positive definite"
            )));
        }
        Ok(Self { a11, a12, a22 })
    }

    pub fn correlation(&self) -> f64 {
        self.a12 / (self.a11 * self.a22).sqrt()
    }
}

/// `P(X1 <= b1, X2 <= b2)` for a centered bivariate normal with covariance
/// `sigma`. Either bound may be infinite.
pub fn bvn_cdf(sigma: &BivariateCov, b1: f64, b2: f64) -> f64 {
    let h = b1 / sigma.a11.sqrt();
    let k = b2 / sigma.a22.sqrt();
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return norm_cdf(k);
    }
    if k == f64::INFINITY {
        return norm_cdf(h);
    }
    bvn_upper(-h, -k, sigma.correlation())
}

// Gauss-Legendre half rules (weight, abscissa) on [-1, 1], 6, 12 and 20 points.
const GL6: [(f64, f64); 3] = [
    (0.171_324_492_379_170_5, -0.932_469_514_203_152_2),
    (0.360_761_573_048_138_4, -0.661_209_386_466_264_7),
    (0.467_913_934_572_690_4, -0.238_619_186_083_197_0),
];
const GL12: [(f64, f64); 6] = [
    (0.047_175_336_386_511_77, -0.981_560_634_246_719_1),
    (0.106_939_325_995_318_3, -0.904_117_256_370_475_0),
    (0.160_078_328_543_346_4, -0.769_902_674_194_305_0),
    (0.203_167_426_723_065_9, -0.587_317_954_286_617_1),
    (0.233_492_536_538_354_7, -0.367_831_498_998_180_2),
    (0.249_147_045_813_402_9, -0.125_233_408_511_469_2),
];
const GL20: [(f64, f64); 10] = [
    (0.017_614_007_139_152_12, -0.993_128_599_185_094_9),
    (0.040_601_429_800_386_94, -0.963_971_927_277_913_8),
    (0.062_672_048_334_109_06, -0.912_234_428_251_325_9),
    (0.083_276_741_576_704_75, -0.839_116_971_822_218_8),
    (0.101_930_119_817_240_4, -0.746_331_906_460_150_8),
    (0.118_194_531_961_518_4, -0.636_053_680_726_515_0),
    (0.131_688_638_449_176_6, -0.510_867_001_950_827_1),
    (0.142_096_109_318_382_1, -0.373_706_088_715_419_6),
    (0.149_172_986_472_603_7, -0.227_785_851_141_645_1),
    (0.152_753_387_130_725_9, -0.076_526_521_133_497_33),
];

/// `P(X > dh, Y > dk)` for standard normals with correlation `r`.
///
/// Drezner–Wesolowsky integration in Genz's formulation, with the
/// large-|r| branch expanded around the degenerate case.
fn bvn_upper(dh: f64, dk: f64, r: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for &(w, x) in rule {
            for sgn in [1.0, -1.0] {
                let sn = (asr * (sgn * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * two_pi) + norm_cdf(-h) * norm_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(b_s / a_s + hk) / 2.0).exp()
            * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        if hk > -160.0 {
            let b = b_s.sqrt();
            bvn -= (-hk / 2.0).exp()
                * two_pi.sqrt()
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(w, x) in rule {
            let xs = (a * (x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * ((-b_s / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                    - (-(b_s / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            let xs = a_s * (1.0 - x).powi(2) / 4.0;
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * (-(b_s / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                    - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        -bvn + (norm_cdf(-h) - norm_cdf(-k)).max(0.0)
    }
}

// 21-point Gauss-Kronrod rule: Kronrod abscissae (descending, last is the
// center), Kronrod weights, and the 10-point Gauss weights attached to the
// odd-indexed abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_812_170,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { a, b, value, err }
}

/// Value and error estimate returned by [`adaptive_quad`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err: f64,
}

/// Default maximum number of bisections.
pub const MAX_SUBDIVISIONS: usize = 2000;

/// Adaptive 21-point Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bounds may be infinite. A semi-infinite range `[a, ∞)` is mapped onto
/// `(0, 1]` through `x = a + (1 - t)/t`, which truncates the tail where the
/// transformed integrand underflows; doubly infinite ranges fold both tails
/// into one such map. Panels are bisected in order of decreasing error until
/// the summed error estimate is at most `max(abs_tol, rel_tol·|value|)`.
pub fn adaptive_quad<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    adaptive_quad_limit(f, a, b, abs_tol, rel_tol, MAX_SUBDIVISIONS)
}

pub fn adaptive_quad_limit<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadResult> {
    if !(abs_tol > 0.0 && rel_tol > 0.0) {
        return Err(Error::Parameter("quadrature tolerances must be positive".into()));
    }
    if a.is_nan() || b.is_nan() {
        return Err(Error::Parameter("quadrature bound is NaN".into()));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, err: 0.0 });
    }
    if a > b {
        let r = adaptive_quad_limit(f, b, a, abs_tol, rel_tol, max_subdivisions)?;
        return Ok(QuadResult { value: -r.value, err: r.err });
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => bisect(&f, a, b, abs_tol, rel_tol, max_subdivisions),
        (true, false) => {
            let g = |t: f64| {
                let s = (1.0 - t) / t;
                f(a + s) / (t * t)
            };
            bisect(&g, 0.0, 1.0, abs_tol, rel_tol, max_subdivisions)
        }
        (false, true) => {
            let g = |t: f64| {
                let s = (1.0 - t) / t;
                f(b - s) / (t * t)
            };
            bisect(&g, 0.0, 1.0, abs_tol, rel_tol, max_subdivisions)
        }
        (false, false) => {
            let g = |t: f64| {
                let s = (1.0 - t) / t;
                (f(s) + f(-s)) / (t * t)
            };
            bisect(&g, 0.0, 1.0, abs_tol, rel_tol, max_subdivisions)
        }
    }
}

fn bisect<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadResult> {
    let first = gk21(f, a, b);
    if !first.value.is_finite() {
        return Err(Error::Quadrature { value: first.value, err: f64::INFINITY });
    }
    let mut heap = BinaryHeap::new();
    let mut value = first.value;
    let mut err = first.err;
    heap.push(first);
    let mut splits = 0;
    while err > abs_tol.max(rel_tol * value.abs()) {
        if splits >= max_subdivisions {
            return Err(Error::Quadrature { value, err });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(Error::Quadrature { value, err });
        }
        let left = gk21(f, worst.a, mid);
        let right = gk21(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        splits += 1;
        if splits % 64 == 0 {
            // Refresh running sums to avoid cancellation drift.
            value = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.err).sum();
        }
    }
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let err: f64 = heap.iter().map(|p| p.err).sum();
    if !value.is_finite() {
        return Err(Error::Quadrature { value, err });
    }
    Ok(QuadResult { value, err })
}
