//! Command implementations behind the `peakpower` binary.
//!
//! Every command reads one JSON config (flat schema per command, unknown
//! keys rejected). CSV outputs use a fixed column order and 17 significant
//! digits; when written to a file they get a `<out>.json` sidecar holding
//! the fully resolved config, which can be passed back as `--config` to
//! reproduce the output byte for byte.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::emu::{self, PowerResult};
use crate::error::{Error, Result};
use crate::estimate::{self, BoxSpec, ImpliedCovariance, KernelEstimate, QuadraticMeanFit, SubjectStack};
use crate::model::{CovarianceModel, DomainSpec, MeanModel};
use crate::randfield::{self, ConvMethod, GridSpec, MCSummary, Normalization, SimulationSetup};

/// Formats a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Evenly spaced thresholds from `min` to `max` inclusive.
pub fn u_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step > 0.0 && step.is_finite() && max >= min) {
        return Err(Error::Config(format!("invalid threshold grid {min}..{max} step {step}")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min + i as f64 * step).collect())
}

fn check_u_grid(u: &[f64]) -> Result<()> {
    if u.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("thresholds in a grid must be finite".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------- configs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub cov: CovarianceModel,
    pub mean: MeanModel,
    pub domain: DomainSpec,
    pub u_grid: Vec<f64>,
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.mean.validate()?;
        check_u_grid(&self.u_grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub grid: GridSpec,
    pub kernel_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_radius: Option<f64>,
    pub mean: MeanModel,
    pub domain_radius: f64,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub conv_method: ConvMethod,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub u_grid: Vec<f64>,
    /// Add theoretical columns next to the empirical ones.
    #[serde(default = "yes")]
    pub theory: bool,
}

fn yes() -> bool {
    true
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::Config("B must be at least 1".into()));
        }
        if self.seed.is_none() {
            return Err(Error::Config("simulation needs a seed (config \"seed\" or --seed)".into()));
        }
        self.grid.validate()?;
        self.mean.validate()?;
        check_u_grid(&self.u_grid)
    }

    pub fn setup(&self) -> SimulationSetup {
        SimulationSetup {
            grid: self.grid.clone(),
            kernel_sd: self.kernel_sd,
            trunc_radius: self.trunc_radius,
            mean: self.mean.clone(),
            domain_radius: self.domain_radius,
            normalization: self.normalization,
            conv_method: self.conv_method,
        }
    }

    /// The covariance implied by the smoothing kernel.
    pub fn covariance(&self) -> Result<CovarianceModel> {
        CovarianceModel::from_smoothing_kernel(self.kernel_sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub cov: CovarianceModel,
    pub dim: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Path to the bundle manifest, relative to the config file.
    pub bundle: PathBuf,
    /// Peak location in grid indices.
    pub peak: Vec<usize>,
    #[serde(default = "default_kernel_half_width")]
    pub kernel_half_width: usize,
    #[serde(default = "default_mean_box")]
    pub mean_box: usize,
    pub domain_radius: f64,
    #[serde(default = "default_power_u_grid")]
    pub u_grid: Vec<f64>,
}

fn default_kernel_half_width() -> usize {
    7
}

fn default_mean_box() -> usize {
    6
}

fn default_power_u_grid() -> Vec<f64> {
    u_grid(0.0, 6.0, 0.1).expect("static grid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoiOracleConfig {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    #[serde(default = "default_x_tilde")]
    pub x_tilde: Vec<f64>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_dims() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_kappas() -> Vec<f64> {
    vec![0.6, 1.0]
}

fn default_x_tilde() -> Vec<f64> {
    vec![-1.0, 0.0, 1.0, 2.0]
}

fn default_n_samples() -> usize {
    1_000_000
}

impl Default for GoiOracleConfig {
    fn default() -> Self {
        Self {
            dims: default_dims(),
            kappas: default_kappas(),
            x_tilde: default_x_tilde(),
            n_samples: default_n_samples(),
            seed: Some(0),
        }
    }
}

/// Reads a config, accepting either the bare config or a sidecar written
/// by an earlier run (`{"command", "config", ...}`).
pub fn load_config<T: DeserializeOwned>(path: &Path, command: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)?;
    let v = match v {
        Value::Object(ref m) if m.contains_key("command") && m.contains_key("config") => {
            let cmd = m["command"].as_str().unwrap_or_default();
            if cmd != command {
                return Err(Error::Config(format!(
                    "sidecar is for command {cmd:?}, not {command:?}"
                )));
            }
            m["config"].clone()
        }
        other => other,
    };
    serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
}

// --------------------------------------------------------------- commands

pub fn cmd_power(cfg: &PowerConfig) -> Result<PowerResult> {
    cfg.validate()?;
    emu::power_curve(&cfg.cov, &cfg.mean, &cfg.domain, &cfg.u_grid)
}

pub fn power_csv(r: &PowerResult) -> String {
    let mut s = String::from("u,e_mu,e_mu_adj,sharp_approx,quad_err\n");
    for i in 0..r.u_grid.len() {
        let sharp = r.sharp_approx.as_ref().map_or(f64::NAN, |v| v[i]);
        s += &format!(
            "{},{},{},{},{}\n",
            fmt_float(r.u_grid[i]),
            fmt_float(r.e_mu[i]),
            fmt_float(r.e_mu_adj[i]),
            fmt_float(sharp),
            fmt_float(r.quadrature_err[i])
        );
    }
    s
}

/// Empirical summaries with optional theory alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub summaries: Vec<MCSummary>,
    pub theory: Option<PowerResult>,
}

pub fn cmd_simulate(cfg: &SimulateConfig, threads: Option<usize>) -> Result<SimulationReport> {
    cfg.validate()?;
    let seed = cfg.seed.expect("validated");
    let summaries = randfield::mc_power_and_emu(cfg.b, &cfg.u_grid, &cfg.setup(), seed, threads)?;
    let theory = if cfg.theory {
        let domain = DomainSpec::ball(cfg.grid.ndim(), cfg.domain_radius)?;
        Some(emu::power_curve(&cfg.covariance()?, &cfg.mean, &domain, &cfg.u_grid)?)
    } else {
        None
    };
    Ok(SimulationReport { summaries, theory })
}

pub fn simulate_csv(r: &SimulationReport) -> String {
    let mut s = String::from("u,B,power_hat,se_power,e_mu_hat,se_e_mu,master_seed");
    if r.theory.is_some() {
        s += ",e_mu,e_mu_adj,sharp_approx";
    }
    s.push('\n');
    for (i, m) in r.summaries.iter().enumerate() {
        s += &format!(
            "{},{},{},{},{},{},{}",
            fmt_float(m.u),
            m.b,
            fmt_float(m.power_hat),
            fmt_float(m.se_power),
            fmt_float(m.e_mu_hat),
            fmt_float(m.se_e_mu),
            m.master_seed
        );
        if let Some(t) = &r.theory {
            let sharp = t.sharp_approx.as_ref().map_or(f64::NAN, |v| v[i]);
            s += &format!(",{},{},{}", fmt_float(t.e_mu[i]), fmt_float(t.e_mu_adj[i]), fmt_float(sharp));
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub u: f64,
    pub survival: f64,
    pub alpha: f64,
    pub dim: usize,
}

pub fn cmd_threshold(cfg: &ThresholdConfig) -> Result<ThresholdResult> {
    let u = emu::threshold_for_alpha(&cfg.cov, cfg.dim, cfg.alpha)?;
    Ok(ThresholdResult {
        u,
        survival: emu::null_overshoot_survival(&cfg.cov, cfg.dim, u)?,
        alpha: cfg.alpha,
        dim: cfg.dim,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub kernel: KernelEstimate,
    pub implied_cov: ImpliedCovariance,
    pub mean_fit: QuadraticMeanFit,
    pub zero_variance_voxels: usize,
    /// Ready-to-use config for the `power` command.
    pub power_config: PowerConfig,
}

/// Runs the estimation pipeline on an in-memory stack.
pub fn estimate_from_stack(stack: &SubjectStack, cfg: &EstimateConfig) -> Result<EstimateResult> {
    let ndim = stack.grid.ndim();
    if cfg.peak.len() != ndim {
        return Err(Error::Dimension(format!(
            "peak has {} coordinates, data has {ndim} axes",
            cfg.peak.len()
        )));
    }
    let bx = BoxSpec::around(&cfg.peak, cfg.mean_box);
    let mut mask = vec![false; stack.grid.len()];
    for (f, m) in mask.iter_mut().enumerate() {
        let idx = stack.grid.unravel(f);
        *m = idx.iter().enumerate().all(|(a, &i)| {
            let near_kernel = i + cfg.kernel_half_width >= cfg.peak[a] && i <= cfg.peak[a] + cfg.kernel_half_width;
            let in_box = i >= bx.lo[a] && i < bx.lo[a] + bx.size[a];
            near_kernel || in_box
        });
    }
    let x = estimate::standardize_within(stack, Some(&mask))?;
    let kernel = estimate::estimate_kernel(stack, &cfg.peak, cfg.kernel_half_width)?;
    let implied = estimate::implied_covariance(&kernel)?;
    let fit = estimate::fit_quadratic_mean(&x.values, &stack.grid, &bx)?;
    let power_config = PowerConfig {
        cov: implied.cov,
        mean: fit.to_mean_model()?,
        domain: DomainSpec::ball(ndim, cfg.domain_radius)?,
        u_grid: cfg.u_grid.clone(),
    };
    Ok(EstimateResult {
        kernel,
        implied_cov: implied,
        mean_fit: fit,
        zero_variance_voxels: x.zero_variance.len(),
        power_config,
    })
}

pub fn cmd_estimate(cfg: &EstimateConfig, base_dir: &Path) -> Result<EstimateResult> {
    let path = if cfg.bundle.is_absolute() { cfg.bundle.clone() } else { base_dir.join(&cfg.bundle) };
    let stack = read_volume_bundle(&path)?;
    estimate_from_stack(&stack, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoiOracleRow {
    pub dim: usize,
    pub kappa: f64,
    pub x_tilde: f64,
    pub h_closed_form: f64,
    pub h_mc: f64,
    pub se: f64,
    pub z_score: f64,
}

/// Closed-form `H` against GOI Monte Carlo on a grid of `(N, κ, x̃)`. Each
/// row uses its own seed, derived from the master seed and the row index.
pub fn cmd_goi_oracle(cfg: &GoiOracleConfig) -> Result<Vec<GoiOracleRow>> {
    if cfg.n_samples < 2 {
        return Err(Error::Config("n_samples must be at least 2".into()));
    }
    let seed = cfg.seed.ok_or_else(|| Error::Config("goi-oracle needs a seed".into()))?;
    let mut rows = Vec::new();
    let mut row = 0u64;
    for &dim in &cfg.dims {
        for &kappa in &cfg.kappas {
            for &x in &cfg.x_tilde {
                let closed = emu::h_nd(dim, x, kappa)?;
                let (mc, se) = randfield::mc_h(x, kappa, dim, cfg.n_samples, seed.wrapping_add(row << 32))?;
                let z = if se > 0.0 { (closed - mc) / se } else if closed == mc { 0.0 } else { f64::INFINITY };
                rows.push(GoiOracleRow { dim, kappa, x_tilde: x, h_closed_form: closed, h_mc: mc, se, z_score: z });
                row += 1;
            }
        }
    }
    Ok(rows)
}

pub fn goi_csv(rows: &[GoiOracleRow]) -> String {
    let mut s = String::from("dim,kappa,x_tilde,h_closed_form,h_mc,se,z_score\n");
    for r in rows {
        s += &format!(
            "{},{},{},{},{},{},{}\n",
            r.dim,
            fmt_float(r.kappa),
            fmt_float(r.x_tilde),
            fmt_float(r.h_closed_form),
            fmt_float(r.h_mc),
            fmt_float(r.se),
            fmt_float(r.z_score)
        );
    }
    s
}

// ---------------------------------------------------------- volume bundle

/// Manifest of a volume bundle. The payload holds `n_subjects` images one
/// after another, each row-major, as little-endian `f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub dims: Vec<usize>,
    pub n_subjects: usize,
    pub dtype: String,
    pub order: String,
    /// Payload file relative to the manifest; defaults to the manifest path
    /// with extension `.f32`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

fn payload_path(manifest_path: &Path, m: &BundleManifest) -> PathBuf {
    match &m.payload {
        Some(p) => manifest_path.parent().unwrap_or(Path::new(".")).join(p),
        None => manifest_path.with_extension("f32"),
    }
}

pub fn read_volume_bundle(manifest_path: &Path) -> Result<SubjectStack> {
    let text = fs::read_to_string(manifest_path)?;
    let m: BundleManifest =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad bundle manifest: {e}")))?;
    if m.dtype != "f32" || m.order != "row-major" {
        return Err(Error::Config(format!(
            "unsupported bundle layout dtype={:?} order={:?}",
            m.dtype, m.order
        )));
    }
    let grid = GridSpec::new(m.dims.clone())?;
    let bytes = fs::read(payload_path(manifest_path, &m))?;
    let expected = grid.len() * m.n_subjects * 4;
    if bytes.len() != expected {
        return Err(Error::Dimension(format!(
            "manifest/payload length mismatch: payload has {} bytes, manifest implies {expected}",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    SubjectStack::from_subject_major(grid, m.n_subjects, &data)
}

/// Writes `stack` as a manifest plus a `.f32` payload next to it.
pub fn write_volume_bundle(manifest_path: &Path, stack: &SubjectStack) -> Result<()> {
    let payload = manifest_path.with_extension("f32");
    let m = BundleManifest {
        dims: stack.grid.dims.clone(),
        n_subjects: stack.n_subjects,
        dtype: "f32".into(),
        order: "row-major".into(),
        payload: payload.file_name().map(|s| s.to_string_lossy().into_owned()),
    };
    let mut bytes = Vec::with_capacity(stack.values.len() * 4);
    for v in stack.to_subject_major() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(&payload, bytes)?;
    fs::write(manifest_path, serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

// ------------------------------------------------------------ entry point

#[derive(Debug, Parser)]
#[command(name = "peakpower", version, about = "Power of peak detection in smooth Gaussian random fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// JSON config (or a sidecar from an earlier run)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; stdout if omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed, overrides the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub u_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub u_max: Option<f64>,
    #[arg(long)]
    pub u_step: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Theoretical E[M_u] over a threshold grid
    Power(CommonArgs),
    /// Monte Carlo power and peak counts
    Simulate(CommonArgs),
    /// Null peak-height threshold for a level alpha
    Threshold(CommonArgs),
    /// Estimate kernel and mean from a volume bundle
    Estimate(CommonArgs),
    /// Closed-form H against GOI Monte Carlo
    GoiOracle(CommonArgs),
}

impl CommonArgs {
    fn config<T: DeserializeOwned>(&self, command: &str) -> Result<T> {
        let p = self
            .config
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{command} needs --config")))?;
        load_config(p, command)
    }

    fn u_override(&self) -> Result<Option<Vec<f64>>> {
        match (self.u_min, self.u_max, self.u_step) {
            (None, None, None) => Ok(None),
            (Some(a), Some(b), Some(s)) => u_grid(a, b, s).map(Some),
            _ => Err(Error::Config("--u-min, --u-max and --u-step go together".into())),
        }
    }

    fn base_dir(&self) -> PathBuf {
        self.config
            .as_ref()
            .and_then(|p| p.parent())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn emit(out: Option<&Path>, body: &str, sidecar: Option<Value>) -> Result<()> {
    match out {
        Some(p) => {
            fs::write(p, body)?;
            if let Some(v) = sidecar {
                let mut name = p.as_os_str().to_owned();
                name.push(".json");
                fs::write(PathBuf::from(name), serde_json::to_string_pretty(&v)? + "\n")?;
            }
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(body.as_bytes())?;
        }
    }
    Ok(())
}

fn sidecar<T: Serialize>(command: &str, cfg: &T, summary: Value) -> Result<Value> {
    Ok(json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(cfg)?,
        "summary": summary,
    }))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Power(a) => {
            let mut cfg: PowerConfig = a.config("power")?;
            if let Some(u) = a.u_override()? {
                cfg.u_grid = u;
            }
            let r = cmd_power(&cfg)?;
            let summary = json!({
                "e_m_total": r.e_m_total,
                "quadratic_approx": r.quadratic_approx,
                "max_quadrature_err": r.quadrature_err.iter().cloned().fold(0.0, f64::max),
            });
            emit(a.out.as_deref(), &power_csv(&r), Some(sidecar("power", &cfg, summary)?))
        }
        Command::Simulate(a) => {
            let mut cfg: SimulateConfig = a.config("simulate")?;
            if let Some(u) = a.u_override()? {
                cfg.u_grid = u;
            }
            if a.seed.is_some() {
                cfg.seed = a.seed;
            }
            let r = cmd_simulate(&cfg, a.threads)?;
            let summary = json!({
                "e_m_total": r.theory.as_ref().map(|t| t.e_m_total),
                "quadratic_approx": r.theory.as_ref().map(|t| t.quadratic_approx),
            });
            emit(a.out.as_deref(), &simulate_csv(&r), Some(sidecar("simulate", &cfg, summary)?))
        }
        Command::Threshold(a) => {
            let cfg: ThresholdConfig = a.config("threshold")?;
            let r = cmd_threshold(&cfg)?;
            let body = json!({ "command": "threshold", "config": cfg, "result": r });
            emit(a.out.as_deref(), &(serde_json::to_string_pretty(&body)? + "\n"), None)
        }
        Command::Estimate(a) => {
            let mut cfg: EstimateConfig = a.config("estimate")?;
            if let Some(u) = a.u_override()? {
                cfg.u_grid = u;
            }
            let r = cmd_estimate(&cfg, &a.base_dir())?;
            let body = json!({ "command": "estimate", "config": cfg, "result": r });
            emit(a.out.as_deref(), &(serde_json::to_string_pretty(&body)? + "\n"), None)
        }
        Command::GoiOracle(a) => {
            let mut cfg: GoiOracleConfig = match &a.config {
                Some(_) => a.config("goi-oracle")?,
                None => GoiOracleConfig::default(),
            };
            if a.seed.is_some() {
                cfg.seed = a.seed;
            }
            let run = || cmd_goi_oracle(&cfg);
            let rows = match a.threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Parameter(e.to_string()))?
                    .install(run)?,
                None => run()?,
            };
            let max_z = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
            let summary = json!({ "max_abs_z": max_z });
            emit(a.out.as_deref(), &goi_csv(&rows), Some(sidecar("goi-oracle", &cfg, summary)?))
        }
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Io(_) => 3,
        Error::Quadrature { .. } | Error::Solver(_) => 4,
        _ => 1,
    }
}

/// Parses arguments, runs the command and reports failures as JSON on
/// stderr. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let report = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            exit_code(&e)
        }
    }
}
