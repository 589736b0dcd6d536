//! Acceptance criteria, one test each. Every test writes a single
//! `PASS`/`FAIL` line to stderr (bypassing output capture) before asserting.

use std::io::Write;
use std::process::Command;
use std::sync::OnceLock;

use peakpower::cli::{self, EstimateConfig, GoiOracleConfig, SimulateConfig, SimulationReport};
use peakpower::emu::{self, power_curve};
use peakpower::estimate::{gaussian_profile, pearson, SubjectStack};
use peakpower::model::{CovarianceModel, DomainSpec, MeanModel, Threshold};
use peakpower::randfield::{gaussian_kernel, ConvMethod, GridSpec, Normalization, Synthesizer};
use peakpower::specfun::norm_cdf;

fn report(id: &str, name: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{status} criterion {id} ({name}): {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

const SEED: u64 = 20_240_917;

/// Reference experiment: 50 × 50 grid, radius-10 domain, Gaussian bump with
/// height 3 and bandwidth 7, smoothing kernel SD 5.
fn bump_simulation(b: usize, u_grid: Vec<f64>) -> SimulateConfig {
    SimulateConfig {
        grid: GridSpec::new(vec![50, 50]).unwrap(),
        kernel_sd: 5.0,
        trunc_radius: None,
        mean: MeanModel::gaussian_bump(3.0, 7.0, vec![25.0, 25.0]).unwrap(),
        domain_radius: 10.0,
        normalization: Normalization::Theoretical,
        conv_method: ConvMethod::Auto,
        b,
        seed: Some(SEED),
        u_grid,
        theory: true,
    }
}

fn bump_run() -> &'static SimulationReport {
    static RUN: OnceLock<SimulationReport> = OnceLock::new();
    RUN.get_or_init(|| {
        let grid = cli::u_grid(0.0, 6.0, 0.25).unwrap();
        cli::cmd_simulate(&bump_simulation(2000, grid), None).unwrap()
    })
}

fn at(report: &SimulationReport, u: f64) -> usize {
    report.summaries.iter().position(|s| (s.u - u).abs() < 1e-9).unwrap()
}

#[test]
fn criterion_01_goi_oracle() {
    let cfg = GoiOracleConfig { seed: Some(SEED), ..Default::default() };
    let rows = cli::cmd_goi_oracle(&cfg).unwrap();
    let worst = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
    let pass = rows.len() == 24 && rows.iter().all(|r| r.z_score.abs() <= 3.0);
    report("1", "GOI oracle equivalence", pass, format!("{} points, max |z| = {worst:.3}", rows.len()));
}

#[test]
fn criterion_02_theory_vs_simulation() {
    let r = bump_run();
    let t = r.theory.as_ref().unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for u in [2.5, 3.0, 3.5] {
        let i = at(r, u);
        let s = &r.summaries[i];
        let z = (s.e_mu_hat - t.e_mu[i]) / s.se_e_mu;
        pass &= z.abs() <= 3.0;
        parts.push(format!("u={u}: theory {:.4} vs {:.4} ± {:.4} (z {z:.2})", t.e_mu[i], s.e_mu_hat, s.se_e_mu));
    }
    report("2", "theory vs simulation, 2D", pass, parts.join("; "));
}

#[test]
fn criterion_03_upper_bound() {
    let r = bump_run();
    let t = r.theory.as_ref().unwrap();
    let mut worst = f64::NEG_INFINITY;
    for (i, s) in r.summaries.iter().enumerate() {
        worst = worst.max(s.power_hat - (t.e_mu[i] + 3.0 * s.se_power));
    }
    // the run of criterion 11 is a second simulation on the same setup
    let small = cli::cmd_simulate(&bump_simulation(300, cli::u_grid(-1.0, 6.0, 0.5).unwrap()), None).unwrap();
    let ts = small.theory.as_ref().unwrap();
    for (i, s) in small.summaries.iter().enumerate() {
        worst = worst.max(s.power_hat - (ts.e_mu[i] + 3.0 * s.se_power));
    }
    report(
        "3",
        "power <= E[M_u] + 3 se",
        worst <= 0.0,
        format!("max violation margin {worst:.4} over {} thresholds", r.summaries.len() + small.summaries.len()),
    );
}

#[test]
fn criterion_04_large_threshold() {
    let r = bump_run();
    let t = r.theory.as_ref().unwrap();
    let mut pass = true;
    let mut worst = 0.0f64;
    for (i, s) in r.summaries.iter().enumerate().filter(|(_, s)| s.u >= 3.5 - 1e-9) {
        let gap = (s.power_hat - t.e_mu[i]).abs();
        // a zero hit count makes the plug-in SE vanish; use the SE at the
        // theoretical value instead
        let e = t.e_mu[i].min(1.0);
        let se = if s.se_power > 0.0 { s.se_power } else { (e * (1.0 - e) / s.b as f64).sqrt() };
        pass &= gap <= 3.0 * se;
        worst = worst.max(gap / se);
    }
    let gap = |u: f64| {
        let i = at(r, u);
        (r.summaries[i].power_hat - t.e_mu[i]).abs()
    };
    let (g35, g20) = (gap(3.5), gap(2.0));
    pass &= g35 < g20;
    report(
        "4",
        "large-threshold convergence",
        pass,
        format!("max gap/se at u>=3.5 = {worst:.2}; gap(3.5) = {g35:.4} < gap(2.0) = {g20:.4}"),
    );
}

#[test]
fn criterion_05_height_equivariance() {
    let cov = CovarianceModel::from_smoothing_kernel(5.0).unwrap();
    let mut worst = 0.0f64;
    for dim in 1..=3 {
        let dom = DomainSpec::ball(dim, 10.0).unwrap();
        let base = MeanModel::paraboloid(3.0, -3.0 / 49.0, vec![0.0; dim]).unwrap();
        for u in [1.0, 2.5, 3.0, 4.0] {
            let e0 = emu::expected_peaks_with(&cov, &base, &dom, Threshold::Finite(u)).unwrap().value;
            for delta in [-2.0, 1.0, 3.5] {
                let e1 = emu::expected_peaks_with(&cov, &base.shifted(delta), &dom, Threshold::Finite(u + delta))
                    .unwrap()
                    .value;
                worst = worst.max((e0 - e1).abs() / e0);
            }
        }
    }
    report("5", "height equivariance", worst <= 1e-7, format!("max relative error {worst:.2e}"));
}

#[test]
fn criterion_06_sharp_signal() {
    let cov = CovarianceModel::from_smoothing_kernel(5.0).unwrap();
    let dom = DomainSpec::ball(2, 10.0).unwrap();
    let grid = cli::u_grid(0.0, 6.0, 0.05).unwrap();
    let sups: Vec<f64> = [7.0, 3.0, 1.0]
        .iter()
        .map(|&xi| {
            let mean = MeanModel::gaussian_bump(3.0, xi, vec![0.0, 0.0]).unwrap();
            let r = power_curve(&cov, &mean, &dom, &grid).unwrap();
            grid.iter()
                .zip(&r.e_mu)
                .map(|(&u, e)| (e - norm_cdf(3.0 - u)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let pass = sups[0] > sups[1] && sups[1] > sups[2];
    report("6", "sharp-signal limit", pass, format!("sup gaps for xi = 7, 3, 1: {sups:.4?}"));
}

#[test]
fn criterion_07_rice() {
    let mut detail = Vec::new();
    let mut pass = true;
    for nu in [1.0, 5.0] {
        let cov = CovarianceModel::from_kernel_bandwidth(nu).unwrap();
        let mean = MeanModel::constant(0.0, vec![0.0]).unwrap();
        let dom = DomainSpec::ball(1, 0.5).unwrap();
        let e = emu::expected_peaks_with(&cov, &mean, &dom, Threshold::NegInf).unwrap().value;
        let rice = (6.0 * cov.rho_double_prime() / -cov.rho_prime()).sqrt() / (2.0 * std::f64::consts::PI);
        pass &= (e - rice).abs() <= 1e-6;
        detail.push(format!("nu={nu}: {e:.10} vs {rice:.10}"));
    }
    report("7", "1D Rice cross-check", pass, detail.join("; "));
}

#[test]
fn criterion_08_null_threshold() {
    let cov = CovarianceModel::from_kernel_bandwidth(5.0).unwrap();
    let u = emu::threshold_for_alpha(&cov, 3, 0.01).unwrap();
    let s = |u: f64| emu::null_overshoot_survival(&cov, 3, u).unwrap();
    let mut monotone = true;
    let mut prev = 1.0;
    for i in -60..=80 {
        let v = s(0.1 * i as f64);
        monotone &= v <= prev + 1e-12;
        prev = v;
    }
    let limits = s(f64::NEG_INFINITY) == 1.0 && s(-12.0) > 1.0 - 1e-9 && s(50.0) <= 1e-12;
    let pass = (3.2..=3.7).contains(&u) && monotone && limits && (s(u) - 0.01).abs() <= 1e-8;
    report(
        "8",
        "null threshold",
        pass,
        format!("u(0.01) = {u:.5}, survival monotone = {monotone}, limits ok = {limits}"),
    );
}

#[test]
fn criterion_09_estimation_round_trip() {
    let n = 200;
    let sd = 5.0;
    let grid = GridSpec::new(vec![64, 64]).unwrap();
    let center = vec![32.0, 32.0];
    // paraboloid of height 3 planted in every subject (noise SD units)
    let mu = MeanModel::paraboloid(3.0, -3.0 / 49.0, center.clone()).unwrap();
    let kernel = gaussian_kernel(sd, 4.0 * sd, &grid).unwrap();
    let synth = Synthesizer::new(&grid, &kernel, ConvMethod::Auto).unwrap();
    let mut data = Vec::with_capacity(grid.len() * n);
    for subj in 0..n {
        let f = synth.sample(&mu, SEED, subj as u64, Normalization::Theoretical).unwrap();
        data.extend(f.values);
    }
    let stack = SubjectStack::from_subject_major(grid, n, &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bundle.json");
    cli::write_volume_bundle(&manifest, &stack).unwrap();

    let w = 20;
    let cfg = EstimateConfig {
        bundle: "bundle.json".into(),
        peak: vec![32, 32],
        kernel_half_width: w,
        mean_box: 6,
        domain_radius: 10.0,
        u_grid: vec![3.0],
    };
    let est = cli::cmd_estimate(&cfg, dir.path()).unwrap();
    let truth_profile = gaussian_profile(sd, w, 1.0);
    let r = pearson(&est.kernel.radial_profile, &truth_profile);

    // the standardized field has mean √n·μ
    let rn = (n as f64).sqrt();
    let truth = cli::PowerConfig {
        cov: CovarianceModel::from_smoothing_kernel(sd).unwrap(),
        mean: MeanModel::paraboloid(3.0 * rn, -3.0 / 49.0 * rn, center).unwrap(),
        domain: DomainSpec::ball(2, 10.0).unwrap(),
        u_grid: vec![3.0],
    };
    let p_true = cli::cmd_power(&truth).unwrap().e_mu[0];
    let p_est = cli::cmd_power(&est.power_config).unwrap().e_mu[0];
    let rel = (p_est - p_true).abs() / p_true;
    let pass = r > 0.99 && rel <= 0.10;
    report(
        "9",
        "estimation round trip",
        pass,
        format!(
            "kernel correlation {r:.5}; E[M_3] estimated {p_est:.4} vs truth {p_true:.4} (rel {rel:.3}); \
             fitted kernel sd {:.3} ({:?}); fitted theta0 {:.2}",
            est.implied_cov.gaussian_sd,
            est.implied_cov.method,
            est.mean_fit.theta0
        ),
    );
}

#[test]
fn criterion_10_adjusted_estimator() {
    let grid = cli::u_grid(-2.0, 6.0, 0.25).unwrap();
    let mut pass = true;
    let mut checked = 0;
    let mut saw_large_total = false;
    for (nu, radius) in [(5.0, 10.0), (1.0, 10.0), (2.0, 3.0)] {
        let cov = CovarianceModel::from_smoothing_kernel(nu).unwrap();
        for dim in 1..=3 {
            let dom = DomainSpec::ball(dim, radius).unwrap();
            for mean in [
                MeanModel::gaussian_bump(3.0, 7.0, vec![0.0; dim]).unwrap(),
                MeanModel::paraboloid(1.0, -0.02, vec![0.0; dim]).unwrap(),
                MeanModel::constant(0.0, vec![0.0; dim]).unwrap(),
            ] {
                let r = power_curve(&cov, &mean, &dom, &grid).unwrap();
                saw_large_total |= r.e_m_total > 1.0;
                for (e, a) in r.e_mu.iter().zip(&r.e_mu_adj) {
                    pass &= (0.0..=1.0).contains(a) && a <= e;
                    if r.e_m_total <= 1.0 {
                        pass &= a == e;
                    }
                    checked += 1;
                }
            }
        }
    }
    report(
        "10",
        "adjusted estimator",
        pass && saw_large_total,
        format!("{checked} grid values checked, totals above 1 covered = {saw_large_total}"),
    );
}

#[test]
fn criterion_11_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sim.json");
    let cfg = bump_simulation(300, cli::u_grid(2.0, 4.0, 0.5).unwrap());
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_peakpower"))
            .args(["simulate", "--config"])
            .arg(&cfg_path)
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(&out).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("4", "b.csv");
    let c = run("4", "c.csv");
    // rerun from the sidecar of the first run
    let side = dir.path().join("a.csv.json");
    let out = dir.path().join("d.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_peakpower"))
        .args(["simulate", "--config"])
        .arg(&side)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    let d = std::fs::read(&out).unwrap();
    let pass = status.success() && a == b && b == c && a == d;
    report(
        "11",
        "determinism",
        pass,
        format!("{} bytes; threads 1 vs 4 identical = {}, sidecar rerun identical = {}", a.len(), a == b, a == d),
    );
}

#[test]
fn criterion_3d_analog() {
    let cfg = SimulateConfig {
        grid: GridSpec::new(vec![32, 32, 32]).unwrap(),
        kernel_sd: 3.0,
        trunc_radius: None,
        mean: MeanModel::paraboloid(3.0, -1.0 / 25.0, vec![16.0, 16.0, 16.0]).unwrap(),
        domain_radius: 6.0,
        normalization: Normalization::Theoretical,
        conv_method: ConvMethod::Auto,
        b: 500,
        seed: Some(SEED),
        u_grid: vec![2.5, 3.0, 3.5],
        theory: true,
    };
    let r = cli::cmd_simulate(&cfg, None).unwrap();
    let t = r.theory.as_ref().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, s) in r.summaries.iter().enumerate() {
        let z = (s.e_mu_hat - t.e_mu[i]) / s.se_e_mu;
        pass &= z.abs() <= 3.0;
        pass &= s.power_hat <= t.e_mu[i] + 3.0 * s.se_power;
        parts.push(format!("u={}: theory {:.4} vs {:.4} ± {:.4} (z {z:.2})", s.u, t.e_mu[i], s.e_mu_hat, s.se_e_mu));
    }
    report("3D", "theory vs simulation, 32^3 grid", pass, parts.join("; "));
}
