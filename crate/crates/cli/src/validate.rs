//! Invariant suites behind `igeo validate`. Every suite draws from its own
//! pinned seed, so repeated runs see identical samples.

use std::io::Write;

use igeo_core::complexity::{
    igc_closed, igc_closed_block, igc_quadrature_block, igc_saturation, ige, ige_saturation, ige_with, log_grid, power_law_fit, uncorrelated_baseline, ClosedMode,
};
use igeo_core::diagonal::{self, block_eigen, min_eigvec_ratio, reconstruct_metric};
use igeo_core::geodesic::{
    accel_canonical, analytic_canonical_jet, analytic_geodesic_canonical_printed, analytic_state, analytic_trajectory,
    hypothesis_series, integrate, GeodesicSystem, Tolerances,
};
use igeo_core::geometry::{christoffel_analytic, christoffel_numeric, oracle, scalar_curvature, scalar_curvature_for};
use igeo_core::manifold::{inverse_metric_block, metric_block};
use igeo_core::mat2::{self, symmetric_eigenvalues};
use igeo_core::quadrature::QuadOptions;
use igeo_core::{Chart, DensityMode, Macrostate, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

type Outcome = Result<String, String>;

pub struct Suite {
    pub name: &'static str,
    seed: u64,
    run: fn(&mut ChaCha8Rng) -> Outcome,
}

pub const SUITES: &[Suite] = &[
    Suite { name: "metric-positive-definite", seed: 11, run: metric_pd },
    Suite { name: "curvature-contraction", seed: 8, run: curvature_contraction },
    Suite { name: "christoffel-oracle", seed: 5, run: christoffel_oracle },
    Suite { name: "eigen-reconstruction", seed: 3, run: eigen_reconstruction },
    Suite { name: "chart-round-trip", seed: 13, run: chart_round_trip },
    Suite { name: "eigvec-ratio", seed: 0, run: eigvec_ratio },
    Suite { name: "ode-analytic", seed: 21, run: ode_analytic },
    Suite { name: "speed-conservation", seed: 0, run: speed_conservation },
    Suite { name: "reversibility", seed: 0, run: reversibility },
    Suite { name: "hypothesis-rate", seed: 34, run: hypothesis_rate },
    Suite { name: "igc-equivalence", seed: 0, run: igc_equivalence },
    Suite { name: "saturation", seed: 0, run: saturation },
    Suite { name: "power-law", seed: 0, run: power_law },
    Suite { name: "baseline-contrast", seed: 0, run: baseline_contrast },
    Suite { name: "seed-determinism", seed: 20_231_017, run: seed_determinism },
];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_suite(suite: &Suite) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let (passed, detail) = match (suite.run)(&mut rng) {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    SuiteResult { name: suite.name, passed, detail }
}

/// Runs the named suites (all when `only` is empty), printing one line each.
pub fn validate(only: &[String], out: &mut dyn Write) -> CliResult<Vec<SuiteResult>> {
    if let Some(bad) = only.iter().find(|n| !SUITES.iter().any(|s| s.name == n.as_str())) {
        let names: Vec<&str> = SUITES.iter().map(|s| s.name).collect();
        return Err(CliError::Usage(format!("unknown suite \"{bad}\" (known: {})", names.join(", "))));
    }
    let mut results = Vec::new();
    for suite in SUITES.iter().filter(|s| only.is_empty() || only.iter().any(|n| n == s.name)) {
        let res = run_suite(suite);
        writeln!(out, "[{}] {}: {}", if res.passed { "PASS" } else { "FAIL" }, res.name, res.detail)
            .map_err(|e| CliError::io("<stdout>", e))?;
        results.push(res);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(results)
    } else {
        Err(CliError::ValidationFailed(format!("{} of {} suites failed: {}", failed.len(), results.len(), failed.join(", "))))
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e2s(e: igeo_core::Error) -> String {
    e.to_string()
}

fn metric_pd(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let r = rng.gen_range(0.001..0.999);
        let sigma = rng.gen_range(-3.0f64..3.0).exp();
        let g = metric_block(r, sigma);
        let (lo, _) = symmetric_eigenvalues(&g);
        if !(lo > 0.0) {
            return Err(format!("eigenvalue {lo} at r = {r}, sigma = {sigma}"));
        }
        let prod = mat2::mul(&g, &inverse_metric_block(r, sigma));
        worst = worst.max(mat2::max_abs_diff(&prod, &mat2::IDENTITY));
    }
    check(worst < 1e-12, format!("10000 samples positive definite, max |g g^-1 - I| = {worst:.2e}"))
}

fn curvature_contraction(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let l = rng.gen_range(1..=4);
        let r: Vec<f64> = (0..l).map(|_| rng.gen_range(0.01..0.99)).collect();
        let params = ModelParams::new(r, vec![1.0; l], vec![1.0; l]).map_err(e2s)?;
        let blocks: Vec<(f64, f64)> = (0..l).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(0.1..10.0))).collect();
        let theta = Macrostate::from_blocks(Chart::Original, &blocks).map_err(e2s)?;
        let c = oracle::scalar_by_contraction(&theta, &params).map_err(e2s)?;
        worst = worst.max((c - scalar_curvature(&params)).abs());
    }
    let limit = (scalar_curvature_for(&[1e-12]) + 1.0).abs();
    check(
        worst < 1e-10 && limit < 1e-10,
        format!("contraction gap {worst:.2e} over 100 points, r -> 0 gap {limit:.2e}"),
    )
}

fn christoffel_oracle(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.gen_range(0.05..0.95);
        let sigma = rng.gen_range(0.1..10.0);
        let params = ModelParams::uniform(1, r, 1.0, 1.0).map_err(e2s)?;
        let theta = Macrostate::original(vec![rng.gen_range(-3.0..3.0), sigma]).map_err(e2s)?;
        let a = christoffel_analytic(&theta, &params).map_err(e2s)?;
        let n = christoffel_numeric(&theta, &params, 1e-5).map_err(e2s)?;
        worst = worst.max(a.max_abs_diff(&n));
    }
    check(worst < 1e-6, format!("max deviation {worst:.2e} over 100 samples"))
}

fn eigen_reconstruction(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.gen_range(1e-6..1.0);
        let eig = block_eigen(r).map_err(e2s)?;
        let rebuilt = reconstruct_metric(&eig, 1.0).map_err(e2s)?;
        worst = worst.max(mat2::max_abs_diff(&rebuilt, &metric_block(r, 1.0)));
    }
    check(worst < 1e-12, format!("max |E D E^-1 - g| = {worst:.2e} over 1000 r"))
}

fn chart_round_trip(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..0.99)).collect();
        let params = ModelParams::new(r, vec![1.0; 3], vec![1.0; 3]).map_err(e2s)?;
        let blocks: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(0.1..10.0))).collect();
        let theta = Macrostate::from_blocks(Chart::Original, &blocks).map_err(e2s)?;
        let c = diagonal::convert(&theta, &params, Chart::Canonical).map_err(e2s)?;
        let back = diagonal::convert(&c, &params, Chart::Original).map_err(e2s)?;
        for (a, b) in theta.coords().iter().zip(back.coords()) {
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
    }
    check(worst < 1e-12, format!("original -> canonical -> original gap {worst:.2e} over 1000 points"))
}

fn eigvec_ratio(_: &mut ChaCha8Rng) -> Outcome {
    let (min, at) = min_eigvec_ratio(100_000);
    check((min - 2.6).abs() < 0.05, format!("grid minimum of |a1/a0| = {min:.4} at r = {at:.5}"))
}

fn ode_analytic(rng: &mut ChaCha8Rng) -> Outcome {
    let mut residual: f64 = 0.0;
    for _ in 0..50 {
        let lam = rng.gen_range(0.1..2.0);
        let xi = rng.gen_range(0.5..4.0);
        for i in 0..1000 {
            let tau = 20.0 * i as f64 / 999.0;
            let j = analytic_canonical_jet(tau, xi, lam);
            let a = accel_canonical(j.sigma, j.dmu, j.dsigma);
            residual = residual.max((j.d2mu - a[0]).abs()).max((j.d2sigma - a[1]).abs());
        }
    }
    let params = ModelParams::uniform(1, 0.5, 0.5, 1.0).map_err(e2s)?;
    let start = analytic_state(&params, 0.0, Chart::Canonical).map_err(e2s)?;
    let traj = integrate(GeodesicSystem::Canonical, &params, &start, 10.0, Tolerances::default()).map_err(e2s)?;
    let mut sup: f64 = 0.0;
    for s in &traj.samples {
        let (mu, sigma) = analytic_geodesic_canonical_printed(s.tau, 1.0, 0.5);
        let (m, sg) = s.position.block(0);
        sup = sup.max((m - mu).abs()).max((sg - sigma).abs());
    }
    check(
        residual < 1e-9 && sup < 1e-6,
        format!("closed-form residual {residual:.2e} (50 x 1000), integrated vs printed sup error {sup:.2e}"),
    )
}

fn two_block_start() -> Result<(ModelParams, igeo_core::geodesic::GeodesicState), String> {
    let params = ModelParams::new(vec![0.3, 0.7], vec![0.5, 1.0], vec![1.0, 2.0]).map_err(e2s)?;
    let start = analytic_state(&params, 0.0, Chart::Original).map_err(e2s)?;
    Ok((params, start))
}

fn speed_conservation(_: &mut ChaCha8Rng) -> Outcome {
    let (params, start) = two_block_start()?;
    let tol = Tolerances::default();
    let traj = integrate(GeodesicSystem::FullCorrelated, &params, &start, 10.0, tol).map_err(e2s)?;
    let drift = traj.speed_drift(&params).map_err(e2s)?;
    check(drift < 100.0 * tol.rel, format!("squared-speed drift {drift:.2e} (bound {:.0e})", 100.0 * tol.rel))
}

fn reversibility(_: &mut ChaCha8Rng) -> Outcome {
    let (params, start) = two_block_start()?;
    let tol = Tolerances::default();
    let fwd = integrate(GeodesicSystem::FullCorrelated, &params, &start, 5.0, tol).map_err(e2s)?;
    let turn = fwd.last().expect("samples").reversed();
    let back = integrate(GeodesicSystem::FullCorrelated, &params, &turn, 5.0, tol).map_err(e2s)?;
    let end = back.last().expect("samples");
    // Per-block max-norm error in units of the tolerance.
    let ratio = |got: &[f64], want: &[f64], flip: f64| {
        got.chunks(2).zip(want.chunks(2)).fold(0.0f64, |m, (g, w)| {
            let scale = w[0].abs().max(w[1].abs());
            let err = (g[0] - flip * w[0]).abs().max((g[1] - flip * w[1]).abs());
            m.max(err / (tol.rel * scale + tol.abs))
        })
    };
    let p = ratio(end.position.coords(), start.position.coords(), 1.0);
    let v = ratio(&end.velocity, &start.velocity, -1.0);
    check(p <= 10.0 && v <= 10.0, format!("round trip over [0, 5]: position {p:.2}x, velocity {v:.2}x tolerance"))
}

fn hypothesis_rate(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let r = rng.gen_range(0.05..0.95);
        let lam = rng.gen_range(0.1..2.0);
        let xi = rng.gen_range(0.5..4.0);
        let params = ModelParams::uniform(1, r, lam, xi).map_err(e2s)?;
        let taus: Vec<f64> = (0..200).map(|i| i as f64 * 15.0 / (199.0 * lam)).collect();
        let traj = analytic_trajectory(&params, &taus, Chart::Original).map_err(e2s)?;
        let series = hypothesis_series(&traj, &params).map_err(e2s)?;
        let rate = decay_rate(&series);
        worst = worst.max((rate - lam).abs() / lam);
    }
    check(worst < 0.02, format!("fitted decay rate within {worst:.2e} (relative) of lambda over 20 draws"))
}

/// Least-squares slope of `−ln v` against τ.
pub fn decay_rate(series: &[(f64, f64)]) -> f64 {
    let n = series.len() as f64;
    let mx = series.iter().map(|(t, _)| t).sum::<f64>() / n;
    let my = series.iter().map(|(_, v)| v.ln()).sum::<f64>() / n;
    let sxy: f64 = series.iter().map(|(t, v)| (t - mx) * (v.ln() - my)).sum();
    let sxx: f64 = series.iter().map(|(t, _)| (t - mx).powi(2)).sum();
    -sxy / sxx
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// The 5 × 5 × 5 (r, λ, Ξ) grid used by the equivalence and saturation checks.
pub fn parameter_grid() -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(125);
    for &r in &axis(0.1, 0.9, 5) {
        for &lam in &axis(0.1, 2.0, 5) {
            for &xi in &axis(0.5, 4.0, 5) {
                out.push((r, lam, xi));
            }
        }
    }
    out
}

fn igc_equivalence(_: &mut ChaCha8Rng) -> Outcome {
    let opts = QuadOptions::default();
    let mut worst: f64 = 0.0;
    for (r, lam, xi) in parameter_grid() {
        for tau in [1.0, 10.0, 100.0] {
            let c = igc_closed_block(tau, r, lam, xi, ClosedMode::Exact).map_err(e2s)?;
            let q = igc_quadrature_block(tau, r, lam, xi, DensityMode::Paper, &opts).map_err(e2s)?;
            worst = worst.max((c - q).abs() / c.abs());
        }
    }
    check(worst < 1e-9, format!("max relative gap {worst:.2e} on 375 (r, lambda, xi, tau) points"))
}

fn saturation(_: &mut ChaCha8Rng) -> Outcome {
    let t = 1e8;
    let mut worst_v: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    for (r, lam, xi) in parameter_grid() {
        for l in [1, 3] {
            let p = ModelParams::uniform(l, r, lam, xi).map_err(e2s)?;
            worst_v = worst_v.max((igc_closed(t, &p, ClosedMode::Exact).map_err(e2s)? - igc_saturation(&p)).abs());
            worst_s = worst_s.max((ige_with(t, &p, ClosedMode::Exact).map_err(e2s)? - ige_saturation(&p)).abs());
        }
    }
    check(
        worst_v < 1e-6 && worst_s < 1e-6,
        format!("at tau = 1e8: max |V - prod Lambda1| = {worst_v:.2e}, max |S - sum log Lambda1| = {worst_s:.2e}"),
    )
}

fn power_law(_: &mut ChaCha8Rng) -> Outcome {
    let taus = log_grid(1e3, 1e6, 31).map_err(e2s)?;
    let mut worst: f64 = 0.0;
    for l in [1, 4] {
        let p = ModelParams::uniform(l, 0.5, 0.5, 1.0).map_err(e2s)?;
        for mode in [ClosedMode::Exact, ClosedMode::Asymptotic] {
            let v: Vec<f64> = taus.iter().map(|&t| igc_closed(t, &p, mode)).collect::<Result<_, _>>().map_err(e2s)?;
            let fit = power_law_fit(&taus, &v, igc_saturation(&p)).map_err(e2s)?;
            worst = worst.max((fit.exponent + 1.0).abs());
        }
    }
    check(worst < 0.01, format!("fit exponents within {worst:.2e} of -1 (l = 1, 4; exact and asymptotic)"))
}

fn baseline_contrast(_: &mut ChaCha8Rng) -> Outcome {
    let p = ModelParams::uniform(2, 0.5, 0.5, 1.0).map_err(e2s)?;
    let taus = log_grid(1.0, 1e8, 81).map_err(e2s)?;
    let mut s_max = f64::NEG_INFINITY;
    for &t in &taus {
        s_max = s_max.max(ige(t, &p).map_err(e2s)?);
        let b = uncorrelated_baseline(t, p.lambda()).map_err(e2s)?;
        if (b - t).abs() > 1e-12 * t {
            return Err(format!("baseline {b} at tau = {t} is not sum lambda_k tau"));
        }
    }
    let bound = ige(1.0, &p).map_err(e2s)?.max(ige_saturation(&p));
    check(
        s_max <= bound + 1e-12,
        format!("correlated S <= {s_max:.4} on [1, 1e8]; uncorrelated S reaches {:.3e}", 1e8),
    )
}

fn seed_determinism(rng: &mut ChaCha8Rng) -> Outcome {
    let a: Vec<u64> = (0..1000).map(|_| rng.gen::<f64>().to_bits()).collect();
    let mut again = ChaCha8Rng::seed_from_u64(20_231_017);
    let b: Vec<u64> = (0..1000).map(|_| again.gen::<f64>().to_bits()).collect();
    let fingerprint = a.iter().fold(0u64, |h, x| h.rotate_left(5) ^ x);
    check(a == b, format!("1000 draws reproduced, fingerprint {fingerprint:016x}"))
}
