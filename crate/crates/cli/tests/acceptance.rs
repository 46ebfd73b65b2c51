//! Acceptance checks, one line per criterion. Runs without the test harness
//! so the report always prints; exits nonzero if any criterion fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use igeo_core::complexity::{
    igc_closed, igc_closed_block, igc_quadrature_block, ige, ige_with, log_grid, power_law_fit, uncorrelated_baseline,
    ClosedMode,
};
use igeo_core::diagonal::{self, block_eigen, eigvec_ratio, map_velocity, reconstruct_metric};
use igeo_core::geodesic::{
    accel_canonical, analytic_canonical_jet, analytic_geodesic_canonical_printed, analytic_state, analytic_trajectory,
    hypothesis_series, integrate, GeodesicSystem, Tolerances,
};
use igeo_core::geometry::{christoffel_analytic, christoffel_numeric, oracle, scalar_curvature, scalar_curvature_for};
use igeo_core::manifold::metric_block;
use igeo_core::mat2;
use igeo_core::quadrature::QuadOptions;
use igeo_core::{Chart, DensityMode, Macrostate, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Λ₁ written out here rather than taken from the library.
fn lambda1_ref(r: f64) -> f64 {
    2.0 * r * (2.0 - r * r).sqrt() / (1.0 + (1.0 + 4.0 * r * r).sqrt())
}

fn curvature() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut formula_gap: f64 = 0.0;
    for _ in 0..1000 {
        let r: f64 = rng.gen_range(1e-6..1.0);
        let p = ModelParams::uniform(1, r, 1.0, 1.0).map_err(e2s)?;
        let expect = -2.0 / (2.0 - r * r);
        formula_gap = formula_gap.max(((scalar_curvature(&p) - expect) / expect).abs());
    }
    let mut contraction: f64 = 0.0;
    for _ in 0..100 {
        let l = rng.gen_range(1..=4);
        let r: Vec<f64> = (0..l).map(|_| rng.gen_range(0.01..0.99)).collect();
        let p = ModelParams::new(r, vec![1.0; l], vec![1.0; l]).map_err(e2s)?;
        let blocks: Vec<(f64, f64)> = (0..l).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(0.05..20.0))).collect();
        let theta = Macrostate::from_blocks(Chart::Original, &blocks).map_err(e2s)?;
        contraction = contraction.max((oracle::scalar_by_contraction(&theta, &p).map_err(e2s)? - scalar_curvature(&p)).abs());
    }
    let limit = (scalar_curvature_for(&[1e-12]) + 1.0).abs();
    let mut sum_gap: f64 = 0.0;
    for _ in 0..100 {
        let l = rng.gen_range(1..=8);
        let r: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..0.999)).collect();
        let expect = -2.0 * r.iter().map(|x| 1.0 / (2.0 - x * x)).sum::<f64>();
        sum_gap = sum_gap.max((scalar_curvature_for(&r) - expect).abs());
    }
    check(
        formula_gap <= 2.0 * f64::EPSILON && contraction < 1e-10 && limit < 1e-10 && sum_gap < 1e-12,
        format!(
            "R vs -2/(2-r^2) rel {formula_gap:.1e}; contraction gap {contraction:.1e} at 100 points; r=1e-12 gap {limit:.1e}; block sum gap {sum_gap:.1e}"
        ),
    )
}

fn connection() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.gen_range(0.05..0.95);
        let sigma = rng.gen_range(0.1..10.0);
        let p = ModelParams::uniform(1, r, 1.0, 1.0).map_err(e2s)?;
        let theta = Macrostate::original(vec![rng.gen_range(-5.0..5.0), sigma]).map_err(e2s)?;
        let a = christoffel_analytic(&theta, &p).map_err(e2s)?;
        let n = christoffel_numeric(&theta, &p, 1e-5).map_err(e2s)?;
        worst = worst.max(a.max_abs_diff(&n));
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-6 && secs < 1.0, format!("max deviation {worst:.2e} over 100 samples in {secs:.3} s"))
}

fn diagonalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut recon: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.gen_range(1e-6..1.0);
        let eig = block_eigen(r).map_err(e2s)?;
        // E diag(α₋, α₊) E⁻¹ assembled here from the eigen data.
        let d = mat2::diag(eig.alpha_minus, eig.alpha_plus);
        let m = mat2::mul(&mat2::mul(&eig.e, &d), &eig.e_inv);
        recon = recon.max(mat2::max_abs_diff(&m, &metric_block(r, 1.0)));
        recon = recon.max(mat2::max_abs_diff(&reconstruct_metric(&eig, 1.0).map_err(e2s)?, &metric_block(r, 1.0)));
    }
    let mut trip: f64 = 0.0;
    for _ in 0..1000 {
        let r: Vec<f64> = (0..2).map(|_| rng.gen_range(0.01..0.99)).collect();
        let p = ModelParams::new(r, vec![1.0; 2], vec![1.0; 2]).map_err(e2s)?;
        let blocks: Vec<(f64, f64)> = (0..2).map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(0.1..10.0))).collect();
        let theta = Macrostate::from_blocks(Chart::Original, &blocks).map_err(e2s)?;
        let mut rel = |a: &[f64], b: &[f64]| {
            for (x, y) in a.iter().zip(b) {
                trip = trip.max((x - y).abs() / (1.0 + x.abs()));
            }
        };
        let d = diagonal::convert(&theta, &p, Chart::Diagonal).map_err(e2s)?;
        rel(theta.coords(), diagonal::convert(&d, &p, Chart::Original).map_err(e2s)?.coords());
        let c = diagonal::convert(&d, &p, Chart::Canonical).map_err(e2s)?;
        rel(d.coords(), diagonal::convert(&c, &p, Chart::Diagonal).map_err(e2s)?.coords());
        let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vc = map_velocity(&v, &p, Chart::Original, Chart::Canonical).map_err(e2s)?;
        rel(&v, &map_velocity(&vc, &p, Chart::Canonical, Chart::Original).map_err(e2s)?);
    }
    let min = (1..100_000).map(|i| eigvec_ratio(i as f64 / 100_000.0)).fold(f64::INFINITY, f64::min);
    check(
        recon < 1e-12 && trip < 1e-12 && (min - 2.6).abs() < 0.05,
        format!("reconstruction {recon:.1e} over 1000 r; chart round trips {trip:.1e}; grid min |a1/a0| = {min:.4}"),
    )
}

fn geodesics() -> Outcome {
    let tol = Tolerances { rel: 1e-9, abs: 1e-12 };
    let (lam, xi) = (0.5, 1.0);
    let p = ModelParams::uniform(1, 0.5, lam, xi).map_err(e2s)?;
    let start = analytic_state(&p, 0.0, Chart::Canonical).map_err(e2s)?;
    let traj = integrate(GeodesicSystem::Canonical, &p, &start, 10.0, tol).map_err(e2s)?;
    let mut sup: f64 = 0.0;
    for s in &traj.samples {
        let (mu, sigma) = analytic_geodesic_canonical_printed(s.tau, xi, lam);
        let (m, sg) = s.position.block(0);
        sup = sup.max((m - mu).abs()).max((sg - sigma).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut residual: f64 = 0.0;
    for _ in 0..50 {
        let lam = rng.gen_range(0.1..2.0);
        let xi = rng.gen_range(0.5..4.0);
        for i in 0..1000 {
            let tau = 10.0 * i as f64 / 999.0;
            let j = analytic_canonical_jet(tau, xi, lam);
            let a = accel_canonical(j.sigma, j.dmu, j.dsigma);
            residual = residual.max((j.d2mu - a[0]).abs()).max((j.d2sigma - a[1]).abs());
        }
    }

    let p2 = ModelParams::new(vec![0.3, 0.7], vec![0.5, 1.0], vec![1.0, 2.0]).map_err(e2s)?;
    let s0 = analytic_state(&p2, 0.0, Chart::Original).map_err(e2s)?;
    let full = integrate(GeodesicSystem::FullCorrelated, &p2, &s0, 10.0, tol).map_err(e2s)?;
    let drift = full.speed_drift(&p2).map_err(e2s)?;

    let fwd = integrate(GeodesicSystem::FullCorrelated, &p2, &s0, 5.0, tol).map_err(e2s)?;
    let back = integrate(GeodesicSystem::FullCorrelated, &p2, &fwd.last().unwrap().reversed(), 5.0, tol).map_err(e2s)?;
    let end = back.last().unwrap();
    // Per-block max-norm error, in units of rel·|block| + abs.
    let units = |got: &[f64], want: &[f64], flip: f64| {
        got.chunks(2).zip(want.chunks(2)).fold(0.0f64, |m, (g, w)| {
            let scale = w[0].abs().max(w[1].abs());
            m.max((g[0] - flip * w[0]).abs().max((g[1] - flip * w[1]).abs()) / (tol.rel * scale + tol.abs))
        })
    };
    let rev = units(end.position.coords(), s0.position.coords(), 1.0).max(units(&end.velocity, &s0.velocity, -1.0));
    check(
        sup < 1e-6 && residual < 1e-9 && drift < 100.0 * tol.rel && rev <= 10.0,
        format!(
            "canonical sup error {sup:.1e}; closed-form residual {residual:.1e}; full speed drift {drift:.1e}; reversal over [0,5] {rev:.1}x tol"
        ),
    )
}

fn grid_axis(lo: f64, hi: f64) -> [f64; 5] {
    std::array::from_fn(|i| lo + (hi - lo) * i as f64 / 4.0)
}

fn igc_equivalence() -> Outcome {
    let start = Instant::now();
    let opts = QuadOptions::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for r in grid_axis(0.1, 0.9) {
        for lam in grid_axis(0.1, 2.0) {
            for xi in grid_axis(0.5, 4.0) {
                for tau in [1.0, 10.0, 100.0] {
                    let c = igc_closed_block(tau, r, lam, xi, ClosedMode::Exact).map_err(e2s)?;
                    let q = igc_quadrature_block(tau, r, lam, xi, DensityMode::Paper, &opts).map_err(e2s)?;
                    worst = worst.max((c - q).abs() / c.abs());
                    count += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-9 && secs < 30.0, format!("max relative gap {worst:.1e} on {count} points in {secs:.2} s"))
}

fn asymptotics() -> Outcome {
    let (r, lam, xi) = (0.5, 0.5, 1.0);
    let l1 = lambda1_ref(r);
    let taus = log_grid(1e3, 1e6, 31).map_err(e2s)?;
    let mut notes = Vec::new();
    let mut ok = true;
    for l in [1, 4] {
        let p = ModelParams::uniform(l, r, lam, xi).map_err(e2s)?;
        let sat = l1.powi(l as i32);
        for mode in [ClosedMode::Exact, ClosedMode::Asymptotic] {
            let dv = (igc_closed(1e8, &p, mode).map_err(e2s)? - sat).abs();
            let ds = (ige_with(1e8, &p, mode).map_err(e2s)? - l as f64 * l1.ln()).abs();
            let v: Vec<f64> = taus.iter().map(|&t| igc_closed(t, &p, mode)).collect::<Result<_, _>>().map_err(e2s)?;
            let fit = power_law_fit(&taus, &v, sat).map_err(e2s)?;
            ok &= dv < 1e-6 && ds < 1e-6 && (fit.exponent + 1.0).abs() < 0.01;
            notes.push(format!("l={l} {mode:?}: |dV| {dv:.1e}, |dS| {ds:.1e}, exponent {:.4}", fit.exponent));
        }
    }
    check(ok, notes.join("; "))
}

fn baseline() -> Outcome {
    let p = ModelParams::new(vec![0.5, 0.3], vec![0.5, 1.5], vec![1.0, 2.0]).map_err(e2s)?;
    let lam_sum: f64 = p.lambda().iter().sum();
    let taus = log_grid(1.0, 1e8, 161).map_err(e2s)?;
    let mut linear = true;
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    for &t in &taus {
        let b = uncorrelated_baseline(t, p.lambda()).map_err(e2s)?;
        linear &= (b - lam_sum * t).abs() <= 1e-12 * b;
        let s = ige(t, &p).map_err(e2s)?;
        s_min = s_min.min(s);
        s_max = s_max.max(s);
    }
    let sat = p.r().iter().map(|&r| lambda1_ref(r).ln()).sum::<f64>();
    let bounded = s_max.is_finite() && s_min.is_finite() && s_max <= ige(1.0, &p).map_err(e2s)?.max(sat) + 1e-12;
    check(
        linear && bounded,
        format!(
            "uncorrelated S = {lam_sum} tau: {:.3e} at tau=1e8; correlated S in [{s_min:.4}, {s_max:.4}] on [1, 1e8], limit {sat:.4}",
            lam_sum * 1e8
        ),
    )
}

fn hypothesis() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let r = rng.gen_range(0.05..0.95);
        let lam = rng.gen_range(0.1..2.0);
        let xi = rng.gen_range(0.5..4.0);
        let p = ModelParams::uniform(1, r, lam, xi).map_err(e2s)?;
        let taus: Vec<f64> = (0..200).map(|i| i as f64 * 15.0 / (199.0 * lam)).collect();
        let traj = analytic_trajectory(&p, &taus, Chart::Original).map_err(e2s)?;
        let series = hypothesis_series(&traj, &p).map_err(e2s)?;
        let n = series.len() as f64;
        let mx = series.iter().map(|(t, _)| t).sum::<f64>() / n;
        let my = series.iter().map(|(_, v)| v.ln()).sum::<f64>() / n;
        let sxy: f64 = series.iter().map(|(t, v)| (t - mx) * (v.ln() - my)).sum();
        let sxx: f64 = series.iter().map(|(t, _)| (t - mx).powi(2)).sum();
        worst = worst.max((-sxy / sxx - lam).abs() / lam);
    }
    check(worst < 0.02, format!("fitted decay rate within {:.2e} (relative) of lambda over 20 draws", worst))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_igeo");
    let dir = tempfile::TempDir::new().map_err(e2s)?;
    let v = Command::new(bin).arg("validate").current_dir(dir.path()).env_remove("IGEO_OUTPUT_ROOT").output().map_err(e2s)?;
    let text = String::from_utf8_lossy(&v.stdout).into_owned();
    let suites = text.lines().filter(|l| l.starts_with("[PASS]")).count();
    let validate_ok = v.status.success() && suites > 0 && !text.contains("[FAIL]");
    let v2 = Command::new(bin).arg("validate").current_dir(dir.path()).env_remove("IGEO_OUTPUT_ROOT").output().map_err(e2s)?;
    let validate_repeat = v2.stdout == v.stdout;

    let cfg = dir.path().join("sweep.json");
    fs::write(&cfg, r#"{"sweep": {"r": {"range": [0.1, 0.9], "count": 9}, "lambda": [0.1, 0.5, 1.0, 1.5, 2.0], "xi": [0.5, 4.0], "l": [1, 3]}}"#)
        .map_err(e2s)?;
    let mut outputs = Vec::new();
    for name in ["run1", "run2"] {
        let o = Command::new(bin)
            .args(["sweep", "--config", cfg.to_str().unwrap(), "--output-dir", name])
            .current_dir(dir.path())
            .env_remove("IGEO_OUTPUT_ROOT")
            .output()
            .map_err(e2s)?;
        if !o.status.success() {
            return Err(format!("sweep failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        let csv = fs::read(dir.path().join(name).join("sweep.csv")).map_err(e2s)?;
        let manifest = fs::read(dir.path().join(name).join("sweep_manifest.json")).map_err(e2s)?;
        outputs.push((csv, manifest));
    }
    let same = outputs[0] == outputs[1];
    let rows = outputs[0].0.iter().filter(|&&b| b == b'\n').count() - 1;
    check(
        validate_ok && validate_repeat && same,
        format!(
            "validate: {suites} suites passed, output repeated: {validate_repeat}; sweep of {rows} rows byte-identical across runs: {same}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("curvature reproduction", curvature),
        ("connection oracle", connection),
        ("diagonalization", diagonalization),
        ("geodesic integration", geodesics),
        ("IGC equivalence", igc_equivalence),
        ("asymptotics", asymptotics),
        ("baseline contrast", baseline),
        ("working hypothesis", hypothesis),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("[PASS] criterion {} ({name}): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("[FAIL] criterion {} ({name}): {d}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
