use std::io::Write;

use igeo_core::complexity::{
    ige_report, ige_with, lambda1, lambda2, linear_grid, sigma_fn, ClosedMode, IgeReport,
};
use igeo_core::geodesic::{
    analytic_state, analytic_trajectory, hypothesis_check, integrate, GeodesicState, GeodesicSystem,
    GeodesicTrajectory, HypothesisReport, Tolerances, DEFAULT_HYPOTHESIS_MARGIN,
};
use igeo_core::geometry::{
    christoffel_block, christoffel_block_numeric, oracle::ricci_block_numeric, ricci_block, scalar_curvature_for,
    RicciBlock,
};
use igeo_core::manifold::inverse_metric_block;
use igeo_core::quadrature::QuadOptions;
use igeo_core::{Chart, Macrostate, ModelParams};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{GeodesicMode, IgeModes, Quantity, RunConfig, SweepSpec};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, fmt_opt, Sink};

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> CliResult<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::io("<stdout>", e))
}

// ---------------------------------------------------------------------------
// curvature

#[derive(Debug, Serialize)]
pub struct NumericCheck {
    pub fd_step: f64,
    pub christoffel_max_deviation: f64,
    /// `|g^{ij} R_ij − R|` with `R_ij` from nested central differences.
    pub scalar_contraction_deviation: f64,
}

#[derive(Debug, Serialize)]
pub struct CurvatureOutput {
    pub baseline: bool,
    pub r: Vec<f64>,
    pub reference_position: Vec<f64>,
    pub scalar_curvature: f64,
    pub ricci: Vec<RicciBlock>,
    pub numeric_check: Option<NumericCheck>,
}

/// Scalar curvature and Ricci blocks at the reference point `μ = 0, σ = 1`.
pub fn curvature(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<CurvatureOutput> {
    let spec = cfg.curvature;
    let r: Vec<f64> = if spec.baseline { vec![0.0; cfg.model.l()] } else { cfg.model.r().to_vec() };
    let reference = Macrostate::reference(r.len());
    let (mu, sigma) = (0.0, 1.0);
    let ricci: Vec<RicciBlock> = r.iter().map(|&rk| ricci_block(rk, sigma)).collect();
    let scalar = scalar_curvature_for(&r);
    let numeric_check = if spec.check_numeric {
        let h = cfg.tolerances.fd_step;
        let mut gamma_dev: f64 = 0.0;
        let mut contraction = 0.0;
        for &rk in &r {
            let exact = christoffel_block(rk, sigma);
            let num = christoffel_block_numeric(rk, mu, sigma, h)?;
            for (a, b) in exact.iter().flatten().flatten().zip(num.iter().flatten().flatten()) {
                gamma_dev = gamma_dev.max((a - b).abs());
            }
            let ric = ricci_block_numeric(rk, mu, sigma, 1e-4, h.min(1e-4))?.as_matrix();
            let gi = inverse_metric_block(rk, sigma);
            for i in 0..2 {
                for j in 0..2 {
                    contraction += gi[i][j] * ric[i][j];
                }
            }
        }
        Some(NumericCheck {
            fd_step: h,
            christoffel_max_deviation: gamma_dev,
            scalar_contraction_deviation: (contraction - scalar).abs(),
        })
    } else {
        None
    };

    if spec.baseline {
        say(out, format!("uncorrelated baseline (r_k = 0), l = {}", r.len()))?;
    } else {
        say(out, format!("l = {}, r = {:?}", r.len(), r))?;
    }
    say(out, format!("scalar curvature: {}", fmt_f64(scalar)))?;
    say(out, "Ricci components at mu_k = 0, sigma_k = 1:")?;
    for (k, b) in ricci.iter().enumerate() {
        say(
            out,
            format!(
                "  block {k}: R11 = {}, R12 = {}, R21 = {}, R22 = {}",
                fmt_f64(b.r11),
                fmt_f64(b.r12),
                fmt_f64(b.r21),
                fmt_f64(b.r22)
            ),
        )?;
    }
    if let Some(c) = &numeric_check {
        say(out, format!("numeric check (h = {}):", fmt_f64(c.fd_step)))?;
        say(out, format!("  max Christoffel deviation: {:e}", c.christoffel_max_deviation))?;
        say(out, format!("  contraction vs scalar deviation: {:e}", c.scalar_contraction_deviation))?;
    }

    let report = CurvatureOutput {
        baseline: spec.baseline,
        r,
        reference_position: reference.into_coords(),
        scalar_curvature: scalar,
        ricci,
        numeric_check,
    };
    let mut sink = Sink::new(&cfg.output);
    sink.json("curvature.json", &report)?;
    report_files(out, &sink)?;
    Ok(report)
}

fn report_files(out: &mut dyn Write, sink: &Sink) -> CliResult<()> {
    for p in &sink.written {
        say(out, format!("wrote {}", p.display()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// geodesic

#[derive(Debug, Serialize)]
pub struct GeodesicSummary {
    pub mode: GeodesicMode,
    pub chart: Chart,
    pub samples: usize,
    pub tau_end: f64,
    pub tolerances: Option<Tolerances>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evaluations: usize,
    /// Relative drift of the squared speed under the full metric.
    pub speed_drift: Option<f64>,
    pub hypothesis: Option<HypothesisReport>,
    /// Largest coordinate gap to the closed-form geodesic in the same chart.
    pub sup_gap_vs_closed_form: Option<f64>,
}

/// Squared-speed drift above this multiple of the relative tolerance fails
/// the run with the accuracy exit status, after the files are written.
pub const DRIFT_FACTOR: f64 = 100.0;

fn system_for(mode: GeodesicMode) -> Option<GeodesicSystem> {
    match mode {
        GeodesicMode::Full => Some(GeodesicSystem::FullCorrelated),
        GeodesicMode::Diag => Some(GeodesicSystem::DiagonalAsymptotic),
        GeodesicMode::Canonical => Some(GeodesicSystem::Canonical),
        GeodesicMode::Analytic => None,
    }
}

fn initial_state(cfg: &RunConfig, chart: Chart) -> CliResult<GeodesicState> {
    let n = 2 * cfg.model.l();
    match &cfg.geodesic.initial {
        None => Ok(analytic_state(&cfg.model, 0.0, chart)?),
        Some(init) => {
            let mut diags = Vec::new();
            for (name, v) in [("position", &init.position), ("velocity", &init.velocity)] {
                if v.len() != n {
                    diags.push(format!("geodesic.initial.{name}: has {} entries, expected 2l = {n}", v.len()));
                }
            }
            if !diags.is_empty() {
                return Err(CliError::Config(diags));
            }
            let pos = Macrostate::new(chart, init.position.clone())?;
            Ok(GeodesicState::new(0.0, pos, init.velocity.clone())?)
        }
    }
}

fn sup_gap(traj: &GeodesicTrajectory, params: &ModelParams, chart: Chart) -> CliResult<f64> {
    let mut m: f64 = 0.0;
    for s in &traj.samples {
        let closed = analytic_state(params, s.tau, chart)?;
        for (a, b) in s.position.coords().iter().zip(closed.position.coords()) {
            m = m.max((a - b).abs());
        }
    }
    Ok(m)
}

pub fn geodesic(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<GeodesicSummary> {
    let spec = &cfg.geodesic;
    let params = &cfg.model;
    let tol = Tolerances { rel: cfg.tolerances.ode_rel, abs: cfg.tolerances.ode_abs };
    let (traj, chart, tolerances) = match system_for(spec.mode) {
        None => {
            let taus = linear_grid(0.0, spec.tau_end, spec.points)?;
            (analytic_trajectory(params, &taus, Chart::Original)?, Chart::Original, None)
        }
        Some(system) => {
            let chart = system.chart();
            let start = initial_state(cfg, chart)?;
            (integrate(system, params, &start, spec.tau_end, tol)?, chart, Some(tol))
        }
    };
    let speed_drift = match spec.mode {
        GeodesicMode::Full => Some(traj.speed_drift(params)?),
        _ => None,
    };
    let hypothesis = hypothesis_check(&traj, params, DEFAULT_HYPOTHESIS_MARGIN).ok();
    let sup_gap_vs_closed_form = match spec.mode {
        GeodesicMode::Analytic => None,
        _ => Some(sup_gap(&traj, params, chart)?),
    };
    let summary = GeodesicSummary {
        mode: spec.mode,
        chart,
        samples: traj.samples.len(),
        tau_end: spec.tau_end,
        tolerances,
        steps_accepted: traj.stats.accepted,
        steps_rejected: traj.stats.rejected,
        rhs_evaluations: traj.stats.evaluations,
        speed_drift,
        hypothesis,
        sup_gap_vs_closed_form,
    };

    say(out, format!("mode {} in the {} chart, {} samples on [0, {}]", spec.mode.name(), chart.name(), summary.samples, fmt_f64(spec.tau_end)))?;
    if tolerances.is_some() {
        say(out, format!("steps: {} accepted, {} rejected", summary.steps_accepted, summary.steps_rejected))?;
    }
    if let Some(d) = speed_drift {
        say(out, format!("squared-speed drift: {d:e}"))?;
    }
    if let Some(g) = sup_gap_vs_closed_form {
        say(out, format!("sup gap vs closed form: {g:e}"))?;
    }
    match &hypothesis {
        Some(h) => say(
            out,
            format!(
                "hypothesis |mu~/sigma~|*|a0/a1| over the late half: max {:e} ({} margin {})",
                h.max_ratio,
                if h.threshold_ok { "within" } else { "above" },
                fmt_f64(h.margin)
            ),
        )?,
        None => say(out, "hypothesis check: not available for this trajectory")?,
    }

    let mut sink = Sink::new(&cfg.output);
    let mut rows = Vec::with_capacity(traj.samples.len() * params.l());
    for s in &traj.samples {
        for k in 0..params.l() {
            let (m, sg) = s.position.block(k);
            rows.push(vec![
                fmt_f64(s.tau),
                k.to_string(),
                chart.name().to_string(),
                fmt_f64(m),
                fmt_f64(sg),
                fmt_f64(s.velocity[2 * k]),
                fmt_f64(s.velocity[2 * k + 1]),
            ]);
        }
    }
    sink.csv("geodesic.csv", &["tau", "block", "chart", "mu", "sigma", "dmu", "dsigma"], &rows)?;
    sink.json("geodesic.json", &summary)?;
    for k in 0..params.l() {
        sink.dat(&format!("geodesic_block{k}_mu.dat"), traj.samples.iter().map(|s| (s.tau, s.position.block(k).0)))?;
        sink.dat(&format!("geodesic_block{k}_sigma.dat"), traj.samples.iter().map(|s| (s.tau, s.position.block(k).1)))?;
    }
    report_files(out, &sink)?;
    if let (Some(drift), Some(tol)) = (speed_drift, tolerances) {
        let bound = DRIFT_FACTOR * tol.rel;
        if drift > bound {
            return Err(igeo_core::Error::Accuracy { estimate: drift, error_estimate: drift, target: bound }.into());
        }
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// ige

#[derive(Debug, Serialize)]
struct IgeOutput<'a> {
    modes: IgeModes,
    #[serde(flatten)]
    report: &'a IgeReport,
}

pub fn ige(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<IgeReport> {
    let modes = cfg.ige.modes;
    let taus = cfg.tau.values()?;
    let opts = QuadOptions { abs_tol: cfg.tolerances.quadrature_abs, ..QuadOptions::default() };
    let quad = match modes {
        IgeModes::Closed => None,
        _ => Some((cfg.density_mode, &opts)),
    };
    let rep = ige_report(&cfg.model, &taus, cfg.ige.closed_mode, quad)?;
    let show_closed = modes != IgeModes::Quadrature;
    let primary: &[f64] = if show_closed { &rep.v_closed } else { rep.v_quadrature.as_deref().unwrap_or(&[]) };
    let end = *taus.last().expect("grid has at least two points");

    say(out, format!("l = {}, {} tau points on [{}, {}]", cfg.model.l(), taus.len(), fmt_f64(taus[0]), fmt_f64(end)))?;
    say(out, format!("saturation: sum log Lambda1 = {} (prod Lambda1 = {})", fmt_f64(rep.entropy_saturation), fmt_f64(rep.saturation)))?;
    let fit = if show_closed { rep.fit } else { rep.fit_quadrature };
    match fit {
        Some(f) => say(out, format!("fit exponent: {:.6} (log residual {:.3e})", f.exponent, f.residual))?,
        None => say(out, "fit exponent: not available (gap changes sign or grid spans fewer than two decades)")?,
    }
    if let (IgeModes::Both, Some(g)) = (modes, rep.max_relative_gap) {
        say(out, format!("max relative closed vs quadrature gap: {g:e}"))?;
    }
    if show_closed {
        say(out, format!("entropy at tau = {}: {}", fmt_f64(end), fmt_f64(rep.entropy_at_end)))?;
    }
    say(out, format!("uncorrelated baseline at tau = {}: sum lambda_k * tau = {}", fmt_f64(end), fmt_f64(rep.baseline_at_end)))?;

    let mut sink = Sink::new(&cfg.output);
    let rows: Vec<Vec<String>> = taus
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let vc = show_closed.then(|| rep.v_closed[i]);
            let vq = rep.v_quadrature.as_ref().map(|v| v[i]);
            let sc = show_closed.then(|| rep.s_closed[i]);
            vec![fmt_f64(t), fmt_opt(vc), fmt_opt(vq), fmt_opt(sc), fmt_f64(primary[i] - rep.saturation)]
        })
        .collect();
    sink.csv("ige.csv", &["tau", "v_closed", "v_quadrature", "s_closed", "saturation_gap"], &rows)?;
    sink.json("ige.json", &IgeOutput { modes, report: &rep })?;
    if show_closed {
        sink.dat("ige_v_closed.dat", taus.iter().copied().zip(rep.v_closed.iter().copied()))?;
        sink.dat("ige_s_closed.dat", taus.iter().copied().zip(rep.s_closed.iter().copied()))?;
    }
    if let Some(vq) = &rep.v_quadrature {
        sink.dat("ige_v_quadrature.dat", taus.iter().copied().zip(vq.iter().copied()))?;
    }
    report_files(out, &sink)?;
    Ok(rep)
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Serialize)]
pub struct SweepManifest {
    pub axis_order: [&'static str; 4],
    pub r: Vec<f64>,
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
    pub l: Vec<usize>,
    pub quantities: Vec<Quantity>,
    pub ige_tau: Vec<f64>,
    pub closed_mode: ClosedMode,
    pub rows: u64,
    /// Cells left blank because the quantity is undefined there.
    pub blank_cells: usize,
    pub columns: Vec<String>,
    /// SHA-256 of the sweep definition.
    pub config_hash: String,
}

fn sweep_columns(spec: &SweepSpec) -> Vec<String> {
    let mut cols: Vec<String> = ["r", "lambda", "xi", "l"].iter().map(|s| s.to_string()).collect();
    for q in &spec.quantities {
        match q {
            Quantity::ScalarCurvature => cols.push("scalar_curvature".into()),
            Quantity::Lambda1 => cols.push("lambda1".into()),
            Quantity::Lambda2 => cols.push("lambda2".into()),
            Quantity::Sigma => cols.push("sigma".into()),
            Quantity::Ige => cols.extend(spec.ige_tau.iter().map(|t| format!("ige_at_{}", fmt_f64(*t)))),
        }
    }
    cols
}

/// Point `idx` in row-major order over (r, λ, Ξ, l), l varying fastest.
fn sweep_point(spec: &SweepSpec, idx: usize) -> (f64, f64, f64, usize) {
    let nl = spec.l.len();
    let nx = spec.xi.len();
    let nlam = spec.lambda.len();
    let il = idx % nl;
    let ix = (idx / nl) % nx;
    let ilam = (idx / (nl * nx)) % nlam;
    let ir = idx / (nl * nx * nlam);
    (spec.r[ir], spec.lambda[ilam], spec.xi[ix], spec.l[il])
}

fn sweep_row(spec: &SweepSpec, closed: ClosedMode, idx: usize) -> (Vec<String>, usize) {
    let (r, lam, xi, l) = sweep_point(spec, idx);
    let mut row = vec![fmt_f64(r), fmt_f64(lam), fmt_f64(xi), l.to_string()];
    let mut blanks = 0;
    let mut cell = |v: igeo_core::Result<f64>| match v {
        Ok(x) => fmt_f64(x),
        Err(_) => {
            blanks += 1;
            String::new()
        }
    };
    for q in &spec.quantities {
        match q {
            Quantity::ScalarCurvature => row.push(fmt_f64(scalar_curvature_for(&vec![r; l]))),
            Quantity::Lambda1 => row.push(fmt_f64(lambda1(r))),
            Quantity::Lambda2 => row.push(cell(lambda2(r, lam, xi))),
            Quantity::Sigma => row.push(cell(sigma_fn(r, lam, xi))),
            Quantity::Ige => {
                let params = ModelParams::uniform(l, r, lam, xi);
                for &t in &spec.ige_tau {
                    row.push(cell(params.clone().and_then(|p| ige_with(t, &p, closed))));
                }
            }
        }
    }
    (row, blanks)
}

pub fn config_hash(spec: &SweepSpec, closed: ClosedMode) -> String {
    let text = serde_json::to_string(&(spec, closed)).expect("sweep spec serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sweep(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<SweepManifest> {
    let spec = &cfg.sweep;
    let n = spec.size();
    if n > spec.max_points && !spec.allow_large {
        return Err(CliError::Usage(format!(
            "sweep has {n} grid points, above the cap of {}; pass --allow-large to run it anyway",
            spec.max_points
        )));
    }
    let closed = cfg.ige.closed_mode;
    let cells: Vec<(Vec<String>, usize)> = (0..n as usize).into_par_iter().map(|i| sweep_row(spec, closed, i)).collect();
    let blank_cells = cells.iter().map(|(_, b)| b).sum();
    let rows: Vec<Vec<String>> = cells.into_iter().map(|(r, _)| r).collect();
    let columns = sweep_columns(spec);
    let manifest = SweepManifest {
        axis_order: ["r", "lambda", "xi", "l"],
        r: spec.r.clone(),
        lambda: spec.lambda.clone(),
        xi: spec.xi.clone(),
        l: spec.l.clone(),
        quantities: spec.quantities.clone(),
        ige_tau: spec.ige_tau.clone(),
        closed_mode: closed,
        rows: n,
        blank_cells,
        columns: columns.clone(),
        config_hash: config_hash(spec, closed),
    };
    say(out, format!("sweep: {n} grid points ({} r x {} lambda x {} xi x {} l)", spec.r.len(), spec.lambda.len(), spec.xi.len(), spec.l.len()))?;
    if blank_cells > 0 {
        say(out, format!("{blank_cells} cells left blank where the quantity is undefined"))?;
    }
    say(out, format!("config hash {}", manifest.config_hash))?;
    let mut sink = Sink::new(&cfg.output);
    let header: Vec<&str> = columns.iter().map(String::as_str).collect();
    sink.csv("sweep.csv", &header, &rows)?;
    sink.json("sweep_manifest.json", &manifest)?;
    report_files(out, &sink)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::from_value;
    use serde_json::json;

    #[test]
    fn sweep_order_puts_l_fastest() {
        let cfg = from_value(&json!({"sweep": {"r": [0.1, 0.2], "lambda": [1.0, 2.0], "xi": [3.0], "l": [1, 2]}})).unwrap();
        let pts: Vec<_> = (0..8).map(|i| sweep_point(&cfg.sweep, i)).collect();
        assert_eq!(pts[0], (0.1, 1.0, 3.0, 1));
        assert_eq!(pts[1], (0.1, 1.0, 3.0, 2));
        assert_eq!(pts[2], (0.1, 2.0, 3.0, 1));
        assert_eq!(pts[4], (0.2, 1.0, 3.0, 1));
        assert_eq!(pts[7], (0.2, 2.0, 3.0, 2));
    }

    #[test]
    fn hash_tracks_the_definition() {
        let a = from_value(&json!({"sweep": {"r": [0.1, 0.2]}})).unwrap();
        let b = from_value(&json!({"sweep": {"r": [0.1, 0.3]}})).unwrap();
        let h = config_hash(&a.sweep, ClosedMode::Exact);
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&a.sweep, ClosedMode::Exact));
        assert_ne!(h, config_hash(&b.sweep, ClosedMode::Exact));
        assert_ne!(h, config_hash(&a.sweep, ClosedMode::Asymptotic));
    }

    #[test]
    fn sweep_columns_expand_ige_taus() {
        let cfg = from_value(&json!({"sweep": {"quantities": ["lambda1", "ige"], "ige_tau": [10.0, 1e6]}})).unwrap();
        assert_eq!(sweep_columns(&cfg.sweep), vec!["r", "lambda", "xi", "l", "lambda1", "ige_at_10.0", "ige_at_1000000.0"]);
    }
}
