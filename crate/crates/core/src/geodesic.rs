//! Geodesic flow: right-hand sides of the three geodesic systems, numerical
//! integration, the closed-form solutions and the long-time hypothesis check.
//!
//! The ODE state vector is `[positions (2l) | velocities (2l)]` in the
//! interleaved `(μ_k, σ_k)` ordering of the chart being integrated.

use serde::{Deserialize, Serialize};

use crate::diagonal::{self, block_eigen, BlockEigen};
use crate::error::{Error, Result};
use crate::manifold::{metric_block, Chart, Macrostate, ModelParams};
use crate::mat2;
use crate::ode::{dopri5, OdeFailure, OdeOptions, OdeStats};

/// Integration halts when any σ-like coordinate drops below this floor.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeodesicSystem {
    /// Geodesics of the full correlated metric, original chart.
    FullCorrelated,
    /// Geodesics of the truncated long-time metric, diagonal chart.
    DiagonalAsymptotic,
    /// The diagonal system after the μ̃ rescaling, canonical chart.
    Canonical,
}

impl GeodesicSystem {
    pub fn chart(self) -> Chart {
        match self {
            GeodesicSystem::FullCorrelated => Chart::Original,
            GeodesicSystem::DiagonalAsymptotic => Chart::Diagonal,
            GeodesicSystem::Canonical => Chart::Canonical,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeodesicSystem::FullCorrelated => "full",
            GeodesicSystem::DiagonalAsymptotic => "diag",
            GeodesicSystem::Canonical => "canonical",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub tau: f64,
    pub position: Macrostate,
    pub velocity: Vec<f64>,
}

impl GeodesicState {
    pub fn new(tau: f64, position: Macrostate, velocity: Vec<f64>) -> Result<Self> {
        if velocity.len() != position.coords().len() {
            return Err(Error::Argument(format!(
                "velocity has {} components, position has {}",
                velocity.len(),
                position.coords().len()
            )));
        }
        Ok(Self { tau, position, velocity })
    }

    /// Same point, velocity reversed, affine parameter reset to zero.
    pub fn reversed(&self) -> Self {
        Self {
            tau: 0.0,
            position: self.position.clone(),
            velocity: self.velocity.iter().map(|v| -v).collect(),
        }
    }
}

fn sigma_guard(k: usize, sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("block {k}: sigma coordinate {sigma} is not positive")))
    }
}

/// Acceleration of one block of the full correlated system.
pub fn accel_full(r: f64, sigma: f64, dmu: f64, dsigma: f64) -> [f64; 2] {
    let f = 1.0 / ((2.0 - r * r) * sigma);
    [
        (r * dmu * dmu + 4.0 * dmu * dsigma + 2.0 * r * dsigma * dsigma) * f,
        -(dmu * dmu + 2.0 * r * dmu * dsigma + (2.0 * r * r - 2.0) * dsigma * dsigma) * f,
    ]
}

/// Acceleration of one block of the diagonal system with `ratio = α₋/α₊`.
pub fn accel_diagonal(ratio: f64, sigma: f64, dmu: f64, dsigma: f64) -> [f64; 2] {
    [
        2.0 * dmu * dsigma / sigma,
        -ratio * dmu * dmu / sigma + dsigma * dsigma / sigma,
    ]
}

/// Acceleration of one block of the canonical system.
pub fn accel_canonical(sigma: f64, dmu: f64, dsigma: f64) -> [f64; 2] {
    accel_diagonal(0.5, sigma, dmu, dsigma)
}

fn check_state(state: &GeodesicState, chart: Chart, l: Option<usize>) -> Result<()> {
    if state.position.chart() != chart {
        return Err(Error::Argument(format!(
            "expected a {} chart state, got {}",
            chart.name(),
            state.position.chart().name()
        )));
    }
    if let Some(l) = l {
        if state.position.blocks() != l {
            return Err(Error::Argument(format!(
                "state has {} blocks, model has {l}",
                state.position.blocks()
            )));
        }
    }
    if state.velocity.len() != state.position.coords().len() {
        return Err(Error::Argument("velocity dimension mismatch".into()));
    }
    Ok(())
}

pub fn rhs_full(state: &GeodesicState, params: &ModelParams) -> Result<Vec<f64>> {
    check_state(state, Chart::Original, Some(params.l()))?;
    let mut out = vec![0.0; state.velocity.len()];
    full_into(params.r(), state.position.coords(), &state.velocity, &mut out)?;
    Ok(out)
}

pub fn rhs_diagonal(state: &GeodesicState, params: &ModelParams) -> Result<Vec<f64>> {
    check_state(state, Chart::Diagonal, Some(params.l()))?;
    let ratios = alpha_ratios(params)?;
    let mut out = vec![0.0; state.velocity.len()];
    diagonal_into(&ratios, state.position.coords(), &state.velocity, &mut out)?;
    Ok(out)
}

pub fn rhs_canonical(state: &GeodesicState) -> Result<Vec<f64>> {
    check_state(state, Chart::Canonical, None)?;
    let ratios = vec![0.5; state.position.blocks()];
    let mut out = vec![0.0; state.velocity.len()];
    diagonal_into(&ratios, state.position.coords(), &state.velocity, &mut out)?;
    Ok(out)
}

fn alpha_ratios(params: &ModelParams) -> Result<Vec<f64>> {
    params
        .r()
        .iter()
        .map(|&r| block_eigen(r).map(|e| e.alpha_minus / e.alpha_plus))
        .collect()
}

fn full_into(r: &[f64], pos: &[f64], vel: &[f64], out: &mut [f64]) -> Result<()> {
    for (k, &rk) in r.iter().enumerate() {
        let sigma = pos[2 * k + 1];
        sigma_guard(k, sigma)?;
        let a = accel_full(rk, sigma, vel[2 * k], vel[2 * k + 1]);
        out[2 * k] = a[0];
        out[2 * k + 1] = a[1];
    }
    Ok(())
}

fn diagonal_into(ratios: &[f64], pos: &[f64], vel: &[f64], out: &mut [f64]) -> Result<()> {
    for (k, &q) in ratios.iter().enumerate() {
        let sigma = pos[2 * k + 1];
        sigma_guard(k, sigma)?;
        let a = accel_diagonal(q, sigma, vel[2 * k], vel[2 * k + 1]);
        out[2 * k] = a[0];
        out[2 * k + 1] = a[1];
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 1e-12 }
    }
}

/// Where a trajectory came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Integrated(GeodesicSystem),
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicTrajectory {
    pub source: TrajectorySource,
    pub samples: Vec<GeodesicState>,
    pub stats: OdeStats,
}

impl GeodesicTrajectory {
    pub fn first(&self) -> Option<&GeodesicState> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&GeodesicState> {
        self.samples.last()
    }

    /// `g(Θ̇, Θ̇)` under the full metric at every sample. Original chart only.
    pub fn squared_speeds(&self, params: &ModelParams) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| {
                check_state(s, Chart::Original, Some(params.l()))?;
                let mut total = 0.0;
                for (k, &r) in params.r().iter().enumerate() {
                    let (_, sigma) = s.position.block(k);
                    let g = metric_block(r, sigma);
                    total += mat2::quadratic_form(&g, &[s.velocity[2 * k], s.velocity[2 * k + 1]]);
                }
                Ok(total)
            })
            .collect()
    }

    /// Largest relative deviation of the squared speed from its initial value.
    pub fn speed_drift(&self, params: &ModelParams) -> Result<f64> {
        let speeds = self.squared_speeds(params)?;
        let first = *speeds
            .first()
            .ok_or_else(|| Error::Argument("empty trajectory".into()))?;
        if first == 0.0 {
            return Ok(speeds.iter().fold(0.0, |m, s| m.max(s.abs())));
        }
        Ok(speeds
            .iter()
            .fold(0.0, |m: f64, s| m.max(((s - first) / first).abs())))
    }
}

fn split_failure(f: OdeFailure, chart: Chart) -> Error {
    let split = |y: Vec<f64>| {
        let half = y.len() / 2;
        (y[..half].to_vec(), y[half..].to_vec())
    };
    match f {
        OdeFailure::Underflow { t, h, y } => {
            let (p, v) = split(y);
            Error::StepUnderflow { tau: t, step: h, last_position: p, last_velocity: v }
        }
        OdeFailure::Halted { t, y, message } => {
            let (p, v) = split(y);
            Error::Singularity { tau: t, message, last_position: p, last_velocity: v }
        }
        OdeFailure::TooManySteps { t, y } => {
            let (p, v) = split(y);
            Error::Singularity {
                tau: t,
                message: format!("step budget exhausted in the {} chart", chart.name()),
                last_position: p,
                last_velocity: v,
            }
        }
        OdeFailure::Rhs(e) => e,
    }
}

/// Integrates a geodesic system from `initial` up to `tau_end`.
pub fn integrate(
    system: GeodesicSystem,
    params: &ModelParams,
    initial: &GeodesicState,
    tau_end: f64,
    tol: Tolerances,
) -> Result<GeodesicTrajectory> {
    let chart = system.chart();
    check_state(initial, chart, Some(params.l()))?;
    if !(tau_end > initial.tau) {
        return Err(Error::Argument(format!(
            "tau_end = {tau_end} must exceed the initial tau = {}",
            initial.tau
        )));
    }
    for (name, v) in [("rel_tol", tol.rel), ("abs_tol", tol.abs)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Argument(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    let n = initial.velocity.len();
    let r = params.r().to_vec();
    let ratios = match system {
        GeodesicSystem::FullCorrelated => Vec::new(),
        GeodesicSystem::DiagonalAsymptotic => alpha_ratios(params)?,
        GeodesicSystem::Canonical => vec![0.5; params.l()],
    };
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (pos, vel) = y.split_at(n);
        dy[..n].copy_from_slice(vel);
        match system {
            GeodesicSystem::FullCorrelated => full_into(&r, pos, vel, &mut dy[n..]),
            _ => diagonal_into(&ratios, pos, vel, &mut dy[n..]),
        }
    };
    let floor_check = |_t: f64, y: &[f64]| -> std::result::Result<(), String> {
        for k in 0..n / 2 {
            let s = y[2 * k + 1];
            if !(s >= SIGMA_FLOOR) {
                return Err(format!("block {k}: sigma coordinate {s:e} crossed the floor {SIGMA_FLOOR:e}"));
            }
        }
        Ok(())
    };
    let mut y0 = initial.position.coords().to_vec();
    y0.extend_from_slice(&initial.velocity);
    let opts = OdeOptions {
        rel_tol: tol.rel,
        abs_tol: tol.abs,
        ..Default::default()
    };
    let sol = dopri5(rhs, initial.tau, &y0, tau_end, &opts, floor_check)
        .map_err(|f| split_failure(f, chart))?;
    let samples = sol
        .t
        .iter()
        .zip(sol.y)
        .map(|(&tau, mut y)| {
            let velocity = y.split_off(n);
            Ok(GeodesicState {
                tau,
                position: Macrostate::new(chart, y)?,
                velocity,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GeodesicTrajectory {
        source: TrajectorySource::Integrated(system),
        samples,
        stats: sol.stats,
    })
}

/// Closed-form canonical geodesic and its first two τ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalJet {
    pub mu: f64,
    pub sigma: f64,
    pub dmu: f64,
    pub dsigma: f64,
    pub d2mu: f64,
    pub d2sigma: f64,
}

/// `μ′(τ) = (Ξ²/2λ)/(e^{−2λτ} + Ξ²/8λ²) − 4λ`, `σ′(τ) = Ξ e^{−λτ}/(e^{−2λτ} + Ξ²/8λ²)`.
///
/// μ′ is evaluated as the algebraically identical `−4λ e^{−2λτ}/(e^{−2λτ} + Ξ²/8λ²)`,
/// which keeps full relative accuracy as τ grows.
pub fn analytic_geodesic_canonical(tau: f64, xi: f64, lam: f64) -> (f64, f64) {
    let j = analytic_canonical_jet(tau, xi, lam);
    (j.mu, j.sigma)
}

pub fn analytic_canonical_jet(tau: f64, xi: f64, lam: f64) -> CanonicalJet {
    let s = (-lam * tau).exp();
    let s2 = s * s;
    let k = xi * xi / (8.0 * lam * lam);
    let den = s2 + k;
    let den2 = den * den;
    let den3 = den2 * den;
    CanonicalJet {
        mu: -4.0 * lam * s2 / den,
        sigma: xi * s / den,
        dmu: xi * xi * s2 / den2,
        dsigma: xi * lam * s * (s2 - k) / den2,
        d2mu: -2.0 * lam * xi * xi * s2 * (k - s2) / den3,
        d2sigma: xi * lam * lam * s * (s2 * s2 - 6.0 * k * s2 + k * k) / den3,
    }
}

/// The canonical solution exactly as printed, with the explicit `− 4λ`.
pub fn analytic_geodesic_canonical_printed(tau: f64, xi: f64, lam: f64) -> (f64, f64) {
    let den = (-2.0 * lam * tau).exp() + xi * xi / (8.0 * lam * lam);
    (
        xi * xi / (2.0 * lam) / den - 4.0 * lam,
        xi * (-lam * tau).exp() / den,
    )
}

fn block_params(params: &ModelParams, k: usize) -> Result<(f64, f64, f64)> {
    if k >= params.l() {
        return Err(Error::Argument(format!("block {k} out of range (l = {})", params.l())));
    }
    Ok((params.r()[k], params.lambda()[k], params.xi()[k]))
}

/// Closed-form geodesic of block `k` in the original chart, assembled by
/// undoing the canonical rescaling and then applying `E(r)`.
pub fn analytic_geodesic_original(tau: f64, params: &ModelParams, k: usize) -> Result<(f64, f64)> {
    let (r, lam, xi) = block_params(params, k)?;
    let eig = block_eigen(r)?;
    let (mu_c, sigma_c) = analytic_geodesic_canonical(tau, xi, lam);
    let diag = [mu_c / eig.canonical_scale(), sigma_c];
    let [mu, sigma] = mat2::apply(&eig.e, &diag);
    Ok((mu, sigma))
}

/// The printed original-chart closed form, evaluated term by term.
pub fn analytic_geodesic_original_printed(tau: f64, r: f64, lam: f64, xi: f64) -> (f64, f64) {
    let root = (1.0 + 4.0 * r * r).sqrt();
    let alpha_m = (3.0 - root) / 2.0;
    let alpha_p = (3.0 + root) / 2.0;
    let q = (alpha_p / (2.0 * alpha_m)).sqrt();
    let den = (-2.0 * lam * tau).exp() + xi * xi / (8.0 * lam * lam);
    let bracket = xi * xi / (2.0 * lam) / den - 4.0 * lam;
    let tail = xi * (-lam * tau).exp() / den;
    (
        q * bracket + tail,
        (1.0 - root) / (2.0 * r) * q * bracket + (1.0 + root) / (2.0 * r) * tail,
    )
}

fn canonical_to(eig: &BlockEigen, chart: Chart, v: [f64; 2]) -> [f64; 2] {
    let diag = [v[0] / eig.canonical_scale(), v[1]];
    match chart {
        Chart::Canonical => v,
        Chart::Diagonal => diag,
        Chart::Original => mat2::apply(&eig.e, &diag),
    }
}

/// State on the closed-form geodesic at `tau`, expressed in `chart`, with
/// each block driven by its own `(r_k, λ_k, Ξ_k)`.
pub fn analytic_state(params: &ModelParams, tau: f64, chart: Chart) -> Result<GeodesicState> {
    let mut pos = Vec::with_capacity(2 * params.l());
    let mut vel = Vec::with_capacity(2 * params.l());
    for k in 0..params.l() {
        let (r, lam, xi) = block_params(params, k)?;
        let eig = block_eigen(r)?;
        let j = analytic_canonical_jet(tau, xi, lam);
        pos.extend(canonical_to(&eig, chart, [j.mu, j.sigma]));
        vel.extend(canonical_to(&eig, chart, [j.dmu, j.dsigma]));
    }
    GeodesicState::new(tau, Macrostate::new(chart, pos)?, vel)
}

/// Samples the closed-form geodesic on a τ grid.
pub fn analytic_trajectory(params: &ModelParams, taus: &[f64], chart: Chart) -> Result<GeodesicTrajectory> {
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument("tau grid must be strictly increasing".into()));
    }
    let samples = taus
        .iter()
        .map(|&t| analytic_state(params, t, chart))
        .collect::<Result<_>>()?;
    Ok(GeodesicTrajectory {
        source: TrajectorySource::Analytic,
        samples,
        stats: OdeStats::default(),
    })
}

/// Outcome of the long-time hypothesis `|μ̃/σ̃| ≪ |a₁/a₀|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// Supremum of `|μ̃/σ̃|·|a₀/a₁|` over the trailing half of the trajectory.
    pub max_ratio: f64,
    pub margin: f64,
    pub threshold_ok: bool,
}

pub const DEFAULT_HYPOTHESIS_MARGIN: f64 = 0.1;

/// `|μ̃/σ̃|·|a₀/a₁|` per sample (maximised over blocks), positions mapped to
/// the diagonal chart first.
pub fn hypothesis_series(traj: &GeodesicTrajectory, params: &ModelParams) -> Result<Vec<(f64, f64)>> {
    if traj.samples.is_empty() {
        return Err(Error::Argument("empty trajectory".into()));
    }
    let weights: Vec<f64> = params
        .r()
        .iter()
        .map(|&r| block_eigen(r).map(|e| (e.a0() / e.a1()).abs()))
        .collect::<Result<_>>()?;
    traj.samples
        .iter()
        .map(|s| {
            let d = diagonal::convert(&s.position, params, Chart::Diagonal)?;
            let mut worst: f64 = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let (m, sig) = d.block(k);
                if !(sig > 0.0) {
                    return Err(Error::Argument(format!(
                        "sigma~[{k}] = {sig} is not positive at tau = {}",
                        s.tau
                    )));
                }
                worst = worst.max((m / sig).abs() * w);
            }
            Ok((s.tau, worst))
        })
        .collect()
}

pub fn hypothesis_check(traj: &GeodesicTrajectory, params: &ModelParams, margin: f64) -> Result<HypothesisReport> {
    let series = hypothesis_series(traj, params)?;
    let t0 = series[0].0;
    let t1 = series[series.len() - 1].0;
    let mid = 0.5 * (t0 + t1);
    let max_ratio = series
        .iter()
        .filter(|(t, _)| *t >= mid)
        .fold(0.0, |m: f64, (_, v)| m.max(*v));
    Ok(HypothesisReport {
        max_ratio,
        margin,
        threshold_ok: max_ratio < margin,
    })
}

/// Result of the single-shooting boundary-value wrapper.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingResult {
    pub initial_velocity: Vec<f64>,
    pub trajectory: GeodesicTrajectory,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub ode: Tolerances,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-9,
            ode: Tolerances::default(),
        }
    }
}

/// Finds the initial velocity of the full-system geodesic joining `start`
/// (at τ = 0) to `target` (at τ = `tau_end`) by damped Newton iteration on
/// the shooting residual.
pub fn shoot_full(
    params: &ModelParams,
    start: &Macrostate,
    target: &Macrostate,
    tau_end: f64,
    opts: ShootingOptions,
) -> Result<ShootingResult> {
    start.require(Chart::Original, params)?;
    target.require(Chart::Original, params)?;
    let n = start.coords().len();
    let endpoint = |v: &[f64]| -> Result<(Vec<f64>, GeodesicTrajectory)> {
        let init = GeodesicState::new(0.0, start.clone(), v.to_vec())?;
        let traj = integrate(GeodesicSystem::FullCorrelated, params, &init, tau_end, opts.ode)?;
        let end = traj.last().expect("trajectory has samples").position.coords();
        let res = end.iter().zip(target.coords()).map(|(a, b)| a - b).collect();
        Ok((res, traj))
    };
    let norm = |v: &[f64]| v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));

    let mut v: Vec<f64> = target
        .coords()
        .iter()
        .zip(start.coords())
        .map(|(b, a)| (b - a) / tau_end)
        .collect();
    let (mut res, mut traj) = endpoint(&v)?;
    let mut iterations = 0;
    while norm(&res) > opts.tolerance {
        if iterations == opts.max_iterations {
            return Err(Error::Accuracy {
                estimate: norm(&res),
                error_estimate: norm(&res),
                target: opts.tolerance,
            });
        }
        iterations += 1;
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let h = 1e-7 * v[j].abs().max(1e-3);
            let mut vp = v.clone();
            vp[j] += h;
            let (rp, _) = endpoint(&vp)?;
            for i in 0..n {
                jac[i][j] = (rp[i] - res[i]) / h;
            }
        }
        let step = solve_dense(jac, res.iter().map(|x| -x).collect())?;
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(a, d)| a + damping * d).collect();
            match endpoint(&trial) {
                Ok((r_new, t_new)) if norm(&r_new) < norm(&res) => {
                    v = trial;
                    res = r_new;
                    traj = t_new;
                    break;
                }
                _ if damping > 1e-4 => damping *= 0.5,
                _ => {
                    return Err(Error::Accuracy {
                        estimate: norm(&res),
                        error_estimate: norm(&res),
                        target: opts.tolerance,
                    })
                }
            }
        }
    }
    Ok(ShootingResult {
        residual: norm(&res),
        initial_velocity: v,
        trajectory: traj,
        iterations,
    })
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Data("singular shooting Jacobian".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}
