//! Information geometric complexity `V(τ)` and entropy `S(τ) = log V(τ)`
//! along the canonical geodesic, with an independent quadrature oracle.
//!
//! Per block the time average reduces to
//! `V(τ) = (√(2−r²)/τ) ∫₀^τ (A e^{−λt} + B e^{−2λt}) / (C e^{−λt} + D e^{−2λt}) dt`.
//! The antiderivative of the integrand is
//! `F(τ) = (1/λ)(A/C − B/D) ln(Σ + e^{−λτ}) + (A/C) τ` with `Σ = C/D`, so
//! three closed evaluations are available:
//!
//! * [`InnerMode::Definite`]: `F(τ) − F(0)`, the integral over `[0, τ]`;
//! * [`InnerMode::Antiderivative`]: `F(τ)` on its own;
//! * [`InnerMode::Asymptotic`]: `F` with `e^{−λτ}` dropped, which gives
//!   `V = Λ₁ + Λ₂/τ`.
//!
//! The definite and antiderivative forms differ by `F(0)`, a constant that
//! survives as an `O(1/τ)` term in `V`. Blocks combine multiplicatively so
//! that `S` is additive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::analytic_geodesic_original;
use crate::manifold::{DensityMode, ModelParams};
use crate::quadrature::{self, QuadOptions};

fn check_block(r: f64, lam: f64, xi: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("r = {r} outside (0,1)")));
    }
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(Error::Domain(format!("lambda = {lam} must be positive and finite")));
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Domain(format!("xi = {xi} must be positive and finite")));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau = {tau} must be positive and finite")));
    }
    Ok(())
}

/// `√Δ = √(1 + 4r²)`.
fn root_delta(r: f64) -> f64 {
    (1.0 + 4.0 * r * r).sqrt()
}

/// `√(α₊ / 2α₋)`.
fn q_factor(r: f64) -> f64 {
    let root = root_delta(r);
    ((3.0 + root) / (2.0 * (3.0 - root))).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbcdCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl AbcdCoefficients {
    /// `Σ = C/D`.
    pub fn sigma(&self) -> f64 {
        self.c / self.d
    }

    /// `A/C − B/D`, equal to `√Δ / r`.
    pub fn log_weight(&self) -> f64 {
        self.a / self.c - self.b / self.d
    }

    pub fn slope(&self) -> f64 {
        self.a / self.c
    }
}

pub fn abcd(r: f64, lam: f64, xi: f64) -> Result<AbcdCoefficients> {
    check_block(r, lam, xi)?;
    let root = root_delta(r);
    let a1 = (1.0 + root) / (2.0 * r);
    // a₀·a₁ = −1; this avoids the cancellation in (1 − √Δ)/(2r) at small r.
    let a0 = -1.0 / a1;
    let b = -4.0 * lam * q_factor(r);
    Ok(AbcdCoefficients {
        a: xi,
        b,
        c: a1 * xi,
        d: b * a0,
    })
}

/// The time-average integrand `(A + B e^{−λt}) / (C + D e^{−λt})`.
pub fn ige_integrand(tau: f64, r: f64, lam: f64, xi: f64) -> Result<f64> {
    let k = abcd(r, lam, xi)?;
    Ok(integrand_from(&k, lam, tau))
}

fn integrand_from(k: &AbcdCoefficients, lam: f64, t: f64) -> f64 {
    let e = (-lam * t).exp();
    let den = k.c + k.d * e;
    assert!(den > 0.0, "integrand denominator {den} not positive");
    (k.a + k.b * e) / den
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerMode {
    Definite,
    Antiderivative,
    Asymptotic,
}

pub fn inner_integral_closed(tau: f64, k: &AbcdCoefficients, lam: f64, mode: InnerMode) -> f64 {
    let w = k.log_weight() / lam;
    let sigma = k.sigma();
    let log_term = match mode {
        InnerMode::Definite => (f64::exp_m1(-lam * tau) / (sigma + 1.0)).ln_1p(),
        InnerMode::Antiderivative => (sigma + (-lam * tau).exp()).ln(),
        InnerMode::Asymptotic => sigma.ln(),
    };
    w * log_term + k.slope() * tau
}

/// Saturation value `Λ₁(r) = 2r√(2−r²)/(1+√(1+4r²))`. Accepts the closed
/// interval so that the `r → 0` and `r → 1` limits can be evaluated.
pub fn lambda1(r: f64) -> f64 {
    2.0 * r * (2.0 - r * r).sqrt() / (1.0 + root_delta(r))
}

pub fn sigma_fn(r: f64, lam: f64, xi: f64) -> Result<f64> {
    check_block(r, lam, xi)?;
    let a1 = (1.0 + root_delta(r)) / (2.0 * r);
    Ok(xi * a1 * a1 / (4.0 * lam * q_factor(r)))
}

/// `Λ₂(r, λ) = √((1+4r²)(2−r²))/r · ln Σ / λ`.
pub fn lambda2(r: f64, lam: f64, xi: f64) -> Result<f64> {
    let sigma = sigma_fn(r, lam, xi)?;
    Ok(((1.0 + 4.0 * r * r) * (2.0 - r * r)).sqrt() / r * sigma.ln() / lam)
}

/// `Λ₂` in the two-term bracket form
/// `2r√(2−r²) ln Σ / λ · [1/(1+√Δ) − 1/(1−√Δ)]`.
pub fn lambda2_bracket(r: f64, lam: f64, xi: f64) -> Result<f64> {
    let ln_sigma = sigma_fn(r, lam, xi)?.ln();
    let root = root_delta(r);
    let pre = 2.0 * r * (2.0 - r * r).sqrt() * ln_sigma / lam;
    Ok(pre / (1.0 + root) - pre / (1.0 - root))
}

/// `√(2−r²)·F(0)`: the constant dropped by the asymptotic form relative to
/// the integral over `[0, τ]`.
pub fn lower_limit_offset(r: f64, lam: f64, xi: f64) -> Result<f64> {
    let k = abcd(r, lam, xi)?;
    Ok((2.0 - r * r).sqrt() * k.log_weight() / lam * (k.sigma() + 1.0).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosedMode {
    /// `(√(2−r²)/τ)(F(τ) − F(0))`.
    #[default]
    Exact,
    /// `(√(2−r²)/τ) F(τ)`.
    Antiderivative,
    /// `Λ₁ + Λ₂/τ`.
    Asymptotic,
}

pub fn igc_closed_block(tau: f64, r: f64, lam: f64, xi: f64, mode: ClosedMode) -> Result<f64> {
    check_tau(tau)?;
    let k = abcd(r, lam, xi)?;
    let inner = match mode {
        ClosedMode::Exact => InnerMode::Definite,
        ClosedMode::Antiderivative => InnerMode::Antiderivative,
        ClosedMode::Asymptotic => return Ok(lambda1(r) + lambda2(r, lam, xi)? / tau),
    };
    Ok((2.0 - r * r).sqrt() * inner_integral_closed(tau, &k, lam, inner) / tau)
}

/// Product of the per-block closed values.
pub fn igc_closed(tau: f64, params: &ModelParams, mode: ClosedMode) -> Result<f64> {
    block_iter(params).try_fold(1.0, |acc, (r, lam, xi)| Ok(acc * igc_closed_block(tau, r, lam, xi, mode)?))
}

fn block_iter(params: &ModelParams) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
    (0..params.l()).map(|k| (params.r()[k], params.lambda()[k], params.xi()[k]))
}

/// Per-block time average by adaptive quadrature. `Paper` integrates the
/// reduced integrand; `Determinant` divides it by σ along the geodesic,
/// which is the `√det g` weighting.
pub fn igc_quadrature_block(
    tau: f64,
    r: f64,
    lam: f64,
    xi: f64,
    density: DensityMode,
    opts: &QuadOptions,
) -> Result<f64> {
    check_tau(tau)?;
    let k = abcd(r, lam, xi)?;
    let pre = (2.0 - r * r).sqrt() / tau;
    let points = transient_breakpoints(tau, lam);
    let res = match density {
        DensityMode::Paper => quadrature::integrate_points(|t| integrand_from(&k, lam, t), &points, opts)?,
        DensityMode::Determinant => {
            let params = ModelParams::uniform(1, r, lam, xi)?;
            let mut failure = None;
            let res = quadrature::integrate_points(
                |t| match analytic_geodesic_original(t, &params, 0) {
                    Ok((_, sigma)) => integrand_from(&k, lam, t) / sigma,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                &points,
                opts,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            res?
        }
    };
    Ok(pre * res.value)
}

/// `0, 1/λ, 4/λ, 16/λ, …, τ`: the integrand relaxes on the `1/λ` scale
/// and is flat afterwards.
fn transient_breakpoints(tau: f64, lam: f64) -> Vec<f64> {
    let mut points = vec![0.0];
    let mut p = 1.0 / lam;
    while p < tau {
        points.push(p);
        p *= 4.0;
    }
    points.push(tau);
    points
}

pub fn igc_quadrature(tau: f64, params: &ModelParams, density: DensityMode, opts: &QuadOptions) -> Result<f64> {
    block_iter(params).try_fold(1.0, |acc, (r, lam, xi)| {
        Ok(acc * igc_quadrature_block(tau, r, lam, xi, density, opts)?)
    })
}

/// `S(τ) = Σ_k log(Λ₁(r_k) + Λ₂(r_k, λ_k)/τ)`.
pub fn ige(tau: f64, params: &ModelParams) -> Result<f64> {
    ige_with(tau, params, ClosedMode::Asymptotic)
}

/// `S(τ) = Σ_k log V_k(τ)` with the per-block value taken in `mode`.
pub fn ige_with(tau: f64, params: &ModelParams, mode: ClosedMode) -> Result<f64> {
    let mut s = 0.0;
    for (idx, (r, lam, xi)) in block_iter(params).enumerate() {
        let v = igc_closed_block(tau, r, lam, xi, mode)?;
        if !(v > 0.0) {
            return Err(Error::Domain(format!(
                "log argument {v} is not positive for block {idx} at tau = {tau}"
            )));
        }
        s += v.ln();
    }
    Ok(s)
}

/// `Π_k Λ₁(r_k)`.
pub fn igc_saturation(params: &ModelParams) -> f64 {
    params.r().iter().map(|&r| lambda1(r)).product()
}

/// `Σ_k log Λ₁(r_k)`.
pub fn ige_saturation(params: &ModelParams) -> f64 {
    params.r().iter().map(|&r| lambda1(r).ln()).sum()
}

/// Entropy of the uncorrelated model, `Σ_k λ_k τ`.
pub fn uncorrelated_baseline(tau: f64, lambdas: &[f64]) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("tau = {tau} must be non-negative")));
    }
    if let Some(bad) = lambdas.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Domain(format!("lambda = {bad} must be positive")));
    }
    Ok(lambdas.iter().sum::<f64>() * tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    /// Intercept of `log|value − saturation|` against `log τ`.
    pub intercept: f64,
    /// Sign of `value − saturation` over the grid.
    pub sign: f64,
    /// RMS of the log-space residuals.
    pub residual: f64,
}

/// Least-squares slope of `log|value − saturation|` against `log τ`.
///
/// The gap must keep one sign over the whole grid, which must span at least
/// two decades.
pub fn power_law_fit(taus: &[f64], values: &[f64], saturation: f64) -> Result<PowerLawFit> {
    if taus.len() != values.len() {
        return Err(Error::Argument(format!(
            "{} tau values but {} samples",
            taus.len(),
            values.len()
        )));
    }
    if taus.len() < 3 {
        return Err(Error::Data("power-law fit needs at least 3 points".into()));
    }
    if let Some(t) = taus.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Data(format!("tau = {t} is not positive")));
    }
    let lo = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = taus.iter().cloned().fold(0.0, f64::max);
    if (hi / lo).log10() < 2.0 - 1e-9 {
        return Err(Error::Data(format!("tau grid [{lo}, {hi}] spans fewer than two decades")));
    }
    let gaps: Vec<f64> = values.iter().map(|v| v - saturation).collect();
    let sign = gaps[0].signum();
    if let Some((i, g)) = gaps.iter().enumerate().find(|(_, g)| !(g.signum() == sign && **g != 0.0)) {
        return Err(Error::Data(format!(
            "value - saturation = {g} at tau = {} breaks the sign of the first point",
            taus[i]
        )));
    }
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    Ok(PowerLawFit {
        exponent,
        intercept,
        sign,
        residual: (ss / n).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSummary {
    pub r: f64,
    pub lambda: f64,
    pub xi: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma: f64,
    pub lower_limit_offset: f64,
    pub fit: Option<PowerLawFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IgeReport {
    pub closed_mode: ClosedMode,
    pub density_mode: Option<DensityMode>,
    pub tau_grid: Vec<f64>,
    pub v_closed: Vec<f64>,
    /// Present when a quadrature density mode was requested.
    pub v_quadrature: Option<Vec<f64>>,
    pub s_closed: Vec<f64>,
    /// `Π Λ₁`.
    pub saturation: f64,
    /// `Σ log Λ₁`.
    pub entropy_saturation: f64,
    pub blocks: Vec<BlockSummary>,
    /// Fit of `v_closed − saturation`, when the grid allows one.
    pub fit: Option<PowerLawFit>,
    pub fit_quadrature: Option<PowerLawFit>,
    /// Largest `|v_closed − v_quadrature| / |v_closed|` on the grid. Only
    /// meaningful in `Paper` density mode.
    pub max_relative_gap: Option<f64>,
    pub baseline_at_end: f64,
    pub entropy_at_end: f64,
}

impl IgeReport {
    pub fn saturation_gaps(&self) -> Vec<f64> {
        self.v_closed.iter().map(|v| v - self.saturation).collect()
    }
}

/// Builds the report on `taus`. Quadrature runs only when `quadrature` is
/// given.
pub fn ige_report(
    params: &ModelParams,
    taus: &[f64],
    closed: ClosedMode,
    quadrature: Option<(DensityMode, &QuadOptions)>,
) -> Result<IgeReport> {
    if taus.is_empty() {
        return Err(Error::Argument("empty tau grid".into()));
    }
    let mut v_closed = Vec::with_capacity(taus.len());
    let mut s_closed = Vec::with_capacity(taus.len());
    for &tau in taus {
        v_closed.push(igc_closed(tau, params, closed)?);
        s_closed.push(ige_with(tau, params, closed)?);
    }
    let v_quadrature = match quadrature {
        Some((density, opts)) => Some(
            taus.iter()
                .map(|&t| igc_quadrature(t, params, density, opts))
                .collect::<Result<Vec<f64>>>()?,
        ),
        None => None,
    };
    let mut blocks = Vec::with_capacity(params.l());
    for (r, lam, xi) in block_iter(params) {
        let per: Vec<f64> = taus
            .iter()
            .map(|&t| igc_closed_block(t, r, lam, xi, closed))
            .collect::<Result<_>>()?;
        blocks.push(BlockSummary {
            r,
            lambda: lam,
            xi,
            lambda1: lambda1(r),
            lambda2: lambda2(r, lam, xi)?,
            sigma: sigma_fn(r, lam, xi)?,
            lower_limit_offset: lower_limit_offset(r, lam, xi)?,
            fit: power_law_fit(taus, &per, lambda1(r)).ok(),
        });
    }
    let saturation = igc_saturation(params);
    let max_relative_gap = v_quadrature.as_ref().map(|vq| {
        v_closed
            .iter()
            .zip(vq)
            .map(|(c, q)| (c - q).abs() / c.abs())
            .fold(0.0, f64::max)
    });
    let density_mode = quadrature.map(|(d, _)| d);
    let end = *taus.last().unwrap();
    Ok(IgeReport {
        closed_mode: closed,
        density_mode,
        tau_grid: taus.to_vec(),
        fit: power_law_fit(taus, &v_closed, saturation).ok(),
        fit_quadrature: match (&v_quadrature, density_mode) {
            (Some(vq), Some(DensityMode::Paper)) => power_law_fit(taus, vq, saturation).ok(),
            _ => None,
        },
        v_closed,
        v_quadrature,
        entropy_at_end: *s_closed.last().unwrap(),
        s_closed,
        saturation,
        entropy_saturation: ige_saturation(params),
        blocks,
        max_relative_gap,
        baseline_at_end: uncorrelated_baseline(end, params.lambda())?,
    })
}

/// Log-spaced grid of `n` points from `start` to `end` inclusive.
pub fn log_grid(start: f64, end: f64, n: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && end > start) || n < 2 {
        return Err(Error::Argument(format!(
            "log grid needs 0 < start < end and at least 2 points (got {start}, {end}, {n})"
        )));
    }
    let (a, b) = (start.ln(), end.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => start,
            _ if i + 1 == n => end,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

/// Evenly spaced grid of `n` points from `start` to `end` inclusive.
pub fn linear_grid(start: f64, end: f64, n: usize) -> Result<Vec<f64>> {
    if !(end > start) || n < 2 {
        return Err(Error::Argument(format!(
            "linear grid needs start < end and at least 2 points (got {start}, {end}, {n})"
        )));
    }
    Ok((0..n)
        .map(|i| if i + 1 == n { end } else { start + (end - start) * i as f64 / (n - 1) as f64 })
        .collect())
}
