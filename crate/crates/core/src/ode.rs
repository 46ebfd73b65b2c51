//! Adaptive Dormand–Prince 5(4) integrator with PI step-size control.
//!
//! The fifth-order solution is propagated; the embedded fourth-order solution
//! only supplies the local error estimate. Error norm and controller follow
//! the usual RMS-of-scaled-components form with `sc_i = atol + rtol·max(|y_i|, |ŷ_i|)`.

use crate::error::Error;

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub safety: f64,
    pub max_growth: f64,
    pub min_shrink: f64,
    /// PI controller memory exponent.
    pub beta: f64,
    pub max_steps: usize,
    /// Fixed initial step; estimated when `None`.
    pub initial_step: Option<f64>,
    /// Steps below `underflow_factor · |t_end − t0|` abort the integration.
    pub underflow_factor: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            safety: 0.9,
            max_growth: 5.0,
            min_shrink: 0.2,
            beta: 0.04,
            max_steps: 1_000_000,
            initial_step: None,
            underflow_factor: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest scaled error norm among accepted steps (≤ 1 by construction).
    pub max_error_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub stats: OdeStats,
}

/// Why an integration stopped early. Each variant carries the last accepted state.
#[derive(Debug, Clone, PartialEq)]
pub enum OdeFailure {
    Underflow { t: f64, h: f64, y: Vec<f64> },
    /// The state check rejected an accepted step.
    Halted { t: f64, y: Vec<f64>, message: String },
    TooManySteps { t: f64, y: Vec<f64> },
    /// The right-hand side failed at the initial point.
    Rhs(Error),
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let n = y.len() as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end > t0`.
///
/// `f` writes the derivative into its third argument and may fail, which is
/// treated as a rejected trial step. `check` runs on every accepted state and
/// stops the integration when it returns an error message.
pub fn dopri5<F, C>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut check: C,
) -> Result<OdeSolution, OdeFailure>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), Error>,
    C: FnMut(f64, &[f64]) -> Result<(), String>,
{
    let n = y0.len();
    let span = t_end - t0;
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut ts = vec![t0];
    let mut ys = vec![y.clone()];

    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1).map_err(OdeFailure::Rhs)?;
    stats.evaluations += 1;

    let mut h = match opts.initial_step {
        Some(h) => h,
        None => {
            let h = initial_step(&mut f, t, &y, &k1, span, opts);
            stats.evaluations += 1;
            h
        }
    }
    .min(span);

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut err_old: f64 = 1e-4;
    let expo = 0.2 - opts.beta * 0.75;
    let h_min = opts.underflow_factor * span.abs();
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeFailure::TooManySteps { t, y });
        }
        if h < h_min {
            return Err(OdeFailure::Underflow { t, h, y });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let stages = (|| -> Result<(), Error> {
            for i in 0..n {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            f(t + C2 * h, &tmp, &mut k2)?;
            for i in 0..n {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * h, &tmp, &mut k3)?;
            for i in 0..n {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * h, &tmp, &mut k4)?;
            for i in 0..n {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * h, &tmp, &mut k5)?;
            for i in 0..n {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + h, &tmp, &mut k6)?;
            for i in 0..n {
                y_new[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f(t + h, &y_new, &mut k7)?;
            Ok(())
        })();
        stats.evaluations += 6;

        let norm = match stages {
            Ok(()) => {
                for i in 0..n {
                    err[i] = h
                        * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                }
                error_norm(&y, &y_new, &err, opts)
            }
            // A stage left the domain of the right-hand side: treat as a large error.
            Err(_) => f64::INFINITY,
        };

        if norm <= 1.0 {
            let fac = (opts.safety * norm.max(1e-10).powf(-expo) * err_old.powf(opts.beta))
                .clamp(opts.min_shrink, opts.max_growth);
            err_old = norm.max(1e-4);
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            stats.max_error_norm = stats.max_error_norm.max(norm);
            if let Err(message) = check(t, &y) {
                return Err(OdeFailure::Halted { t, y, message });
            }
            ts.push(t);
            ys.push(y.clone());
            h *= if last_rejected { fac.min(1.0) } else { fac };
            last_rejected = false;
        } else {
            let fac = if norm.is_finite() {
                (opts.safety * norm.powf(-expo)).max(opts.min_shrink)
            } else {
                opts.min_shrink
            };
            h *= fac;
            stats.rejected += 1;
            last_rejected = true;
        }
    }

    Ok(OdeSolution { t: ts, y: ys, stats })
}

fn initial_step<F>(f: &mut F, t: f64, y: &[f64], f0: &[f64], span: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), Error>,
{
    let n = y.len() as f64;
    let sc: Vec<f64> = y.iter().map(|v| opts.abs_tol + opts.rel_tol * v.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    if f(t + h0, &y1, &mut f1).is_err() {
        return h0 * 1e-3;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    (100.0 * h0).min(h1)
}
