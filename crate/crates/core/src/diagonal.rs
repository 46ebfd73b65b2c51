//! Per-block eigendecomposition of the metric and the coordinate maps
//! between the original, diagonal and canonical charts.
//!
//! With `Δ = 1 + 4r²` each block `[[1, r], [r, 2]]` has eigenvalues
//! `α± = (3 ± √Δ)/2` and eigenvectors `(1, a₀)` and `(1, a₁)` where
//! `a₀ = (1 − √Δ)/(2r)`, `a₁ = (1 + √Δ)/(2r)`. The eigenvectors are kept
//! unnormalized (first component 1) since every downstream formula uses
//! that scaling. The original coordinates are `(μ, σ)ᵀ = E (μ̃, σ̃)ᵀ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{BlockMetric, Chart, Macrostate, ModelParams};
use crate::mat2::{self, Mat2};

/// Below this correlation strength `E(r)` is treated as singular and callers
/// must use the uncorrelated closed forms instead.
pub const R_CUTOFF: f64 = 1e-6;

/// Closed-form eigen data of one metric block at σ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockEigen {
    pub r: f64,
    pub delta: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    /// Columns are Θ₋ and Θ₊.
    pub e: Mat2,
    pub e_inv: Mat2,
}

impl BlockEigen {
    pub fn a0(&self) -> f64 {
        self.e[1][0]
    }

    pub fn a1(&self) -> f64 {
        self.e[1][1]
    }

    /// `√(2α₋/α₊)`, the μ̃ → μ′ scale of the canonical chart.
    pub fn canonical_scale(&self) -> f64 {
        (2.0 * self.alpha_minus / self.alpha_plus).sqrt()
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r < 1.0) || !(r > 0.0) {
        return Err(Error::Domain(format!("r = {r} outside (0,1)")));
    }
    if r < R_CUTOFF {
        return Err(Error::Domain(format!(
            "r = {r} below the diagonalization cutoff {R_CUTOFF:e}; use the uncorrelated baseline"
        )));
    }
    Ok(())
}

pub fn a0(r: f64) -> f64 {
    (1.0 - (1.0 + 4.0 * r * r).sqrt()) / (2.0 * r)
}

pub fn a1(r: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * r * r).sqrt()) / (2.0 * r)
}

pub fn block_eigen(r: f64) -> Result<BlockEigen> {
    check_r(r)?;
    let delta = 1.0 + 4.0 * r * r;
    let root = delta.sqrt();
    let lo = (1.0 - root) / (2.0 * r);
    let hi = (1.0 + root) / (2.0 * r);
    let e = [[1.0, 1.0], [lo, hi]];
    let f = r / root;
    let e_inv = [[f * hi, -f], [-f * lo, f]];
    Ok(BlockEigen {
        r,
        delta,
        alpha_minus: (3.0 - root) / 2.0,
        alpha_plus: (3.0 + root) / 2.0,
        e,
        e_inv,
    })
}

/// `(1/σ²) E diag(α₋, α₊) E⁻¹`.
pub fn reconstruct_metric(eig: &BlockEigen, sigma: f64) -> Result<Mat2> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
    }
    let d = mat2::diag(eig.alpha_minus, eig.alpha_plus);
    let m = mat2::mul(&mat2::mul(&eig.e, &d), &eig.e_inv);
    Ok(mat2::scale(&m, 1.0 / (sigma * sigma)))
}

fn eigens(params: &ModelParams) -> Result<Vec<BlockEigen>> {
    params.r().iter().map(|&r| block_eigen(r)).collect()
}

fn map_blocks(
    theta: &Macrostate,
    params: &ModelParams,
    from: Chart,
    to: Chart,
    f: impl Fn(&BlockEigen, [f64; 2]) -> [f64; 2],
) -> Result<Macrostate> {
    theta.require(from, params)?;
    let eig = eigens(params)?;
    let mut out = Vec::with_capacity(theta.coords().len());
    for (k, e) in eig.iter().enumerate() {
        let (x, y) = theta.block(k);
        out.extend(f(e, [x, y]));
    }
    match Macrostate::new(to, out) {
        Err(Error::Domain(msg)) => Err(Error::Range(format!("mapped point leaves the manifold: {msg}"))),
        other => other,
    }
}

/// `μ = μ̃ + σ̃`, `σ = a₀ μ̃ + a₁ σ̃`, block by block.
pub fn original_from_diagonal(theta: &Macrostate, params: &ModelParams) -> Result<Macrostate> {
    map_blocks(theta, params, Chart::Diagonal, Chart::Original, |e, v| mat2::apply(&e.e, &v))
}

pub fn diagonal_from_original(theta: &Macrostate, params: &ModelParams) -> Result<Macrostate> {
    map_blocks(theta, params, Chart::Original, Chart::Diagonal, |e, v| mat2::apply(&e.e_inv, &v))
}

/// `μ′ = √(2α₋/α₊) μ̃`, `σ′ = σ̃`.
pub fn canonical_from_diagonal(theta: &Macrostate, params: &ModelParams) -> Result<Macrostate> {
    map_blocks(theta, params, Chart::Diagonal, Chart::Canonical, |e, [m, s]| {
        [e.canonical_scale() * m, s]
    })
}

pub fn diagonal_from_canonical(theta: &Macrostate, params: &ModelParams) -> Result<Macrostate> {
    map_blocks(theta, params, Chart::Canonical, Chart::Diagonal, |e, [m, s]| {
        [m / e.canonical_scale(), s]
    })
}

/// Velocities transform with the same linear maps as positions.
pub fn map_velocity(velocity: &[f64], params: &ModelParams, from: Chart, to: Chart) -> Result<Vec<f64>> {
    if velocity.len() != 2 * params.l() {
        return Err(Error::Argument("velocity dimension does not match the model".into()));
    }
    let eig = eigens(params)?;
    let mut out = Vec::with_capacity(velocity.len());
    for (k, e) in eig.iter().enumerate() {
        let mut v = [velocity[2 * k], velocity[2 * k + 1]];
        v = to_diagonal(e, from, v);
        v = from_diagonal(e, to, v);
        out.extend(v);
    }
    Ok(out)
}

/// Any chart to any chart, positions only.
pub fn convert(theta: &Macrostate, params: &ModelParams, to: Chart) -> Result<Macrostate> {
    match (theta.chart(), to) {
        (a, b) if a == b => Ok(theta.clone()),
        (Chart::Original, Chart::Diagonal) => diagonal_from_original(theta, params),
        (Chart::Diagonal, Chart::Original) => original_from_diagonal(theta, params),
        (Chart::Diagonal, Chart::Canonical) => canonical_from_diagonal(theta, params),
        (Chart::Canonical, Chart::Diagonal) => diagonal_from_canonical(theta, params),
        (Chart::Original, Chart::Canonical) => {
            canonical_from_diagonal(&diagonal_from_original(theta, params)?, params)
        }
        (Chart::Canonical, Chart::Original) => {
            original_from_diagonal(&diagonal_from_canonical(theta, params)?, params)
        }
        _ => unreachable!(),
    }
}

fn to_diagonal(e: &BlockEigen, from: Chart, v: [f64; 2]) -> [f64; 2] {
    match from {
        Chart::Original => mat2::apply(&e.e_inv, &v),
        Chart::Diagonal => v,
        Chart::Canonical => [v[0] / e.canonical_scale(), v[1]],
    }
}

fn from_diagonal(e: &BlockEigen, to: Chart, v: [f64; 2]) -> [f64; 2] {
    match to {
        Chart::Original => mat2::apply(&e.e, &v),
        Chart::Diagonal => v,
        Chart::Canonical => [e.canonical_scale() * v[0], v[1]],
    }
}

/// Metric in the diagonal chart, `(1/σ(μ̃, σ̃)²) diag(α₋, α₊)`, where σ is the
/// original-chart standard deviation `a₀ μ̃ + a₁ σ̃`.
pub fn diagonal_metric(theta: &Macrostate, params: &ModelParams) -> Result<BlockMetric> {
    theta.require(Chart::Diagonal, params)?;
    let eig = eigens(params)?;
    let mut blocks = Vec::with_capacity(eig.len());
    for (k, e) in eig.iter().enumerate() {
        let (m, s) = theta.block(k);
        let sigma = e.a0() * m + e.a1() * s;
        if !(sigma > 0.0) {
            return Err(Error::Range(format!("block {k}: sigma(mu~, sigma~) = {sigma} is not positive")));
        }
        let inv = 1.0 / (sigma * sigma);
        blocks.push(mat2::diag(e.alpha_minus * inv, e.alpha_plus * inv));
    }
    Ok(BlockMetric { chart: Chart::Diagonal, blocks })
}

/// `|a₁(r)/a₀(r)|`.
pub fn eigvec_ratio(r: f64) -> f64 {
    (a1(r) / a0(r)).abs()
}

/// Minimum of `|a₁/a₀|` over an evenly spaced grid of `points` values
/// strictly inside (0, 1). The infimum is approached as r → 1.
pub fn min_eigvec_ratio(points: usize) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::NAN);
    for i in 1..=points {
        let r = i as f64 / (points as f64 + 1.0);
        let v = eigvec_ratio(r);
        if v < best.0 {
            best = (v, r);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigenvalues_at_half() {
        let e = block_eigen(0.5).unwrap();
        assert_eq!(e.delta, 2.0);
        assert_relative_eq!(e.alpha_minus, (3.0 - 2f64.sqrt()) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(e.alpha_plus, (3.0 + 2f64.sqrt()) / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn small_r_limit() {
        let e = block_eigen(1e-6).unwrap();
        assert!((e.alpha_minus - 1.0).abs() < 1e-10);
        assert!((e.alpha_plus - 2.0).abs() < 1e-10);
        assert!((e.canonical_scale() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn out_of_range_r() {
        for r in [0.0, -0.1, 1.0, 1.2, 1e-8, f64::NAN] {
            assert!(matches!(block_eigen(r), Err(Error::Domain(_))), "r = {r}");
        }
    }

    #[test]
    fn similarity_reproduces_block() {
        for r in [1e-3, 0.2, 0.5, 0.77, 0.999] {
            let e = block_eigen(r).unwrap();
            assert!(mat2::max_abs_diff(&mat2::mul(&e.e, &e.e_inv), &mat2::IDENTITY) < 1e-12);
            let m = reconstruct_metric(&e, 1.0).unwrap();
            assert!(mat2::max_abs_diff(&m, &[[1.0, r], [r, 2.0]]) < 1e-12);
        }
    }

    #[test]
    fn reconstruct_examples() {
        let m = reconstruct_metric(&block_eigen(0.9).unwrap(), 3.0).unwrap();
        let expect = mat2::scale(&[[1.0, 0.9], [0.9, 2.0]], 1.0 / 9.0);
        assert!(mat2::max_abs_diff(&m, &expect) < 1e-12);
        assert!(mat2::max_abs_diff(&m, &mat2::transpose(&m)) < 1e-12);
        assert!(reconstruct_metric(&block_eigen(0.9).unwrap(), 0.0).is_err());
    }

    fn half() -> ModelParams {
        ModelParams::uniform(1, 0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_maps_to_boundary() {
        let z = Macrostate::new(Chart::Diagonal, vec![0.0, 0.0]).unwrap();
        assert!(matches!(original_from_diagonal(&z, &half()), Err(Error::Range(_))));
    }

    #[test]
    fn cambio_example_and_inverse() {
        let d = Macrostate::new(Chart::Diagonal, vec![0.0, 1.0]).unwrap();
        let o = original_from_diagonal(&d, &half()).unwrap();
        assert_eq!(o.chart(), Chart::Original);
        assert_relative_eq!(o.coords()[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(o.coords()[1], 1.0 + 2f64.sqrt(), max_relative = 1e-15);
        let back = diagonal_from_original(&o, &half()).unwrap();
        assert!(back.coords()[0].abs() < 1e-12);
        assert!((back.coords()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_map_example() {
        let o = Macrostate::original(vec![1.0, 1.0]).unwrap();
        let d = diagonal_from_original(&o, &half()).unwrap();
        let root = 2f64.sqrt();
        let f = 0.5 / root;
        assert_relative_eq!(d.coords()[0], f * ((1.0 + root) / 1.0 - 1.0), max_relative = 1e-14);
        assert_relative_eq!(d.coords()[1], f * (-(1.0 - root) / 1.0 + 1.0), max_relative = 1e-14);
    }

    #[test]
    fn canonical_scale_value() {
        let d = Macrostate::new(Chart::Diagonal, vec![2.0, -0.3]).unwrap();
        let c = canonical_from_diagonal(&d, &half()).unwrap();
        let root = 2f64.sqrt();
        let scale = ((6.0 - 2.0 * root) / (3.0 + root)).sqrt();
        assert_relative_eq!(c.coords()[0], 2.0 * scale, max_relative = 1e-14);
        assert_eq!(c.coords()[1].to_bits(), (-0.3f64).to_bits());
        let back = diagonal_from_canonical(&c, &half()).unwrap();
        assert!((back.coords()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn map_rejects_wrong_chart() {
        let o = Macrostate::reference(1);
        assert!(matches!(canonical_from_diagonal(&o, &half()), Err(Error::Argument(_))));
    }

    #[test]
    fn eigvec_ratio_minimum_near_golden() {
        let (min, at) = min_eigvec_ratio(100_000);
        assert!((min - 2.6).abs() < 0.05, "min = {min}");
        assert!(at > 0.99);
        assert!(a0(0.3) < 0.0 && a1(0.3) > 0.0);
    }

    #[test]
    fn diagonal_metric_uses_original_sigma() {
        let p = half();
        let d = Macrostate::new(Chart::Diagonal, vec![0.1, 1.0]).unwrap();
        let o = original_from_diagonal(&d, &p).unwrap();
        let g = diagonal_metric(&d, &p).unwrap();
        let e = block_eigen(0.5).unwrap();
        let s = o.coords()[1];
        assert_relative_eq!(g.blocks[0][0][0], e.alpha_minus / (s * s), max_relative = 1e-14);
        assert_relative_eq!(g.blocks[0][1][1], e.alpha_plus / (s * s), max_relative = 1e-14);
    }
}
