//! Model parameters, macrostates and the Fisher–Rao metric of the
//! macro-correlated Gaussian family.
//!
//! Coordinates are interleaved per degree of freedom, `(μ_1, σ_1, μ_2, σ_2, …)`,
//! so the 2l×2l metric is block diagonal with contiguous 2×2 blocks
//!
//! ```text
//! g^(k) = (1/σ_k²) [[1, r_k], [r_k, 2]]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::{self, Mat2};

/// One instance of the statistical model: correlation strengths and the
/// positive geodesic integration constants for each of the `l` blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    r: Vec<f64>,
    lambda: Vec<f64>,
    xi: Vec<f64>,
}

impl ModelParams {
    pub fn new(r: Vec<f64>, lambda: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        let l = r.len();
        if l == 0 {
            return Err(Error::Argument("model needs at least one block (l >= 1)".into()));
        }
        if lambda.len() != l || xi.len() != l {
            return Err(Error::Argument(format!(
                "r, lambda and xi must all have length l = {l} (got {}, {}, {})",
                l,
                lambda.len(),
                xi.len()
            )));
        }
        for (k, &rk) in r.iter().enumerate() {
            if !(rk > 0.0 && rk < 1.0) {
                return Err(Error::Domain(format!("r[{k}] = {rk} outside (0,1)")));
            }
        }
        for (k, &v) in lambda.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("lambda[{k}] = {v} must be positive")));
            }
        }
        for (k, &v) in xi.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("xi[{k}] = {v} must be positive")));
            }
        }
        Ok(Self { r, lambda, xi })
    }

    /// `l` identical blocks.
    pub fn uniform(l: usize, r: f64, lambda: f64, xi: f64) -> Result<Self> {
        Self::new(vec![r; l], vec![lambda; l], vec![xi; l])
    }

    pub fn l(&self) -> usize {
        self.r.len()
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }
}

/// Coordinate chart a macrostate is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// `(μ, σ)`.
    Original,
    /// `(μ̃, σ̃)`, the eigenbasis of each metric block.
    Diagonal,
    /// `(μ′, σ′)`, the diagonal chart with μ̃ rescaled.
    Canonical,
}

impl Chart {
    pub fn name(self) -> &'static str {
        match self {
            Chart::Original => "original",
            Chart::Diagonal => "diagonal",
            Chart::Canonical => "canonical",
        }
    }
}

/// A point on the 2l-dimensional manifold, tagged with its chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Macrostate {
    chart: Chart,
    coords: Vec<f64>,
}

impl Macrostate {
    /// Builds a macrostate from interleaved coordinates. In the original chart
    /// every σ_k must be strictly positive.
    pub fn new(chart: Chart, coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(Error::Argument(format!(
                "macrostate needs 2l coordinates, got {}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Argument(format!("coordinate {bad} is not finite")));
        }
        if chart == Chart::Original {
            for (k, pair) in coords.chunks_exact(2).enumerate() {
                if pair[1] <= 0.0 {
                    return Err(Error::Domain(format!("sigma[{k}] = {} must be positive", pair[1])));
                }
            }
        }
        Ok(Self { chart, coords })
    }

    pub fn original(coords: Vec<f64>) -> Result<Self> {
        Self::new(Chart::Original, coords)
    }

    pub fn from_blocks(chart: Chart, blocks: &[(f64, f64)]) -> Result<Self> {
        Self::new(chart, blocks.iter().flat_map(|&(m, s)| [m, s]).collect())
    }

    /// Reference point `μ_k = 0, σ_k = 1`.
    pub fn reference(l: usize) -> Self {
        Self {
            chart: Chart::Original,
            coords: (0..l).flat_map(|_| [0.0, 1.0]).collect(),
        }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Number of 2×2 blocks.
    pub fn blocks(&self) -> usize {
        self.coords.len() / 2
    }

    /// `(μ_k, σ_k)` in this chart's naming.
    pub fn block(&self, k: usize) -> (f64, f64) {
        (self.coords[2 * k], self.coords[2 * k + 1])
    }

    /// `a·self + b·other`. Mixing charts is rejected.
    pub fn combine(&self, a: f64, other: &Macrostate, b: f64) -> Result<Macrostate> {
        if self.chart != other.chart {
            return Err(Error::Argument(format!(
                "cannot combine {} and {} chart coordinates",
                self.chart.name(),
                other.chart.name()
            )));
        }
        if self.coords.len() != other.coords.len() {
            return Err(Error::Argument("macrostate dimensions differ".into()));
        }
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Macrostate::new(self.chart, coords)
    }

    pub(crate) fn require(&self, chart: Chart, params: &ModelParams) -> Result<()> {
        if self.chart != chart {
            return Err(Error::Argument(format!(
                "expected a {} chart macrostate, got {}",
                chart.name(),
                self.chart.name()
            )));
        }
        if self.blocks() != params.l() {
            return Err(Error::Argument(format!(
                "macrostate has {} blocks but the model has l = {}",
                self.blocks(),
                params.l()
            )));
        }
        Ok(())
    }
}

/// Block-diagonal metric (or inverse metric) stored as `l` 2×2 blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMetric {
    pub chart: Chart,
    pub blocks: Vec<Mat2>,
}

impl BlockMetric {
    /// Dense 2l×2l matrix in interleaved ordering.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = 2 * self.blocks.len();
        let mut out = vec![vec![0.0; n]; n];
        for (k, b) in self.blocks.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    out[2 * k + i][2 * k + j] = b[i][j];
                }
            }
        }
        out
    }

    /// Block-wise product `self · other`.
    pub fn block_product(&self, other: &BlockMetric) -> Vec<Mat2> {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| mat2::mul(a, b))
            .collect()
    }

    /// `vᵀ g v` over all blocks.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        if v.len() != 2 * self.blocks.len() {
            return Err(Error::Argument(format!(
                "displacement has {} components, metric expects {}",
                v.len(),
                2 * self.blocks.len()
            )));
        }
        Ok(self
            .blocks
            .iter()
            .zip(v.chunks_exact(2))
            .map(|(b, dv)| mat2::quadratic_form(b, &[dv[0], dv[1]]))
            .sum())
    }
}

pub(crate) fn check_sigma(k: usize, sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("sigma[{k}] = {sigma} must be positive")))
    }
}

/// One metric block `(1/σ²)[[1, r], [r, 2]]`. Accepts `r = 0` for the
/// uncorrelated baseline.
pub fn metric_block(r: f64, sigma: f64) -> Mat2 {
    let s2 = sigma * sigma;
    [[1.0 / s2, r / s2], [r / s2, 2.0 / s2]]
}

/// One inverse block `(σ²/(2−r²))[[2, −r], [−r, 1]]`.
pub fn inverse_metric_block(r: f64, sigma: f64) -> Mat2 {
    let f = sigma * sigma / (2.0 - r * r);
    [[2.0 * f, -r * f], [-r * f, f]]
}

pub fn metric_tensor(theta: &Macrostate, params: &ModelParams) -> Result<BlockMetric> {
    theta.require(Chart::Original, params)?;
    let blocks = (0..params.l())
        .map(|k| {
            let (_, sigma) = theta.block(k);
            check_sigma(k, sigma)?;
            Ok(metric_block(params.r[k], sigma))
        })
        .collect::<Result<_>>()?;
    Ok(BlockMetric { chart: Chart::Original, blocks })
}

pub fn inverse_metric(theta: &Macrostate, params: &ModelParams) -> Result<BlockMetric> {
    theta.require(Chart::Original, params)?;
    let blocks = (0..params.l())
        .map(|k| {
            let (_, sigma) = theta.block(k);
            check_sigma(k, sigma)?;
            Ok(inverse_metric_block(params.r[k], sigma))
        })
        .collect::<Result<_>>()?;
    Ok(BlockMetric { chart: Chart::Original, blocks })
}

/// `ds² = Σ_k (dμ_k² + 2 r_k dμ_k dσ_k + 2 dσ_k²) / σ_k²`.
pub fn line_element(theta: &Macrostate, dtheta: &[f64], params: &ModelParams) -> Result<f64> {
    theta.require(Chart::Original, params)?;
    if dtheta.len() != theta.coords.len() {
        return Err(Error::Argument(format!(
            "displacement has {} components, expected {}",
            dtheta.len(),
            theta.coords.len()
        )));
    }
    let mut ds2 = 0.0;
    for k in 0..params.l() {
        let (_, sigma) = theta.block(k);
        check_sigma(k, sigma)?;
        let (dm, ds) = (dtheta[2 * k], dtheta[2 * k + 1]);
        let r = params.r[k];
        ds2 += (dm * dm + 2.0 * r * dm * ds + 2.0 * ds * ds) / (sigma * sigma);
    }
    Ok(ds2)
}

/// Which volume density enters the complexity integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMode {
    /// `√g = √(2−r²)/σ` per block, the density the closed forms are built on.
    #[default]
    Paper,
    /// `√|det g| = √(2−r²)/σ²` per block.
    Determinant,
}

pub fn volume_density(theta: &Macrostate, params: &ModelParams, mode: DensityMode) -> Result<f64> {
    theta.require(Chart::Original, params)?;
    let mut density = 1.0;
    for k in 0..params.l() {
        let (_, sigma) = theta.block(k);
        check_sigma(k, sigma)?;
        let root = (2.0 - params.r[k] * params.r[k]).sqrt();
        density *= match mode {
            DensityMode::Paper => root / sigma,
            DensityMode::Determinant => root / (sigma * sigma),
        };
    }
    Ok(density)
}
