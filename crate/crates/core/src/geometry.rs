//! Levi-Civita connection and Ricci curvature.
//!
//! Index convention within each block: 0 ↔ μ, 1 ↔ σ. A Christoffel block is
//! stored as `gamma[k][i][j] = Γ^k_ij`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{check_sigma, inverse_metric_block, metric_block, Chart, Macrostate, ModelParams};

pub type ChristoffelBlock = [[[f64; 2]; 2]; 2];

/// Default central-difference step for the numeric connection.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelField {
    pub blocks: Vec<ChristoffelBlock>,
}

impl ChristoffelField {
    /// Γ^k_ij == Γ^k_ji in every block, exactly.
    pub fn is_symmetric(&self) -> bool {
        self.blocks
            .iter()
            .all(|g| (0..2).all(|k| g[k][0][1] == g[k][1][0]))
    }

    /// Largest absolute component difference against another field.
    pub fn max_abs_diff(&self, other: &ChristoffelField) -> f64 {
        let mut m: f64 = 0.0;
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        m = m.max((a[k][i][j] - b[k][i][j]).abs());
                    }
                }
            }
        }
        m
    }

    /// Count of entries with nonzero value in one block.
    pub fn nonzero_entries(&self, block: usize) -> usize {
        self.blocks[block]
            .iter()
            .flatten()
            .flatten()
            .filter(|v| **v != 0.0)
            .count()
    }

    /// Nonzero `Γ^k_ij` with `i ≤ j`, i.e. counting each symmetric pair once.
    pub fn independent_nonzero_entries(&self, block: usize) -> usize {
        let g = &self.blocks[block];
        (0..2)
            .flat_map(|k| [(k, 0, 0), (k, 0, 1), (k, 1, 1)])
            .filter(|&(k, i, j)| g[k][i][j] != 0.0)
            .count()
    }
}

/// Closed-form connection of one block.
pub fn christoffel_block(r: f64, sigma: f64) -> ChristoffelBlock {
    let f = 1.0 / ((2.0 - r * r) * sigma);
    let mut g = [[[0.0; 2]; 2]; 2];
    g[0][0][0] = -r * f;
    g[1][0][0] = f;
    g[0][0][1] = -2.0 * f;
    g[0][1][0] = -2.0 * f;
    g[1][0][1] = r * f;
    g[1][1][0] = r * f;
    g[0][1][1] = -2.0 * r * f;
    g[1][1][1] = (2.0 * r * r - 2.0) * f;
    g
}

pub fn christoffel_analytic(theta: &Macrostate, params: &ModelParams) -> Result<ChristoffelField> {
    theta.require(Chart::Original, params)?;
    let blocks = (0..params.l())
        .map(|k| {
            let (_, sigma) = theta.block(k);
            check_sigma(k, sigma)?;
            Ok(christoffel_block(params.r()[k], sigma))
        })
        .collect::<Result<_>>()?;
    Ok(ChristoffelField { blocks })
}

/// Connection of one block from central differences of the metric,
/// `Γ^k_ij = ½ g^{km}(∂_i g_mj + ∂_j g_im − ∂_m g_ij)`.
pub fn christoffel_block_numeric(r: f64, mu: f64, sigma: f64, h: f64) -> Result<ChristoffelBlock> {
    if !(h > 0.0) {
        return Err(Error::Argument(format!("finite-difference step {h} must be positive")));
    }
    if sigma - h <= 0.0 {
        return Err(Error::Domain(format!(
            "stencil sigma - h = {} leaves the manifold",
            sigma - h
        )));
    }
    // The metric is evaluated through a (μ, σ) closure so the μ-derivative is
    // differenced like any other direction.
    let g_at = |_mu: f64, s: f64| metric_block(r, s);
    let mut dg = [[[0.0; 2]; 2]; 2]; // dg[m][i][j] = ∂_m g_ij
    let shifts = [(h, 0.0), (0.0, h)];
    for (m, (dm, ds)) in shifts.into_iter().enumerate() {
        let plus = g_at(mu + dm, sigma + ds);
        let minus = g_at(mu - dm, sigma - ds);
        for i in 0..2 {
            for j in 0..2 {
                dg[m][i][j] = (plus[i][j] - minus[i][j]) / (2.0 * h);
            }
        }
    }
    let ginv = inverse_metric_block(r, sigma);
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for m in 0..2 {
                    acc += ginv[k][m] * (dg[i][m][j] + dg[j][i][m] - dg[m][i][j]);
                }
                gamma[k][i][j] = 0.5 * acc;
            }
        }
    }
    Ok(gamma)
}

pub fn christoffel_numeric(theta: &Macrostate, params: &ModelParams, h: f64) -> Result<ChristoffelField> {
    theta.require(Chart::Original, params)?;
    let blocks = (0..params.l())
        .map(|k| {
            let (mu, sigma) = theta.block(k);
            check_sigma(k, sigma)?;
            christoffel_block_numeric(params.r()[k], mu, sigma, h)
                .map_err(|e| Error::Domain(format!("block {k}: {e}")))
        })
        .collect::<Result<_>>()?;
    Ok(ChristoffelField { blocks })
}

/// Ricci components of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RicciBlock {
    pub r11: f64,
    pub r12: f64,
    pub r21: f64,
    pub r22: f64,
}

impl RicciBlock {
    pub fn as_matrix(&self) -> [[f64; 2]; 2] {
        [[self.r11, self.r12], [self.r21, self.r22]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub blocks: Vec<RicciBlock>,
    pub scalar: f64,
    pub r_used: Vec<f64>,
}

pub fn ricci_block(r: f64, sigma: f64) -> RicciBlock {
    let f = -1.0 / ((2.0 - r * r) * sigma * sigma);
    RicciBlock {
        r11: f,
        r12: r * f,
        r21: r * f,
        r22: 2.0 * f,
    }
}

pub fn ricci_tensor(theta: &Macrostate, params: &ModelParams) -> Result<CurvatureReport> {
    theta.require(Chart::Original, params)?;
    let blocks = (0..params.l())
        .map(|k| {
            let (_, sigma) = theta.block(k);
            check_sigma(k, sigma)?;
            Ok(ricci_block(params.r()[k], sigma))
        })
        .collect::<Result<_>>()?;
    Ok(CurvatureReport {
        blocks,
        scalar: scalar_curvature(params),
        r_used: params.r().to_vec(),
    })
}

/// `R = −2 Σ_k 1/(2 − r_k²)`. Constant over the manifold.
pub fn scalar_curvature(params: &ModelParams) -> f64 {
    scalar_curvature_for(params.r())
}

/// Same closed form on raw correlation strengths; `r_k = 0` is allowed and
/// gives the uncorrelated value `−l`.
pub fn scalar_curvature_for(r: &[f64]) -> f64 {
    -2.0 * r.iter().map(|rk| 1.0 / (2.0 - rk * rk)).sum::<f64>()
}

/// Cross-checks built only from the metric, independent of the closed forms
/// above.
pub mod oracle {
    use super::*;

    /// Ricci block from central differences of [`christoffel_block_numeric`],
    /// `R_ij = ∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_ij Γ^n_kn − Γ^m_ik Γ^k_jm`.
    pub fn ricci_block_numeric(r: f64, mu: f64, sigma: f64, h_outer: f64, h_inner: f64) -> Result<RicciBlock> {
        if sigma - h_outer - h_inner <= 0.0 {
            return Err(Error::Domain("nested stencil leaves the manifold".into()));
        }
        let gamma = christoffel_block_numeric(r, mu, sigma, h_inner)?;
        // dgamma[m][k][i][j] = ∂_m Γ^k_ij
        let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2];
        let shifts = [(h_outer, 0.0), (0.0, h_outer)];
        for (m, (dm, ds)) in shifts.into_iter().enumerate() {
            let plus = christoffel_block_numeric(r, mu + dm, sigma + ds, h_inner)?;
            let minus = christoffel_block_numeric(r, mu - dm, sigma - ds, h_inner)?;
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        dgamma[m][k][i][j] = (plus[k][i][j] - minus[k][i][j]) / (2.0 * h_outer);
                    }
                }
            }
        }
        let mut ric = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    acc += dgamma[k][k][i][j] - dgamma[j][k][i][k];
                    for n in 0..2 {
                        acc += gamma[k][i][j] * gamma[n][k][n];
                        acc -= gamma[n][i][k] * gamma[k][j][n];
                    }
                }
                ric[i][j] = acc;
            }
        }
        Ok(RicciBlock {
            r11: ric[0][0],
            r12: ric[0][1],
            r21: ric[1][0],
            r22: ric[1][1],
        })
    }

    /// `g^{ij} R_ij` summed over blocks at a specific macrostate.
    pub fn scalar_by_contraction(theta: &Macrostate, params: &ModelParams) -> Result<f64> {
        let report = ricci_tensor(theta, params)?;
        let mut total = 0.0;
        for (k, ric) in report.blocks.iter().enumerate() {
            let (_, sigma) = theta.block(k);
            let gi = inverse_metric_block(params.r()[k], sigma);
            let rm = ric.as_matrix();
            for i in 0..2 {
                for j in 0..2 {
                    total += gi[i][j] * rm[i][j];
                }
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use approx::assert_relative_eq;

    fn one(r: f64) -> ModelParams {
        ModelParams::new(vec![r], vec![1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn uncorrelated_limit_coefficients() {
        let g = christoffel_block(0.0, 1.0);
        assert_eq!(g[0][0][0], 0.0);
        assert_eq!(g[1][0][0], 0.5);
        assert_eq!(g[0][0][1], -1.0);
        assert_eq!(g[1][0][1], 0.0);
        assert_eq!(g[0][1][1], 0.0);
        assert_eq!(g[1][1][1], -1.0);
    }

    #[test]
    fn nonzero_count_and_symmetry() {
        let theta = Macrostate::reference(1);
        let field = christoffel_analytic(&theta, &one(0.5)).unwrap();
        // Every entry of the 2×2×2 array is nonzero for r in (0,1); the
        // symmetric pairs Γ^k_12 = Γ^k_21 leave six independent values.
        assert_eq!(field.nonzero_entries(0), 8);
        assert_eq!(field.independent_nonzero_entries(0), 6);
        assert!(field.is_symmetric());
        assert_relative_eq!(field.blocks[0][0][0][0], -0.5 / 1.75, max_relative = 1e-15);
    }

    #[test]
    fn coefficients_scale_as_inverse_sigma() {
        for r in [0.1, 0.5, 0.9] {
            let a = christoffel_block(r, 1.0);
            let b = christoffel_block(r, 2.0);
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert_eq!(b[k][i][j], 0.5 * a[k][i][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn numeric_connection_agrees() {
        let theta = Macrostate::reference(1);
        let a = christoffel_analytic(&theta, &one(0.5)).unwrap();
        let n = christoffel_numeric(&theta, &one(0.5), 1e-5).unwrap();
        assert!(a.max_abs_diff(&n) < 1e-6, "{}", a.max_abs_diff(&n));
    }

    #[test]
    fn mu_derivatives_vanish() {
        // At r = 0, Γ^μ_μμ and Γ^σ_μσ are built from μ-derivatives of the metric only.
        let n = christoffel_block_numeric(0.0, 7.3, 1.0, 1e-5).unwrap();
        assert!(n[0][0][0].abs() < 1e-15);
        assert!(n[1][0][1].abs() < 1e-15);
    }

    #[test]
    fn numeric_connection_second_order() {
        let exact = christoffel_block(0.5, 1.0);
        let err = |h: f64| {
            let n = christoffel_block_numeric(0.5, 0.0, 1.0, h).unwrap();
            let mut m: f64 = 0.0;
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        m = m.max((n[k][i][j] - exact[k][i][j]).abs());
                    }
                }
            }
            m
        };
        let ratio = err(1e-3) / err(5e-4);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn stencil_outside_domain() {
        let theta = Macrostate::original(vec![0.0, 1e-6]).unwrap();
        assert!(matches!(
            christoffel_numeric(&theta, &one(0.5), 1e-5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ricci_examples() {
        let r0 = ricci_block(0.0, 1.0);
        assert_eq!((r0.r11, r0.r12, r0.r22), (-0.5, 0.0, -1.0));
        let r = ricci_block(0.5, 2.0);
        assert_relative_eq!(r.r11, -1.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(r.r12, -1.0 / 14.0, max_relative = 1e-15);
        assert_relative_eq!(r.r22, -2.0 / 7.0, max_relative = 1e-15);
        assert_eq!(r.r12, r.r21);
    }

    #[test]
    fn ricci_matches_numeric_definition() {
        for (r, sigma) in [(0.5, 1.0), (0.2, 0.6), (0.9, 3.0)] {
            let exact = ricci_block(r, sigma);
            let num = ricci_block_numeric(r, 0.3, sigma, 1e-4, 1e-5).unwrap();
            let d = crate::mat2::max_abs_diff(&exact.as_matrix(), &num.as_matrix());
            assert!(d < 1e-5, "r={r} sigma={sigma} dev={d}");
        }
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(scalar_curvature_for(&[0.0]), -1.0);
        assert_eq!(scalar_curvature_for(&[0.0; 3]), -3.0);
        assert_eq!(scalar_curvature_for(&[1.0]), -2.0);
        let p = ModelParams::uniform(2, 0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(scalar_curvature(&p), -4.0 / 1.75, max_relative = 1e-15);
    }

    #[test]
    fn contraction_is_position_independent() {
        let p = one(0.7);
        for sigma in [0.01, 1.0, 42.0] {
            let theta = Macrostate::original(vec![-3.0, sigma]).unwrap();
            let c = scalar_by_contraction(&theta, &p).unwrap();
            assert!((c - scalar_curvature(&p)).abs() < 1e-10);
        }
    }
}
