//! Minimal fixed-size 2×2 helpers. Every block in this crate is 2×2, so a
//! general linear-algebra dependency buys nothing here.

pub type Mat2 = [[f64; 2]; 2];
pub type Vec2 = [f64; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn apply(a: &Mat2, v: &Vec2) -> Vec2 {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

pub fn scale(a: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn diag(d0: f64, d1: f64) -> Mat2 {
    [[d0, 0.0], [0.0, d1]]
}

/// Max-norm of `a - b`.
pub fn max_abs_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn symmetric_eigenvalues(a: &Mat2) -> (f64, f64) {
    let half_trace = 0.5 * (a[0][0] + a[1][1]);
    let half_gap = 0.5 * (a[0][0] - a[1][1]);
    let radius = half_gap.hypot(a[0][1]);
    (half_trace - radius, half_trace + radius)
}

/// Quadratic form vᵀ A v.
pub fn quadratic_form(a: &Mat2, v: &Vec2) -> f64 {
    let av = apply(a, v);
    v[0] * av[0] + v[1] * av[1]
}
