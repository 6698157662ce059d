//! Dense complex linear algebra used throughout the simulator.
//!
//! Thin wrappers over `nalgebra` that pin down the conventions the rest of
//! the crate depends on: singular values sorted in decreasing order, a fixed
//! phase for every singular pair, deterministic orthonormal completions, and
//! log-determinants evaluated through Cholesky factors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Thin singular value decomposition `m = u * diag(s) * v^H`.
///
/// `u` is `rows x k`, `v` is `cols x k` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.s.first().copied().unwrap_or(0.0);
        if top <= f64::MIN_POSITIVE {
            return 0;
        }
        self.s.iter().filter(|&&x| x > rel_tol * top).count()
    }
}

/// Thin SVD with decreasing singular values.
///
/// Each right singular vector is rotated so that its largest-magnitude entry
/// is real and nonnegative; the matching left vector absorbs the same phase.
pub fn svd(m: &CMat) -> Svd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    let dec = m.clone().svd(true, true);
    let u_raw = dec.u.expect("left singular vectors requested");
    let v_t = dec.v_t.expect("right singular vectors requested");
    let s_raw = dec.singular_values;

    let mut order: Vec<usize> = (0..k).collect();
    // stable sort keeps the decomposition's own order on ties
    order.sort_by(|&a, &b| s_raw[b].total_cmp(&s_raw[a]));

    let mut u = CMat::zeros(rows, k);
    let mut v = CMat::zeros(cols, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut best = 0;
        let mut best_mag: f64 = -1.0;
        for r in 0..cols {
            let mag = v_t[(src, r)].norm();
            if mag > best_mag + 1e-12 * best_mag.max(1.0) {
                best = r;
                best_mag = mag;
            }
        }
        let pivot = v_t[(src, best)].conj();
        let phase = if pivot.norm() > 0.0 { pivot / pivot.norm() } else { ONE };
        // column of V is conj(row of V^H)
        for r in 0..cols {
            v[(r, dst)] = v_t[(src, r)].conj() * phase.conj();
        }
        for r in 0..rows {
            u[(r, dst)] = u_raw[(r, src)] * phase.conj();
        }
        s.push(s_raw[src]);
    }
    Svd { u, s, v }
}

/// Extends the orthonormal columns of `basis` to `total` orthonormal columns.
///
/// Candidates are the canonical basis vectors `e_0, e_1, ...` in order, each
/// orthogonalised against everything kept so far (two Gram-Schmidt passes);
/// candidates with a residual below 1e-6 are skipped.
pub fn orthonormal_completion(basis: &CMat, total: usize) -> CMat {
    let rows = basis.nrows();
    assert!(total <= rows, "cannot complete beyond the ambient dimension");
    let mut cols: Vec<CVec> = basis.column_iter().map(|c| c.into_owned()).collect();
    cols.truncate(total);
    let mut candidate = 0;
    while cols.len() < total && candidate < rows {
        let mut e = CVec::zeros(rows);
        e[candidate] = ONE;
        candidate += 1;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&e);
                e -= c * proj;
            }
        }
        let n = e.norm();
        if n > 1e-6 {
            cols.push(e / Complex64::new(n, 0.0));
        }
    }
    CMat::from_columns(&cols)
}

/// The first `k` left singular vectors of `m`, completed to `k` orthonormal
/// columns when `m` has fewer than `k` columns.
pub fn leading_left_basis(m: &CMat, k: usize) -> Result<CMat> {
    if k > m.nrows() {
        return Err(Error::Config(format!(
            "requested {k} left singular vectors of a matrix with {} rows",
            m.nrows()
        )));
    }
    let dec = svd(m);
    let keep = dec.u.ncols().min(k);
    let head = dec.u.columns(0, keep).into_owned();
    Ok(orthonormal_completion(&head, k))
}

/// `I_{rows x cols}`: ones on the main diagonal, zeros elsewhere.
pub fn identity_like(rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |r, c| if r == c { ONE } else { ZERO })
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Moore-Penrose pseudo-inverse of a matrix with full column rank,
/// `(A^H A)^{-1} A^H`, computed from the SVD.
pub fn pinv_full_column_rank(a: &CMat) -> Result<CMat> {
    let dec = svd(a);
    let k = dec.s.len();
    if k < a.ncols() || dec.rank(1e-10) < a.ncols() {
        return Err(Error::Degenerate(format!(
            "{}x{} matrix is not of full column rank",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut vs = dec.v.clone();
    for (j, s) in dec.s.iter().enumerate() {
        vs.column_mut(j).scale_mut(1.0 / s);
    }
    Ok(vs * dec.u.adjoint())
}

/// Hermitian part `(m + m^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `log2 det(m)` for Hermitian positive definite `m`.
pub fn log2det_hpd(m: &CMat) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("matrix is not positive definite".into()))?;
    let l = chol.l_dirty();
    Ok((0..m.nrows()).map(|i| 2.0 * l[(i, i)].re.log2()).sum())
}

/// `log2 det(I + A^H C^{-1} A)` with `C` Hermitian positive definite.
pub fn log2det_whitened(a: &CMat, c: &CMat) -> Result<f64> {
    let chol = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("noise covariance is not positive definite".into()))?;
    let x = chol
        .l()
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Degenerate("singular noise covariance factor".into()))?;
    let k = a.ncols();
    let m = CMat::identity(k, k) + x.adjoint() * x;
    log2det_hpd(&hermitian_part(&m))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Principal angles (radians, ascending) between the column spans of `a`
/// and `b`. Both inputs are orthonormalised first.
pub fn principal_angles(a: &CMat, b: &CMat) -> Vec<f64> {
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    let cross = qa.adjoint() * qb;
    let mut angles: Vec<f64> = svd(&cross).s.iter().map(|&c| c.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

fn orthonormal_columns(a: &CMat) -> CMat {
    let dec = svd(a);
    let r = dec.rank(1e-12);
    dec.u.columns(0, r).into_owned()
}
