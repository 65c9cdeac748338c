//! Group inverses of rank N-1 matrices with known one-dimensional kernels,
//! adjugates, subspace positivity certificates, and a determinant
//! monotonicity check.
//!
//! The matrices of multicomponent diffusion are singular by construction:
//! the friction matrix `B(y)` kills the mass fraction vector on the right
//! and constants on the left. All inversions in this crate therefore go
//! through the group inverse `A#` (`A A# A = A`, `A# A A# = A#`,
//! `A A# = A# A`), computed from adjugates of a rank-one shift.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest dimension accepted by [`adjugate`].
const ADJUGATE_MAX: usize = 12;

/// Row-sum (infinity) norm.
pub(crate) fn norm_inf(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn minor(a: &DMatrix<f64>, row: usize, col: usize) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n - 1, n - 1, |i, j| {
        let ii = if i < row { i } else { i + 1 };
        let jj = if j < col { j } else { j + 1 };
        a[(ii, jj)]
    })
}

/// Determinant by direct expansion up to 6x6, LU beyond. The expansion keeps
/// adjugate entries exact for the small systems that dominate usage.
fn det_dense(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    match n {
        0 => 1.0,
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        3 => {
            a[(0, 0)] * (a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)])
                - a[(0, 1)] * (a[(1, 0)] * a[(2, 2)] - a[(1, 2)] * a[(2, 0)])
                + a[(0, 2)] * (a[(1, 0)] * a[(2, 1)] - a[(1, 1)] * a[(2, 0)])
        }
        _ if n <= 6 => (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[(0, j)] * det_dense(&minor(a, 0, j))
            })
            .sum(),
        _ => a.determinant(),
    }
}

/// Adjugate (transposed cofactor matrix): `A adj(A) = det(A) I`, defined for
/// singular matrices too. Dimensions above 12 are rejected; the cofactor
/// cost explodes and nothing in this crate needs them.
pub fn adjugate(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "adjugate needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("adjugate of an empty matrix".into()));
    }
    if n > ADJUGATE_MAX {
        return Err(Error::DimensionMismatch(format!(
            "adjugate limited to {ADJUGATE_MAX}x{ADJUGATE_MAX}, got {n}"
        )));
    }
    if n == 1 {
        return Ok(DMatrix::from_element(1, 1, 1.0));
    }
    Ok(DMatrix::from_fn(n, n, |j, i| {
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * det_dense(&minor(a, i, j))
    }))
}

/// A square matrix of rank N-1 together with positive vectors spanning its
/// right and left kernels, normalized so `<b, c> = 1`.
#[derive(Debug, Clone)]
pub struct RankDeficientMatrix {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl RankDeficientMatrix {
    /// Validates kernel residuals (`|A b|, |A^T c| <= 1e-10 |A| |.|`),
    /// positivity of both kernel vectors, and that the rank defect is
    /// exactly one (second-smallest singular value above `1e-10 |A|`).
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix {}x{} with kernel vectors of lengths {}, {}",
                n,
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        if n < 2 {
            return Err(Error::DimensionMismatch(
                "rank N-1 structure needs at least 2x2".into(),
            ));
        }
        if let Some(i) = b.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::KernelMismatch(format!(
                "right kernel component {i} is not positive"
            )));
        }
        if let Some(i) = c.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::KernelMismatch(format!(
                "left kernel component {i} is not positive"
            )));
        }
        let na = norm_inf(&a);
        if !((&a * &b).norm() <= 1e-10 * na * b.norm()) {
            return Err(Error::KernelMismatch("A b does not vanish".into()));
        }
        if !((a.transpose() * &c).norm() <= 1e-10 * na * c.norm()) {
            return Err(Error::KernelMismatch("A^T c does not vanish".into()));
        }
        let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|p, q| p.total_cmp(q));
        if !(sv[1] > 1e-10 * na) {
            return Err(Error::KernelMismatch(format!(
                "rank defect exceeds one: second-smallest singular value {}",
                sv[1]
            )));
        }
        Ok(Self::new_unchecked(a, b, c))
    }

    /// Skips validation; still normalizes `<b, c> = 1`. For hot paths where
    /// the kernel structure holds by construction.
    pub fn new_unchecked(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Self {
        let s = b.dot(&c);
        Self { a, b, c: c / s }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }
}

/// Group inverse together with `D0`, the product of the nonzero eigenvalues
/// (equivalently the sum of principal N-1 minors).
#[derive(Debug, Clone)]
pub struct GroupInverseResult {
    pub asharp: DMatrix<f64>,
    pub d0: f64,
}

/// Group inverse through the rank-one shift `A + t b (x) c`:
///
/// `det(A + t b c^T) = D0 t` and
/// `A# = (adj(A + t b c^T) - D0 b c^T) / (t D0)`.
///
/// `t` defaults to `|A|_inf`. The result does not depend on `t`; varying it
/// is a cheap consistency probe.
pub fn group_inverse(rdm: &RankDeficientMatrix, t: Option<f64>) -> Result<GroupInverseResult> {
    let a = rdm.a();
    let n = a.nrows();
    let na = norm_inf(a);
    let t = t.unwrap_or(if na > 0.0 { na } else { 1.0 });
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "shift parameter must be positive and finite, got {t}"
        )));
    }
    let adj_a = adjugate(a)?;
    let d0 = adj_a.trace();
    let threshold = 1e-12 * na.powi(n as i32 - 1);
    if d0.abs() <= threshold {
        return Err(Error::SingularD0 { d0, threshold });
    }
    let bc = rdm.b() * rdm.c().transpose();
    let shifted = a + t * &bc;
    let adj_shifted = adjugate(&shifted)?;
    let asharp = (adj_shifted - d0 * &bc) / (t * d0);
    Ok(GroupInverseResult { asharp, d0 })
}

/// Independent route to the same inverse: solve the bordered system
/// `(A + b c^T) Z = I - b c^T` by LU, then `A# = (I - b c^T) Z`.
pub fn group_inverse_oracle(rdm: &RankDeficientMatrix) -> Result<DMatrix<f64>> {
    let n = rdm.a().nrows();
    let bc = rdm.b() * rdm.c().transpose();
    let proj = DMatrix::identity(n, n) - &bc;
    let lu = (rdm.a() + &bc).lu();
    let z = lu.solve(&proj).ok_or_else(|| {
        Error::KernelMismatch("A + b c^T is singular; hypotheses violated".into())
    })?;
    Ok(proj * z)
}

/// Result of a positivity check restricted to the orthogonal complement of
/// one direction.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceCertificate {
    /// Smallest eigenvalue of the symmetrized matrix on the subspace.
    pub min_eig: f64,
    /// `min_eig >= -1e-10 |M|_inf`.
    pub ok: bool,
}

/// Orthonormal basis of `{kernel}^perp` as the trailing columns of the
/// Householder reflector that sends `e1` onto the kernel direction.
pub(crate) fn householder_complement(kernel: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = kernel.len();
    let knorm = kernel.norm();
    if !(knorm > 0.0) || !knorm.is_finite() {
        return Err(Error::InvalidParameter(
            "kernel direction must be nonzero and finite".into(),
        ));
    }
    let v = kernel / knorm;
    let mut w = v.clone();
    w[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
    let wn2 = w.norm_squared();
    Ok(DMatrix::from_fn(n, n - 1, |i, j| {
        let col = j + 1;
        (if i == col { 1.0 } else { 0.0 }) - 2.0 * w[i] * w[col] / wn2
    }))
}

/// Smallest eigenvalue of symmetric `m` restricted to `{kernel}^perp`,
/// computed in an explicit orthonormal basis from a Householder reflector.
pub fn psd_on_subspace(m: &DMatrix<f64>, kernel: &DVector<f64>) -> Result<SubspaceCertificate> {
    let n = m.nrows();
    if m.ncols() != n || kernel.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix {}x{} against kernel of length {}",
            n,
            m.ncols(),
            kernel.len()
        )));
    }
    if n < 2 {
        return Err(Error::DimensionMismatch(
            "subspace certificate needs at least 2x2".into(),
        ));
    }
    let nm = norm_inf(m);
    let dev = norm_inf(&(m - m.transpose()));
    if dev > 1e-10 * nm {
        return Err(Error::NotSymmetric(dev));
    }
    let q = householder_complement(kernel)?;
    let msym = (m + m.transpose()) * 0.5;
    let sub = q.transpose() * msym * q;
    let min_eig = sub.symmetric_eigenvalues().min();
    Ok(SubspaceCertificate {
        min_eig,
        ok: min_eig >= -1e-10 * nm,
    })
}

/// For symmetric PSD matrices ordered as `a >= b` (meaning `a - b` PSD),
/// checks `det(a) >= det(b)` up to rounding slack. Violated preconditions
/// are errors, not `false`.
pub fn det_monotone(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "determinant comparison of {}x{} against {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    for (name, m) in [("first", a), ("second", b)] {
        let dev = norm_inf(&(m - m.transpose()));
        if dev > 1e-10 * norm_inf(m) {
            return Err(Error::PreconditionViolated(format!(
                "{name} matrix is not symmetric (deviation {dev})"
            )));
        }
    }
    let min_b = ((b + b.transpose()) * 0.5).symmetric_eigenvalues().min();
    if min_b < -1e-10 * norm_inf(b) {
        return Err(Error::PreconditionViolated(format!(
            "second matrix is not positive semidefinite (min eigenvalue {min_b})"
        )));
    }
    let diff = a - b;
    let min_diff = ((&diff + diff.transpose()) * 0.5).symmetric_eigenvalues().min();
    if min_diff < -1e-10 * norm_inf(&diff) {
        return Err(Error::PreconditionViolated(format!(
            "difference is not positive semidefinite (min eigenvalue {min_diff})"
        )));
    }
    let da = a.determinant();
    let db = b.determinant();
    Ok(da >= db - 1e-10 * da.abs().max(1.0))
}
