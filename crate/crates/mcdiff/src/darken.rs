//! Composition-dependent diffusivity models: Darken mixing of self
//! diffusivities, the Vignes interpolation, molar-frame Maxwell-Stefan
//! matrices, the explicit ternary inverse, and the Onsager matrix of a
//! core-diagonal closure.

use nalgebra::{DMatrix, DVector};

use crate::closures::{reconstruct_onsager, MaxwellStefanClosure, OnsagerClosure, OnsagerStructure};
use crate::error::{Error, Result};
use crate::mixture::MixtureState;

fn validate_composition(x: &DVector<f64>) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativeFraction { index: i, value: v });
        }
    }
    let sum = x.sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::FractionSumOutOfRange(sum));
    }
    Ok(())
}

fn require_strict(x: &DVector<f64>) -> Result<()> {
    match x.iter().position(|&v| v <= 0.0) {
        Some(i) => Err(Error::ZeroFraction(i)),
        None => Ok(()),
    }
}

/// Self diffusivities at infinite dilution: entry `(i, k)` is the self
/// diffusivity of species `i` in nearly pure `k`. All entries positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfDiffusionModel {
    d_dilute: DMatrix<f64>,
}

impl SelfDiffusionModel {
    pub fn new(d_dilute: DMatrix<f64>) -> Result<Self> {
        let n = d_dilute.nrows();
        if d_dilute.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "dilute-limit table must be square, got {}x{}",
                n,
                d_dilute.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::TooFewSpecies(n));
        }
        if let Some(&v) = d_dilute.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveDiffusivity(v));
        }
        Ok(Self { d_dilute })
    }

    pub fn table(&self) -> &DMatrix<f64> {
        &self.d_dilute
    }

    pub fn n_species(&self) -> usize {
        self.d_dilute.nrows()
    }
}

/// Harmonic mixing rule for self diffusivities:
/// `1/d_i(x) = sum_k x_k / D_i^{x_k -> 1}`. At a pure component `x = e_k`
/// this returns column `k` of the dilute table.
pub fn self_diffusion_mix(model: &SelfDiffusionModel, x: &DVector<f64>) -> Result<DVector<f64>> {
    let n = model.n_species();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "composition of length {} against {} species",
            x.len(),
            n
        )));
    }
    validate_composition(x)?;
    let t = model.table();
    Ok(DVector::from_fn(n, |i, _| {
        let inv: f64 = (0..n).map(|k| x[k] / t[(i, k)]).sum();
        1.0 / inv
    }))
}

/// Vignes interpolation of a binary Maxwell-Stefan diffusivity between its
/// dilute limits: `D(x1) = (D^{x1->1})^{x1} (D^{x2->1})^{x2}`.
pub fn vignes_binary(d_x1_limit: f64, d_x2_limit: f64, x1: f64) -> Result<f64> {
    for d in [d_x1_limit, d_x2_limit] {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NonPositiveDiffusivity(d));
        }
    }
    if !(0.0..=1.0).contains(&x1) {
        return Err(Error::InvalidParameter(format!(
            "mole fraction must lie in [0, 1], got {x1}"
        )));
    }
    Ok(d_x1_limit.powf(x1) * d_x2_limit.powf(1.0 - x1))
}

/// Darken prediction of the Maxwell-Stefan diffusivity table from mixture
/// self diffusivities: `D_ij = d_i d_j sum_k x_k / d_k` off the diagonal
/// (diagonal stored zero). The binary case reduces to `x1 d2 + x2 d1`,
/// computed in that closed form so the reduction is exact.
pub fn darken_ms_diffusivities(x: &DVector<f64>, d: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = x.len();
    if d.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "composition of length {n} against {} self diffusivities",
            d.len()
        )));
    }
    if n < 2 {
        return Err(Error::TooFewSpecies(n));
    }
    validate_composition(x)?;
    if let Some(&v) = d.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositiveDiffusivity(v));
    }
    if n == 2 {
        let val = x[0] * d[1] + x[1] * d[0];
        return Ok(DMatrix::from_fn(2, 2, |i, j| if i == j { 0.0 } else { val }));
    }
    let s: f64 = (0..n).map(|k| x[k] / d[k]).sum();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            d[i] * d[j] * s
        }
    }))
}

/// Maxwell-Stefan matrix in the molar frame, built from mole fractions and
/// a symmetric positive diffusivity table: `Bmol_ij = -x_i / D_ij` off the
/// diagonal, `Bmol_ii = sum_{k != i} x_k / D_ik`. Kills `x` on the right and
/// constants on the left.
#[derive(Debug, Clone, PartialEq)]
pub struct MolarMsMatrix {
    m: DMatrix<f64>,
}

impl MolarMsMatrix {
    pub fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

pub fn assemble_bmol(x: &DVector<f64>, dmat: &DMatrix<f64>) -> Result<MolarMsMatrix> {
    let n = x.len();
    if dmat.nrows() != n || dmat.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "diffusivity table {}x{} against {} species",
            dmat.nrows(),
            dmat.ncols(),
            n
        )));
    }
    validate_composition(x)?;
    require_strict(x)?;
    let mut dev = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let v = dmat[(i, k)];
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NonPositiveDiffusivity(v));
                }
                scale = scale.max(v.abs());
                dev = dev.max((dmat[(i, k)] - dmat[(k, i)]).abs());
            }
        }
    }
    if dev > 1e-12 * scale {
        return Err(Error::AsymmetricFriction(dev));
    }
    let m = DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| x[j] / dmat[(i, j)])
                .sum()
        } else {
            -x[i] / dmat[(i, k)]
        }
    });
    Ok(MolarMsMatrix::new_unchecked(m))
}

/// Recovers the self diffusivities behind a Darken-sourced molar matrix.
/// With `v_ik = -Bmol_ik / x_i = u_i u_k / s` (`u = 1/d`, `s = <x, u>`),
/// `w_i = sqrt(v_ij v_ik / v_jk)` for any `j != k` distinct from `i` gives
/// `u_i / sqrt(s)`, and `<x, w> = sqrt(s)` closes the system. The two
/// smallest admissible indices are used, so the result is deterministic.
/// A binary matrix carries one equation for two unknowns: not recoverable.
pub fn recover_core_diagonal(x: &DVector<f64>, bmol: &MolarMsMatrix) -> Result<DVector<f64>> {
    let n = x.len();
    let m = bmol.matrix();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "molar matrix {}x{} against {} species",
            m.nrows(),
            m.ncols(),
            n
        )));
    }
    if n == 2 {
        return Err(Error::BinaryMixture);
    }
    validate_composition(x)?;
    require_strict(x)?;
    let v = |i: usize, k: usize| -> Result<f64> {
        let val = -m[(i, k)] / x[i];
        if !(val > 0.0) {
            return Err(Error::PreconditionViolated(format!(
                "pair ({i}, {k}) has nonpositive interaction {val}; not of Darken form"
            )));
        }
        Ok(val)
    };
    let mut w = DVector::zeros(n);
    for i in 0..n {
        let mut others = (0..n).filter(|&j| j != i);
        let j = others.next().expect("n >= 3");
        let k = others.next().expect("n >= 3");
        w[i] = (v(i, j)? * v(i, k)? / v(j, k)?).sqrt();
    }
    let sqrt_s = x.dot(&w);
    Ok(DVector::from_fn(n, |i, _| 1.0 / (w[i] * sqrt_s)))
}

/// Diagonal representation extracted by the closed-form ternary inverse:
/// the flux operator is `-P^T [diag(dtilde) + Y ktilde] P^T R grad` with
/// `ktilde = 0`; equivalently the projected closure with
/// `d_i = dtilde_i / M_i` and `K = 0`.
#[derive(Debug, Clone)]
pub struct TernaryDiagonal {
    pub dtilde: DVector<f64>,
    pub ktilde: DMatrix<f64>,
    pub det: f64,
}

/// Closed-form ternary Maxwell-Stefan fluxes. For `N = 3` the reduced
/// friction system inverts explicitly:
///
/// `det = y1 f12 f13 + y2 f12 f23 + y3 f13 f23`, and `J = -(1/det) G d`
/// with `d` the driving forces and
///
/// ```text
///     [ (1-y1) f23   -y1 f13      -y1 f12    ]
/// G = [ -y2 f23      (1-y2) f13   -y2 f12    ]
///     [ -y3 f23      -y3 f13      (1-y3) f12 ]
/// ```
pub fn ternary_explicit_fluxes(
    state: &MixtureState,
    msc: &MaxwellStefanClosure,
    d_forces: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, TernaryDiagonal)> {
    let n = state.n_species();
    if n != 3 || msc.n_species() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "explicit inverse is ternary only, got {n} species"
        )));
    }
    if d_forces.nrows() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "driving forces must have 3 rows, got {}",
            d_forces.nrows()
        )));
    }
    let y = state.fractions();
    let f = msc.friction();
    let (f12, f13, f23) = (f[(0, 1)], f[(0, 2)], f[(1, 2)]);
    let det = y[0] * f12 * f13 + y[1] * f12 * f23 + y[2] * f13 * f23;
    let fmax = f12.abs().max(f13.abs()).max(f23.abs());
    if det.abs() <= 1e-14 * fmax * fmax {
        return Err(Error::DegenerateTernary(det));
    }
    let g = DMatrix::from_row_slice(
        3,
        3,
        &[
            (1.0 - y[0]) * f23,
            -y[0] * f13,
            -y[0] * f12,
            -y[1] * f23,
            (1.0 - y[1]) * f13,
            -y[1] * f12,
            -y[2] * f23,
            -y[2] * f13,
            (1.0 - y[2]) * f12,
        ],
    );
    let j = -(g * d_forces) / det;
    let diag = TernaryDiagonal {
        dtilde: DVector::from_row_slice(&[f23 / det, f13 / det, f12 / det]),
        ktilde: DMatrix::zeros(3, 3),
        det,
    };
    Ok((j, diag))
}

/// Onsager matrix of a core-diagonal closure (projected form with `K = 0`):
/// with `lambda_i = d_i M_i`,
/// `L_ij = rho_i (lambda_i delta_ij - y_j (lambda_i + lambda_j - <y, lambda>))`.
/// Carries the structural decomposition
/// `a_i = lambda_i - y_i (2 lambda_i - <y, lambda>)`,
/// `S_ij = -(lambda_i + lambda_j - <y, lambda>)` off the diagonal.
/// Admissible whenever every `d_i` is nonnegative; no sign check is imposed
/// here so diagnostic pipelines can probe arbitrary diffusivities.
pub fn core_diagonal_fo_coeffs(state: &MixtureState, d: &DVector<f64>) -> Result<OnsagerClosure> {
    let n = state.n_species();
    if d.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} diffusivities against {} species",
            d.len(),
            n
        )));
    }
    let m = state.molar_mass();
    let y = state.fractions();
    let lambda = DVector::from_fn(n, |i, _| d[i] * m[i]);
    let ylambda = y.dot(&lambda);
    let a = DVector::from_fn(n, |i, _| lambda[i] - y[i] * (2.0 * lambda[i] - ylambda));
    let s = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            -(lambda[i] + lambda[j] - ylambda)
        }
    });
    let structure = OnsagerStructure { a, s };
    let l = reconstruct_onsager(state, &structure);
    Ok(OnsagerClosure::new_unchecked(l, Some(structure)))
}

/// Onsager closure of a Darken self-diffusion model evaluated at a state.
pub fn darken_onsager(state: &MixtureState, model: &SelfDiffusionModel) -> Result<OnsagerClosure> {
    let x = state.mole_fractions();
    let d = self_diffusion_mix(model, &x)?;
    core_diagonal_fo_coeffs(state, &d)
}

/// Molar-frame friction table: `fmol_ik = f_ik M_i M_k c / rho`.
pub fn friction_mass_to_molar(state: &MixtureState, msc: &MaxwellStefanClosure) -> DMatrix<f64> {
    let n = msc.n_species();
    let m = state.molar_mass();
    let factor = state.total_concentration() / state.density();
    let f = msc.friction();
    DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            0.0
        } else {
            f[(i, k)] * m[i] * m[k] * factor
        }
    })
}

/// Inverse of [`friction_mass_to_molar`].
pub fn friction_molar_to_mass(
    state: &MixtureState,
    fmol: &DMatrix<f64>,
) -> Result<MaxwellStefanClosure> {
    let n = state.n_species();
    if fmol.nrows() != n || fmol.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "molar friction table {}x{} against {} species",
            fmol.nrows(),
            fmol.ncols(),
            n
        )));
    }
    let m = state.molar_mass();
    let factor = state.density() / state.total_concentration();
    let f = DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            0.0
        } else {
            fmol[(i, k)] * factor / (m[i] * m[k])
        }
    });
    MaxwellStefanClosure::validated(f)
}

/// Maxwell-Stefan diffusivities from mass-based friction:
/// `D_ik = 1 / fmol_ik = rho / (c M_i M_k f_ik)`.
pub fn ms_diffusivities_from_friction(
    state: &MixtureState,
    msc: &MaxwellStefanClosure,
) -> Result<DMatrix<f64>> {
    let n = msc.n_species();
    let fmol = friction_mass_to_molar(state, msc);
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let v = fmol[(i, k)];
                if v == 0.0 || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "friction f[{i},{k}] vanishes; no finite diffusivity"
                    )));
                }
                out[(i, k)] = 1.0 / v;
            }
        }
    }
    Ok(out)
}

/// Mass-based friction from a Maxwell-Stefan diffusivity table:
/// `f_ik = rho / (c M_i M_k D_ik)`.
pub fn friction_from_ms_diffusivities(
    state: &MixtureState,
    dmat: &DMatrix<f64>,
) -> Result<MaxwellStefanClosure> {
    let n = state.n_species();
    if dmat.nrows() != n || dmat.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "diffusivity table {}x{} against {} species",
            dmat.nrows(),
            dmat.ncols(),
            n
        )));
    }
    let m = state.molar_mass();
    let factor = state.density() / state.total_concentration();
    let mut f = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let v = dmat[(i, k)];
                if v == 0.0 || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "diffusivity D[{i},{k}] vanishes; no finite friction"
                    )));
                }
                f[(i, k)] = factor / (m[i] * m[k] * v);
            }
        }
    }
    MaxwellStefanClosure::validated(f)
}
