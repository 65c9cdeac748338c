//! Fickian diffusion matrices, their spectra, Z-matrix and diagonal
//! positivity diagnostics, and a friction model witnessing that a positive
//! semidefinite flux operator does not force positive friction coefficients.

use nalgebra::{Complex, DMatrix, DVector};

use crate::closures::{assemble_b, assemble_tau, MaxwellStefanClosure, OnsagerClosure};
use crate::darken::core_diagonal_fo_coeffs;
use crate::error::{Error, Result};
use crate::groupinv::{group_inverse, norm_inf, RankDeficientMatrix};
use crate::mixture::{MixtureState, GAS_CONSTANT};

/// Constraint regime a Fickian matrix was built under. The gradient variable
/// differs per regime: partial densities for the Hessian forms, mole
/// fractions for the mole-fraction form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FickianContext {
    FullHessian,
    IdealIsobaric,
    MoleFraction,
}

/// Proportionality matrix between molar fluxes and composition gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct FickianMatrix {
    dfick: DMatrix<f64>,
    context: FickianContext,
}

impl FickianMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.dfick
    }

    pub fn context(&self) -> FickianContext {
        self.context
    }
}

fn check_square(m: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{} against {n} species",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Fickian matrix for an isothermal mixture with a user-supplied free-energy
/// Hessian `H` (second derivatives in the partial mass densities):
/// `Dfick = M^{-1} L H M / (R T)`. A diagonal Hessian models so-called
/// simple mixtures; the ideal isobaric Hessian reproduces
/// [`fickian_ideal_isobaric`].
pub fn fickian_from_hessian(
    state: &MixtureState,
    oc: &OnsagerClosure,
    hessian: &DMatrix<f64>,
) -> Result<FickianMatrix> {
    let n = state.n_species();
    check_square(oc.matrix(), n, "Onsager matrix")?;
    check_square(hessian, n, "Hessian")?;
    let m = state.molar_mass();
    let rt = GAS_CONSTANT * state.temperature();
    let lh = oc.matrix() * hessian;
    let dfick = DMatrix::from_fn(n, n, |i, j| lh[(i, j)] * m[j] / (m[i] * rt));
    Ok(FickianMatrix {
        dfick,
        context: FickianContext::FullHessian,
    })
}

/// Fickian matrix of an ideal, isothermal, isobaric mixture:
/// `Dfick = M^{-1} (L R^{-1} - (1/c) L M^{-1} e (x) e)`. The molar-mass
/// vector is a left null vector of the result.
pub fn fickian_ideal_isobaric(state: &MixtureState, oc: &OnsagerClosure) -> Result<FickianMatrix> {
    let n = state.n_species();
    check_square(oc.matrix(), n, "Onsager matrix")?;
    state.require_strict()?;
    let l = oc.matrix();
    let m = state.molar_mass();
    let rho = DVector::from_fn(n, |i, _| state.partial_density(i));
    let c = state.total_concentration();
    let minv_e = DVector::from_fn(n, |i, _| 1.0 / m[i]);
    let u = (l * minv_e) / c;
    let dfick = DMatrix::from_fn(n, n, |i, j| (l[(i, j)] / rho[j] - u[i]) / m[i]);
    Ok(FickianMatrix {
        dfick,
        context: FickianContext::IdealIsobaric,
    })
}

/// Mole-fraction Fickian matrix from the Onsager route: `c Dtilde = L X^{-1}`.
pub fn fickian_molefraction_from_onsager(
    state: &MixtureState,
    oc: &OnsagerClosure,
) -> Result<FickianMatrix> {
    let n = state.n_species();
    check_square(oc.matrix(), n, "Onsager matrix")?;
    state.require_strict()?;
    let x = state.mole_fractions();
    let c = state.total_concentration();
    let l = oc.matrix();
    let dfick = DMatrix::from_fn(n, n, |i, j| l[(i, j)] / (x[j] * c));
    Ok(FickianMatrix {
        dfick,
        context: FickianContext::MoleFraction,
    })
}

/// Mole-fraction Fickian matrix from the friction route: `Dtilde = B# M`.
/// Agrees with the Onsager route whenever `L = B# R`.
pub fn fickian_molefraction_from_ms(
    state: &MixtureState,
    msc: &MaxwellStefanClosure,
) -> Result<FickianMatrix> {
    let n = state.n_species();
    if msc.n_species() != n {
        return Err(Error::DimensionMismatch(format!(
            "friction table for {} species against a state with {}",
            msc.n_species(),
            n
        )));
    }
    state.require_strict()?;
    let b = assemble_b(state, msc);
    let e = DVector::from_element(n, 1.0);
    let rdm = RankDeficientMatrix::new_unchecked(b, state.fractions().clone(), e);
    let bsharp = group_inverse(&rdm, None)?.asharp;
    let m = state.molar_mass();
    let dfick = DMatrix::from_fn(n, n, |i, j| bsharp[(i, j)] * m[j]);
    Ok(FickianMatrix {
        dfick,
        context: FickianContext::MoleFraction,
    })
}

/// Diagonal lower bound for the ideal isobaric Fickian matrix of a
/// core-diagonal closure: returns `slack_i = D_ii - d_i (1-y_i) (1-x_i)`,
/// which is nonnegative whenever every `d_i` is.
pub fn fick_diag_bound_check(state: &MixtureState, d: &DVector<f64>) -> Result<DVector<f64>> {
    let oc = core_diagonal_fo_coeffs(state, d)?;
    let fick = fickian_ideal_isobaric(state, &oc)?;
    let y = state.fractions();
    let x = state.mole_fractions();
    let n = state.n_species();
    Ok(DVector::from_fn(n, |i, _| {
        fick.matrix()[(i, i)] - d[i] * (1.0 - y[i]) * (1.0 - x[i])
    }))
}

/// Balances a square matrix by diagonal similarity with powers of two
/// so row and column norms approach each other. Eigenvalues are preserved
/// exactly; their numerical computation conditions much better.
pub fn balance_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    if n < 2 {
        return a;
    }
    const RADIX: f64 = 2.0;
    let sq = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut col: f64 = (0..n).filter(|&j| j != i).map(|j| a[(j, i)].abs()).sum();
            let row: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            if col == 0.0 || row == 0.0 || !col.is_finite() || !row.is_finite() {
                continue;
            }
            let mut f = 1.0;
            let s = col + row;
            let mut g = row / RADIX;
            while col < g {
                f *= RADIX;
                col *= sq;
            }
            g = row * RADIX;
            while col >= g {
                f /= RADIX;
                col /= sq;
            }
            if (col + row) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
    a
}

/// Eigenvalues of a general square matrix, computed after balancing,
/// sorted by real part then imaginary part.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex<f64>>,
    pub max_abs_imag: f64,
    pub min_real: f64,
}

pub fn spectrum(m: &DMatrix<f64>) -> SpectrumReport {
    let balanced = balance_matrix(m);
    let mut eigenvalues: Vec<Complex<f64>> = balanced.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("finite eigenvalues"));
    let max_abs_imag = eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let min_real = eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    SpectrumReport {
        eigenvalues,
        max_abs_imag,
        min_real,
    }
}

/// Strict Z-matrix test: true iff every off-diagonal entry is negative.
pub fn z_matrix_test(candidate: &DMatrix<f64>) -> bool {
    let n = candidate.nrows();
    (0..n).all(|i| (0..n).all(|k| i == k || candidate[(i, k)] < 0.0))
}

/// Friction-form matrix generated by an Onsager closure: `B := (L R^{-1})#`.
/// The same matrix is `R P L# P^T`; both routes are computed and must agree
/// within 1e-9, which cross-validates the group inverses.
pub fn onsager_ms_candidate(state: &MixtureState, oc: &OnsagerClosure) -> Result<DMatrix<f64>> {
    let n = state.n_species();
    check_square(oc.matrix(), n, "Onsager matrix")?;
    state.require_strict()?;
    let l = oc.matrix();
    let lr_inv = DMatrix::from_fn(n, n, |i, j| l[(i, j)] / state.partial_density(j));
    let e = DVector::from_element(n, 1.0);
    let cand = group_inverse(
        &RankDeficientMatrix::new_unchecked(lr_inv, state.fractions().clone(), e.clone()),
        None,
    )?
    .asharp;

    let scaled = &e / (n as f64).sqrt();
    let lsharp = group_inverse(
        &RankDeficientMatrix::new_unchecked(l.clone(), scaled.clone(), scaled),
        None,
    )?
    .asharp;
    let der = state.derived();
    let alt = &der.r * &der.p * lsharp * &der.pt;
    let dev = norm_inf(&(&cand - &alt));
    if dev > 1e-9 * norm_inf(&cand).max(f64::MIN_POSITIVE) {
        return Err(Error::PreconditionViolated(format!(
            "friction-form routes disagree by {dev}"
        )));
    }
    Ok(cand)
}

/// Per-species diagonal-positivity condition on the coupling matrix `S` of
/// an Onsager structure with `L e = 0` (so `a = -S y` is implied):
/// `slack_i = <S e, e> y_i / ((N-2)(N-1)) - <S y, e_i> - (2/(N-2)) <S e, e_i> y_i`.
/// `slack_i` equals `M_i d_i` of the projected form, so the condition holds
/// for every species exactly when the projected diagonal is nonnegative.
#[derive(Debug, Clone)]
pub struct PosdiagReport {
    pub slack: DVector<f64>,
    pub satisfied: Vec<bool>,
}

pub fn posdiag_condition(state: &MixtureState, s: &DMatrix<f64>) -> Result<PosdiagReport> {
    let n = state.n_species();
    check_square(s, n, "coupling matrix")?;
    if n < 3 {
        return Err(Error::BinaryMixture);
    }
    let dev = norm_inf(&(s - s.transpose()));
    if dev > 1e-10 * norm_inf(s).max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(dev));
    }
    let y = state.fractions();
    let e = DVector::from_element(n, 1.0);
    let se = s * &e;
    let sy = s * y;
    let sigma = se.sum();
    let nm2 = (n - 2) as f64;
    let nm1 = (n - 1) as f64;
    let slack = DVector::from_fn(n, |i, _| {
        sigma * y[i] / (nm2 * nm1) - sy[i] - 2.0 / nm2 * se[i] * y[i]
    });
    let satisfied = slack.iter().map(|&v| v >= 0.0).collect();
    Ok(PosdiagReport { slack, satisfied })
}

/// Ternary friction model whose flux operator stays admissible while one
/// friction coefficient turns negative. With the coupling matrix
///
/// ```text
///     [ a-1   1   -a ]
/// A = [  1   a-1  -a ]       (a > 2)
///     [ -a   -a   2a ]
/// ```
///
/// (zero row sums, nonzero eigenvalues `a-2` and `3a`, both positive), the
/// frictions are `f_ik(y) = |y - y0|^2 + y_[ik] A_ik` with `[ik]` the index
/// complementary to `i, k`. At `y = y0` the pair (1,3) has
/// `f_13 = -a y0_2 < 0`, yet `tau(y) = |y - y0|^2 tau_uniform + rho y1 y2 y3 A`
/// remains symmetric with zero row sums and positive semidefinite on the
/// complement of constants near `y0`.
#[derive(Debug, Clone)]
pub struct NegativeFrictionWitness {
    a: f64,
    y0: DVector<f64>,
}

impl NegativeFrictionWitness {
    pub fn new(a: f64, y0: DVector<f64>) -> Result<Self> {
        if !(a > 2.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coupling strength must exceed 2, got {a}"
            )));
        }
        if y0.len() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "reference composition must be ternary, got length {}",
                y0.len()
            )));
        }
        for (i, &v) in y0.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NegativeFraction { index: i, value: v });
            }
            if v == 0.0 {
                return Err(Error::ZeroFraction(i));
            }
        }
        let sum = y0.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::FractionSumOutOfRange(sum));
        }
        Ok(Self { a, y0 })
    }

    pub fn coupling(&self) -> DMatrix<f64> {
        let a = self.a;
        DMatrix::from_row_slice(
            3,
            3,
            &[
                a - 1.0,
                1.0,
                -a,
                1.0,
                a - 1.0,
                -a,
                -a,
                -a,
                2.0 * a,
            ],
        )
    }

    /// Friction table at composition `y`.
    pub fn friction(&self, y: &DVector<f64>) -> Result<MaxwellStefanClosure> {
        if y.len() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "composition must be ternary, got length {}",
                y.len()
            )));
        }
        let q = (y - &self.y0).norm_squared();
        let a = self.coupling();
        let mut f = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for k in 0..3 {
                if i != k {
                    let comp = 3 - i - k;
                    f[(i, k)] = q + y[comp] * a[(i, k)];
                }
            }
        }
        MaxwellStefanClosure::validated(f)
    }

    /// Flux-operator matrix at the state's composition:
    /// `tau = |y - y0|^2 tau_uniform(y) + rho y1 y2 y3 A`.
    pub fn tau(&self, state: &MixtureState) -> Result<DMatrix<f64>> {
        if state.n_species() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "state must be ternary, got {} species",
                state.n_species()
            )));
        }
        let y = state.fractions();
        let q = (y - &self.y0).norm_squared();
        let ones = MaxwellStefanClosure::new_unchecked(DMatrix::from_element(3, 3, 1.0));
        let tau_uniform = assemble_tau(state, &ones);
        let weight = state.density() * y[0] * y[1] * y[2];
        Ok(tau_uniform * q + self.coupling() * weight)
    }
}
