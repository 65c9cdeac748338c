//! The three equivalent closure forms for multicomponent diffusive fluxes
//! and their flux operators.
//!
//! With `G` the matrix of chemical potential gradients `grad(mu_i/RT)`:
//!
//! * Fick-Onsager: `J = -L G`, `L` symmetric, `L e = 0`, PSD on `{e}^perp`.
//! * Maxwell-Stefan: `B(y) J = -R P G` with `B_ik = -y_i f_ik` off the
//!   diagonal and `B_ii = sum_{k != i} y_k f_ik`; solved through the group
//!   inverse `B#`.
//! * Projected: `J = -P^T R [diag(d) + K X] M P G` with one diffusivity per
//!   species and a symmetric zero-diagonal interaction matrix `K` with
//!   `K e = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::groupinv::{group_inverse, norm_inf, psd_on_subspace, RankDeficientMatrix};
use crate::mixture::{GradientField, MixtureState};

/// Structural decomposition `L = R (diag(a) + S Y)` with `S` symmetric and
/// zero on the diagonal. Required by the transform into the projected form.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsagerStructure {
    pub a: DVector<f64>,
    pub s: DMatrix<f64>,
}

impl OnsagerStructure {
    /// The canonical decomposition of a symmetric `L` with `L e = 0` on a
    /// strict state: `a_i = L_ii / rho_i`, `S_ik = L_ik / (rho_i y_k)` off
    /// the diagonal. `S` inherits symmetry from `L`, and `L e = 0` makes the
    /// reconstruction exact.
    pub fn canonical(state: &MixtureState, l: &DMatrix<f64>) -> Result<Self> {
        state.require_strict()?;
        let n = state.n_species();
        if l.nrows() != n || l.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix against {} species",
                l.nrows(),
                l.ncols(),
                n
            )));
        }
        let y = state.fractions();
        let rho = state.density();
        let a = DVector::from_fn(n, |i, _| l[(i, i)] / (rho * y[i]));
        let mut s = DMatrix::from_fn(n, n, |i, k| {
            if i == k {
                0.0
            } else {
                l[(i, k)] / (rho * y[i] * y[k])
            }
        });
        // Exact symmetry even when L carries rounding noise.
        s = (&s + s.transpose()) * 0.5;
        Ok(Self { a, s })
    }
}

/// Fick-Onsager closure: flux matrix `L`, optionally with its structural
/// decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsagerClosure {
    l: DMatrix<f64>,
    structure: Option<OnsagerStructure>,
}

impl OnsagerClosure {
    /// Validates symmetry, `L e = 0`, positive semidefiniteness on
    /// `{e}^perp`, and consistency of the structural decomposition when one
    /// is supplied.
    pub fn validated(
        state: &MixtureState,
        l: DMatrix<f64>,
        structure: Option<OnsagerStructure>,
    ) -> Result<Self> {
        let n = state.n_species();
        if l.nrows() != n || l.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} Onsager matrix against {} species",
                l.nrows(),
                l.ncols(),
                n
            )));
        }
        let nl = norm_inf(&l);
        let dev = norm_inf(&(&l - l.transpose()));
        if dev > 1e-10 * nl {
            return Err(Error::NotSymmetric(dev));
        }
        let e = DVector::from_element(n, 1.0);
        if (&l * &e).norm() > 1e-10 * nl {
            return Err(Error::KernelMismatch("L e does not vanish".into()));
        }
        let cert = psd_on_subspace(&l, &e)?;
        if !cert.ok {
            return Err(Error::PreconditionViolated(format!(
                "Onsager matrix not positive semidefinite on {{e}}^perp (min eigenvalue {})",
                cert.min_eig
            )));
        }
        if let Some(st) = &structure {
            if st.a.len() != n || st.s.nrows() != n || st.s.ncols() != n {
                return Err(Error::DimensionMismatch(
                    "structure dimensions disagree with the state".into(),
                ));
            }
            let ns = norm_inf(&st.s);
            let sdev = norm_inf(&(&st.s - st.s.transpose()));
            if sdev > 1e-10 * ns {
                return Err(Error::NotSymmetric(sdev));
            }
            let dmax = (0..n).map(|i| st.s[(i, i)].abs()).fold(0.0, f64::max);
            if dmax > 1e-12 * ns {
                return Err(Error::PreconditionViolated(format!(
                    "structure matrix must have a zero diagonal, found {dmax}"
                )));
            }
            let rebuilt = reconstruct_onsager(state, st);
            if norm_inf(&(&rebuilt - &l)) > 1e-10 * nl.max(norm_inf(&rebuilt)) {
                return Err(Error::PreconditionViolated(
                    "structure does not reconstruct the Onsager matrix".into(),
                ));
            }
        }
        Ok(Self { l, structure })
    }

    /// Skips validation. For outputs of exact transforms and for diagnostic
    /// pipelines that intentionally carry inadmissible matrices.
    pub fn new_unchecked(l: DMatrix<f64>, structure: Option<OnsagerStructure>) -> Self {
        Self { l, structure }
    }

    /// Builds the closure from a bare matrix, deriving the canonical
    /// structure (strict state required).
    pub fn with_derived_structure(state: &MixtureState, l: DMatrix<f64>) -> Result<Self> {
        let structure = OnsagerStructure::canonical(state, &l)?;
        Self::validated(state, l, Some(structure))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn structure(&self) -> Option<&OnsagerStructure> {
        self.structure.as_ref()
    }
}

/// Rebuilds `L = R (diag(a) + S Y)` from a structural decomposition.
pub fn reconstruct_onsager(state: &MixtureState, st: &OnsagerStructure) -> DMatrix<f64> {
    let n = state.n_species();
    let y = state.fractions();
    let rho = state.density();
    DMatrix::from_fn(n, n, |i, k| {
        let diag = if i == k { st.a[i] } else { 0.0 };
        rho * y[i] * (diag + st.s[(i, k)] * y[k])
    })
}

/// Maxwell-Stefan closure: the symmetric table of binary friction
/// coefficients `f_ik`, diagonal stored as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellStefanClosure {
    f: DMatrix<f64>,
}

impl MaxwellStefanClosure {
    /// Validates squareness, finiteness, and symmetry of the off-diagonal
    /// entries within `1e-12` of the table scale; stores the symmetrized
    /// table with an exactly zero diagonal.
    pub fn validated(f: DMatrix<f64>) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "friction table must be square, got {}x{}",
                n,
                f.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::TooFewSpecies(n));
        }
        if let Some(&v) = f.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "friction entries must be finite, got {v}"
            )));
        }
        let mut scale = 0.0f64;
        let mut dev = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    scale = scale.max(f[(i, k)].abs());
                    dev = dev.max((f[(i, k)] - f[(k, i)]).abs());
                }
            }
        }
        if dev > 1e-12 * scale {
            return Err(Error::AsymmetricFriction(dev));
        }
        Ok(Self::new_unchecked(f))
    }

    /// Symmetrizes and zeroes the diagonal without further checks.
    pub fn new_unchecked(f: DMatrix<f64>) -> Self {
        let n = f.nrows();
        let f = DMatrix::from_fn(n, n, |i, k| {
            if i == k {
                0.0
            } else {
                0.5 * (f[(i, k)] + f[(k, i)])
            }
        });
        Self { f }
    }

    pub fn friction(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn n_species(&self) -> usize {
        self.f.nrows()
    }
}

/// Friction matrix `B(y)`: `B_ik = -y_i f_ik` for `i != k`,
/// `B_ii = sum_{k != i} y_k f_ik`. Kills `y` on the right and `e` on the
/// left.
pub fn assemble_b(state: &MixtureState, msc: &MaxwellStefanClosure) -> DMatrix<f64> {
    let n = state.n_species();
    let y = state.fractions();
    let f = msc.friction();
    DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            (0..n).filter(|&j| j != i).map(|j| y[j] * f[(i, j)]).sum()
        } else {
            -y[i] * f[(i, k)]
        }
    })
}

/// Friction matrix in mass-density form: `tau_ik = -rho f_ik y_i y_k` off
/// the diagonal, diagonal filled so every row sums to zero. Coincides with
/// `B R` and drives the entropy production
/// `<tau z, z> = sum_{i<k} rho f_ik y_i y_k (z_i - z_k)^2`.
pub fn assemble_tau(state: &MixtureState, msc: &MaxwellStefanClosure) -> DMatrix<f64> {
    let n = state.n_species();
    let y = state.fractions();
    let rho = state.density();
    let f = msc.friction();
    DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| rho * f[(i, j)] * y[i] * y[j])
                .sum()
        } else {
            -rho * f[(i, k)] * y[i] * y[k]
        }
    })
}

/// Projected closure: per-species diffusivities `d` plus the interaction
/// matrix `K` (symmetric, zero diagonal, `K e = 0`). Admissible when
/// `diag(d) + X^{1/2} K X^{1/2}` is PSD on `{sqrt(x)}^perp`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedClosure {
    d: DVector<f64>,
    k: DMatrix<f64>,
}

impl ProjectedClosure {
    pub fn validated(state: &MixtureState, d: DVector<f64>, k: DMatrix<f64>) -> Result<Self> {
        let n = state.n_species();
        if d.len() != n || k.nrows() != n || k.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "d of length {} and K {}x{} against {} species",
                d.len(),
                k.nrows(),
                k.ncols(),
                n
            )));
        }
        let nk = norm_inf(&k);
        let dev = norm_inf(&(&k - k.transpose()));
        if dev > 1e-10 * nk {
            return Err(Error::NotSymmetric(dev));
        }
        let dmax = (0..n).map(|i| k[(i, i)].abs()).fold(0.0, f64::max);
        if dmax > 1e-12 * nk {
            return Err(Error::InvalidParameter(format!(
                "interaction matrix must have a zero diagonal, found {dmax}"
            )));
        }
        let e = DVector::from_element(n, 1.0);
        if (&k * &e).amax() > 1e-12 * nk {
            return Err(Error::InvalidParameter("K e does not vanish".into()));
        }
        let closure = Self { d, k };
        let dmat = closure.sym_d_matrix(state)?;
        let der = state.derived();
        let sqrt_x = der.x.map(f64::sqrt);
        let cert = psd_on_subspace(&dmat, &sqrt_x)?;
        if !cert.ok {
            return Err(Error::PreconditionViolated(format!(
                "diag(d) + X^1/2 K X^1/2 not positive semidefinite on {{sqrt x}}^perp \
                 (min eigenvalue {})",
                cert.min_eig
            )));
        }
        Ok(closure)
    }

    pub fn new_unchecked(d: DVector<f64>, k: DMatrix<f64>) -> Self {
        Self { d, k }
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// `diag(d) + X^{1/2} K X^{1/2}`, the symmetric matrix whose restricted
    /// positivity makes the closure admissible. Strict state required.
    pub fn sym_d_matrix(&self, state: &MixtureState) -> Result<DMatrix<f64>> {
        state.require_strict()?;
        let x = state.mole_fractions();
        let n = x.len();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { self.d[i] } else { 0.0 };
            diag + x[i].sqrt() * self.k[(i, j)] * x[j].sqrt()
        }))
    }
}

fn check_grad_dims(n: usize, grad: &GradientField) -> Result<()> {
    if grad.n_species() != n {
        return Err(Error::DimensionMismatch(format!(
            "closure for {} species against gradient with {} rows",
            n,
            grad.n_species()
        )));
    }
    Ok(())
}

/// Fick-Onsager flux `J = -L G`.
pub fn flux_fo(oc: &OnsagerClosure, grad: &GradientField) -> Result<DMatrix<f64>> {
    check_grad_dims(oc.matrix().nrows(), grad)?;
    Ok(-(oc.matrix() * grad.matrix()))
}

/// Maxwell-Stefan flux: solves `B(y) J = -R P G` through the group inverse,
/// `J = -B# R P G`. Requires strictly positive fractions.
pub fn flux_ms(
    state: &MixtureState,
    msc: &MaxwellStefanClosure,
    grad: &GradientField,
) -> Result<DMatrix<f64>> {
    check_grad_dims(state.n_species(), grad)?;
    state.require_strict()?;
    let n = state.n_species();
    let b = assemble_b(state, msc);
    let rdm = RankDeficientMatrix::new_unchecked(
        b,
        state.fractions().clone(),
        DVector::from_element(n, 1.0),
    );
    let gi = group_inverse(&rdm, None)?;
    let der = state.derived();
    Ok(-(&gi.asharp * (&der.r * (&der.p * grad.matrix()))))
}

/// Projected flux `J = -P^T R [diag(d) + K X] M P G`. Zero fractions are
/// allowed; only the admissibility test needs strict positivity.
pub fn flux_projected(
    state: &MixtureState,
    pc: &ProjectedClosure,
    grad: &GradientField,
) -> Result<DMatrix<f64>> {
    check_grad_dims(state.n_species(), grad)?;
    let der = state.derived();
    let core = DMatrix::from_diagonal(pc.d()) + pc.k() * &der.xdiag;
    let mdiag = DMatrix::from_diagonal(state.molar_mass());
    let eff = &der.pt * &der.r * core * mdiag * &der.p;
    Ok(-(eff * grad.matrix()))
}

/// Entropy production of diffusion divided by R:
/// `zeta/R = -sum_i <J_i, grad(mu_i/RT)>`. Nonnegative for admissible
/// closures.
pub fn entropy_production_diff(j: &DMatrix<f64>, grad: &GradientField) -> f64 {
    -j.dot(grad.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    fn uniform_friction(n: usize, value: f64) -> MaxwellStefanClosure {
        MaxwellStefanClosure::validated(DMatrix::from_fn(n, n, |i, k| {
            if i == k {
                0.0
            } else {
                value
            }
        }))
        .unwrap()
    }

    fn state3() -> MixtureState {
        MixtureState::new(
            300.0,
            1.2,
            vec(&[0.028, 0.032, 0.044]),
            vec(&[0.3, 0.45, 0.25]),
        )
        .unwrap()
    }

    /// L = dbar R P, the Onsager matrix of uniform friction 1/dbar.
    fn identical_coefficient_l(state: &MixtureState, dbar: f64) -> DMatrix<f64> {
        let der = state.derived();
        &der.r * &der.p * dbar
    }

    #[test]
    fn friction_matrix_uniform_and_binary() {
        let y = vec(&[1.0, 1.0, 1.0]) / 3.0;
        let s = MixtureState::new(300.0, 1.0, vec(&[1.0, 1.0, 1.0]), y).unwrap();
        let b = assemble_b(&s, &uniform_friction(3, 1.0));
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k { 2.0 / 3.0 } else { -1.0 / 3.0 };
                assert!((b[(i, k)] - expect).abs() < 1e-15);
            }
        }

        let s2 = MixtureState::new(300.0, 1.0, vec(&[2.0, 3.0]), vec(&[0.3, 0.7])).unwrap();
        let phi = 1.7;
        let b2 = assemble_b(&s2, &uniform_friction(2, phi));
        let expect = DMatrix::from_row_slice(2, 2, &[0.7 * phi, -0.3 * phi, -0.7 * phi, 0.3 * phi]);
        assert!((&b2 - &expect).abs().max() < 1e-15);
    }

    #[test]
    fn tau_matches_mass_weighted_friction() {
        let s = MixtureState::new(300.0, 1.0, vec(&[1.0, 1.0, 1.0]), vec(&[0.5, 0.3, 0.2]))
            .unwrap();
        let msc = uniform_friction(3, 1.0);
        let tau = assemble_tau(&s, &msc);
        let y = s.fractions();
        let expect = DMatrix::from_diagonal(y) - y * y.transpose();
        assert!((&tau - &expect).abs().max() < 1e-15);

        // tau = B R for a non-uniform table on a heavier mixture.
        let s2 = state3();
        let f = MaxwellStefanClosure::validated(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.3, 0.7, 1.3, 0.0, 1.9, 0.7, 1.9, 0.0],
        ))
        .unwrap();
        let tau2 = assemble_tau(&s2, &f);
        let br = assemble_b(&s2, &f) * s2.derived().r;
        assert!((&tau2 - &br).abs().max() < 1e-12 * norm_inf(&tau2));
    }

    #[test]
    fn tau_quadratic_form_is_pairwise_sum() {
        let s = state3();
        let f = MaxwellStefanClosure::validated(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.8, 2.1, 0.8, 0.0, 1.4, 2.1, 1.4, 0.0],
        ))
        .unwrap();
        let tau = assemble_tau(&s, &f);
        let y = s.fractions();
        let rho = s.density();
        let zs = [
            vec(&[1.0, -0.4, 0.9]),
            vec(&[0.0, 2.0, -1.0]),
            vec(&[-1.2, 0.3, 0.3]),
        ];
        for z in zs {
            let lhs = (&tau * &z).dot(&z);
            let mut rhs = 0.0;
            for i in 0..3 {
                for k in (i + 1)..3 {
                    rhs += rho * f.friction()[(i, k)] * y[i] * y[k] * (z[i] - z[k]).powi(2);
                }
            }
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn uniform_friction_flux_is_projected_gradient() {
        // f = 1/dbar makes the Maxwell-Stefan flux -dbar R P G, which is
        // also the Fick-Onsager flux of L = dbar R P.
        let s = state3();
        let dbar = 2.5e-5;
        let msc = uniform_friction(3, 1.0 / dbar);
        let grad = GradientField::new(DMatrix::from_row_slice(
            3,
            1,
            &[40.0, -10.0, -25.0],
        ))
        .unwrap();
        let j_ms = flux_ms(&s, &msc, &grad).unwrap();
        let l = identical_coefficient_l(&s, dbar);
        let oc = OnsagerClosure::new_unchecked(l, None);
        let j_fo = flux_fo(&oc, &grad).unwrap();
        assert!((&j_ms - &j_fo).abs().max() < 1e-12 * j_fo.abs().max());
        // Total mass flux vanishes.
        assert!(j_ms.column(0).sum().abs() < 1e-12 * j_ms.abs().max());
    }

    #[test]
    fn ms_flux_solves_the_friction_system() {
        let s = state3();
        let f = MaxwellStefanClosure::validated(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.1, 0.4, 1.1, 0.0, 2.3, 0.4, 2.3, 0.0],
        ))
        .unwrap();
        let grad = GradientField::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.2, -0.7, 0.5, 0.1, -1.1],
        ))
        .unwrap();
        let j = flux_ms(&s, &f, &grad).unwrap();
        let der = s.derived();
        let b = assemble_b(&s, &f);
        let residual = &b * &j + &der.r * &der.p * grad.matrix();
        assert!(residual.abs().max() < 1e-9 * j.abs().max());
    }

    #[test]
    fn validated_onsager_accepts_uniform_case_and_rejects_junk() {
        let s = state3();
        let l = identical_coefficient_l(&s, 1.0);
        let lsym = (&l + l.transpose()) * 0.5;
        assert!(OnsagerClosure::with_derived_structure(&s, lsym).is_ok());

        let asym = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            OnsagerClosure::validated(&s, asym, None),
            Err(Error::NotSymmetric(_))
        ));

        let bad_kernel = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(
            OnsagerClosure::validated(&s, bad_kernel, None),
            Err(Error::KernelMismatch(_))
        ));

        // Symmetric, L e = 0, but indefinite on {e}^perp.
        let indef = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 1.0, 1.0, -2.0, 1.0, 1.0, 1.0, -2.0]);
        assert!(matches!(
            OnsagerClosure::validated(&s, indef, None),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn canonical_structure_round_trips() {
        let s = state3();
        let l = identical_coefficient_l(&s, 3.0e-5);
        let lsym = (&l + l.transpose()) * 0.5;
        let st = OnsagerStructure::canonical(&s, &lsym).unwrap();
        let rebuilt = reconstruct_onsager(&s, &st);
        assert!((&rebuilt - &lsym).abs().max() < 1e-14 * norm_inf(&lsym));
        // Uniform case: a_i = dbar (1 - y_i), S_ik = -dbar.
        let y = s.fractions();
        for i in 0..3 {
            assert!((st.a[i] - 3.0e-5 * (1.0 - y[i])).abs() < 1e-18);
            for k in 0..3 {
                if i != k {
                    assert!((st.s[(i, k)] + 3.0e-5).abs() < 1e-18);
                }
            }
        }
    }

    #[test]
    fn asymmetric_friction_rejected() {
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(
            MaxwellStefanClosure::validated(f),
            Err(Error::AsymmetricFriction(_))
        ));
    }

    #[test]
    fn projected_closure_validation_and_flux() {
        // N = 4: the K e = 0 family is two-dimensional; pick a member and a
        // dominant diagonal so the admissibility certificate holds.
        let s = MixtureState::new(
            300.0,
            1.0,
            vec(&[0.02, 0.03, 0.04, 0.05]),
            vec(&[0.3, 0.3, 0.2, 0.2]),
        )
        .unwrap();
        let k1 = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, -1.0, 0.0, //
                1.0, 0.0, 0.0, -1.0, //
                -1.0, 0.0, 0.0, 1.0, //
                0.0, -1.0, 1.0, 0.0,
            ],
        );
        let k = k1 * 0.05;
        let d = vec(&[1.0, 1.2, 0.8, 1.1]);
        let pc = ProjectedClosure::validated(&s, d.clone(), k.clone()).unwrap();

        // K = 0 reduces to the Onsager closure L = P^T R diag(d) M P.
        let pc0 = ProjectedClosure::validated(&s, d.clone(), DMatrix::zeros(4, 4)).unwrap();
        let der = s.derived();
        let mdiag = DMatrix::from_diagonal(s.molar_mass());
        let l = &der.pt * &der.r * DMatrix::from_diagonal(&d) * &mdiag * &der.p;
        let grad = GradientField::new(DMatrix::from_row_slice(
            4,
            1,
            &[3.0, -1.0, 0.5, -2.0],
        ))
        .unwrap();
        let j_c = flux_projected(&s, &pc0, &grad).unwrap();
        let j_l = -(&l * grad.matrix());
        assert!((&j_c - &j_l).abs().max() < 1e-12 * j_l.abs().max());

        // Total flux vanishes and entropy production is nonnegative also
        // with interaction terms.
        let j = flux_projected(&s, &pc, &grad).unwrap();
        assert!(j.column(0).sum().abs() < 1e-12 * j.abs().max());
        assert!(entropy_production_diff(&j, &grad) >= 0.0);

        // Violations are caught.
        let mut k_bad = k.clone();
        k_bad[(0, 1)] += 1.0;
        assert!(matches!(
            ProjectedClosure::validated(&s, d.clone(), k_bad),
            Err(Error::NotSymmetric(_))
        ));
        let mut k_diag = k.clone();
        k_diag[(0, 0)] = 0.3;
        assert!(ProjectedClosure::validated(&s, d.clone(), k_diag).is_err());
        let k_rowsum = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 0.1 });
        assert!(matches!(
            ProjectedClosure::validated(&s, d.clone(), k_rowsum),
            Err(Error::InvalidParameter(_))
        ));
        let d_neg = vec(&[-5.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            ProjectedClosure::validated(&s, d_neg, DMatrix::zeros(4, 4)),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn entropy_production_positive_for_ms_closure() {
        let s = state3();
        let f = MaxwellStefanClosure::validated(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.6, 1.8, 0.6, 0.0, 0.9, 1.8, 0.9, 0.0],
        ))
        .unwrap();
        for trial in 0..20 {
            let t = trial as f64;
            let grad = GradientField::new(DMatrix::from_row_slice(
                3,
                1,
                &[(t * 0.7).sin(), (t * 1.3).cos() - 0.2, (t * 0.4).sin() * 2.0],
            ))
            .unwrap();
            let j = flux_ms(&s, &f, &grad).unwrap();
            let zeta = entropy_production_diff(&j, &grad);
            let scale = j.abs().max() * grad.matrix().abs().max();
            assert!(zeta >= -1e-12 * scale.max(1.0), "zeta = {zeta}");
        }
    }
}
