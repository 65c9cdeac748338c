//! Exact transforms between the three closure forms, flux-equivalence
//! residuals on probe gradients, and quantified ellipticity certificates.
//!
//! The cycle runs Fick-Onsager -> projected -> Maxwell-Stefan ->
//! Fick-Onsager. Each transform is algebraically exact; the returned
//! residual measures the floating-point defect of the conversion on a
//! deterministic set of random gradients.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::closures::{
    assemble_b, MaxwellStefanClosure, OnsagerClosure, OnsagerStructure, ProjectedClosure,
};
use crate::error::{Error, Result};
use crate::groupinv::{
    group_inverse, householder_complement, norm_inf, psd_on_subspace, RankDeficientMatrix,
};
use crate::mixture::{GradientField, MixtureState};

/// Probe gradients drawn per conversion when no explicit set is supplied.
pub const DEFAULT_PROBE_COUNT: usize = 8;
/// Seed of the default probe set.
pub const DEFAULT_PROBE_SEED: u64 = 0x6d63_6466;

/// A converted closure together with the measured flux-equivalence residual
/// against the conversion input.
#[derive(Debug, Clone)]
pub struct Transformed<C> {
    pub closure: C,
    /// Max over probe gradients of `|J_out - J_in|_max` relative to the
    /// larger flux magnitude.
    pub flux_residual: f64,
}

/// Borrowed view of any closure form.
#[derive(Debug, Clone, Copy)]
pub enum ClosureRef<'a> {
    Onsager(&'a OnsagerClosure),
    MaxwellStefan(&'a MaxwellStefanClosure),
    Projected(&'a ProjectedClosure),
}

impl ClosureRef<'_> {
    pub fn n_species(&self) -> usize {
        match self {
            ClosureRef::Onsager(oc) => oc.matrix().nrows(),
            ClosureRef::MaxwellStefan(msc) => msc.n_species(),
            ClosureRef::Projected(pc) => pc.d().len(),
        }
    }
}

/// Effective flux matrix `E` with `J = -E G`, identical for every gradient.
/// For the Maxwell-Stefan form this is `B# R P`, which agrees with the
/// Onsager matrix `B# R` on all gradients because `B# y = 0`.
pub fn closure_effective_matrix(state: &MixtureState, cref: ClosureRef) -> Result<DMatrix<f64>> {
    let n = state.n_species();
    if cref.n_species() != n {
        return Err(Error::DimensionMismatch(format!(
            "closure for {} species against a state with {}",
            cref.n_species(),
            n
        )));
    }
    match cref {
        ClosureRef::Onsager(oc) => Ok(oc.matrix().clone()),
        ClosureRef::MaxwellStefan(msc) => {
            state.require_strict()?;
            let b = assemble_b(state, msc);
            let rdm = RankDeficientMatrix::new_unchecked(
                b,
                state.fractions().clone(),
                DVector::from_element(n, 1.0),
            );
            let gi = group_inverse(&rdm, None)?;
            let der = state.derived();
            Ok(&gi.asharp * &der.r * &der.p)
        }
        ClosureRef::Projected(pc) => {
            let der = state.derived();
            let core = DMatrix::from_diagonal(pc.d()) + pc.k() * &der.xdiag;
            let mdiag = DMatrix::from_diagonal(state.molar_mass());
            Ok(&der.pt * &der.r * core * mdiag * &der.p)
        }
    }
}

/// Deterministic probe gradients with entries uniform in [-1, 1].
pub fn probe_gradients(n: usize, dim: usize, count: usize, seed: u64) -> Result<Vec<GradientField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            GradientField::new(DMatrix::from_fn(n, dim, |_, _| rng.gen_range(-1.0..=1.0)))
        })
        .collect()
}

/// Max over the probe set of the relative flux difference between two
/// closures on the same state.
pub fn flux_equivalence_residual(
    state: &MixtureState,
    a: ClosureRef,
    b: ClosureRef,
    probes: &[GradientField],
) -> Result<f64> {
    let ea = closure_effective_matrix(state, a)?;
    let eb = closure_effective_matrix(state, b)?;
    let mut worst = 0.0f64;
    for g in probes {
        let ja = -(&ea * g.matrix());
        let jb = -(&eb * g.matrix());
        let scale = ja.abs().max().max(jb.abs().max());
        if scale > 0.0 {
            worst = worst.max((ja - jb).abs().max() / scale);
        }
    }
    Ok(worst)
}

fn default_probes(n: usize) -> Vec<GradientField> {
    probe_gradients(n, 1, DEFAULT_PROBE_COUNT, DEFAULT_PROBE_SEED)
        .expect("default probe parameters are valid")
}

/// Fick-Onsager to projected form for three or more species. Needs the
/// structural decomposition `L = R (diag(a) + S Y)`:
///
/// * `b = -(1/(N-2)) (S e - (e^T S e)/(2(N-1)) e)`
/// * `d_i = a_i / M_i + 2 (c/rho) b_i x_i`
/// * `K = (c/rho) (S + b (x) e + e (x) b - 2 diag(b))`
pub fn fo_to_projected(
    state: &MixtureState,
    oc: &OnsagerClosure,
) -> Result<Transformed<ProjectedClosure>> {
    let closure = fo_to_projected_core(state, oc)?;
    let flux_residual = flux_equivalence_residual(
        state,
        ClosureRef::Onsager(oc),
        ClosureRef::Projected(&closure),
        &default_probes(state.n_species()),
    )?;
    Ok(Transformed {
        closure,
        flux_residual,
    })
}

/// Same conversion without the probe-based residual measurement; used where
/// the caller converts in bulk (per simulation face) and verifies elsewhere.
pub fn fo_to_projected_core(state: &MixtureState, oc: &OnsagerClosure) -> Result<ProjectedClosure> {
    let n = state.n_species();
    if n == 2 {
        return Err(Error::BinaryMixture);
    }
    let st = oc.structure().ok_or(Error::MissingStructure)?;
    let der = state.derived();
    let e = DVector::from_element(n, 1.0);
    let se = &st.s * &e;
    let sigma = e.dot(&se);
    let nf = n as f64;
    let b = (&se - &e * (sigma / (2.0 * (nf - 1.0)))) * (-1.0 / (nf - 2.0));
    let crho = der.c / state.density();
    let m = state.molar_mass();
    let d = DVector::from_fn(n, |i, _| st.a[i] / m[i] + 2.0 * crho * b[i] * der.x[i]);
    let k = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            crho * (st.s[(i, j)] + b[i] + b[j])
        }
    });
    Ok(ProjectedClosure::new_unchecked(d, k))
}

/// Binary specialization: the projected representation of a 2x2 Onsager
/// matrix is underdetermined, so both diffusivities are set equal,
/// `d = L11 / (rho_1 M_1 y_2^2 + rho_2 M_2 y_1^2)`, and `K = 0`. The
/// reconstruction is exact; admissibility reduces to `L11 >= 0`.
pub fn fo_to_projected_binary(
    state: &MixtureState,
    oc: &OnsagerClosure,
) -> Result<Transformed<ProjectedClosure>> {
    let n = state.n_species();
    if n != 2 {
        return Err(Error::DimensionMismatch(format!(
            "binary conversion on a {n}-species state"
        )));
    }
    state.require_strict()?;
    let y = state.fractions();
    let m = state.molar_mass();
    let rho = state.density();
    let denom = rho * y[0] * m[0] * y[1] * y[1] + rho * y[1] * m[1] * y[0] * y[0];
    let dbar = oc.matrix()[(0, 0)] / denom;
    let closure = ProjectedClosure::new_unchecked(
        DVector::from_element(2, dbar),
        DMatrix::zeros(2, 2),
    );
    let flux_residual = flux_equivalence_residual(
        state,
        ClosureRef::Onsager(oc),
        ClosureRef::Projected(&closure),
        &default_probes(2),
    )?;
    Ok(Transformed {
        closure,
        flux_residual,
    })
}

/// Dispatches on the species count.
pub fn fo_to_projected_any(
    state: &MixtureState,
    oc: &OnsagerClosure,
) -> Result<Transformed<ProjectedClosure>> {
    if state.n_species() == 2 {
        fo_to_projected_binary(state, oc)
    } else {
        fo_to_projected(state, oc)
    }
}

/// Projected form to Maxwell-Stefan. With `D = diag(d) + X^{1/2} K X^{1/2}`
/// and `s = sqrt(x)`:
///
/// * `b = -D s + (<D s, s>/2) s` makes `D0 = D + b (x) s + s (x) b`
///   symmetric with kernel `s` on both sides,
/// * `B = X^{1/2} D0# X^{-1/2} M^{-1}` and `f_ik = -B_ik / y_i`.
pub fn projected_to_ms(
    state: &MixtureState,
    pc: &ProjectedClosure,
) -> Result<Transformed<MaxwellStefanClosure>> {
    state.require_strict()?;
    let n = state.n_species();
    let dmat = pc.sym_d_matrix(state)?;
    let x = state.mole_fractions();
    let s = x.map(f64::sqrt);
    let w = &dmat * &s;
    let b = -&w + &s * (w.dot(&s) / 2.0);
    let d0mat = &dmat + &b * s.transpose() + &s * b.transpose();
    let kernel_residual = (&d0mat * &s).amax();
    if kernel_residual > 1e-12 * norm_inf(&d0mat).max(f64::MIN_POSITIVE) {
        return Err(Error::KernelMismatch(format!(
            "bordered matrix does not annihilate sqrt(x): residual {kernel_residual}"
        )));
    }
    let rdm = RankDeficientMatrix::new_unchecked(d0mat, s.clone(), s.clone());
    let gi = group_inverse(&rdm, None)?;
    let m = state.molar_mass();
    let y = state.fractions();
    let bmat = DMatrix::from_fn(n, n, |i, j| {
        s[i] * gi.asharp[(i, j)] / (s[j] * m[j])
    });
    let mut f = DMatrix::zeros(n, n);
    let mut fscale = 0.0f64;
    let mut dev = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            if i != k {
                f[(i, k)] = -bmat[(i, k)] / y[i];
                fscale = fscale.max(f[(i, k)].abs());
            }
        }
    }
    for i in 0..n {
        for k in (i + 1)..n {
            dev = dev.max((f[(i, k)] - f[(k, i)]).abs());
        }
    }
    if dev > 1e-9 * fscale.max(f64::MIN_POSITIVE) {
        return Err(Error::AsymmetricFriction(dev));
    }
    let closure = MaxwellStefanClosure::new_unchecked(f);
    // The extracted table must reproduce the friction operator in its
    // mass-density form.
    let tau = crate::closures::assemble_tau(state, &closure);
    let der = state.derived();
    let tau_from_b = &bmat * &der.r;
    if norm_inf(&(&tau - &tau_from_b)) > 1e-9 * norm_inf(&tau).max(f64::MIN_POSITIVE) {
        return Err(Error::PreconditionViolated(
            "friction table does not reproduce its mass-density form".into(),
        ));
    }
    let flux_residual = flux_equivalence_residual(
        state,
        ClosureRef::Projected(pc),
        ClosureRef::MaxwellStefan(&closure),
        &default_probes(n),
    )?;
    Ok(Transformed {
        closure,
        flux_residual,
    })
}

/// Maxwell-Stefan to Fick-Onsager: `L = B# R`, symmetric with `L e = 0`.
///
/// The structural decomposition comes from extending the friction table by a
/// uniform diagonal `f_ii`: with an ellipticity constant `d0` given, the
/// certified choice is `f_ii = d0 / max_i M_i`; otherwise the fill falls
/// back to `max(1e-6, smallest positive B_ii)`. The decomposition is the
/// same for every admissible fill once the diagonal of the intermediate
/// matrix is shuffled into `a`.
pub fn ms_to_onsager(
    state: &MixtureState,
    msc: &MaxwellStefanClosure,
    d0: Option<f64>,
) -> Result<Transformed<OnsagerClosure>> {
    let closure = ms_to_onsager_core(state, msc, d0)?;
    let flux_residual = flux_equivalence_residual(
        state,
        ClosureRef::MaxwellStefan(msc),
        ClosureRef::Onsager(&closure),
        &default_probes(state.n_species()),
    )?;
    Ok(Transformed {
        closure,
        flux_residual,
    })
}

/// Same conversion without the probe-based residual measurement; used where
/// the caller converts in bulk (per simulation face) and verifies elsewhere.
pub fn ms_to_onsager_core(
    state: &MixtureState,
    msc: &MaxwellStefanClosure,
    d0: Option<f64>,
) -> Result<OnsagerClosure> {
    state.require_strict()?;
    let n = state.n_species();
    if msc.n_species() != n {
        return Err(Error::DimensionMismatch(format!(
            "friction table for {} species against a state with {}",
            msc.n_species(),
            n
        )));
    }
    let y = state.fractions();
    let e = DVector::from_element(n, 1.0);
    let b = assemble_b(state, msc);
    let b_diag: Vec<f64> = (0..n).map(|i| b[(i, i)]).collect();
    let rdm = RankDeficientMatrix::new_unchecked(b, y.clone(), e);
    let gi = group_inverse(&rdm, None)?;
    let der = state.derived();
    let l = &gi.asharp * &der.r;

    let m = state.molar_mass();
    let m_max = m.amax();
    let mut fii = match d0 {
        Some(v) => {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "ellipticity constant must be positive, got {v}"
                )));
            }
            v / m_max
        }
        None => b_diag
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
            .min(f64::INFINITY)
            .max(1e-6)
            .min(if b_diag.iter().any(|&v| v > 0.0) {
                f64::INFINITY
            } else {
                1e-6
            }),
    };
    if !fii.is_finite() {
        fii = 1e-6;
    }

    let base_f = msc.friction();
    let mut attempts = 0;
    let (atilde_inv, stilde) = loop {
        let fmat = DMatrix::from_fn(n, n, |i, k| if i == k { fii } else { base_f[(i, k)] });
        let fy = &fmat * y;
        let fscale = norm_inf(&fmat).max(f64::MIN_POSITIVE);
        if fy.iter().all(|v| v.abs() > 1e-14 * fscale) {
            let fb = &fmat * &gi.asharp;
            let stilde = DMatrix::from_fn(n, n, |i, j| (fb[(i, j)] - 1.0) / fy[i]);
            break (fy, stilde);
        }
        fii *= 3.0;
        attempts += 1;
        if attempts > 200 {
            return Err(Error::PreconditionViolated(
                "no admissible diagonal fill for the friction table".into(),
            ));
        }
    };

    let a = DVector::from_fn(n, |i, _| 1.0 / atilde_inv[i] + stilde[(i, i)] * y[i]);
    let s = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (stilde[(i, j)] + stilde[(j, i)])
        }
    });
    let structure = OnsagerStructure { a, s };
    let rebuilt = crate::closures::reconstruct_onsager(state, &structure);
    if norm_inf(&(&rebuilt - &l)) > 1e-10 * norm_inf(&l).max(f64::MIN_POSITIVE) {
        return Err(Error::PreconditionViolated(
            "structural decomposition does not reconstruct B# R".into(),
        ));
    }
    Ok(OnsagerClosure::new_unchecked(l, Some(structure)))
}

/// Result of moving the diagonal of an interaction-matrix candidate into the
/// per-species diffusivities: `diag(d) + Ktilde X` generates the same fluxes
/// as `diag(d') + K X` with `d'_i = d_i + diag_increment_i * x_i`.
#[derive(Debug, Clone)]
pub struct ZeroRowsumShift {
    /// Symmetric, zero diagonal, `K e = 0`.
    pub k: DMatrix<f64>,
    /// Additive diagonal correction per unit mole fraction.
    pub diag_increment: DVector<f64>,
}

/// Normalizes a symmetric interaction candidate `Ktilde` (arbitrary diagonal
/// and row sums) into the canonical zero-diagonal, zero-rowsum form. The
/// shift vector `a = -(1/(N-2)) (I - e (x) e / (2(N-1))) Ktilde_off e` is
/// absorbed by the projectors, so fluxes are unchanged.
pub fn offdiag_zero_rowsum_shift(ktilde: &DMatrix<f64>) -> Result<ZeroRowsumShift> {
    let n = ktilde.nrows();
    if ktilde.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "interaction candidate must be square, got {}x{}",
            n,
            ktilde.ncols()
        )));
    }
    if n < 3 {
        return Err(Error::BinaryMixture);
    }
    let dev = norm_inf(&(ktilde - ktilde.transpose()));
    if dev > 1e-10 * norm_inf(ktilde) {
        return Err(Error::NotSymmetric(dev));
    }
    let kd = DVector::from_fn(n, |i, _| ktilde[(i, i)]);
    let koff = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { ktilde[(i, j)] });
    let e = DVector::from_element(n, 1.0);
    let ke = &koff * &e;
    let sigma = e.dot(&ke);
    let nf = n as f64;
    let a = (&ke - &e * (sigma / (2.0 * (nf - 1.0)))) * (-1.0 / (nf - 2.0));
    let k = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            koff[(i, j)] + a[i] + a[j]
        }
    });
    let diag_increment = kd + &a * 2.0;
    Ok(ZeroRowsumShift { k, diag_increment })
}

/// Which inequality a certificate refers to, named by the closure form whose
/// matrix it bounds from below.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateForm {
    /// `L >= d0 P^T M R P` on `{e}^perp`.
    Onsager,
    /// `B Y >= d0 P^T M^{-1} Y P` on `{e}^perp`.
    MaxwellStefan,
    /// `diag(d) + X^{1/2} K X^{1/2} >= d0` on `{sqrt x}^perp`.
    Projected,
}

/// Quantified ellipticity certificate: the smallest eigenvalue of
/// `lhs - d0 rhs` on the relevant subspace, and whether it clears the
/// rounding floor `-1e-9 |lhs|`.
#[derive(Debug, Clone, Copy)]
pub struct EllipticityCertificate {
    pub d0: f64,
    pub form: CertificateForm,
    pub min_excess_eig: f64,
    pub ok: bool,
}

fn certificate_components(
    state: &MixtureState,
    cref: ClosureRef,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>, CertificateForm)> {
    let n = state.n_species();
    let der = state.derived();
    let m = state.molar_mass();
    let e = DVector::from_element(n, 1.0);
    match cref {
        ClosureRef::Onsager(oc) => {
            let mdiag = DMatrix::from_diagonal(m);
            let rhs = &der.pt * mdiag * &der.r * &der.p;
            Ok((oc.matrix().clone(), rhs, e, CertificateForm::Onsager))
        }
        ClosureRef::MaxwellStefan(msc) => {
            let by = assemble_b(state, msc) * &der.ydiag;
            let minv = DMatrix::from_diagonal(&m.map(|v| 1.0 / v));
            let rhs = &der.pt * minv * &der.ydiag * &der.p;
            Ok((by, rhs, e, CertificateForm::MaxwellStefan))
        }
        ClosureRef::Projected(pc) => {
            let dmat = pc.sym_d_matrix(state)?;
            let sqrt_x = state.mole_fractions().map(f64::sqrt);
            Ok((
                dmat,
                DMatrix::identity(n, n),
                sqrt_x,
                CertificateForm::Projected,
            ))
        }
    }
}

/// Checks `lhs - d0 rhs >= 0` on the form's subspace.
pub fn ellipticity_certificate(
    state: &MixtureState,
    cref: ClosureRef,
    d0: f64,
) -> Result<EllipticityCertificate> {
    let (lhs, rhs, kernel, form) = certificate_components(state, cref)?;
    let excess = &lhs - rhs * d0;
    let excess_sym = (&excess + excess.transpose()) * 0.5;
    let cert = psd_on_subspace(&excess_sym, &kernel)?;
    let scale = norm_inf(&lhs);
    Ok(EllipticityCertificate {
        d0,
        form,
        min_excess_eig: cert.min_eig,
        ok: cert.min_eig >= -1e-9 * scale,
    })
}

/// Largest `d0` for which [`ellipticity_certificate`] holds with zero slack:
/// the smallest generalized eigenvalue of `(lhs, rhs)` restricted to the
/// form's subspace.
pub fn ellipticity_supremum(state: &MixtureState, cref: ClosureRef) -> Result<f64> {
    let (lhs, rhs, kernel, _) = certificate_components(state, cref)?;
    let q = householder_complement(&kernel)?;
    let lhs_sym = (&lhs + lhs.transpose()) * 0.5;
    let rhs_sym = (&rhs + rhs.transpose()) * 0.5;
    let lq = q.transpose() * lhs_sym * &q;
    let rq = q.transpose() * rhs_sym * &q;
    let chol: Cholesky<f64, Dyn> = Cholesky::new(rq).ok_or_else(|| {
        Error::PreconditionViolated(
            "comparison matrix is not positive definite on the subspace".into(),
        )
    })?;
    let lmat = chol.l();
    let z = lmat
        .solve_lower_triangular(&lq)
        .ok_or_else(|| Error::PreconditionViolated("triangular solve failed".into()))?;
    let w = lmat
        .solve_lower_triangular(&z.transpose())
        .ok_or_else(|| Error::PreconditionViolated("triangular solve failed".into()))?;
    let wsym = (&w + w.transpose()) * 0.5;
    Ok(wsym.symmetric_eigenvalues().min())
}

/// The quantitative constant supplied by positive bounded friction: a table
/// with `0 < f_ik <= Fbar` certifies the Onsager-form inequality with
/// `d0 = 1 / (Fbar max_i M_i)`.
pub fn friction_d0(state: &MixtureState, msc: &MaxwellStefanClosure) -> Result<f64> {
    let n = msc.n_species();
    let f = msc.friction();
    let mut fbar = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let v = f[(i, k)];
                if !(v > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "friction f[{i},{k}] = {v} is not positive"
                    )));
                }
                fbar = fbar.max(v);
            }
        }
    }
    Ok(1.0 / (fbar * state.molar_mass().amax()))
}
