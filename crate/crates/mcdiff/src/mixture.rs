//! Mixture states, derived projector matrices, ideal chemical potential
//! gradients, and thermodynamic driving forces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Universal gas constant in J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314_462_618_153_24;

/// Maximum allowed deviation of the raw mass fraction sum from one.
const FRACTION_SUM_TOL: f64 = 1e-9;

/// Isothermal mixture state: temperature, total mass density, molar masses,
/// and mass fractions. Fractions are renormalized to sum exactly to one on
/// construction; the raw sum must already be within `1e-9` of one.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    temperature: f64,
    density: f64,
    molar_mass: DVector<f64>,
    fractions: DVector<f64>,
}

impl MixtureState {
    /// Builds a validated state. `y_raw` may carry zero fractions; operations
    /// needing strict positivity check separately.
    pub fn new(
        temperature: f64,
        density: f64,
        molar_mass: DVector<f64>,
        y_raw: DVector<f64>,
    ) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::NonPositiveTemperature(temperature));
        }
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::NonPositiveDensity(density));
        }
        let n = molar_mass.len();
        if n < 2 {
            return Err(Error::TooFewSpecies(n));
        }
        if y_raw.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} molar masses vs {} fractions",
                n,
                y_raw.len()
            )));
        }
        for (i, &m) in molar_mass.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::NonPositiveMolarMass { index: i, value: m });
            }
        }
        for (i, &y) in y_raw.iter().enumerate() {
            if !y.is_finite() || y < 0.0 {
                return Err(Error::NegativeFraction { index: i, value: y });
            }
        }
        let sum: f64 = y_raw.sum();
        if (sum - 1.0).abs() > FRACTION_SUM_TOL {
            return Err(Error::FractionSumOutOfRange(sum));
        }
        let fractions = y_raw / sum;
        Ok(Self {
            temperature,
            density,
            molar_mass,
            fractions,
        })
    }

    pub fn n_species(&self) -> usize {
        self.fractions.len()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn molar_mass(&self) -> &DVector<f64> {
        &self.molar_mass
    }

    /// Mass fractions, summing to one.
    pub fn fractions(&self) -> &DVector<f64> {
        &self.fractions
    }

    /// Partial mass density of species `i`.
    pub fn partial_density(&self, i: usize) -> f64 {
        self.density * self.fractions[i]
    }

    /// True when every fraction is strictly positive.
    pub fn is_strict(&self) -> bool {
        self.fractions.iter().all(|&y| y > 0.0)
    }

    /// Errors with the first offending species when some fraction vanishes.
    pub fn require_strict(&self) -> Result<()> {
        match self.fractions.iter().position(|&y| y <= 0.0) {
            Some(i) => Err(Error::ZeroFraction(i)),
            None => Ok(()),
        }
    }

    /// Molar concentrations `c_i = rho y_i / M_i` and their sum.
    fn molar_concentrations(&self) -> (DVector<f64>, f64) {
        let ci = DVector::from_fn(self.n_species(), |i, _| {
            self.density * self.fractions[i] / self.molar_mass[i]
        });
        let c = ci.sum();
        (ci, c)
    }

    /// Mole fractions.
    pub fn mole_fractions(&self) -> DVector<f64> {
        let (ci, c) = self.molar_concentrations();
        ci / c
    }

    /// Total molar concentration.
    pub fn total_concentration(&self) -> f64 {
        self.molar_concentrations().1
    }

    /// Assembles the derived diagonal and projector matrices. Fractions may
    /// be zero here; only the strict variants in [`DerivedMatrices`] reject
    /// vanishing species.
    pub fn derived(&self) -> DerivedMatrices {
        let n = self.n_species();
        let y = &self.fractions;
        let (ci, c) = self.molar_concentrations();
        let x = ci / c;
        let r = DMatrix::from_diagonal(&(y * self.density));
        let ydiag = DMatrix::from_diagonal(y);
        let xdiag = DMatrix::from_diagonal(&x);
        // P = I - e (x) y annihilates e on the right and y^T on the left.
        let p = DMatrix::from_fn(n, n, |i, j| (if i == j { 1.0 } else { 0.0 }) - y[j]);
        let pt = p.transpose();
        let m = &self.molar_mass;
        let pmol = DMatrix::from_fn(n, n, |i, j| m[i] * p[(i, j)] / m[j]);
        DerivedMatrices {
            r,
            ydiag,
            x,
            xdiag,
            c,
            p,
            pt,
            pmol,
        }
    }
}

/// Matrices derived from a [`MixtureState`]: mass and fraction diagonals, the
/// oblique projector `P = I - e (x) y` onto directions with vanishing total
/// flux, its transpose, and the molar-frame conjugate `M P M^{-1}`.
#[derive(Debug, Clone)]
pub struct DerivedMatrices {
    /// diag(rho_i).
    pub r: DMatrix<f64>,
    /// diag(y_i).
    pub ydiag: DMatrix<f64>,
    /// Mole fractions.
    pub x: DVector<f64>,
    /// diag(x_i).
    pub xdiag: DMatrix<f64>,
    /// Total molar concentration.
    pub c: f64,
    /// P = I - e (x) y; P e = 0, P^T y = 0, P^2 = P.
    pub p: DMatrix<f64>,
    /// Transpose of `p`, stored so both orientations share one construction.
    pub pt: DMatrix<f64>,
    /// M P M^{-1}, the projector in the molar frame.
    pub pmol: DMatrix<f64>,
}

impl DerivedMatrices {
    /// diag(sqrt(x_i)); requires every mole fraction strictly positive.
    pub fn x_sqrt(&self) -> Result<DMatrix<f64>> {
        self.strict_index()?;
        Ok(DMatrix::from_diagonal(&self.x.map(f64::sqrt)))
    }

    /// diag(1/sqrt(x_i)); requires every mole fraction strictly positive.
    pub fn x_inv_sqrt(&self) -> Result<DMatrix<f64>> {
        self.strict_index()?;
        Ok(DMatrix::from_diagonal(&self.x.map(|x| 1.0 / x.sqrt())))
    }

    fn strict_index(&self) -> Result<()> {
        match self.x.iter().position(|&x| x <= 0.0) {
            Some(i) => Err(Error::ZeroFraction(i)),
            None => Ok(()),
        }
    }
}

/// Per-species spatial gradient data: one row per species, one column per
/// spatial direction (1 to 3).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    g: DMatrix<f64>,
}

impl GradientField {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        let dim = g.ncols();
        if dim == 0 || dim > 3 {
            return Err(Error::DimensionMismatch(format!(
                "gradient needs 1 to 3 spatial columns, got {dim}"
            )));
        }
        if g.nrows() < 2 {
            return Err(Error::TooFewSpecies(g.nrows()));
        }
        if let Some(&v) = g.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gradient entries must be finite, got {v}"
            )));
        }
        Ok(Self { g })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn n_species(&self) -> usize {
        self.g.nrows()
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }
}

/// Gradients of `mu_i/(R T)` for an ideal mixture along a uniform 1-D grid of
/// states with spacing `h`: `(1/M_i) d/dz ln x_i`, centered differences at
/// interior nodes and one-sided two-point differences at the ends.
///
/// Every node must have the same species count and strictly positive
/// fractions.
pub fn ideal_mu_gradient(profile: &[MixtureState], h: f64) -> Result<Vec<GradientField>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grid spacing must be positive, got {h}"
        )));
    }
    if profile.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "gradient profile needs at least two nodes, got {}",
            profile.len()
        )));
    }
    let n = profile[0].n_species();
    for state in profile {
        if state.n_species() != n {
            return Err(Error::DimensionMismatch(
                "profile states disagree on species count".into(),
            ));
        }
        state.require_strict()?;
    }
    let lnx: Vec<DVector<f64>> = profile
        .iter()
        .map(|s| s.mole_fractions().map(f64::ln))
        .collect();
    let last = profile.len() - 1;
    let mut out = Vec::with_capacity(profile.len());
    for (j, state) in profile.iter().enumerate() {
        let m = state.molar_mass();
        let g = DMatrix::from_fn(n, 1, |i, _| {
            let dlnx = if j == 0 {
                (lnx[1][i] - lnx[0][i]) / h
            } else if j == last {
                (lnx[last][i] - lnx[last - 1][i]) / h
            } else {
                (lnx[j + 1][i] - lnx[j - 1][i]) / (2.0 * h)
            };
            dlnx / m[i]
        });
        out.push(GradientField::new(g)?);
    }
    Ok(out)
}

/// Thermodynamic driving forces `d = R P grad`: rows sum to zero because
/// `e^T R P = rho y^T P = 0`.
pub fn driving_forces(state: &MixtureState, grad: &GradientField) -> Result<DMatrix<f64>> {
    if grad.n_species() != state.n_species() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} species, gradient {}",
            state.n_species(),
            grad.n_species()
        )));
    }
    let der = state.derived();
    Ok(&der.r * &der.p * grad.matrix())
}
