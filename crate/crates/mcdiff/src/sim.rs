//! One-dimensional isothermal, isobaric diffusion solver. Explicit
//! conservative finite volumes on a uniform grid, no-flux boundaries,
//! ideal-mixture gradients. Total density and temperature stay constant;
//! the solver evolves partial densities under any of the closure forms.

use nalgebra::{DMatrix, DVector};

use crate::closures::{
    flux_fo, flux_ms, flux_projected, MaxwellStefanClosure, OnsagerClosure, ProjectedClosure,
};
use crate::darken::{core_diagonal_fo_coeffs, darken_onsager, self_diffusion_mix, SelfDiffusionModel};
use crate::error::{Error, Result};
use crate::fickian::{fickian_ideal_isobaric, spectrum};
use crate::mixture::{GradientField, MixtureState};
use crate::transforms::{closure_effective_matrix, fo_to_projected_core, ms_to_onsager_core, ClosureRef};

/// Closure driving the face fluxes. The first three hold fixed coefficient
/// objects; `Darken` re-evaluates diffusivities from the face composition.
/// `MsProjectedImage` carries a friction table but routes every face flux
/// through the projected image of the Maxwell-Stefan closure, which lets a
/// scenario be cross-run in both representations.
#[derive(Debug, Clone)]
pub enum SimClosure {
    Onsager(OnsagerClosure),
    MaxwellStefan(MaxwellStefanClosure),
    Projected(ProjectedClosure),
    Darken(SelfDiffusionModel),
    MsProjectedImage(MaxwellStefanClosure),
}

impl SimClosure {
    pub fn n_species(&self) -> usize {
        match self {
            SimClosure::Onsager(oc) => oc.matrix().nrows(),
            SimClosure::MaxwellStefan(msc) | SimClosure::MsProjectedImage(msc) => msc.n_species(),
            SimClosure::Projected(pc) => pc.d().len(),
            SimClosure::Darken(model) => model.n_species(),
        }
    }
}

/// Scenario description. `initial_profile` holds one mass-fraction row per
/// cell; rows are renormalized on load. `dt = None` selects the automatic
/// step `0.25 dz^2 / d_eff` with `d_eff` the largest Fickian spectral radius
/// over the initial cells.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub length: f64,
    pub n_cells: usize,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub output_every: usize,
    pub temperature: f64,
    pub density: f64,
    pub molar_mass: DVector<f64>,
    pub closure: SimClosure,
    pub initial_profile: DMatrix<f64>,
}

/// One monitor sample: time, worst fraction over all cells and species,
/// per-species total mass, and the entropy-production rate integral.
#[derive(Debug, Clone)]
pub struct MonitorRecord {
    pub t: f64,
    pub min_fraction: f64,
    pub mass: DVector<f64>,
    pub zeta_total: f64,
}

struct FaceSweep {
    /// Interior face fluxes, one row per face between cells `f` and `f+1`.
    flux: DMatrix<f64>,
    zeta_total: f64,
    scale_total: f64,
}

/// A running simulation: owns the grid state, the validated configuration,
/// and the monitor series.
#[derive(Debug)]
pub struct Simulation {
    temperature: f64,
    density: f64,
    molar_mass: DVector<f64>,
    closure: SimClosure,
    dz: f64,
    dt: f64,
    t_end: f64,
    output_every: usize,
    n_cells: usize,
    n_species: usize,
    rho: DMatrix<f64>,
    t: f64,
    steps: usize,
    min_fraction_seen: f64,
    min_zeta_ratio: f64,
    monitors: Vec<MonitorRecord>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        let n = config.molar_mass.len();
        if config.n_cells < 3 {
            return Err(Error::InvalidParameter(format!(
                "at least 3 cells required, got {}",
                config.n_cells
            )));
        }
        if !(config.length > 0.0) || !config.length.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "domain length must be positive, got {}",
                config.length
            )));
        }
        if !(config.t_end >= 0.0) || !config.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "end time must be nonnegative, got {}",
                config.t_end
            )));
        }
        if config.output_every == 0 {
            return Err(Error::InvalidParameter(
                "output interval must be at least one step".into(),
            ));
        }
        if config.closure.n_species() != n {
            return Err(Error::DimensionMismatch(format!(
                "closure for {} species against {} molar masses",
                config.closure.n_species(),
                n
            )));
        }
        if config.initial_profile.nrows() != config.n_cells
            || config.initial_profile.ncols() != n
        {
            return Err(Error::DimensionMismatch(format!(
                "initial profile {}x{} against {} cells and {} species",
                config.initial_profile.nrows(),
                config.initial_profile.ncols(),
                config.n_cells,
                n
            )));
        }

        // Per-cell validation; rows are renormalized through MixtureState.
        let mut rho = DMatrix::zeros(config.n_cells, n);
        let mut cells = Vec::with_capacity(config.n_cells);
        for c in 0..config.n_cells {
            let y = DVector::from_fn(n, |i, _| config.initial_profile[(c, i)]);
            let state = MixtureState::new(
                config.temperature,
                config.density,
                config.molar_mass.clone(),
                y,
            )?;
            state.require_strict()?;
            for i in 0..n {
                rho[(c, i)] = config.density * state.fractions()[i];
            }
            cells.push(state);
        }

        // Stability scale: largest Fickian spectral radius over initial cells.
        let mut d_eff = 0.0f64;
        for state in &cells {
            let oc = onsager_image(&config.closure, state)?;
            let fick = fickian_ideal_isobaric(state, &oc)?;
            let radius = spectrum(fick.matrix())
                .eigenvalues
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            d_eff = d_eff.max(radius);
        }
        let dz = config.length / config.n_cells as f64;
        let bound = if d_eff > 0.0 {
            0.5 * dz * dz / d_eff
        } else {
            f64::INFINITY
        };
        let dt = match config.dt {
            Some(v) => {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "time step must be positive, got {v}"
                    )));
                }
                if v > bound {
                    return Err(Error::StabilityViolation { dt: v, bound });
                }
                v
            }
            None => {
                let auto = if bound.is_finite() {
                    0.5 * bound
                } else {
                    config.t_end.max(f64::MIN_POSITIVE)
                };
                // Short runs should not overshoot the horizon just because
                // the stability bound allows a larger step.
                if config.t_end > 0.0 {
                    auto.min(config.t_end)
                } else {
                    auto
                }
            }
        };

        let mut sim = Self {
            temperature: config.temperature,
            density: config.density,
            molar_mass: config.molar_mass,
            closure: config.closure,
            dz,
            dt,
            t_end: config.t_end,
            output_every: config.output_every,
            n_cells: config.n_cells,
            n_species: n,
            rho,
            t: 0.0,
            steps: 0,
            min_fraction_seen: f64::INFINITY,
            min_zeta_ratio: f64::INFINITY,
            monitors: Vec::new(),
        };
        sim.min_fraction_seen = sim.current_min_fraction();
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn monitors(&self) -> &[MonitorRecord] {
        &self.monitors
    }

    /// Smallest mass fraction seen in any cell after any completed step.
    pub fn min_fraction_seen(&self) -> f64 {
        self.min_fraction_seen
    }

    /// Smallest per-step ratio of entropy production to its magnitude scale
    /// `sum_faces |J_i g_i| dz`; infinite while no step produced any flux.
    pub fn min_zeta_ratio(&self) -> f64 {
        self.min_zeta_ratio
    }

    /// Cell-center coordinates and the mass-fraction profile (cells x species).
    pub fn profile(&self) -> (DVector<f64>, DMatrix<f64>) {
        let z = DVector::from_fn(self.n_cells, |c, _| (c as f64 + 0.5) * self.dz);
        let mut y = DMatrix::zeros(self.n_cells, self.n_species);
        for c in 0..self.n_cells {
            let total: f64 = self.rho.row(c).sum();
            for i in 0..self.n_species {
                y[(c, i)] = self.rho[(c, i)] / total;
            }
        }
        (z, y)
    }

    /// Materializes per-cell states (shared temperature and total density).
    pub fn cells(&self) -> Result<Vec<MixtureState>> {
        let (_, y) = self.profile();
        (0..self.n_cells)
            .map(|c| {
                MixtureState::new(
                    self.temperature,
                    self.density,
                    self.molar_mass.clone(),
                    DVector::from_fn(self.n_species, |i, _| y[(c, i)]),
                )
            })
            .collect()
    }

    pub fn mass_totals(&self) -> DVector<f64> {
        DVector::from_fn(self.n_species, |i, _| {
            (0..self.n_cells).map(|c| self.rho[(c, i)]).sum::<f64>() * self.dz
        })
    }

    fn current_min_fraction(&self) -> f64 {
        let mut min = f64::INFINITY;
        for c in 0..self.n_cells {
            let total: f64 = self.rho.row(c).sum();
            for i in 0..self.n_species {
                min = min.min(self.rho[(c, i)] / total);
            }
        }
        min
    }

    /// Face states and fluxes for the current profile. Gradients are
    /// two-point differences of `ln x_i` scaled by `1/M_i`; face compositions
    /// are renormalized arithmetic means.
    fn face_fluxes(&self) -> Result<FaceSweep> {
        let n = self.n_species;
        let nc = self.n_cells;
        // Per-cell fractions and log mole fractions.
        let mut yfrac = DMatrix::zeros(nc, n);
        let mut lnx = DMatrix::zeros(nc, n);
        for c in 0..nc {
            let total: f64 = self.rho.row(c).sum();
            let mut conc = 0.0;
            for i in 0..n {
                let y = self.rho[(c, i)] / total;
                if y <= 0.0 {
                    return Err(Error::ZeroFraction(i));
                }
                yfrac[(c, i)] = y;
                conc += y / self.molar_mass[i];
            }
            for i in 0..n {
                lnx[(c, i)] = (yfrac[(c, i)] / (self.molar_mass[i] * conc)).ln();
            }
        }

        let mut flux = DMatrix::zeros(nc - 1, n);
        let mut zeta_total = 0.0;
        let mut scale_total = 0.0;
        for f in 0..nc - 1 {
            let (l, r) = (f, f + 1);
            let y_face = DVector::from_fn(n, |i, _| 0.5 * (yfrac[(l, i)] + yfrac[(r, i)]));
            let face = MixtureState::new(
                self.temperature,
                self.density,
                self.molar_mass.clone(),
                y_face,
            )?;
            face.require_strict()?;
            let g = DVector::from_fn(n, |i, _| {
                (lnx[(r, i)] - lnx[(l, i)]) / (self.dz * self.molar_mass[i])
            });
            let grad = GradientField::new(DMatrix::from_column_slice(n, 1, g.as_slice()))?;
            let j = match &self.closure {
                SimClosure::Onsager(oc) => flux_fo(oc, &grad)?,
                SimClosure::MaxwellStefan(msc) => flux_ms(&face, msc, &grad)?,
                SimClosure::Projected(pc) => flux_projected(&face, pc, &grad)?,
                SimClosure::Darken(model) => {
                    let d = self_diffusion_mix(model, &face.mole_fractions())?;
                    let oc = core_diagonal_fo_coeffs(&face, &d)?;
                    flux_fo(&oc, &grad)?
                }
                SimClosure::MsProjectedImage(msc) => {
                    let oc = ms_to_onsager_core(&face, msc, None)?;
                    let pc = fo_to_projected_core(&face, &oc)?;
                    flux_projected(&face, &pc, &grad)?
                }
            };
            let mut zeta = 0.0;
            let mut scale = 0.0;
            for i in 0..n {
                flux[(f, i)] = j[(i, 0)];
                zeta -= j[(i, 0)] * g[i];
                scale += (j[(i, 0)] * g[i]).abs();
            }
            zeta_total += zeta;
            scale_total += scale;
        }
        Ok(FaceSweep {
            flux,
            zeta_total: zeta_total * self.dz,
            scale_total: scale_total * self.dz,
        })
    }

    /// One explicit conservative update. Every face flux leaves one cell and
    /// enters its neighbor with the same floating-point increment, so the
    /// per-species column sums telescope.
    pub fn step(&mut self) -> Result<()> {
        let sweep = self.face_fluxes()?;
        let c = self.dt / self.dz;
        for f in 0..self.n_cells - 1 {
            for i in 0..self.n_species {
                let inc = c * sweep.flux[(f, i)];
                self.rho[(f, i)] -= inc;
                self.rho[(f + 1, i)] += inc;
            }
        }
        for cell in 0..self.n_cells {
            for i in 0..self.n_species {
                if self.rho[(cell, i)] <= 0.0 {
                    return Err(Error::ZeroFraction(i));
                }
            }
        }
        self.t += self.dt;
        self.steps += 1;
        if sweep.scale_total > 0.0 {
            self.min_zeta_ratio = self
                .min_zeta_ratio
                .min(sweep.zeta_total / sweep.scale_total);
        }
        self.min_fraction_seen = self.min_fraction_seen.min(self.current_min_fraction());
        Ok(())
    }

    /// Monitor sample for the current state.
    pub fn diagnostics(&self) -> Result<MonitorRecord> {
        let sweep = self.face_fluxes()?;
        Ok(MonitorRecord {
            t: self.t,
            min_fraction: self.current_min_fraction(),
            mass: self.mass_totals(),
            zeta_total: sweep.zeta_total,
        })
    }

    /// Advances to the end time, sampling monitors at the configured cadence
    /// (plus the initial and final states).
    pub fn run(&mut self) -> Result<()> {
        if self.monitors.is_empty() {
            let rec = self.diagnostics()?;
            self.monitors.push(rec);
        }
        let remaining = self.t_end - self.t;
        if remaining <= 0.0 {
            return Ok(());
        }
        let total = (remaining / self.dt - 1e-9).ceil().max(1.0) as usize;
        for s in 1..=total {
            self.step()?;
            if s % self.output_every == 0 || s == total {
                let rec = self.diagnostics()?;
                self.monitors.push(rec);
            }
        }
        Ok(())
    }
}

/// Onsager-matrix image of a closure at a state, used for stability
/// estimation. For fixed matrices this is a representation change; for
/// Darken it evaluates the model.
fn onsager_image(closure: &SimClosure, state: &MixtureState) -> Result<OnsagerClosure> {
    match closure {
        SimClosure::Onsager(oc) => Ok(oc.clone()),
        SimClosure::MaxwellStefan(msc) | SimClosure::MsProjectedImage(msc) => {
            ms_to_onsager_core(state, msc, None)
        }
        SimClosure::Projected(pc) => {
            let l = closure_effective_matrix(state, ClosureRef::Projected(pc))?;
            Ok(OnsagerClosure::new_unchecked(l, None))
        }
        SimClosure::Darken(model) => darken_onsager(state, model),
    }
}
