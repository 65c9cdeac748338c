//! Command line front end: scenario documents in JSON, closure conversion,
//! certificate checks, Darken tables, the negative-friction generator, the
//! Fickian report, and the relaxation solver with CSV output.
//!
//! Exit codes: 0 success, 1 internal error, 2 validation error, 3 a
//! certificate failed under `--strict`.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use mcdiff::closures::{
    MaxwellStefanClosure, OnsagerClosure, ProjectedClosure,
};
use mcdiff::darken::{
    darken_ms_diffusivities, darken_onsager, friction_from_ms_diffusivities, self_diffusion_mix,
    vignes_binary, SelfDiffusionModel,
};
use mcdiff::fickian::{
    fickian_ideal_isobaric, fickian_molefraction_from_onsager, posdiag_condition, spectrum,
    z_matrix_test, NegativeFrictionWitness,
};
use mcdiff::groupinv::psd_on_subspace;
use mcdiff::sim::{SimClosure, SimConfig, Simulation};
use mcdiff::transforms::{
    closure_effective_matrix, ellipticity_certificate, ellipticity_supremum,
    flux_equivalence_residual, fo_to_projected_any, fo_to_projected_core, friction_d0,
    ms_to_onsager_core, probe_gradients, projected_to_ms, ClosureRef, DEFAULT_PROBE_SEED,
};
use mcdiff::MixtureState;

// ---------------------------------------------------------------------------
// Document schema

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioDocument {
    species: Vec<SpeciesDoc>,
    state: StateDoc,
    closure: ClosureDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    sim: Option<SimDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ReportBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpeciesDoc {
    name: String,
    molar_mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateDoc {
    #[serde(rename = "T")]
    temperature: f64,
    rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<ProfileDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProfileDoc {
    n_cells: usize,
    data: Vec<f64>,
}

/// Square matrix, row-major with the dimension spelled out.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixDoc {
    n: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum ClosureDoc {
    FickOnsager { onsager: MatrixDoc },
    MaxwellStefan { friction: MatrixDoc },
    CoreDiagonal {
        d: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        k: Option<MatrixDoc>,
    },
    DarkenSelfDiffusion { table: MatrixDoc },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimDoc {
    n_cells: usize,
    length: f64,
    t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    output_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReportBlock {
    flux_residual: f64,
    ellipticity: EllipticityReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EllipticityReport {
    d0: f64,
    slack: f64,
    ok: bool,
}

// ---------------------------------------------------------------------------
// Errors and exit codes

#[derive(Debug)]
enum CliError {
    Validation(String),
    Internal(String),
    Strict(String),
}

impl From<mcdiff::Error> for CliError {
    fn from(e: mcdiff::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("document parse failed: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("i/o failure: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Parser)]
#[command(name = "mcdiff", version, about = "Multicomponent diffusion closure toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetForm {
    /// Fick-Onsager matrix.
    A,
    /// Maxwell-Stefan friction table.
    B,
    /// Projected diagonal-plus-interaction form.
    C,
}

#[derive(Subcommand)]
enum Command {
    /// Convert the scenario's closure into another representation.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, ignore_case = true)]
        target: TargetForm,
        /// Random gradient probes for the flux-residual report.
        #[arg(long, default_value_t = 8)]
        probes: usize,
        #[arg(long, default_value_t = DEFAULT_PROBE_SEED)]
        seed: u64,
        /// Exit with code 3 when the ellipticity certificate fails.
        #[arg(long)]
        strict: bool,
    },
    /// Report symmetry, kernel, positivity, and ellipticity certificates.
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        probes: usize,
        #[arg(long, default_value_t = DEFAULT_PROBE_SEED)]
        seed: u64,
        /// Exit with code 3 when any reported certificate fails.
        #[arg(long)]
        strict: bool,
    },
    /// Mixture diffusivity tables from self-diffusion data.
    Darken {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Friction table family with a negative coefficient but admissible tau.
    Counterexample {
        /// Coupling strength; must exceed 2.
        #[arg(long, default_value_t = 3.0)]
        a: f64,
        /// Ternary composition, comma separated.
        #[arg(long, value_delimiter = ',')]
        y0: Option<Vec<f64>>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fickian diffusion matrices and their spectrum.
    Fickian {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the relaxation solver and write monitor and profile CSV files.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        /// Path prefix for the CSV outputs.
        #[arg(long)]
        output: PathBuf,
    },
}

// ---------------------------------------------------------------------------
// Document plumbing

fn read_document(path: &PathBuf) -> CliResult<ScenarioDocument> {
    let text = fs::read_to_string(path)
        .map_err(|e| validation(format!("cannot read {}: {e}", path.display())))?;
    let doc: ScenarioDocument = serde_json::from_str(&text)?;
    if doc.species.is_empty() {
        return Err(validation("species list is empty"));
    }
    Ok(doc)
}

fn render_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn emit(output: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn matrix_from_doc(doc: &MatrixDoc, expected_n: usize, what: &str) -> CliResult<DMatrix<f64>> {
    if doc.n != expected_n {
        return Err(validation(format!(
            "{what} is {}x{} but the document lists {expected_n} species",
            doc.n, doc.n
        )));
    }
    if doc.data.len() != doc.n * doc.n {
        return Err(validation(format!(
            "{what} declares n = {} but carries {} entries",
            doc.n,
            doc.data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(doc.n, doc.n, &doc.data))
}

fn doc_from_matrix(m: &DMatrix<f64>) -> MatrixDoc {
    let n = m.nrows();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push(m[(i, j)]);
        }
    }
    MatrixDoc { n, data }
}

fn molar_masses(doc: &ScenarioDocument) -> DVector<f64> {
    DVector::from_fn(doc.species.len(), |i, _| doc.species[i].molar_mass)
}

/// Point state for the closure commands; requires an explicit composition.
fn point_state(doc: &ScenarioDocument) -> CliResult<MixtureState> {
    let y = doc
        .state
        .y
        .as_ref()
        .ok_or_else(|| validation("state needs a composition vector y for this command"))?;
    if y.len() != doc.species.len() {
        return Err(validation(format!(
            "composition has {} entries for {} species",
            y.len(),
            doc.species.len()
        )));
    }
    let state = MixtureState::new(
        doc.state.temperature,
        doc.state.rho,
        molar_masses(doc),
        DVector::from_row_slice(y),
    )?;
    state.require_strict()?;
    Ok(state)
}

/// A closure loaded from a document, validated against the state.
enum LoadedClosure {
    Onsager(OnsagerClosure),
    MaxwellStefan(MaxwellStefanClosure),
    Projected(ProjectedClosure),
    Darken(SelfDiffusionModel),
}

impl LoadedClosure {
    fn kind(&self) -> &'static str {
        match self {
            LoadedClosure::Onsager(_) => "fick-onsager",
            LoadedClosure::MaxwellStefan(_) => "maxwell-stefan",
            LoadedClosure::Projected(_) => "core-diagonal",
            LoadedClosure::Darken(_) => "darken-self-diffusion",
        }
    }
}

fn load_closure(doc: &ScenarioDocument, state: &MixtureState) -> CliResult<LoadedClosure> {
    let n = doc.species.len();
    Ok(match &doc.closure {
        ClosureDoc::FickOnsager { onsager } => {
            let l = matrix_from_doc(onsager, n, "Onsager matrix")?;
            LoadedClosure::Onsager(OnsagerClosure::with_derived_structure(state, l)?)
        }
        ClosureDoc::MaxwellStefan { friction } => {
            let f = matrix_from_doc(friction, n, "friction table")?;
            LoadedClosure::MaxwellStefan(MaxwellStefanClosure::validated(f)?)
        }
        ClosureDoc::CoreDiagonal { d, k } => {
            if d.len() != n {
                return Err(validation(format!(
                    "diffusivity vector has {} entries for {n} species",
                    d.len()
                )));
            }
            let kmat = match k {
                Some(doc_k) => matrix_from_doc(doc_k, n, "interaction matrix")?,
                None => DMatrix::zeros(n, n),
            };
            LoadedClosure::Projected(ProjectedClosure::validated(
                state,
                DVector::from_row_slice(d),
                kmat,
            )?)
        }
        ClosureDoc::DarkenSelfDiffusion { table } => {
            let t = matrix_from_doc(table, n, "self-diffusion table")?;
            LoadedClosure::Darken(SelfDiffusionModel::new(t)?)
        }
    })
}

/// The Onsager representation of any loaded closure, structure attached.
fn onsager_image(state: &MixtureState, closure: &LoadedClosure) -> CliResult<OnsagerClosure> {
    Ok(match closure {
        LoadedClosure::Onsager(oc) => oc.clone(),
        LoadedClosure::MaxwellStefan(msc) => ms_to_onsager_core(state, msc, None)?,
        LoadedClosure::Projected(pc) => {
            let l = closure_effective_matrix(state, ClosureRef::Projected(pc))?;
            OnsagerClosure::with_derived_structure(state, l)?
        }
        LoadedClosure::Darken(model) => darken_onsager(state, model)?,
    })
}

// ---------------------------------------------------------------------------
// convert

fn run_convert(
    input: PathBuf,
    output: Option<PathBuf>,
    target: TargetForm,
    probes: usize,
    seed: u64,
    strict: bool,
) -> CliResult<()> {
    let mut doc = read_document(&input)?;
    let state = point_state(&doc)?;
    let loaded = load_closure(&doc, &state)?;
    let n = state.n_species();

    // Target closure. Darken inputs are materialized through their Onsager
    // image first; same-form targets pass through untouched.
    enum Out {
        Onsager(OnsagerClosure),
        Ms(MaxwellStefanClosure),
        Projected(ProjectedClosure),
    }
    let out = match (&loaded, target) {
        (LoadedClosure::Onsager(oc), TargetForm::A) => Out::Onsager(oc.clone()),
        (LoadedClosure::MaxwellStefan(msc), TargetForm::B) => Out::Ms(msc.clone()),
        (LoadedClosure::Projected(pc), TargetForm::C) => Out::Projected(pc.clone()),
        (LoadedClosure::MaxwellStefan(msc), TargetForm::A) => {
            Out::Onsager(ms_to_onsager_core(&state, msc, None)?)
        }
        (_, TargetForm::A) => Out::Onsager(onsager_image(&state, &loaded)?),
        (LoadedClosure::Darken(model), TargetForm::B) => {
            let d = self_diffusion_mix(model, &state.mole_fractions())?;
            let dmat = darken_ms_diffusivities(&state.mole_fractions(), &d)?;
            Out::Ms(friction_from_ms_diffusivities(&state, &dmat)?)
        }
        (_, TargetForm::B) => {
            let oc = onsager_image(&state, &loaded)?;
            let pc = fo_to_projected_any(&state, &oc)?.closure;
            Out::Ms(projected_to_ms(&state, &pc)?.closure)
        }
        (_, TargetForm::C) => {
            let oc = onsager_image(&state, &loaded)?;
            Out::Projected(fo_to_projected_any(&state, &oc)?.closure)
        }
    };

    // Residual between input and output on seeded gradient probes, and the
    // ellipticity certificate of the output at its own sharp constant.
    if probes == 0 {
        return Err(validation("at least one gradient probe is required"));
    }
    let probe_set = probe_gradients(n, 1, probes, seed)?;
    let input_onsager;
    let input_ref = match &loaded {
        LoadedClosure::Onsager(oc) => ClosureRef::Onsager(oc),
        LoadedClosure::MaxwellStefan(msc) => ClosureRef::MaxwellStefan(msc),
        LoadedClosure::Projected(pc) => ClosureRef::Projected(pc),
        LoadedClosure::Darken(model) => {
            input_onsager = darken_onsager(&state, model)?;
            ClosureRef::Onsager(&input_onsager)
        }
    };
    let output_ref = match &out {
        Out::Onsager(oc) => ClosureRef::Onsager(oc),
        Out::Ms(msc) => ClosureRef::MaxwellStefan(msc),
        Out::Projected(pc) => ClosureRef::Projected(pc),
    };
    let flux_residual = flux_equivalence_residual(&state, input_ref, output_ref, &probe_set)?;
    let d0 = ellipticity_supremum(&state, output_ref)?;
    let cert = ellipticity_certificate(&state, output_ref, d0)?;
    let report = ReportBlock {
        flux_residual,
        ellipticity: EllipticityReport {
            d0,
            slack: cert.min_excess_eig,
            ok: cert.ok,
        },
    };
    let cert_ok = cert.ok;

    doc.closure = match out {
        Out::Onsager(oc) => ClosureDoc::FickOnsager {
            onsager: doc_from_matrix(oc.matrix()),
        },
        Out::Ms(msc) => ClosureDoc::MaxwellStefan {
            friction: doc_from_matrix(msc.friction()),
        },
        Out::Projected(pc) => {
            // Interaction entries below the structural-zero threshold are
            // conversion noise (the ternary case is exactly zero); snapping
            // them keeps the document on the admissible manifold, where the
            // row-sum constraint is relative to the matrix's own scale.
            let dscale = pc.d().amax();
            let k = if pc.k().amax() <= 1e-10 * dscale {
                DMatrix::zeros(n, n)
            } else {
                pc.k().clone()
            };
            ClosureDoc::CoreDiagonal {
                d: pc.d().iter().copied().collect(),
                // The binary representation fixes K = 0 by convention, so
                // the block is omitted; larger systems spell it out.
                k: if n == 2 { None } else { Some(doc_from_matrix(&k)) },
            }
        }
    };
    doc.report = Some(report);

    emit(&output, &render_json(&doc)?)?;
    if strict && !cert_ok {
        return Err(CliError::Strict(
            "ellipticity certificate failed for the converted closure".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// check

#[derive(Serialize)]
struct CertReport {
    d0: f64,
    slack: f64,
    ok: bool,
}

#[derive(Serialize)]
struct CheckReport {
    kind: &'static str,
    n_species: usize,
    symmetric_deviation: f64,
    kernel_residual: f64,
    psd_on_flux_subspace: CertReport,
    ellipticity_supremum: f64,
    certificate_at_supremum: CertReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    friction_constant: Option<CertReport>,
    flux_self_consistency: f64,
}

fn run_check(
    input: PathBuf,
    output: Option<PathBuf>,
    probes: usize,
    seed: u64,
    strict: bool,
) -> CliResult<()> {
    let doc = read_document(&input)?;
    let state = point_state(&doc)?;
    let loaded = load_closure(&doc, &state)?;
    let n = state.n_species();

    let onsager = onsager_image(&state, &loaded)?;
    let l = onsager.matrix();
    let scale = l.amax().max(f64::MIN_POSITIVE);
    let symmetric_deviation = (l - l.transpose()).amax() / scale;
    let e = DVector::from_element(n, 1.0);
    let kernel_residual = (l * &e).amax() / scale;
    let l_sym = (l + l.transpose()) * 0.5;
    let psd = psd_on_subspace(&l_sym, &e)?;

    // Form-specific certificates.
    let own_ref = match &loaded {
        LoadedClosure::Onsager(oc) => ClosureRef::Onsager(oc),
        LoadedClosure::MaxwellStefan(msc) => ClosureRef::MaxwellStefan(msc),
        LoadedClosure::Projected(pc) => ClosureRef::Projected(pc),
        LoadedClosure::Darken(_) => ClosureRef::Onsager(&onsager),
    };
    let supremum = ellipticity_supremum(&state, own_ref)?;
    let cert = ellipticity_certificate(&state, own_ref, supremum)?;
    let friction_constant = match &loaded {
        LoadedClosure::MaxwellStefan(msc) => match friction_d0(&state, msc) {
            Ok(d0) => {
                let fc = ellipticity_certificate(&state, ClosureRef::Onsager(&onsager), d0)?;
                Some(CertReport {
                    d0,
                    slack: fc.min_excess_eig,
                    ok: fc.ok,
                })
            }
            Err(_) => None,
        },
        _ => None,
    };

    // Cross-check: the Onsager image reproduces the loaded closure's fluxes.
    if probes == 0 {
        return Err(validation("at least one gradient probe is required"));
    }
    let probe_set = probe_gradients(n, 1, probes, seed)?;
    let flux_self_consistency =
        flux_equivalence_residual(&state, own_ref, ClosureRef::Onsager(&onsager), &probe_set)?;

    let all_ok = psd.ok && cert.ok && friction_constant.as_ref().is_none_or(|c| c.ok);
    let report = CheckReport {
        kind: loaded.kind(),
        n_species: n,
        symmetric_deviation,
        kernel_residual,
        psd_on_flux_subspace: CertReport {
            d0: 0.0,
            slack: psd.min_eig,
            ok: psd.ok,
        },
        ellipticity_supremum: supremum,
        certificate_at_supremum: CertReport {
            d0: supremum,
            slack: cert.min_excess_eig,
            ok: cert.ok,
        },
        friction_constant,
        flux_self_consistency,
    };

    emit(&output, &render_json(&report)?)?;
    if strict && !all_ok {
        return Err(CliError::Strict("a closure certificate failed".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// darken

#[derive(Serialize)]
struct BinaryComparison {
    pair: [String; 2],
    x_first: f64,
    darken: f64,
    vignes: f64,
}

#[derive(Serialize)]
struct DarkenReport {
    self_diffusion: Vec<f64>,
    ms_diffusivities: MatrixDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    binary_comparisons: Option<Vec<BinaryComparison>>,
}

fn run_darken(input: PathBuf, output: Option<PathBuf>) -> CliResult<()> {
    let doc = read_document(&input)?;
    let state = point_state(&doc)?;
    let x = state.mole_fractions();
    let n = state.n_species();

    let (d, comparisons) = match load_closure(&doc, &state)? {
        LoadedClosure::Darken(model) => {
            let d = self_diffusion_mix(&model, &x)?;
            // Pairwise comparison of the two classic interpolations between
            // the dilute limits, at the pair-normalized composition.
            let mut comps = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let xi = x[i] / (x[i] + x[j]);
                    let d_i_limit = model.table()[(j, i)];
                    let d_j_limit = model.table()[(i, j)];
                    comps.push(BinaryComparison {
                        pair: [doc.species[i].name.clone(), doc.species[j].name.clone()],
                        x_first: xi,
                        darken: xi * d_i_limit + (1.0 - xi) * d_j_limit,
                        vignes: vignes_binary(d_i_limit, d_j_limit, xi)?,
                    });
                }
            }
            (d, Some(comps))
        }
        LoadedClosure::Projected(pc) => {
            if pc.k().amax() > 0.0 {
                return Err(validation(
                    "mixture diffusivity tables need a core-diagonal closure (no interaction block)",
                ));
            }
            (pc.d().clone(), None)
        }
        other => {
            return Err(validation(format!(
                "mixture diffusivity tables need self-diffusion data, got a {} closure",
                other.kind()
            )));
        }
    };

    let dmat = darken_ms_diffusivities(&x, &d)?;
    let report = DarkenReport {
        self_diffusion: d.iter().copied().collect(),
        ms_diffusivities: doc_from_matrix(&dmat),
        binary_comparisons: comparisons,
    };
    emit(&output, &render_json(&report)?)
}

// ---------------------------------------------------------------------------
// counterexample

#[derive(Serialize)]
struct CounterexampleReport {
    a: f64,
    y0: Vec<f64>,
    state: CounterexampleState,
    coupling: MatrixDoc,
    friction: MatrixDoc,
    negative_friction_pairs: Vec<[usize; 2]>,
    tau: MatrixDoc,
    tau_min_eig_on_flux_subspace: f64,
    tau_psd: bool,
    posdiag_satisfied: Vec<bool>,
    projected_d: Vec<f64>,
}

#[derive(Serialize)]
struct CounterexampleState {
    #[serde(rename = "T")]
    temperature: f64,
    rho: f64,
    molar_mass: Vec<f64>,
}

fn run_counterexample(a: f64, y0: Option<Vec<f64>>, output: Option<PathBuf>) -> CliResult<()> {
    let y0 = y0.unwrap_or_else(|| vec![1.0 / 3.0; 3]);
    if y0.len() != 3 {
        return Err(validation("the generator is ternary; y0 needs 3 entries"));
    }
    let y0 = DVector::from_row_slice(&y0);
    let witness = NegativeFrictionWitness::new(a, y0.clone())?;

    // Reference state: unit density, equal molar masses. The generator's
    // friction and coupling depend only on (a, y0); the state enters through
    // the density factor of tau and the friction-matrix assembly.
    let temperature = 300.0;
    let rho = 1.0;
    let molar_mass = DVector::from_element(3, 0.03);
    let state = MixtureState::new(temperature, rho, molar_mass.clone(), y0.clone())?;

    let friction = witness.friction(&y0)?;
    let mut negative_pairs = Vec::new();
    for i in 0..3 {
        for k in i + 1..3 {
            if friction.friction()[(i, k)] < 0.0 {
                negative_pairs.push([i, k]);
            }
        }
    }
    let tau = witness.tau(&state)?;
    let e = DVector::from_element(3, 1.0);
    let tau_cert = psd_on_subspace(&tau, &e)?;

    let onsager = ms_to_onsager_core(&state, &friction, None)?;
    let structure = onsager
        .structure()
        .ok_or_else(|| CliError::Internal("conversion lost the structure".into()))?;
    let posdiag = posdiag_condition(&state, &structure.s)?;
    let projected = fo_to_projected_core(&state, &onsager)?;

    let report = CounterexampleReport {
        a,
        y0: y0.iter().copied().collect(),
        state: CounterexampleState {
            temperature,
            rho,
            molar_mass: molar_mass.iter().copied().collect(),
        },
        coupling: doc_from_matrix(&witness.coupling()),
        friction: doc_from_matrix(friction.friction()),
        negative_friction_pairs: negative_pairs,
        tau: doc_from_matrix(&tau),
        tau_min_eig_on_flux_subspace: tau_cert.min_eig,
        tau_psd: tau_cert.ok,
        posdiag_satisfied: posdiag.satisfied.clone(),
        projected_d: projected.d().iter().copied().collect(),
    };
    emit(&output, &render_json(&report)?)
}

// ---------------------------------------------------------------------------
// fickian

#[derive(Serialize)]
struct FickianReport {
    fickian: MatrixDoc,
    molefraction: MatrixDoc,
    eigenvalues: Vec<[f64; 2]>,
    max_abs_imag: f64,
    min_real: f64,
    z_matrix: bool,
}

fn run_fickian(input: PathBuf, output: Option<PathBuf>) -> CliResult<()> {
    let doc = read_document(&input)?;
    let state = point_state(&doc)?;
    let loaded = load_closure(&doc, &state)?;
    let onsager = onsager_image(&state, &loaded)?;

    let fick = fickian_ideal_isobaric(&state, &onsager)?;
    let molefraction = fickian_molefraction_from_onsager(&state, &onsager)?;
    let report_spectrum = spectrum(fick.matrix());

    let report = FickianReport {
        fickian: doc_from_matrix(fick.matrix()),
        molefraction: doc_from_matrix(molefraction.matrix()),
        eigenvalues: report_spectrum
            .eigenvalues
            .iter()
            .map(|z| [z.re, z.im])
            .collect(),
        max_abs_imag: report_spectrum.max_abs_imag,
        min_real: report_spectrum.min_real,
        z_matrix: z_matrix_test(fick.matrix()),
    };
    emit(&output, &render_json(&report)?)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Serialize)]
struct SimulateSummary {
    steps: usize,
    t_final: f64,
    dt: f64,
    min_fraction_seen: f64,
    min_zeta_ratio: f64,
    monitors_csv: String,
    profile_csv: String,
}

fn sim_closure(doc: &ScenarioDocument, state: &MixtureState) -> CliResult<SimClosure> {
    Ok(match load_closure(doc, state)? {
        LoadedClosure::Onsager(oc) => SimClosure::Onsager(oc),
        LoadedClosure::MaxwellStefan(msc) => SimClosure::MaxwellStefan(msc),
        LoadedClosure::Projected(pc) => SimClosure::Projected(pc),
        LoadedClosure::Darken(model) => SimClosure::Darken(model),
    })
}

fn format_float(v: f64) -> String {
    format!("{v}")
}

fn run_simulate(input: PathBuf, output: PathBuf) -> CliResult<()> {
    let doc = read_document(&input)?;
    let sim_doc = doc
        .sim
        .as_ref()
        .ok_or_else(|| validation("simulate needs a sim section"))?
        .clone();
    let n = doc.species.len();

    // Initial profile: explicit per-cell rows, otherwise the uniform
    // composition replicated.
    let profile = match (&doc.state.profile, &doc.state.y) {
        (Some(p), _) => {
            if p.n_cells != sim_doc.n_cells {
                return Err(validation(format!(
                    "profile has {} rows but the sim section asks for {} cells",
                    p.n_cells, sim_doc.n_cells
                )));
            }
            if p.data.len() != p.n_cells * n {
                return Err(validation(format!(
                    "profile data length {} does not match {} cells x {} species",
                    p.data.len(),
                    p.n_cells,
                    n
                )));
            }
            DMatrix::from_row_slice(p.n_cells, n, &p.data)
        }
        (None, Some(y)) => {
            if y.len() != n {
                return Err(validation(format!(
                    "composition has {} entries for {n} species",
                    y.len()
                )));
            }
            DMatrix::from_fn(sim_doc.n_cells, n, |_, i| y[i])
        }
        (None, None) => {
            return Err(validation("state needs either y or a profile"));
        }
    };

    // Closure validation uses the mean composition.
    let mean_y = DVector::from_fn(n, |i, _| {
        (0..sim_doc.n_cells).map(|c| profile[(c, i)]).sum::<f64>() / sim_doc.n_cells as f64
    });
    let mean_state = MixtureState::new(
        doc.state.temperature,
        doc.state.rho,
        molar_masses(&doc),
        mean_y,
    )?;
    mean_state.require_strict()?;
    let closure = sim_closure(&doc, &mean_state)?;

    let config = SimConfig {
        length: sim_doc.length,
        n_cells: sim_doc.n_cells,
        dt: sim_doc.dt,
        t_end: sim_doc.t_end,
        output_every: sim_doc.output_every,
        temperature: doc.state.temperature,
        density: doc.state.rho,
        molar_mass: molar_masses(&doc),
        closure,
        initial_profile: profile,
    };
    let mut sim = Simulation::new(config)?;
    sim.run()?;

    // Monitor series.
    let monitors_path = format!("{}.monitors.csv", output.display());
    let mut monitors = String::from("t,min_fraction");
    for i in 1..=n {
        let _ = write!(monitors, ",mass_{i}");
    }
    monitors.push_str(",zeta_total\n");
    for rec in sim.monitors() {
        let _ = write!(monitors, "{},{}", format_float(rec.t), format_float(rec.min_fraction));
        for i in 0..n {
            let _ = write!(monitors, ",{}", format_float(rec.mass[i]));
        }
        let _ = writeln!(monitors, ",{}", format_float(rec.zeta_total));
    }
    fs::write(&monitors_path, monitors)?;

    // Final profile snapshot.
    let profile_path = format!("{}.profile.csv", output.display());
    let (z, y) = sim.profile();
    let mut profile_csv = String::from("z");
    for i in 1..=n {
        let _ = write!(profile_csv, ",y_{i}");
    }
    profile_csv.push('\n');
    for c in 0..sim.n_cells() {
        let _ = write!(profile_csv, "{}", format_float(z[c]));
        for i in 0..n {
            let _ = write!(profile_csv, ",{}", format_float(y[(c, i)]));
        }
        profile_csv.push('\n');
    }
    fs::write(&profile_path, profile_csv)?;

    let summary = SimulateSummary {
        steps: sim.steps(),
        t_final: sim.time(),
        dt: sim.dt(),
        min_fraction_seen: sim.min_fraction_seen(),
        min_zeta_ratio: sim.min_zeta_ratio(),
        monitors_csv: monitors_path,
        profile_csv: profile_path,
    };
    print!("{}", render_json(&summary)?);
    Ok(())
}

// ---------------------------------------------------------------------------

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Convert {
            input,
            output,
            target,
            probes,
            seed,
            strict,
        } => run_convert(input, output, target, probes, seed, strict),
        Command::Check {
            input,
            output,
            probes,
            seed,
            strict,
        } => run_check(input, output, probes, seed, strict),
        Command::Darken { input, output } => run_darken(input, output),
        Command::Counterexample { a, y0, output } => run_counterexample(a, y0, output),
        Command::Fickian { input, output } => run_fickian(input, output),
        Command::Simulate { input, output } => run_simulate(input, output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, message) = match &err {
                CliError::Validation(m) => (2u8, m.clone()),
                CliError::Internal(m) => (1, m.clone()),
                CliError::Strict(m) => (3, m.clone()),
            };
            let payload = serde_json::json!({
                "error": { "code": code, "message": message }
            });
            eprintln!("{payload}");
            ExitCode::from(code)
        }
    }
}
