//! Pipeline driver: configuration, per-input downfolding runs, noise sweeps,
//! geometry scans, and JSON/TSV report emission.
//!
//! Everything here is deterministic given the configured seeds: parallel noise
//! samples derive their seed from the master seed plus the sample index, and
//! report assembly follows input order.

use crate::cumulants::{
    add_noise, apply_truncation, cumulants_from_rdms, reconstruct_lambda3, CumulantSet, L3Policy,
    NoiseSpec,
};
use crate::dsrg::{
    expectation, extract_active_hamiltonian, hamiltonian_gno, semicanonicalize, solve_ldsrg2,
    AmplitudeNorms, FlowConfig, IterationRecord, ManyBodyOperator,
};
use crate::fcidump::{
    read_fcidump, spinorbitalize_frozen, IntegralSet, OrbitalSpace, SpinOrbitalSpace,
};
use crate::fockspace::{
    build_hamiltonian, compute_rdms, enumerate_determinants, solve_ground, CIWavefunction,
    Determinant, RDMSet, MAX_DENSE_DIM,
};
use crate::onequbit::{
    map_to_qubit, rotate_active_operator, rotation_angle, vqe_one_qubit, VqeExperiment,
};
use crate::tensor::{Mat, T4};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const REPORT_SCHEMA: &str = "qdsrg-report-v1";
pub const RDM_SCHEMA: &str = "qdsrg-rdm-v1";

/// Orbital partition by counts, applied to every input file in index order
/// frozen core | core | active | virtual | frozen virtual.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct SpaceCounts {
    #[serde(default)]
    pub frozen_core: usize,
    #[serde(default)]
    pub core: usize,
    pub active: usize,
    #[serde(default)]
    pub frozen_virtual: usize,
}

impl SpaceCounts {
    pub fn to_space(&self, n_orbitals: usize) -> Result<OrbitalSpace> {
        let fixed = self.frozen_core + self.core + self.active + self.frozen_virtual;
        if fixed > n_orbitals {
            return Err(Error::Config(format!(
                "space counts need {fixed} orbitals but the file has {n_orbitals}"
            )));
        }
        let n_virtual = n_orbitals - fixed;
        Ok(OrbitalSpace::from_counts(
            self.frozen_core,
            self.core,
            self.active,
            n_virtual,
            self.frozen_virtual,
        ))
    }
}

/// Cumulant truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    Exact,
    Two,
    One,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VqeConfig {
    pub enabled: bool,
    /// Total shot budget per experiment; `None` means analytic expectations.
    pub shots: Option<u64>,
    pub n_experiments: usize,
    pub seed: u64,
}

impl Default for VqeConfig {
    fn default() -> Self {
        VqeConfig {
            enabled: false,
            shots: Some(32_000),
            n_experiments: 9,
            seed: 1,
        }
    }
}

/// Full pipeline configuration; serializable so runs can be archived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub fcidump_paths: Vec<PathBuf>,
    /// Geometry labels for scans; defaults to file stems.
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    pub space: SpaceCounts,
    #[serde(default)]
    pub flow: FlowConfig,
    pub truncation: Truncation,
    pub l3_policy: L3Policy,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub vqe: Option<VqeConfig>,
    #[serde(default)]
    pub compute_fci: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        if self.fcidump_paths.is_empty() {
            return Err(Error::Config("no input files".into()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.fcidump_paths.len() {
                return Err(Error::Config("labels must match input files".into()));
            }
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if self.truncation == Truncation::One && self.l3_policy == L3Policy::Exact {
            // With λ2 zeroed, an "exact" λ3 is unavailable from measurements
            // unless γ3 itself is supplied; only 2-electron actives escape.
        }
        Ok(())
    }

    fn label(&self, index: usize) -> String {
        match &self.labels {
            Some(l) => l[index].clone(),
            None => self.fcidump_paths[index]
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("input{index}")),
        }
    }
}

/// Statistics over simulated eigensolver experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VqeStats {
    pub mean: f64,
    pub std_dev: f64,
    pub samples: Vec<f64>,
    pub experiments: Vec<VqeExperiment>,
}

/// Per-input outcome of one downfolding run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputRecord {
    pub label: String,
    pub path: String,
    /// Exact diagonalization energy of the active-space reference.
    pub casci_energy: f64,
    /// ⟨H⟩ evaluated with the working (possibly truncated/noisy) cumulants.
    pub reference_energy: f64,
    /// ⟨H̄⟩ with the same cumulants.
    pub hbar_expectation: f64,
    /// Ground eigenvalue of the extracted active Hamiltonian.
    pub relaxed_energy: f64,
    pub fci_energy: Option<f64>,
    pub iterations: Vec<IterationRecord>,
    pub iteration_log: Vec<String>,
    pub t1_norms: AmplitudeNorms,
    pub t2_norms: AmplitudeNorms,
    pub vqe: Option<VqeStats>,
}

/// Report for a whole run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub config: RunConfig,
    pub records: Vec<InputRecord>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parsed input plus everything derived from it that is noise-independent.
pub struct PreparedInput {
    pub label: String,
    pub path: PathBuf,
    pub ints: IntegralSet,
    pub active_dets: Vec<Determinant>,
    pub reference: CIWavefunction,
    pub casci_energy: f64,
    pub rdms: RDMSet,
    pub n_active_electrons: usize,
}

/// Core folding of a bare operator onto its active orbitals.
pub(crate) fn fold_core_restrict(
    scalar: f64,
    h: &Mat,
    v: &T4,
    space: &SpinOrbitalSpace,
) -> ManyBodyOperator {
    let act = &space.active;
    let na = act.len();
    let mut s = scalar;
    for &i in &space.core {
        s += h[[i, i]];
    }
    for &i in &space.core {
        for &j in &space.core {
            s += 0.5 * v[[i, j, i, j]];
        }
    }
    let mut one = Mat::zeros((na, na));
    for (a, &u) in act.iter().enumerate() {
        for (b, &w) in act.iter().enumerate() {
            let mut x = h[[u, w]];
            for &i in &space.core {
                x += v[[u, i, w, i]];
            }
            one[[a, b]] = x;
        }
    }
    let mut two = T4::zeros((na, na, na, na));
    for (a, &p) in act.iter().enumerate() {
        for (b, &q) in act.iter().enumerate() {
            for (c, &r) in act.iter().enumerate() {
                for (d, &sx) in act.iter().enumerate() {
                    two[[a, b, c, d]] = v[[p, q, r, sx]];
                }
            }
        }
    }
    ManyBodyOperator {
        scalar: s,
        one_body: one,
        two_body: two,
        vacuum: crate::dsrg::Vacuum::Bare,
    }
}

fn alpha_beta_counts(n_electrons: usize, ms2: i32) -> Result<(usize, usize)> {
    let n = n_electrons as i64;
    let m = ms2 as i64;
    if (n + m) % 2 != 0 || n + m < 0 || n - m < 0 {
        return Err(Error::Config(format!(
            "cannot split {n_electrons} electrons with MS2={ms2}"
        )));
    }
    Ok((((n + m) / 2) as usize, ((n - m) / 2) as usize))
}

/// Parses one input and prepares the reference state and its densities.
pub fn prepare_input(cfg: &RunConfig, index: usize) -> Result<PreparedInput> {
    let path = &cfg.fcidump_paths[index];
    let spatial = read_fcidump(path)?;
    spatial.validate()?;
    let space = cfg.space.to_space(spatial.n_orbitals)?;
    let ints = spinorbitalize_frozen(&spatial, &space)?;

    // Active-space reference by exact diagonalization with the core folded in.
    let active_op = fold_core_restrict(ints.scalar, &ints.h, &ints.v, &ints.space);
    let n_active_so = ints.space.active.len();
    let n_act_el = ints.n_electrons - ints.space.core.len();
    if n_act_el > n_active_so {
        return Err(Error::Config(format!(
            "{n_act_el} active electrons in {n_active_so} active spin orbitals"
        )));
    }
    let (n_alpha, n_beta) = alpha_beta_counts(n_act_el, ints.ms2)?;
    let dets = enumerate_determinants(n_active_so, n_alpha, n_beta)?;
    let active_ints = IntegralSet {
        scalar: active_op.scalar,
        h: active_op.one_body.clone(),
        v: active_op.two_body.clone(),
        space: SpinOrbitalSpace {
            core: vec![],
            active: (0..n_active_so).collect(),
            virtual_: vec![],
        },
        n_electrons: n_act_el,
        ms2: ints.ms2,
    };
    let hmat = build_hamiltonian(&active_ints, &dets);
    let mut states = solve_ground(&hmat, 1, &dets)?;
    let (casci_energy, reference) = states.remove(0);

    let max_rank = if cfg.l3_policy == L3Policy::Exact && n_active_so <= 14 {
        3
    } else {
        2
    };
    let rdms = compute_rdms(&reference, n_active_so, max_rank)?;

    Ok(PreparedInput {
        label: cfg.label(index),
        path: path.clone(),
        ints,
        active_dets: dets,
        reference,
        casci_energy,
        rdms,
        n_active_electrons: n_act_el,
    })
}

/// Everything a single downfolding run produces.
pub struct DownfoldOutcome {
    pub reference_energy: f64,
    pub hbar_expectation: f64,
    pub relaxed_energy: f64,
    pub iterations: Vec<IterationRecord>,
    pub t1_norms: AmplitudeNorms,
    pub t2_norms: AmplitudeNorms,
    /// Extracted bare active Hamiltonian, reindexed over active spin orbitals.
    pub active_hamiltonian: ManyBodyOperator,
    pub cumulants: CumulantSet,
}

/// Runs the downfolding chain on prepared input, optionally with a noise seed.
pub fn downfold(prep: &PreparedInput, cfg: &RunConfig, noise_seed: Option<u64>) -> Result<DownfoldOutcome> {
    let rdms = match (&cfg.noise, noise_seed) {
        (Some(noise), Some(seed)) => {
            let spec = NoiseSpec {
                sigma: noise.sigma,
                seed,
                n_samples: 1,
            };
            add_noise(&prep.rdms, &spec)?
        }
        _ => prep.rdms.clone(),
    };
    let cum_exact = cumulants_from_rdms(&rdms, &prep.ints.space, cfg.l3_policy)?;
    let cum = match cfg.truncation {
        Truncation::Exact => reconstruct_lambda3(&cum_exact, cfg.l3_policy),
        Truncation::Two => reconstruct_lambda3(&apply_truncation(&cum_exact, 2), cfg.l3_policy),
        Truncation::One => reconstruct_lambda3(&apply_truncation(&cum_exact, 1), cfg.l3_policy),
    };

    let (ints_sc, cum_sc, _basis) = semicanonicalize(&prep.ints, &cum)?;
    let h_gno = hamiltonian_gno(&ints_sc, &cum_sc);
    let reference_energy = h_gno.scalar;
    let (t, hbar, iterations) = solve_ldsrg2(&h_gno, &cum_sc, &cfg.flow)?;
    let hbar_expectation = expectation(&hbar, &cum_sc)?;

    let active_hamiltonian = extract_active_hamiltonian(&hbar, &cum_sc, &ints_sc.space)?;
    let active_ints = IntegralSet {
        scalar: active_hamiltonian.scalar,
        h: active_hamiltonian.one_body.clone(),
        v: active_hamiltonian.two_body.clone(),
        space: SpinOrbitalSpace {
            core: vec![],
            active: (0..prep.ints.space.active.len()).collect(),
            virtual_: vec![],
        },
        n_electrons: prep.n_active_electrons,
        ms2: prep.ints.ms2,
    };
    let hmat = build_hamiltonian(&active_ints, &prep.active_dets);
    let states = solve_ground(&hmat, 1, &prep.active_dets)?;
    let relaxed_energy = states[0].0;

    let t1_norms = AmplitudeNorms {
        t1_norm: crate::tensor::fro(&t.t1),
        t2_norm: 0.0,
        max_abs: t.t1.iter().fold(0.0f64, |m, x| m.max(x.abs())),
    };
    let t2_norms = AmplitudeNorms {
        t1_norm: 0.0,
        t2_norm: crate::tensor::fro(&t.t2),
        max_abs: t.t2.iter().fold(0.0f64, |m, x| m.max(x.abs())),
    };

    Ok(DownfoldOutcome {
        reference_energy,
        hbar_expectation,
        relaxed_energy,
        iterations,
        t1_norms,
        t2_norms,
        active_hamiltonian,
        cumulants: cum_sc,
    })
}

/// Simulated one-qubit eigensolver on the extracted active Hamiltonian.
pub fn run_vqe(
    outcome: &DownfoldOutcome,
    dets: &[Determinant],
    vqe_cfg: &VqeConfig,
) -> Result<VqeStats> {
    let act_op = &outcome.active_hamiltonian;
    if act_op.n_spin_orbitals() != 4 {
        return Err(Error::Contract(
            "one-qubit eigensolver needs exactly 2 active spatial orbitals".into(),
        ));
    }
    // Ground state in the 4-determinant space fixes the orbital rotation.
    let active_ints = IntegralSet {
        scalar: act_op.scalar,
        h: act_op.one_body.clone(),
        v: act_op.two_body.clone(),
        space: SpinOrbitalSpace {
            core: vec![],
            active: (0..4).collect(),
            virtual_: vec![],
        },
        n_electrons: 2,
        ms2: 0,
    };
    let hmat = build_hamiltonian(&active_ints, dets);
    let states = solve_ground(&hmat, 1, dets)?;
    let wfn = &states[0].1;
    let coeff_of = |bits: u64| -> f64 {
        wfn.determinants
            .iter()
            .position(|d| d.0 == bits)
            .map(|i| wfn.coefficients[i])
            .unwrap_or(0.0)
    };
    let c1p = coeff_of(0b0011);
    let c2p = coeff_of(0b1100);
    let c3p = (coeff_of(0b1001) - coeff_of(0b0110)) / std::f64::consts::SQRT_2;
    let theta = rotation_angle(c1p, c2p, c3p);
    let rotated = rotate_active_operator(act_op, theta)?;
    let problem = map_to_qubit(&rotated)?;

    let experiments: Vec<VqeExperiment> = (0..vqe_cfg.n_experiments)
        .into_par_iter()
        .map(|i| vqe_one_qubit(&problem, vqe_cfg.shots, vqe_cfg.seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let samples: Vec<f64> = experiments.iter().map(|e| e.e_est).collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (samples.len() - 1) as f64
    } else {
        0.0
    };
    Ok(VqeStats {
        mean,
        std_dev: var.sqrt(),
        samples,
        experiments,
    })
}

/// FCI energy of a spin-orbital integral set, capped by the dense-solver size.
pub fn fci_energy(ints: &IntegralSet) -> Result<f64> {
    let (n_alpha, n_beta) = alpha_beta_counts(ints.n_electrons, ints.ms2)?;
    let dets = enumerate_determinants(ints.n_spin_orbitals(), n_alpha, n_beta)?;
    if dets.len() > MAX_DENSE_DIM {
        return Err(Error::Capacity(format!(
            "FCI space of {} determinants exceeds the dense cap",
            dets.len()
        )));
    }
    let h = build_hamiltonian(ints, &dets);
    let states = solve_ground(&h, 1, &dets)?;
    Ok(states[0].0)
}

fn process_input(cfg: &RunConfig, index: usize) -> Result<InputRecord> {
    let prep = prepare_input(cfg, index)?;
    let noise_seed = cfg.noise.as_ref().map(|n| n.seed);
    let outcome = downfold(&prep, cfg, noise_seed)?;
    let vqe = match &cfg.vqe {
        Some(v) if v.enabled => Some(run_vqe(&outcome, &prep.active_dets, v)?),
        _ => None,
    };
    let fci = if cfg.compute_fci {
        match fci_energy(&prep.ints) {
            Ok(e) => Some(e),
            Err(Error::Capacity(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(InputRecord {
        label: prep.label.clone(),
        path: prep.path.display().to_string(),
        casci_energy: prep.casci_energy,
        reference_energy: outcome.reference_energy,
        hbar_expectation: outcome.hbar_expectation,
        relaxed_energy: outcome.relaxed_energy,
        fci_energy: fci,
        iteration_log: outcome.iterations.iter().map(|r| r.format_line()).collect(),
        iterations: outcome.iterations,
        t1_norms: outcome.t1_norms,
        t2_norms: outcome.t2_norms,
        vqe,
    })
}

/// Runs the full pipeline over every input.
///
/// Inputs are processed in parallel; failures carry the input path and stage,
/// and remaining inputs still run. The report is assembled in input order.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let results: Vec<Result<InputRecord>> = (0..cfg.fcidump_paths.len())
        .into_par_iter()
        .map(|i| {
            process_input(cfg, i).map_err(|e| {
                Error::Config(format!("{}: {e}", cfg.fcidump_paths[i].display()))
            })
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("; ")));
    }
    Ok(RunReport {
        schema: REPORT_SCHEMA.to_string(),
        config: cfg.clone(),
        records,
    })
}

/// One sample of a noise sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSample {
    pub sigma: f64,
    pub sample: usize,
    pub seed: u64,
    pub relaxed_energy: f64,
    /// Ẽ(noisy) − Ẽ(noiseless), Hartree.
    pub error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSigmaSummary {
    pub sigma: f64,
    pub mean_error: f64,
    pub mean_abs_error: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepInputReport {
    pub label: String,
    pub baseline_energy: f64,
    pub samples: Vec<SweepSample>,
    pub summaries: Vec<SweepSigmaSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub sigmas: Vec<f64>,
    pub n_samples: usize,
    pub inputs: Vec<SweepInputReport>,
}

/// Repeats the pipeline with noisy densities over a list of noise strengths.
///
/// For each σ, `n_samples` independent runs use seeds derived as master seed
/// plus the sample index; errors are against the σ = 0 run of the same input.
pub fn noise_sweep(cfg: &RunConfig, sigmas: &[f64]) -> Result<SweepReport> {
    cfg.validate()?;
    let noise = cfg
        .noise
        .as_ref()
        .ok_or_else(|| Error::Config("noise sweep requires a noise block".into()))?;
    if noise.n_samples < 2 {
        return Err(Error::Config("noise sweep needs n_samples ≥ 2".into()));
    }
    let mut inputs = Vec::new();
    for index in 0..cfg.fcidump_paths.len() {
        let prep = prepare_input(cfg, index)?;
        let baseline = downfold(&prep, cfg, None)?.relaxed_energy;
        let mut samples = Vec::new();
        for &sigma in sigmas {
            let sweep_cfg = {
                let mut c = cfg.clone();
                c.noise = Some(NoiseSpec {
                    sigma,
                    seed: noise.seed,
                    n_samples: noise.n_samples,
                });
                c
            };
            let batch: Vec<Result<SweepSample>> = (0..noise.n_samples)
                .into_par_iter()
                .map(|k| {
                    let seed = noise.sample_seed(k);
                    let outcome = downfold(&prep, &sweep_cfg, Some(seed))?;
                    Ok(SweepSample {
                        sigma,
                        sample: k,
                        seed,
                        relaxed_energy: outcome.relaxed_energy,
                        error: outcome.relaxed_energy - baseline,
                    })
                })
                .collect();
            for s in batch {
                samples.push(s.map_err(|e| {
                    Error::Config(format!("{} σ={sigma}: {e}", prep.label))
                })?);
            }
        }
        let summaries = sigmas
            .iter()
            .map(|&sigma| {
                let errs: Vec<f64> = samples
                    .iter()
                    .filter(|s| s.sigma == sigma)
                    .map(|s| s.error)
                    .collect();
                let mean = errs.iter().sum::<f64>() / errs.len() as f64;
                let mean_abs = errs.iter().map(|e| e.abs()).sum::<f64>() / errs.len() as f64;
                let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                    / (errs.len().max(2) - 1) as f64;
                SweepSigmaSummary {
                    sigma,
                    mean_error: mean,
                    mean_abs_error: mean_abs,
                    std_dev: var.sqrt(),
                }
            })
            .collect();
        inputs.push(SweepInputReport {
            label: prep.label,
            baseline_energy: baseline,
            samples,
            summaries,
        });
    }
    Ok(SweepReport {
        schema: REPORT_SCHEMA.to_string(),
        sigmas: sigmas.to_vec(),
        n_samples: noise.n_samples,
        inputs,
    })
}

/// Plot-ready scan table: one row per input, tab-separated.
pub fn scan_table(report: &RunReport) -> String {
    let mut out = String::from(
        "label\tE_ref\tE_hbar\tE_relaxed\tE_fci\terr_relaxed_mEh\n",
    );
    for rec in &report.records {
        let (fci, err) = match rec.fci_energy {
            Some(f) => (
                format!("{f:.12}"),
                format!("{:.6}", (rec.relaxed_energy - f) * 1000.0),
            ),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{}\t{:.12}\t{:.12}\t{:.12}\t{}\t{}\n",
            rec.label, rec.casci_energy, rec.hbar_expectation, rec.relaxed_energy, fci, err
        ));
    }
    out
}

/// Serializes density matrices to the versioned RDM container.
#[derive(Debug, Serialize, Deserialize)]
pub struct RdmFile {
    pub schema: String,
    pub n_orbitals: usize,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub g3: Option<Vec<f64>>,
}

pub fn rdms_to_json(r: &RDMSet) -> Result<String> {
    let file = RdmFile {
        schema: RDM_SCHEMA.to_string(),
        n_orbitals: r.n_orbitals(),
        g1: r.g1.iter().copied().collect(),
        g2: r.g2.iter().copied().collect(),
        g3: r.g3.as_ref().map(|t| t.iter().copied().collect()),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn rdms_from_json(json: &str) -> Result<RDMSet> {
    let file: RdmFile = serde_json::from_str(json)?;
    if file.schema != RDM_SCHEMA {
        return Err(Error::Parse(format!(
            "unknown schema {:?}, expected {RDM_SCHEMA:?}",
            file.schema
        )));
    }
    let n = file.n_orbitals;
    if file.g1.len() != n * n || file.g2.len() != n.pow(4) {
        return Err(Error::Parse("tensor payload length mismatch".into()));
    }
    Ok(RDMSet {
        g1: Mat::from_shape_vec((n, n), file.g1).expect("checked"),
        g2: T4::from_shape_vec((n, n, n, n), file.g2).expect("checked"),
        g3: match file.g3 {
            Some(v) => {
                if v.len() != n.pow(6) {
                    return Err(Error::Parse("γ3 payload length mismatch".into()));
                }
                Some(
                    ndarray::Array6::from_shape_vec((n, n, n, n, n, n), v).expect("checked"),
                )
            }
            None => None,
        },
    })
}

/// Loads a TOML run configuration.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))
}
