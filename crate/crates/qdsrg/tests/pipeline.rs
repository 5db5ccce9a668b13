//! End-to-end pipeline tests on the 4-orbital hydrogen fixtures.

mod common;

use qdsrg::cumulants::L3Policy;
use qdsrg::driver::{
    downfold, fci_energy, noise_sweep, prepare_input, run_pipeline, RunConfig, SpaceCounts,
    Truncation,
};
use qdsrg::dsrg::{FlowConfig, FlowMode};
use qdsrg::fcidump::{read_fcidump, spinorbitalize_frozen, OrbitalSpace};
use std::path::PathBuf;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/fixtures/{name}"))
}

fn toy_config(s: f64, truncation: Truncation, l3: L3Policy) -> RunConfig {
    RunConfig {
        fcidump_paths: vec![fixture("h2_631g_r0750.fcidump")],
        labels: None,
        space: SpaceCounts {
            frozen_core: 0,
            core: 0,
            active: 2,
            frozen_virtual: 0,
        },
        flow: FlowConfig {
            s,
            mode: FlowMode::Iterated,
            ..FlowConfig::default()
        },
        truncation,
        l3_policy: l3,
        noise: None,
        vqe: None,
        compute_fci: true,
    }
}

#[test]
fn zero_flow_reproduces_casci() {
    let cfg = toy_config(0.0, Truncation::Exact, L3Policy::Exact);
    let report = run_pipeline(&cfg).unwrap();
    let rec = &report.records[0];
    assert!(
        (rec.relaxed_energy - rec.casci_energy).abs() < 1e-10,
        "relaxed {} vs CASCI {}",
        rec.relaxed_energy,
        rec.casci_energy
    );
    assert!((rec.hbar_expectation - rec.reference_energy).abs() < 1e-12);
}

#[test]
fn casci_matches_external_anchor() {
    // CASSCF(2,2) energy computed by the external generator.
    let cfg = toy_config(0.0, Truncation::Exact, L3Policy::Exact);
    let report = run_pipeline(&cfg).unwrap();
    let rec = &report.records[0];
    assert!(
        (rec.casci_energy - (-1.1463331528731915)).abs() < 1e-8,
        "CASCI {} vs generator anchor",
        rec.casci_energy
    );
    assert!(
        (rec.fci_energy.unwrap() - (-1.151688547779628)).abs() < 1e-8,
        "FCI {} vs generator anchor",
        rec.fci_energy.unwrap()
    );
}

#[test]
fn downfolding_improves_on_reference() {
    // The flow parameter controls how much dynamical correlation is folded
    // in: errors against FCI must shrink monotonically with s and always
    // improve on the bare reference.
    let mut errs = Vec::new();
    let mut fci = 0.0;
    for &s in &[0.5, 1.0, 2.0] {
        let cfg = toy_config(s, Truncation::Exact, L3Policy::Exact);
        let report = run_pipeline(&cfg).unwrap();
        let rec = &report.records[0];
        fci = rec.fci_energy.unwrap();
        let err_casci = (rec.casci_energy - fci).abs();
        let err_relaxed = (rec.relaxed_energy - fci).abs();
        assert!(
            err_relaxed < 0.5 * err_casci,
            "s={s}: CASCI err {err_casci:.6e}, relaxed err {err_relaxed:.6e}"
        );
        errs.push(err_relaxed);
    }
    assert!(
        errs[1] < errs[0] && errs[2] < errs[1],
        "errors must shrink with s: {errs:?}"
    );
    // What remains at s = 2 is the rank-truncation floor of this strongly
    // coupled little model, not missing flow.
    assert!(errs[2] < 2e-3, "s=2 error {:.3e} Eh", errs[2]);
    let _ = fci;
}

#[test]
fn truncated_cumulants_of_two_electron_reference_are_lossless_for_exact_gamma3() {
    // γ3 of a 2-electron state is exactly zero, so exact cumulants and the
    // level-2 truncation with γ3-zero reconstruction only differ through the
    // discarded off-diagonal λ2; the relaxed energies stay within a few mEh.
    let exact = run_pipeline(&toy_config(0.5, Truncation::Exact, L3Policy::Exact)).unwrap();
    let two = run_pipeline(&toy_config(0.5, Truncation::Two, L3Policy::Gamma3Zero)).unwrap();
    let de = (exact.records[0].relaxed_energy - two.records[0].relaxed_energy).abs();
    assert!(de < 5e-3, "2-truncation moved the energy by {de:.3e} Eh");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = toy_config(0.5, Truncation::Two, L3Policy::Gamma3Zero);
    let a = run_pipeline(&cfg).unwrap().to_json().unwrap();
    let b = run_pipeline(&cfg).unwrap().to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn iteration_log_format_is_stable() {
    let cfg = toy_config(0.5, Truncation::Exact, L3Policy::Exact);
    let report = run_pipeline(&cfg).unwrap();
    let line = &report.records[0].iteration_log[0];
    // "iter 1: E=-1.xxxxxxxxxxxx dE=... rms=... bch_terms=n"
    assert!(line.starts_with("iter 1: E=-1."), "log line: {line}");
    assert!(line.contains(" dE=") && line.contains(" rms=") && line.contains(" bch_terms="));
    let e_field = line.split("E=").nth(1).unwrap().split(' ').next().unwrap();
    let digits = e_field.split('.').nth(1).unwrap();
    assert_eq!(digits.len(), 12, "twelve decimals in {e_field}");
}

#[test]
fn frozen_virtual_orbitals_are_dropped() {
    let spatial = read_fcidump(fixture("h2_631g_r0750.fcidump")).unwrap();
    let space = OrbitalSpace::from_counts(0, 0, 2, 1, 1);
    let ints = spinorbitalize_frozen(&spatial, &space).unwrap();
    assert_eq!(ints.n_spin_orbitals(), 6);
    assert_eq!(ints.space.virtual_.len(), 2);
    let fci = fci_energy(&ints).unwrap();
    // truncating the virtual space raises the variational FCI energy
    assert!(fci > -1.151688547779628);
}

#[test]
fn noise_sweep_shape_and_zero_sigma() {
    let mut cfg = toy_config(0.5, Truncation::Two, L3Policy::Gamma3Zero);
    cfg.noise = Some(qdsrg::cumulants::NoiseSpec {
        sigma: 1e-3,
        seed: 7,
        n_samples: 4,
    });
    let sweep = noise_sweep(&cfg, &[0.0, 1e-3]).unwrap();
    let input = &sweep.inputs[0];
    assert_eq!(input.samples.len(), 2 * 4);
    for s in input.samples.iter().filter(|s| s.sigma == 0.0) {
        assert_eq!(s.error, 0.0, "σ = 0 must reproduce the baseline exactly");
    }
    let noisy: Vec<f64> = input
        .samples
        .iter()
        .filter(|s| s.sigma == 1e-3)
        .map(|s| s.error)
        .collect();
    assert!(noisy.iter().any(|e| e.abs() > 0.0));
    // distinct seeds gave distinct errors
    assert!(noisy.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn prepared_input_reference_is_normalized() {
    let cfg = toy_config(0.5, Truncation::Exact, L3Policy::Exact);
    let prep = prepare_input(&cfg, 0).unwrap();
    assert!((prep.reference.norm() - 1.0).abs() < 1e-12);
    let outcome = downfold(&prep, &cfg, None).unwrap();
    assert!(outcome.iterations.len() >= 2);
    let last = outcome.iterations.last().unwrap();
    assert!(last.de.abs() < cfg.flow.energy_convergence);
    assert!(last.rms < cfg.flow.residual_convergence);
}
