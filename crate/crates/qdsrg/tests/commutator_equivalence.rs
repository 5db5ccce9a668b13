//! Cross-validation of the two commutator paths: the pattern-enumeration
//! oracle against exact determinant-space matrix algebra, and the factorized
//! production engine against the oracle.

mod common;

use common::*;
use qdsrg::dsrg::commutator_12;
use qdsrg::fockspace::{operator_matrix, wick_commutator_oracle};

/// [O,A] for one-body operators has no rank-3 part, so the oracle result must
/// reproduce the exact commutator matrix on any invariant sector.
#[test]
fn oracle_exact_matrix_for_one_body_inputs() {
    let mut r = rng(11);
    for trial in 0..6 {
        let n = 6;
        let (cum, _wfn) = random_state_cumulants(n, 1, 1, &mut r);
        let mut o = random_gno_operator(n, &cum, 1.0, &mut r);
        let mut a = random_gno_operator(n, &cum, 1.0, &mut r);
        o.two_body.fill(0.0);
        a.two_body.fill(0.0);
        o.scalar = 0.0;
        a.scalar = 0.0;
        let c = wick_commutator_oracle(&o, &a, &cum).unwrap();

        let dets = full_sector(n, 2);
        let mo = operator_matrix(&o, &dets, Some(&cum)).unwrap();
        let ma = operator_matrix(&a, &dets, Some(&cum)).unwrap();
        let exact = mo.dot(&ma) - ma.dot(&mo);
        let via_oracle = operator_matrix(&c, &dets, Some(&cum)).unwrap();
        let dev = (&exact - &via_oracle)
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(dev < 1e-10, "trial {trial}: matrix deviation {dev:.3e}");
    }
}

/// With vacuum densities the ordering is bare and the discarded three-body
/// output annihilates every two-electron state, so the full matrix must match.
#[test]
fn oracle_exact_matrix_for_vacuum_densities_on_two_electrons() {
    let mut r = rng(23);
    for trial in 0..4 {
        let n = 6;
        let cum = synthetic_cumulants(
            n,
            Mat::zeros((n, n)),
            T4::zeros((n, n, n, n)),
        );
        let o = random_gno_operator(n, &cum, 1.0, &mut r);
        let a = random_gno_operator(n, &cum, 1.0, &mut r);
        let c = wick_commutator_oracle(&o, &a, &cum).unwrap();

        let dets = full_sector(n, 2);
        let mo = operator_matrix(&o, &dets, Some(&cum)).unwrap();
        let ma = operator_matrix(&a, &dets, Some(&cum)).unwrap();
        let exact = mo.dot(&ma) - ma.dot(&mo);
        let via_oracle = operator_matrix(&c, &dets, Some(&cum)).unwrap();
        let dev = (&exact - &via_oracle)
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(dev < 1e-10, "trial {trial}: matrix deviation {dev:.3e}");
    }
}

/// The scalar component is the reference expectation of the commutator; the
/// discarded three-body part has zero expectation by construction, so the CI
/// quadratic form is an exact check, λ3 terms included.
#[test]
fn oracle_scalar_matches_ci_expectation() {
    let mut r = rng(37);
    // (n_spinorb, n_alpha, n_beta): the 3-electron case carries a nonzero λ3.
    for &(n, na, nb) in &[(6usize, 1usize, 1usize), (8, 2, 1), (8, 2, 2)] {
        for trial in 0..3 {
            let (cum, wfn) = random_state_cumulants(n, na, nb, &mut r);
            let o = random_gno_operator(n, &cum, 1.0, &mut r);
            let a = random_gno_operator(n, &cum, 1.0, &mut r);
            let c = wick_commutator_oracle(&o, &a, &cum).unwrap();

            let dets = full_sector(n, na + nb);
            let mo = operator_matrix(&o, &dets, Some(&cum)).unwrap();
            let ma = operator_matrix(&a, &dets, Some(&cum)).unwrap();
            let exact = mo.dot(&ma) - ma.dot(&mo);
            let coeff = embed_coefficients(&wfn, &dets);
            let expect = quadratic_form(&exact, &coeff);
            assert!(
                (c.scalar - expect).abs() < 1e-10,
                "({n},{na},{nb}) trial {trial}: scalar {:.12e} vs CI {:.12e}",
                c.scalar,
                expect
            );
        }
    }
}

/// Production engine against the oracle, localized by which tensors are live.
#[test]
fn engine_matches_oracle_by_blocks() {
    let mut r = rng(53);
    let n = 6;
    let (cum_full, _) = random_state_cumulants(n, 1, 1, &mut r);
    let cum_nolambda = synthetic_cumulants(n, cum_full.l1.clone(), T4::zeros((n, n, n, n)));
    let cum_vacuum = synthetic_cumulants(n, Mat::zeros((n, n)), T4::zeros((n, n, n, n)));

    for (cname, cum) in [
        ("vacuum densities", &cum_vacuum),
        ("γ only", &cum_nolambda),
        ("full cumulants", &cum_full),
    ] {
        for (bname, keep_o1, keep_o2, keep_a1, keep_a2) in [
            ("1×1", true, false, true, false),
            ("1×2", true, false, false, true),
            ("2×1", false, true, true, false),
            ("2×2", false, true, false, true),
            ("full", true, true, true, true),
        ] {
            let mut o = random_gno_operator(n, cum, 1.0, &mut r);
            let mut a = random_gno_operator(n, cum, 1.0, &mut r);
            if !keep_o1 {
                o.one_body.fill(0.0);
            }
            if !keep_o2 {
                o.two_body.fill(0.0);
            }
            if !keep_a1 {
                a.one_body.fill(0.0);
            }
            if !keep_a2 {
                a.two_body.fill(0.0);
            }
            let via_oracle = wick_commutator_oracle(&o, &a, cum).unwrap();
            let via_engine = commutator_12(&o, &a, cum).unwrap();
            let d0 = (via_oracle.scalar - via_engine.scalar).abs();
            let d1 = (&via_oracle.one_body - &via_engine.one_body)
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            let d2 = (&via_oracle.two_body - &via_engine.two_body)
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(
                d0 < 1e-10 && d1 < 1e-10 && d2 < 1e-10,
                "[{cname}] block {bname}: dev scalar {d0:.3e}, 1-body {d1:.3e}, 2-body {d2:.3e}"
            );
        }
    }
}

/// λ3 feeds the scalar component only; exercised with a 3-electron reference.
#[test]
fn engine_matches_oracle_with_lambda3() {
    let mut r = rng(71);
    for trial in 0..3 {
        let n = 8;
        let (cum, _) = random_state_cumulants(n, 2, 1, &mut r);
        assert!(cum.has_l3());
        let o = random_gno_operator(n, &cum, 1.0, &mut r);
        let a = random_gno_operator(n, &cum, 1.0, &mut r);
        let via_oracle = wick_commutator_oracle(&o, &a, &cum).unwrap();
        let via_engine = commutator_12(&o, &a, &cum).unwrap();
        let dev = via_oracle.max_deviation(&via_engine);
        assert!(dev < 1e-10, "trial {trial}: max deviation {dev:.3e}");
    }
}

#[test]
fn engine_hermiticity_and_bilinearity() {
    let mut r = rng(97);
    let n = 6;
    let (cum, _) = random_state_cumulants(n, 1, 1, &mut r);
    let h = random_hermitian_gno(n, &cum, 1.0, &mut r);
    let a = random_antihermitian_gno(n, &cum, 0.3, &mut r);
    let c = commutator_12(&h, &a, &cum).unwrap();
    assert!(
        c.hermiticity_defect() < 1e-12,
        "commutator of Hermitian with anti-Hermitian must be Hermitian"
    );

    let c_scaled = commutator_12(&h.scaled(2.5), &a, &cum).unwrap();
    let dev = c_scaled.max_deviation(&c.scaled(2.5));
    assert!(dev < 1e-12, "bilinearity violated: {dev:.3e}");

    let zero = qdsrg::dsrg::ManyBodyOperator::zeros(n, a.vacuum);
    let c0 = commutator_12(&h, &zero, &cum).unwrap();
    assert!(c0.combined_norm() < 1e-14, "[H, 0] must vanish");
}
