//! Shared helpers for integration tests: random tensors, random reference
//! states with exact cumulants, and random normal-ordered operators.

#![allow(dead_code)]

use ndarray::{Array2, Array4};
use qdsrg::cumulants::{cumulants_from_rdms, CumulantSet, L3Policy};
use qdsrg::dsrg::{ManyBodyOperator, Vacuum};
use qdsrg::fcidump::SpinOrbitalSpace;
use qdsrg::fockspace::{compute_rdms, enumerate_determinants, CIWavefunction, Determinant};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub type Mat = Array2<f64>;
pub type T4 = Array4<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_shape_fn((n, n), |_| rng.random_range(-scale..scale))
}

pub fn random_symmetric(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Mat {
    let a = random_mat(n, scale, rng);
    0.5 * (&a + &a.t())
}

/// Random tensor antisymmetric in both index pairs.
pub fn random_antisym_t4(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> T4 {
    let mut t = T4::zeros((n, n, n, n));
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    t[[p, q, r, s]] = rng.random_range(-scale..scale);
                }
            }
        }
    }
    let mut out = T4::zeros((n, n, n, n));
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    out[[p, q, r, s]] = 0.25
                        * (t[[p, q, r, s]] - t[[q, p, r, s]] - t[[p, q, s, r]]
                            + t[[q, p, s, r]]);
                }
            }
        }
    }
    out
}

/// Additionally Hermitian: v[pqrs] = v[rspq].
pub fn random_antisym_hermitian_t4(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> T4 {
    let a = random_antisym_t4(n, scale, rng);
    let mut out = T4::zeros((n, n, n, n));
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    out[[p, q, r, s]] = 0.5 * (a[[p, q, r, s]] + a[[r, s, p, q]]);
                }
            }
        }
    }
    out
}

/// All-active spin-orbital space over `n` spin orbitals.
pub fn all_active_space(n: usize) -> SpinOrbitalSpace {
    SpinOrbitalSpace {
        core: vec![],
        active: (0..n).collect(),
        virtual_: vec![],
    }
}

/// Random normalized CI state in the (n_alpha, n_beta) sector.
pub fn random_state(
    n_spinorb: usize,
    n_alpha: usize,
    n_beta: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Determinant>, CIWavefunction) {
    let dets = enumerate_determinants(n_spinorb, n_alpha, n_beta).unwrap();
    let mut coeff: Vec<f64> = (0..dets.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm: f64 = coeff.iter().map(|c| c * c).sum::<f64>().sqrt();
    for c in coeff.iter_mut() {
        *c /= norm;
    }
    let wfn = CIWavefunction {
        determinants: dets.clone(),
        coefficients: coeff,
        energy: 0.0,
    };
    (dets, wfn)
}

/// Exact cumulants (through λ3) of a random CI state on an all-active space.
pub fn random_state_cumulants(
    n_spinorb: usize,
    n_alpha: usize,
    n_beta: usize,
    rng: &mut ChaCha8Rng,
) -> (CumulantSet, CIWavefunction) {
    let (_dets, wfn) = random_state(n_spinorb, n_alpha, n_beta, rng);
    let rdms = compute_rdms(&wfn, n_spinorb, 3).unwrap();
    let cum = cumulants_from_rdms(&rdms, &all_active_space(n_spinorb), L3Policy::Exact).unwrap();
    (cum, wfn)
}

/// Formal cumulant set with arbitrary tensors (not necessarily N-representable).
pub fn synthetic_cumulants(n: usize, l1: Mat, l2: T4) -> CumulantSet {
    CumulantSet::new(
        all_active_space(n),
        l1,
        l2,
        None,
        qdsrg::cumulants::TruncationPolicy::Exact,
        L3Policy::Zero,
    )
}

/// Random generalized-ordered operator with the given reference id.
pub fn random_gno_operator(n: usize, cum: &CumulantSet, scale: f64, rng: &mut ChaCha8Rng) -> ManyBodyOperator {
    ManyBodyOperator {
        scalar: rng.random_range(-1.0..1.0),
        one_body: random_mat(n, scale, rng),
        two_body: random_antisym_t4(n, scale, rng),
        vacuum: Vacuum::Gno(cum.id),
    }
}

/// Hermitian variant.
pub fn random_hermitian_gno(n: usize, cum: &CumulantSet, scale: f64, rng: &mut ChaCha8Rng) -> ManyBodyOperator {
    ManyBodyOperator {
        scalar: rng.random_range(-1.0..1.0),
        one_body: random_symmetric(n, scale, rng),
        two_body: random_antisym_hermitian_t4(n, scale, rng),
        vacuum: Vacuum::Gno(cum.id),
    }
}

/// Anti-Hermitian variant (zero scalar).
pub fn random_antihermitian_gno(n: usize, cum: &CumulantSet, scale: f64, rng: &mut ChaCha8Rng) -> ManyBodyOperator {
    let a = random_mat(n, scale, rng);
    let one = &a - &a.t();
    let t = random_antisym_t4(n, scale, rng);
    let mut two = T4::zeros((n, n, n, n));
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    two[[p, q, r, s]] = t[[p, q, r, s]] - t[[r, s, p, q]];
                }
            }
        }
    }
    ManyBodyOperator {
        scalar: 0.0,
        one_body: one,
        two_body: two,
        vacuum: Vacuum::Gno(cum.id),
    }
}

pub fn max_component_dev(a: &ManyBodyOperator, b: &ManyBodyOperator) -> f64 {
    a.max_deviation(b)
}

/// All determinants with `k` electrons, any spin split. Particle-conserving
/// operators leave this sector invariant, so projected matrix products equal
/// projected products of operators.
pub fn full_sector(n_spinorb: usize, k: usize) -> Vec<Determinant> {
    let mut out = Vec::new();
    let mut bits: Vec<usize> = (0..k).collect();
    loop {
        let mut d = 0u64;
        for &b in &bits {
            d |= 1 << b;
        }
        out.push(Determinant(d));
        let mut i = k as isize - 1;
        while i >= 0 && bits[i as usize] == n_spinorb - k + i as usize {
            i -= 1;
        }
        if i < 0 {
            break;
        }
        let i = i as usize;
        bits[i] += 1;
        for j in (i + 1)..k {
            bits[j] = bits[j - 1] + 1;
        }
    }
    out
}

/// Embeds a CI state's coefficients into a larger determinant list.
pub fn embed_coefficients(wfn: &CIWavefunction, dets: &[Determinant]) -> Vec<f64> {
    dets.iter()
        .map(|d| {
            wfn.determinants
                .iter()
                .position(|x| x == d)
                .map(|i| wfn.coefficients[i])
                .unwrap_or(0.0)
        })
        .collect()
}

pub fn quadratic_form(m: &Mat, c: &[f64]) -> f64 {
    let n = c.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += c[i] * m[[i, j]] * c[j];
        }
    }
    acc
}
