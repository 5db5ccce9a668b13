//! Exact diagonalization in small determinant spaces.
//!
//! Everything here is desk scale by design: determinants are `u64` bitsets,
//! the Hamiltonian is built densely by Slater–Condon rules, and the
//! eigensolver is a deterministic dense tridiagonalization. This module also
//! hosts the brute-force oracles the transformation engine is tested against.

mod oracle;

pub use oracle::wick_commutator_oracle;

use crate::cumulants::CumulantSet;
use crate::dsrg::{to_bare_operator, ManyBodyOperator, Vacuum};
use crate::fcidump::IntegralSet;
use crate::tensor::{symmetric_eigen, Mat, T4, T6};
use crate::{Error, Result};
use std::collections::HashMap;

/// Largest determinant space the enumerator will produce.
pub const MAX_DETERMINANTS: usize = 1_000_000;
/// Largest matrix the dense eigensolver accepts.
pub const MAX_DENSE_DIM: usize = 4000;

/// Occupation bitset over spin orbitals; bit `p` set means orbital `p` occupied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant(pub u64);

impl Determinant {
    pub fn occupied(&self, n_spinorb: usize) -> Vec<usize> {
        (0..n_spinorb).filter(|&p| self.0 >> p & 1 == 1).collect()
    }

    pub fn electron_count(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_occupied(&self, p: usize) -> bool {
        self.0 >> p & 1 == 1
    }

    /// Applies a_p. Sign is the parity of occupied orbitals below `p`.
    pub fn annihilate(&self, p: usize) -> Option<(Determinant, f64)> {
        if !self.is_occupied(p) {
            return None;
        }
        let below = (self.0 & ((1u64 << p) - 1)).count_ones();
        let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
        Some((Determinant(self.0 & !(1u64 << p)), sign))
    }

    /// Applies a†_p.
    pub fn create(&self, p: usize) -> Option<(Determinant, f64)> {
        if self.is_occupied(p) {
            return None;
        }
        let below = (self.0 & ((1u64 << p) - 1)).count_ones();
        let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
        Some((Determinant(self.0 | 1u64 << p), sign))
    }

    /// Number of spin orbitals in which two determinants differ, halved.
    pub fn excitation_degree(&self, other: &Determinant) -> u32 {
        (self.0 ^ other.0).count_ones() / 2
    }
}

/// Normalized CI expansion over an ordered determinant list.
#[derive(Debug, Clone)]
pub struct CIWavefunction {
    pub determinants: Vec<Determinant>,
    pub coefficients: Vec<f64>,
    /// Rayleigh quotient of the state, Hartree.
    pub energy: f64,
}

impl CIWavefunction {
    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Density matrices over the wavefunction's spin orbitals.
///
/// `g2[[p,q,r,s]]` is γ^{pq}_{rs} = ⟨a†_p a†_q a_s a_r⟩ and `g3` follows the
/// same reversed-annihilator convention.
#[derive(Debug, Clone)]
pub struct RDMSet {
    pub g1: Mat,
    pub g2: T4,
    pub g3: Option<T6>,
}

impl RDMSet {
    pub fn n_orbitals(&self) -> usize {
        self.g1.nrows()
    }

    /// Hermiticity, trace, pair antisymmetry, and the partial-trace rule.
    pub fn validate(&self, n_electrons: usize) -> Result<()> {
        let n = self.n_orbitals();
        if crate::tensor::symmetry_defect(&self.g1) > 1e-10 {
            return Err(Error::Inconsistent("γ1 not Hermitian".into()));
        }
        let trace: f64 = (0..n).map(|p| self.g1[[p, p]]).sum();
        if (trace - n_electrons as f64).abs() > 1e-8 {
            return Err(Error::Inconsistent(format!(
                "tr γ1 = {trace}, expected {n_electrons}"
            )));
        }
        if crate::tensor::antisymmetry_defect(&self.g2) > 1e-10 {
            return Err(Error::Inconsistent("γ2 not antisymmetric".into()));
        }
        let ne = n_electrons as f64;
        for p in 0..n {
            for r in 0..n {
                let mut partial = 0.0;
                for q in 0..n {
                    partial += self.g2[[p, q, r, q]];
                }
                if (partial - (ne - 1.0) * self.g1[[p, r]]).abs() > 1e-8 {
                    return Err(Error::Inconsistent("γ2 partial trace violated".into()));
                }
            }
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let mut acc: usize = 1;
    for i in 0..k.min(n - k) {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}

/// All determinants with the given α/β electron counts.
///
/// Spin orbital `2p` is the α and `2p+1` the β component of spatial orbital
/// `p`. Ordering is deterministic: lexicographic α combinations outermost,
/// lexicographic β combinations within.
pub fn enumerate_determinants(
    n_spinorb: usize,
    n_alpha: usize,
    n_beta: usize,
) -> Result<Vec<Determinant>> {
    if n_spinorb % 2 != 0 {
        return Err(Error::Config("spin orbital count must be even".into()));
    }
    if n_spinorb > 64 {
        return Err(Error::Capacity(format!(
            "{n_spinorb} spin orbitals exceed the 64-bit determinant width"
        )));
    }
    let n_spatial = n_spinorb / 2;
    if n_alpha + n_beta > n_spinorb {
        return Err(Error::Config("more electrons than spin orbitals".into()));
    }
    let count = binomial(n_spatial, n_alpha)
        .zip(binomial(n_spatial, n_beta))
        .and_then(|(a, b)| a.checked_mul(b))
        .ok_or_else(|| Error::Capacity("determinant count overflow".into()))?;
    if count > MAX_DETERMINANTS {
        return Err(Error::Capacity(format!(
            "{count} determinants exceed the cap of {MAX_DETERMINANTS}"
        )));
    }

    let alpha_sets = combinations(n_spatial, n_alpha);
    let beta_sets = combinations(n_spatial, n_beta);
    let mut dets = Vec::with_capacity(count);
    for a in &alpha_sets {
        let abits: u64 = a.iter().map(|&p| 1u64 << (2 * p)).sum();
        for b in &beta_sets {
            let bbits: u64 = b.iter().map(|&p| 1u64 << (2 * p + 1)).sum();
            dets.push(Determinant(abits | bbits));
        }
    }
    Ok(dets)
}

/// k-subsets of 0..n in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for p in start..n {
            cur.push(p);
            rec(p + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Dense Hamiltonian over a determinant list by Slater–Condon rules.
///
/// The scalar energy sits on the diagonal. All determinants must carry the
/// same electron count.
pub fn build_hamiltonian(ints: &IntegralSet, dets: &[Determinant]) -> Mat {
    let dim = dets.len();
    let n = ints.n_spin_orbitals();
    let occs: Vec<Vec<usize>> = dets.iter().map(|d| d.occupied(n)).collect();
    let mut h = Mat::zeros((dim, dim));
    for i in 0..dim {
        h[[i, i]] = slater_condon_diagonal(ints, &occs[i]);
        for j in (i + 1)..dim {
            let x = slater_condon_off_diagonal(ints, &dets[i], &dets[j], &occs[j]);
            h[[i, j]] = x;
            h[[j, i]] = x;
        }
    }
    h
}

fn slater_condon_diagonal(ints: &IntegralSet, occ: &[usize]) -> f64 {
    let mut e = ints.scalar;
    for &i in occ {
        e += ints.h[[i, i]];
    }
    for &i in occ {
        for &j in occ {
            e += 0.5 * ints.v[[i, j, i, j]];
        }
    }
    e
}

fn slater_condon_off_diagonal(
    ints: &IntegralSet,
    di: &Determinant,
    dj: &Determinant,
    occ_j: &[usize],
) -> f64 {
    let diff = di.0 ^ dj.0;
    match diff.count_ones() {
        2 => {
            // Single excitation i→a relative to |D_j⟩.
            let hole = (dj.0 & diff).trailing_zeros() as usize;
            let part = (di.0 & diff).trailing_zeros() as usize;
            let (tmp, s1) = dj.annihilate(hole).expect("hole occupied");
            let (_, s2) = tmp.create(part).expect("particle empty");
            let sign = s1 * s2;
            let mut x = ints.h[[part, hole]];
            for &k in occ_j {
                if k != hole {
                    x += ints.v[[part, k, hole, k]];
                }
            }
            sign * x
        }
        4 => {
            let holes_bits = dj.0 & diff;
            let parts_bits = di.0 & diff;
            let i = holes_bits.trailing_zeros() as usize;
            let j = (holes_bits & !(1u64 << i)).trailing_zeros() as usize;
            let a = parts_bits.trailing_zeros() as usize;
            let b = (parts_bits & !(1u64 << a)).trailing_zeros() as usize;
            // ⟨D_i|H|D_j⟩ with D_i = a†_a a†_b a_j a_i D_j up to phase.
            let (t1, s1) = dj.annihilate(i).expect("occupied");
            let (t2, s2) = t1.annihilate(j).expect("occupied");
            let (t3, s3) = t2.create(b).expect("empty");
            let (_, s4) = t3.create(a).expect("empty");
            s1 * s2 * s3 * s4 * ints.v[[a, b, i, j]]
        }
        _ => 0.0,
    }
}

/// Lowest `k` eigenpairs of a symmetric matrix as CI wavefunctions.
///
/// Eigenvector signs are fixed so the largest-magnitude coefficient is
/// positive; ties break toward the lowest index.
pub fn solve_ground(h: &Mat, k: usize, dets: &[Determinant]) -> Result<Vec<(f64, CIWavefunction)>> {
    let dim = h.nrows();
    if dim != dets.len() {
        return Err(Error::Contract("matrix and determinant list differ in size".into()));
    }
    if crate::tensor::symmetry_defect(h) > 1e-10 {
        return Err(Error::Contract("Hamiltonian matrix not symmetric".into()));
    }
    if k > dim {
        return Err(Error::Bounds(format!("requested {k} states from a {dim}-dim space")));
    }
    if dim > MAX_DENSE_DIM {
        return Err(Error::Capacity(format!(
            "dimension {dim} exceeds the dense-solver cap of {MAX_DENSE_DIM}"
        )));
    }
    let (vals, vecs) = symmetric_eigen(h);
    let mut out = Vec::with_capacity(k);
    for state in 0..k {
        let mut coeff: Vec<f64> = (0..dim).map(|i| vecs[[i, state]]).collect();
        let mut best = 0usize;
        for (i, c) in coeff.iter().enumerate() {
            if c.abs() > coeff[best].abs() + 1e-14 {
                best = i;
            }
        }
        if coeff[best] < 0.0 {
            for c in coeff.iter_mut() {
                *c = -*c;
            }
        }
        out.push((
            vals[state],
            CIWavefunction {
                determinants: dets.to_vec(),
                coefficients: coeff,
                energy: vals[state],
            },
        ));
    }
    Ok(out)
}

/// Density matrices of a CI state by direct operator application.
///
/// Rank 3 is limited to 14 spin orbitals; the rank-6 tensor is dense.
pub fn compute_rdms(wfn: &CIWavefunction, n_spinorb: usize, max_rank: u8) -> Result<RDMSet> {
    if (wfn.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Contract("wavefunction must be normalized".into()));
    }
    if max_rank == 3 && n_spinorb > 14 {
        return Err(Error::Capacity(format!(
            "rank-3 RDM over {n_spinorb} spin orbitals exceeds the 14-orbital cap"
        )));
    }
    if !(1..=3).contains(&max_rank) {
        return Err(Error::Contract("max_rank must be 1, 2, or 3".into()));
    }
    let index: HashMap<Determinant, usize> = wfn
        .determinants
        .iter()
        .enumerate()
        .map(|(i, d)| (*d, i))
        .collect();
    let n = n_spinorb;
    let mut g1 = Mat::zeros((n, n));
    for (jdx, det) in wfn.determinants.iter().enumerate() {
        let cj = wfn.coefficients[jdx];
        if cj == 0.0 {
            continue;
        }
        for q in 0..n {
            let Some((d1, s1)) = det.annihilate(q) else { continue };
            for p in 0..n {
                let Some((d2, s2)) = d1.create(p) else { continue };
                if let Some(&idx) = index.get(&d2) {
                    g1[[p, q]] += wfn.coefficients[idx] * cj * s1 * s2;
                }
            }
        }
    }

    let mut g2 = T4::zeros((n, n, n, n));
    if max_rank >= 2 {
        for (jdx, det) in wfn.determinants.iter().enumerate() {
            let cj = wfn.coefficients[jdx];
            if cj == 0.0 {
                continue;
            }
            for r in 0..n {
                let Some((d1, s1)) = det.annihilate(r) else { continue };
                for s in 0..n {
                    let Some((d2, s2)) = d1.annihilate(s) else { continue };
                    for q in 0..n {
                        let Some((d3, s3)) = d2.create(q) else { continue };
                        for p in 0..n {
                            let Some((d4, s4)) = d3.create(p) else { continue };
                            if let Some(&idx) = index.get(&d4) {
                                g2[[p, q, r, s]] +=
                                    wfn.coefficients[idx] * cj * s1 * s2 * s3 * s4;
                            }
                        }
                    }
                }
            }
        }
    }

    let g3 = if max_rank >= 3 {
        let mut g3 = T6::zeros((n, n, n, n, n, n));
        for (jdx, det) in wfn.determinants.iter().enumerate() {
            let cj = wfn.coefficients[jdx];
            if cj == 0.0 {
                continue;
            }
            // γ^{pqr}_{stu} = ⟨a†_p a†_q a†_r a_u a_t a_s⟩
            for s in 0..n {
                let Some((d1, x1)) = det.annihilate(s) else { continue };
                for t in 0..n {
                    let Some((d2, x2)) = d1.annihilate(t) else { continue };
                    for u in 0..n {
                        let Some((d3, x3)) = d2.annihilate(u) else { continue };
                        for r in 0..n {
                            let Some((d4, x4)) = d3.create(r) else { continue };
                            for q in 0..n {
                                let Some((d5, x5)) = d4.create(q) else { continue };
                                for p in 0..n {
                                    let Some((d6, x6)) = d5.create(p) else { continue };
                                    if let Some(&idx) = index.get(&d6) {
                                        g3[[p, q, r, s, t, u]] += wfn.coefficients[idx]
                                            * cj
                                            * x1
                                            * x2
                                            * x3
                                            * x4
                                            * x5
                                            * x6;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Some(g3)
    } else {
        None
    };

    Ok(RDMSet { g1, g2, g3 })
}

/// Matrix of a many-body operator in a determinant basis, by direct string
/// application (the slow, obviously-correct oracle path).
///
/// Generalized-ordered operators are converted to bare form first, which
/// requires the densities they were ordered against.
pub fn operator_matrix(
    op: &ManyBodyOperator,
    dets: &[Determinant],
    densities: Option<&CumulantSet>,
) -> Result<Mat> {
    let bare = match op.vacuum {
        Vacuum::Bare => op.clone(),
        Vacuum::Gno(_) => {
            let cum = densities.ok_or_else(|| {
                Error::Contract("generalized-ordered operator needs densities".into())
            })?;
            to_bare_operator(op, cum)?
        }
    };
    let n = bare.one_body.nrows();
    let dim = dets.len();
    let index: HashMap<Determinant, usize> =
        dets.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut m = Mat::zeros((dim, dim));
    for i in 0..dim {
        m[[i, i]] += bare.scalar;
    }
    for (jdx, det) in dets.iter().enumerate() {
        // one-body: a†_p a_q
        for q in 0..n {
            let Some((d1, s1)) = det.annihilate(q) else { continue };
            for p in 0..n {
                let Some((d2, s2)) = d1.create(p) else { continue };
                if let Some(&idx) = index.get(&d2) {
                    m[[idx, jdx]] += bare.one_body[[p, q]] * s1 * s2;
                }
            }
        }
        // two-body: ¼ v^{pq}_{rs} a†_p a†_q a_s a_r
        for r in 0..n {
            let Some((d1, s1)) = det.annihilate(r) else { continue };
            for s in 0..n {
                let Some((d2, s2)) = d1.annihilate(s) else { continue };
                for q in 0..n {
                    let Some((d3, s3)) = d2.create(q) else { continue };
                    for p in 0..n {
                        let Some((d4, s4)) = d3.create(p) else { continue };
                        if let Some(&idx) = index.get(&d4) {
                            m[[idx, jdx]] +=
                                0.25 * bare.two_body[[p, q, r, s]] * s1 * s2 * s3 * s4;
                        }
                    }
                }
            }
        }
    }
    Ok(m)
}

/// exp(−A)·H·exp(A) in matrix form via scaling-and-squaring.
///
/// `A` must be antisymmetric to 1e-10 so the transform is orthogonal and the
/// spectrum is preserved.
pub fn brute_force_transform(hm: &Mat, am: &Mat) -> Result<Mat> {
    let n = am.nrows();
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            defect = defect.max((am[[i, j]] + am[[j, i]]).abs());
        }
    }
    if defect > 1e-10 {
        return Err(Error::Contract(format!(
            "generator not antisymmetric (defect {defect:.3e})"
        )));
    }
    let e = expm(am);
    let e_inv = expm(&(-am));
    Ok(e_inv.dot(&hm.dot(&e)))
}

/// Matrix exponential: scale by 2^k until ‖A‖ ≤ 1/4, Taylor to machine
/// precision, square back.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm = crate::tensor::fro(a);
    let k = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.mapv(|x| x / f64::powi(2.0, k as i32));
    let mut result = Mat::eye(n);
    let mut term = Mat::eye(n);
    for order in 1..=30 {
        term = term.dot(&scaled) / order as f64;
        result += &term;
        if crate::tensor::fro(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..k {
        result = result.dot(&result);
    }
    result
}
