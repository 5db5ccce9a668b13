//! Reduced density cumulants: construction from RDMs, the two measurement-
//! driven truncation schemes, three-body reconstruction, and Gaussian noise
//! injection on measured density matrices.
//!
//! Cumulant tensors live on the active spin orbitals only. The one-body
//! density over the full spin-orbital range (identity on core, λ1 on active)
//! and its complement η = 1 − γ are exposed as views since every contraction
//! engine downstream consumes those.

use crate::fcidump::SpinOrbitalSpace;
use crate::fockspace::RDMSet;
use crate::tensor::{Mat, T4, T6};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_REFERENCE_ID: AtomicU64 = AtomicU64::new(1);

/// Truncation applied to the measured cumulants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    /// Full λ1 and λ2.
    Exact,
    /// Full λ1, diagonal λ2 (quadratic number of measured elements).
    Lambda2Diagonal,
    /// Diagonal λ1 only, λ2 = 0 (linear number of measured elements).
    Lambda1Diagonal,
}

/// How the three-body cumulant is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L3Policy {
    /// Exact λ3 from the rank-3 RDM.
    Exact,
    /// λ̃3 = 0.
    Zero,
    /// The unique λ3 that makes the reassembled γ3 vanish.
    Gamma3Zero,
}

/// Active-space cumulants λ1, λ2, λ3 plus full-space density views.
#[derive(Debug, Clone)]
pub struct CumulantSet {
    /// Spin-orbital partition of the integral set these cumulants belong to.
    pub space: SpinOrbitalSpace,
    /// λ1 = γ1 on the active block.
    pub l1: Mat,
    /// λ2 over active spin orbitals, antisymmetric in both pairs.
    pub l2: T4,
    /// λ3 over active spin orbitals; `None` means the zero tensor.
    pub l3: Option<T6>,
    pub policy: TruncationPolicy,
    pub l3_policy: L3Policy,
    /// Normal-ordering vacuum tag; operators ordered with respect to this set
    /// carry the same id.
    pub id: u64,
}

impl CumulantSet {
    pub fn new(
        space: SpinOrbitalSpace,
        l1: Mat,
        l2: T4,
        l3: Option<T6>,
        policy: TruncationPolicy,
        l3_policy: L3Policy,
    ) -> Self {
        Self {
            space,
            l1,
            l2,
            l3,
            policy,
            l3_policy,
            id: NEXT_REFERENCE_ID.fetch_add(1, Ordering::Relaxed),
        }
    }

    pub fn n_active(&self) -> usize {
        self.l1.nrows()
    }

    pub fn n_spin_orbitals(&self) -> usize {
        self.space.n_spin_orbitals()
    }

    /// γ over the full spin-orbital range: identity on core, λ1 on active.
    pub fn g1_full(&self) -> Mat {
        let n = self.n_spin_orbitals();
        let mut g = Mat::zeros((n, n));
        for &i in &self.space.core {
            g[[i, i]] = 1.0;
        }
        for (a, &p) in self.space.active.iter().enumerate() {
            for (b, &q) in self.space.active.iter().enumerate() {
                g[[p, q]] = self.l1[[a, b]];
            }
        }
        g
    }

    /// η = 1 − γ over the full spin-orbital range.
    pub fn eta1_full(&self) -> Mat {
        let n = self.n_spin_orbitals();
        let mut e = -self.g1_full();
        for p in 0..n {
            e[[p, p]] += 1.0;
        }
        e
    }

    /// λ3 viewed as a dense tensor (zero tensor when the policy dropped it).
    pub fn l3_dense(&self) -> T6 {
        let n = self.n_active();
        match &self.l3 {
            Some(t) => t.clone(),
            None => T6::zeros((n, n, n, n, n, n)),
        }
    }

    pub fn has_l3(&self) -> bool {
        self.l3.is_some()
    }
}

/// Gaussian noise model for measured density matrices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of the per-element error (density units).
    pub sigma: f64,
    pub seed: u64,
    pub n_samples: usize,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::Domain(format!("sigma must be ≥ 0, got {}", self.sigma)));
        }
        if self.n_samples == 0 {
            return Err(Error::Domain("n_samples must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Seed for one sample of a sweep.
    pub fn sample_seed(&self, sample: usize) -> u64 {
        self.seed.wrapping_add(sample as u64)
    }
}

/// Builds cumulants from density matrices.
///
/// λ1 = γ1; λ2 strips the antisymmetrized λ1 products from γ2; λ3 strips the
/// nine signed λ1⊗λ2 terms and the six-term λ1 determinant expansion from γ3.
/// A missing γ3 is allowed only when the λ3 policy does not need it.
pub fn cumulants_from_rdms(
    r: &RDMSet,
    space: &SpinOrbitalSpace,
    l3_policy: L3Policy,
) -> Result<CumulantSet> {
    let n = r.n_orbitals();
    if space.active.len() != n {
        return Err(Error::Contract(format!(
            "RDMs over {n} orbitals do not match {} active spin orbitals",
            space.active.len()
        )));
    }
    let l1 = r.g1.clone();
    let mut l2 = r.g2.clone();
    for p in 0..n {
        for q in 0..n {
            for x in 0..n {
                for y in 0..n {
                    l2[[p, q, x, y]] -= l1[[p, x]] * l1[[q, y]] - l1[[p, y]] * l1[[q, x]];
                }
            }
        }
    }
    let l3 = match l3_policy {
        L3Policy::Zero => None,
        L3Policy::Gamma3Zero => Some(lambda3_for_zero_gamma3(&l1, &l2)),
        L3Policy::Exact => {
            let g3 = r.g3.as_ref().ok_or_else(|| {
                Error::Contract("exact λ3 requested but the RDM set has no γ3".into())
            })?;
            let mut l3 = g3.clone();
            let products = gamma3_products(&l1, &l2);
            l3.zip_mut_with(&products, |a, &b| *a -= b);
            Some(l3)
        }
    };
    Ok(CumulantSet::new(
        space.clone(),
        l1,
        l2,
        l3,
        TruncationPolicy::Exact,
        l3_policy,
    ))
}

/// The disconnected part of γ3: nine signed λ1⊗λ2 terms plus the six-term
/// λ1 determinant expansion.
fn gamma3_products(l1: &Mat, l2: &T4) -> T6 {
    let n = l1.nrows();
    let mut out = T6::zeros((n, n, n, n, n, n));
    let sign = [1.0, -1.0, 1.0];
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                let uppers = [p, q, r];
                for s in 0..n {
                    for t in 0..n {
                        for u in 0..n {
                            let lowers = [s, t, u];
                            let mut x = 0.0;
                            // γ1 ∧ λ2 with parity (+,−,+) per extracted slot.
                            for (iu, &a) in uppers.iter().enumerate() {
                                let rest_u: Vec<usize> = (0..3)
                                    .filter(|&k| k != iu)
                                    .map(|k| uppers[k])
                                    .collect();
                                for (il, &b) in lowers.iter().enumerate() {
                                    let rest_l: Vec<usize> = (0..3)
                                        .filter(|&k| k != il)
                                        .map(|k| lowers[k])
                                        .collect();
                                    x += sign[iu]
                                        * sign[il]
                                        * l1[[a, b]]
                                        * l2[[rest_u[0], rest_u[1], rest_l[0], rest_l[1]]];
                                }
                            }
                            // det3(λ1)
                            x += l1[[p, s]] * l1[[q, t]] * l1[[r, u]]
                                - l1[[p, s]] * l1[[q, u]] * l1[[r, t]]
                                - l1[[p, t]] * l1[[q, s]] * l1[[r, u]]
                                + l1[[p, t]] * l1[[q, u]] * l1[[r, s]]
                                + l1[[p, u]] * l1[[q, s]] * l1[[r, t]]
                                - l1[[p, u]] * l1[[q, t]] * l1[[r, s]];
                            out[[p, q, r, s, t, u]] = x;
                        }
                    }
                }
            }
        }
    }
    out
}

/// λ3 such that γ3 reassembled from (λ1, λ2, λ3) vanishes identically.
fn lambda3_for_zero_gamma3(l1: &Mat, l2: &T4) -> T6 {
    let mut out = gamma3_products(l1, l2);
    out.mapv_inplace(|x| -x);
    out
}

/// Reassembles γ2 from cumulants (test and reporting support).
pub fn gamma2_from_cumulants(l1: &Mat, l2: &T4) -> T4 {
    let n = l1.nrows();
    let mut g2 = l2.clone();
    for p in 0..n {
        for q in 0..n {
            for x in 0..n {
                for y in 0..n {
                    g2[[p, q, x, y]] += l1[[p, x]] * l1[[q, y]] - l1[[p, y]] * l1[[q, x]];
                }
            }
        }
    }
    g2
}

/// Reassembles γ3 from cumulants.
pub fn gamma3_from_cumulants(l1: &Mat, l2: &T4, l3: &T6) -> T6 {
    let mut g3 = gamma3_products(l1, l2);
    g3.zip_mut_with(l3, |a, &b| *a += b);
    g3
}

/// Applies the level-1 or level-2 measurement truncation.
///
/// Level 2 keeps the full λ1 and only the diagonal λ2 elements λ^{uv}_{uv}
/// together with their antisymmetry partners λ^{uv}_{vu}. Level 1 keeps only
/// the diagonal of λ1 and zeroes λ2 entirely. λ3 is dropped; regenerate it
/// afterwards with [`reconstruct_lambda3`].
pub fn apply_truncation(c: &CumulantSet, level: u8) -> CumulantSet {
    let n = c.n_active();
    let mut out = c.clone();
    out.id = NEXT_REFERENCE_ID.fetch_add(1, Ordering::Relaxed);
    match level {
        2 => {
            let mut l2 = T4::zeros((n, n, n, n));
            for u in 0..n {
                for v in 0..n {
                    l2[[u, v, u, v]] = c.l2[[u, v, u, v]];
                    l2[[u, v, v, u]] = c.l2[[u, v, v, u]];
                }
            }
            out.l2 = l2;
            out.policy = TruncationPolicy::Lambda2Diagonal;
        }
        1 => {
            let mut l1 = Mat::zeros((n, n));
            for u in 0..n {
                l1[[u, u]] = c.l1[[u, u]];
            }
            out.l1 = l1;
            out.l2 = T4::zeros((n, n, n, n));
            out.policy = TruncationPolicy::Lambda1Diagonal;
        }
        other => panic!("truncation level must be 1 or 2, got {other}"),
    }
    out.l3 = None;
    out
}

/// Regenerates λ3 from the (possibly truncated) λ1, λ2 under the given policy.
pub fn reconstruct_lambda3(c: &CumulantSet, policy: L3Policy) -> CumulantSet {
    let mut out = c.clone();
    out.id = NEXT_REFERENCE_ID.fetch_add(1, Ordering::Relaxed);
    out.l3_policy = policy;
    out.l3 = match policy {
        L3Policy::Zero => None,
        L3Policy::Gamma3Zero => Some(lambda3_for_zero_gamma3(&c.l1, &c.l2)),
        L3Policy::Exact => c.l3.clone(),
    };
    out
}

/// Adds independent N(0, σ²) draws to the symmetry-unique elements of γ1 and
/// γ2 and propagates them so the output still satisfies Hermiticity and
/// antisymmetry exactly. N-representability is deliberately not restored.
/// Deterministic under a fixed seed; γ3, if present, passes through untouched.
pub fn add_noise(r: &RDMSet, spec: &NoiseSpec) -> Result<RDMSet> {
    spec.validate()?;
    let mut out = r.clone();
    if spec.sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.sigma).expect("sigma validated");
    let n = r.n_orbitals();

    for p in 0..n {
        for q in p..n {
            let eps = normal.sample(&mut rng);
            out.g1[[p, q]] += eps;
            if q != p {
                out.g1[[q, p]] += eps;
            }
        }
    }

    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            for x in 0..n {
                for y in 0..n {
                    if x == y {
                        continue;
                    }
                    let idx = [p, q, x, y];
                    if orbit_representative(idx) != idx {
                        continue;
                    }
                    let eps = normal.sample(&mut rng);
                    for (slot, sign) in orbit(idx) {
                        out.g2[[slot[0], slot[1], slot[2], slot[3]]] += sign * eps;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The 8-element antisymmetry/Hermiticity orbit of a γ2 slot, deduplicated.
fn orbit(idx: [usize; 4]) -> Vec<([usize; 4], f64)> {
    let [p, q, x, y] = idx;
    let all = [
        ([p, q, x, y], 1.0),
        ([q, p, x, y], -1.0),
        ([p, q, y, x], -1.0),
        ([q, p, y, x], 1.0),
        ([x, y, p, q], 1.0),
        ([y, x, p, q], -1.0),
        ([x, y, q, p], -1.0),
        ([y, x, q, p], 1.0),
    ];
    let mut seen: Vec<([usize; 4], f64)> = Vec::with_capacity(8);
    for (slot, sign) in all {
        if !seen.iter().any(|(s, _)| *s == slot) {
            seen.push((slot, sign));
        }
    }
    seen
}

fn orbit_representative(idx: [usize; 4]) -> [usize; 4] {
    orbit(idx).into_iter().map(|(s, _)| s).min().unwrap()
}
