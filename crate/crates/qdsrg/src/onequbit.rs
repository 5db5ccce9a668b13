//! Two-configuration active spaces on a single simulated qubit.
//!
//! A two-electron, two-orbital singlet has three configurations; a rotation of
//! the two orbitals removes the open-shell component, after which the ground
//! state lives in the span of two closed-shell determinants. That pair maps to
//! one qubit, the Hamiltonian becomes c₀ + c_z Z + c_x X, and the energy as a
//! function of the single Ry angle has the exact form a + b·cos t + c·sin t.
//! Three measurement angles recover (a, b, c); the minimizer is analytic.

use crate::dsrg::{ManyBodyOperator, Vacuum};
use crate::fockspace::{operator_matrix, Determinant, RDMSet};
use crate::tensor::{Mat, T4};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

/// Three-configuration singlet coefficients and the rotation that removes the
/// open-shell component.
#[derive(Debug, Clone, Copy)]
pub struct TwoConfigState {
    pub c1p: f64,
    pub c2p: f64,
    pub c3p: f64,
    pub theta: f64,
}

/// Two-configuration matrix elements and their Pauli decomposition.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OneQubitProblem {
    pub h00: f64,
    pub h11: f64,
    pub h10: f64,
    pub c0: f64,
    pub cz: f64,
    pub cx: f64,
}

impl OneQubitProblem {
    pub fn from_matrix_elements(h00: f64, h11: f64, h10: f64) -> Self {
        OneQubitProblem {
            h00,
            h11,
            h10,
            c0: 0.5 * (h00 + h11),
            cz: 0.5 * (h00 - h11),
            cx: h10,
        }
    }

    /// Exact ground eigenvalue of the 2×2 problem.
    pub fn exact_ground(&self) -> f64 {
        self.c0 - (self.cz * self.cz + self.cx * self.cx).sqrt()
    }
}

/// Fitted tomography model ⟨H⟩_t = a + b·cos t + c·sin t.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TomographyModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Orbital rotation angle that removes the open-shell coefficient:
/// tan 2θ = √2·c₃′/(c₁′ − c₂′), principal branch 2θ ∈ (−π/2, π/2], with
/// 2θ = π/2 when the denominator vanishes.
pub fn rotation_angle(c1p: f64, c2p: f64, c3p: f64) -> f64 {
    if c3p == 0.0 {
        return 0.0;
    }
    let denom = c1p - c2p;
    if denom == 0.0 {
        return std::f64::consts::FRAC_PI_4;
    }
    0.5 * (std::f64::consts::SQRT_2 * c3p / denom).atan()
}

/// The orbital rotation of the two active spatial orbitals:
/// ψ1′ = cosθ·ψ1 + sinθ·ψ2, ψ2′ = sinθ·ψ1 − cosθ·ψ2 (orthogonal, det −1).
pub fn rotation_matrix_spatial(theta: f64) -> Mat {
    let (s, c) = theta.sin_cos();
    ndarray::array![[c, s], [s, -c]]
}

/// Rotates a bare 4-spin-orbital operator by the spatial 2×2 rotation.
pub fn rotate_active_operator(op: &ManyBodyOperator, theta: f64) -> Result<ManyBodyOperator> {
    if op.vacuum != Vacuum::Bare {
        return Err(Error::Contract("rotation expects a bare operator".into()));
    }
    if op.n_spin_orbitals() != 4 {
        return Err(Error::Contract(
            "two-configuration mapping needs exactly 2 spatial orbitals".into(),
        ));
    }
    let u2 = rotation_matrix_spatial(theta);
    let mut u = Mat::zeros((4, 4));
    for p in 0..2 {
        for q in 0..2 {
            for sigma in 0..2 {
                u[[2 * p + sigma, 2 * q + sigma]] = u2[[p, q]];
            }
        }
    }
    Ok(ManyBodyOperator {
        scalar: op.scalar,
        one_body: u.t().dot(&op.one_body).dot(&u),
        two_body: crate::dsrg::rotate_rank4(&op.two_body, &u),
        vacuum: Vacuum::Bare,
    })
}

/// Closed-shell determinants |ψ1ψ1̄⟩ and |ψ2ψ2̄⟩ in the 4-spin-orbital space.
pub fn closed_shell_determinants() -> [Determinant; 2] {
    [Determinant(0b0011), Determinant(0b1100)]
}

/// Maps a bare two-orbital active Hamiltonian onto one qubit via the two
/// closed-shell configurations.
pub fn map_to_qubit(hact: &ManyBodyOperator) -> Result<OneQubitProblem> {
    if hact.n_spin_orbitals() != 4 {
        return Err(Error::Contract(
            "one-qubit mapping needs exactly 2 active spatial orbitals".into(),
        ));
    }
    let dets = closed_shell_determinants();
    let m = operator_matrix(hact, &dets, None)?;
    Ok(OneQubitProblem::from_matrix_elements(
        m[[0, 0]],
        m[[1, 1]],
        m[[0, 1]],
    ))
}

/// Measurement record for one quadrature angle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AngleMeasurement {
    pub angle: f64,
    pub z_est: f64,
    pub x_est: f64,
    pub energy: f64,
    /// (n0, n1, n+, n−); zero when analytic.
    pub counts: (u64, u64, u64, u64),
}

/// Simulates Z- and X-basis measurements of the state Ry(t)|0⟩.
///
/// Each basis draws `shots` Bernoulli samples: p(|0⟩) = cos²(t/2) in Z and
/// p(+) = (1 + sin t)/2 in X. Deterministic under the seed.
pub fn simulate_measurement(t: f64, shots: u64, seed: u64) -> (f64, f64, (u64, u64, u64, u64)) {
    assert!(shots >= 1, "shots must be ≥ 1");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let p0 = (t / 2.0).cos().powi(2);
    let pplus = 0.5 * (1.0 + t.sin());
    let mut n0 = 0u64;
    for _ in 0..shots {
        if rng.random::<f64>() < p0 {
            n0 += 1;
        }
    }
    let mut nplus = 0u64;
    for _ in 0..shots {
        if rng.random::<f64>() < pplus {
            nplus += 1;
        }
    }
    let z_est = (2 * n0) as f64 / shots as f64 - 1.0;
    let x_est = (2 * nplus) as f64 / shots as f64 - 1.0;
    (z_est, x_est, (n0, n1_from(n0, shots), nplus, n1_from(nplus, shots)))
}

fn n1_from(n0: u64, shots: u64) -> u64 {
    shots - n0
}

/// Solves the three-point quadrature system for (a, b, c).
///
/// `measure` returns (⟨Z⟩, ⟨X⟩, ⟨H⟩) at an angle; the three rows
/// [1, ⟨Z⟩, ⟨X⟩] must be independent. Exact for any a + b·cos t + c·sin t in
/// the noiseless limit.
pub fn fourier_quadrature<F>(mut measure: F, t0: f64) -> Result<(TomographyModel, Vec<AngleMeasurement>)>
where
    F: FnMut(f64) -> AngleMeasurement,
{
    let angles = [t0, t0 - std::f64::consts::FRAC_PI_3, t0 + std::f64::consts::FRAC_PI_3];
    let rows: Vec<AngleMeasurement> = angles.iter().map(|&t| measure(t)).collect();
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (i, r) in rows.iter().enumerate() {
        m[i] = [1.0, r.z_est, r.x_est];
        rhs[i] = r.energy;
    }
    let sol = solve3(&m, &rhs)?;
    Ok((
        TomographyModel {
            a: sol[0],
            b: sol[1],
            c: sol[2],
        },
        rows,
    ))
}

/// 3×3 solve by partial-pivot elimination with a conditioning guard.
fn solve3(m: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Result<[f64; 3]> {
    let mut a = *m;
    let mut b = *rhs;
    let scale: f64 = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1e-300);
    for col in 0..3 {
        let mut pivot = col;
        for row in (col + 1)..3 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < scale * 1e-12 {
            return Err(Error::Quadrature(
                "singular tomography system; retry with a different t0".into(),
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in (row + 1)..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Analytic minimizer of a + b·cos t + c·sin t.
pub fn optimal_angle(model: &TomographyModel) -> (f64, f64) {
    if model.b == 0.0 && model.c == 0.0 {
        return (0.0, model.a);
    }
    let t_star = (-model.c).atan2(-model.b);
    let e_min = model.a - (model.b * model.b + model.c * model.c).sqrt();
    (t_star, e_min)
}

/// Density matrices of the two-configuration state cos(t/2)|Φ1⟩ + sin(t/2)|Φ2⟩
/// over the 4 active spin orbitals, from the analytic tomography relations.
///
/// With `x_est` given, the off-diagonal pair elements use ⟨X⟩/2 in place of
/// cos(t/2)sin(t/2), mirroring a measured reconstruction.
pub fn rdms_from_angle(t: f64, x_est: Option<f64>) -> RDMSet {
    let c1 = (t / 2.0).cos();
    let c2 = (t / 2.0).sin();
    let pop1 = c1 * c1;
    let pop2 = c2 * c2;
    let cross = match x_est {
        Some(x) => 0.5 * x,
        None => c1 * c2,
    };
    let mut g1 = Mat::zeros((4, 4));
    g1[[0, 0]] = pop1;
    g1[[1, 1]] = pop1;
    g1[[2, 2]] = pop2;
    g1[[3, 3]] = pop2;
    let mut g2 = T4::zeros((4, 4, 4, 4));
    let mut set = |p: usize, q: usize, r: usize, s: usize, v: f64| {
        g2[[p, q, r, s]] = v;
        g2[[q, p, r, s]] = -v;
        g2[[p, q, s, r]] = -v;
        g2[[q, p, s, r]] = v;
        g2[[r, s, p, q]] = v;
        g2[[s, r, p, q]] = -v;
        g2[[r, s, q, p]] = -v;
        g2[[s, r, q, p]] = v;
    };
    set(0, 1, 0, 1, pop1);
    set(2, 3, 2, 3, pop2);
    set(0, 1, 2, 3, cross);
    RDMSet {
        g1,
        g2,
        g3: None,
    }
}

/// Full experiment record, one per simulated eigensolver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VqeExperiment {
    pub t0: f64,
    pub measurements: Vec<AngleMeasurement>,
    pub model: TomographyModel,
    pub t_star: f64,
    pub e_est: f64,
    pub seed: u64,
    /// Total shot budget; split evenly across 3 angles × 2 bases.
    pub shots: Option<u64>,
}

/// One simulated eigensolver experiment: quadrature centered at
/// t0 = atan2(c_x, c_z), then the analytic minimizer of the fitted model.
///
/// `shots = None` uses analytic expectation values and recovers the exact
/// 2×2 ground eigenvalue.
pub fn vqe_one_qubit(
    problem: &OneQubitProblem,
    shots: Option<u64>,
    seed: u64,
) -> Result<VqeExperiment> {
    let t0 = problem.cx.atan2(problem.cz);
    let shots_per = shots.map(|s| (s / 6).max(1));
    let mut angle_index = 0u64;
    let measure = |t: f64| -> AngleMeasurement {
        let (z, x, counts) = match shots_per {
            Some(sp) => {
                // Splitmix-style decorrelation so adjacent experiment seeds
                // do not share angle streams.
                let angle_seed =
                    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(angle_index + 1);
                let m = simulate_measurement(t, sp, angle_seed);
                (m.0, m.1, m.2)
            }
            None => (t.cos(), t.sin(), (0, 0, 0, 0)),
        };
        angle_index += 1;
        AngleMeasurement {
            angle: t,
            z_est: z,
            x_est: x,
            energy: problem.c0 + problem.cz * z + problem.cx * x,
            counts,
        }
    };
    let (model, measurements) = fourier_quadrature(measure, t0)?;
    let (t_star, e_est) = optimal_angle(&model);
    Ok(VqeExperiment {
        t0,
        measurements,
        model,
        t_star,
        e_est,
        seed,
        shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_recovers_plain_harmonics() {
        let measure = |t: f64| AngleMeasurement {
            angle: t,
            z_est: t.cos(),
            x_est: t.sin(),
            energy: 2.0 + 3.0 * t.cos() + 4.0 * t.sin(),
            counts: (0, 0, 0, 0),
        };
        let (model, _) = fourier_quadrature(measure, 0.3).unwrap();
        assert!((model.a - 2.0).abs() < 1e-12);
        assert!((model.b - 3.0).abs() < 1e-12);
        assert!((model.c - 4.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_angle_axes() {
        let (t, e) = optimal_angle(&TomographyModel { a: 0.0, b: -1.0, c: 0.0 });
        assert!(t.abs() < 1e-14 && (e + 1.0).abs() < 1e-14);
        let (t, e) = optimal_angle(&TomographyModel { a: 0.0, b: 0.0, c: -1.0 });
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-14 && (e + 1.0).abs() < 1e-14);
    }

    #[test]
    fn extreme_angles_are_exact() {
        let (z, _, _) = simulate_measurement(0.0, 100, 7);
        assert_eq!(z, 1.0);
        let (z, _, _) = simulate_measurement(std::f64::consts::PI, 100, 7);
        assert_eq!(z, -1.0);
    }
}
