//! Small shared dense-tensor helpers: aliases, symmetry checks, and a
//! self-contained symmetric eigensolver (Householder tridiagonalization
//! followed by implicit QL, the classic EISPACK tred2/tql2 pair).

use ndarray::{Array2, Array4, Array6};

pub type Mat = Array2<f64>;
pub type T4 = Array4<f64>;
pub type T6 = Array6<f64>;

/// Frobenius norm of any dense tensor.
pub fn fro<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Max |a - aᵀ| over a square matrix.
pub fn symmetry_defect(a: &Mat) -> f64 {
    let n = a.nrows();
    let mut d: f64 = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            d = d.max((a[[p, q]] - a[[q, p]]).abs());
        }
    }
    d
}

/// Max violation of antisymmetry under upper-pair and lower-pair swaps.
pub fn antisymmetry_defect(v: &T4) -> f64 {
    let n = v.dim().0;
    let mut d: f64 = 0.0;
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let x = v[[p, q, r, s]];
                    d = d.max((x + v[[q, p, r, s]]).abs());
                    d = d.max((x + v[[p, q, s, r]]).abs());
                }
            }
        }
    }
    d
}

/// Max |v[pqrs] - v[rspq]| (Hermiticity for real tensors).
pub fn hermiticity_defect(v: &T4) -> f64 {
    let n = v.dim().0;
    let mut d: f64 = 0.0;
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    d = d.max((v[[p, q, r, s]] - v[[r, s, p, q]]).abs());
                }
            }
        }
    }
    d
}

/// R[abcd] - R[bacd] - R[abdc] + R[badc]: projects a raw accumulation onto
/// the antisymmetric convention used for stored two-body tensors.
pub fn antisymmetrize(r: &T4) -> T4 {
    let n = r.dim().0;
    let mut out = T4::zeros(r.raw_dim());
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    out[[a, b, c, d]] =
                        r[[a, b, c, d]] - r[[b, a, c, d]] - r[[a, b, d, c]] + r[[b, a, d, c]];
                }
            }
        }
    }
    out
}

/// K[abcd] - K[abdc].
pub fn asym_lower(k: &T4) -> T4 {
    let n = k.dim().0;
    let mut out = T4::zeros(k.raw_dim());
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    out[[a, b, c, d]] = k[[a, b, c, d]] - k[[a, b, d, c]];
                }
            }
        }
    }
    out
}

/// K[abcd] - K[bacd].
pub fn asym_upper(k: &T4) -> T4 {
    let n = k.dim().0;
    let mut out = T4::zeros(k.raw_dim());
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    out[[a, b, c, d]] = k[[a, b, c, d]] - k[[b, a, c, d]];
                }
            }
        }
    }
    out
}

/// Eigendecomposition of a real symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matrix of column
/// eigenvectors. Deterministic: no randomized pivoting, fixed shift strategy.
pub fn symmetric_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e);
    let mut vecs = Mat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            vecs[[i, j]] = v[i][j];
        }
    }
    (d, vecs)
}

/// Householder reduction to tridiagonal form (EISPACK tred2).
fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    let last = v[n - 1].clone();
    d.copy_from_slice(&last);

    for i in (1..n).rev() {
        let l = i;
        let mut h = 0.0;
        let mut scale = 0.0;
        for k in 0..l {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[l - 1];
            for j in 0..l {
                d[j] = v[l - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for k in 0..l {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[l - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[l - 1] = f - g;
            for k in 0..l {
                e[k] = 0.0;
            }

            for j in 0..l {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..l {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..l {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for k in 0..l {
                e[k] -= hh * d[k];
            }
            for j in 0..l {
                f = d[j];
                g = e[j];
                for k in j..l {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[l - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..(n - 1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iteration on the tridiagonal form (EISPACK tql2).
fn tql2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    for row in v.iter_mut().take(n) {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Ascending eigenvalue order, stable for ties.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in v.iter_mut().take(n) {
                row.swap(i, k);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_diagonal() {
        let a = array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let (vals, _) = symmetric_eigen(&a);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 2.0).abs() < 1e-14);
        assert!((vals[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 25;
        let mut a = Mat::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[[i, j]] = x;
                a[[j, i]] = x;
            }
        }
        let (vals, vecs) = symmetric_eigen(&a);
        // A·V = V·diag(vals)
        let av = a.dot(&vecs);
        for j in 0..n {
            for i in 0..n {
                assert!(
                    (av[[i, j]] - vals[j] * vecs[[i, j]]).abs() < 1e-9,
                    "residual too large at ({i},{j})"
                );
            }
        }
        // Orthonormality
        let vtv = vecs.t().dot(&vecs);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[[i, j]] - want).abs() < 1e-10);
            }
        }
    }
}
