//! Rank-truncated commutator of two normal-ordered operators.
//!
//! [O, A] is assembled as the GNO product P(O,A) − P(A,O), each product
//! expanded by the generalized Wick theorem and truncated to its scalar,
//! one-body, and two-body output components. Density contractions factorize
//! into a small set of batched terms: γ-dressed contractions run over the
//! core∪active support only, η = 1 − γ splits into a plain contraction minus
//! a γ one, and cumulant terms loop over active indices. The three-body
//! cumulant enters the scalar component only, through two-body × two-body
//! contractions.

use crate::cumulants::CumulantSet;
use crate::dsrg::{ManyBodyOperator, Vacuum};
use crate::tensor::{antisymmetrize, asym_lower, asym_upper, Mat, T4};
use crate::{Error, Result};
use ndarray::Array4;

struct Ctx<'a> {
    n: usize,
    na: usize,
    /// Full spin-orbital indices of the active orbitals.
    act: Vec<usize>,
    /// Support of γ: core ∪ active.
    sup: Vec<usize>,
    g: Mat,
    e: Mat,
    l2: &'a T4,
    l3: Option<&'a ndarray::Array6<f64>>,
}

impl<'a> Ctx<'a> {
    fn new(cum: &'a CumulantSet) -> Self {
        let mut sup = cum.space.core.clone();
        sup.extend_from_slice(&cum.space.active);
        sup.sort_unstable();
        Ctx {
            n: cum.n_spin_orbitals(),
            na: cum.n_active(),
            act: cum.space.active.clone(),
            sup,
            g: cum.g1_full(),
            e: cum.eta1_full(),
            l2: &cum.l2,
            l3: cum.l3.as_ref(),
        }
    }
}

#[derive(Debug)]
struct Components {
    c0: f64,
    c1: Mat,
    c2: T4,
}

impl Components {
    fn zeros(n: usize) -> Self {
        Components {
            c0: 0.0,
            c1: Mat::zeros((n, n)),
            c2: T4::zeros((n, n, n, n)),
        }
    }

    fn add_scaled(&mut self, other: &Components, w: f64) {
        self.c0 += w * other.c0;
        self.c1.zip_mut_with(&other.c1, |x, &y| *x += w * y);
        self.c2.zip_mut_with(&other.c2, |x, &y| *x += w * y);
    }

    fn adjoint(&self) -> Components {
        let n = self.c1.nrows();
        let mut c2 = T4::zeros(self.c2.raw_dim());
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        c2[[p, q, r, s]] = self.c2[[r, s, p, q]];
                    }
                }
            }
        }
        Components {
            c0: self.c0,
            c1: self.c1.t().to_owned(),
            c2,
        }
    }
}

/// Scalar, one-body, and two-body GNO components of [O, A].
///
/// Both operators must be normal-ordered against `cum`. Three-body output
/// components are discarded; λ3 contributes to the scalar only. The result is
/// bilinear in (O, A) and exactly antisymmetric in its two-body pairs.
pub fn commutator_12(
    o: &ManyBodyOperator,
    a: &ManyBodyOperator,
    cum: &CumulantSet,
) -> Result<ManyBodyOperator> {
    let (Vacuum::Gno(oid), Vacuum::Gno(aid)) = (o.vacuum, a.vacuum) else {
        return Err(Error::Contract(
            "commutator inputs must be normal-ordered against the reference".into(),
        ));
    };
    if oid != cum.id || aid != cum.id {
        return Err(Error::Contract(
            "operators ordered against a different cumulant set".into(),
        ));
    }
    let n = o.n_spin_orbitals();
    if a.n_spin_orbitals() != n || cum.n_spin_orbitals() != n {
        return Err(Error::Contract("operator dimensions disagree".into()));
    }
    let ctx = Ctx::new(cum);
    let mut acc = Components::zeros(n);
    product_into(&mut acc, o, a, &ctx, 1.0);
    product_into(&mut acc, a, o, &ctx, -1.0);
    Ok(ManyBodyOperator {
        scalar: acc.c0,
        one_body: acc.c1,
        two_body: acc.c2,
        vacuum: Vacuum::Gno(cum.id),
    })
}

fn product_into(acc: &mut Components, x: &ManyBodyOperator, y: &ManyBodyOperator, ctx: &Ctx, w: f64) {
    let p = p11(&x.one_body, &y.one_body, ctx);
    acc.add_scaled(&p, w);
    let p = p12(&x.one_body, &y.two_body, ctx);
    acc.add_scaled(&p, w);
    // 2-body × 1-body via (X₂Y₁) = (Y₁†X₂†)†.
    let y1_adj = y.one_body.t().to_owned();
    let x2_adj = pair_swap(&x.two_body);
    let p = p12(&y1_adj, &x2_adj, ctx).adjoint();
    acc.add_scaled(&p, w);
    let p = p22(&x.two_body, &y.two_body, ctx);
    acc.add_scaled(&p, w);
}

fn pair_swap(t: &T4) -> T4 {
    let n = t.dim().0;
    let mut out = T4::zeros(t.raw_dim());
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    out[[p, q, r, s]] = t[[r, s, p, q]];
                }
            }
        }
    }
    out
}

/// {1-body}·{1-body}.
fn p11(x1: &Mat, y1: &Mat, ctx: &Ctx) -> Components {
    let n = ctx.n;
    let mut out = Components::zeros(n);
    // scalar: Σ x^p_q y^r_s (γ^p_s η^r_q + λ^{pr}_{qs})
    let gx = ctx.g.dot(x1); // [s,q] = Σ_p γ_ps x_pq
    let ey = ctx.e.dot(y1); // [q,s] = Σ_r η_rq y_rs
    out.c0 += gx
        .iter()
        .zip(ey.t().iter())
        .map(|(a, b)| a * b)
        .sum::<f64>();
    for (pi, &p) in ctx.act.iter().enumerate() {
        for (ri, &r) in ctx.act.iter().enumerate() {
            for (qi, &q) in ctx.act.iter().enumerate() {
                for (si, &s) in ctx.act.iter().enumerate() {
                    out.c0 += x1[[p, q]] * y1[[r, s]] * ctx.l2[[pi, ri, qi, si]];
                }
            }
        }
    }
    // 1-body: x η y − y γ x
    out.c1 += &x1.dot(&ctx.e).dot(y1);
    out.c1 -= &y1.dot(&ctx.g).dot(x1);
    // 2-body: antisymmetrized outer product, raw[p,r,s,q] = −x^p_q y^r_s
    for p in 0..n {
        for r in 0..n {
            for s in 0..n {
                for q in 0..n {
                    out.c2[[p, r, s, q]] -= x1[[p, q]] * y1[[r, s]]
                        - x1[[r, q]] * y1[[p, s]]
                        - x1[[p, s]] * y1[[r, q]]
                        + x1[[r, s]] * y1[[p, q]];
                }
            }
        }
    }
    out
}

/// {1-body}·{2-body}.
fn p12(x1: &Mat, y2: &T4, ctx: &Ctx) -> Components {
    let n = ctx.n;
    let na = ctx.na;
    let act = &ctx.act;
    let l2 = ctx.l2;
    let mut out = Components::zeros(n);

    // --- two-body output ---
    // K1[p,q,r,Q] = Σ_s y2[p,q,r,s] (γ x)[s,Q]; stored −= K1 − K1.swap_lower
    let w1 = ctx.g.dot(x1); // rows with γ support only
    let mut k1 = T4::zeros((n, n, n, n));
    for &s in &ctx.sup {
        for qq in 0..n {
            let wsq = w1[[s, qq]];
            if wsq == 0.0 {
                continue;
            }
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        k1[[p, q, r, qq]] += y2[[p, q, r, s]] * wsq;
                    }
                }
            }
        }
    }
    out.c2 -= &asym_lower(&k1);

    // K2[P,q,r,s] = Σ_p (x η)[P,p] y2[p,q,r,s]; stored += K2 − K2.swap_upper
    let v = x1.dot(&ctx.e);
    let k2 = apply_axis0(&v, y2);
    out.c2 += &asym_upper(&k2);

    // --- one-body output ---
    // pair-pair: P1[q,r] −= Σ_{ps} (γ x η)[s,p] y2[p,q,r,s]
    let w2g = ctx.g.dot(&v); // rows restricted to γ support
    for q in 0..n {
        for r in 0..n {
            let mut acc = 0.0;
            for &s in &ctx.sup {
                for p in 0..n {
                    acc += w2g[[s, p]] * y2[[p, q, r, s]];
                }
            }
            out.c1[[q, r]] -= acc;
        }
    }
    // [A]: P1[q,r] += Σ_{P,p,s,Q ∈ A} x^P_Q λ^{Pp}_{sQ} y2[p,q,r,s]
    for q in 0..n {
        for r in 0..n {
            let mut acc = 0.0;
            for (pi, &pp) in act.iter().enumerate() {
                for (qi, &qq) in act.iter().enumerate() {
                    let xv = x1[[pp, qq]];
                    if xv == 0.0 {
                        continue;
                    }
                    for (ai, &a) in act.iter().enumerate() {
                        for (si, &s) in act.iter().enumerate() {
                            acc += xv * l2[[pi, ai, si, qi]] * y2[[a, q, r, s]];
                        }
                    }
                }
            }
            out.c1[[q, r]] += acc;
        }
    }
    // [B]: P1[q,Q] += ½ Σ_{P∈A} x^P_Q D[P,q],  D[P,q] = Σ_{p,r,s∈A} λ^{Pp}_{rs} y2[p,q,r,s]
    let mut d = Mat::zeros((na, n));
    for (pi, &_p) in act.iter().enumerate() {
        for q in 0..n {
            let mut acc = 0.0;
            for (ai, &a) in act.iter().enumerate() {
                for (ri, &r) in act.iter().enumerate() {
                    for (si, &s) in act.iter().enumerate() {
                        acc += l2[[pi, ai, ri, si]] * y2[[a, q, r, s]];
                    }
                }
            }
            d[[pi, q]] = acc;
        }
    }
    for q in 0..n {
        for qq in 0..n {
            let mut acc = 0.0;
            for (pi, &pp) in act.iter().enumerate() {
                acc += x1[[pp, qq]] * d[[pi, q]];
            }
            out.c1[[q, qq]] += 0.5 * acc;
        }
    }
    // [C]: P1[P,r] += ½ Σ_{Q∈A} x^P_Q F[Q,r],  F[Q,r] = Σ_{p,q,s∈A} λ^{pq}_{sQ} y2[p,q,r,s]
    let mut f2 = Mat::zeros((na, n));
    for (qi, &_q) in act.iter().enumerate() {
        for r in 0..n {
            let mut acc = 0.0;
            for (ai, &a) in act.iter().enumerate() {
                for (bi, &b) in act.iter().enumerate() {
                    for (si, &s) in act.iter().enumerate() {
                        acc += l2[[ai, bi, si, qi]] * y2[[a, b, r, s]];
                    }
                }
            }
            f2[[qi, r]] = acc;
        }
    }
    for p in 0..n {
        for r in 0..n {
            let mut acc = 0.0;
            for (qi, &qq) in act.iter().enumerate() {
                acc += x1[[p, qq]] * f2[[qi, r]];
            }
            out.c1[[p, r]] += 0.5 * acc;
        }
    }

    // --- scalar output ---
    // −½ Σ x^P_Q γ^P_s λ^{pq}_{rQ} y2[p,q,r,s] + ½ Σ x^P_Q η^p_Q λ^{Pq}_{rs} y2[p,q,r,s]
    let mut acc = 0.0;
    for (ai, &a) in act.iter().enumerate() {
        for (bi, &b) in act.iter().enumerate() {
            for (ci, &c) in act.iter().enumerate() {
                for (qi, &qq) in act.iter().enumerate() {
                    let lv = l2[[ai, bi, ci, qi]];
                    if lv == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for s in 0..n {
                        inner += w1[[s, qq]] * y2[[a, b, c, s]];
                    }
                    acc -= 0.5 * lv * inner;
                }
            }
        }
    }
    for (pi, &pp) in act.iter().enumerate() {
        for (ai, &a) in act.iter().enumerate() {
            for (ri, &r) in act.iter().enumerate() {
                for (si, &s) in act.iter().enumerate() {
                    let lv = l2[[pi, ai, ri, si]];
                    if lv == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for p in 0..n {
                        inner += v[[pp, p]] * y2[[p, a, r, s]];
                    }
                    acc += 0.5 * lv * inner;
                }
            }
        }
    }
    out.c0 += acc;
    out
}

/// {2-body}·{2-body}.
fn p22(x2: &T4, y2: &T4, ctx: &Ctx) -> Components {
    let n = ctx.n;
    let na = ctx.na;
    let act = &ctx.act;
    let sup = &ctx.sup;
    let l2 = ctx.l2;
    let mut out = Components::zeros(n);

    // Shared γ/η-dressed intermediates.
    // z3[w,q,r,s] = Σ_p γ_pw x2[p,q,r,s]
    let z3 = density_axis(x2, 0, &ctx.g, sup, sup);
    // w_gg[w,v,r,s] = Σ_q γ_qv z3[w,q,r,s]
    let w_gg = density_axis(&z3, 1, &ctx.g, sup, sup);
    // z7[p,q,r,t] = Σ_s η_ts x2[p,q,r,s]
    let z7 = eta_axis(x2, 3, ctx);
    // w_ee[p,q,u,t] = Σ_r η_ur z7[p,q,r,t]
    let w_ee = eta_axis(&z7, 2, ctx);

    // ---- two-body output ----
    // hole ladder: stored[t,u,r,s] −= ½ Σ_{vw} y2[t,u,v,w] w_gg[w,v,r,s]
    {
        let m1 = permute4(&w_gg, [1, 0, 2, 3]); // [v,w,r,s]
        let term = pair_contract(y2, &m1);
        out.c2.zip_mut_with(&term, |x, &t| *x -= 0.5 * t);
    }
    // particle ladder: stored[p,q,v,w] −= ½ Σ_{tu} w_ee'[p,q,t,u] y2[t,u,v,w]
    {
        let w2 = permute4(&w_ee, [0, 1, 3, 2]); // [p,q,t,u]
        let term = pair_contract(&w2, y2);
        out.c2.zip_mut_with(&term, |x, &t| *x -= 0.5 * t);
    }
    // ring: R[p,t,w,s] = Σ_{uv} x4[p,v,u,s] y2[t,u,v,w]; stored −= antisym(R)
    {
        let x3 = density_axis(x2, 1, &ctx.g, sup, sup); // [p,v,r,s]
        let x4 = eta_axis(&x3, 2, ctx); // [p,v,u,s]
        let a = permute4(&x4, [0, 3, 2, 1]); // [p,s,u,v]
        let b = permute4(y2, [1, 2, 0, 3]); // [u,v,t,w]
        let c = pair_contract(&a, &b); // [p,s,t,w]
        let r4 = permute4(&c, [0, 2, 3, 1]); // [p,t,w,s]
        let term = antisymmetrize(&r4);
        out.c2.zip_mut_with(&term, |x, &t| *x -= t);
    }
    // λ2 (i): stored[t,u,r,s] += ¼ Σ_{vw∈A} y2[t,u,v,w] wl[v,w,r,s]
    let mut wl = Array4::<f64>::zeros((na, na, n, n));
    for (vi, _) in act.iter().enumerate() {
        for (wi, _) in act.iter().enumerate() {
            for r in 0..n {
                for s in 0..n {
                    let mut acc = 0.0;
                    for (pi, &p) in act.iter().enumerate() {
                        for (qi, &q) in act.iter().enumerate() {
                            acc += l2[[pi, qi, vi, wi]] * x2[[p, q, r, s]];
                        }
                    }
                    wl[[vi, wi, r, s]] = acc;
                }
            }
        }
    }
    for t in 0..n {
        for u in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let mut acc = 0.0;
                    for (vi, &v) in act.iter().enumerate() {
                        for (wi, &w) in act.iter().enumerate() {
                            acc += y2[[t, u, v, w]] * wl[[vi, wi, r, s]];
                        }
                    }
                    out.c2[[t, u, r, s]] += 0.25 * acc;
                }
            }
        }
    }
    // λ2 (ii): J1[w,r] = Σ_{pqs∈A} λ^{pq}_{ws} x2[p,q,r,s];
    // R[t,u,v,r] = Σ_{w∈A} y2[t,u,v,w] J1[w,r]; stored −= ½ asym_lower(R)
    let mut j1 = Mat::zeros((na, n));
    for (wi, _) in act.iter().enumerate() {
        for r in 0..n {
            let mut acc = 0.0;
            for (pi, &p) in act.iter().enumerate() {
                for (qi, &q) in act.iter().enumerate() {
                    for (si, &s) in act.iter().enumerate() {
                        acc += l2[[pi, qi, wi, si]] * x2[[p, q, r, s]];
                    }
                }
            }
            j1[[wi, r]] = acc;
        }
    }
    {
        let mut r4 = T4::zeros((n, n, n, n));
        for t in 0..n {
            for u in 0..n {
                for v in 0..n {
                    for (wi, &w) in act.iter().enumerate() {
                        let yv = y2[[t, u, v, w]];
                        if yv == 0.0 {
                            continue;
                        }
                        for r in 0..n {
                            r4[[t, u, v, r]] += yv * j1[[wi, r]];
                        }
                    }
                }
            }
        }
        let term = asym_lower(&r4);
        out.c2.zip_mut_with(&term, |x, &t| *x -= 0.5 * t);
    }
    // λ2 (iii): C8[t,q] = Σ_{prs∈A} λ^{pt}_{rs} x2[p,q,r,s];
    // R[q,u,v,w] = Σ_{t∈A} C8[t,q] y2[t,u,v,w]; stored −= ½ asym_upper(R)
    let mut c8 = Mat::zeros((na, n));
    for (ti, _) in act.iter().enumerate() {
        for q in 0..n {
            let mut acc = 0.0;
            for (pi, &p) in act.iter().enumerate() {
                for (ri, &r) in act.iter().enumerate() {
                    for (si, &s) in act.iter().enumerate() {
                        acc += l2[[pi, ti, ri, si]] * x2[[p, q, r, s]];
                    }
                }
            }
            c8[[ti, q]] = acc;
        }
    }
    {
        let mut r4 = T4::zeros((n, n, n, n));
        for (ti, &t) in act.iter().enumerate() {
            for q in 0..n {
                let cv = c8[[ti, q]];
                if cv == 0.0 {
                    continue;
                }
                for u in 0..n {
                    for v in 0..n {
                        for w in 0..n {
                            r4[[q, u, v, w]] += cv * y2[[t, u, v, w]];
                        }
                    }
                }
            }
        }
        let term = asym_upper(&r4);
        out.c2.zip_mut_with(&term, |x, &t| *x -= 0.5 * t);
    }
    // λ2 (iv): F[q,r,t,w] = Σ_{ps∈A} λ^{pt}_{ws} x2[p,q,r,s];
    // R[q,u,v,r] = Σ_{tw∈A} F[q,r,t,w] y2[t,u,v,w]; stored += antisym(R)
    {
        let mut f = Array4::<f64>::zeros((n, n, na, na));
        for q in 0..n {
            for r in 0..n {
                for (ti, _) in act.iter().enumerate() {
                    for (wi, _) in act.iter().enumerate() {
                        let mut acc = 0.0;
                        for (pi, &p) in act.iter().enumerate() {
                            for (si, &s) in act.iter().enumerate() {
                                acc += l2[[pi, ti, wi, si]] * x2[[p, q, r, s]];
                            }
                        }
                        f[[q, r, ti, wi]] = acc;
                    }
                }
            }
        }
        let mut r4 = T4::zeros((n, n, n, n));
        for q in 0..n {
            for r in 0..n {
                for u in 0..n {
                    for v in 0..n {
                        let mut acc = 0.0;
                        for (ti, &t) in act.iter().enumerate() {
                            for (wi, &w) in act.iter().enumerate() {
                                acc += f[[q, r, ti, wi]] * y2[[t, u, v, w]];
                            }
                        }
                        r4[[q, u, v, r]] += acc;
                    }
                }
            }
        }
        let term = antisymmetrize(&r4);
        out.c2.zip_mut_with(&term, |x, &t| *x += t);
    }
    // λ2 (v): H[p,q,t,u] = Σ_{rs∈A} x2[p,q,r,s] λ^{tu}_{rs};
    // stored[p,q,v,w] += ¼ Σ_{tu∈A} H[p,q,t,u] y2[t,u,v,w]
    let mut hpq = Array4::<f64>::zeros((n, n, na, na));
    for p in 0..n {
        for q in 0..n {
            for (ti, _) in act.iter().enumerate() {
                for (ui, _) in act.iter().enumerate() {
                    let mut acc = 0.0;
                    for (ri, &r) in act.iter().enumerate() {
                        for (si, &s) in act.iter().enumerate() {
                            acc += x2[[p, q, r, s]] * l2[[ti, ui, ri, si]];
                        }
                    }
                    hpq[[p, q, ti, ui]] = acc;
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            for v in 0..n {
                for w in 0..n {
                    let mut acc = 0.0;
                    for (ti, &t) in act.iter().enumerate() {
                        for (ui, &u) in act.iter().enumerate() {
                            acc += hpq[[p, q, ti, ui]] * y2[[t, u, v, w]];
                        }
                    }
                    out.c2[[p, q, v, w]] += 0.25 * acc;
                }
            }
        }
    }
    // λ2 (vii): raw[q,u,r,s] −= ¼ Σ_{ptvw∈A} λ^{pt}_{vw} x2[p,q,r,s] y2[t,u,v,w];
    // with G[p,u] = Σ_{tvw} λ^{pt}_{vw} y2[t,u,v,w] = −J10[p,u] this is
    // stored += ½ (R − R.swap_upper), R[q,u,r,s] = Σ_p x2[p,q,r,s] J10[p,u].
    let j10 = {
        let mut j10 = Mat::zeros((na, n));
        for (pi, _) in act.iter().enumerate() {
            for t in 0..n {
                let mut acc = 0.0;
                for (ui, &u) in act.iter().enumerate() {
                    for (vi, &v) in act.iter().enumerate() {
                        for (wi, &w) in act.iter().enumerate() {
                            acc += l2[[pi, ui, vi, wi]] * y2[[t, u, v, w]];
                        }
                    }
                }
                j10[[pi, t]] = acc;
            }
        }
        j10
    };
    {
        let mut r4 = T4::zeros((n, n, n, n));
        for (pi, &p) in act.iter().enumerate() {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let xv = x2[[p, q, r, s]];
                        if xv == 0.0 {
                            continue;
                        }
                        for u in 0..n {
                            r4[[q, u, r, s]] += xv * j10[[pi, u]];
                        }
                    }
                }
            }
        }
        let term = asym_upper(&r4);
        out.c2.zip_mut_with(&term, |x, &t| *x += 0.5 * t);
    }
    // λ2 (vi): J[s,v] = Σ_{tuw∈A} λ^{tu}_{ws} y2[t,u,v,w];
    // R[p,q,v,r] = Σ_{s∈A} x2[p,q,r,s] J[s,v]; stored −= ½ asym_lower(R)
    {
        let mut j = Mat::zeros((na, n));
        for (si, _) in act.iter().enumerate() {
            for v in 0..n {
                let mut acc = 0.0;
                for (ti, &t) in act.iter().enumerate() {
                    for (ui, &u) in act.iter().enumerate() {
                        for (wi, &w) in act.iter().enumerate() {
                            acc += l2[[ti, ui, wi, si]] * y2[[t, u, v, w]];
                        }
                    }
                }
                j[[si, v]] = acc;
            }
        }
        let mut r4 = T4::zeros((n, n, n, n));
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for (si, &s) in act.iter().enumerate() {
                        let xv = x2[[p, q, r, s]];
                        if xv == 0.0 {
                            continue;
                        }
                        for v in 0..n {
                            r4[[p, q, v, r]] += xv * j[[si, v]];
                        }
                    }
                }
            }
        }
        let term = asym_lower(&r4);
        out.c2.zip_mut_with(&term, |x, &t| *x -= 0.5 * t);
    }

    // ---- one-body output ----
    // T1: P1[u,r] −= ½ Σ_{vw∈sup,t,s} w_gg[w,v,r,s] η_ts y2[t,u,v,w]
    {
        let zt1 = eta_axis(&w_gg, 3, ctx); // [w,v,r,t]
        for u in 0..n {
            for r in 0..n {
                let mut acc = 0.0;
                for &v in sup {
                    for &w in sup {
                        for t in 0..n {
                            acc += zt1[[w, v, r, t]] * y2[[t, u, v, w]];
                        }
                    }
                }
                out.c1[[u, r]] -= 0.5 * acc;
            }
        }
    }
    // T2: P1[q,v] += ½ Σ_{w∈sup,t,u} z2[w,q,t,u] y2[t,u,v,w],
    // z2 = γ-dress of the particle-ladder intermediate
    {
        let w2 = permute4(&w_ee, [0, 1, 3, 2]); // [p,q,t,u]
        let z2 = density_axis(&w2, 0, &ctx.g, sup, sup); // [w,q,t,u]
        for q in 0..n {
            for v in 0..n {
                let mut acc = 0.0;
                for &w in sup {
                    for t in 0..n {
                        for u in 0..n {
                            acc += z2[[w, q, t, u]] * y2[[t, u, v, w]];
                        }
                    }
                }
                out.c1[[q, v]] += 0.5 * acc;
            }
        }
    }
    // T3: K3[w,t] = Σ_{qrs∈A} z3[w,q,r,s] λ^{qt}_{rs}; P1[u,v] −= ½ Σ K3[w,t] y2[t,u,v,w]
    {
        let mut k3 = Mat::zeros((n, na));
        for &w in sup {
            for (ti, _) in act.iter().enumerate() {
                let mut acc = 0.0;
                for (qi, &q) in act.iter().enumerate() {
                    for (ri, &r) in act.iter().enumerate() {
                        for (si, &s) in act.iter().enumerate() {
                            acc += z3[[w, q, r, s]] * l2[[qi, ti, ri, si]];
                        }
                    }
                }
                k3[[w, ti]] = acc;
            }
        }
        for u in 0..n {
            for v in 0..n {
                let mut acc = 0.0;
                for &w in sup {
                    for (ti, &t) in act.iter().enumerate() {
                        acc += k3[[w, ti]] * y2[[t, u, v, w]];
                    }
                }
                out.c1[[u, v]] -= 0.5 * acc;
            }
        }
    }
    // T4: K4[w,t,v,r] = Σ_{qs∈A} z3[w,q,r,s] λ^{qt}_{vs}; P1[u,r] += Σ K4 y2[t,u,v,w]
    {
        let mut k4 = Array4::<f64>::zeros((n, na, na, n));
        for &w in sup {
            for (ti, _) in act.iter().enumerate() {
                for (vi, _) in act.iter().enumerate() {
                    for r in 0..n {
                        let mut acc = 0.0;
                        for (qi, &q) in act.iter().enumerate() {
                            for (si, &s) in act.iter().enumerate() {
                                acc += z3[[w, q, r, s]] * l2[[qi, ti, vi, si]];
                            }
                        }
                        k4[[w, ti, vi, r]] = acc;
                    }
                }
            }
        }
        for u in 0..n {
            for r in 0..n {
                let mut acc = 0.0;
                for &w in sup {
                    for (ti, &t) in act.iter().enumerate() {
                        for (vi, &v) in act.iter().enumerate() {
                            acc += k4[[w, ti, vi, r]] * y2[[t, u, v, w]];
                        }
                    }
                }
                out.c1[[u, r]] += acc;
            }
        }
    }
    // T5: P1[q,v] −= ¼ Σ_{w∈sup,tu∈A} (γ-dressed H)[w,q,t,u] y2[t,u,v,w]
    {
        let z5 = density_axis(&hpq, 0, &ctx.g, sup, sup); // [w,q,t,u] compact t,u
        for q in 0..n {
            for v in 0..n {
                let mut acc = 0.0;
                for &w in sup {
                    for (ti, &t) in act.iter().enumerate() {
                        for (ui, &u) in act.iter().enumerate() {
                            acc += z5[[w, q, ti, ui]] * y2[[t, u, v, w]];
                        }
                    }
                }
                out.c1[[q, v]] -= 0.25 * acc;
            }
        }
    }
    // T6: J6[s,w] = Σ_{tuv∈A} λ^{tu}_{vs} y2[t,u,v,w]; P1[q,r] += ½ Σ z3[w,q,r,s] J6[s,w]
    {
        let mut j6 = Mat::zeros((na, n));
        for (si, _) in act.iter().enumerate() {
            for w in 0..n {
                let mut acc = 0.0;
                for (ti, &t) in act.iter().enumerate() {
                    for (ui, &u) in act.iter().enumerate() {
                        for (vi, &v) in act.iter().enumerate() {
                            acc += l2[[ti, ui, vi, si]] * y2[[t, u, v, w]];
                        }
                    }
                }
                j6[[si, w]] = acc;
            }
        }
        for q in 0..n {
            for r in 0..n {
                let mut acc = 0.0;
                for &w in sup {
                    for (si, &s) in act.iter().enumerate() {
                        acc += z3[[w, q, r, s]] * j6[[si, w]];
                    }
                }
                out.c1[[q, r]] += 0.5 * acc;
            }
        }
    }
    // T7: K7[t,w] = Σ_{pqr∈A} z7[p,q,r,t] λ^{pq}_{wr}; P1[u,v] += ½ Σ K7[t,w] y2[t,u,v,w]
    {
        let mut k7 = Mat::zeros((n, na));
        for t in 0..n {
            for (wi, _) in act.iter().enumerate() {
                let mut acc = 0.0;
                for (pi, &p) in act.iter().enumerate() {
                    for (qi, &q) in act.iter().enumerate() {
                        for (ri, &r) in act.iter().enumerate() {
                            acc += z7[[p, q, r, t]] * l2[[pi, qi, wi, ri]];
                        }
                    }
                }
                k7[[t, wi]] = acc;
            }
        }
        for u in 0..n {
            for v in 0..n {
                let mut acc = 0.0;
                for t in 0..n {
                    for (wi, &w) in act.iter().enumerate() {
                        acc += k7[[t, wi]] * y2[[t, u, v, w]];
                    }
                }
                out.c1[[u, v]] += 0.5 * acc;
            }
        }
    }
    // T8: P1[u,r] += ¼ Σ_{vw∈A,t} (η-dressed wl)[v,w,r,t] y2[t,u,v,w]
    {
        let z8 = eta_axis(&wl, 3, ctx); // [v,w,r,t]
        for u in 0..n {
            for r in 0..n {
                let mut acc = 0.0;
                for (vi, &v) in act.iter().enumerate() {
                    for (wi, &w) in act.iter().enumerate() {
                        for t in 0..n {
                            acc += z8[[vi, wi, r, t]] * y2[[t, u, v, w]];
                        }
                    }
                }
                out.c1[[u, r]] += 0.25 * acc;
            }
        }
    }
    // T9: K9[t,q,u,w] = Σ_{pr∈A} z7[p,q,r,t] λ^{pu}_{wr}; P1[q,v] −= Σ K9 y2[t,u,v,w]
    {
        let mut k9 = Array4::<f64>::zeros((n, n, na, na));
        for t in 0..n {
            for q in 0..n {
                for (ui, _) in act.iter().enumerate() {
                    for (wi, _) in act.iter().enumerate() {
                        let mut acc = 0.0;
                        for (pi, &p) in act.iter().enumerate() {
                            for (ri, &r) in act.iter().enumerate() {
                                acc += z7[[p, q, r, t]] * l2[[pi, ui, wi, ri]];
                            }
                        }
                        k9[[t, q, ui, wi]] = acc;
                    }
                }
            }
        }
        for q in 0..n {
            for v in 0..n {
                let mut acc = 0.0;
                for t in 0..n {
                    for (ui, &u) in act.iter().enumerate() {
                        for (wi, &w) in act.iter().enumerate() {
                            acc += k9[[t, q, ui, wi]] * y2[[t, u, v, w]];
                        }
                    }
                }
                out.c1[[q, v]] -= acc;
            }
        }
    }
    // T10: reuses J10[p,t] = Σ_{uvw∈A} λ^{pu}_{vw} y2[t,u,v,w]; W10 = η J10;
    // P1[q,r] −= ½ Σ_{p∈A,s} x2[p,q,r,s] W10[p,s]
    {
        // W10[p,s] = Σ_t η_ts J10[p,t]
        let w10 = j10.dot(&ctx.e);
        for q in 0..n {
            for r in 0..n {
                let mut acc = 0.0;
                for (pi, &p) in act.iter().enumerate() {
                    for s in 0..n {
                        acc += x2[[p, q, r, s]] * w10[[pi, s]];
                    }
                }
                out.c1[[q, r]] -= 0.5 * acc;
            }
        }
    }

    // ---- scalar output ----
    // S1: +¼ Σ (ηη-dressed w_gg) y2
    {
        let z = eta_axis(&w_gg, 3, ctx); // [w,v,r,t]
        let z = eta_axis(&z, 2, ctx); // [w,v,u,t]
        let mut acc = 0.0;
        for &w in sup {
            for &v in sup {
                for u in 0..n {
                    for t in 0..n {
                        acc += z[[w, v, u, t]] * y2[[t, u, v, w]];
                    }
                }
            }
        }
        out.c0 += 0.25 * acc;
    }
    // S2: −Σ γ^p_w η^t_s λ^{qu}_{vr} x2 y2
    {
        let z2p = eta_axis(&z3, 3, ctx); // [w,q,r,t]
        let mut acc = 0.0;
        for &w in sup {
            for t in 0..n {
                for (qi, &q) in act.iter().enumerate() {
                    for (ri, &r) in act.iter().enumerate() {
                        let zv = z2p[[w, q, r, t]];
                        if zv == 0.0 {
                            continue;
                        }
                        for (ui, &u) in act.iter().enumerate() {
                            for (vi, &v) in act.iter().enumerate() {
                                acc += zv * l2[[qi, ui, vi, ri]] * y2[[t, u, v, w]];
                            }
                        }
                    }
                }
            }
        }
        out.c0 -= acc;
    }
    // S3: −⅛ Σ w_gg λ^{tu}_{rs} y2
    {
        let mut acc = 0.0;
        for &w in sup {
            for &v in sup {
                for (ti, &t) in act.iter().enumerate() {
                    for (ui, &u) in act.iter().enumerate() {
                        let yv = y2[[t, u, v, w]];
                        if yv == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for (ri, &r) in act.iter().enumerate() {
                            for (si, &s) in act.iter().enumerate() {
                                inner += w_gg[[w, v, r, s]] * l2[[ti, ui, ri, si]];
                            }
                        }
                        acc += yv * inner;
                    }
                }
            }
        }
        out.c0 -= 0.125 * acc;
    }
    // S4: −⅛ Σ λ^{pq}_{vw} w_ee y2
    {
        let mut acc = 0.0;
        for (vi, &v) in act.iter().enumerate() {
            for (wi, &w) in act.iter().enumerate() {
                for t in 0..n {
                    for u in 0..n {
                        let yv = y2[[t, u, v, w]];
                        if yv == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for (pi, &p) in act.iter().enumerate() {
                            for (qi, &q) in act.iter().enumerate() {
                                inner += l2[[pi, qi, vi, wi]] * w_ee[[p, q, u, t]];
                            }
                        }
                        acc += yv * inner;
                    }
                }
            }
        }
        out.c0 -= 0.125 * acc;
    }
    // S5: +1/16 Σ wl λ^{tu}_{rs} y2
    {
        let mut acc = 0.0;
        for (vi, &v) in act.iter().enumerate() {
            for (wi, &w) in act.iter().enumerate() {
                for (ti, &t) in act.iter().enumerate() {
                    for (ui, &u) in act.iter().enumerate() {
                        let yv = y2[[t, u, v, w]];
                        if yv == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for (ri, &r) in act.iter().enumerate() {
                            for (si, &s) in act.iter().enumerate() {
                                inner += wl[[vi, wi, r, s]] * l2[[ti, ui, ri, si]];
                            }
                        }
                        acc += yv * inner;
                    }
                }
            }
        }
        out.c0 += acc / 16.0;
    }
    // S6: +½ Σ λ^{pt}_{ws} λ^{qu}_{vr} x2 y2 (all indices active)
    {
        let mut g6 = Array4::<f64>::zeros((na, na, na, na)); // [t,w,q,r]
        for (ti, _) in act.iter().enumerate() {
            for (wi, _) in act.iter().enumerate() {
                for (qi, &q) in act.iter().enumerate() {
                    for (ri, &r) in act.iter().enumerate() {
                        let mut acc = 0.0;
                        for (pi, &p) in act.iter().enumerate() {
                            for (si, &s) in act.iter().enumerate() {
                                acc += l2[[pi, ti, wi, si]] * x2[[p, q, r, s]];
                            }
                        }
                        g6[[ti, wi, qi, ri]] = acc;
                    }
                }
            }
        }
        let mut acc = 0.0;
        for (ti, &t) in act.iter().enumerate() {
            for (wi, &w) in act.iter().enumerate() {
                for (ui, &u) in act.iter().enumerate() {
                    for (vi, &v) in act.iter().enumerate() {
                        let yv = y2[[t, u, v, w]];
                        if yv == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for (qi, _) in act.iter().enumerate() {
                            for (ri, _) in act.iter().enumerate() {
                                inner += g6[[ti, wi, qi, ri]] * l2[[qi, ui, vi, ri]];
                            }
                        }
                        acc += yv * inner;
                    }
                }
            }
        }
        out.c0 += 0.5 * acc;
    }
    // S7: −¼ Σ λ^{pq}_{ws} λ^{tu}_{vr} x2 y2, reusing J1
    {
        let mut acc = 0.0;
        for (ti, &t) in act.iter().enumerate() {
            for (ui, &u) in act.iter().enumerate() {
                for (vi, &v) in act.iter().enumerate() {
                    for (wi, &w) in act.iter().enumerate() {
                        let yv = y2[[t, u, v, w]];
                        if yv == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for (ri, &r) in act.iter().enumerate() {
                            inner += j1[[wi, r]] * l2[[ti, ui, vi, ri]];
                        }
                        acc += yv * inner;
                    }
                }
            }
        }
        out.c0 -= 0.25 * acc;
    }
    // S8: −¼ Σ λ^{pt}_{rs} λ^{qu}_{vw} x2 y2, reusing C8
    {
        let mut acc = 0.0;
        for (ti, &t) in act.iter().enumerate() {
            for (ui, &u) in act.iter().enumerate() {
                for (vi, &v) in act.iter().enumerate() {
                    for (wi, &w) in act.iter().enumerate() {
                        let yv = y2[[t, u, v, w]];
                        if yv == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for (qi, &q) in act.iter().enumerate() {
                            inner += c8[[ti, q]] * l2[[qi, ui, vi, wi]];
                        }
                        acc += yv * inner;
                    }
                }
            }
        }
        out.c0 -= 0.25 * acc;
    }
    // λ3 one-body terms: the 3+3-leg cumulant groups leaving one creator and
    // one annihilator uncontracted.
    if let Some(l3) = ctx.l3 {
        if crate::dsrg::LAMBDA3_IN_ONE_BODY {
            // L3a: P1[u,v] −= ¼ Σ λ3^{pqt}_{wrs} x2[p,q,r,s] y2[t,u,v,w]
            let mut ka = Mat::zeros((na, na));
            for (ti, _) in act.iter().enumerate() {
                for (wi, _) in act.iter().enumerate() {
                    let mut acc = 0.0;
                    for (pi, &p) in act.iter().enumerate() {
                        for (qi, &q) in act.iter().enumerate() {
                            for (ri, &r) in act.iter().enumerate() {
                                for (si, &s) in act.iter().enumerate() {
                                    acc += l3[[pi, qi, ti, wi, ri, si]] * x2[[p, q, r, s]];
                                }
                            }
                        }
                    }
                    ka[[ti, wi]] = acc;
                }
            }
            for u in 0..n {
                for v in 0..n {
                    let mut acc = 0.0;
                    for (ti, &t) in act.iter().enumerate() {
                        for (wi, &w) in act.iter().enumerate() {
                            acc += ka[[ti, wi]] * y2[[t, u, v, w]];
                        }
                    }
                    out.c1[[u, v]] -= 0.25 * acc;
                }
            }
            // L3b: P1[u,r] −= ¼ Σ λ3^{pqt}_{vws} x2[p,q,r,s] y2[t,u,v,w]
            let mut kb = Array4::<f64>::zeros((na, na, na, n));
            for (ti, _) in act.iter().enumerate() {
                for (vi, _) in act.iter().enumerate() {
                    for (wi, _) in act.iter().enumerate() {
                        for r in 0..n {
                            let mut acc = 0.0;
                            for (pi, &p) in act.iter().enumerate() {
                                for (qi, &q) in act.iter().enumerate() {
                                    for (si, &s) in act.iter().enumerate() {
                                        acc += l3[[pi, qi, ti, vi, wi, si]]
                                            * x2[[p, q, r, s]];
                                    }
                                }
                            }
                            kb[[ti, vi, wi, r]] = acc;
                        }
                    }
                }
            }
            for u in 0..n {
                for r in 0..n {
                    let mut acc = 0.0;
                    for (ti, &t) in act.iter().enumerate() {
                        for (vi, &v) in act.iter().enumerate() {
                            for (wi, &w) in act.iter().enumerate() {
                                acc += kb[[ti, vi, wi, r]] * y2[[t, u, v, w]];
                            }
                        }
                    }
                    out.c1[[u, r]] -= 0.25 * acc;
                }
            }
            // L3c: P1[p,v] += ¼ Σ λ3^{qtu}_{wrs} x2[p,q,r,s] y2[t,u,v,w]
            let mut kc = Array4::<f64>::zeros((na, na, na, n));
            for (ti, _) in act.iter().enumerate() {
                for (ui, _) in act.iter().enumerate() {
                    for (wi, _) in act.iter().enumerate() {
                        for p in 0..n {
                            let mut acc = 0.0;
                            for (qi, &q) in act.iter().enumerate() {
                                for (ri, &r) in act.iter().enumerate() {
                                    for (si, &s) in act.iter().enumerate() {
                                        acc += l3[[qi, ti, ui, wi, ri, si]]
                                            * x2[[p, q, r, s]];
                                    }
                                }
                            }
                            kc[[ti, ui, wi, p]] = acc;
                        }
                    }
                }
            }
            for p in 0..n {
                for v in 0..n {
                    let mut acc = 0.0;
                    for (ti, &t) in act.iter().enumerate() {
                        for (ui, &u) in act.iter().enumerate() {
                            for (wi, &w) in act.iter().enumerate() {
                                acc += kc[[ti, ui, wi, p]] * y2[[t, u, v, w]];
                            }
                        }
                    }
                    out.c1[[p, v]] += 0.25 * acc;
                }
            }
            // L3d: P1[p,r] += ¼ Σ λ3^{qtu}_{vws} x2[p,q,r,s] y2[t,u,v,w]
            let mut kd = Mat::zeros((na, na));
            for (qi, _) in act.iter().enumerate() {
                for (si, _) in act.iter().enumerate() {
                    let mut acc = 0.0;
                    for (ti, &t) in act.iter().enumerate() {
                        for (ui, &u) in act.iter().enumerate() {
                            for (vi, &v) in act.iter().enumerate() {
                                for (wi, &w) in act.iter().enumerate() {
                                    acc += l3[[qi, ti, ui, vi, wi, si]]
                                        * y2[[t, u, v, w]];
                                }
                            }
                        }
                    }
                    kd[[qi, si]] = acc;
                }
            }
            for p in 0..n {
                for r in 0..n {
                    let mut acc = 0.0;
                    for (qi, &q) in act.iter().enumerate() {
                        for (si, &s) in act.iter().enumerate() {
                            acc += kd[[qi, si]] * x2[[p, q, r, s]];
                        }
                    }
                    out.c1[[p, r]] += 0.25 * acc;
                }
            }
        }
        // S9: −¼ Σ_{w∈sup} z3[w,q,r,s] λ3^{qtu}_{vrs} y2[t,u,v,w]
        // S9: −¼ Σ_{w∈sup} z3[w,q,r,s] λ3^{qtu}_{vrs} y2[t,u,v,w]
        let mut acc = 0.0;
        for &w in sup {
            for (ti, &t) in act.iter().enumerate() {
                for (ui, &u) in act.iter().enumerate() {
                    for (vi, &v) in act.iter().enumerate() {
                        let yv = y2[[t, u, v, w]];
                        if yv == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for (qi, &q) in act.iter().enumerate() {
                            for (ri, &r) in act.iter().enumerate() {
                                for (si, &s) in act.iter().enumerate() {
                                    inner += z3[[w, q, r, s]] * l3[[qi, ti, ui, vi, ri, si]];
                                }
                            }
                        }
                        acc += yv * inner;
                    }
                }
            }
        }
        out.c0 -= 0.25 * acc;
        // S10: +¼ Σ_t z7[p,q,r,t] λ3^{pqu}_{vwr} y2[t,u,v,w]
        let mut acc = 0.0;
        for t in 0..n {
            for (ui, &u) in act.iter().enumerate() {
                for (vi, &v) in act.iter().enumerate() {
                    for (wi, &w) in act.iter().enumerate() {
                        let yv = y2[[t, u, v, w]];
                        if yv == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for (pi, &p) in act.iter().enumerate() {
                            for (qi, &q) in act.iter().enumerate() {
                                for (ri, &r) in act.iter().enumerate() {
                                    inner += z7[[p, q, r, t]] * l3[[pi, qi, ui, vi, wi, ri]];
                                }
                            }
                        }
                        acc += yv * inner;
                    }
                }
            }
        }
        out.c0 += 0.25 * acc;
    }

    out
}

/// out[..., t, ...] = Σ_{s∈cols} d[t,s]·x[..., s, ...] for t ∈ rows, else 0.
/// The chosen axis must have the full spin-orbital extent.
fn density_axis(x: &Array4<f64>, axis: usize, d: &Mat, rows: &[usize], cols: &[usize]) -> Array4<f64> {
    let perm = axis_to_last(axis);
    let moved = x.view().permuted_axes(perm).as_standard_layout().to_owned();
    let dims = moved.raw_dim();
    let m: usize = dims[0] * dims[1] * dims[2];
    let nn = dims[3];
    let flat = moved.into_shape_with_order((m, nn)).expect("contiguous");
    let mut out = Mat::zeros((m, nn));
    for row in 0..m {
        for &t in rows {
            let mut acc = 0.0;
            for &s in cols {
                acc += d[[t, s]] * flat[[row, s]];
            }
            out[[row, t]] = acc;
        }
    }
    let out4 = out
        .into_shape_with_order((dims[0], dims[1], dims[2], dims[3]))
        .expect("shape");
    out4
        .view()
        .permuted_axes(last_to_axis(axis))
        .as_standard_layout()
        .to_owned()
}

/// η-contraction on one axis: the identity part minus the γ part.
fn eta_axis(x: &Array4<f64>, axis: usize, ctx: &Ctx) -> Array4<f64> {
    let mut out = x.clone();
    let gamma_part = density_axis(x, axis, &ctx.g, &ctx.sup, &ctx.sup);
    out.zip_mut_with(&gamma_part, |a, &b| *a -= b);
    out
}

fn axis_to_last(axis: usize) -> [usize; 4] {
    match axis {
        0 => [1, 2, 3, 0],
        1 => [0, 2, 3, 1],
        2 => [0, 1, 3, 2],
        3 => [0, 1, 2, 3],
        _ => unreachable!(),
    }
}

fn last_to_axis(axis: usize) -> [usize; 4] {
    match axis {
        0 => [3, 0, 1, 2],
        1 => [0, 3, 1, 2],
        2 => [0, 1, 3, 2],
        3 => [0, 1, 2, 3],
        _ => unreachable!(),
    }
}

fn permute4(x: &T4, perm: [usize; 4]) -> T4 {
    x.view().permuted_axes(perm).as_standard_layout().to_owned()
}

/// out[i,j,m,n] = Σ_{kl} a[i,j,k,l] b[k,l,m,n]; picks a sparse path when one
/// side is mostly zero, otherwise a reshaped matrix product.
fn pair_contract(a: &T4, b: &T4) -> T4 {
    let (di, dj, dk, dl) = a.dim();
    let (bk, bl, dm, dn) = b.dim();
    assert_eq!((dk, dl), (bk, bl));
    let nnz_a = a.iter().filter(|&&x| x != 0.0).count();
    let nnz_b = b.iter().filter(|&&x| x != 0.0).count();
    let size_a = di * dj * dk * dl;
    let size_b = bk * bl * dm * dn;
    let sparse_a = (nnz_a as f64) < 0.15 * size_a as f64;
    let sparse_b = (nnz_b as f64) < 0.15 * size_b as f64;

    if sparse_a || sparse_b {
        let mut out = T4::zeros((di, dj, dm, dn));
        if sparse_b && (!sparse_a || nnz_b <= nnz_a) {
            for k in 0..dk {
                for l in 0..dl {
                    // gather this row of b
                    let mut row: Vec<(usize, usize, f64)> = Vec::new();
                    for m in 0..dm {
                        for nn in 0..dn {
                            let v = b[[k, l, m, nn]];
                            if v != 0.0 {
                                row.push((m, nn, v));
                            }
                        }
                    }
                    if row.is_empty() {
                        continue;
                    }
                    for i in 0..di {
                        for j in 0..dj {
                            let av = a[[i, j, k, l]];
                            if av == 0.0 {
                                continue;
                            }
                            for &(m, nn, v) in &row {
                                out[[i, j, m, nn]] += av * v;
                            }
                        }
                    }
                }
            }
        } else {
            for i in 0..di {
                for j in 0..dj {
                    for k in 0..dk {
                        for l in 0..dl {
                            let av = a[[i, j, k, l]];
                            if av == 0.0 {
                                continue;
                            }
                            for m in 0..dm {
                                for nn in 0..dn {
                                    out[[i, j, m, nn]] += av * b[[k, l, m, nn]];
                                }
                            }
                        }
                    }
                }
            }
        }
        return out;
    }

    let a2 = a
        .view()
        .into_shape_with_order((di * dj, dk * dl))
        .expect("contiguous")
        .to_owned();
    let b2 = b
        .view()
        .into_shape_with_order((bk * bl, dm * dn))
        .expect("contiguous")
        .to_owned();
    let c2 = a2.dot(&b2);
    c2.into_shape_with_order((di, dj, dm, dn)).expect("shape")
}

/// out[P,q,r,s] = Σ_p v[P,p] y[p,q,r,s], sparse-aware on either operand.
fn apply_axis0(v: &Mat, y: &T4) -> T4 {
    let n = v.nrows();
    let (dp, dq, dr, ds) = y.dim();
    assert_eq!(dp, n);
    let nnz_v = v.iter().filter(|&&x| x != 0.0).count();
    let mut out = T4::zeros((n, dq, dr, ds));
    if (nnz_v as f64) < 0.2 * (n * n) as f64 {
        for pp in 0..n {
            for p in 0..n {
                let vv = v[[pp, p]];
                if vv == 0.0 {
                    continue;
                }
                let src = y.index_axis(ndarray::Axis(0), p);
                let mut dst = out.index_axis_mut(ndarray::Axis(0), pp);
                dst.scaled_add(vv, &src);
            }
        }
        return out;
    }
    let y2 = y
        .view()
        .into_shape_with_order((n, dq * dr * ds))
        .expect("contiguous")
        .to_owned();
    let o2 = v.dot(&y2);
    o2.into_shape_with_order((n, dq, dr, ds)).expect("shape")
}
