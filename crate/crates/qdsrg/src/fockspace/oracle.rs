//! Brute-force commutator oracle: exhaustive enumeration of generalized Wick
//! contraction patterns between two normal-ordered operator strings.
//!
//! Contractions between two strings ordered against the same correlated
//! reference come in four kinds: a creator on the left paired with an
//! annihilator on the right (γ), an annihilator on the left paired with a
//! creator on the right (η = 1 − γ), and cumulant groups of 2+2 (λ2) or 3+3
//! (λ3) legs spanning both strings. Signs are permutation parities of
//! gathering each group's legs, creators first, ahead of the uncontracted
//! remainder. Output strings of rank 3 are discarded, and λ3 groups enter
//! fully contracted patterns only, matching the production engine's scalar-
//! only three-body convention.
//!
//! Everything is evaluated densely over the full spin-orbital range, so this
//! path is for small instances; the production engine in `dsrg` factorizes
//! the same algebra into batched contractions.

use crate::cumulants::CumulantSet;
use crate::dsrg::{ManyBodyOperator, Vacuum};
use crate::tensor::{antisymmetrize, Mat, T4};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GroupKind {
    Gamma,
    Eta,
    Lambda2,
    Lambda3,
}

#[derive(Debug, Clone)]
struct Group {
    kind: GroupKind,
    /// Leg positions in ascending order of appearance.
    legs: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Pattern {
    groups: Vec<Group>,
    uncontracted: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Leg {
    cre: bool,
    src: usize,
}

/// Dense tensor with per-axis labels, all axes of extent `n`.
#[derive(Debug, Clone)]
struct Labeled {
    labels: Vec<usize>,
    n: usize,
    data: Vec<f64>,
}

impl Labeled {
    fn rank(&self) -> usize {
        self.labels.len()
    }
}

/// Contracts two labeled tensors over their shared labels.
fn contract(a: &Labeled, b: &Labeled) -> Labeled {
    let n = a.n.max(b.n);
    let shared: Vec<usize> = a
        .labels
        .iter()
        .copied()
        .filter(|l| b.labels.contains(l))
        .collect();
    let free_a: Vec<usize> = a.labels.iter().copied().filter(|l| !shared.contains(l)).collect();
    let free_b: Vec<usize> = b.labels.iter().copied().filter(|l| !shared.contains(l)).collect();
    let out_labels: Vec<usize> = free_a.iter().chain(free_b.iter()).copied().collect();

    let stride = |labels: &[usize]| -> Vec<usize> {
        // Row-major strides for a tensor with `labels.len()` axes of extent n.
        let r = labels.len();
        (0..r).map(|i| n.pow((r - 1 - i) as u32)).collect()
    };
    let a_strides = stride(&a.labels);
    let b_strides = stride(&b.labels);
    let pos_in = |labels: &[usize], l: usize| labels.iter().position(|&x| x == l).unwrap();

    let out_rank = out_labels.len();
    let mut out = vec![0.0; n.pow(out_rank as u32).max(1)];
    let out_strides = stride(&out_labels);

    let mut free_idx = vec![0usize; out_rank];
    let mut shared_idx = vec![0usize; shared.len()];
    loop {
        // offset contributions of the free labels
        let mut a_base = 0usize;
        let mut b_base = 0usize;
        let mut out_off = 0usize;
        for (k, &l) in out_labels.iter().enumerate() {
            out_off += free_idx[k] * out_strides[k];
            if free_a.contains(&l) {
                a_base += free_idx[k] * a_strides[pos_in(&a.labels, l)];
            } else {
                b_base += free_idx[k] * b_strides[pos_in(&b.labels, l)];
            }
        }
        let mut acc = 0.0;
        loop {
            let mut a_off = a_base;
            let mut b_off = b_base;
            for (k, &l) in shared.iter().enumerate() {
                a_off += shared_idx[k] * a_strides[pos_in(&a.labels, l)];
                b_off += shared_idx[k] * b_strides[pos_in(&b.labels, l)];
            }
            acc += a.data[a_off] * b.data[b_off];
            if !increment(&mut shared_idx, n) {
                break;
            }
        }
        out[out_off] += acc;
        if !increment(&mut free_idx, n) {
            break;
        }
    }
    Labeled {
        labels: out_labels,
        n,
        data: out,
    }
}

fn increment(idx: &mut [usize], n: usize) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < n {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// Reorders a labeled tensor's data to match `want` label order.
fn permute_to(t: &Labeled, want: &[usize]) -> Vec<f64> {
    assert_eq!(t.labels.len(), want.len());
    if t.labels == want {
        return t.data.clone();
    }
    let n = t.n;
    let r = want.len();
    let src_pos: Vec<usize> = want
        .iter()
        .map(|l| t.labels.iter().position(|x| x == l).unwrap())
        .collect();
    let strides: Vec<usize> = (0..r).map(|i| n.pow((r - 1 - i) as u32)).collect();
    let mut out = vec![0.0; t.data.len()];
    let mut idx = vec![0usize; r];
    loop {
        // idx[k] is the value of label want[k]; that label sits on axis
        // src_pos[k] of the source layout.
        let mut src_off = 0;
        let mut dst_off = 0;
        for k in 0..r {
            dst_off += idx[k] * strides[k];
            src_off += idx[k] * strides[src_pos[k]];
        }
        out[dst_off] = t.data[src_off];
        if !increment(&mut idx, n) {
            break;
        }
    }
    out
}

fn inversions(perm: &[usize]) -> usize {
    let mut count = 0;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                count += 1;
            }
        }
    }
    count
}

fn pattern_sign(pat: &Pattern, legs: &[Leg]) -> f64 {
    let mut groups = pat.groups.clone();
    groups.sort_by_key(|g| *g.legs.iter().min().unwrap());
    let mut target: Vec<usize> = Vec::with_capacity(legs.len());
    for g in &groups {
        match g.kind {
            GroupKind::Gamma | GroupKind::Eta => target.extend(&g.legs),
            GroupKind::Lambda2 | GroupKind::Lambda3 => {
                // creators first, annihilators after, each in appearance order
                target.extend(g.legs.iter().copied().filter(|&l| legs[l].cre));
                target.extend(g.legs.iter().copied().filter(|&l| !legs[l].cre));
            }
        }
    }
    target.extend(&pat.uncontracted);
    let mut inv = inversions(&target);
    // Rearranging the uncontracted remainder into creators-then-annihilators.
    let kinds: Vec<bool> = pat.uncontracted.iter().map(|&l| legs[l].cre).collect();
    for i in 0..kinds.len() {
        for j in (i + 1)..kinds.len() {
            if !kinds[i] && kinds[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// All contraction patterns for the given leg list.
fn enumerate_patterns(legs: &[Leg], allow_lambda3: bool) -> Vec<Pattern> {
    let mut out = Vec::new();
    let mut assigned = vec![false; legs.len()];
    let mut groups: Vec<Group> = Vec::new();
    let mut uncontracted: Vec<usize> = Vec::new();
    recurse(legs, allow_lambda3, &mut assigned, &mut groups, &mut uncontracted, &mut out);
    out
}

fn recurse(
    legs: &[Leg],
    allow_lambda3: bool,
    assigned: &mut Vec<bool>,
    groups: &mut Vec<Group>,
    uncontracted: &mut Vec<usize>,
    out: &mut Vec<Pattern>,
) {
    let Some(anchor) = assigned.iter().position(|&a| !a) else {
        // complete assignment: keep rank ≤ 2 outputs, λ3 in scalars only
        if uncontracted.len() > 4 {
            return;
        }
        let l3_cap = if crate::dsrg::LAMBDA3_IN_ONE_BODY { 2 } else { 0 };
        if groups.iter().any(|g| g.kind == GroupKind::Lambda3) && uncontracted.len() > l3_cap {
            return;
        }
        out.push(Pattern {
            groups: groups.clone(),
            uncontracted: uncontracted.clone(),
        });
        return;
    };

    // Option 1: leave the anchor uncontracted.
    assigned[anchor] = true;
    uncontracted.push(anchor);
    recurse(legs, allow_lambda3, assigned, groups, uncontracted, out);
    uncontracted.pop();
    assigned[anchor] = false;

    let unassigned: Vec<usize> = (0..legs.len()).filter(|&l| !assigned[l]).collect();

    // Option 2: pair contraction anchored on a left-string leg.
    if legs[anchor].src == 0 {
        for &j in &unassigned {
            if j == anchor || legs[j].src != 1 || legs[j].cre == legs[anchor].cre {
                continue;
            }
            let kind = if legs[anchor].cre { GroupKind::Gamma } else { GroupKind::Eta };
            assigned[anchor] = true;
            assigned[j] = true;
            groups.push(Group {
                kind,
                legs: vec![anchor, j],
            });
            recurse(legs, allow_lambda3, assigned, groups, uncontracted, out);
            groups.pop();
            assigned[anchor] = false;
            assigned[j] = false;
        }
    }

    // Option 3/4: cumulant groups containing the anchor.
    for k in [2usize, 3] {
        if k == 3 && !allow_lambda3 {
            continue;
        }
        let need_cre = if legs[anchor].cre { k - 1 } else { k };
        let need_ann = if legs[anchor].cre { k } else { k - 1 };
        let cres: Vec<usize> = unassigned
            .iter()
            .copied()
            .filter(|&l| l != anchor && legs[l].cre)
            .collect();
        let anns: Vec<usize> = unassigned
            .iter()
            .copied()
            .filter(|&l| l != anchor && !legs[l].cre)
            .collect();
        for cre_pick in subsets(&cres, need_cre) {
            for ann_pick in subsets(&anns, need_ann) {
                let mut members = vec![anchor];
                members.extend(&cre_pick);
                members.extend(&ann_pick);
                members.sort_unstable();
                let has_left = members.iter().any(|&l| legs[l].src == 0);
                let has_right = members.iter().any(|&l| legs[l].src == 1);
                if !has_left || !has_right {
                    continue;
                }
                let kind = if k == 2 { GroupKind::Lambda2 } else { GroupKind::Lambda3 };
                for &m in &members {
                    assigned[m] = true;
                }
                groups.push(Group {
                    kind,
                    legs: members.clone(),
                });
                recurse(legs, allow_lambda3, assigned, groups, uncontracted, out);
                groups.pop();
                for &m in &members {
                    assigned[m] = false;
                }
            }
        }
    }
}

fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    if k == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = k as isize - 1;
        while i >= 0 && idx[i as usize] == n - k + i as usize {
            i -= 1;
        }
        if i < 0 {
            break;
        }
        let i = i as usize;
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

struct Densities {
    g: Labeled,
    e: Labeled,
    l2: Labeled,
    l3: Option<Labeled>,
    n: usize,
}

fn embed_densities(cum: &CumulantSet) -> Densities {
    let n = cum.n_spin_orbitals();
    let g = cum.g1_full();
    let e = cum.eta1_full();
    let act = &cum.space.active;
    let na = act.len();
    let mut l2 = vec![0.0; n * n * n * n];
    for a in 0..na {
        for b in 0..na {
            for c in 0..na {
                for d in 0..na {
                    let off = ((act[a] * n + act[b]) * n + act[c]) * n + act[d];
                    l2[off] = cum.l2[[a, b, c, d]];
                }
            }
        }
    }
    let l3 = cum.l3.as_ref().map(|t| {
        let mut l3 = vec![0.0; n.pow(6)];
        for a in 0..na {
            for b in 0..na {
                for c in 0..na {
                    for d in 0..na {
                        for f in 0..na {
                            for h in 0..na {
                                let off = ((((act[a] * n + act[b]) * n + act[c]) * n + act[d])
                                    * n
                                    + act[f])
                                    * n
                                    + act[h];
                                l3[off] = t[[a, b, c, d, f, h]];
                            }
                        }
                    }
                }
            }
        }
        Labeled {
            labels: vec![],
            n,
            data: l3,
        }
    });
    Densities {
        g: Labeled {
            labels: vec![],
            n,
            data: g.iter().copied().collect(),
        },
        e: Labeled {
            labels: vec![],
            n,
            data: e.iter().copied().collect(),
        },
        l2: Labeled {
            labels: vec![],
            n,
            data: l2,
        },
        l3,
        n,
    }
}

/// One- and two-body GNO components of the commutator [O, A] by exhaustive
/// contraction-pattern enumeration. Independent of `dsrg::commutator_12`;
/// intended for small spin-orbital counts.
pub fn wick_commutator_oracle(
    o: &ManyBodyOperator,
    a: &ManyBodyOperator,
    cum: &CumulantSet,
) -> Result<ManyBodyOperator> {
    let (Vacuum::Gno(oid), Vacuum::Gno(aid)) = (o.vacuum, a.vacuum) else {
        return Err(Error::Contract(
            "oracle requires operators normal-ordered against the reference".into(),
        ));
    };
    if oid != cum.id || aid != cum.id {
        return Err(Error::Contract(
            "operators ordered against a different cumulant set".into(),
        ));
    }
    let n = o.n_spin_orbitals();
    let dens = embed_densities(cum);

    let mut raw0 = 0.0;
    let mut raw1 = Mat::zeros((n, n));
    let mut raw2 = T4::zeros((n, n, n, n));

    for (x, y, weight) in [(o, a, 1.0), (a, o, -1.0)] {
        for kx in [1usize, 2] {
            for ky in [1usize, 2] {
                accumulate_product(
                    x, kx, y, ky, weight, &dens, &mut raw0, &mut raw1, &mut raw2,
                );
            }
        }
    }

    Ok(ManyBodyOperator {
        scalar: raw0,
        one_body: raw1,
        two_body: antisymmetrize(&raw2),
        vacuum: Vacuum::Gno(cum.id),
    })
}

#[allow(clippy::too_many_arguments)]
fn accumulate_product(
    x: &ManyBodyOperator,
    kx: usize,
    y: &ManyBodyOperator,
    ky: usize,
    weight: f64,
    dens: &Densities,
    raw0: &mut f64,
    raw1: &mut Mat,
    raw2: &mut T4,
) {
    let n = dens.n;
    let mut legs: Vec<Leg> = Vec::new();
    for _ in 0..kx {
        legs.push(Leg { cre: true, src: 0 });
    }
    for _ in 0..kx {
        legs.push(Leg { cre: false, src: 0 });
    }
    for _ in 0..ky {
        legs.push(Leg { cre: true, src: 1 });
    }
    for _ in 0..ky {
        legs.push(Leg { cre: false, src: 1 });
    }
    // Positions: creators of a rank-k string precede its annihilators.
    // Tensor slot order for rank 2: [u1, u2, l1, l2] ↔ legs [c0, c1, a_last, a_first].

    let tensor_labels = |base: usize, k: usize| -> Vec<usize> {
        if k == 1 {
            vec![base, base + 1]
        } else {
            vec![base, base + 1, base + 3, base + 2]
        }
    };
    let x_labels = tensor_labels(0, kx);
    let y_labels = tensor_labels(2 * kx, ky);
    let x_tensor = Labeled {
        labels: x_labels,
        n,
        data: if kx == 1 {
            x.one_body.iter().copied().collect()
        } else {
            x.two_body.iter().copied().collect()
        },
    };
    let y_tensor = Labeled {
        labels: y_labels,
        n,
        data: if ky == 1 {
            y.one_body.iter().copied().collect()
        } else {
            y.two_body.iter().copied().collect()
        },
    };
    let prefactor = 0.25f64.powi((kx == 2) as i32 + (ky == 2) as i32);

    let patterns = enumerate_patterns(&legs, dens.l3.is_some());
    for pat in &patterns {
        let sign = pattern_sign(pat, &legs);
        let mut factors: Vec<Labeled> = Vec::new();
        for group in &pat.groups {
            let labeled = match group.kind {
                GroupKind::Gamma => Labeled {
                    labels: vec![group.legs[0], group.legs[1]],
                    n,
                    data: dens.g.data.clone(),
                },
                GroupKind::Eta => Labeled {
                    // value is η^{creator}_{annihilator}
                    labels: vec![group.legs[1], group.legs[0]],
                    n,
                    data: dens.e.data.clone(),
                },
                GroupKind::Lambda2 => {
                    let cres: Vec<usize> =
                        group.legs.iter().copied().filter(|&l| legs[l].cre).collect();
                    let anns: Vec<usize> =
                        group.legs.iter().copied().filter(|&l| !legs[l].cre).collect();
                    Labeled {
                        labels: vec![cres[0], cres[1], anns[1], anns[0]],
                        n,
                        data: dens.l2.data.clone(),
                    }
                }
                GroupKind::Lambda3 => {
                    let cres: Vec<usize> =
                        group.legs.iter().copied().filter(|&l| legs[l].cre).collect();
                    let anns: Vec<usize> =
                        group.legs.iter().copied().filter(|&l| !legs[l].cre).collect();
                    Labeled {
                        labels: vec![cres[0], cres[1], cres[2], anns[2], anns[1], anns[0]],
                        n,
                        data: dens.l3.as_ref().unwrap().data.clone(),
                    }
                }
            };
            factors.push(labeled);
        }

        // Greedy contraction: start from X, fold the factor sharing the most
        // labels, finish with Y.
        let mut cur = x_tensor.clone();
        let mut remaining: Vec<Labeled> = factors;
        remaining.push(y_tensor.clone());
        while !remaining.is_empty() {
            let (best, _) = remaining
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let shared = f.labels.iter().filter(|l| cur.labels.contains(l)).count();
                    // Y is huge; keep it last unless it shares a lot.
                    (i, (shared * 10).saturating_sub(f.rank()))
                })
                .max_by_key(|&(_, score)| score)
                .unwrap();
            let f = remaining.remove(best);
            cur = contract(&cur, &f);
        }

        let w = weight * sign * prefactor;
        let uncontracted = &pat.uncontracted;
        match uncontracted.len() {
            0 => *raw0 += w * cur.data[0],
            2 => {
                let cre = uncontracted.iter().copied().find(|&l| legs[l].cre).unwrap();
                let ann = uncontracted.iter().copied().find(|&l| !legs[l].cre).unwrap();
                let data = permute_to(&cur, &[cre, ann]);
                for p in 0..n {
                    for q in 0..n {
                        raw1[[p, q]] += w * data[p * n + q];
                    }
                }
            }
            4 => {
                let cres: Vec<usize> =
                    uncontracted.iter().copied().filter(|&l| legs[l].cre).collect();
                let anns: Vec<usize> =
                    uncontracted.iter().copied().filter(|&l| !legs[l].cre).collect();
                // raw slot order [c1, c2, a2, a1]
                let want = [cres[0], cres[1], anns[1], anns[0]];
                let data = permute_to(&cur, &want);
                let mut off = 0;
                for p in 0..n {
                    for q in 0..n {
                        for r in 0..n {
                            for s in 0..n {
                                raw2[[p, q, r, s]] += w * data[off];
                                off += 1;
                            }
                        }
                    }
                }
            }
            _ => unreachable!("pattern filter keeps rank ≤ 2"),
        }
    }
}
