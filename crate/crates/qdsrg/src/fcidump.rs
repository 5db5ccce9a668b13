//! FCIDUMP ingestion and orbital-space bookkeeping.
//!
//! Integrals arrive in chemists' notation over spatial orbitals, are expanded
//! to antisymmetrized spin-orbital tensors, and frozen orbitals are folded into
//! the scalar and one-body parts. Everything downstream works with the
//! [`IntegralSet`] produced here.

use crate::dsrg::{ManyBodyOperator, Vacuum};
use crate::tensor::{Mat, T4};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

const SYM_TOL: f64 = 1e-12;
const DUP_TOL: f64 = 1e-10;

/// Spatial-orbital integrals as read from an FCIDUMP file.
///
/// `two_body_chemist[[i,j,k,l]]` is the chemists'-notation integral (ij|kl).
#[derive(Debug, Clone)]
pub struct SpatialIntegrals {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub ms2: i32,
    /// Nuclear repulsion (plus any scalar shift) in Hartree.
    pub scalar_energy: f64,
    pub one_body: Mat,
    pub two_body_chemist: T4,
    /// Irrep labels from ORBSYM; stored, not enforced.
    pub orbital_symmetries: Vec<i32>,
}

impl SpatialIntegrals {
    /// All-zero integrals for `n` spatial orbitals.
    pub fn zeros(n: usize, n_electrons: usize, ms2: i32) -> Self {
        Self {
            n_orbitals: n,
            n_electrons,
            ms2,
            scalar_energy: 0.0,
            one_body: Mat::zeros((n, n)),
            two_body_chemist: T4::zeros((n, n, n, n)),
            orbital_symmetries: vec![1; n],
        }
    }

    /// Checks the one-body symmetry and 8-fold permutational symmetry.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_orbitals;
        if crate::tensor::symmetry_defect(&self.one_body) > SYM_TOL {
            return Err(Error::Inconsistent("one-body tensor not symmetric".into()));
        }
        let v = &self.two_body_chemist;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let x = v[[i, j, k, l]];
                        for y in [v[[j, i, k, l]], v[[i, j, l, k]], v[[k, l, i, j]]] {
                            if (x - y).abs() > SYM_TOL {
                                return Err(Error::Inconsistent(
                                    "two-body tensor violates 8-fold symmetry".into(),
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Disjoint partition of the spatial orbitals.
///
/// Frozen core orbitals are folded away entirely; core orbitals stay doubly
/// occupied but correlated; active orbitals host the exact diagonalization;
/// frozen virtuals are dropped.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct OrbitalSpace {
    #[serde(default)]
    pub frozen_core: Vec<usize>,
    #[serde(default)]
    pub core: Vec<usize>,
    pub active: Vec<usize>,
    #[serde(default)]
    pub virtual_: Vec<usize>,
    #[serde(default)]
    pub frozen_virtual: Vec<usize>,
}

impl OrbitalSpace {
    /// Partition with explicit counts, in index order
    /// frozen core | core | active | virtual | frozen virtual.
    pub fn from_counts(n_fc: usize, n_c: usize, n_a: usize, n_v: usize, n_fv: usize) -> Self {
        let mut next = 0usize;
        let mut take = |k: usize| {
            let v: Vec<usize> = (next..next + k).collect();
            next += k;
            v
        };
        Self {
            frozen_core: take(n_fc),
            core: take(n_c),
            active: take(n_a),
            virtual_: take(n_v),
            frozen_virtual: take(n_fv),
        }
    }

    pub fn n_orbitals(&self) -> usize {
        self.frozen_core.len()
            + self.core.len()
            + self.active.len()
            + self.virtual_.len()
            + self.frozen_virtual.len()
    }

    /// Active electron count for a total of `n_electrons`.
    pub fn active_electrons(&self, n_electrons: usize) -> Result<usize> {
        let inactive = 2 * (self.frozen_core.len() + self.core.len());
        if n_electrons < inactive {
            return Err(Error::Config(format!(
                "{} electrons cannot fill {} doubly occupied orbitals",
                n_electrons,
                inactive / 2
            )));
        }
        Ok(n_electrons - inactive)
    }

    /// Blocks must be sorted, disjoint, and cover 0..n exactly.
    pub fn validate(&self, n_orbitals: usize) -> Result<()> {
        let mut seen = vec![false; n_orbitals];
        for block in [
            &self.frozen_core,
            &self.core,
            &self.active,
            &self.virtual_,
            &self.frozen_virtual,
        ] {
            let mut prev: Option<usize> = None;
            for &p in block.iter() {
                if p >= n_orbitals {
                    return Err(Error::Bounds(format!(
                        "orbital index {p} out of range 0..{n_orbitals}"
                    )));
                }
                if seen[p] {
                    return Err(Error::Config(format!("orbital {p} listed in two blocks")));
                }
                if let Some(q) = prev {
                    if p <= q {
                        return Err(Error::Config("block lists must be strictly sorted".into()));
                    }
                }
                seen[p] = true;
                prev = Some(p);
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Config("orbital space does not cover all orbitals".into()));
        }
        Ok(())
    }
}

/// Spin-orbital partition mirroring [`OrbitalSpace`] after freezing.
///
/// Indices refer to the dense spin-orbital range of an [`IntegralSet`];
/// spin orbital `2p` is the α component of spatial orbital `p`, `2p+1` the β.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct SpinOrbitalSpace {
    pub core: Vec<usize>,
    pub active: Vec<usize>,
    pub virtual_: Vec<usize>,
}

impl SpinOrbitalSpace {
    pub fn n_spin_orbitals(&self) -> usize {
        self.core.len() + self.active.len() + self.virtual_.len()
    }

    /// Hole spin orbitals: core ∪ active.
    pub fn holes(&self) -> Vec<usize> {
        let mut h = self.core.clone();
        h.extend_from_slice(&self.active);
        h.sort_unstable();
        h
    }

    /// Particle spin orbitals: active ∪ virtual.
    pub fn particles(&self) -> Vec<usize> {
        let mut p = self.active.clone();
        p.extend_from_slice(&self.virtual_);
        p.sort_unstable();
        p
    }
}

/// Scalar, one-body, and antisymmetrized two-body spin-orbital tensors.
///
/// `v[[p,q,r,s]]` is ⟨pq||rs⟩; the set carries its own spin-orbital partition.
#[derive(Debug, Clone)]
pub struct IntegralSet {
    /// Nuclear repulsion plus any folded frozen-core energy, Hartree.
    pub scalar: f64,
    pub h: Mat,
    pub v: T4,
    pub space: SpinOrbitalSpace,
    pub n_electrons: usize,
    pub ms2: i32,
}

impl IntegralSet {
    pub fn n_spin_orbitals(&self) -> usize {
        self.h.nrows()
    }

    /// Antisymmetry and Hermiticity of the two-body tensor.
    pub fn validate(&self) -> Result<()> {
        if crate::tensor::symmetry_defect(&self.h) > SYM_TOL {
            return Err(Error::Inconsistent("spin-orbital h not Hermitian".into()));
        }
        if crate::tensor::antisymmetry_defect(&self.v) > SYM_TOL {
            return Err(Error::Inconsistent("⟨pq||rs⟩ not antisymmetric".into()));
        }
        if crate::tensor::hermiticity_defect(&self.v) > SYM_TOL {
            return Err(Error::Inconsistent("⟨pq||rs⟩ not Hermitian".into()));
        }
        Ok(())
    }

    /// The Hamiltonian as a bare (vacuum normal-ordered) many-body operator.
    pub fn as_operator(&self) -> ManyBodyOperator {
        ManyBodyOperator {
            scalar: self.scalar,
            one_body: self.h.clone(),
            two_body: self.v.clone(),
            vacuum: Vacuum::Bare,
        }
    }
}

/// Parses an FCIDUMP stream.
///
/// The namelist header must define NORB, NELEC, and MS2 and ends with `&END`
/// or `/`. Body lines are `value i j k l` with 1-based indices: four nonzero
/// indices give (ij|kl), `i j 0 0` gives h_ij, all-zero indices carry the
/// scalar energy. Orbital-energy lines `value i 0 0 0` are ignored. All
/// permutation-equivalent slots are filled; duplicates must agree to 1e-10.
pub fn parse_fcidump(text: &str) -> Result<SpatialIntegrals> {
    let (header, body) = split_header(text)?;
    let fields = parse_namelist(&header);
    let get = |key: &str| -> Result<i64> {
        fields
            .get(key)
            .and_then(|v| v.first())
            .copied()
            .ok_or_else(|| Error::Parse(format!("missing mandatory header key {key}")))
    };
    let n_orbitals = get("NORB")? as usize;
    let n_electrons = get("NELEC")? as usize;
    let ms2 = get("MS2")? as i32;
    if n_orbitals == 0 {
        return Err(Error::Parse("NORB must be positive".into()));
    }

    let mut ints = SpatialIntegrals::zeros(n_orbitals, n_electrons, ms2);
    if let Some(syms) = fields.get("ORBSYM") {
        if syms.len() == n_orbitals {
            ints.orbital_symmetries = syms.iter().map(|&x| x as i32).collect();
        }
    }

    let mut seen_two: HashMap<[usize; 4], f64> = HashMap::new();
    let mut seen_one: HashMap<[usize; 2], f64> = HashMap::new();

    for (lineno, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let value: f64 = parts
            .next()
            .unwrap()
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| Error::Parse(format!("bad value on body line {}", lineno + 1)))?;
        let idx: Vec<i64> = parts
            .map(|t| t.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("bad index on body line {}", lineno + 1)))?;
        if idx.len() != 4 {
            return Err(Error::Parse(format!(
                "expected 4 indices on body line {}",
                lineno + 1
            )));
        }
        for &i in &idx {
            if i < 0 || i as usize > n_orbitals {
                return Err(Error::Bounds(format!(
                    "orbital index {i} > NORB={n_orbitals} on body line {}",
                    lineno + 1
                )));
            }
        }
        let (i, j, k, l) = (idx[0] as usize, idx[1] as usize, idx[2] as usize, idx[3] as usize);
        match (i, j, k, l) {
            (0, 0, 0, 0) => ints.scalar_energy = value,
            (i, 0, 0, 0) if i > 0 => {
                // Orbital-energy line; both conventions occur in the wild.
                eprintln!("fcidump: ignoring orbital-energy line for orbital {i}");
            }
            (i, j, 0, 0) if i > 0 && j > 0 => {
                let key = [i.min(j) - 1, i.max(j) - 1];
                if let Some(&old) = seen_one.get(&key) {
                    if (old - value).abs() > DUP_TOL {
                        return Err(Error::Inconsistent(format!(
                            "h({i},{j}) given twice: {old} vs {value}"
                        )));
                    }
                }
                seen_one.insert(key, value);
                ints.one_body[[i - 1, j - 1]] = value;
                ints.one_body[[j - 1, i - 1]] = value;
            }
            (i, j, k, l) if i > 0 && j > 0 && k > 0 && l > 0 => {
                let key = canonical_chemist([i - 1, j - 1, k - 1, l - 1]);
                if let Some(&old) = seen_two.get(&key) {
                    if (old - value).abs() > DUP_TOL {
                        return Err(Error::Inconsistent(format!(
                            "({i}{j}|{k}{l}) given twice: {old} vs {value}"
                        )));
                    }
                }
                seen_two.insert(key, value);
                set_chemist(&mut ints.two_body_chemist, i - 1, j - 1, k - 1, l - 1, value);
            }
            _ => {
                return Err(Error::Parse(format!(
                    "unrecognized index pattern {i} {j} {k} {l} on body line {}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(ints)
}

/// Reads and parses an FCIDUMP file.
pub fn read_fcidump(path: impl AsRef<Path>) -> Result<SpatialIntegrals> {
    let text = std::fs::read_to_string(path)?;
    parse_fcidump(&text)
}

/// Canonical representative of the 8-fold permutation orbit of (ij|kl).
fn canonical_chemist(idx: [usize; 4]) -> [usize; 4] {
    let [i, j, k, l] = idx;
    let mut best = [usize::MAX; 4];
    for [a, b, c, d] in [
        [i, j, k, l],
        [j, i, k, l],
        [i, j, l, k],
        [j, i, l, k],
        [k, l, i, j],
        [l, k, i, j],
        [k, l, j, i],
        [l, k, j, i],
    ] {
        let cand = [a, b, c, d];
        if cand < best {
            best = cand;
        }
    }
    best
}

/// Writes all 8 permutation-equivalent slots.
fn set_chemist(v: &mut T4, i: usize, j: usize, k: usize, l: usize, value: f64) {
    for [a, b, c, d] in [
        [i, j, k, l],
        [j, i, k, l],
        [i, j, l, k],
        [j, i, l, k],
        [k, l, i, j],
        [l, k, i, j],
        [k, l, j, i],
        [l, k, j, i],
    ] {
        v[[a, b, c, d]] = value;
    }
}

fn split_header(text: &str) -> Result<(String, String)> {
    // The header runs from &FCI (or the first line) to &END or a bare '/'.
    let mut header = String::new();
    let mut rest = String::new();
    let mut in_header = true;
    for line in text.lines() {
        if in_header {
            let upper = line.to_uppercase();
            if let Some(pos) = upper.find("&END") {
                header.push_str(&line[..pos]);
                header.push('\n');
                in_header = false;
            } else if let Some(pos) = line.find('/') {
                header.push_str(&line[..pos]);
                header.push('\n');
                in_header = false;
            } else {
                header.push_str(line);
                header.push('\n');
            }
        } else {
            rest.push_str(line);
            rest.push('\n');
        }
    }
    if in_header {
        return Err(Error::Parse("header never terminated by &END or /".into()));
    }
    Ok((header, rest))
}

/// Splits `KEY=v1,v2,... KEY2=...` namelist text into integer lists.
fn parse_namelist(header: &str) -> HashMap<String, Vec<i64>> {
    let cleaned = header.replace("&FCI", " ").replace("&fci", " ");
    let mut fields: HashMap<String, Vec<i64>> = HashMap::new();
    // Normalize separators so "KEY = 1, 2," tokenizes cleanly.
    let normalized = cleaned.replace('=', " = ").replace(',', " , ");
    let tokens: Vec<&str> = normalized.split_whitespace().collect();
    let mut pos = 0;
    while pos < tokens.len() {
        if pos + 1 < tokens.len() && tokens[pos + 1] == "=" {
            let key = tokens[pos].to_uppercase();
            let mut values = Vec::new();
            let mut cursor = pos + 2;
            let mut expecting_value = true;
            while cursor < tokens.len() {
                let t = tokens[cursor];
                if t == "," {
                    expecting_value = true;
                    cursor += 1;
                    continue;
                }
                if !expecting_value {
                    break;
                }
                if cursor + 1 < tokens.len() && tokens[cursor + 1] == "=" {
                    break;
                }
                match t.parse::<i64>() {
                    Ok(x) => {
                        values.push(x);
                        expecting_value = false;
                        cursor += 1;
                    }
                    Err(_) => break,
                }
            }
            fields.insert(key, values);
            pos = cursor;
        } else {
            pos += 1;
        }
    }
    fields
}

/// Renders integrals back to FCIDUMP text, one canonical entry per orbit.
pub fn write_fcidump(ints: &SpatialIntegrals) -> String {
    let n = ints.n_orbitals;
    let mut out = String::new();
    let syms: Vec<String> = ints.orbital_symmetries.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(
        out,
        "&FCI NORB={},NELEC={},MS2={},\n  ORBSYM={},\n  ISYM=1,\n&END",
        n,
        ints.n_electrons,
        ints.ms2,
        syms.join(",")
    );
    let mut emitted: std::collections::HashSet<[usize; 4]> = std::collections::HashSet::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let x = ints.two_body_chemist[[i, j, k, l]];
                    if x == 0.0 {
                        continue;
                    }
                    let key = canonical_chemist([i, j, k, l]);
                    if emitted.insert(key) {
                        let [a, b, c, d] = key;
                        let _ = writeln!(out, "{:.16e} {} {} {} {}", x, a + 1, b + 1, c + 1, d + 1);
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let x = ints.one_body[[i, j]];
            if x != 0.0 {
                let _ = writeln!(out, "{:.16e} {} {} 0 0", x, i + 1, j + 1);
            }
        }
    }
    let _ = writeln!(out, "{:.16e} 0 0 0 0", ints.scalar_energy);
    out
}

/// Expands spatial integrals to antisymmetrized spin-orbital tensors.
///
/// ⟨pq||rs⟩ = (pr|qs)·δ(σp,σr)δ(σq,σs) − (ps|qr)·δ(σp,σs)δ(σq,σr) with spin
/// orbital 2p the α and 2p+1 the β component of spatial orbital p. The spatial
/// partition, when given, is mapped onto spin orbitals; otherwise all orbitals
/// land in the active block.
pub fn spinorbitalize(ints: &SpatialIntegrals, space: Option<&OrbitalSpace>) -> Result<IntegralSet> {
    let n = ints.n_orbitals;
    let nso = 2 * n;
    let mut h = Mat::zeros((nso, nso));
    let mut v = T4::zeros((nso, nso, nso, nso));
    for p in 0..n {
        for q in 0..n {
            for sigma in 0..2 {
                h[[2 * p + sigma, 2 * q + sigma]] = ints.one_body[[p, q]];
            }
        }
    }
    let g = &ints.two_body_chemist;
    for p in 0..nso {
        let (sp, op) = (p % 2, p / 2);
        for q in 0..nso {
            let (sq, oq) = (q % 2, q / 2);
            for r in 0..nso {
                let (sr, or) = (r % 2, r / 2);
                for s in 0..nso {
                    let (ss, os) = (s % 2, s / 2);
                    let mut x = 0.0;
                    if sp == sr && sq == ss {
                        x += g[[op, or, oq, os]];
                    }
                    if sp == ss && sq == sr {
                        x -= g[[op, os, oq, or]];
                    }
                    v[[p, q, r, s]] = x;
                }
            }
        }
    }

    let spatial_space = match space {
        Some(s) => {
            s.validate(n)?;
            s.clone()
        }
        None => OrbitalSpace {
            active: (0..n).collect(),
            ..Default::default()
        },
    };
    if !spatial_space.frozen_core.is_empty() || !spatial_space.frozen_virtual.is_empty() {
        return Err(Error::Config(
            "frozen orbitals must be folded with freeze_core after spinorbitalize".into(),
        ));
    }
    let to_spin = |block: &[usize]| -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * block.len());
        for &p in block {
            out.push(2 * p);
            out.push(2 * p + 1);
        }
        out.sort_unstable();
        out
    };
    Ok(IntegralSet {
        scalar: ints.scalar_energy,
        h,
        v,
        space: SpinOrbitalSpace {
            core: to_spin(&spatial_space.core),
            active: to_spin(&spatial_space.active),
            virtual_: to_spin(&spatial_space.virtual_),
        },
        n_electrons: ints.n_electrons,
        ms2: ints.ms2,
    })
}

/// Expands with frozen orbitals folded away in one step.
///
/// Spin-orbital indices of the result refer to the reduced (unfrozen) range.
pub fn spinorbitalize_frozen(ints: &SpatialIntegrals, space: &OrbitalSpace) -> Result<IntegralSet> {
    space.validate(ints.n_orbitals)?;
    let unfrozen = OrbitalSpace {
        frozen_core: space.frozen_core.clone(),
        core: space.core.clone(),
        active: space.active.clone(),
        virtual_: space.virtual_.clone(),
        frozen_virtual: space.frozen_virtual.clone(),
    };
    let full = spinorbitalize(
        ints,
        Some(&OrbitalSpace {
            active: (0..ints.n_orbitals).collect(),
            ..Default::default()
        }),
    )?;
    freeze_core(&full, &unfrozen)
}

/// Folds frozen-core orbitals into the scalar and one-body tensors and drops
/// frozen virtuals. Index maps are order-preserving.
///
/// scalar += Σ_{i∈fc} h_ii + ½ Σ_{ij∈fc} ⟨ij||ij⟩ over frozen spin orbitals;
/// h_pq += Σ_{i∈fc} ⟨pi||qi⟩ for surviving p, q.
pub fn freeze_core(ints: &IntegralSet, space: &OrbitalSpace) -> Result<IntegralSet> {
    let n_spatial = ints.n_spin_orbitals() / 2;
    space.validate(n_spatial)?;
    for &p in &space.frozen_core {
        if space.active.contains(&p) {
            return Err(Error::Config(format!("orbital {p} both frozen and active")));
        }
    }

    let frozen: Vec<usize> = space
        .frozen_core
        .iter()
        .flat_map(|&p| [2 * p, 2 * p + 1])
        .collect();
    let dropped: Vec<usize> = space
        .frozen_virtual
        .iter()
        .flat_map(|&p| [2 * p, 2 * p + 1])
        .collect();

    let nso = ints.n_spin_orbitals();
    let keep: Vec<usize> = (0..nso)
        .filter(|p| !frozen.contains(p) && !dropped.contains(p))
        .collect();
    let m = keep.len();

    let mut scalar = ints.scalar;
    for &i in &frozen {
        scalar += ints.h[[i, i]];
    }
    for &i in &frozen {
        for &j in &frozen {
            scalar += 0.5 * ints.v[[i, j, i, j]];
        }
    }

    let mut h = Mat::zeros((m, m));
    for (a, &p) in keep.iter().enumerate() {
        for (b, &q) in keep.iter().enumerate() {
            let mut x = ints.h[[p, q]];
            for &i in &frozen {
                x += ints.v[[p, i, q, i]];
            }
            h[[a, b]] = x;
        }
    }
    let mut v = T4::zeros((m, m, m, m));
    for (a, &p) in keep.iter().enumerate() {
        for (b, &q) in keep.iter().enumerate() {
            for (c, &r) in keep.iter().enumerate() {
                for (d, &s) in keep.iter().enumerate() {
                    v[[a, b, c, d]] = ints.v[[p, q, r, s]];
                }
            }
        }
    }

    let remap = |block: &[usize]| -> Vec<usize> {
        block
            .iter()
            .flat_map(|&p| [2 * p, 2 * p + 1])
            .map(|so| keep.binary_search(&so).expect("kept spin orbital"))
            .collect()
    };

    let n_frozen_electrons = 2 * space.frozen_core.len();
    Ok(IntegralSet {
        scalar,
        h,
        v,
        space: SpinOrbitalSpace {
            core: remap(&space.core),
            active: remap(&space.active),
            virtual_: remap(&space.virtual_),
        },
        n_electrons: ints.n_electrons - n_frozen_electrons,
        ms2: ints.ms2,
    })
}

/// Versioned JSON container for an exported effective Hamiltonian.
#[derive(Debug, Serialize, Deserialize)]
pub struct EffectiveHamiltonianFile {
    pub schema: String,
    pub s: f64,
    pub truncation: String,
    pub space: SpinOrbitalSpace,
    pub scalar: f64,
    pub n_spin_orbitals: usize,
    /// Row-major dense one-body array.
    pub one_body: Vec<f64>,
    /// Row-major dense antisymmetrized two-body array ⟨pq||rs⟩.
    pub two_body: Vec<f64>,
}

pub const HEFF_SCHEMA: &str = "qdsrg-heff-v1";

/// Serializes a bare effective Hamiltonian to the versioned JSON container.
///
/// The operator must already be vacuum normal-ordered; generalized-ordered
/// operators carry reference information that the container cannot express.
pub fn export_effective_hamiltonian(
    op: &ManyBodyOperator,
    space: &SpinOrbitalSpace,
    s: f64,
    truncation: &str,
) -> Result<String> {
    if op.vacuum != Vacuum::Bare {
        return Err(Error::Contract(
            "export requires a bare operator; convert with to_bare_operator first".into(),
        ));
    }
    let n = op.one_body.nrows();
    let file = EffectiveHamiltonianFile {
        schema: HEFF_SCHEMA.to_string(),
        s,
        truncation: truncation.to_string(),
        space: space.clone(),
        scalar: op.scalar,
        n_spin_orbitals: n,
        one_body: op.one_body.iter().copied().collect(),
        two_body: op.two_body.iter().copied().collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Writes the container to disk.
pub fn export_effective_hamiltonian_file(
    op: &ManyBodyOperator,
    space: &SpinOrbitalSpace,
    s: f64,
    truncation: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    let json = export_effective_hamiltonian(op, space, s, truncation)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Reparses an exported effective Hamiltonian.
pub fn import_effective_hamiltonian(json: &str) -> Result<(ManyBodyOperator, SpinOrbitalSpace, f64)> {
    let file: EffectiveHamiltonianFile = serde_json::from_str(json)?;
    if file.schema != HEFF_SCHEMA {
        return Err(Error::Parse(format!(
            "unknown schema {:?}, expected {HEFF_SCHEMA:?}",
            file.schema
        )));
    }
    let n = file.n_spin_orbitals;
    if file.one_body.len() != n * n || file.two_body.len() != n * n * n * n {
        return Err(Error::Parse("tensor payload length mismatch".into()));
    }
    let one_body = Mat::from_shape_vec((n, n), file.one_body).expect("checked length");
    let two_body = T4::from_shape_vec((n, n, n, n), file.two_body).expect("checked length");
    Ok((
        ManyBodyOperator {
            scalar: file.scalar,
            one_body,
            two_body,
            vacuum: Vacuum::Bare,
        },
        file.space,
        file.s,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_file() {
        let text = "&FCI NORB=1,NELEC=2,MS2=0,\n&END\n0.7 1 1 1 1\n-1.25 1 1 0 0\n0.5 0 0 0 0\n";
        let ints = parse_fcidump(text).unwrap();
        assert_eq!(ints.n_orbitals, 1);
        assert_eq!(ints.two_body_chemist[[0, 0, 0, 0]], 0.7);
        assert_eq!(ints.one_body[[0, 0]], -1.25);
        assert_eq!(ints.scalar_energy, 0.5);
    }

    #[test]
    fn zero_body_only() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0,\n/\n0.0 0 0 0 0\n";
        let ints = parse_fcidump(text).unwrap();
        assert_eq!(ints.scalar_energy, 0.0);
        assert!(ints.one_body.iter().all(|&x| x == 0.0));
        assert!(ints.two_body_chemist.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn missing_header_key_is_named() {
        let text = "&FCI NORB=2,MS2=0,\n&END\n0.0 0 0 0 0\n";
        let err = parse_fcidump(text).unwrap_err();
        assert!(err.to_string().contains("NELEC"), "got: {err}");
    }

    #[test]
    fn out_of_range_index_rejected() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0,\n&END\n0.5 3 1 1 1\n";
        assert!(matches!(parse_fcidump(text), Err(Error::Bounds(_))));
    }

    #[test]
    fn inconsistent_duplicates_rejected() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0,\n&END\n0.5 1 2 1 1\n0.7 2 1 1 1\n";
        assert!(matches!(parse_fcidump(text), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn eightfold_permutations_filled() {
        let text = "&FCI NORB=3,NELEC=2,MS2=0,\n&END\n0.3 1 2 3 1\n0.0 0 0 0 0\n";
        let ints = parse_fcidump(text).unwrap();
        for [a, b, c, d] in [
            [0usize, 1, 2, 0],
            [1, 0, 2, 0],
            [0, 1, 0, 2],
            [1, 0, 0, 2],
            [2, 0, 0, 1],
            [0, 2, 0, 1],
            [2, 0, 1, 0],
            [0, 2, 1, 0],
        ] {
            assert_eq!(ints.two_body_chemist[[a, b, c, d]], 0.3);
        }
    }

    #[test]
    fn same_spin_diagonal_vanishes_by_antisymmetry() {
        let text = "&FCI NORB=1,NELEC=2,MS2=0,\n&END\n0.7 1 1 1 1\n0.0 0 0 0 0\n";
        let ints = parse_fcidump(text).unwrap();
        let so = spinorbitalize(&ints, None).unwrap();
        // ⟨1α1β||1α1β⟩ = (11|11). Same spin kills the diagonal.
        assert!((so.v[[0, 1, 0, 1]] - 0.7).abs() < 1e-15);
        assert_eq!(so.v[[0, 0, 0, 0]], 0.0);
        so.validate().unwrap();
    }

    #[test]
    fn empty_frozen_core_is_identity() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0,\n&END\n0.6 1 1 1 1\n0.2 1 2 1 2\n-1.0 1 1 0 0\n-0.5 2 2 0 0\n1.0 0 0 0 0\n";
        let ints = parse_fcidump(text).unwrap();
        let space = OrbitalSpace::from_counts(0, 0, 2, 0, 0);
        let so = spinorbitalize(&ints, Some(&space)).unwrap();
        let folded = freeze_core(&so, &space).unwrap();
        assert_eq!(folded.scalar, so.scalar);
        assert!((&folded.h - &so.h).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn heff_roundtrip_is_exact_and_idempotent() {
        let n = 4;
        let mut op = ManyBodyOperator::zeros(n, Vacuum::Bare);
        op.scalar = -1.5;
        op.one_body[[0, 1]] = 0.25;
        op.one_body[[1, 0]] = 0.25;
        op.two_body[[0, 1, 2, 3]] = 0.125;
        let space = SpinOrbitalSpace {
            core: vec![],
            active: (0..n).collect(),
            virtual_: vec![],
        };
        let json = export_effective_hamiltonian(&op, &space, 0.5, "two").unwrap();
        let (op2, space2, s) = import_effective_hamiltonian(&json).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(space2, space);
        assert_eq!(op.max_deviation(&op2), 0.0);
        let json2 = export_effective_hamiltonian(&op2, &space2, s, "two").unwrap();
        assert_eq!(json, json2, "export must be byte-idempotent");
    }

    #[test]
    fn gno_export_rejected() {
        let op = ManyBodyOperator::zeros(2, Vacuum::Gno(7));
        let space = SpinOrbitalSpace {
            core: vec![],
            active: vec![0, 1],
            virtual_: vec![],
        };
        assert!(matches!(
            export_effective_hamiltonian(&op, &space, 0.0, "exact"),
            Err(Error::Contract(_))
        ));
    }
}
