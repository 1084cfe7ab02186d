//! Finite-type Cartan data with a diagram involution, and the Weyl-group
//! combinatorics the rest of the engine consumes.
//!
//! Conventions.  C = (c_ij) is a Cartan matrix of finite type with symmetrizer
//! D = diag(d_i), so (α_i, α_j) = d_i c_ij is symmetric.  A diagram involution
//! τ satisfies τ² = id, c_{τi,τj} = c_ij, d_{τi} = d_i; the identity is allowed
//! (the split case) and so is the swap of two identical factors (the diagonal
//! case, which models the Drinfeld double).  Simple reflections act by
//! s_i(α_j) = α_j − c_ij α_i on the root lattice written in simple-root
//! coordinates.
//!
//! For a τ-orbit {i, τi} the restricted reflection is
//!   r_i = s_i                 if τi = i,
//!   r_i = s_i s_{τi}          if c_{i,τi} = 0,
//!   r_i = s_i s_{τi} s_i      if c_{i,τi} = −1,
//! and the fixed subgroup W_τ = {w : wτ = τw} is generated by the r_i.  The
//! engine needs reduced words of the longest element w_0 that are concatenations
//! of r_i-blocks; these are found by greedy descent rather than table lookup and
//! verified (product recovers w_0, length is |Φ⁺|).

use crate::scalars::Scalar;
use crate::{EngineError, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Element of the root/weight lattice in simple-root coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightVector(pub Vec<i64>);

impl WeightVector {
    pub fn zero(rank: usize) -> Self {
        WeightVector(vec![0; rank])
    }

    pub fn simple(rank: usize, i: usize) -> Self {
        let mut v = vec![0; rank];
        v[i] = 1;
        WeightVector(v)
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn height(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn is_nonneg(&self) -> bool {
        self.0.iter().all(|&a| a >= 0)
    }

    pub fn add(&self, other: &Self) -> Self {
        WeightVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        WeightVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Self {
        WeightVector(self.0.iter().map(|a| -a).collect())
    }

    pub fn scaled(&self, k: i64) -> Self {
        WeightVector(self.0.iter().map(|a| a * k).collect())
    }
}

impl fmt::Debug for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", a)?;
        }
        write!(f, "]")
    }
}

/// One simple factor of a finite-type diagram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub letter: char,
    pub rank: usize,
}

/// Cartan datum plus involution: the ground data for everything downstream.
#[derive(Clone, Debug)]
pub struct SatakeDiagram {
    pub factors: Vec<Factor>,
    pub cartan: Vec<Vec<i64>>,
    pub sym: Vec<i64>,
    pub tau: Vec<usize>,
    /// When this diagram is the double of a base diagram, the base rank
    /// (nodes 0..n are the first copy, n..2n the second).
    pub doubled_from: Option<usize>,
}

/// Bourbaki Cartan matrix and symmetrizer for one simple factor.
fn factor_matrix(letter: char, n: usize) -> Result<(Vec<Vec<i64>>, Vec<i64>)> {
    let bad = || EngineError::BadCartan(format!("{}{}", letter, n));
    let mut c = vec![vec![0i64; n]; n];
    for i in 0..n {
        c[i][i] = 2;
    }
    let mut chain = |i: usize, j: usize| {
        c[i][j] = -1;
        c[j][i] = -1;
    };
    let d: Vec<i64> = match letter {
        'A' => {
            if n < 1 {
                return Err(bad());
            }
            for i in 0..n.saturating_sub(1) {
                chain(i, i + 1);
            }
            vec![1; n]
        }
        'B' => {
            if n < 2 {
                return Err(bad());
            }
            for i in 0..n - 1 {
                chain(i, i + 1);
            }
            c[n - 1][n - 2] = -2; // short root at the end
            let mut d = vec![2; n];
            d[n - 1] = 1;
            d
        }
        'C' => {
            if n < 2 {
                return Err(bad());
            }
            for i in 0..n - 1 {
                chain(i, i + 1);
            }
            c[n - 2][n - 1] = -2; // long root at the end
            let mut d = vec![1; n];
            d[n - 1] = 2;
            d
        }
        'D' => {
            if n < 4 {
                return Err(bad());
            }
            for i in 0..n - 2 {
                chain(i, i + 1);
            }
            chain(n - 3, n - 1);
            vec![1; n]
        }
        'E' => {
            if !(6..=8).contains(&n) {
                return Err(bad());
            }
            // Bourbaki: node 2 hangs off node 4; spine 1-3-4-5-6(-7)(-8).
            chain(0, 2);
            chain(2, 3);
            chain(1, 3);
            for i in 3..n - 1 {
                chain(i, i + 1);
            }
            vec![1; n]
        }
        'F' => {
            if n != 4 {
                return Err(bad());
            }
            chain(0, 1);
            chain(1, 2);
            chain(2, 3);
            c[2][1] = -2;
            vec![2, 2, 1, 1]
        }
        'G' => {
            if n != 2 {
                return Err(bad());
            }
            c[0][1] = -3;
            c[1][0] = -1;
            vec![1, 3]
        }
        _ => return Err(bad()),
    };
    Ok((c, d))
}

/// Parse a type label like "A2", "B3", or a product "A1xA1".
pub fn parse_cartan_label(label: &str) -> Result<Vec<Factor>> {
    let mut out = Vec::new();
    for piece in label.split(['x', 'X']) {
        let piece = piece.trim();
        let mut chars = piece.chars();
        let letter = chars
            .next()
            .ok_or_else(|| EngineError::BadCartan(label.to_string()))?
            .to_ascii_uppercase();
        let rank: usize = chars
            .as_str()
            .parse()
            .map_err(|_| EngineError::BadCartan(label.to_string()))?;
        out.push(Factor { letter, rank });
    }
    if out.is_empty() {
        return Err(EngineError::BadCartan(label.to_string()));
    }
    Ok(out)
}

impl SatakeDiagram {
    /// Build from a type label and involution given as orbit pairs (0-based);
    /// nodes not mentioned are τ-fixed.
    pub fn new(label: &str, tau_pairs: &[(usize, usize)]) -> Result<Self> {
        let factors = parse_cartan_label(label)?;
        let mut cartan: Vec<Vec<i64>> = Vec::new();
        let mut sym = Vec::new();
        for f in &factors {
            let (c, d) = factor_matrix(f.letter, f.rank)?;
            let off = sym.len();
            let n = off + f.rank;
            for row in &mut cartan {
                row.resize(n, 0);
            }
            for (i, crow) in c.into_iter().enumerate() {
                let mut row = vec![0; off];
                row.extend(crow);
                debug_assert_eq!(row.len(), n);
                let _ = i;
                cartan.push(row);
            }
            sym.extend(d);
        }
        let rank = sym.len();
        let mut tau: Vec<usize> = (0..rank).collect();
        for &(a, b) in tau_pairs {
            if a >= rank || b >= rank {
                return Err(EngineError::BadInvolution(format!(
                    "orbit pair ({},{}) out of range for rank {}",
                    a + 1,
                    b + 1,
                    rank
                )));
            }
            tau[a] = b;
            tau[b] = a;
        }
        let diagram = SatakeDiagram { factors, cartan, sym, tau, doubled_from: None };
        diagram.validate()?;
        Ok(diagram)
    }

    pub fn split(label: &str) -> Result<Self> {
        Self::new(label, &[])
    }

    fn validate(&self) -> Result<()> {
        let n = self.rank();
        for i in 0..n {
            let ti = self.tau[i];
            if ti >= n || self.tau[ti] != i {
                return Err(EngineError::BadInvolution("tau is not an involution".into()));
            }
            if self.sym[ti] != self.sym[i] {
                return Err(EngineError::BadInvolution(format!(
                    "symmetrizer not tau-invariant at node {}",
                    i + 1
                )));
            }
            for j in 0..n {
                if self.cartan[self.tau[i]][self.tau[j]] != self.cartan[i][j] {
                    return Err(EngineError::BadInvolution(format!(
                        "Cartan matrix not tau-invariant at ({},{})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.sym.len()
    }

    pub fn label(&self) -> String {
        self.factors
            .iter()
            .map(|f| format!("{}{}", f.letter, f.rank))
            .collect::<Vec<_>>()
            .join("x")
    }

    /// Involution in "a:b c:d" cycle notation, 1-based; empty for split.
    pub fn tau_label(&self) -> String {
        let mut parts = Vec::new();
        for i in 0..self.rank() {
            let t = self.tau[i];
            if t > i {
                parts.push(format!("{}:{}", i + 1, t + 1));
            }
        }
        parts.join(" ")
    }

    pub fn is_split(&self) -> bool {
        self.tau.iter().enumerate().all(|(i, &t)| i == t)
    }

    /// (α_i, α_j) = d_i c_ij.
    pub fn bilinear_simple(&self, i: usize, j: usize) -> i64 {
        self.sym[i] * self.cartan[i][j]
    }

    /// Symmetric bilinear form extended to the lattice.
    pub fn bilinear(&self, a: &WeightVector, b: &WeightVector) -> i64 {
        let mut s = 0;
        for (i, &ai) in a.0.iter().enumerate() {
            if ai == 0 {
                continue;
            }
            for (j, &bj) in b.0.iter().enumerate() {
                if bj != 0 {
                    s += ai * bj * self.bilinear_simple(i, j);
                }
            }
        }
        s
    }

    /// v^{(a,b)} as a scalar, i.e. u^{2(a,b)}; the half power v^{(a,b)/2} is u^{(a,b)}.
    pub fn v_bilinear(&self, a: &WeightVector, b: &WeightVector) -> Scalar {
        Scalar::u(2 * self.bilinear(a, b))
    }

    pub fn v_bilinear_half(&self, a: &WeightVector, b: &WeightVector) -> Scalar {
        Scalar::u(self.bilinear(a, b))
    }

    pub fn tau_weight(&self, a: &WeightVector) -> WeightVector {
        let mut out = vec![0; a.rank()];
        for (i, &ai) in a.0.iter().enumerate() {
            out[self.tau[i]] = ai;
        }
        WeightVector(out)
    }

    /// s_i(b) = b − ⟨b, α_i^∨⟩ α_i, with ⟨α_j, α_i^∨⟩ = c_ij.
    pub fn simple_reflection(&self, i: usize, b: &WeightVector) -> WeightVector {
        let pairing: i64 = b.0.iter().enumerate().map(|(j, &bj)| bj * self.cartan[i][j]).sum();
        let mut out = b.clone();
        out.0[i] -= pairing;
        out
    }

    /// Apply s_{w[0]} s_{w[1]} ... s_{w[last]} to b, leftmost letter outermost.
    pub fn apply_word(&self, word: &[usize], b: &WeightVector) -> WeightVector {
        let mut out = b.clone();
        for &i in word.iter().rev() {
            out = self.simple_reflection(i, &out);
        }
        out
    }

    /// All positive roots, sorted by height then lex.
    pub fn positive_roots(&self) -> Vec<WeightVector> {
        let n = self.rank();
        let mut seen: BTreeSet<WeightVector> = (0..n).map(|i| WeightVector::simple(n, i)).collect();
        let mut frontier: Vec<WeightVector> = seen.iter().cloned().collect();
        while let Some(b) = frontier.pop() {
            for i in 0..n {
                let r = self.simple_reflection(i, &b);
                if r.is_nonneg() && !seen.contains(&r) {
                    seen.insert(r.clone());
                    frontier.push(r);
                }
            }
        }
        let mut out: Vec<_> = seen.into_iter().collect();
        out.sort_by_key(|b| (b.height(), b.clone()));
        out
    }

    pub fn longest_length(&self) -> usize {
        self.positive_roots().len()
    }

    /// Nodes i with τi = i.
    pub fn tau_fixed_nodes(&self) -> Vec<usize> {
        (0..self.rank()).filter(|&i| self.tau[i] == i).collect()
    }

    /// Smallest node of each τ-orbit, fixed nodes included.
    pub fn orbit_representatives(&self) -> Vec<usize> {
        (0..self.rank()).filter(|&i| i <= self.tau[i]).collect()
    }

    /// Block diagram C ⊕ C with τ the swap of the two copies.
    pub fn doubled(&self) -> SatakeDiagram {
        let n = self.rank();
        let mut cartan = vec![vec![0i64; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                cartan[i][j] = self.cartan[i][j];
                cartan[n + i][n + j] = self.cartan[i][j];
            }
        }
        let mut sym = self.sym.clone();
        sym.extend_from_slice(&self.sym);
        let tau = (0..2 * n).map(|i| (i + n) % (2 * n)).collect();
        let mut factors = self.factors.clone();
        factors.extend(self.factors.clone());
        SatakeDiagram { factors, cartan, sym, tau, doubled_from: Some(n) }
    }
}

/// Weyl group element as its matrix on simple-root coordinates
/// (column j = image of α_j).
#[derive(Clone, PartialEq, Eq)]
pub struct WeylElement {
    pub cols: Vec<WeightVector>,
}

impl WeylElement {
    pub fn identity(rank: usize) -> Self {
        WeylElement { cols: (0..rank).map(|j| WeightVector::simple(rank, j)).collect() }
    }

    pub fn from_word(diagram: &SatakeDiagram, word: &[usize]) -> Self {
        let rank = diagram.rank();
        WeylElement {
            cols: (0..rank)
                .map(|j| diagram.apply_word(word, &WeightVector::simple(rank, j)))
                .collect(),
        }
    }

    pub fn apply(&self, b: &WeightVector) -> WeightVector {
        let rank = self.cols.len();
        let mut out = WeightVector::zero(rank);
        for (j, &bj) in b.0.iter().enumerate() {
            if bj != 0 {
                out = out.add(&self.cols[j].scaled(bj));
            }
        }
        out
    }

    /// self ∘ other (apply other first).
    pub fn compose(&self, other: &WeylElement) -> Self {
        WeylElement { cols: other.cols.iter().map(|c| self.apply(c)).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.cols
            .iter()
            .enumerate()
            .all(|(j, c)| *c == WeightVector::simple(self.cols.len(), j))
    }

    /// Number of positive roots sent negative.
    pub fn length(&self, diagram: &SatakeDiagram) -> usize {
        diagram.positive_roots().iter().filter(|b| !self.apply(b).is_nonneg()).count()
    }

    /// Commutes with the diagram involution.
    pub fn is_tau_commuting(&self, diagram: &SatakeDiagram) -> bool {
        (0..self.cols.len()).all(|j| {
            let a = diagram.tau_weight(&self.apply(&WeightVector::simple(self.cols.len(), j)));
            let b = self.apply(&WeightVector::simple(self.cols.len(), diagram.tau[j]));
            a == b
        })
    }
}

impl fmt::Debug for WeylElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{:?}", self.cols)
    }
}

/// The word of the restricted reflection r_i: (i), (i,τi), or (i,τi,i) by the
/// value of c_{i,τi}; anything else is outside the quasi-split setting.
pub fn restricted_reflection(diagram: &SatakeDiagram, i: usize) -> Result<Vec<usize>> {
    let ti = diagram.tau[i];
    if ti == i {
        return Ok(vec![i]);
    }
    match diagram.cartan[i][ti] {
        0 => Ok(vec![i, ti]),
        -1 => Ok(vec![i, ti, i]),
        c => Err(EngineError::BadInvolution(format!(
            "tau-orbit {{{},{}}} has c = {}, not in {{2,0,-1}}",
            i + 1,
            ti + 1,
            c
        ))),
    }
}

/// Rank-one involution of the orbit {i,τi}: the node j with r_i(α_i) = −α_j
/// determines τ_i(i); τ_i fixes every node outside the orbit.
pub fn tau_i_involution(diagram: &SatakeDiagram, i: usize) -> Result<Vec<usize>> {
    let word = restricted_reflection(diagram, i)?;
    let ti = diagram.tau[i];
    let mut map: Vec<usize> = (0..diagram.rank()).collect();
    for &a in &[i, ti] {
        let img = diagram.apply_word(&word, &WeightVector::simple(diagram.rank(), a)).neg();
        let j = img
            .0
            .iter()
            .position(|&x| x == 1)
            .filter(|_| img.height() == 1)
            .ok_or_else(|| {
                EngineError::BadInvolution(format!("r_{} does not negate α_{}", i + 1, a + 1))
            })?;
        map[a] = j;
    }
    Ok(map)
}

/// Greedy adapted reduced word for w_0: a concatenation of r_j blocks, with an
/// optional preferred orbit placed first.  Returns (block reps, flat word).
pub fn adapted_longest_word(
    diagram: &SatakeDiagram,
    prefer_first: Option<usize>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let rank = diagram.rank();
    let n_pos = diagram.longest_length();
    let id = WeylElement::identity(rank);
    // build w0 from the identity by length-increasing right multiplications:
    // ℓ(t s_i) = ℓ(t) + 1 exactly when t(α_i) is still positive.
    let mut w0_word: Vec<usize> = Vec::new();
    let mut t = id.clone();
    loop {
        let mut found = None;
        for i in 0..rank {
            if t.apply(&WeightVector::simple(rank, i)).is_nonneg() {
                found = Some(i);
                break;
            }
        }
        match found {
            Some(i) => {
                let si = WeylElement::from_word(diagram, &[i]);
                t = t.compose(&si);
                w0_word.push(i);
                if w0_word.len() > n_pos {
                    return Err(EngineError::BadCartan("w0 search exceeded |Φ⁺|".into()));
                }
            }
            None => break,
        }
    }
    let w0 = t;
    debug_assert_eq!(w0.length(diagram), n_pos);
    if !w0.is_tau_commuting(diagram) {
        return Err(EngineError::BadInvolution("w_0 does not commute with tau".into()));
    }

    // left-greedy peeling of w0 by restricted reflections
    let reps = diagram.orbit_representatives();
    let mut blocks: Vec<usize> = Vec::new();
    let mut flat: Vec<usize> = Vec::new();
    let mut rem = w0.clone();
    let mut rem_inv = w0.clone(); // w0 is an involution
    debug_assert!(w0.compose(&w0).is_identity());
    let mut first = true;
    while !rem.is_identity() {
        let mut chosen = None;
        let candidates: Vec<usize> = match (first, prefer_first) {
            (true, Some(p)) => vec![p],
            _ => reps.clone(),
        };
        for &i in &candidates {
            // left descent of rem along the whole r_i block
            if !rem_inv.apply(&WeightVector::simple(rank, i)).is_nonneg() {
                chosen = Some(i);
                break;
            }
        }
        let i = chosen.ok_or_else(|| {
            EngineError::BadInvolution("no restricted descent found (is w_0 in W_tau?)".into())
        })?;
        let word = restricted_reflection(diagram, i)?;
        let r = WeylElement::from_word(diagram, &word);
        let before = rem.length(diagram);
        rem = r.compose(&rem);
        rem_inv = rem_inv.compose(&r);
        let after = rem.length(diagram);
        if before != after + word.len() {
            return Err(EngineError::NotReduced(format!(
                "block r_{} is not a descent (length {} -> {})",
                i + 1,
                before,
                after
            )));
        }
        blocks.push(i);
        flat.extend(word);
        first = false;
    }
    // the greedy is verified: the concatenation multiplies back to w0 at full length
    let check = WeylElement::from_word(diagram, &flat);
    if check != w0 || flat.len() != n_pos {
        return Err(EngineError::NotReduced("adapted word failed verification".into()));
    }
    Ok((blocks, flat))
}

/// Root sequence β_k = s_{i_1} ... s_{i_{k-1}}(α_{i_k}) of a reduced word.
/// Errors unless all β_k are positive and distinct (i.e. the word is reduced).
pub fn positive_root_sequence(
    diagram: &SatakeDiagram,
    word: &[usize],
) -> Result<Vec<WeightVector>> {
    let rank = diagram.rank();
    let mut out = Vec::with_capacity(word.len());
    let mut seen = BTreeSet::new();
    for (k, &ik) in word.iter().enumerate() {
        let beta = diagram.apply_word(&word[..k], &WeightVector::simple(rank, ik));
        if !beta.is_nonneg() || !seen.insert(beta.clone()) {
            return Err(EngineError::NotReduced(format!(
                "root sequence degenerates at position {}",
                k + 1
            )));
        }
        out.push(beta);
    }
    Ok(out)
}

/// Kostant partition count: number of multisets of positive roots summing to μ.
pub fn kostant_dim(diagram: &SatakeDiagram, mu: &WeightVector) -> u64 {
    let roots = diagram.positive_roots();
    let mut memo: BTreeMap<(usize, WeightVector), u64> = BTreeMap::new();
    fn rec(
        roots: &[WeightVector],
        idx: usize,
        mu: &WeightVector,
        memo: &mut BTreeMap<(usize, WeightVector), u64>,
    ) -> u64 {
        if mu.is_zero() {
            return 1;
        }
        if idx >= roots.len() || !mu.is_nonneg() {
            return 0;
        }
        if let Some(&v) = memo.get(&(idx, mu.clone())) {
            return v;
        }
        let mut total = 0;
        let mut rest = mu.clone();
        loop {
            total += rec(roots, idx + 1, &rest, memo);
            rest = rest.sub(&roots[idx]);
            if !rest.is_nonneg() {
                break;
            }
        }
        memo.insert((idx, mu.clone()), total);
        total
    }
    rec(&roots, 0, mu, &mut memo)
}

/// Outcome of comparing two keys in the bar-triangular partial order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairOrder {
    Less,
    Equal,
    Greater,
    Incomparable,
}

/// Partial order on Cartan-shift keys: (α, m) ⪯ (β, m′) iff the totals
/// α + τα + m and β + τβ + m′ agree and β − α ∈ N^I (zero included).
pub fn order_pairs(
    diagram: &SatakeDiagram,
    alpha: &WeightVector,
    wt_a: &WeightVector,
    beta: &WeightVector,
    wt_b: &WeightVector,
) -> PairOrder {
    let total_a = alpha.add(&diagram.tau_weight(alpha)).add(wt_a);
    let total_b = beta.add(&diagram.tau_weight(beta)).add(wt_b);
    if total_a != total_b {
        return PairOrder::Incomparable;
    }
    let diff = beta.sub(alpha);
    if diff.is_zero() {
        if wt_a == wt_b {
            PairOrder::Equal
        } else {
            PairOrder::Incomparable
        }
    } else if diff.is_nonneg() {
        PairOrder::Less
    } else if diff.neg().is_nonneg() {
        PairOrder::Greater
    } else {
        PairOrder::Incomparable
    }
}

/// Reverse-lexicographic comparison of PBW exponent tuples: compare reversed
/// sequences lexicographically.  Total order refining the grading by weight.
pub fn revlex_exponents(a: &[u32], b: &[u32]) -> std::cmp::Ordering {
    a.iter().rev().cmp(b.iter().rev())
}
