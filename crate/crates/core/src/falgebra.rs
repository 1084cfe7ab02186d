//! The half quantum group f presented on rescaled generators ϑ_i, as words
//! modulo quantum Serre relations, together with its twisted coproduct,
//! skew derivations, and bilinear pairing.
//!
//! Normal form.  Fix a weight μ and list all words of that weight in lex
//! order.  Every two-sided embedding of a Serre relation
//!   Σ_{r=0}^{1−c_ij} (−1)^r qbinom(1−c_ij, r; d_i) ϑ_i^r ϑ_j ϑ_i^{1−c_ij−r}
//! gives a row; exact row reduction with leftmost pivots rewrites each pivot
//! word over the non-pivot words, which form the monomial basis used
//! everywhere downstream.  Dimensions are checked against the Kostant
//! partition count.
//!
//! The coproduct r is the algebra map into the twisted tensor square
//! (x₁⊗x₂)(y₁⊗y₂) = v^{(wt x₂, wt y₁)} x₁y₁ ⊗ x₂y₂ with r(ϑ_i) = ϑ_i⊗1 + 1⊗ϑ_i.
//! Its single-letter components are the skew derivations ∂_i^R and ∂_i^L, and
//! the pairing is determined by φ(ϑ_i, ϑ_j) = δ_ij (v_i − v_i^{−1}) and
//! φ(x, ϑ_j y) = (v_j − v_j^{−1}) φ(∂_j^R x, y).

use crate::cartan::{kostant_dim, SatakeDiagram, WeightVector};
use crate::linalg::rref_in_place;
use crate::scalars::{qbinom, qfact, Scalar};
use crate::{EngineError, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, RwLock};

/// Monomial in the generators: the sequence of letters (0-based node indices).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn single(i: usize) -> Self {
        Word(vec![i as u8])
    }

    pub fn from_letters(letters: &[usize]) -> Self {
        Word(letters.iter().map(|&i| i as u8).collect())
    }

    pub fn letters(&self) -> impl DoubleEndedIterator<Item = usize> + '_ {
        self.0.iter().map(|&b| b as usize)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn reversed(&self) -> Word {
        let mut v = self.0.clone();
        v.reverse();
        Word(v)
    }

    pub fn power(i: usize, n: usize) -> Word {
        Word(vec![i as u8; n])
    }

    pub fn weight(&self, satake: &SatakeDiagram) -> WeightVector {
        let mut w = WeightVector::zero(satake.rank());
        for l in self.letters() {
            w.0[l] += 1;
        }
        w
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "th[")?;
        for (k, l) in self.letters().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", l + 1)?;
        }
        write!(f, "]")
    }
}

/// Linear combination of words with scalar coefficients.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct FElement {
    pub terms: BTreeMap<Word, Scalar>,
}

impl FElement {
    pub fn zero() -> Self {
        FElement { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        FElement::from_word(Word::empty())
    }

    pub fn generator(i: usize) -> Self {
        FElement::from_word(Word::single(i))
    }

    pub fn from_word(w: Word) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(w, Scalar::one());
        FElement { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, w: Word, c: Scalar) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(w).or_insert_with(Scalar::zero);
        *entry += c;
        if entry.is_zero() {
            // re-fetch key to remove: collect keys lazily
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add(&self, other: &FElement) -> FElement {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &FElement) -> FElement {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), -c);
        }
        out
    }

    pub fn scale(&self, c: &Scalar) -> FElement {
        if c.is_zero() {
            return FElement::zero();
        }
        FElement { terms: self.terms.iter().map(|(w, a)| (w.clone(), a * c)).collect() }
    }

    pub fn neg(&self) -> FElement {
        FElement { terms: self.terms.iter().map(|(w, a)| (w.clone(), -a)).collect() }
    }

    /// Coefficient of a word (zero if absent).
    pub fn coeff(&self, w: &Word) -> Scalar {
        self.terms.get(w).cloned().unwrap_or_else(Scalar::zero)
    }

    /// The terms grouped by weight.
    pub fn weight_components(&self, satake: &SatakeDiagram) -> BTreeMap<WeightVector, FElement> {
        let mut out: BTreeMap<WeightVector, FElement> = BTreeMap::new();
        for (w, c) in &self.terms {
            out.entry(w.weight(satake)).or_default().add_term(w.clone(), c.clone());
        }
        out
    }

    /// Weight of a homogeneous element; error when mixed.
    pub fn homogeneous_weight(&self, satake: &SatakeDiagram) -> Result<WeightVector> {
        let mut it = self.terms.keys();
        let first = it
            .next()
            .ok_or_else(|| EngineError::Unsupported("weight of zero element".into()))?
            .weight(satake);
        for w in it {
            if w.weight(satake) != first {
                return Err(EngineError::Unsupported("element is not homogeneous".into()));
            }
        }
        Ok(first)
    }
}

impl fmt::Debug for FElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}) {:?}", c, w)?;
        }
        Ok(())
    }
}

/// Element of the twisted tensor square f ⊗ f.
#[derive(Clone, Default)]
pub struct TensorElement {
    pub terms: BTreeMap<(Word, Word), Scalar>,
}

impl TensorElement {
    pub fn zero() -> Self {
        TensorElement { terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, a: Word, b: Word, c: Scalar) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry((a, b)).or_insert_with(Scalar::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }
}

/// Monomial basis of one weight space, with the rewrite map for pivot words.
pub struct WeightBasis {
    /// All words of the weight, lex sorted.
    pub words: Vec<Word>,
    /// The non-pivot words: the basis.
    pub basis: Vec<Word>,
    /// Expansion of each pivot word over basis words.
    rewrite: BTreeMap<Word, Vec<(Word, Scalar)>>,
}

impl WeightBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_basis_word(&self, w: &Word) -> bool {
        !self.rewrite.contains_key(w)
    }
}

pub(crate) type BorelMono = (WeightVector, Word);

/// Shared computation context: the diagram, resource bounds, and caches.
///
/// One context is built per diagram; all engine layers thread through it so
/// weight bases, coproducts, and pairings are computed once.
pub struct Ctx {
    pub satake: SatakeDiagram,
    /// Weight spaces above this height are refused.
    pub height_bound: i64,
    /// Whether Cartan exponents may go negative (group-like vs monoid-like).
    pub invertible_cartan: bool,
    weight_bases: RwLock<BTreeMap<WeightVector, Arc<WeightBasis>>>,
    r_cache: RwLock<BTreeMap<Word, Arc<TensorElement>>>,
    phi_cache: RwLock<BTreeMap<(Word, Word), Scalar>>,
    pub(crate) borel_pairing_cache: RwLock<BTreeMap<(BorelMono, BorelMono), Scalar>>,
    pub(crate) chi_cache: RwLock<BTreeMap<BorelMono, Scalar>>,
    pub(crate) ibar_cache: RwLock<BTreeMap<Word, crate::borel::BorelElement>>,
    pub(crate) star_cache: RwLock<BTreeMap<(BorelMono, BorelMono), crate::borel::BorelElement>>,
}

impl Ctx {
    pub fn new(satake: SatakeDiagram) -> Self {
        Ctx {
            satake,
            height_bound: 8,
            invertible_cartan: false,
            weight_bases: RwLock::new(BTreeMap::new()),
            r_cache: RwLock::new(BTreeMap::new()),
            phi_cache: RwLock::new(BTreeMap::new()),
            borel_pairing_cache: RwLock::new(BTreeMap::new()),
            chi_cache: RwLock::new(BTreeMap::new()),
            ibar_cache: RwLock::new(BTreeMap::new()),
            star_cache: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn new_invertible(satake: SatakeDiagram) -> Self {
        let mut ctx = Ctx::new(satake);
        ctx.invertible_cartan = true;
        ctx
    }

    pub fn with_height_bound(mut self, bound: i64) -> Self {
        self.height_bound = bound;
        self
    }

    pub fn rank(&self) -> usize {
        self.satake.rank()
    }

    /// v_i = u^{2 d_i}.
    pub fn sub_v(&self, i: usize) -> Scalar {
        Scalar::u(2 * self.satake.sym[i])
    }

    /// v_i − v_i^{−1}.
    pub fn v_factor(&self, i: usize) -> Scalar {
        &self.sub_v(i) - &self.sub_v(i).recip()
    }

    fn check_height(&self, mu: &WeightVector) -> Result<()> {
        let h = mu.height();
        if h > self.height_bound {
            return Err(EngineError::HeightExceeded { got: h, bound: self.height_bound });
        }
        Ok(())
    }

    /// The monomial basis of the weight-μ space, cached.
    pub fn weight_basis(&self, mu: &WeightVector) -> Result<Arc<WeightBasis>> {
        self.check_height(mu)?;
        if let Some(b) = self.weight_bases.read().unwrap().get(mu) {
            return Ok(b.clone());
        }
        let built = Arc::new(self.build_weight_basis(mu)?);
        self.weight_bases.write().unwrap().insert(mu.clone(), built.clone());
        Ok(built)
    }

    fn build_weight_basis(&self, mu: &WeightVector) -> Result<WeightBasis> {
        if let Some(n) = self.satake.doubled_from {
            let plus_support = mu.0[..n].iter().any(|&a| a > 0);
            let minus_support = mu.0[n..].iter().any(|&a| a > 0);
            if plus_support && minus_support {
                return self.build_mixed_basis(mu, n);
            }
        }
        let words = all_words_of_weight(&self.satake, mu);
        let ncols = words.len();
        let col_of: BTreeMap<&Word, usize> = words.iter().enumerate().map(|(k, w)| (w, k)).collect();
        let mut rows: Vec<Vec<Scalar>> = Vec::new();
        for i in 0..self.rank() {
            for j in 0..self.rank() {
                if i == j {
                    continue;
                }
                let serre = serre_element(&self.satake, i, j);
                let swt = serre.terms.keys().next().unwrap().weight(&self.satake);
                let rem = mu.sub(&swt);
                if !rem.is_nonneg() {
                    continue;
                }
                for nu in sub_weights(&rem) {
                    let left_words = all_words_of_weight(&self.satake, &nu);
                    let right_words = all_words_of_weight(&self.satake, &rem.sub(&nu));
                    for wl in &left_words {
                        for wr in &right_words {
                            let mut row = vec![Scalar::zero(); ncols];
                            for (sw, sc) in &serre.terms {
                                let full = wl.concat(sw).concat(wr);
                                row[col_of[&full]] += sc;
                            }
                            rows.push(row);
                        }
                    }
                }
            }
        }
        let pivots = rref_in_place(&mut rows);
        let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
        let basis: Vec<Word> = words
            .iter()
            .enumerate()
            .filter(|(k, _)| !pivot_set.contains(k))
            .map(|(_, w)| w.clone())
            .collect();
        let mut rewrite = BTreeMap::new();
        for (r, &p) in pivots.iter().enumerate() {
            let mut expansion = Vec::new();
            for (c, word) in words.iter().enumerate() {
                if c != p && !rows[r][c].is_zero() {
                    debug_assert!(!pivot_set.contains(&c));
                    expansion.push((word.clone(), -&rows[r][c]));
                }
            }
            rewrite.insert(words[p].clone(), expansion);
        }
        let wb = WeightBasis { words, basis, rewrite };
        debug_assert_eq!(wb.dim() as u64, kostant_dim(&self.satake, mu), "dimension at {:?}", mu);
        Ok(wb)
    }

    /// Doubled diagrams: letters of the two copies commute exactly, so a mixed
    /// weight space is the product of the two one-copy spaces.
    fn build_mixed_basis(&self, mu: &WeightVector, n: usize) -> Result<WeightBasis> {
        let rank = self.rank();
        let mut mu_plus = WeightVector::zero(rank);
        let mut mu_minus = WeightVector::zero(rank);
        mu_plus.0[..n].copy_from_slice(&mu.0[..n]);
        mu_minus.0[n..].copy_from_slice(&mu.0[n..]);
        let plus = self.weight_basis(&mu_plus)?;
        let minus = self.weight_basis(&mu_minus)?;
        let mut basis = Vec::with_capacity(plus.basis.len() * minus.basis.len());
        for wp in &plus.basis {
            for wm in &minus.basis {
                basis.push(wp.concat(wm));
            }
        }
        basis.sort();
        Ok(WeightBasis { words: basis.clone(), basis, rewrite: BTreeMap::new() })
    }

    /// Expand one word over the monomial basis.
    pub fn normal_form_word(&self, w: &Word) -> Result<FElement> {
        if let Some(n) = self.satake.doubled_from {
            let has_plus = w.letters().any(|l| l < n);
            let has_minus = w.letters().any(|l| l >= n);
            if has_plus && has_minus {
                let plus = Word(w.0.iter().copied().filter(|&l| (l as usize) < n).collect());
                let minus = Word(w.0.iter().copied().filter(|&l| (l as usize) >= n).collect());
                let a = self.normal_form_word(&plus)?;
                let b = self.normal_form_word(&minus)?;
                let mut out = FElement::zero();
                for (wa, ca) in &a.terms {
                    for (wb, cb) in &b.terms {
                        out.add_term(wa.concat(wb), ca * cb);
                    }
                }
                return Ok(out);
            }
        }
        let mu = w.weight(&self.satake);
        let wb = self.weight_basis(&mu)?;
        if wb.is_basis_word(w) {
            return Ok(FElement::from_word(w.clone()));
        }
        // pivot expansions are already over basis words
        let mut out = FElement::zero();
        for (bw, c) in &wb.rewrite[w] {
            out.add_term(bw.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn normal_form(&self, x: &FElement) -> Result<FElement> {
        let mut out = FElement::zero();
        for (w, c) in &x.terms {
            let nf = self.normal_form_word(w)?;
            for (bw, bc) in &nf.terms {
                out.add_term(bw.clone(), bc * c);
            }
        }
        Ok(out)
    }

    /// Product in f (concatenate, then reduce to the basis).
    pub fn fmul(&self, a: &FElement, b: &FElement) -> Result<FElement> {
        let mut out = FElement::zero();
        for (wa, ca) in &a.terms {
            for (wb, cb) in &b.terms {
                let nf = self.normal_form_word(&wa.concat(wb))?;
                let c = ca * cb;
                for (bw, bc) in &nf.terms {
                    out.add_term(bw.clone(), bc * &c);
                }
            }
        }
        Ok(out)
    }

    pub fn fmul_many(&self, factors: &[FElement]) -> Result<FElement> {
        let mut acc = FElement::one();
        for f in factors {
            acc = self.fmul(&acc, f)?;
        }
        Ok(acc)
    }

    /// ϑ_i^{(n)} = ϑ_i^n / [n]_{v_i}!.
    pub fn theta_divided(&self, i: usize, n: usize) -> FElement {
        FElement::from_word(Word::power(i, n)).scale(&qfact(n as i64, self.satake.sym[i]).recip())
    }

    /// Product of two tensor-square elements under the twisted rule.
    pub fn tensor_mul(&self, a: &TensorElement, b: &TensorElement) -> Result<TensorElement> {
        let mut out = TensorElement::zero();
        for ((a1, a2), ca) in &a.terms {
            let wt_a2 = a2.weight(&self.satake);
            for ((b1, b2), cb) in &b.terms {
                let twist = self.satake.v_bilinear(&wt_a2, &b1.weight(&self.satake));
                let left = self.normal_form_word(&a1.concat(b1))?;
                let right = self.normal_form_word(&a2.concat(b2))?;
                let c = &(ca * cb) * &twist;
                for (wl, cl) in &left.terms {
                    for (wr, cr) in &right.terms {
                        out.add_term(wl.clone(), wr.clone(), &(cl * cr) * &c);
                    }
                }
            }
        }
        Ok(out)
    }

    /// r on one basis word, cached.
    fn r_word(&self, w: &Word) -> Result<Arc<TensorElement>> {
        if let Some(t) = self.r_cache.read().unwrap().get(w) {
            return Ok(t.clone());
        }
        let result = if w.is_empty() {
            let mut t = TensorElement::zero();
            t.add_term(Word::empty(), Word::empty(), Scalar::one());
            t
        } else {
            let head = w.0[0] as usize;
            let rest = Word(w.0[1..].to_vec());
            let mut gen = TensorElement::zero();
            gen.add_term(Word::single(head), Word::empty(), Scalar::one());
            gen.add_term(Word::empty(), Word::single(head), Scalar::one());
            let tail = self.r_of(&self.normal_form_word(&rest)?)?;
            self.tensor_mul(&gen, &tail)?
        };
        let arc = Arc::new(result);
        self.r_cache.write().unwrap().insert(w.clone(), arc.clone());
        Ok(arc)
    }

    /// The coproduct r(x) in the twisted tensor square.
    pub fn r_of(&self, x: &FElement) -> Result<TensorElement> {
        let mut out = TensorElement::zero();
        for (w, c) in &x.terms {
            let rw = self.r_word(w)?;
            for ((a, b), rc) in &rw.terms {
                out.add_term(a.clone(), b.clone(), rc * c);
            }
        }
        Ok(out)
    }

    /// ∂_i^R: the component ϑ_i ⊗ ∂_i^R(x) of r(x); computed by its own
    /// recursion ∂_i^R(w ϑ_j) = ∂_i^R(w) ϑ_j + δ_ij v^{(α_i, wt w)} w.
    pub fn del_r(&self, i: usize, x: &FElement) -> Result<FElement> {
        let mut out = FElement::zero();
        for (w, c) in &x.terms {
            let d = self.del_r_word(i, w)?;
            for (dw, dc) in &d.terms {
                out.add_term(dw.clone(), dc * c);
            }
        }
        Ok(out)
    }

    fn del_r_word(&self, i: usize, w: &Word) -> Result<FElement> {
        if w.is_empty() {
            return Ok(FElement::zero());
        }
        let last = w.0[w.len() - 1] as usize;
        let front = Word(w.0[..w.len() - 1].to_vec());
        let mut out = self.fmul(&self.del_r_word(i, &front)?, &FElement::generator(last))?;
        if last == i {
            let factor = self
                .satake
                .v_bilinear(&WeightVector::simple(self.rank(), i), &front.weight(&self.satake));
            let nf = self.normal_form_word(&front)?;
            for (bw, bc) in &nf.terms {
                out.add_term(bw.clone(), bc * &factor);
            }
        }
        Ok(out)
    }

    /// ∂_i^L: the component ∂_i^L(x) ⊗ ϑ_i of r(x);
    /// ∂_i^L(ϑ_j w) = δ_ij v^{(α_i, wt w)} w + ϑ_j ∂_i^L(w).
    pub fn del_l(&self, i: usize, x: &FElement) -> Result<FElement> {
        let mut out = FElement::zero();
        for (w, c) in &x.terms {
            let d = self.del_l_word(i, w)?;
            for (dw, dc) in &d.terms {
                out.add_term(dw.clone(), dc * c);
            }
        }
        Ok(out)
    }

    fn del_l_word(&self, i: usize, w: &Word) -> Result<FElement> {
        if w.is_empty() {
            return Ok(FElement::zero());
        }
        let head = w.0[0] as usize;
        let rest = Word(w.0[1..].to_vec());
        let mut out = self.fmul(&FElement::generator(head), &self.del_l_word(i, &rest)?)?;
        if head == i {
            let factor = self
                .satake
                .v_bilinear(&WeightVector::simple(self.rank(), i), &rest.weight(&self.satake));
            let nf = self.normal_form_word(&rest)?;
            for (bw, bc) in &nf.terms {
                out.add_term(bw.clone(), bc * &factor);
            }
        }
        Ok(out)
    }

    /// The bilinear pairing on f.
    pub fn phi_f(&self, x: &FElement, y: &FElement) -> Result<Scalar> {
        let xn = self.normal_form(x)?;
        let yn = self.normal_form(y)?;
        let mut out = Scalar::zero();
        for (wx, cx) in &xn.terms {
            for (wy, cy) in &yn.terms {
                if wx.weight(&self.satake) != wy.weight(&self.satake) {
                    continue;
                }
                let p = self.phi_words(wx, wy)?;
                out += &(cx * cy) * &p;
            }
        }
        Ok(out)
    }

    fn phi_words(&self, wx: &Word, wy: &Word) -> Result<Scalar> {
        if wy.is_empty() {
            return Ok(if wx.is_empty() { Scalar::one() } else { Scalar::zero() });
        }
        let key = (wx.clone(), wy.clone());
        if let Some(c) = self.phi_cache.read().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let j = wy.0[0] as usize;
        let rest = Word(wy.0[1..].to_vec());
        let dx = self.del_r(j, &FElement::from_word(wx.clone()))?;
        let mut acc = Scalar::zero();
        for (dw, dc) in &dx.terms {
            if dw.weight(&self.satake) == rest.weight(&self.satake) {
                acc += dc * &self.phi_words(dw, &rest)?;
            }
        }
        let out = &self.v_factor(j) * &acc;
        self.phi_cache.write().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// Word-reversing anti-automorphism fixing the generators.
    pub fn f_sigma(&self, x: &FElement) -> Result<FElement> {
        let mut out = FElement::zero();
        for (w, c) in &x.terms {
            let nf = self.normal_form_word(&w.reversed())?;
            for (bw, bc) in &nf.terms {
                out.add_term(bw.clone(), bc * c);
            }
        }
        Ok(out)
    }

    /// Letter substitution i ↦ τi.
    pub fn f_tau(&self, x: &FElement) -> Result<FElement> {
        let mut out = FElement::zero();
        for (w, c) in &x.terms {
            let tw = Word(w.letters().map(|l| self.satake.tau[l] as u8).collect());
            let nf = self.normal_form_word(&tw)?;
            for (bw, bc) in &nf.terms {
                out.add_term(bw.clone(), bc * c);
            }
        }
        Ok(out)
    }

    /// Bar on f: conjugate coefficients and reverse words (the anti-map
    /// fixing each ϑ_i and sending u to u^{−1}).
    pub fn f_bar(&self, x: &FElement) -> Result<FElement> {
        let mut out = FElement::zero();
        for (w, c) in &x.terms {
            let nf = self.normal_form_word(&w.reversed())?;
            for (bw, bc) in &nf.terms {
                out.add_term(bw.clone(), &bc.bar() * &c.bar());
            }
        }
        Ok(out)
    }

    /// Twisted adjoint action ad(ϑ_i)(x) = ϑ_i x − v^{(α_i, wt x)} x ϑ_i
    /// on homogeneous components.
    pub fn ad_theta(&self, i: usize, x: &FElement) -> Result<FElement> {
        let gi = FElement::generator(i);
        let alpha = WeightVector::simple(self.rank(), i);
        let mut out = FElement::zero();
        for (mu, comp) in x.weight_components(&self.satake) {
            let left = self.fmul(&gi, &comp)?;
            let right = self.fmul(&comp, &gi)?.scale(&self.satake.v_bilinear(&alpha, &mu));
            out = out.add(&left.sub(&right));
        }
        Ok(out)
    }

    /// ad of a whole (inhomogeneous) element, letter by letter from the right:
    /// ad(ϑ_{i_1} ... ϑ_{i_k}) = ad(ϑ_{i_1}) ∘ ... ∘ ad(ϑ_{i_k}).
    pub fn ad_word(&self, w: &Word, x: &FElement) -> Result<FElement> {
        let mut acc = x.clone();
        for l in w.letters().collect::<Vec<_>>().into_iter().rev() {
            acc = self.ad_theta(l, &acc)?;
        }
        Ok(acc)
    }
}

/// The Serre relation element for the ordered pair (i, j), as a raw word
/// combination of weight (1 − c_ij) α_i + α_j.
pub fn serre_element(satake: &SatakeDiagram, i: usize, j: usize) -> FElement {
    let c = satake.cartan[i][j];
    let m = (1 - c) as usize;
    let mut out = FElement::zero();
    for r in 0..=m {
        let mut letters = vec![i; r];
        letters.push(j);
        letters.extend(vec![i; m - r]);
        let sign = if r % 2 == 0 { Scalar::one() } else { -Scalar::one() };
        out.add_term(
            Word::from_letters(&letters),
            &sign * &qbinom((1 - c) as i64, r as i64, satake.sym[i]),
        );
    }
    out
}

/// All words of the given weight, lex sorted.
pub fn all_words_of_weight(_satake: &SatakeDiagram, mu: &WeightVector) -> Vec<Word> {
    let mut out = Vec::new();
    let mut counts: Vec<i64> = mu.0.clone();
    let mut current: Vec<u8> = Vec::with_capacity(mu.height().max(0) as usize);
    fn rec(counts: &mut Vec<i64>, current: &mut Vec<u8>, out: &mut Vec<Word>) {
        if counts.iter().all(|&c| c == 0) {
            out.push(Word(current.clone()));
            return;
        }
        for i in 0..counts.len() {
            if counts[i] > 0 {
                counts[i] -= 1;
                current.push(i as u8);
                rec(counts, current, out);
                current.pop();
                counts[i] += 1;
            }
        }
    }
    if mu.is_nonneg() {
        rec(&mut counts, &mut current, &mut out);
    }
    out
}

/// All componentwise-smaller nonnegative weights (including 0 and μ itself).
pub fn sub_weights(mu: &WeightVector) -> Vec<WeightVector> {
    let mut out = vec![WeightVector::zero(mu.rank())];
    for (i, &cap) in mu.0.iter().enumerate() {
        let mut next = Vec::new();
        for base in &out {
            for a in 0..=cap {
                let mut v = base.clone();
                v.0[i] = a;
                next.push(v);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::qint;

    fn a2() -> Ctx {
        Ctx::new(SatakeDiagram::split("A2").unwrap())
    }

    fn wv(v: &[i64]) -> WeightVector {
        WeightVector(v.to_vec())
    }

    fn fw(letters: &[usize]) -> FElement {
        FElement::from_word(Word::from_letters(letters))
    }

    #[test]
    fn word_enumeration() {
        let d = SatakeDiagram::split("A2").unwrap();
        let words = all_words_of_weight(&d, &wv(&[2, 1]));
        assert_eq!(words.len(), 3);
        assert_eq!(words[0], Word::from_letters(&[0, 0, 1]));
        assert_eq!(words[2], Word::from_letters(&[1, 0, 0]));
    }

    #[test]
    fn serre_reduction_a2() {
        let ctx = a2();
        // ϑ1ϑ1ϑ2 = [2] ϑ1ϑ2ϑ1 − ϑ2ϑ1ϑ1
        let nf = ctx.normal_form_word(&Word::from_letters(&[0, 0, 1])).unwrap();
        let mut expected = FElement::zero();
        expected.add_term(Word::from_letters(&[0, 1, 0]), qint(2, 1));
        expected.add_term(Word::from_letters(&[1, 0, 0]), -Scalar::one());
        assert_eq!(nf, expected);
        // basis of weight α1+α2 is both words
        let wb = ctx.weight_basis(&wv(&[1, 1])).unwrap();
        assert_eq!(wb.dim(), 2);
        // Serre elements vanish in normal form
        for (i, j) in [(0, 1), (1, 0)] {
            let s = serre_element(&ctx.satake, i, j);
            assert!(ctx.normal_form(&s).unwrap().is_zero());
        }
    }

    #[test]
    fn dimensions_match_kostant() {
        for label in ["A2", "B2", "G2"] {
            let ctx = Ctx::new(SatakeDiagram::split(label).unwrap());
            for mu in sub_weights(&wv(&[3, 3])) {
                if mu.height() > 5 {
                    continue;
                }
                let wb = ctx.weight_basis(&mu).unwrap();
                assert_eq!(
                    wb.dim() as u64,
                    kostant_dim(&ctx.satake, &mu),
                    "{} at {:?}",
                    label,
                    mu
                );
            }
        }
    }

    #[test]
    fn fmul_associative() {
        let ctx = a2();
        let x = fw(&[0]).add(&fw(&[1, 0]).scale(&Scalar::u(3)));
        let y = fw(&[1]).add(&FElement::one());
        let z = fw(&[0, 1]);
        let xy_z = ctx.fmul(&ctx.fmul(&x, &y).unwrap(), &z).unwrap();
        let x_yz = ctx.fmul(&x, &ctx.fmul(&y, &z).unwrap()).unwrap();
        assert_eq!(xy_z, x_yz);
    }

    #[test]
    fn coproduct_of_square() {
        let ctx = a2();
        let r = ctx.r_of(&fw(&[0, 0])).unwrap();
        // r(ϑ1²) = ϑ1²⊗1 + (1+v²) ϑ1⊗ϑ1 + 1⊗ϑ1²
        let mid = r.terms[&(Word::single(0), Word::single(0))].clone();
        assert_eq!(mid, &Scalar::one() + &Scalar::v(2));
        assert_eq!(r.terms.len(), 3);
    }

    #[test]
    fn r_is_multiplicative() {
        let ctx = a2();
        let x = fw(&[0, 1]).add(&fw(&[1]).scale(&Scalar::u(-2)));
        let y = fw(&[1, 0]);
        let lhs = ctx.r_of(&ctx.fmul(&x, &y).unwrap()).unwrap();
        let rhs = ctx.tensor_mul(&ctx.r_of(&x).unwrap(), &ctx.r_of(&y).unwrap()).unwrap();
        assert_eq!(lhs.terms, rhs.terms);
    }

    #[test]
    fn derivations_match_coproduct_components() {
        let ctx = a2();
        for letters in [vec![0usize, 1, 0], vec![0, 0, 1], vec![1, 0]] {
            let x = ctx.normal_form_word(&Word::from_letters(&letters)).unwrap();
            let r = ctx.r_of(&x).unwrap();
            for i in 0..2 {
                // first-leg single letter i
                let mut from_r = FElement::zero();
                let mut from_r_l = FElement::zero();
                for ((a, b), c) in &r.terms {
                    if a.0 == vec![i as u8] {
                        from_r.add_term(b.clone(), c.clone());
                    }
                    if b.0 == vec![i as u8] {
                        from_r_l.add_term(a.clone(), c.clone());
                    }
                }
                assert_eq!(ctx.del_r(i, &x).unwrap(), from_r, "del_r {}", i);
                assert_eq!(ctx.del_l(i, &x).unwrap(), from_r_l, "del_l {}", i);
            }
        }
    }

    #[test]
    fn pairing_values() {
        let ctx = a2();
        // φ(ϑ1, ϑ1) = v − v^{−1}
        assert_eq!(ctx.phi_f(&fw(&[0]), &fw(&[0])).unwrap(), ctx.v_factor(0));
        assert!(ctx.phi_f(&fw(&[0]), &fw(&[1])).unwrap().is_zero());
        // φ(ϑ1², ϑ1²) = (1+v²)(v−v^{−1})²
        let vf = ctx.v_factor(0);
        let expected = &(&Scalar::one() + &Scalar::v(2)) * &(&vf * &vf);
        assert_eq!(ctx.phi_f(&fw(&[0, 0]), &fw(&[0, 0])).unwrap(), expected);
    }

    #[test]
    fn pairing_is_symmetric_and_nondegenerate() {
        let ctx = a2();
        let words = [vec![0usize, 1], vec![1, 0]];
        for a in &words {
            for b in &words {
                let lhs = ctx.phi_f(&fw(a), &fw(b)).unwrap();
                let rhs = ctx.phi_f(&fw(b), &fw(a)).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
        // Gram matrix at weight α1+α2 has rank 2
        let wb = ctx.weight_basis(&wv(&[1, 1])).unwrap();
        let mut gram: Vec<Vec<Scalar>> = Vec::new();
        for a in &wb.basis {
            let row = wb
                .basis
                .iter()
                .map(|b| {
                    ctx.phi_f(&FElement::from_word(a.clone()), &FElement::from_word(b.clone()))
                        .unwrap()
                })
                .collect();
            gram.push(row);
        }
        let pivots = rref_in_place(&mut gram);
        assert_eq!(pivots.len(), 2);
    }

    #[test]
    fn sigma_tau_bar() {
        let ctx = a2();
        let x = ctx.fmul(&fw(&[0]), &fw(&[0, 1])).unwrap();
        // σ reverses, so σ(x) = nf(ϑ2ϑ1ϑ1)... check σ is an anti-map on products
        let a = fw(&[0, 1]);
        let b = fw(&[1, 0]);
        let lhs = ctx.f_sigma(&ctx.fmul(&a, &b).unwrap()).unwrap();
        let rhs = ctx
            .fmul(&ctx.f_sigma(&b).unwrap(), &ctx.f_sigma(&a).unwrap())
            .unwrap();
        assert_eq!(lhs, rhs);
        // τ on split diagram is the identity
        assert_eq!(ctx.f_tau(&x).unwrap(), x);
        // bar is involutive
        let bb = ctx.f_bar(&ctx.f_bar(&x).unwrap()).unwrap();
        assert_eq!(bb, ctx.normal_form(&x).unwrap());
    }

    #[test]
    fn bar_fixes_dual_root_vector() {
        let ctx = a2();
        // ϑ12 = (v^{1/2} ϑ1ϑ2 − v^{−1/2} ϑ2ϑ1)/(v − v^{−1}) is bar-fixed
        let num = fw(&[0, 1]).scale(&Scalar::u(1)).sub(&fw(&[1, 0]).scale(&Scalar::u(-1)));
        let denom = &Scalar::v(1) - &Scalar::v(-1);
        let th12 = num.scale(&denom.recip());
        assert_eq!(ctx.f_bar(&th12).unwrap(), th12);
    }

    #[test]
    fn ad_action() {
        let ctx = a2();
        // ad(ϑ1)(ϑ2) = ϑ1ϑ2 − v^{(α1,α2)} ϑ2ϑ1 = ϑ1ϑ2 − v^{−1}ϑ2ϑ1
        let got = ctx.ad_theta(0, &fw(&[1])).unwrap();
        let mut expected = FElement::zero();
        expected.add_term(Word::from_letters(&[0, 1]), Scalar::one());
        expected.add_term(Word::from_letters(&[1, 0]), -Scalar::v(-1));
        assert_eq!(got, expected);
        // ad is multiplicative along words
        let w = Word::from_letters(&[0, 0]);
        let via_word = ctx.ad_word(&w, &fw(&[1])).unwrap();
        let nested = ctx.ad_theta(0, &ctx.ad_theta(0, &fw(&[1])).unwrap()).unwrap();
        assert_eq!(via_word, nested);
    }

    #[test]
    fn doubled_commutation() {
        let base = SatakeDiagram::split("A2").unwrap();
        let ctx = Ctx::new(base.doubled());
        // cross-copy letters commute exactly
        let x = ctx.normal_form_word(&Word::from_letters(&[2, 0])).unwrap();
        assert_eq!(x, FElement::from_word(Word::from_letters(&[0, 2])));
        // mixed weight space is a product of the copy spaces
        let wb = ctx.weight_basis(&wv(&[1, 1, 1, 1])).unwrap();
        assert_eq!(wb.dim(), 4);
        // normal form agrees with in-copy Serre reduction
        let w = Word::from_letters(&[0, 2, 0, 1]); // ϑ1 ϑ1' ϑ1 ϑ2 with a cross letter inside
        let nf = ctx.normal_form_word(&w).unwrap();
        for bw in nf.terms.keys() {
            let letters: Vec<usize> = bw.letters().collect();
            let split_point = letters.iter().position(|&l| l >= 2).unwrap_or(letters.len());
            assert!(letters[split_point..].iter().all(|&l| l >= 2), "sorted {:?}", bw);
        }
    }

    #[test]
    fn height_bound_enforced() {
        let ctx = Ctx::new(SatakeDiagram::split("A1").unwrap()).with_height_bound(3);
        let w = Word::power(0, 4);
        match ctx.normal_form_word(&w) {
            Err(EngineError::HeightExceeded { got: 4, bound: 3 }) => {}
            other => panic!("expected height error, got {:?}", other.map(|_| ())),
        }
    }
}
