//! The Borel-type algebra on top of f: monomials h_α·w with a Cartan part
//! h_α (α in the root lattice, or its positive monoid when the Cartan part is
//! not invertible) and an f part in the monomial basis.
//!
//! Commutation is h_α ϑ_j = v^{(α, α_j)} ϑ_j h_α, so every element has the
//! Cartan-left normal form Σ c · h_α · w.  The coproduct is determined by
//! Δ(h_α) = h_α ⊗ h_α and Δ(ϑ_i) = ϑ_i ⊗ 1 + h_i ⊗ ϑ_i; on a monomial it is
//! read off from the twisted coproduct r of the f part:
//!   Δ(h_β y) = Σ v^{−(wt y₂, wt y₁)} (h_{β+wt y₂} y₁) ⊗ (h_β y₂).
//! The counit kills every monomial with a nonempty f part.
//!
//! The bilinear pairing extends the one on f by φ(h_α, h_β) = v^{(α,β)} and
//! φ(f-part, Cartan-part) = 0, via φ(xy, b) = Σ φ(x, b₍₁₎) φ(y, b₍₂₎).
//! The character χ is the linear functional with χ(1) = 1, χ(ϑ_i) = 0,
//! χ(h_i) = v^{(α_i, α_{τi})}, extended by the same convolution pattern.

use crate::cartan::WeightVector;
use crate::falgebra::{BorelMono, Ctx, FElement, Word};
use crate::scalars::Scalar;
use crate::{EngineError, Result};
use std::collections::BTreeMap;
use std::fmt;

/// Element in Cartan-left normal form: map (α, word) → coefficient.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct BorelElement {
    pub terms: BTreeMap<(WeightVector, Word), Scalar>,
}

impl BorelElement {
    pub fn zero() -> Self {
        BorelElement { terms: BTreeMap::new() }
    }

    pub fn one(rank: usize) -> Self {
        BorelElement::monomial(WeightVector::zero(rank), Word::empty(), Scalar::one())
    }

    pub fn monomial(alpha: WeightVector, w: Word, c: Scalar) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((alpha, w), c);
        }
        BorelElement { terms }
    }

    pub fn cartan(alpha: WeightVector) -> Self {
        BorelElement::monomial(alpha, Word::empty(), Scalar::one())
    }

    pub fn generator(rank: usize, i: usize) -> Self {
        BorelElement::monomial(WeightVector::zero(rank), Word::single(i), Scalar::one())
    }

    pub fn from_f(rank: usize, x: &FElement) -> Self {
        let mut out = BorelElement::zero();
        for (w, c) in &x.terms {
            out.add_term(WeightVector::zero(rank), w.clone(), c.clone());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, alpha: WeightVector, w: Word, c: Scalar) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry((alpha, w)).or_insert_with(Scalar::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add(&self, other: &BorelElement) -> BorelElement {
        let mut out = self.clone();
        for ((a, w), c) in &other.terms {
            out.add_term(a.clone(), w.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &BorelElement) -> BorelElement {
        let mut out = self.clone();
        for ((a, w), c) in &other.terms {
            out.add_term(a.clone(), w.clone(), -c);
        }
        out
    }

    pub fn scale(&self, c: &Scalar) -> BorelElement {
        if c.is_zero() {
            return BorelElement::zero();
        }
        BorelElement {
            terms: self.terms.iter().map(|(k, a)| (k.clone(), a * c)).collect(),
        }
    }

    pub fn neg(&self) -> BorelElement {
        BorelElement { terms: self.terms.iter().map(|(k, a)| (k.clone(), -a)).collect() }
    }

    pub fn coeff(&self, alpha: &WeightVector, w: &Word) -> Scalar {
        self.terms
            .get(&(alpha.clone(), w.clone()))
            .cloned()
            .unwrap_or_else(Scalar::zero)
    }

    /// The f part paired with each Cartan exponent.
    pub fn cartan_components(&self) -> BTreeMap<WeightVector, FElement> {
        let mut out: BTreeMap<WeightVector, FElement> = BTreeMap::new();
        for ((a, w), c) in &self.terms {
            out.entry(a.clone()).or_default().add_term(w.clone(), c.clone());
        }
        out
    }

    /// Maximum f-part length over the support (0 for pure Cartan elements).
    pub fn max_f_len(&self) -> usize {
        self.terms.keys().map(|(_, w)| w.len()).max().unwrap_or(0)
    }
}

impl fmt::Debug for BorelElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, ((a, w), c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}) h{:?} {:?}", c, a, w)?;
        }
        Ok(())
    }
}

/// Element of B ⊗ B (componentwise multiplication).
#[derive(Clone, Default)]
pub struct BorelTensor {
    pub terms: BTreeMap<(BorelMono, BorelMono), Scalar>,
}

impl BorelTensor {
    pub fn zero() -> Self {
        BorelTensor { terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, a: BorelMono, b: BorelMono, c: Scalar) {
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

impl Ctx {
    pub(crate) fn check_cartan_exponent(&self, alpha: &WeightVector) -> Result<()> {
        if !self.invertible_cartan && !alpha.is_nonneg() {
            return Err(EngineError::NegativeCartanExponent);
        }
        Ok(())
    }

    /// Product in the Borel algebra:
    /// (h_α x)(h_β y) = v^{−(β, wt x)} h_{α+β} x y.
    pub fn borel_mul(&self, a: &BorelElement, b: &BorelElement) -> Result<BorelElement> {
        let mut out = BorelElement::zero();
        for ((alpha, x), ca) in &a.terms {
            let wx = x.weight(&self.satake);
            for ((beta, y), cb) in &b.terms {
                let gamma = alpha.add(beta);
                self.check_cartan_exponent(&gamma)?;
                let twist = Scalar::u(-2 * self.satake.bilinear(beta, &wx));
                let prod = self.normal_form_word(&x.concat(y))?;
                let c = &(ca * cb) * &twist;
                for (bw, bc) in &prod.terms {
                    out.add_term(gamma.clone(), bw.clone(), bc * &c);
                }
            }
        }
        Ok(out)
    }

    pub fn borel_mul_many(&self, factors: &[BorelElement]) -> Result<BorelElement> {
        let mut acc = BorelElement::one(self.rank());
        for f in factors {
            acc = self.borel_mul(&acc, f)?;
        }
        Ok(acc)
    }

    /// Left multiplication by h_α.
    pub fn h_mul(&self, alpha: &WeightVector, x: &BorelElement) -> Result<BorelElement> {
        self.borel_mul(&BorelElement::cartan(alpha.clone()), x)
    }

    /// The coproduct of a monomial.
    pub fn delta_mono(&self, alpha: &WeightVector, w: &Word) -> Result<BorelTensor> {
        let mut out = BorelTensor::zero();
        let r = self.r_of(&FElement::from_word(w.clone()))?;
        for ((y1, y2), c) in &r.terms {
            let wt1 = y1.weight(&self.satake);
            let wt2 = y2.weight(&self.satake);
            let coeff = c * &Scalar::u(-2 * self.satake.bilinear(&wt2, &wt1));
            out.add_term(
                (alpha.add(&wt2), y1.clone()),
                (alpha.clone(), y2.clone()),
                coeff,
            );
        }
        Ok(out)
    }

    pub fn delta(&self, x: &BorelElement) -> Result<BorelTensor> {
        let mut out = BorelTensor::zero();
        for ((alpha, w), c) in &x.terms {
            let d = self.delta_mono(alpha, w)?;
            for ((m1, m2), dc) in &d.terms {
                out.add_term(m1.clone(), m2.clone(), dc * c);
            }
        }
        Ok(out)
    }

    /// Componentwise product on B ⊗ B.
    pub fn borel_tensor_mul(&self, a: &BorelTensor, b: &BorelTensor) -> Result<BorelTensor> {
        let mut out = BorelTensor::zero();
        for ((a1, a2), ca) in &a.terms {
            let e1 = BorelElement::monomial(a1.0.clone(), a1.1.clone(), Scalar::one());
            let e2 = BorelElement::monomial(a2.0.clone(), a2.1.clone(), Scalar::one());
            for ((b1, b2), cb) in &b.terms {
                let f1 = BorelElement::monomial(b1.0.clone(), b1.1.clone(), Scalar::one());
                let f2 = BorelElement::monomial(b2.0.clone(), b2.1.clone(), Scalar::one());
                let p1 = self.borel_mul(&e1, &f1)?;
                let p2 = self.borel_mul(&e2, &f2)?;
                let c = ca * cb;
                for (m1, c1) in &p1.terms {
                    for (m2, c2) in &p2.terms {
                        out.add_term(m1.clone(), m2.clone(), &(c1 * c2) * &c);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Counit: coefficient sum over monomials with empty f part.
    pub fn epsilon(&self, x: &BorelElement) -> Scalar {
        let mut out = Scalar::zero();
        for ((_, w), c) in &x.terms {
            if w.is_empty() {
                out += c;
            }
        }
        out
    }

    /// The bilinear pairing on the Borel algebra.
    pub fn pairing_borel(&self, a: &BorelElement, b: &BorelElement) -> Result<Scalar> {
        let mut out = Scalar::zero();
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                let p = self.pairing_borel_mono(ma, mb)?;
                if !p.is_zero() {
                    out += &(ca * cb) * &p;
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn pairing_borel_mono(&self, a: &BorelMono, b: &BorelMono) -> Result<Scalar> {
        let key = (a.clone(), b.clone());
        if let Some(c) = self.borel_pairing_cache.read().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let (alpha, w) = a;
        let (beta, y) = b;
        let out = if !alpha.is_zero() {
            // φ(h_α A, h_β y) = v^{(α, β + wt y)} φ(A, h_β y)
            let shift = self.satake.v_bilinear(alpha, &beta.add(&y.weight(&self.satake)));
            let stripped = (WeightVector::zero(self.rank()), w.clone());
            &shift * &self.pairing_borel_mono(&stripped, b)?
        } else if w.is_empty() {
            // φ(1, h_β y) = ε of the second argument's f part
            if y.is_empty() {
                Scalar::one()
            } else {
                Scalar::zero()
            }
        } else {
            // peel the leading generator of w through Δ of the second argument
            let i = w.0[0] as usize;
            let rest = FElement::from_word(Word(w.0[1..].to_vec()));
            let rest_nf = self.normal_form(&rest)?;
            let d = self.delta_mono(beta, y)?;
            let mut acc = Scalar::zero();
            for (((g1, z1), m2), c) in &d.terms {
                if z1.0.len() != 1 || z1.0[0] as usize != i {
                    continue;
                }
                // φ(ϑ_i, h_γ ϑ_i) = v^{(α_i, γ)} (v_i − v_i^{−1})
                let head = &self.satake.v_bilinear(&WeightVector::simple(self.rank(), i), g1)
                    * &self.v_factor(i);
                let mut tail = Scalar::zero();
                for (rw, rc) in &rest_nf.terms {
                    tail += rc
                        * &self.pairing_borel_mono(
                            &(WeightVector::zero(self.rank()), rw.clone()),
                            m2,
                        )?;
                }
                acc += &(c * &head) * &tail;
            }
            acc
        };
        self.borel_pairing_cache.write().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// τ on the Borel algebra: h_α ↦ h_{τα}, letters i ↦ τi.
    pub fn borel_tau(&self, x: &BorelElement) -> Result<BorelElement> {
        let mut out = BorelElement::zero();
        for ((alpha, w), c) in &x.terms {
            let tw = self.f_tau(&FElement::from_word(w.clone()))?;
            let ta = self.satake.tau_weight(alpha);
            for (bw, bc) in &tw.terms {
                out.add_term(ta.clone(), bw.clone(), bc * c);
            }
        }
        Ok(out)
    }

    /// χ: the functional with χ(1)=1, χ(ϑ_i)=0, χ(h_i)=v^{(α_i, α_{τi})},
    /// extended by χ(g m) = χ-convolution against Δ(m) for a generator g.
    pub fn chi(&self, x: &BorelElement) -> Result<Scalar> {
        let mut out = Scalar::zero();
        for (m, c) in &x.terms {
            out += c * &self.chi_mono(m)?;
        }
        Ok(out)
    }

    fn chi_mono(&self, m: &BorelMono) -> Result<Scalar> {
        let (alpha, w) = m;
        if alpha.is_zero() && w.is_empty() {
            return Ok(Scalar::one());
        }
        if let Some(c) = self.chi_cache.read().unwrap().get(m) {
            return Ok(c.clone());
        }
        let out = if !alpha.is_zero() {
            // the Cartan prefix is group-like: peeling h_α off h_α y gives
            // χ(h_α) v^{(τα, wt y)} χ(y), and the closed form for χ(h_α)
            // holds for exponents of either sign
            let ta = self.satake.tau_weight(alpha);
            let mut ex = self.satake.bilinear(&ta, alpha);
            for (i, &ai) in alpha.0.iter().enumerate() {
                let a_i = WeightVector::simple(self.rank(), i);
                let a_ti = WeightVector::simple(self.rank(), self.satake.tau[i]);
                ex += ai * self.satake.bilinear(&a_ti, &a_i);
            }
            let twist = self.satake.v_bilinear(&ta, &w.weight(&self.satake));
            let tail = self.chi_mono(&(WeightVector::zero(self.rank()), w.clone()))?;
            &(&Scalar::u(ex) * &twist) * &tail
        } else {
            // χ(ϑ_i m') = v^{(α_i, α_{τi})} Σ φ(ϑ_{τi}, m'₍₁₎) χ(m'₍₂₎)
            let i = w.0[0] as usize;
            let rest = self.normal_form(&FElement::from_word(Word(w.0[1..].to_vec())))?;
            let ti = self.satake.tau[i];
            let a_ti = WeightVector::simple(self.rank(), ti);
            let mut acc = Scalar::zero();
            for (rw, rc) in &rest.terms {
                let d = self.delta_mono(&WeightVector::zero(self.rank()), rw)?;
                for (((g1, z1), m2), c) in &d.terms {
                    if z1.0.len() != 1 || z1.0[0] as usize != ti {
                        continue;
                    }
                    let head = &self.satake.v_bilinear(&a_ti, g1) * &self.v_factor(ti);
                    acc += &(&(rc * c) * &head) * &self.chi_mono(m2)?;
                }
            }
            &self.satake.v_bilinear(
                &WeightVector::simple(self.rank(), i),
                &WeightVector::simple(self.rank(), ti),
            ) * &acc
        };
        self.chi_cache.write().unwrap().insert(m.clone(), out.clone());
        Ok(out)
    }
}
