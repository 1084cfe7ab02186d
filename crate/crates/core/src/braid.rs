//! Braid operators on the double and their relative counterparts on the star
//! algebra, plus the machinery they feed: root vectors, dual PBW monomials,
//! parameter twists, and quasi K-matrices.
//!
//! Two algebras are in play.  The Lusztig operators T act on the double (tensor
//! coordinates K E K' F over the base diagram, multiplied through the doubled
//! star product).  The relative operators TT act on the star algebra of the
//! base diagram itself.  The bridge between them is the embedding x ↦ x⁺ of f
//! into the plus part of the double and the coideal map ξ from the star
//! algebra into the double.
//!
//! Conventions, fixed once here:
//! * a prime operator of sign e sends E_i to v_i^e (K_i^{-e}-side)⁻¹F_i per the
//!   rank-one table below; a double-prime operator is σ ∘ prime(i,−e) ∘ σ;
//! * T_w composes along a reduced word with the rightmost letter applied
//!   first, and T_w⁻¹ therefore applies the inverse letters left to right;
//! * a relative operator is defined on generators (Cartan monomials move by
//!   the restricted reflection r_i, orbit letters by the rank-one involution
//!   τ_i with a 𝕂⁻¹ dressing, letters off the orbit through the embedded
//!   Lusztig image) and extended through star-monomial symbols;
//! * direction −1 of a relative operator is σ^ı ∘ (direction +1) ∘ σ^ı.
//!
//! Every operator here is exact; height bounds only gate how far quasi
//! K-matrix components are computed.

// operator names keep their capital T, matching the notation they implement
#![allow(non_snake_case)]

use crate::cartan::{
    positive_root_sequence, restricted_reflection, tau_i_involution, SatakeDiagram, WeightVector,
};
use crate::falgebra::{Ctx, FElement, Word};
use crate::ihopf::{tu_from_borel, tu_star, tu_to_borel, TUElement, TUMono};
use crate::linalg::solve_unique;
use crate::borel::{BorelElement, BorelTensor};
use crate::scalars::{qfact, Scalar};
use crate::{EngineError, Result};
use std::collections::BTreeMap;

/// Which of the two Lusztig families an operator belongs to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BraidFlavor {
    Prime,
    DoublePrime,
}

/// A single Lusztig operator on the double: node, sign e = ±1, and flavor.
/// `forward(i)` is the prime operator at e = +1; `inverse(i)` is its actual
/// inverse, the double-prime operator at e = −1.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BraidOperator {
    pub i: usize,
    pub e: i64,
    pub flavor: BraidFlavor,
}

impl BraidOperator {
    pub fn prime(i: usize, e: i64) -> Self {
        BraidOperator { i, e, flavor: BraidFlavor::Prime }
    }

    pub fn double_prime(i: usize, e: i64) -> Self {
        BraidOperator { i, e, flavor: BraidFlavor::DoublePrime }
    }

    pub fn forward(i: usize) -> Self {
        Self::prime(i, 1)
    }

    pub fn inverse(i: usize) -> Self {
        Self::double_prime(i, -1)
    }
}

/// The invertible-Cartan double of a base context, with twice its height room.
pub fn double_ctx(base: &Ctx) -> Ctx {
    Ctx::new_invertible(base.satake.doubled()).with_height_bound(2 * base.height_bound)
}

fn require_double(dbl: &Ctx) -> Result<usize> {
    dbl.satake
        .doubled_from
        .ok_or_else(|| EngineError::Unsupported("operator needs a doubled context".into()))
}

/// Letter multiplicities of a word as a weight vector.
fn letter_counts(rank: usize, w: &Word) -> WeightVector {
    let mut v = vec![0i64; rank];
    for l in w.letters() {
        v[l] += 1;
    }
    WeightVector(v)
}

/// The scaling profile of a monomial under a diagonal parameter twist: the
/// E-word letter counts plus both Cartan exponents.  F letters do not scale.
fn s_vector(rank: usize, m: &TUMono) -> WeightVector {
    letter_counts(rank, &m.1).add(&m.0).add(&m.2)
}

fn split_cartan(rank: usize, alpha: &WeightVector) -> (WeightVector, WeightVector) {
    (WeightVector(alpha.0[..rank].to_vec()), WeightVector(alpha.0[rank..].to_vec()))
}

/// Integer power of a scalar (negative exponents through the reciprocal).
fn spow(s: &Scalar, k: i64) -> Scalar {
    let b = if k < 0 { s.recip() } else { s.clone() };
    let mut out = Scalar::one();
    for _ in 0..k.abs() {
        out = &out * &b;
    }
    out
}

/// Exact square root of a scalar that is a monomial u-power times a perfect
/// square rational.  Anything else has no root in the coefficient field.
fn scalar_sqrt(s: &Scalar) -> Result<Scalar> {
    use num::bigint::BigInt;
    use num::rational::BigRational;
    use num::{Signed, Zero};
    let no_root =
        |why: &str| EngineError::ConventionPin(format!("scalar has no exact square root: {why}"));
    let (coeff, exp) = s
        .monomial_parts()
        .ok_or_else(|| no_root("not a monomial in u"))?;
    if exp % 2 != 0 {
        return Err(no_root("odd power of u"));
    }
    if coeff.is_zero() {
        return Ok(Scalar::zero());
    }
    if coeff.is_negative() {
        return Err(no_root("negative coefficient"));
    }
    let sq = |n: &BigInt| -> Option<BigInt> {
        let r = n.sqrt();
        (&r * &r == *n).then_some(r)
    };
    let num = sq(coeff.numer()).ok_or_else(|| no_root("numerator is not a perfect square"))?;
    let den = sq(coeff.denom()).ok_or_else(|| no_root("denominator is not a perfect square"))?;
    Ok(&Scalar::from_rational(BigRational::new(num, den)) * &Scalar::u(exp / 2))
}

/// Embed an f element as the plus part of the double.
pub fn f_plus(rank: usize, x: &FElement) -> TUElement {
    let mut out = TUElement::zero();
    for (w, c) in &x.terms {
        out.add_term(
            (WeightVector::zero(rank), w.clone(), WeightVector::zero(rank), Word::empty()),
            c.clone(),
        );
    }
    out
}

/// Embed an f element as the minus part of the double.
pub fn f_minus(rank: usize, x: &FElement) -> TUElement {
    let mut out = TUElement::zero();
    for (w, c) in &x.terms {
        out.add_term(
            (WeightVector::zero(rank), Word::empty(), WeightVector::zero(rank), w.clone()),
            c.clone(),
        );
    }
    out
}

/// Read a double element back as an f element of the plus part, or error.
pub fn tu_as_plus(x: &TUElement) -> Result<FElement> {
    let mut out = FElement::zero();
    for ((k, e, kp, f), c) in &x.terms {
        if !k.is_zero() || !kp.is_zero() || !f.is_empty() {
            return Err(EngineError::Unsupported(
                "element is not in the plus part of the double".into(),
            ));
        }
        out.add_term(e.clone(), c.clone());
    }
    Ok(out)
}

/// Read a double element back as an f element of the minus part, or error.
pub fn tu_as_minus(x: &TUElement) -> Result<FElement> {
    let mut out = FElement::zero();
    for ((k, e, kp, f), c) in &x.terms {
        if !k.is_zero() || !kp.is_zero() || !e.is_empty() {
            return Err(EngineError::Unsupported(
                "element is not in the minus part of the double".into(),
            ));
        }
        out.add_term(f.clone(), c.clone());
    }
    Ok(out)
}

/// Identify a coideal-image tensor with double coordinates leg by leg.
pub fn tensor_to_tu(t: &BorelTensor) -> TUElement {
    let mut out = TUElement::zero();
    for (((k1, w1), (k2, w2)), c) in &t.terms {
        out.add_term((k1.clone(), w1.clone(), k2.clone(), w2.clone()), c.clone());
    }
    out
}

/// σ on the double: the anti-automorphism fixing every E and F generator and
/// swapping the two Cartan legs.  Realized by the star-algebra σ^ı of the
/// doubled diagram, whose involution is exactly the copy swap.
pub fn tu_sigma(dbl: &Ctx, x: &TUElement) -> Result<TUElement> {
    require_double(dbl)?;
    tu_from_borel(dbl, &dbl.isigma(&tu_to_borel(dbl, x)?)?)
}

/// ω on the double: the automorphism exchanging the E and F legs along with
/// their Cartan exponents.  Exact monomial by monomial because letters of the
/// two copies commute on the nose.
pub fn tu_omega(dbl: &Ctx, x: &TUElement) -> Result<TUElement> {
    require_double(dbl)?;
    let mut out = TUElement::zero();
    for ((k, e, kp, f), c) in &x.terms {
        out.add_term((kp.clone(), f.clone(), k.clone(), e.clone()), c.clone());
    }
    Ok(out)
}

/// The bar anti-involution of the double: coefficients conjugate, every
/// generator E_i, F_i, K_i, K'_i is fixed, products reverse.
pub fn tu_bar(dbl: &Ctx, x: &TUElement) -> Result<TUElement> {
    let n = require_double(dbl)?;
    let b = tu_to_borel(dbl, x)?;
    let symbols = dbl.express_star(&b)?;
    let mut out = BorelElement::zero();
    for (c, alpha, w) in symbols {
        // the Cartan monomial differs from the bar-fixed K^γ K'^δ by v^{-(δ,γ)}
        let (gamma, delta) = split_cartan(n, &alpha);
        let mut pad_g = gamma.0.clone();
        pad_g.extend(std::iter::repeat(0).take(n));
        let mut pad_d = delta.0.clone();
        pad_d.extend(std::iter::repeat(0).take(n));
        let cross = dbl.satake.bilinear(&WeightVector(pad_g), &WeightVector(pad_d));
        let mut factors: Vec<BorelElement> = w
            .letters()
            .rev()
            .map(|l| BorelElement::generator(dbl.rank(), l))
            .collect();
        factors.push(BorelElement::cartan(alpha.clone()));
        let val = dbl.star_many(&factors)?;
        out = out.add(&val.scale(&(&c.bar() * &Scalar::v(2 * cross))));
    }
    tu_from_borel(dbl, &out)
}

/// Divided E power as a plus monomial of the double.
fn e_divided(rank: usize, i: usize, m: usize, d: i64) -> TUElement {
    TUElement::monomial(
        WeightVector::zero(rank),
        Word::power(i, m),
        WeightVector::zero(rank),
        Word::empty(),
        qfact(m as i64, d).recip(),
    )
}

/// Divided F power as a minus monomial of the double.
fn f_divided(rank: usize, i: usize, m: usize, d: i64) -> TUElement {
    TUElement::monomial(
        WeightVector::zero(rank),
        Word::empty(),
        WeightVector::zero(rank),
        Word::power(i, m),
        qfact(m as i64, d).recip(),
    )
}

/// Image of one E or F generator under a prime operator.
fn prime_letter_image(dbl: &Ctx, n: usize, i: usize, e: i64, letter: usize) -> Result<TUElement> {
    let d = dbl.satake.sym[i];
    let vi = Scalar::u(2 * d);
    let minus_i = WeightVector::simple(n, i).neg();
    let (j, on_e_side) = if letter < n { (letter, true) } else { (letter - n, false) };
    if j == i {
        return match (on_e_side, e) {
            (true, 1) => Ok(tu_star(
                dbl,
                &TUElement::kp_cartan(minus_i),
                &TUElement::f_gen(n, i),
            )?
            .scale(&vi)),
            (true, _) => Ok(tu_star(
                dbl,
                &TUElement::k_cartan(minus_i),
                &TUElement::f_gen(n, i),
            )?
            .scale(&vi.recip())),
            (false, 1) => Ok(tu_star(
                dbl,
                &TUElement::e_gen(n, i),
                &TUElement::k_cartan(minus_i),
            )?
            .scale(&vi.recip())),
            (false, _) => Ok(tu_star(
                dbl,
                &TUElement::e_gen(n, i),
                &TUElement::kp_cartan(minus_i),
            )?
            .scale(&vi)),
        };
    }
    let c = dbl.satake.cartan[i][j];
    let m = (-c) as usize;
    let vf_pow = spow(&dbl.v_factor(i), c);
    let mut out = TUElement::zero();
    for r in 0..=m {
        let s = m - r;
        let mut coeff = &Scalar::u(-e * d * (2 * r as i64 + c)) * &vf_pow;
        if r % 2 == 1 {
            coeff = -&coeff;
        }
        let (left, mid, right) = if on_e_side {
            (e_divided(n, i, s, d), TUElement::e_gen(n, j), e_divided(n, i, r, d))
        } else {
            (f_divided(n, i, s, d), TUElement::f_gen(n, j), f_divided(n, i, r, d))
        };
        let term = tu_star(dbl, &tu_star(dbl, &left, &mid)?, &right)?;
        out = out.add(&term.scale(&coeff));
    }
    Ok(out)
}

/// Apply one Lusztig operator to an element of the double.  The element is
/// rewritten into star-monomial symbols; the Cartan head moves by the simple
/// reflection on both legs and each letter is replaced by its generator image.
pub fn lusztig_T(dbl: &Ctx, op: BraidOperator, x: &TUElement) -> Result<TUElement> {
    let n = require_double(dbl)?;
    if op.i >= n {
        return Err(EngineError::Unsupported(format!(
            "operator node {} outside the base diagram of rank {}",
            op.i + 1,
            n
        )));
    }
    if op.e != 1 && op.e != -1 {
        return Err(EngineError::Unsupported("operator sign must be +1 or -1".into()));
    }
    if let BraidFlavor::DoublePrime = op.flavor {
        let inner = BraidOperator::prime(op.i, -op.e);
        return tu_sigma(dbl, &lusztig_T(dbl, inner, &tu_sigma(dbl, x)?)?);
    }
    let refl = [op.i, op.i + n];
    let symbols = dbl.express_star(&tu_to_borel(dbl, x)?)?;
    let mut cache: BTreeMap<usize, TUElement> = BTreeMap::new();
    let mut out = TUElement::zero();
    for (c, alpha, w) in symbols {
        let moved = dbl.satake.apply_word(&refl, &alpha);
        let (gamma, delta) = split_cartan(n, &moved);
        let mut acc = TUElement::monomial(gamma, Word::empty(), delta, Word::empty(), Scalar::one());
        for l in w.letters() {
            if !cache.contains_key(&l) {
                cache.insert(l, prime_letter_image(dbl, n, op.i, op.e, l)?);
            }
            acc = tu_star(dbl, &acc, &cache[&l])?;
        }
        out = out.add(&acc.scale(&c));
    }
    Ok(out)
}

/// T_w along a reduced word, rightmost letter applied first.
pub fn lusztig_T_word(dbl: &Ctx, word: &[usize], x: &TUElement) -> Result<TUElement> {
    let mut acc = x.clone();
    for &l in word.iter().rev() {
        acc = lusztig_T(dbl, BraidOperator::forward(l), &acc)?;
    }
    Ok(acc)
}

/// The inverse of `lusztig_T_word` over the same word.
pub fn lusztig_T_word_inv(dbl: &Ctx, word: &[usize], x: &TUElement) -> Result<TUElement> {
    let mut acc = x.clone();
    for &l in word.iter() {
        acc = lusztig_T(dbl, BraidOperator::inverse(l), &acc)?;
    }
    Ok(acc)
}

/// Root vectors of a reduced word: position k carries the inverse operators of
/// the prefix applied to the generator at k.  Errors if the word is not
/// reduced, and pins the convention that every image stays in the plus part
/// with the weight of the corresponding root.
pub fn root_vectors(base: &Ctx, dbl: &Ctx, word: &[usize]) -> Result<Vec<FElement>> {
    let rank = base.rank();
    let roots = positive_root_sequence(&base.satake, word)?;
    let mut out = Vec::with_capacity(word.len());
    for (k, &ik) in word.iter().enumerate() {
        let mut acc = TUElement::e_gen(rank, ik);
        for &l in word[..k].iter().rev() {
            acc = lusztig_T(dbl, BraidOperator::inverse(l), &acc)?;
        }
        let vec = tu_as_plus(&acc).map_err(|_| {
            EngineError::ConventionPin(format!(
                "root vector {} of the word left the plus part",
                k + 1
            ))
        })?;
        let weight_bug = EngineError::ConventionPin(format!(
            "root vector {} does not have the weight of its root",
            k + 1
        ));
        match vec.homogeneous_weight(&base.satake) {
            Ok(mu) if mu == roots[k] => {}
            _ => return Err(weight_bug),
        }
        out.push(vec);
    }
    Ok(out)
}

/// Dual PBW monomial for a reduced word and an exponent vector: the ordered
/// product of root-vector powers, rescaled by u to the pairwise root-form sum.
pub fn dual_pbw(base: &Ctx, dbl: &Ctx, word: &[usize], a: &[u32]) -> Result<FElement> {
    if a.len() != word.len() {
        return Err(EngineError::Parse(format!(
            "exponent vector length {} does not match word length {}",
            a.len(),
            word.len()
        )));
    }
    let roots = positive_root_sequence(&base.satake, word)?;
    let vecs = root_vectors(base, dbl, word)?;
    let mut pairwise = 0i64;
    for k in 0..word.len() {
        for l in (k + 1)..word.len() {
            pairwise += base.satake.bilinear(&roots[k], &roots[l]) * a[k] as i64 * a[l] as i64;
        }
    }
    let mut factors = Vec::new();
    for (k, &ak) in a.iter().enumerate() {
        for _ in 0..ak {
            factors.push(vecs[k].clone());
        }
    }
    Ok(base.fmul_many(&factors)?.scale(&Scalar::u(pairwise)))
}

/// m-fold divided adjoint action of one generator.
pub fn ad_theta_divided(base: &Ctx, i: usize, m: u32, x: &FElement) -> Result<FElement> {
    let mut acc = x.clone();
    for _ in 0..m {
        acc = base.ad_theta(i, &acc)?;
    }
    Ok(acc.scale(&qfact(m as i64, base.satake.sym[i]).recip()))
}

/// Rank-one root vector attached to an orbit node i and a node j outside the
/// orbit.  The index tuple has length one, two, or three according to the
/// orbit being fixed, disconnected, or adjacent; negative indices give zero.
/// The primed family is the plain divided adjoint image; the unprimed family
/// is its σ reversal.
pub fn rank1_root_vector(
    base: &Ctx,
    i: usize,
    j: usize,
    indices: &[i64],
    primed: bool,
) -> Result<FElement> {
    let ti = base.satake.tau[i];
    if j == i || j == ti {
        return Err(EngineError::Unsupported(
            "rank-one root vectors need a node outside the orbit".into(),
        ));
    }
    let expected = match base.satake.cartan[i][ti] {
        2 => 1,
        0 => 2,
        -1 => 3,
        c => {
            return Err(EngineError::BadInvolution(format!(
                "orbit {{{},{}}} has pairing {}, not in {{2,0,-1}}",
                i + 1,
                ti + 1,
                c
            )))
        }
    };
    if indices.len() != expected {
        return Err(EngineError::Parse(format!(
            "orbit of node {} takes {} indices, got {}",
            i + 1,
            expected,
            indices.len()
        )));
    }
    if indices.iter().any(|&m| m < 0) {
        return Ok(FElement::zero());
    }
    let total: i64 = indices.iter().sum();
    let d = base.satake.sym[i];
    // the applied word, innermost divided power last
    let stations: Vec<(usize, u32)> = match expected {
        1 => vec![(i, indices[0] as u32)],
        2 => vec![(i, indices[0] as u32), (ti, indices[1] as u32)],
        _ => vec![(i, indices[0] as u32), (ti, indices[1] as u32), (i, indices[2] as u32)],
    };
    let mut acc = FElement::generator(j);
    for &(node, m) in stations.iter().rev() {
        acc = ad_theta_divided(base, node, m, &acc)?;
    }
    let scale = &Scalar::u(d * total) * &spow(&base.v_factor(i), -total);
    let val = acc.scale(&scale);
    if primed {
        Ok(val)
    } else {
        base.f_sigma(&val)
    }
}

/// T over the restricted reflection word of an orbit, on an embedded f element.
fn orbit_braid(base: &Ctx, dbl: &Ctx, i: usize, x: &FElement, inverse: bool) -> Result<TUElement> {
    let word = restricted_reflection(&base.satake, i)?;
    let emb = f_plus(base.rank(), x);
    if inverse {
        lusztig_T_word_inv(dbl, &word, &emb)
    } else {
        lusztig_T_word(dbl, &word, &emb)
    }
}

/// T_{r_i}(x⁺) pulled back to f; errors if the image leaves the plus part.
pub fn orbit_braid_positive(base: &Ctx, dbl: &Ctx, i: usize, x: &FElement) -> Result<FElement> {
    tu_as_plus(&orbit_braid(base, dbl, i, x, false)?)
}

/// T_{r_i}⁻¹(x⁺) pulled back to f; errors if the image leaves the plus part.
pub fn orbit_braid_inv_positive(base: &Ctx, dbl: &Ctx, i: usize, x: &FElement) -> Result<FElement> {
    tu_as_plus(&orbit_braid(base, dbl, i, x, true)?)
}

/// Does T_{r_i} keep the embedded element inside the plus part?
pub fn stays_positive_under_orbit_braid(
    base: &Ctx,
    dbl: &Ctx,
    i: usize,
    x: &FElement,
) -> Result<bool> {
    Ok(tu_as_plus(&orbit_braid(base, dbl, i, x, false)?).is_ok())
}

/// Does T_{r_i}⁻¹ keep the embedded element inside the plus part?
pub fn stays_positive_under_orbit_braid_inv(
    base: &Ctx,
    dbl: &Ctx,
    i: usize,
    x: &FElement,
) -> Result<bool> {
    Ok(tu_as_plus(&orbit_braid(base, dbl, i, x, true)?).is_ok())
}

/// Diagonal parameter twist of the double: K_i, K'_i, E_i scale by the square
/// root of a_i, F_i is fixed.  Errors unless every needed square root exists
/// exactly in the coefficient field.
pub fn twist_psi(dbl: &Ctx, a: &[Scalar], x: &TUElement) -> Result<TUElement> {
    let n = require_double(dbl)?;
    if a.len() != n {
        return Err(EngineError::Parse(format!(
            "twist takes {} parameters, got {}",
            n,
            a.len()
        )));
    }
    let mut out = TUElement::zero();
    for (m, c) in &x.terms {
        let s = s_vector(n, m);
        let mut factor = Scalar::one();
        for j in 0..n {
            let sj = s.0[j];
            let half = sj.div_euclid(2);
            factor = &factor * &spow(&a[j], half);
            if sj.rem_euclid(2) == 1 {
                factor = &factor * &scalar_sqrt(&a[j])?;
            }
        }
        out.add_term(m.clone(), c * &factor);
    }
    Ok(out)
}

/// The distinguished diagonal parameter: node i carries u^{-(α_i, α_{τi})}
/// over the base involution.
pub fn distinguished_parameter(base: &SatakeDiagram) -> Vec<Scalar> {
    (0..base.rank())
        .map(|i| {
            let ai = WeightVector::simple(base.rank(), i);
            let ati = WeightVector::simple(base.rank(), base.tau[i]);
            Scalar::u(-base.bilinear(&ai, &ati))
        })
        .collect()
}

/// An element of the double extended by a formal half power of u: the value
/// is `even + u^{1/2} odd`.  Twisted operators live here because the
/// conjugating twist takes fourth roots of v that only sometimes cancel.
#[derive(Clone, Debug)]
pub struct HalfElement {
    pub even: TUElement,
    pub odd: TUElement,
}

impl HalfElement {
    pub fn from_integral(x: &TUElement) -> Self {
        HalfElement { even: x.clone(), odd: TUElement::zero() }
    }

    /// The integral part, provided the half part vanished.
    pub fn into_integral(self) -> Result<TUElement> {
        if !self.odd.is_zero() {
            return Err(EngineError::ConventionPin(
                "twisted operator image kept a half-integral power of u".into(),
            ));
        }
        Ok(self.even)
    }
}

fn twist_g_profile(base: &Ctx, n: usize) -> Vec<i64> {
    (0..n)
        .map(|j| {
            let aj = WeightVector::simple(n, j);
            let atj = WeightVector::simple(n, base.satake.tau[j]);
            base.satake.bilinear(&aj, &atj)
        })
        .collect()
}

/// One twisted Lusztig operator on a half-tracked element: conjugation by the
/// distinguished-parameter twist, with the net power of u computed per
/// monomial pair and the leftover half unit carried in the odd part.
pub fn script_T_half(
    base: &Ctx,
    dbl: &Ctx,
    op: BraidOperator,
    x: &HalfElement,
) -> Result<HalfElement> {
    let n = require_double(dbl)?;
    if base.rank() != n {
        return Err(EngineError::Unsupported(
            "twisted operator needs the base of the doubled context".into(),
        ));
    }
    let g = twist_g_profile(base, n);
    let mut out = HalfElement { even: TUElement::zero(), odd: TUElement::zero() };
    for (parity, part) in [(0i64, &x.even), (1i64, &x.odd)] {
        for (m, c) in &part.terms {
            let s_in = s_vector(n, m);
            let single = TUElement { terms: [(m.clone(), Scalar::one())].into_iter().collect() };
            let img = lusztig_T(dbl, op, &single)?;
            for (m2, c2) in &img.terms {
                let s_out = s_vector(n, m2);
                let mut h = parity;
                for j in 0..n {
                    h += g[j] * (s_out.0[j] - s_in.0[j]);
                }
                if h.rem_euclid(2) == 0 {
                    out.even.add_term(m2.clone(), &(c * c2) * &Scalar::u(h / 2));
                } else {
                    out.odd.add_term(m2.clone(), &(c * c2) * &Scalar::u((h - 1) / 2));
                }
            }
        }
    }
    Ok(out)
}

/// One twisted operator on an integral element, requiring an integral image.
pub fn script_T(base: &Ctx, dbl: &Ctx, op: BraidOperator, x: &TUElement) -> Result<TUElement> {
    script_T_half(base, dbl, op, &HalfElement::from_integral(x))?.into_integral()
}

/// Twisted T_w on a half-tracked element, rightmost letter first.
pub fn script_T_word_half(
    base: &Ctx,
    dbl: &Ctx,
    word: &[usize],
    x: &HalfElement,
) -> Result<HalfElement> {
    let mut acc = x.clone();
    for &l in word.iter().rev() {
        acc = script_T_half(base, dbl, BraidOperator::forward(l), &acc)?;
    }
    Ok(acc)
}

/// Inverse twisted chain on a half-tracked element, over the same word.
pub fn script_T_word_inv_half(
    base: &Ctx,
    dbl: &Ctx,
    word: &[usize],
    x: &HalfElement,
) -> Result<HalfElement> {
    let mut acc = x.clone();
    for &l in word.iter() {
        acc = script_T_half(base, dbl, BraidOperator::inverse(l), &acc)?;
    }
    Ok(acc)
}

/// Twisted T_w on an integral element; half powers must cancel by the end of
/// the chain, not at each step.
pub fn script_T_word(base: &Ctx, dbl: &Ctx, word: &[usize], x: &TUElement) -> Result<TUElement> {
    script_T_word_half(base, dbl, word, &HalfElement::from_integral(x))?.into_integral()
}

/// Inverse of `script_T_word` over the same word.
pub fn script_T_word_inv(
    base: &Ctx,
    dbl: &Ctx,
    word: &[usize],
    x: &TUElement,
) -> Result<TUElement> {
    script_T_word_inv_half(base, dbl, word, &HalfElement::from_integral(x))?.into_integral()
}

/// Height-bounded rank-one quasi K-matrix at an orbit: the weight components
/// of the unique plus-part series that intertwines the orbit's coideal
/// generators with their σ twists.  Components live on weights supported on
/// the orbit; the solver checks that every component off the τ-fixed cone
/// vanishes identically.
#[derive(Clone, Debug)]
pub struct QuasiKMatrix {
    pub i: usize,
    pub bound: i64,
    pub components: BTreeMap<WeightVector, FElement>,
}

/// The orbit coideal generator F_j + E_{τj} K'_j of the double, for the base
/// involution τ.
pub fn coideal_generator(base: &Ctx, dbl: &Ctx, j: usize) -> Result<TUElement> {
    let n = require_double(dbl)?;
    let tj = base.satake.tau[j];
    let cross = tu_star(
        dbl,
        &TUElement::e_gen(n, tj),
        &TUElement::kp_cartan(WeightVector::simple(n, j)),
    )?;
    Ok(TUElement::f_gen(n, j).add(&cross))
}

/// Its σ image F_j + K_j E_{τj}.
pub fn coideal_generator_sigma(base: &Ctx, dbl: &Ctx, j: usize) -> Result<TUElement> {
    let n = require_double(dbl)?;
    let tj = base.satake.tau[j];
    let cross = tu_star(
        dbl,
        &TUElement::k_cartan(WeightVector::simple(n, j)),
        &TUElement::e_gen(n, tj),
    )?;
    Ok(TUElement::f_gen(n, j).add(&cross))
}

fn tu_rows(elements: &[TUElement]) -> (Vec<TUMono>, Vec<Vec<Scalar>>) {
    let mut keys: Vec<TUMono> = Vec::new();
    for el in elements {
        for m in el.terms.keys() {
            if !keys.contains(m) {
                keys.push(m.clone());
            }
        }
    }
    keys.sort();
    let cols = elements
        .iter()
        .map(|el| {
            keys.iter()
                .map(|m| el.terms.get(m).cloned().unwrap_or_else(Scalar::zero))
                .collect()
        })
        .collect();
    (keys, cols)
}

/// Solve the orbit intertwining equations weight by weight up to the height
/// bound.  Heights beyond the bound are simply not computed; everything
/// retained is exact.
pub fn quasi_k_matrix(base: &Ctx, dbl: &Ctx, i: usize, max_ht: i64) -> Result<QuasiKMatrix> {
    let n = base.rank();
    let ti = base.satake.tau[i];
    let js: Vec<usize> = if ti == i { vec![i] } else { vec![i, ti] };
    let step = WeightVector::simple(n, i).add(&WeightVector::simple(n, ti));
    let mut components: BTreeMap<WeightVector, FElement> = BTreeMap::new();
    components.insert(WeightVector::zero(n), FElement::one());
    let weights_of_height = |h: i64| -> Vec<WeightVector> {
        if ti == i {
            vec![WeightVector::simple(n, i).scaled(h)]
        } else {
            (0..=h)
                .map(|m| {
                    WeightVector::simple(n, i)
                        .scaled(m)
                        .add(&WeightVector::simple(n, ti).scaled(h - m))
                })
                .collect()
        }
    };
    for h in 1..=max_ht {
        for nu in weights_of_height(h) {
            let basis = base.weight_basis(&nu)?;
            let words: Vec<Word> = basis.basis.clone();
            if words.is_empty() {
                continue;
            }
            let prev_key = nu.sub(&step);
            let prev = if prev_key.is_nonneg() {
                components.get(&prev_key).cloned().unwrap_or_else(FElement::zero)
            } else {
                FElement::zero()
            };
            let prev_tu = f_plus(n, &prev);
            // Stack, for each orbit node j, the equations matching the
            // commutator [F_j, Σ c_w w⁺] against the component two steps down.
            let mut a_rows: Vec<Vec<Scalar>> = Vec::new();
            let mut b_rows: Vec<Vec<Scalar>> = Vec::new();
            for &j in &js {
                let fj = TUElement::f_gen(n, j);
                let tj = base.satake.tau[j];
                let ke = tu_star(
                    dbl,
                    &TUElement::k_cartan(WeightVector::simple(n, j)),
                    &TUElement::e_gen(n, tj),
                )?;
                let ek = tu_star(
                    dbl,
                    &TUElement::e_gen(n, tj),
                    &TUElement::kp_cartan(WeightVector::simple(n, j)),
                )?;
                let mut block = Vec::with_capacity(1 + words.len());
                block.push(tu_star(dbl, &prev_tu, &ke)?.sub(&tu_star(dbl, &ek, &prev_tu)?));
                for w in &words {
                    let wp = f_plus(n, &FElement::from_word(w.clone()));
                    block.push(tu_star(dbl, &fj, &wp)?.sub(&tu_star(dbl, &wp, &fj)?));
                }
                let (keys, cols) = tu_rows(&block);
                for ki in 0..keys.len() {
                    a_rows.push(cols.iter().skip(1).map(|c| c[ki].clone()).collect());
                    b_rows.push(vec![cols[0][ki].clone()]);
                }
            }
            let solution = solve_unique(&a_rows, &b_rows)?;
            let mut comp = FElement::zero();
            for (k, w) in words.iter().enumerate() {
                comp.add_term(w.clone(), solution[k][0].clone());
            }
            if base.satake.tau_weight(&nu) != nu && !comp.is_zero() {
                return Err(EngineError::ConventionPin(
                    "quasi K-matrix has support off the involution-fixed cone".into(),
                ));
            }
            if !comp.is_zero() {
                components.insert(nu, comp);
            }
        }
    }
    Ok(QuasiKMatrix { i, bound: max_ht, components })
}

/// The retained part of the quasi K-matrix as a plus element of the double.
pub fn quasi_k_as_tu(rank: usize, k: &QuasiKMatrix) -> TUElement {
    let mut out = TUElement::zero();
    for comp in k.components.values() {
        out = out.add(&f_plus(rank, comp));
    }
    out
}

/// The intertwining defect at an orbit node, restricted to the E-lengths the
/// bound fully determines.  Zero exactly when the retained components satisfy
/// the defining relation.
pub fn quasi_k_intertwining_defect(
    base: &Ctx,
    dbl: &Ctx,
    k: &QuasiKMatrix,
    j: usize,
) -> Result<TUElement> {
    let n = base.rank();
    let upsilon = quasi_k_as_tu(n, k);
    let b = coideal_generator(base, dbl, j)?;
    let bs = coideal_generator_sigma(base, dbl, j)?;
    let full = tu_star(dbl, &b, &upsilon)?.sub(&tu_star(dbl, &upsilon, &bs)?);
    let mut out = TUElement::zero();
    for (m, c) in &full.terms {
        if (m.1.len() as i64) < k.bound {
            out.add_term(m.clone(), c.clone());
        }
    }
    Ok(out)
}

/// Apply a Cartan-preserving node permutation to every letter of an f element.
pub fn f_letter_perm(base: &Ctx, perm: &[usize], x: &FElement) -> Result<FElement> {
    let mut out = FElement::zero();
    for (w, c) in &x.terms {
        let pw = Word(w.letters().map(|l| perm[l] as u8).collect());
        let nf = base.normal_form_word(&pw)?;
        for (bw, bc) in &nf.terms {
            out.add_term(bw.clone(), bc * c);
        }
    }
    Ok(out)
}

/// One relative braid operator on the star algebra.  Direction +1 is the
/// generator-defined operator; −1 conjugates it by σ^ı.  Needs the
/// invertible-Cartan carrier because images involve 𝕂⁻¹ dressings and
/// reflected Cartan monomials.
pub fn rel_braid_T(
    base: &Ctx,
    dbl: &Ctx,
    i: usize,
    direction: i64,
    x: &BorelElement,
) -> Result<BorelElement> {
    if !base.invertible_cartan {
        return Err(EngineError::NeedsInvertibleCartan);
    }
    if direction != 1 && direction != -1 {
        return Err(EngineError::Unsupported("relative braid direction must be ±1".into()));
    }
    if direction == -1 {
        let inner = rel_braid_T(base, dbl, i, 1, &base.isigma(x)?)?;
        return base.isigma(&inner);
    }
    let rank = base.rank();
    let ti = base.satake.tau[i];
    let ri = restricted_reflection(&base.satake, i)?;
    let taui = tau_i_involution(&base.satake, i)?;
    let ai = WeightVector::simple(rank, i);
    let ati = WeightVector::simple(rank, ti);
    let orbit_scale = Scalar::u(base.satake.bilinear(&ai.sub(&ati), &ai));
    let mut images: BTreeMap<usize, BorelElement> = BTreeMap::new();
    for l in 0..rank {
        let img = if l == i || l == ti {
            let head = base.kappa_inv(&WeightVector::simple(rank, taui[l]))?;
            let tail = BorelElement::generator(rank, taui[base.satake.tau[l]]);
            base.star(&head, &tail)?.scale(&orbit_scale)
        } else {
            let emb = f_plus(rank, &FElement::generator(l));
            let moved = lusztig_T_word(dbl, &ri, &emb)?;
            let pulled = tu_as_plus(&moved).map_err(|_| {
                EngineError::ConventionPin(
                    "off-orbit generator image left the plus part".into(),
                )
            })?;
            BorelElement::from_f(rank, &pulled)
        };
        images.insert(l, img);
    }
    let symbols = base.express_star(x)?;
    let mut out = BorelElement::zero();
    for (c, alpha, w) in symbols {
        let mut acc = BorelElement::cartan(base.satake.apply_word(&ri, &alpha));
        for l in w.letters() {
            acc = base.star(&acc, &images[&l])?;
        }
        out = out.add(&acc.scale(&c));
    }
    Ok(out)
}

/// Relative braid composite over a sequence of orbit representatives,
/// rightmost first; direction −1 applies the inverse composite.
pub fn rel_braid_word(
    base: &Ctx,
    dbl: &Ctx,
    reps: &[usize],
    direction: i64,
    x: &BorelElement,
) -> Result<BorelElement> {
    let mut acc = x.clone();
    if direction == 1 {
        for &r in reps.iter().rev() {
            acc = rel_braid_T(base, dbl, r, 1, &acc)?;
        }
    } else {
        for &r in reps.iter() {
            acc = rel_braid_T(base, dbl, r, -1, &acc)?;
        }
    }
    Ok(acc)
}

/// The four relative flavors: primes at e = ±1 and double primes at e = ∓1,
/// related through ψ^ı conjugation exactly as the Lusztig flavors are related
/// through σ.
pub fn rel_braid_flavor(
    base: &Ctx,
    dbl: &Ctx,
    op: BraidOperator,
    x: &BorelElement,
) -> Result<BorelElement> {
    match (op.flavor, op.e) {
        (BraidFlavor::Prime, 1) => rel_braid_T(base, dbl, op.i, 1, x),
        (BraidFlavor::DoublePrime, -1) => rel_braid_T(base, dbl, op.i, -1, x),
        (BraidFlavor::Prime, -1) => {
            let inner = rel_braid_T(base, dbl, op.i, 1, &base.ipsi(x)?)?;
            base.ipsi(&inner)
        }
        (BraidFlavor::DoublePrime, 1) => {
            let inner = rel_braid_T(base, dbl, op.i, -1, &base.ipsi(x)?)?;
            base.ipsi(&inner)
        }
        _ => Err(EngineError::Unsupported("operator sign must be +1 or -1".into())),
    }
}
