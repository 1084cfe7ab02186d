//! Exact arithmetic in the field Q(u), where u stands for the square root v^{1/2}
//! of the quantum parameter.
//!
//! Every coefficient in the engine lives here.  A value is a reduced fraction of
//! Laurent polynomials in u with rational coefficients.  Working in u (rather than v)
//! keeps all exponents integral: the weight-dependent prefactors v^{(α,β)/2} that the
//! star product and the dual PBW vectors carry become plain powers u^{(α,β)}.
//!
//! Normalization invariants, enforced eagerly on construction:
//! * numerator and denominator share no polynomial factor,
//! * the denominator is an honest polynomial (lowest exponent 0) with leading
//!   coefficient 1, so `0` and `1` and every value have a unique representation
//!   and `==` is structural equality.
//!
//! The bar involution is u ↦ u^{-1}.  Gaussian integers [n]_{v_i} and binomials are
//! taken at v_i = v^{d_i} = u^{2 d_i}.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Laurent polynomial in u over Q, sparse map from u-exponent to coefficient.
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct LaurentHalf {
    coeffs: BTreeMap<i64, BigRational>,
}

impl LaurentHalf {
    pub fn zero() -> Self {
        LaurentHalf { coeffs: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::monomial(BigRational::one(), 0)
    }

    pub fn monomial(coeff: BigRational, exp: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        if !coeff.is_zero() {
            coeffs.insert(exp, coeff);
        }
        LaurentHalf { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs.get(&0).map_or(false, |c| c.is_one())
    }

    /// Iterate (u-exponent, coefficient) pairs in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigRational)> {
        self.coeffs.iter().map(|(k, c)| (*k, c))
    }

    pub fn coeff(&self, exp: i64) -> BigRational {
        self.coeffs.get(&exp).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn min_exp(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    fn insert_add(&mut self, exp: i64, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        match self.coeffs.get_mut(&exp) {
            Some(c) => {
                *c += coeff;
                if c.is_zero() {
                    self.coeffs.remove(&exp);
                }
            }
            None => {
                self.coeffs.insert(exp, coeff);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in other.terms() {
            out.insert_add(k, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        LaurentHalf { coeffs: self.coeffs.iter().map(|(k, c)| (*k, -c.clone())).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = LaurentHalf::zero();
        for (k1, c1) in self.terms() {
            for (k2, c2) in other.terms() {
                out.insert_add(k1 + k2, c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        LaurentHalf { coeffs: self.coeffs.iter().map(|(k, c)| (*k, c * q)).collect() }
    }

    /// Multiply by u^shift.
    pub fn shifted(&self, shift: i64) -> Self {
        LaurentHalf { coeffs: self.coeffs.iter().map(|(k, c)| (*k + shift, c.clone())).collect() }
    }

    /// u ↦ u^{-1}.
    pub fn bar(&self) -> Self {
        LaurentHalf { coeffs: self.coeffs.iter().map(|(k, c)| (-*k, c.clone())).collect() }
    }

    /// Leading coefficient (at the highest exponent); zero polynomial gives 0.
    pub fn leading_coeff(&self) -> BigRational {
        self.max_exp().map(|k| self.coeff(k)).unwrap_or_else(BigRational::zero)
    }

    /// Polynomial division assuming `self` has min_exp >= 0 and likewise `div`;
    /// returns (quotient, remainder) with deg(remainder) < deg(div).
    fn poly_divmod(&self, div: &Self) -> (Self, Self) {
        assert!(!div.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quot = LaurentHalf::zero();
        let dlead = div.max_exp().unwrap();
        let dcoeff = div.leading_coeff();
        while let Some(rlead) = rem.max_exp() {
            if rlead < dlead {
                break;
            }
            let factor = rem.coeff(rlead) / &dcoeff;
            let shift = rlead - dlead;
            quot.insert_add(shift, factor.clone());
            let sub = div.scale(&factor).shifted(shift);
            rem = rem.sub(&sub);
        }
        (quot, rem)
    }

    /// Monic gcd of two honest polynomials (min_exp 0). Returns 1 if either is a unit.
    fn poly_gcd(&self, other: &Self) -> Self {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.poly_divmod(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            return LaurentHalf::zero();
        }
        let lead = a.leading_coeff();
        a.scale(&lead.recip())
    }
}

impl fmt::Debug for LaurentHalf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_laurent(self))
    }
}

fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        format!("{}", q.numer())
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn format_laurent(p: &LaurentHalf) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    // highest exponent first, matching the usual display v^2 + 1 + v^-2
    for (i, (k, c)) in p.coeffs.iter().rev().enumerate() {
        let neg = c.is_negative();
        let abs = c.abs();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else if neg {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        let coeff_part = if abs.is_one() && *k != 0 { None } else { Some(format_rational(&abs)) };
        let u_part = match *k {
            0 => None,
            1 => Some("u".to_string()),
            e => Some(format!("u^{}", e)),
        };
        match (coeff_part, u_part) {
            (Some(c), Some(u)) => {
                out.push_str(&c);
                out.push('*');
                out.push_str(&u);
            }
            (Some(c), None) => out.push_str(&c),
            (None, Some(u)) => out.push_str(&u),
            (None, None) => out.push('1'),
        }
    }
    out
}

/// Element of Q(u): reduced fraction of Laurent polynomials.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    num: LaurentHalf,
    den: LaurentHalf,
}

impl Scalar {
    fn normalized(num: LaurentHalf, den: LaurentHalf) -> Self {
        assert!(!den.is_zero(), "scalar with zero denominator");
        if num.is_zero() {
            return Scalar { num: LaurentHalf::zero(), den: LaurentHalf::one() };
        }
        // Work with honest polynomials: strip the u-power content of each side.
        let nshift = num.min_exp().unwrap();
        let dshift = den.min_exp().unwrap();
        let npoly = num.shifted(-nshift);
        let dpoly = den.shifted(-dshift);
        let g = npoly.poly_gcd(&dpoly);
        let (mut n, r) = npoly.poly_divmod(&g);
        debug_assert!(r.is_zero());
        let (mut d, r) = dpoly.poly_divmod(&g);
        debug_assert!(r.is_zero());
        // Net u-power goes to the numerator; denominator stays an honest polynomial
        // with leading coefficient 1.
        n = n.shifted(nshift - dshift);
        let lead = d.leading_coeff();
        n = n.scale(&lead.recip());
        d = d.scale(&lead.recip());
        Scalar { num: n, den: d }
    }

    pub fn zero() -> Self {
        Scalar { num: LaurentHalf::zero(), den: LaurentHalf::one() }
    }

    pub fn one() -> Self {
        Scalar { num: LaurentHalf::one(), den: LaurentHalf::one() }
    }

    pub fn from_int(n: i64) -> Self {
        Scalar {
            num: LaurentHalf::monomial(BigRational::from_integer(BigInt::from(n)), 0),
            den: LaurentHalf::one(),
        }
    }

    pub fn from_rational(q: BigRational) -> Self {
        Scalar { num: LaurentHalf::monomial(q, 0), den: LaurentHalf::one() }
    }

    /// u^k.
    pub fn u(k: i64) -> Self {
        Scalar { num: LaurentHalf::monomial(BigRational::one(), k), den: LaurentHalf::one() }
    }

    /// v^k = u^{2k}.
    pub fn v(k: i64) -> Self {
        Self::u(2 * k)
    }

    pub fn from_laurent(p: LaurentHalf) -> Self {
        Scalar { num: p, den: LaurentHalf::one() }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    /// The Laurent-polynomial part, if the denominator is 1.
    pub fn as_laurent(&self) -> Option<&LaurentHalf> {
        if self.den.is_one() { Some(&self.num) } else { None }
    }

    pub fn numer(&self) -> &LaurentHalf {
        &self.num
    }

    pub fn denom(&self) -> &LaurentHalf {
        &self.den
    }

    /// u ↦ u^{-1} on both numerator and denominator, then renormalize.
    pub fn bar(&self) -> Self {
        Scalar::normalized(self.num.bar(), self.den.bar())
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "inverting zero scalar");
        Scalar::normalized(self.den.clone(), self.num.clone())
    }

    /// True when the value is a single term q * u^k.
    pub fn monomial_parts(&self) -> Option<(BigRational, i64)> {
        let p = self.as_laurent()?;
        let mut it = p.terms();
        let (k, c) = it.next()?;
        if it.next().is_some() {
            return None;
        }
        Some((c.clone(), k))
    }

    /// True when all u-exponents are even and all coefficients integral,
    /// i.e. the value lies in Z[v, v^{-1}].
    pub fn is_integral_v_laurent(&self) -> bool {
        match self.as_laurent() {
            None => false,
            Some(p) => p.terms().all(|(k, c)| k % 2 == 0 && c.denom().is_one()),
        }
    }
}

pub fn scalar_bar(s: &Scalar) -> Scalar {
    s.bar()
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", format_laurent(&self.num))
        } else {
            write!(f, "( {} )/( {} )", format_laurent(&self.num), format_laurent(&self.den))
        }
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $impl_fn:expr) => {
        impl<'a, 'b> $trait<&'b Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'b Scalar) -> Scalar {
                let f: fn(&Scalar, &Scalar) -> Scalar = $impl_fn;
                f(self, rhs)
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                $trait::$method(&self, &rhs)
            }
        }
        impl<'b> $trait<&'b Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'b Scalar) -> Scalar {
                $trait::$method(&self, rhs)
            }
        }
        impl<'a> $trait<Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                $trait::$method(self, &rhs)
            }
        }
    };
}

scalar_binop!(Add, add, |a, b| {
    Scalar::normalized(
        a.num.mul(&b.den).add(&b.num.mul(&a.den)),
        a.den.mul(&b.den),
    )
});
scalar_binop!(Sub, sub, |a, b| {
    Scalar::normalized(
        a.num.mul(&b.den).sub(&b.num.mul(&a.den)),
        a.den.mul(&b.den),
    )
});
scalar_binop!(Mul, mul, |a, b| Scalar::normalized(a.num.mul(&b.num), a.den.mul(&b.den)));
scalar_binop!(Div, div, |a, b: &Scalar| {
    assert!(!b.is_zero(), "scalar division by zero");
    Scalar::normalized(a.num.mul(&b.den), a.den.mul(&b.num))
});

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar { num: self.num.neg(), den: self.den.clone() }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        *self = &*self * rhs;
    }
}

impl AddAssign<Scalar> for Scalar {
    fn add_assign(&mut self, rhs: Scalar) {
        *self = &*self + &rhs;
    }
}

impl SubAssign<Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: Scalar) {
        *self = &*self - &rhs;
    }
}

impl MulAssign<Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: Scalar) {
        *self = &*self * &rhs;
    }
}

/// Gaussian integer [n]_{v_i} = (v_i^n - v_i^{-n})/(v_i - v_i^{-1}) at v_i = u^{2d},
/// expanded directly as v_i^{n-1} + v_i^{n-3} + ... + v_i^{1-n}.
pub fn qint(n: i64, d: i64) -> Scalar {
    if n == 0 {
        return Scalar::zero();
    }
    if n < 0 {
        return -qint(-n, d);
    }
    let mut p = LaurentHalf::zero();
    let mut e = n - 1;
    while e >= 1 - n {
        p.insert_add(2 * d * e, BigRational::one());
        e -= 2;
    }
    Scalar::from_laurent(p)
}

/// [n]_{v_i}! = [n][n-1]...[1].
pub fn qfact(n: i64, d: i64) -> Scalar {
    assert!(n >= 0, "factorial of negative integer");
    let mut out = Scalar::one();
    for j in 1..=n {
        out = out * qint(j, d);
    }
    out
}

/// Gaussian binomial [n; k]_{v_i} for n ∈ Z, k >= 0, as the product
/// Π_{j=1}^{k} [n-j+1]/[j].  Always a bar-invariant Laurent polynomial.
pub fn qbinom(n: i64, k: i64, d: i64) -> Scalar {
    assert!(k >= 0, "qbinom with negative lower index");
    let mut out = Scalar::one();
    for j in 1..=k {
        out = out * qint(n - j + 1, d) / qint(j, d);
    }
    debug_assert!(out.as_laurent().is_some(), "qbinom must be Laurent");
    out
}
