//! Exact arithmetic in the Galois field GF(p^m).
//!
//! Elements are identified with the integers `0..d` through their digit
//! expansion `g = Σ g_n p^n`, where `(g_0, …, g_{m-1})` are the coefficients
//! of the polynomial representative modulo the field's reduction polynomial.
//! Addition is therefore digit-wise addition mod `p` (plain XOR when `p = 2`),
//! and multiplication is polynomial multiplication followed by reduction.
//!
//! The reduction polynomial is the lexicographically smallest monic
//! irreducible polynomial of degree `m` over GF(p), comparing coefficients
//! from the constant term upwards. Any other choice yields an isomorphic
//! field; only the labelling of elements changes.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Largest supported field order.
pub const MAX_ORDER: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("bad degree {0}: the extension degree must be at least 1")]
    BadDegree(u32),
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("field order {0} exceeds the supported maximum of {MAX_ORDER}")]
    TooLarge(u64),
    #[error("label {value} is out of range for a field of order {order}")]
    OutOfRange { value: u64, order: u32 },
    #[error("zero divisor")]
    ZeroDivisor,
}

/// A field element, stored as its integer label `Σ g_n p^n`.
///
/// Labels are only range-checked when produced by [`FieldSpec::element`];
/// mixing elements from fields of different orders panics on use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct GfElement(u32);

impl GfElement {
    pub const ZERO: GfElement = GfElement(0);
    pub const ONE: GfElement = GfElement(1);

    #[inline]
    pub const fn value(self) -> u32 {
        self.0
    }

    #[inline]
    pub(crate) const fn from_label(value: u32) -> Self {
        GfElement(value)
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for GfElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<GfElement> for usize {
    fn from(g: GfElement) -> usize {
        g.0 as usize
    }
}

/// The field GF(p^m) together with precomputed operation tables.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldSpec {
    p: u32,
    m: u32,
    d: u32,
    reduction_poly: Vec<u32>,
    add: Vec<u16>,
    mul: Vec<u16>,
    neg: Vec<u16>,
    inv: Vec<u16>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("p", &self.p)
            .field("m", &self.m)
            .field("d", &self.d)
            .field("reduction_poly", &self.reduction_poly)
            .finish()
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= n {
        if n.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

/// Splits `d` into `(p, m)` with `d = p^m`, `p` prime.
pub fn factor_prime_power(d: u64) -> Result<(u32, u32), FieldError> {
    if d < 2 {
        return Err(FieldError::NotPrimePower(d));
    }
    let p = (2..=d).find(|i| d.is_multiple_of(*i)).unwrap();
    let mut rest = d;
    let mut m = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        m += 1;
    }
    if rest != 1 {
        return Err(FieldError::NotPrimePower(d));
    }
    Ok((p as u32, m))
}

impl FieldSpec {
    /// Builds GF(p^m).
    pub fn new(p: u32, m: u32) -> Result<Self, FieldError> {
        if !is_prime(p as u64) {
            return Err(FieldError::NotPrime(p as u64));
        }
        if m < 1 {
            return Err(FieldError::BadDegree(m));
        }
        let order = (p as u64).checked_pow(m).unwrap_or(u64::MAX);
        if order > MAX_ORDER as u64 {
            return Err(FieldError::TooLarge(order));
        }
        let d = order as u32;
        let reduction_poly = if m == 1 {
            Vec::new()
        } else {
            smallest_irreducible(p, m)
        };

        let mut field = FieldSpec {
            p,
            m,
            d,
            reduction_poly,
            add: Vec::new(),
            mul: Vec::new(),
            neg: Vec::new(),
            inv: Vec::new(),
        };
        field.build_tables();
        Ok(field)
    }

    /// Builds the field of order `d`, rejecting anything that is not a prime power.
    pub fn with_order(d: u64) -> Result<Self, FieldError> {
        let (p, m) = factor_prime_power(d)?;
        Self::new(p, m)
    }

    fn build_tables(&mut self) {
        let d = self.d as usize;
        self.add = vec![0; d * d];
        self.mul = vec![0; d * d];
        for a in 0..self.d {
            for b in 0..self.d {
                let idx = a as usize * d + b as usize;
                self.add[idx] = self.add_digits(a, b) as u16;
                self.mul[idx] = self.mul_polynomial(a, b) as u16;
            }
        }
        self.neg = (0..self.d)
            .map(|a| {
                (0..self.d)
                    .find(|&b| self.add[a as usize * d + b as usize] == 0)
                    .unwrap() as u16
            })
            .collect();
        self.inv = (0..self.d)
            .map(|a| {
                (0..self.d)
                    .find(|&b| self.mul[a as usize * d + b as usize] == 1)
                    .unwrap_or(0) as u16
            })
            .collect();
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Field order `d = p^m`.
    pub fn order(&self) -> u32 {
        self.d
    }

    /// Monic reduction polynomial, low-degree coefficient first. Empty for prime fields.
    pub fn reduction_poly(&self) -> &[u32] {
        &self.reduction_poly
    }

    pub fn element(&self, value: u64) -> Result<GfElement, FieldError> {
        if value >= self.d as u64 {
            return Err(FieldError::OutOfRange {
                value,
                order: self.d,
            });
        }
        Ok(GfElement(value as u32))
    }

    pub fn elements(&self) -> impl Iterator<Item = GfElement> + Clone {
        (0..self.d).map(GfElement)
    }

    /// The element `1 ⊕ 1 ⊕ … ⊕ 1` (`n` times), i.e. `n mod p` embedded in the prime subfield.
    pub fn from_integer(&self, n: u64) -> GfElement {
        GfElement((n % self.p as u64) as u32)
    }

    /// Digits `(g_0, …, g_{m-1})` of a label.
    pub fn digits(&self, g: GfElement) -> Vec<u32> {
        let mut v = g.0;
        (0..self.m)
            .map(|_| {
                let digit = v % self.p;
                v /= self.p;
                digit
            })
            .collect()
    }

    /// Digit `g_n`.
    pub fn digit(&self, g: GfElement, n: u32) -> u32 {
        (g.0 / self.p.pow(n)) % self.p
    }

    pub fn pack(&self, digits: &[u32]) -> Result<GfElement, FieldError> {
        let mut value = 0u64;
        for (n, &g) in digits.iter().enumerate().rev() {
            if g >= self.p || n as u32 >= self.m {
                return Err(FieldError::OutOfRange {
                    value: g as u64,
                    order: self.d,
                });
            }
            value = value * self.p as u64 + g as u64;
        }
        self.element(value)
    }

    /// `p^n` as a field element (the basis monomial `x^n`).
    pub fn monomial(&self, n: u32) -> GfElement {
        debug_assert!(n < self.m);
        GfElement(self.p.pow(n))
    }

    #[inline]
    fn idx(&self, a: GfElement, b: GfElement) -> usize {
        assert!(
            a.0 < self.d && b.0 < self.d,
            "element from a different field (order {})",
            self.d
        );
        a.0 as usize * self.d as usize + b.0 as usize
    }

    #[inline]
    pub fn add(&self, a: GfElement, b: GfElement) -> GfElement {
        GfElement(self.add[self.idx(a, b)] as u32)
    }

    #[inline]
    pub fn neg(&self, a: GfElement) -> GfElement {
        GfElement(self.neg[a.0 as usize] as u32)
    }

    #[inline]
    pub fn sub(&self, a: GfElement, b: GfElement) -> GfElement {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: GfElement, b: GfElement) -> GfElement {
        GfElement(self.mul[self.idx(a, b)] as u32)
    }

    pub fn mul3(&self, a: GfElement, b: GfElement, c: GfElement) -> GfElement {
        self.mul(self.mul(a, b), c)
    }

    pub fn inv(&self, a: GfElement) -> Result<GfElement, FieldError> {
        if a.is_zero() {
            return Err(FieldError::ZeroDivisor);
        }
        Ok(GfElement(self.inv[a.0 as usize] as u32))
    }

    pub fn div(&self, a: GfElement, b: GfElement) -> Result<GfElement, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `a ⊘ 2`, defined only in odd characteristic.
    pub fn half(&self, a: GfElement) -> Result<GfElement, FieldError> {
        self.div(a, self.add(GfElement::ONE, GfElement::ONE))
    }

    pub fn pow(&self, a: GfElement, mut e: u64) -> GfElement {
        let mut base = a;
        let mut acc = GfElement::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    fn add_digits(&self, a: u32, b: u32) -> u32 {
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.m {
            out += ((a % self.p + b % self.p) % self.p) * place;
            a /= self.p;
            b /= self.p;
            place *= self.p;
        }
        out
    }

    /// Reference multiplication: multiply digit polynomials and reduce.
    /// The operation tables are built from this path.
    pub fn mul_polynomial(&self, a: u32, b: u32) -> u32 {
        if self.m == 1 {
            return (a * b) % self.p;
        }
        let da = self.digits(GfElement(a));
        let db = self.digits(GfElement(b));
        let product = poly_mul(&da, &db, self.p);
        let reduced = poly_rem(&product, &self.reduction_poly, self.p);
        reduced
            .iter()
            .enumerate()
            .map(|(n, &c)| c * self.p.pow(n as u32))
            .sum()
    }
}

fn poly_mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let mut out = vec![0u32; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    out
}

/// Remainder of `a` modulo the monic polynomial `modulus` (both low-degree first).
fn poly_rem(a: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    let deg = modulus.len() - 1;
    let mut r = a.to_vec();
    if r.len() < deg {
        r.resize(deg, 0);
    }
    for top in (deg..r.len()).rev() {
        let c = r[top];
        if c == 0 {
            continue;
        }
        for (i, &mc) in modulus.iter().enumerate() {
            let pos = top - deg + i;
            r[pos] = (r[pos] + p - (c * mc) % p) % p;
        }
    }
    r.truncate(deg);
    r
}

/// Irreducibility by exhaustive trial division with every monic polynomial
/// of degree `1..=m/2`.
pub fn is_irreducible(poly: &[u32], p: u32) -> bool {
    let m = poly.len() - 1;
    for deg in 1..=m / 2 {
        for code in 0..(p as u64).pow(deg as u32) {
            let mut divisor: Vec<u32> = (0..deg)
                .map(|i| ((code / (p as u64).pow(i as u32)) % p as u64) as u32)
                .collect();
            divisor.push(1);
            if poly_rem(poly, &divisor, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

/// Lexicographically smallest monic irreducible polynomial of degree `m`,
/// comparing `(c_0, c_1, …, c_{m-1})` with `c_0` most significant.
pub fn smallest_irreducible(p: u32, m: u32) -> Vec<u32> {
    let count = (p as u64).pow(m);
    for code in 0..count {
        let mut poly: Vec<u32> = (0..m)
            .map(|j| ((code / (p as u64).pow(m - 1 - j)) % p as u64) as u32)
            .collect();
        poly.push(1);
        if is_irreducible(&poly, p) {
            return poly;
        }
    }
    unreachable!("an irreducible polynomial of every degree exists over GF({p})")
}
