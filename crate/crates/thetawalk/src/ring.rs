//! Coefficient rings.
//!
//! Two concrete rings are provided: [`Alg`], exact elements of a quadratic
//! extension `Q(i)(sqrt d)`, and [`Cf`], complex numbers with `rug::Float`
//! parts. Truncated series over either ring are themselves coefficient rings
//! (see `series`), which is how bivariate expansions are handled.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Rational64;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Default working precision in bits.
pub const DEFAULT_PREC: u32 = 256;

/// Bits of cancellation below which a float sum is treated as an exact zero.
const FLUSH_GUARD: u32 = 32;

pub trait Coeff: Clone + fmt::Debug + Send + Sync + 'static {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn from_rational_like(&self, r: &Rational) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul_rational(&self, r: &Rational) -> Self;
    fn try_inv(&self) -> Result<Self>;
    /// Principal square root, when representable in the ring.
    fn try_sqrt(&self) -> Result<Self>;
    /// `log2 |self|`, or `-inf` for zero.
    fn mag_log2(&self) -> f64;
    fn precision(&self) -> Option<u32>;
    fn is_exact(&self) -> bool {
        self.precision().is_none()
    }
    /// Whether two elements can be combined without promotion.
    fn compatible(&self, _o: &Self) -> bool {
        true
    }
    fn to_json(&self) -> serde_json::Value;
    /// Numeric value, for rings that have one.
    fn to_complex(&self, _prec: u32) -> Option<Cf> {
        None
    }

    fn from_int_like(&self, n: i64) -> Self {
        self.from_rational_like(&Rational::from(n))
    }
    fn from_r64_like(&self, r: Rational64) -> Self {
        self.from_rational_like(&r64_to_rug(r))
    }
    fn mul_int(&self, n: i64) -> Self {
        self.mul_rational(&Rational::from(n))
    }
    fn pow_u(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = self.one_like();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
    /// `self^e` for rational `e`; exact rings support integer and half-integer
    /// exponents only.
    fn try_pow_r(&self, e: Rational64) -> Result<Self> {
        let (p, q) = (*e.numer(), *e.denom());
        let base = match q {
            1 => self.clone(),
            2 => self.try_sqrt()?,
            _ => return Err(Error::NotRepresentable(format!("root of order {q}"))),
        };
        let r = base.pow_u(p.unsigned_abs());
        if p < 0 {
            r.try_inv()
        } else {
            Ok(r)
        }
    }
}

pub fn r64_to_rug(r: Rational64) -> Rational {
    Rational::from((*r.numer(), *r.denom()))
}

// ---------------------------------------------------------------------------
// Exact quadratic extension of the Gaussian rationals.

/// `(c0 + c1 i) + (c2 + c3 i) sqrt(d)`, with `d` squarefree; `d = 1` means
/// the element is a Gaussian rational.
#[derive(Clone, PartialEq, Eq)]
pub struct Alg {
    c: [Rational; 4],
    d: u32,
}

impl Alg {
    pub fn rational(r: Rational) -> Self {
        Alg {
            c: [r, Rational::new(), Rational::new(), Rational::new()],
            d: 1,
        }
    }
    pub fn from_i64(n: i64) -> Self {
        Self::rational(Rational::from(n))
    }
    pub fn zero() -> Self {
        Self::from_i64(0)
    }
    pub fn one() -> Self {
        Self::from_i64(1)
    }
    pub fn i() -> Self {
        Alg {
            c: [
                Rational::new(),
                Rational::from(1),
                Rational::new(),
                Rational::new(),
            ],
            d: 1,
        }
    }
    /// `a + b sqrt(d)` with Gaussian parts given as (re, im).
    pub fn new(re: Rational, im: Rational, sre: Rational, sim: Rational, d: u32) -> Self {
        let mut a = Alg {
            c: [re, im, sre, sim],
            d,
        };
        a.tidy();
        a
    }
    pub fn sqrt_d(d: u32) -> Self {
        Self::new(
            Rational::new(),
            Rational::new(),
            Rational::from(1),
            Rational::new(),
            d,
        )
    }
    pub fn parts(&self) -> (&[Rational; 4], u32) {
        (&self.c, self.d)
    }
    pub fn is_rational(&self) -> bool {
        self.c[1] == 0 && self.c[2] == 0 && self.c[3] == 0
    }
    pub fn as_rational(&self) -> Option<&Rational> {
        self.is_rational().then_some(&self.c[0])
    }
    pub fn is_real(&self) -> bool {
        self.c[1] == 0 && self.c[3] == 0
    }
    pub fn conj(&self) -> Self {
        Alg {
            c: [
                self.c[0].clone(),
                -self.c[1].clone(),
                self.c[2].clone(),
                -self.c[3].clone(),
            ],
            d: self.d,
        }
    }

    fn tidy(&mut self) {
        if self.c[2] == 0 && self.c[3] == 0 {
            self.d = 1;
        }
    }

    fn join_d(&self, o: &Self) -> u32 {
        match (self.d, o.d) {
            (1, d) | (d, 1) => d,
            (a, b) if a == b => a,
            (a, b) => panic!("incompatible quadratic extensions sqrt({a}) and sqrt({b})"),
        }
    }

    /// `exp(i pi u)` when it lies in a supported extension (denominator of
    /// `u` dividing 4 or 6).
    pub fn unit_root(u: Rational64) -> Option<Self> {
        let k = u * Rational64::from(12);
        if !k.is_integer() {
            return None;
        }
        let k = k.to_integer().rem_euclid(24);
        let (cos, sin) = match k % 6 {
            0 | 2 | 4 => (Self::trig6(k / 2), Self::trig6(k / 2 + 9)),
            3 => (Self::trig4(k), Self::trig4(k + 18)),
            _ => return None,
        };
        Some(cos.add(&sin.mul(&Alg::i())))
    }

    // cos(j pi / 6) for j mod 12
    fn trig6(j: i64) -> Self {
        let j = j.rem_euclid(12);
        let h = Rational::from((1, 2));
        let (r, s): (Rational, Rational) = match j {
            0 => (Rational::from(1), Rational::new()),
            1 => (Rational::new(), h.clone()),
            2 => (h.clone(), Rational::new()),
            3 => (Rational::new(), Rational::new()),
            4 => (-h.clone(), Rational::new()),
            5 => (Rational::new(), -h.clone()),
            6 => (Rational::from(-1), Rational::new()),
            7 => (Rational::new(), -h.clone()),
            8 => (-h.clone(), Rational::new()),
            9 => (Rational::new(), Rational::new()),
            10 => (h.clone(), Rational::new()),
            _ => (Rational::new(), h),
        };
        Alg::new(r, Rational::new(), s, Rational::new(), 3)
    }

    // cos(k pi / 12) for k an odd multiple of 3
    fn trig4(k: i64) -> Self {
        let k = k.rem_euclid(24);
        let h = Rational::from((1, 2));
        let s = match k {
            3 | 21 => h,
            9 | 15 => -h,
            _ => unreachable!("trig4 expects odd multiples of 3"),
        };
        Alg::new(Rational::new(), Rational::new(), s, Rational::new(), 2)
    }

    pub fn to_cf(&self, prec: u32) -> Cf {
        let f = |r: &Rational| Float::with_val(prec, r);
        let s = Float::with_val(prec, self.d).sqrt();
        let re = f(&self.c[0]) + f(&self.c[2]) * &s;
        let im = f(&self.c[1]) + f(&self.c[3]) * &s;
        Cf::from_parts(re, im)
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        let s = (self.d as f64).sqrt();
        (
            self.c[0].to_f64() + self.c[2].to_f64() * s,
            self.c[1].to_f64() + self.c[3].to_f64() * s,
        )
    }

    fn gauss_mul(a: (&Rational, &Rational), b: (&Rational, &Rational)) -> (Rational, Rational) {
        let re = Rational::from(a.0 * b.0) - Rational::from(a.1 * b.1);
        let im = Rational::from(a.0 * b.1) + Rational::from(a.1 * b.0);
        (re, im)
    }
}

impl fmt::Debug for Alg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Alg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gauss = |re: &Rational, im: &Rational| -> String {
            match (*re == 0, *im == 0) {
                (_, true) => re.to_string(),
                (true, false) => format!("{im}*i"),
                (false, false) => format!("({re}{}{}*i)", if *im < 0 { "" } else { "+" }, im),
            }
        };
        let a = gauss(&self.c[0], &self.c[1]);
        if self.c[2] == 0 && self.c[3] == 0 {
            return write!(f, "{a}");
        }
        let b = gauss(&self.c[2], &self.c[3]);
        if self.c[0] == 0 && self.c[1] == 0 {
            write!(f, "{b}*sqrt({})", self.d)
        } else {
            write!(f, "{a}+{b}*sqrt({})", self.d)
        }
    }
}

impl Coeff for Alg {
    fn zero_like(&self) -> Self {
        Alg::zero()
    }
    fn one_like(&self) -> Self {
        Alg::one()
    }
    fn from_rational_like(&self, r: &Rational) -> Self {
        Alg::rational(r.clone())
    }
    fn is_zero(&self) -> bool {
        self.c.iter().all(|x| *x == 0)
    }
    fn add(&self, o: &Self) -> Self {
        let d = self.join_d(o);
        let mut a = Alg {
            c: [
                Rational::from(&self.c[0] + &o.c[0]),
                Rational::from(&self.c[1] + &o.c[1]),
                Rational::from(&self.c[2] + &o.c[2]),
                Rational::from(&self.c[3] + &o.c[3]),
            ],
            d,
        };
        a.tidy();
        a
    }
    fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }
    fn mul(&self, o: &Self) -> Self {
        let d = self.join_d(o);
        let (a0, a1) = Self::gauss_mul((&self.c[0], &self.c[1]), (&o.c[0], &o.c[1]));
        let (b0, b1) = Self::gauss_mul((&self.c[2], &self.c[3]), (&o.c[2], &o.c[3]));
        let (c0, c1) = Self::gauss_mul((&self.c[0], &self.c[1]), (&o.c[2], &o.c[3]));
        let (e0, e1) = Self::gauss_mul((&self.c[2], &self.c[3]), (&o.c[0], &o.c[1]));
        let mut r = Alg {
            c: [
                a0 + b0 * Rational::from(d),
                a1 + b1 * Rational::from(d),
                c0 + e0,
                c1 + e1,
            ],
            d,
        };
        r.tidy();
        r
    }
    fn neg(&self) -> Self {
        Alg {
            c: self.c.clone().map(|x| -x),
            d: self.d,
        }
    }
    fn mul_rational(&self, r: &Rational) -> Self {
        let mut a = Alg {
            c: self.c.clone().map(|x| x * r),
            d: self.d,
        };
        a.tidy();
        a
    }
    fn try_inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroDivision);
        }
        // (A + B s)^{-1} = (A - B s) / (A^2 - d B^2)
        let a = (&self.c[0], &self.c[1]);
        let b = (&self.c[2], &self.c[3]);
        let (aa0, aa1) = Self::gauss_mul(a, a);
        let (bb0, bb1) = Self::gauss_mul(b, b);
        let d = Rational::from(self.d);
        let n0 = aa0 - bb0 * &d;
        let n1 = aa1 - bb1 * &d;
        let den = Rational::from(&n0 * &n0) + Rational::from(&n1 * &n1);
        let (i0, i1) = (n0 / &den, -n1 / &den);
        let (r0, r1) = Self::gauss_mul(a, (&i0, &i1));
        let (s0, s1) = Self::gauss_mul(b, (&i0, &i1));
        let mut r = Alg {
            c: [r0, r1, -s0, -s1],
            d: self.d,
        };
        r.tidy();
        Ok(r)
    }
    fn try_sqrt(&self) -> Result<Self> {
        let r = self
            .as_rational()
            .ok_or_else(|| Error::NotRepresentable(format!("sqrt({self})")))?;
        if *r == 0 {
            return Ok(Alg::zero());
        }
        let neg = *r < 0;
        let ra = Rational::from(r.abs_ref());
        let (num, den) = ra.into_numer_denom();
        let prod = num * &den;
        let (sq, sf) = squarefree_split(&prod).ok_or_else(|| {
            Error::NotRepresentable(format!("sqrt({self}): factorisation too large"))
        })?;
        let coef = Rational::from((sq, den));
        let sf_u = sf
            .to_u32()
            .ok_or_else(|| Error::NotRepresentable("large radicand".into()))?;
        let base = if sf_u == 1 {
            Alg::rational(coef)
        } else {
            if self.d != 1 && self.d != sf_u {
                return Err(Error::NotRepresentable(format!(
                    "sqrt({sf_u}) outside Q(i, sqrt {})",
                    self.d
                )));
            }
            Alg::new(
                Rational::new(),
                Rational::new(),
                coef,
                Rational::new(),
                sf_u,
            )
        };
        Ok(if neg { base.mul(&Alg::i()) } else { base })
    }
    fn mag_log2(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        // exact rings never flush, an estimate suffices
        let (re, im) = self.to_f64_pair();
        let m = re.hypot(im);
        if m > 0.0 && m.is_finite() {
            m.log2()
        } else {
            self.c
                .iter()
                .filter(|x| **x != 0)
                .map(rat_log2)
                .fold(f64::NEG_INFINITY, f64::max)
        }
    }
    fn precision(&self) -> Option<u32> {
        None
    }
    fn compatible(&self, o: &Self) -> bool {
        self.d == 1 || o.d == 1 || self.d == o.d
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }
    fn to_complex(&self, prec: u32) -> Option<Cf> {
        Some(self.to_cf(prec))
    }
}

fn rat_log2(r: &Rational) -> f64 {
    let n = r.numer().significant_bits() as f64;
    let d = r.denom().significant_bits() as f64;
    n - d
}

/// Split `n = sq^2 * sf` with `sf` squarefree, using trial division. Returns
/// `None` when a large cofactor cannot be classified.
fn squarefree_split(n: &Integer) -> Option<(Integer, Integer)> {
    let mut rest = n.clone();
    let mut sq = Integer::from(1);
    let mut sf = Integer::from(1);
    let mut p = 2u32;
    while p <= 10_000 && Integer::from(p) * p <= rest {
        let mut e = 0;
        while rest.is_divisible_u(p) {
            rest /= p;
            e += 1;
        }
        sq *= Integer::from(p).pow(e / 2);
        if e % 2 == 1 {
            sf *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest == 1 {
        return Some((sq, sf));
    }
    if rest.is_perfect_square() {
        sq *= rest.sqrt();
        return Some((sq, sf));
    }
    if rest < 100_000_000u64 {
        sf *= rest;
        return Some((sq, sf));
    }
    None
}

// ---------------------------------------------------------------------------
// Multiprecision complex numbers.

#[derive(Clone, PartialEq)]
pub struct Cf {
    pub re: Float,
    pub im: Float,
}

impl fmt::Debug for Cf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.20e}, {:.20e})", self.re.to_f64(), self.im.to_f64())
    }
}

impl Cf {
    pub fn from_parts(re: Float, im: Float) -> Self {
        Cf { re, im }
    }
    pub fn zero(prec: u32) -> Self {
        Cf {
            re: Float::new(prec),
            im: Float::new(prec),
        }
    }
    pub fn real(x: Float) -> Self {
        let p = x.prec();
        Cf {
            re: x,
            im: Float::new(p),
        }
    }
    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        Cf {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }
    pub fn from_rational(prec: u32, r: &Rational) -> Self {
        Cf::real(Float::with_val(prec, r))
    }
    pub fn i(prec: u32) -> Self {
        Cf {
            re: Float::new(prec),
            im: Float::with_val(prec, 1),
        }
    }
    pub fn pi(prec: u32) -> Float {
        Float::with_val(prec, rug::float::Constant::Pi)
    }
    pub fn prec(&self) -> u32 {
        self.re.prec().min(self.im.prec())
    }
    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }
    pub fn arg(&self) -> Float {
        Float::with_val(self.prec(), self.im.atan2_ref(&self.re))
    }
    pub fn conj(&self) -> Self {
        Cf {
            re: self.re.clone(),
            im: Float::with_val(self.prec(), -&self.im),
        }
    }
    pub fn scale(&self, x: &Float) -> Self {
        let p = self.prec().min(x.prec());
        Cf {
            re: Float::with_val(p, &self.re * x),
            im: Float::with_val(p, &self.im * x),
        }
    }
    pub fn exp(&self) -> Self {
        let p = self.prec();
        let m = Float::with_val(p, self.re.exp_ref());
        let (s, c) = Float::with_val(p, &self.im).sin_cos(Float::new(p));
        Cf {
            re: Float::with_val(p, &m * &c),
            im: m * s,
        }
    }
    /// `exp(i x)` for real `x`.
    pub fn expi(x: &Float) -> Self {
        let (s, c) = x.clone().sin_cos(Float::new(x.prec()));
        Cf { re: c, im: s }
    }
    pub fn ln(&self) -> Self {
        let p = self.prec();
        Cf {
            re: Float::with_val(p, self.abs().ln_ref()),
            im: self.arg(),
        }
    }
    pub fn sqrt(&self) -> Self {
        let p = self.prec();
        if self.im.is_zero() && !self.re.is_sign_negative() {
            return Cf::real(Float::with_val(p, self.re.sqrt_ref()));
        }
        let r = self.abs();
        let a = (Float::with_val(p, &r + &self.re) / 2u32).sqrt();
        let b = (Float::with_val(p, &r - &self.re) / 2u32).sqrt();
        let b = if self.im.is_sign_negative() { -b } else { b };
        Cf { re: a, im: b }
    }
    pub fn pow_f(&self, e: &Float) -> Self {
        self.ln().scale(e).exp()
    }
    /// Difference without cancellation flushing, for residual measurements.
    pub fn sub_raw(&self, o: &Self) -> Self {
        let p = self.prec().min(o.prec());
        Cf {
            re: Float::with_val(p, &self.re - &o.re),
            im: Float::with_val(p, &self.im - &o.im),
        }
    }
    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    fn flushed(mut self, scale: f64) -> Self {
        let guard = self.prec().saturating_sub(FLUSH_GUARD) as f64;
        if scale.is_finite() && self.mag_log2() < scale - guard {
            self.re = Float::new(self.re.prec());
            self.im = Float::new(self.im.prec());
        }
        self
    }
}

fn float_log2(x: &Float) -> f64 {
    if x.is_zero() {
        f64::NEG_INFINITY
    } else {
        x.get_exp().map(|e| e as f64).unwrap_or(f64::NEG_INFINITY)
    }
}

impl Coeff for Cf {
    fn zero_like(&self) -> Self {
        Cf::zero(self.prec())
    }
    fn one_like(&self) -> Self {
        Cf::from_f64(self.prec(), 1.0, 0.0)
    }
    fn from_rational_like(&self, r: &Rational) -> Self {
        Cf::from_rational(self.prec(), r)
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn add(&self, o: &Self) -> Self {
        let p = self.prec().min(o.prec());
        let r = Cf {
            re: Float::with_val(p, &self.re + &o.re),
            im: Float::with_val(p, &self.im + &o.im),
        };
        r.flushed(self.mag_log2().max(o.mag_log2()))
    }
    fn sub(&self, o: &Self) -> Self {
        let p = self.prec().min(o.prec());
        let r = Cf {
            re: Float::with_val(p, &self.re - &o.re),
            im: Float::with_val(p, &self.im - &o.im),
        };
        r.flushed(self.mag_log2().max(o.mag_log2()))
    }
    fn mul(&self, o: &Self) -> Self {
        let p = self.prec().min(o.prec());
        let re = Float::with_val(p, &self.re * &o.re) - Float::with_val(p, &self.im * &o.im);
        let im = Float::with_val(p, &self.re * &o.im) + Float::with_val(p, &self.im * &o.re);
        Cf { re, im }
    }
    fn neg(&self) -> Self {
        Cf {
            re: Float::with_val(self.re.prec(), -&self.re),
            im: Float::with_val(self.im.prec(), -&self.im),
        }
    }
    fn mul_rational(&self, r: &Rational) -> Self {
        let p = self.prec();
        Cf {
            re: Float::with_val(p, &self.re * r),
            im: Float::with_val(p, &self.im * r),
        }
    }
    fn try_inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroDivision);
        }
        let p = self.prec();
        let n = Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref());
        Ok(Cf {
            re: Float::with_val(p, &self.re / &n),
            im: -Float::with_val(p, &self.im / &n),
        })
    }
    fn try_sqrt(&self) -> Result<Self> {
        Ok(self.sqrt())
    }
    fn mag_log2(&self) -> f64 {
        float_log2(&self.re).max(float_log2(&self.im))
    }
    fn precision(&self) -> Option<u32> {
        Some(self.prec())
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::json!([float_to_string(&self.re), float_to_string(&self.im)])
    }
    fn to_complex(&self, prec: u32) -> Option<Cf> {
        Some(Cf::from_parts(
            Float::with_val(prec, &self.re),
            Float::with_val(prec, &self.im),
        ))
    }
    fn try_pow_r(&self, e: Rational64) -> Result<Self> {
        if e.is_integer() {
            let n = e.to_integer();
            let r = self.pow_u(n.unsigned_abs());
            return if n < 0 { r.try_inv() } else { Ok(r) };
        }
        if self.is_zero() {
            return Err(Error::ZeroDivision);
        }
        let p = self.prec();
        let ef = Float::with_val(p, &r64_to_rug(e));
        Ok(self.pow_f(&ef))
    }
}

/// Decimal rendering with enough digits to round-trip the precision.
pub fn float_to_string(x: &Float) -> String {
    let digits = (x.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1;
    x.to_string_radix(10, Some(digits))
}

pub fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_roots_have_modulus_one() {
        for k in 0..24i64 {
            let u = Rational64::new(k, 12);
            if let Some(z) = Alg::unit_root(u) {
                let n = z.mul(&z.conj());
                assert_eq!(n, Alg::one(), "u = {u}");
                let (re, im) = z.to_f64_pair();
                let ang = std::f64::consts::PI * (k as f64) / 12.0;
                assert!(
                    (re - ang.cos()).abs() < 1e-14 && (im - ang.sin()).abs() < 1e-14,
                    "u = {u}"
                );
            } else {
                assert!(k % 2 == 1 && k % 3 != 0, "k = {k}");
            }
        }
        assert!(Alg::unit_root(Rational64::new(1, 5)).is_none());
    }

    #[test]
    fn alg_inverse_and_sqrt() {
        let x = Alg::new(
            Rational::from(2),
            Rational::from(-1),
            Rational::from((1, 3)),
            Rational::from(5),
            3,
        );
        assert_eq!(x.mul(&x.try_inv().unwrap()), Alg::one());
        let r = Alg::rational(Rational::from((1, 3))).try_sqrt().unwrap();
        assert_eq!(r.mul(&r), Alg::rational(Rational::from((1, 3))));
        assert_eq!(r.to_string(), "1/3*sqrt(3)");
        let m = Alg::rational(Rational::from(-4)).try_sqrt().unwrap();
        assert_eq!(
            m,
            Alg::new(
                Rational::new(),
                Rational::from(2),
                Rational::new(),
                Rational::new(),
                1
            )
        );
    }

    #[test]
    fn cf_flushes_cancellation_only() {
        let a = Cf::from_f64(256, 1.0, 0.5);
        let b = a.clone();
        assert!(a.sub(&b).is_zero());
        let tiny = Cf::from_f64(256, 1e-40, 0.0);
        assert!(!a.add(&tiny).sub(&a).is_zero());
    }

    #[test]
    fn cf_elementary() {
        let z = Cf::from_f64(128, 0.3, -1.1);
        let back = z.ln().exp();
        assert!(back.sub_raw(&z).abs() < 1e-35);
        let s = z.sqrt();
        assert!(s.mul(&s).sub_raw(&z).abs() < 1e-35);
    }
}
