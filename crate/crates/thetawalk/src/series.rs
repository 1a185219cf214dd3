//! Truncated Puiseux series with dense storage on a `1/D` exponent grid.

use std::fmt;

use num_integer::Integer as _;
use num_rational::Rational64;
use rug::Rational;
use serde_json::json;

use crate::error::{Error, Result};
use crate::ring::Coeff;

/// Truncation order: every term with exponent `>= At(o)` is unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Exact,
    At(Rational64),
}

impl Order {
    pub fn min(self, o: Order) -> Order {
        match (self, o) {
            (Order::Exact, x) | (x, Order::Exact) => x,
            (Order::At(a), Order::At(b)) => Order::At(a.min(b)),
        }
    }
    pub fn shift(self, by: Rational64) -> Order {
        match self {
            Order::Exact => Order::Exact,
            Order::At(a) => Order::At(a + by),
        }
    }
    pub fn value(self) -> Option<Rational64> {
        match self {
            Order::Exact => None,
            Order::At(a) => Some(a),
        }
    }
    pub fn covers(self, e: Rational64) -> bool {
        match self {
            Order::Exact => true,
            Order::At(a) => e < a,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Exact => write!(f, "exact"),
            Order::At(a) => write!(f, "{a}"),
        }
    }
}

pub fn at(n: i64, d: i64) -> Order {
    Order::At(Rational64::new(n, d))
}

pub fn r64(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

/// `sum_j c_j x^{(val + j)/den} + O(x^order)`.
#[derive(Clone)]
pub struct PuiseuxSeries<C: Coeff> {
    den: i64,
    val: i64,
    coeffs: Vec<C>,
    order: Order,
    proto: C,
}

impl<C: Coeff> fmt::Debug for PuiseuxSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:?}*x^{}", self.exponent(j))?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(x^{})", self.order)
    }
}

/// Number of grid points `k >= val` with `k/den < order`.
fn slots_below(order: Order, den: i64, val: i64) -> Option<usize> {
    order.value().map(|o| {
        let lim = o * den;
        let top = if lim.is_integer() {
            lim.to_integer()
        } else {
            lim.floor().to_integer() + 1
        };
        (top - val).max(0) as usize
    })
}

impl<C: Coeff> PuiseuxSeries<C> {
    pub fn new(proto: &C, den: i64, val: i64, coeffs: Vec<C>, order: Order) -> Self {
        assert!(den > 0, "grid denominator must be positive");
        let mut s = PuiseuxSeries {
            den,
            val,
            coeffs,
            order,
            proto: proto.zero_like(),
        };
        s.normalize();
        s
    }

    pub fn zero(proto: &C, order: Order) -> Self {
        Self::new(proto, 1, 0, vec![], order)
    }

    pub fn constant(c: C, order: Order) -> Self {
        let p = c.zero_like();
        Self::new(&p, 1, 0, vec![c], order)
    }

    pub fn one(proto: &C) -> Self {
        Self::constant(proto.one_like(), Order::Exact)
    }

    pub fn monomial(c: C, exp: Rational64, order: Order) -> Self {
        let p = c.zero_like();
        Self::new(&p, *exp.denom(), *exp.numer(), vec![c], order)
    }

    /// `x` itself.
    pub fn var(proto: &C, order: Order) -> Self {
        Self::monomial(proto.one_like(), Rational64::from(1), order)
    }

    /// Power series `sum c_j x^j`.
    pub fn from_coeffs(proto: &C, coeffs: Vec<C>, order: Order) -> Self {
        Self::new(proto, 1, 0, coeffs, order)
    }

    /// Build from sparse `(exponent, coefficient)` pairs; repeated exponents add.
    pub fn from_terms(proto: &C, terms: Vec<(Rational64, C)>, order: Order) -> Self {
        if terms.is_empty() {
            return Self::zero(proto, order);
        }
        let den = terms.iter().fold(1i64, |g, (e, _)| g.lcm(e.denom()));
        let ks: Vec<i64> = terms.iter().map(|(e, _)| (e * den).to_integer()).collect();
        let val = *ks.iter().min().unwrap();
        let top = *ks.iter().max().unwrap();
        let mut coeffs = vec![proto.zero_like(); (top - val + 1) as usize];
        for ((_, c), k) in terms.into_iter().zip(ks) {
            let j = (k - val) as usize;
            coeffs[j] = coeffs[j].add(&c);
        }
        Self::new(proto, den, val, coeffs, order)
    }

    pub fn proto(&self) -> &C {
        &self.proto
    }
    pub fn den(&self) -> i64 {
        self.den
    }
    pub fn val(&self) -> i64 {
        self.val
    }
    pub fn order(&self) -> Order {
        self.order
    }
    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }
    pub fn exponent(&self, j: usize) -> Rational64 {
        Rational64::new(self.val + j as i64, self.den)
    }
    pub fn is_zero_series(&self) -> bool {
        self.coeffs.is_empty()
    }
    /// Exponent of the leading term, if any term is known to be nonzero.
    pub fn valuation(&self) -> Option<Rational64> {
        (!self.coeffs.is_empty()).then(|| self.exponent(0))
    }
    pub fn leading(&self) -> Option<&C> {
        self.coeffs.first()
    }
    /// Iterator over `(exponent, coefficient)` for nonzero terms.
    pub fn terms(&self) -> impl Iterator<Item = (Rational64, &C)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, c)| (self.exponent(j), c))
    }

    fn normalize(&mut self) {
        if let Some(n) = slots_below(self.order, self.den, self.val) {
            self.coeffs.truncate(n);
        }
        let lead = self.coeffs.iter().position(|c| !c.is_zero());
        match lead {
            None => {
                self.coeffs.clear();
                self.val = 0;
                self.den = 1;
                return;
            }
            Some(k) if k > 0 => {
                self.coeffs.drain(..k);
                self.val += k as i64;
            }
            _ => {}
        }
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        let mut g = self.den;
        for (j, c) in self.coeffs.iter().enumerate() {
            if g == 1 {
                break;
            }
            if !c.is_zero() {
                g = g.gcd(&(self.val + j as i64));
            }
        }
        if g > 1 {
            self.coeffs = self.coeffs.iter().step_by(g as usize).cloned().collect();
            self.den /= g;
            self.val /= g;
        }
    }

    /// Same series on the finer grid `den` (a multiple of the current one).
    pub fn regrid(&self, den: i64) -> Self {
        assert!(den % self.den == 0, "regrid target must be a multiple");
        let f = den / self.den;
        if f == 1 {
            return self.clone();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() * f as usize);
        for (j, c) in self.coeffs.iter().enumerate() {
            if j > 0 {
                for _ in 1..f {
                    coeffs.push(self.proto.clone());
                }
            }
            coeffs.push(c.clone());
        }
        PuiseuxSeries {
            den,
            val: self.val * f,
            coeffs,
            order: self.order,
            proto: self.proto.clone(),
        }
    }

    /// Drop every term at or above `order`.
    pub fn truncate(&self, order: Order) -> Self {
        let mut s = self.clone();
        s.order = self.order.min(order);
        s.normalize();
        s
    }

    pub fn with_order(&self, order: Order) -> Self {
        self.truncate(order)
    }

    /// Effective valuation used for order propagation: the leading exponent,
    /// or the truncation order for a series known only to be `O(x^o)`.
    fn eff_val(&self) -> Option<Rational64> {
        self.valuation().or(self.order.value())
    }

    pub fn map_coeffs<D: Coeff>(&self, proto: &D, f: impl Fn(&C) -> D) -> PuiseuxSeries<D> {
        PuiseuxSeries::new(
            proto,
            self.den,
            self.val,
            self.coeffs.iter().map(f).collect(),
            self.order,
        )
    }

    /// Coefficient at exponent `e`; an error at or beyond the truncation order.
    pub fn coeff(&self, e: Rational64) -> Result<C> {
        if !self.order.covers(e) {
            return Err(Error::Truncated {
                exp: e.to_string(),
                order: self.order.to_string(),
            });
        }
        let k = e * self.den;
        if !k.is_integer() {
            return Ok(self.proto.clone());
        }
        let j = k.to_integer() - self.val;
        if j < 0 || j as usize >= self.coeffs.len() {
            return Ok(self.proto.clone());
        }
        Ok(self.coeffs[j as usize].clone())
    }

    pub fn coeff_i(&self, e: i64) -> Result<C> {
        self.coeff(Rational64::from(e))
    }

    pub fn compatible(&self, o: &Self) -> bool {
        self.proto.compatible(&o.proto)
    }

    pub fn neg(&self) -> Self {
        let mut s = self.clone();
        s.coeffs.iter_mut().for_each(|c| *c = c.neg());
        s
    }

    pub fn scale(&self, k: &C) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.mul(k)).collect();
        Self::new(&self.proto, self.den, self.val, coeffs, self.order)
    }

    pub fn scale_rational(&self, r: &Rational) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.mul_rational(r)).collect();
        Self::new(&self.proto, self.den, self.val, coeffs, self.order)
    }

    /// Multiply by `x^e`.
    pub fn shift(&self, e: Rational64) -> Self {
        let den = self.den.lcm(e.denom());
        let s = self.regrid(den);
        let by = (e * den).to_integer();
        PuiseuxSeries {
            den,
            val: s.val + by,
            coeffs: s.coeffs,
            order: s.order.shift(e),
            proto: s.proto,
        }
        .normalized()
    }

    fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn add(&self, o: &Self) -> Self {
        let den = self.den.lcm(&o.den);
        let (a, b) = (self.regrid(den), o.regrid(den));
        let order = a.order.min(b.order);
        if a.coeffs.is_empty() {
            return b.truncate(order);
        }
        if b.coeffs.is_empty() {
            return a.truncate(order);
        }
        let val = a.val.min(b.val);
        let end = (a.val + a.coeffs.len() as i64).max(b.val + b.coeffs.len() as i64);
        let mut n = (end - val) as usize;
        if let Some(m) = slots_below(order, den, val) {
            n = n.min(m);
        }
        fn get<C: Coeff>(s: &PuiseuxSeries<C>, k: i64) -> Option<&C> {
            let j = k - s.val;
            (j >= 0 && (j as usize) < s.coeffs.len()).then(|| &s.coeffs[j as usize])
        }
        let coeffs = (0..n)
            .map(|j| {
                let k = val + j as i64;
                match (get(&a, k), get(&b, k)) {
                    (Some(x), Some(y)) => x.add(y),
                    (Some(x), None) => x.clone(),
                    (None, Some(y)) => y.clone(),
                    (None, None) => a.proto.clone(),
                }
            })
            .collect();
        Self::new(&a.proto, den, val, coeffs, order)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let order = match (self.eff_val(), o.eff_val()) {
            (Some(va), Some(vb)) => self.order.shift(vb).min(o.order.shift(va)),
            _ => Order::Exact,
        };
        if self.coeffs.is_empty() || o.coeffs.is_empty() {
            return Self::zero(&self.proto, order);
        }
        let den = self.den.lcm(&o.den);
        let (a, b) = (self.regrid(den), o.regrid(den));
        let val = a.val + b.val;
        let mut n = a.coeffs.len() + b.coeffs.len() - 1;
        if let Some(m) = slots_below(order, den, val) {
            n = n.min(m);
        }
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            let lo = k.saturating_sub(b.coeffs.len() - 1);
            let hi = k.min(a.coeffs.len() - 1);
            let mut acc: Option<C> = None;
            for i in lo..=hi {
                let (x, y) = (&a.coeffs[i], &b.coeffs[k - i]);
                if x.is_zero() || y.is_zero() {
                    continue;
                }
                let t = x.mul(y);
                acc = Some(match acc {
                    None => t,
                    Some(s) => s.add(&t),
                });
            }
            coeffs.push(acc.unwrap_or_else(|| a.proto.clone()));
        }
        Self::new(&a.proto, den, val, coeffs, order)
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    pub fn pow_u(&self, e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(&self.proto);
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        acc
    }

    /// Split `self = c x^e (1 + f)` with `f` of positive valuation, returning
    /// `(c, e, 1 + f)` where the unit part is a power series on the same grid.
    fn split_leading(&self) -> Result<(C, Rational64, Self)> {
        let c = self
            .coeffs
            .first()
            .ok_or_else(|| Error::LeadingTerm("series is zero to its truncation order".into()))?
            .clone();
        let e = self.exponent(0);
        let ci = c.try_inv()?;
        let coeffs = self.coeffs.iter().map(|x| x.mul(&ci)).collect();
        let unit = Self::new(&self.proto, self.den, 0, coeffs, self.order.shift(-e));
        Ok((c, e, unit))
    }

    /// Multiplicative inverse.
    pub fn inv(&self) -> Result<Self> {
        let (c, e, u) = self.split_leading()?;
        if u.order == Order::Exact && u.coeffs.len() > 1 {
            return Err(Error::InvalidArgument(
                "inverse of an exact polynomial needs a truncation order".into(),
            ));
        }
        let n = slots_below(u.order, u.den, 0).unwrap_or(1);
        let h = &u.coeffs;
        let mut g: Vec<C> = Vec::with_capacity(n);
        g.push(self.proto.one_like());
        for k in 1..n {
            let mut acc = self.proto.clone();
            for i in 1..=k.min(h.len() - 1) {
                if h[i].is_zero() {
                    continue;
                }
                acc = acc.add(&h[i].mul(&g[k - i]));
            }
            g.push(acc.neg());
        }
        let ci = c.try_inv()?;
        let g = g.into_iter().map(|x| x.mul(&ci)).collect();
        Ok(Self::new(&self.proto, u.den, 0, g, u.order).shift(-e))
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        Ok(self.mul(&o.inv()?))
    }

    /// `self^e` for rational `e`, by the binomial recurrence about the leading
    /// monomial.
    pub fn pow_r(&self, e: Rational64) -> Result<Self> {
        if e.is_integer() && e >= Rational64::from(0) && self.order == Order::Exact {
            return Ok(self.pow_u(e.to_integer() as u64));
        }
        let (c, v, u) = self.split_leading()?;
        if u.order == Order::Exact
            && u.coeffs.len() > 1
            && !(e.is_integer() && e > Rational64::from(0))
        {
            return Err(Error::InvalidArgument(
                "power of an exact polynomial needs a truncation order".into(),
            ));
        }
        let ce = if c.sub(&c.one_like()).is_zero() {
            c.clone()
        } else {
            c.try_pow_r(e)?
        };
        let n = slots_below(u.order, u.den, 0).unwrap_or(1);
        let h = &u.coeffs;
        let er = crate::ring::r64_to_rug(e);
        let mut g: Vec<C> = Vec::with_capacity(n);
        g.push(self.proto.one_like());
        for k in 1..n {
            let mut acc = self.proto.clone();
            for i in 1..=k.min(h.len() - 1) {
                if h[i].is_zero() {
                    continue;
                }
                let w = Rational::from(&er * i as i64) - (k - i) as i64;
                acc = acc.add(&h[i].mul(&g[k - i]).mul_rational(&w));
            }
            g.push(acc.mul_rational(&Rational::from((1, k as i64))));
        }
        let g = g.into_iter().map(|x| x.mul(&ce)).collect();
        let lead = v * e;
        let den = u.den.lcm(lead.denom());
        let s = Self::new(&self.proto, u.den, 0, g, u.order);
        Ok(s.regrid(den).shift(lead))
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.pow_r(Rational64::new(1, 2))
    }

    /// `exp(self)` for a series of positive valuation.
    pub fn exp(&self) -> Result<Self> {
        if let Some(v) = self.valuation() {
            if v <= Rational64::from(0) {
                return Err(Error::LeadingTerm(format!(
                    "exp needs positive valuation, got {v}"
                )));
            }
        }
        let n = slots_below(self.order, self.den, 0).ok_or_else(|| {
            Error::InvalidArgument("exp of an exact series needs a truncation order".into())
        })?;
        let f = self.regrid(self.den);
        let fk = |k: usize| -> Option<&C> {
            let j = k as i64 - f.val;
            (j >= 0 && (j as usize) < f.coeffs.len()).then(|| &f.coeffs[j as usize])
        };
        let mut g: Vec<C> = Vec::with_capacity(n);
        g.push(self.proto.one_like());
        for k in 1..n {
            let mut acc = self.proto.clone();
            for i in 1..=k {
                if let Some(x) = fk(i) {
                    if !x.is_zero() {
                        acc = acc.add(&x.mul(&g[k - i]).mul_int(i as i64));
                    }
                }
            }
            g.push(acc.mul_rational(&Rational::from((1, k as i64))));
        }
        Ok(Self::new(&self.proto, self.den, 0, g, self.order))
    }

    /// `log(self)` for a series with leading term `1 * x^0`.
    pub fn log(&self) -> Result<Self> {
        let one = self.proto.one_like();
        match (self.valuation(), self.leading()) {
            (Some(v), Some(c)) if v == Rational64::from(0) && c.sub(&one).is_zero() => {}
            _ => return Err(Error::LeadingTerm("log needs leading term 1".into())),
        }
        let n = slots_below(self.order, self.den, 0).ok_or_else(|| {
            Error::InvalidArgument("log of an exact series needs a truncation order".into())
        })?;
        let h = &self.coeffs;
        let hk = |k: usize| -> Option<&C> { h.get(k) };
        let mut g: Vec<C> = Vec::with_capacity(n);
        g.push(self.proto.clone());
        for k in 1..n {
            let mut acc = hk(k)
                .map(|x| x.mul_int(k as i64))
                .unwrap_or_else(|| self.proto.clone());
            for i in 1..k {
                if let Some(x) = hk(k - i) {
                    if !x.is_zero() && !g[i].is_zero() {
                        acc = acc.sub(&g[i].mul(x).mul_int(i as i64));
                    }
                }
            }
            g.push(acc.mul_rational(&Rational::from((1, k as i64))));
        }
        Ok(Self::new(&self.proto, self.den, 0, g, self.order))
    }

    /// Derivative with respect to `x`.
    pub fn diff(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c.mul_rational(&crate::ring::r64_to_rug(self.exponent(j))))
            .collect();
        Self::new(
            &self.proto,
            self.den,
            self.val - self.den,
            coeffs,
            self.order.shift(Rational64::from(-1)),
        )
    }

    /// `self(inner)`. The inner series must have positive valuation unless
    /// `self` is an exact polynomial with integer exponents.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if self.coeffs.is_empty() {
            let o = match (self.order.value(), inner.valuation()) {
                (Some(o), Some(v)) => Order::At(o * v),
                _ => Order::Exact,
            };
            return Ok(Self::zero(&self.proto, o));
        }
        let vin = inner.valuation();
        let positive = vin.is_some_and(|v| v > Rational64::from(0));
        if !positive && !(self.order == Order::Exact && self.den == 1 && self.val >= 0) {
            return Err(Error::InvalidArgument(
                "composition needs an inner series of positive valuation".into(),
            ));
        }
        let r = if self.den == 1 {
            inner.clone()
        } else {
            inner.pow_r(Rational64::new(1, self.den))?
        };
        // cap intermediate products at the final order
        let mut target = inner.order;
        if let (Some(o), Some(v)) = (self.order.value(), vin) {
            target = target.min(Order::At(o * v));
        }
        let head = if self.val == 0 {
            Self::one(&self.proto)
        } else if self.val > 0 {
            r.pow_u(self.val as u64)
        } else {
            r.pow_r(Rational64::from(self.val))?
        };
        let body_target = match (target.value(), head.valuation()) {
            (Some(t), Some(h)) => Order::At(t - h),
            _ => target,
        };
        let mut acc = Self::constant(self.coeffs.last().unwrap().clone(), Order::Exact);
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc
                .mul(&r)
                .truncate(body_target)
                .add(&Self::constant(c.clone(), Order::Exact));
        }
        Ok(head.mul(&acc).truncate(target))
    }

    /// Compositional inverse. The leading exponent `e` (optionally asserted by
    /// `rescale`) is removed by the substitution `x = y^{1/e}`; the rescaled
    /// series must then be a power series in `y` of valuation one. Returns `g`
    /// with `self(g(t)) = t`.
    pub fn reversion(&self, rescale: Option<Rational64>) -> Result<Self> {
        let e = self
            .valuation()
            .ok_or_else(|| Error::LeadingTerm("reversion of a zero series".into()))?;
        if let Some(r) = rescale {
            if r != e {
                return Err(Error::LeadingTerm(format!(
                    "declared rescaling {r} but leading exponent is {e}"
                )));
            }
        }
        if e <= Rational64::from(0) {
            return Err(Error::LeadingTerm(format!(
                "reversion needs positive leading exponent, got {e}"
            )));
        }
        // b(y) = self(y^{1/e}); exponents (val + j)/den / e must be integers
        let step = Rational64::new(1, self.den) / e;
        let mut coeffs = Vec::new();
        for (j, c) in self.coeffs.iter().enumerate() {
            let k = self.exponent(j) / e;
            if !c.is_zero() && !k.is_integer() {
                return Err(Error::LeadingTerm(format!(
                    "rescaled series not on an integer grid (term x^{})",
                    self.exponent(j)
                )));
            }
            if k.is_integer() {
                let k = k.to_integer() as usize;
                if coeffs.len() <= k {
                    coeffs.resize(k + 1, self.proto.clone());
                }
                coeffs[k] = c.clone();
            }
        }
        let _ = step;
        let bord = self
            .order
            .value()
            .map(|o| Order::At(o / e))
            .unwrap_or(Order::Exact);
        let b = Self::from_coeffs(&self.proto, coeffs, bord);
        let b1 = b.coeff_i(1)?;
        if b1.is_zero() {
            return Err(Error::ZeroDivision);
        }
        let target = match bord {
            Order::At(o) => Order::At(o.ceil()),
            Order::Exact => {
                return Err(Error::InvalidArgument(
                    "reversion of an exact series needs a truncation order".into(),
                ))
            }
        };
        let t = Self::var(&self.proto, Order::Exact);
        let db = b.diff();
        let mut g = t.scale(&b1.try_inv()?).truncate(at(2, 1).min(target));
        let mut prec = 2i64;
        let top = target.value().unwrap().to_integer();
        while prec < top {
            prec = (prec * 2).min(top);
            let o = Order::At(Rational64::from(prec));
            let g_hi = g.with_order_extended(o);
            let res = b.compose(&g_hi)?.sub(&t).truncate(o);
            let d = db
                .compose(&g_hi)?
                .truncate(Order::At(Rational64::from(prec - 1)));
            g = g_hi.sub(&res.div(&d)?).truncate(o);
        }
        let g = g.truncate(target);
        if e == Rational64::from(1) {
            return Ok(g);
        }
        g.pow_r(Rational64::from(1) / e)
    }

    /// Relax the truncation of an iterate so Newton steps can fill new slots.
    fn with_order_extended(&self, o: Order) -> Self {
        let mut s = self.clone();
        s.order = o;
        s
    }

    /// Evaluate with a closure mapping `(coeff, exponent)` to a value and
    /// summing; used for numeric spot checks.
    pub fn eval_with<T>(
        &self,
        zero: T,
        f: impl Fn(&C, Rational64) -> T,
        add: impl Fn(T, T) -> T,
    ) -> T {
        let mut acc = zero;
        for (e, c) in self.terms() {
            acc = add(acc, f(c, e));
        }
        acc
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "grid": self.den,
            "valuation": self.val,
            "order": match self.order { Order::Exact => serde_json::Value::Null, Order::At(o) => json!(o.to_string()) },
            "coeffs": self.coeffs.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }
}

impl<C: Coeff> Coeff for PuiseuxSeries<C> {
    fn zero_like(&self) -> Self {
        Self::zero(&self.proto, Order::Exact)
    }
    fn one_like(&self) -> Self {
        Self::one(&self.proto)
    }
    fn from_rational_like(&self, r: &Rational) -> Self {
        Self::constant(self.proto.from_rational_like(r), Order::Exact)
    }
    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
    fn add(&self, o: &Self) -> Self {
        PuiseuxSeries::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        PuiseuxSeries::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        PuiseuxSeries::mul(self, o)
    }
    fn neg(&self) -> Self {
        PuiseuxSeries::neg(self)
    }
    fn mul_rational(&self, r: &Rational) -> Self {
        self.scale_rational(r)
    }
    fn try_inv(&self) -> Result<Self> {
        self.inv()
    }
    fn try_sqrt(&self) -> Result<Self> {
        self.sqrt()
    }
    fn try_pow_r(&self, e: Rational64) -> Result<Self> {
        self.pow_r(e)
    }
    fn mag_log2(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.mag_log2())
            .fold(f64::NEG_INFINITY, f64::max)
    }
    fn precision(&self) -> Option<u32> {
        self.proto.precision()
    }
    fn compatible(&self, o: &Self) -> bool {
        self.proto.compatible(&o.proto)
    }
    fn to_json(&self) -> serde_json::Value {
        PuiseuxSeries::to_json(self)
    }
}

// Spec-level operation names; these check ring compatibility.

fn check<C: Coeff>(a: &PuiseuxSeries<C>, b: &PuiseuxSeries<C>) -> Result<()> {
    if a.compatible(b) {
        Ok(())
    } else {
        Err(Error::RingMismatch)
    }
}

pub fn ps_add<C: Coeff>(a: &PuiseuxSeries<C>, b: &PuiseuxSeries<C>) -> Result<PuiseuxSeries<C>> {
    check(a, b)?;
    Ok(a.add(b))
}

pub fn ps_mul<C: Coeff>(a: &PuiseuxSeries<C>, b: &PuiseuxSeries<C>) -> Result<PuiseuxSeries<C>> {
    check(a, b)?;
    Ok(a.mul(b))
}

pub fn ps_inv<C: Coeff>(a: &PuiseuxSeries<C>) -> Result<PuiseuxSeries<C>> {
    a.inv()
}

pub fn ps_compose<C: Coeff>(
    outer: &PuiseuxSeries<C>,
    inner: &PuiseuxSeries<C>,
) -> Result<PuiseuxSeries<C>> {
    check(outer, inner)?;
    outer.compose(inner)
}

pub fn ps_reversion<C: Coeff>(
    a: &PuiseuxSeries<C>,
    rescale: Option<Rational64>,
) -> Result<PuiseuxSeries<C>> {
    a.reversion(rescale)
}

pub fn ps_pow<C: Coeff>(a: &PuiseuxSeries<C>, e: Rational64) -> Result<PuiseuxSeries<C>> {
    a.pow_r(e)
}

pub fn ps_log<C: Coeff>(a: &PuiseuxSeries<C>) -> Result<PuiseuxSeries<C>> {
    a.log()
}

pub fn ps_exp<C: Coeff>(a: &PuiseuxSeries<C>) -> Result<PuiseuxSeries<C>> {
    a.exp()
}

pub fn ps_diff<C: Coeff>(a: &PuiseuxSeries<C>) -> PuiseuxSeries<C> {
    a.diff()
}

pub fn ps_coeff<C: Coeff>(a: &PuiseuxSeries<C>, e: Rational64) -> Result<C> {
    a.coeff(e)
}

/// Solve `residual(u) = 0` for the unknown coefficients of `u` one slot at a
/// time. `u` is a power series `sum_{j < n} u_j x^{j/den}`; slots below
/// `fixed` are taken from `init`. At each step the residual is evaluated with
/// the slot at 0 and at 1; at the lowest exponent where the two differ it is
/// affine in the slot, which determines its value. Slots that only enter the
/// residual beyond its truncation are dropped and the order lowered.
pub fn solve_coefficientwise<C: Coeff>(
    init: &[C],
    proto: &C,
    den: i64,
    n: usize,
    residual: impl Fn(&PuiseuxSeries<C>) -> Result<PuiseuxSeries<C>>,
) -> Result<PuiseuxSeries<C>> {
    let order = Order::At(Rational64::new(n as i64, den));
    let mut u: Vec<C> = init.to_vec();
    u.resize(n, proto.zero_like());
    for j in init.len()..n {
        u[j] = proto.zero_like();
        let r0 = residual(&PuiseuxSeries::new(proto, den, 0, u.clone(), order))?;
        u[j] = proto.one_like();
        let r1 = residual(&PuiseuxSeries::new(proto, den, 0, u.clone(), order))?;
        let diff = r1.sub(&r0);
        let Some(e) = diff.valuation() else {
            // slot j only enters beyond the residual's truncation
            if j == init.len() {
                return Err(Error::InvalidArgument(format!(
                    "residual does not depend on slot {j} within its truncation"
                )));
            }
            u.truncate(j);
            return Ok(PuiseuxSeries::new(
                proto,
                den,
                0,
                u,
                Order::At(Rational64::new(j as i64, den)),
            ));
        };
        let a = diff.coeff(e)?;
        let b = r0.coeff(e)?;
        u[j] = b.neg().mul(&a.try_inv()?);
    }
    Ok(PuiseuxSeries::new(proto, den, 0, u, order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{Alg, Cf};

    type S = PuiseuxSeries<Alg>;

    fn q(n: i64) -> Alg {
        Alg::from_i64(n)
    }
    fn ps(c: &[i64], o: i64) -> S {
        S::from_coeffs(&Alg::zero(), c.iter().map(|&n| q(n)).collect(), at(o, 1))
    }
    fn coeff(s: &S, n: i64, d: i64) -> Alg {
        s.coeff(r64(n, d)).unwrap()
    }

    #[test]
    fn inverse_of_one_minus_x() {
        let g = ps(&[1, -1], 10).inv().unwrap();
        for k in 0..10 {
            assert_eq!(coeff(&g, k, 1), q(1));
        }
        assert!(g.coeff_i(10).is_err());
    }

    #[test]
    fn mixed_grid_product() {
        let a = S::monomial(q(1), r64(1, 2), at(3, 1));
        let b = S::monomial(q(1), r64(1, 3), at(3, 1));
        let c = a.mul(&b);
        assert_eq!(c.den(), 6);
        assert_eq!(coeff(&c, 5, 6), q(1));
        // O(x^3) * x^{1/3} + x^{1/2} * O(x^3)
        assert_eq!(c.order(), at(10, 3));
    }

    #[test]
    fn catalan_by_sqrt_and_reversion() {
        // x - x^2 reverts to sum Catalan(n-1) x^n
        let f = ps(&[0, 1, -1], 12);
        let g = f.reversion(None).unwrap();
        let cat = [0i64, 1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796];
        for (n, c) in cat.iter().enumerate() {
            assert_eq!(coeff(&g, n as i64, 1), q(*c), "n={n}");
        }
        // (1 - 4x)^{1/2}
        let s = ps(&[1, -4], 8).sqrt().unwrap();
        assert_eq!(coeff(&s, 3, 1), q(-4));
        assert_eq!(coeff(&s, 4, 1), q(-10));
    }

    #[test]
    fn reversion_with_fractional_lead() {
        // x^{1/2} + x reverts to t^2 - 2 t^3 + 5 t^4 ...
        let f = S::new(&Alg::zero(), 2, 1, vec![q(1), q(0), q(1)], at(6, 1));
        let g = f.reversion(Some(r64(1, 2))).unwrap();
        let back = f.compose(&g).unwrap();
        assert_eq!(coeff(&back, 1, 1), q(1));
        for k in 2..back.order().value().unwrap().ceil().to_integer() {
            assert!(coeff(&back, k, 1).is_zero(), "k={k}");
        }
        assert!(f.reversion(Some(r64(1, 3))).is_err());
    }

    #[test]
    fn exp_log_roundtrip() {
        let f = ps(&[0, 1, 3, -2], 9);
        let e = f.exp().unwrap();
        assert_eq!(coeff(&e, 2, 1), Alg::rational(Rational::from((7, 2))));
        let l = e.log().unwrap();
        for k in 0..9 {
            assert_eq!(coeff(&l, k, 1), coeff(&f, k, 1));
        }
        assert!(ps(&[2, 1], 5).log().is_err());
    }

    #[test]
    fn coefficientwise_solver_matches_inverse() {
        // (1 + x) u = 1
        let a = ps(&[1, 1], 8);
        let one = S::one(&Alg::zero());
        let u = solve_coefficientwise(&[], &Alg::zero(), 1, 8, |u| Ok(a.mul(u).sub(&one))).unwrap();
        assert_eq!(u.coeffs().len(), 8);
        let inv = a.inv().unwrap();
        for k in 0..8 {
            assert_eq!(coeff(&u, k, 1), coeff(&inv, k, 1));
        }
    }

    #[test]
    fn nested_series_coefficients() {
        // (1 - y x)^{-1} with coefficients in Q[[y]]
        let y = PuiseuxSeries::var(&Alg::zero(), at(6, 1));
        let one = PuiseuxSeries::one(&Alg::zero()).truncate(at(6, 1));
        let outer =
            PuiseuxSeries::from_coeffs(&one.zero_like(), vec![one.clone(), y.neg()], at(5, 1));
        let g = outer.inv().unwrap();
        let c3 = g.coeff_i(3).unwrap();
        assert_eq!(c3.coeff_i(3).unwrap(), q(1));
        assert!(c3.coeff_i(2).unwrap().is_zero());
    }

    #[test]
    fn float_reversion_agrees_with_exact() {
        let p = 128;
        let f = PuiseuxSeries::from_coeffs(
            &Cf::zero(p),
            vec![
                Cf::zero(p),
                Cf::from_f64(p, 2.0, 0.0),
                Cf::from_f64(p, 1.0, 1.0),
            ],
            at(8, 1),
        );
        let g = f.reversion(None).unwrap();
        let back = f.compose(&g).unwrap();
        let (r, i) = back.coeff_i(1).unwrap().to_f64_pair();
        assert!((r - 1.0).abs() < 1e-30 && i.abs() < 1e-30);
        for k in 2..8 {
            let c = back.coeff_i(k).unwrap();
            assert!(c.is_zero() || c.mag_log2() < -100.0, "k={k} {c:?}");
        }
    }
}
