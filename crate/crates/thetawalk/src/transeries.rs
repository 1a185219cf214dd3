//! Finite log-transeries `Σ c · u^{r + kρ} (log u)^m` over a fixed real `ρ`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use rug::Float;
use serde_json::json;

use crate::error::{Error, Result};
use crate::ring::Coeff;
use crate::series::PuiseuxSeries;

/// The real constant `ρ` an exponent lattice is built on.
#[derive(Clone, Debug)]
pub struct ExponentLattice {
    pub name: String,
    pub rho: Float,
    /// `Some((u, v))` when `ρ = u/v` is known to be rational.
    pub rational: Option<(i64, i64)>,
}

impl ExponentLattice {
    pub fn irrational(name: &str, rho: Float) -> Self {
        ExponentLattice {
            name: name.to_string(),
            rho,
            rational: None,
        }
    }

    pub fn rational(name: &str, u: i64, v: i64) -> Self {
        let r = Rational64::new(u, v);
        ExponentLattice {
            name: name.to_string(),
            rho: Float::with_val(128, *r.numer()) / *r.denom(),
            rational: Some((*r.numer(), *r.denom())),
        }
    }

    /// Same constant (to 2^-64 relative) and same rationality flag.
    pub fn same(&self, o: &Self) -> bool {
        if self.rational != o.rational {
            return false;
        }
        let p = self.rho.prec().min(o.rho.prec());
        let d = Float::with_val(p, &self.rho - &o.rho).abs();
        d <= Float::with_val(p, self.rho.abs_ref()) >> 64u32 || d.is_zero()
    }

    pub fn normalize(&self, e: LatticeExp) -> LatticeExp {
        match self.rational {
            Some((u, v)) if e.k > 0 => LatticeExp {
                r: e.r + Rational64::new(u, v) * e.k as i64,
                k: 0,
            },
            _ => e,
        }
    }

    pub fn value(&self, e: LatticeExp) -> Float {
        let p = self.rho.prec();
        Float::with_val(p, *e.r.numer()) / *e.r.denom() + Float::with_val(p, &self.rho * e.k)
    }
}

/// Exponent `r + kρ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeExp {
    pub r: Rational64,
    pub k: u32,
}

impl LatticeExp {
    pub fn new(r: Rational64, k: u32) -> Self {
        LatticeExp { r, k }
    }
    pub fn add(self, o: Self) -> Self {
        LatticeExp {
            r: self.r + o.r,
            k: self.k + o.k,
        }
    }
}

impl fmt::Display for LatticeExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.r.is_zero(), self.k) {
            (_, 0) => write!(f, "{}", self.r),
            (true, 1) => write!(f, "ρ"),
            (true, k) => write!(f, "{k}ρ"),
            (false, 1) => write!(f, "{}+ρ", self.r),
            (false, k) => write!(f, "{}+{k}ρ", self.r),
        }
    }
}

/// Sparse transeries in one variable. Terms whose numeric exponent is at or
/// above `order` are never stored.
#[derive(Clone, Debug)]
pub struct TranseriesExpansion<C: Coeff> {
    pub var: String,
    pub lattice: ExponentLattice,
    terms: BTreeMap<(LatticeExp, u32), C>,
    order: f64,
}

impl<C: Coeff> TranseriesExpansion<C> {
    pub fn new(var: &str, lattice: ExponentLattice, order: f64) -> Self {
        TranseriesExpansion {
            var: var.to_string(),
            lattice,
            terms: BTreeMap::new(),
            order,
        }
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    fn numeric(&self, e: LatticeExp) -> f64 {
        self.lattice.value(e).to_f64()
    }

    /// Add `c · u^e (log u)^m`; silently dropped at or beyond the order.
    pub fn add_term(&mut self, e: LatticeExp, m: u32, c: C) {
        let e = self.lattice.normalize(e);
        if self.numeric(e) >= self.order || c.is_zero() {
            return;
        }
        match self.terms.get_mut(&(e, m)) {
            Some(x) => {
                *x = x.add(&c);
                if x.is_zero() {
                    self.terms.remove(&(e, m));
                }
            }
            None => {
                self.terms.insert((e, m), c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (LatticeExp, u32, &C)> + '_ {
        self.terms.iter().map(|((e, m), c)| (*e, *m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> TranseriesExpansion<D> {
        let mut out = TranseriesExpansion::new(&self.var, self.lattice.clone(), self.order);
        for (e, m, c) in self.terms() {
            out.add_term(e, m, f(c));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "variable": self.var,
            "rho": {"name": self.lattice.name, "value": crate::ring::float_to_string(&self.lattice.rho)},
            "order": self.order,
            "terms": self.terms().map(|(e, m, c)| json!({
                "exponent": {"r": e.r.to_string(), "k_rho": e.k},
                "log_power": m,
                "coeff": c.to_json(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Lowest numeric exponent present, if any.
fn valuation<C: Coeff>(a: &TranseriesExpansion<C>) -> Option<f64> {
    a.terms().map(|(e, _, _)| a.numeric(e)).reduce(f64::min)
}

/// Product; orders combine as for Puiseux series.
pub fn tx_mul<C: Coeff>(
    a: &TranseriesExpansion<C>,
    b: &TranseriesExpansion<C>,
) -> Result<TranseriesExpansion<C>> {
    if !a.lattice.same(&b.lattice) {
        return Err(Error::RingMismatch);
    }
    let va = valuation(a).unwrap_or(f64::INFINITY);
    let vb = valuation(b).unwrap_or(f64::INFINITY);
    let order = (a.order + vb).min(b.order + va);
    let mut out = TranseriesExpansion::new(&a.var, a.lattice.clone(), order);
    for (ea, ma, ca) in a.terms() {
        for (eb, mb, cb) in b.terms() {
            out.add_term(ea.add(eb), ma + mb, ca.mul(cb));
        }
    }
    Ok(out)
}

pub fn tx_add<C: Coeff>(
    a: &TranseriesExpansion<C>,
    b: &TranseriesExpansion<C>,
) -> Result<TranseriesExpansion<C>> {
    if !a.lattice.same(&b.lattice) {
        return Err(Error::RingMismatch);
    }
    let mut out = TranseriesExpansion::new(&a.var, a.lattice.clone(), a.order.min(b.order));
    for (e, m, c) in a.terms().chain(b.terms()) {
        out.add_term(e, m, c.clone());
    }
    Ok(out)
}

/// Embed a Puiseux series (all exponents rational, no logs).
pub fn tx_from_puiseux<C: Coeff>(
    var: &str,
    lattice: ExponentLattice,
    s: &PuiseuxSeries<C>,
) -> TranseriesExpansion<C> {
    let order = s
        .order()
        .value()
        .map_or(f64::INFINITY, |o| o.to_f64().unwrap_or(f64::INFINITY));
    let mut out = TranseriesExpansion::new(var, lattice, order);
    for (e, c) in s.terms() {
        out.add_term(LatticeExp::new(e, 0), 0, c.clone());
    }
    out
}

/// Coefficient of `u^e (log u)^m`: zero when absent below the order, an
/// error at or beyond it.
pub fn tx_coeff<C: Coeff>(
    a: &TranseriesExpansion<C>,
    proto: &C,
    e: LatticeExp,
    m: u32,
) -> Result<C> {
    let e = a.lattice.normalize(e);
    let v = a.numeric(e);
    if v >= a.order {
        return Err(Error::Truncated {
            exp: format!("{e} (log^{m})"),
            order: format!("{}", a.order),
        });
    }
    Ok(a.terms
        .get(&(e, m))
        .cloned()
        .unwrap_or_else(|| proto.zero_like()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Alg;

    fn lat() -> ExponentLattice {
        ExponentLattice::irrational("rho", Float::with_val(128, 1.7))
    }

    #[test]
    fn lattice_addition_and_logs() {
        let mut a = TranseriesExpansion::new("u", lat(), 10.0);
        a.add_term(LatticeExp::new(Rational64::from(0), 1), 0, Alg::from_i64(1));
        let mut b = TranseriesExpansion::new("u", lat(), 10.0);
        b.add_term(LatticeExp::new(Rational64::from(1), 0), 1, Alg::from_i64(1));
        let c = tx_mul(&a, &b).unwrap();
        let e = LatticeExp::new(Rational64::from(1), 1);
        assert_eq!(tx_coeff(&c, &Alg::zero(), e, 1).unwrap(), Alg::from_i64(1));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn log_free_product_stays_log_free() {
        let mut a = TranseriesExpansion::new("u", lat(), 10.0);
        a.add_term(
            LatticeExp::new(Rational64::new(1, 2), 0),
            0,
            Alg::from_i64(3),
        );
        let c = tx_mul(&a, &a).unwrap();
        assert!(c.terms().all(|(_, m, _)| m == 0));
    }

    #[test]
    fn rational_rho_normalizes() {
        let l = ExponentLattice::rational("rho", 3, 2);
        let mut a: TranseriesExpansion<Alg> = TranseriesExpansion::new("u", l, 10.0);
        a.add_term(LatticeExp::new(Rational64::from(0), 2), 0, Alg::from_i64(1));
        let (e, _, _) = a.terms().next().unwrap();
        assert_eq!(e, LatticeExp::new(Rational64::from(3), 0));
    }

    #[test]
    fn mismatched_rho_rejected() {
        let a: TranseriesExpansion<Alg> = TranseriesExpansion::new("u", lat(), 1.0);
        let b = TranseriesExpansion::new(
            "u",
            ExponentLattice::irrational("rho", Float::with_val(128, 1.8)),
            1.0,
        );
        assert!(matches!(tx_mul(&a, &b), Err(Error::RingMismatch)));
    }

    #[test]
    fn reading_beyond_order_is_an_error() {
        let a: TranseriesExpansion<Alg> = TranseriesExpansion::new("u", lat(), 2.0);
        assert!(tx_coeff(&a, &Alg::zero(), LatticeExp::new(Rational64::from(1), 1), 0).is_err());
        assert!(
            tx_coeff(&a, &Alg::zero(), LatticeExp::new(Rational64::from(1), 0), 0)
                .unwrap()
                .is_zero()
        );
    }
}
