//! Kreweras walks (steps W, S, NE): theta-function data at `t = 0` and at the
//! critical point `t = 1/3`, plus the algebraic solution as a cross-check.
//!
//! Conventions: `q = e^{iπτ}`, `γ = πτ/3`, `θ₃ = θ(·|τ/3)` (nome `q^{1/3}`).
//! Near criticality `q̂` is the dual nome and `ε = 1/3 − t`.

use num_rational::Rational64;
use rug::Rational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::Coeff;
use crate::series::{r64, Order, PuiseuxSeries};
use crate::theta::{theta_q_series, NomeArgument, ThetaRing};

type Ps<C> = PuiseuxSeries<C>;

fn rat(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn mono<C: Coeff>(p: &C, e: Rational64) -> Ps<C> {
    Ps::monomial(p.one_like(), e, Order::Exact)
}

fn cst<C: Coeff>(p: &C, r: Rational) -> Ps<C> {
    Ps::constant(p.from_rational_like(&r), Order::Exact)
}

fn gamma() -> NomeArgument {
    NomeArgument::tau(r64(1, 3))
}

fn th<C: ThetaRing>(p: &C, arg: NomeArgument, d: u32, oq: Rational64) -> Result<Ps<C>> {
    theta_q_series(p, &arg, d, oq)
}

/// Retry `f` with growing internal order until its output is known below `target`.
fn escalate<C: Coeff>(
    start: Rational64,
    target: Rational64,
    f: impl Fn(Rational64) -> Result<Ps<C>>,
) -> Result<Ps<C>> {
    let mut o = start;
    for _ in 0..12 {
        let s = f(o)?;
        if s.order().value().is_none_or(|v| v >= target) {
            return Ok(s.truncate(Order::At(target)));
        }
        o += Rational64::from(1);
    }
    Err(Error::InvalidArgument(format!(
        "could not reach truncation order {target}"
    )))
}

/// `t = e^{−iγ/3} θ'(0) / (4iθ(γ) + 6θ'(γ))` as a series in `q`, computed
/// from theta series truncated at `q^{oq}`.
pub fn t_of_q_raw<C: ThetaRing>(p: &C, oq: Rational64) -> Result<Ps<C>> {
    let z = NomeArgument::zero();
    let num = th(p, z, 1, oq)?;
    let i4 = p.imag_unit().mul_int(4);
    let den = th(p, gamma(), 0, oq)?
        .scale(&i4)
        .add(&th(p, gamma(), 1, oq)?.scale(&p.from_int_like(6)));
    Ok(mono(p, r64(-1, 9)).mul(&num.div(&den)?))
}

/// `t(q)` known below `q^{order}`.
pub fn kw_t_of_q<C: ThetaRing>(p: &C, order: Rational64) -> Result<Ps<C>> {
    escalate(order + 1, order, |o| t_of_q_raw(p, o))
}

/// `q(t)` known below `t^{order}`, by reverting `t(q) = q^{2/9}(1 + …)`.
pub fn kw_q_of_t<C: ThetaRing>(p: &C, order: i64) -> Result<Ps<C>> {
    // q = y^{9/2} with y = q^{2/9} ~ t, so t-order N needs y-order N - 7/2
    let ny = (order - 3).max(2);
    let t = kw_t_of_q(p, r64(2 * ny, 9))?;
    let q = t.reversion(Some(r64(2, 9)))?;
    Ok(q.truncate(Order::At(Rational64::from(order))))
}

/// `X(z) = e^{−4iγ/3} θ(z)θ(z−γ) / (θ(z+γ)θ(z−2γ))` and `Y(z) = X(z+γ)`.
pub fn kw_xy<C: ThetaRing>(p: &C, z: NomeArgument, oq: Rational64) -> Result<(Ps<C>, Ps<C>)> {
    let x = kw_x(p, z, oq)?;
    let y = kw_x(p, z.plus(gamma()), oq)?;
    Ok((x, y))
}

fn kw_x<C: ThetaRing>(p: &C, z: NomeArgument, oq: Rational64) -> Result<Ps<C>> {
    let g = gamma();
    let num = th(p, z, 0, oq)?.mul(&th(p, z.plus(g.neg()), 0, oq)?);
    let den = th(p, z.plus(g), 0, oq)?.mul(&th(p, z.plus(g.times(-2)), 0, oq)?);
    if den.is_zero_series() {
        return Err(Error::Pole(format!("X has a pole at {z}")));
    }
    Ok(mono(p, r64(-4, 9)).mul(&num.div(&den)?))
}

/// The invariant
/// `J(z) = −e^{−4iγ/3} θ(2γ)θ₃'(0) / (θ₃(π/2)θ'(0)) · θ₃(z+π/2)/θ₃(z)`.
pub fn kw_j<C: ThetaRing>(p: &C, z: NomeArgument, oq: Rational64) -> Result<Ps<C>> {
    let third = r64(1, 3);
    let at3 = |a: NomeArgument| a.with_scale(third);
    let half = NomeArgument::pi(r64(1, 2));
    let zero = NomeArgument::zero();
    let c = th(p, gamma().times(2), 0, oq)?.mul(&th(p, at3(zero), 1, oq)?);
    let c = c.div(&th(p, at3(half), 0, oq)?.mul(&th(p, zero, 1, oq)?))?;
    let den = th(p, at3(z), 0, oq)?;
    if den.is_zero_series() {
        return Err(Error::Pole(format!("J has a pole at {z}")));
    }
    let r = th(p, at3(z.plus(half)), 0, oq)?.div(&den)?;
    Ok(mono(p, r64(-4, 9)).mul(&c).mul(&r).neg())
}

/// `U(z) = θ(γ)/θ(π/2+γ) · θ(z+π/2+γ)/θ(z+γ)`.
pub fn kw_u<C: ThetaRing>(p: &C, z: NomeArgument, oq: Rational64) -> Result<Ps<C>> {
    let g = gamma();
    let half = NomeArgument::pi(r64(1, 2));
    let a = th(p, g, 0, oq)?.div(&th(p, half.plus(g), 0, oq)?)?;
    let b = th(p, z.plus(half).plus(g), 0, oq)?.div(&th(p, z.plus(g), 0, oq)?)?;
    Ok(a.mul(&b))
}

/// `Q(0,0)` as a series in `q`:
/// `Q = θ(2γ)² q^{8/9} / (t θ'(0)²) · [(ℓ'' − ℓ'²)/2 + θ'''(0)/(6θ'(0))
///      + θ₃''(π/2)/(2θ₃(π/2)) − θ₃'''(0)/(6θ₃'(0))]`
/// where `ℓ' = −2θ'(γ)/θ(γ) + θ'(2γ)/θ(2γ)` and `ℓ'' = −(log θ)''(2γ)`.
/// This is the `z → 0` limit of `tX(z)Q(X(z),0) = 1/(2t) − 1/X(z) − J(z)`.
pub fn q00_q_raw<C: ThetaRing>(p: &C, oq: Rational64) -> Result<Ps<C>> {
    let g = gamma();
    let g2 = g.times(2);
    let z = NomeArgument::zero();
    let third = r64(1, 3);
    let half3 = NomeArgument::pi(r64(1, 2)).with_scale(third);
    let z3 = z.with_scale(third);
    let t = t_of_q_raw(p, oq)?;
    let tg = th(p, g, 0, oq)?;
    let tg1 = th(p, g, 1, oq)?;
    let t2 = th(p, g2, 0, oq)?;
    let t21 = th(p, g2, 1, oq)?;
    let t22 = th(p, g2, 2, oq)?;
    let d1 = th(p, z, 1, oq)?;
    let d3 = th(p, z, 3, oq)?;
    let h2 = t21.div(&t2)?;
    let lp = h2.sub(&tg1.div(&tg)?.scale_rational(&Rational::from(2)));
    let lpp = t22.div(&t2)?.sub(&h2.square()).neg();
    let half = rat(1, 2);
    let mut br = lpp.sub(&lp.square()).scale_rational(&half);
    br = br.add(&d3.div(&d1)?.scale_rational(&rat(1, 6)));
    br = br.add(
        &th(p, half3, 2, oq)?
            .div(&th(p, half3, 0, oq)?)?
            .scale_rational(&half),
    );
    br = br.sub(
        &th(p, z3, 3, oq)?
            .div(&th(p, z3, 1, oq)?)?
            .scale_rational(&rat(1, 6)),
    );
    let pre = t2
        .square()
        .mul(&mono(p, r64(8, 9)))
        .div(&t.mul(&d1.square()))?;
    Ok(pre.mul(&br))
}

pub fn kw_q00_q<C: ThetaRing>(p: &C, order: Rational64) -> Result<Ps<C>> {
    escalate(order + 1, order, |o| q00_q_raw(p, o))
}

/// `Q(0,0)` as a series in `t`, known below `t^{order}`.
pub fn kw_q00_t<C: ThetaRing>(p: &C, order: i64) -> Result<Ps<C>> {
    let oq = r64(2 * order, 9) + r64(1, 3);
    let q00 = kw_q00_q(p, oq)?;
    let qt = kw_q_of_t(p, order + 4)?;
    Ok(q00
        .compose(&qt)?
        .truncate(Order::At(Rational64::from(order))))
}

/// `W = t(2 + W³)` by fixed-point iteration, known below `t^{order}`.
pub fn kw_w<C: Coeff>(p: &C, order: i64) -> Ps<C> {
    let o = Order::At(Rational64::from(order));
    let t = Ps::var(p, Order::Exact);
    let two = cst(p, Rational::from(2));
    let mut w = Ps::zero(p, Order::Exact);
    for _ in 0..order.max(1) {
        w = t.mul(&two.add(&w.pow_u(3))).truncate(o);
    }
    w.truncate(o)
}

/// `[x^j]Q(x,0)` for `j < nx` from the algebraic solution:
/// `[x^j]Q(x,0) = (−c_{j+1} W^{2j+1} + c_{j+2} W^{2j+4}) / t`,
/// `c_k = (−1)^k binom(1/2, k)`.
pub fn kw_qx0_closed<C: Coeff>(p: &C, nx: usize, nt: i64) -> Result<Vec<Ps<C>>> {
    let w = kw_w(p, nt + 1);
    let c = |k: usize| -> Rational {
        // (−1)^k binom(1/2, k)
        let mut b = Rational::from(1);
        for i in 0..k {
            b *= Rational::from((1, 2)) - Rational::from(i as i64);
            b /= Rational::from(i as i64 + 1);
        }
        if k % 2 == 1 {
            -b
        } else {
            b
        }
    };
    let tinv = Ps::monomial(p.one_like(), Rational64::from(-1), Order::Exact);
    (0..nx)
        .map(|j| {
            let a = w.pow_u(2 * j as u64 + 1).scale_rational(&-c(j + 1));
            let b = w.pow_u(2 * j as u64 + 4).scale_rational(&c(j + 2));
            Ok(a.add(&b)
                .mul(&tinv)
                .truncate(Order::At(Rational64::from(nt))))
        })
        .collect()
}

/// Algebraic `Q(x,0) = (1/(xt))(1/(2t) − 1/x − (1/W − 1/x)√(1 − xW²))`
/// evaluated at series `x`, `t`, `W` in a common variable.
pub fn kw_qx0_at<C: Coeff>(x: &Ps<C>, t: &Ps<C>, w: &Ps<C>) -> Result<Ps<C>> {
    let p = x.proto().clone();
    let one = Ps::one(&p);
    let xi = x.inv()?;
    let ti = t.inv()?;
    let root = one.sub(&x.mul(&w.square())).sqrt()?;
    let inner = ti
        .scale_rational(&rat(1, 2))
        .sub(&xi)
        .sub(&w.inv()?.sub(&xi).mul(&root));
    Ok(xi.mul(&ti).mul(&inner))
}

/// `t(q̂) = θ̂'(0) / (6 θ̂'(π/3))` in the dual nome.
pub fn t_of_qhat_raw<C: ThetaRing>(p: &C, oq: Rational64) -> Result<Ps<C>> {
    let num = th(p, NomeArgument::zero().hatted(), 1, oq)?;
    let den = th(p, NomeArgument::pi(r64(1, 3)).hatted(), 1, oq)?;
    num.div(&den.scale(&p.from_int_like(6)))
}

/// `q̂` as a series in `ε^{1/2}`, `ε = 1/3 − t`, known below `ε^{order}`.
pub fn kw_qhat_of_t<C: ThetaRing>(p: &C, order: Rational64) -> Result<Ps<C>> {
    // q̂ ~ ε^{1/2}/√3; q̂-order 2·order + 1 suffices
    let oq = order * 2 + 2;
    let t = t_of_qhat_raw(p, oq)?;
    let eps = cst(p, rat(1, 3)).sub(&t);
    Ok(eps
        .reversion(Some(Rational64::from(2)))?
        .truncate(Order::At(order)))
}

/// `Q(0,0)` in the dual nome:
/// `Q = θ̂(π/3)² / (t θ̂'(0)²) · B̂` with `β = π/3`, `ĥ = θ̂'/θ̂`, `ĝ = ĥ'`,
/// `B̂ = −ĝ(2β)/2 − (ĥ(2β) − 2ĥ(β))²/2 + θ̂'''(0)/(6θ̂'(0)) + (9/2)ĝ₃(s) + (9/2)(ĥ₃(s) − i)²
///      − (3/2)θ̂₃'''(0)/θ̂₃'(0)`,
/// where the index 3 means nome `q̂³` and `s = (3i/2) log q̂`.
pub fn q00_qhat_raw<C: ThetaRing>(p: &C, oq: Rational64) -> Result<Ps<C>> {
    let b = NomeArgument::pi(r64(1, 3)).hatted();
    let b2 = b.times(2);
    let z = NomeArgument::zero().hatted();
    let s = NomeArgument::tau(r64(-3, 2))
        .hatted()
        .with_scale(Rational64::from(3));
    let z3 = z.with_scale(Rational64::from(3));
    let logd = |a: NomeArgument| -> Result<(Ps<C>, Ps<C>)> {
        let f = th(p, a, 0, oq)?;
        let h = th(p, a, 1, oq)?.div(&f)?;
        let g = th(p, a, 2, oq)?.div(&f)?.sub(&h.square());
        Ok((h, g))
    };
    let (hb, _) = logd(b)?;
    let (hb2, gb2) = logd(b2)?;
    let (hs, gs) = logd(s)?;
    let d1 = th(p, z, 1, oq)?;
    let d3 = th(p, z, 3, oq)?;
    let i = Ps::constant(p.imag_unit(), Order::Exact);
    let half = rat(1, 2);
    let nine_half = rat(9, 2);
    let mut bh = gb2.scale_rational(&-half.clone());
    bh = bh.sub(
        &hb2.sub(&hb.scale_rational(&Rational::from(2)))
            .square()
            .scale_rational(&half),
    );
    bh = bh.add(&d3.div(&d1)?.scale_rational(&rat(1, 6)));
    bh = bh.add(&gs.scale_rational(&nine_half));
    bh = bh.add(&hs.sub(&i).square().scale_rational(&nine_half));
    bh = bh.sub(
        &th(p, z3, 3, oq)?
            .div(&th(p, z3, 1, oq)?)?
            .scale_rational(&rat(3, 2)),
    );
    let t = t_of_qhat_raw(p, oq)?;
    let pre = th(p, b, 0, oq)?.square().div(&t.mul(&d1.square()))?;
    Ok(pre.mul(&bh))
}

/// `Q(0,0)` as a series in `ε^{1/2}`, `ε = 1/3 − t`, known below `ε^{order}`.
pub fn kw_q00_critical<C: ThetaRing>(p: &C, order: Rational64) -> Result<Ps<C>> {
    let oqh = order * 2 + 1;
    let q = escalate(oqh + 1, oqh, |o| q00_qhat_raw(p, o))?;
    let qh = kw_qhat_of_t(p, order + 1)?;
    Ok(q.compose(&qh)?.truncate(Order::At(order)))
}

/// The algebraic solution expanded at `t = 1/3` independently of theta
/// functions: `W = 1 − √3 s + …` with `t = 1/3 − s²`, then
/// `Q(0,0) = (4W − W⁴)/(8t)`. Returned as a series in `ε = s²`.
pub fn kw_q00_critical_algebraic<C: Coeff>(p: &C, order: Rational64) -> Result<Ps<C>> {
    let n = (order * 2).ceil().to_integer() as usize + 3;
    let sqrt3 = p.from_int_like(3).try_sqrt()?;
    let s = Ps::var(p, Order::Exact);
    let t = cst(p, rat(1, 3)).sub(&s.square());
    let two = cst(p, Rational::from(2));
    // W − t(2 + W³) = 0; the slot k is fixed at order s^{k+1}
    let w = crate::series::solve_coefficientwise(&[p.one_like(), sqrt3.neg()], p, 1, n, |w| {
        Ok(w.sub(&t.mul(&two.add(&w.pow_u(3)))))
    })?;
    let q = w.scale_rational(&Rational::from(4)).sub(&w.pow_u(4));
    let q = q.div(&t.scale_rational(&Rational::from(8)).truncate(w.order()))?;
    let eps_half = Ps::monomial(p.one_like(), r64(1, 2), Order::Exact);
    Ok(q.compose(&eps_half)?.truncate(Order::At(order)))
}

/// Transfer of the critical expansion to coefficient asymptotics
/// `[t^{3n}]Q(0,0) ~ A · 27^n · n^{−5/2}`.
#[derive(Clone, Debug, Serialize)]
pub struct KrewerasAsymptotics {
    pub amplitude: f64,
    pub exponent: f64,
    pub growth_per_step: f64,
    pub period: u32,
    /// coefficient of `(1/3 − t)^{3/2}` it was derived from
    pub singular_coeff: f64,
}

impl KrewerasAsymptotics {
    /// Predicted `[t^{3n}]Q(0,0)`.
    pub fn predict(&self, n: u64) -> f64 {
        let nf = n as f64;
        self.amplitude * (3.0 * nf * self.growth_per_step.ln()).exp() * nf.powf(self.exponent)
    }
}

/// `c ε^{3/2} = c 3^{−3/2}(1 − 3t)^{3/2}`; `[t^N](1−3t)^{3/2} ~ 3^N N^{−5/2}/Γ(−3/2)`,
/// and the three singularities `ω^k/3` add up on `N = 3n`.
pub fn kw_transfer_asymptotics<C: ThetaRing>(p: &C) -> Result<KrewerasAsymptotics> {
    let crit = kw_q00_critical(p, r64(2, 1))?;
    let c = coeff_f64(&crit.coeff(r64(3, 2))?);
    let gamma_m32 = 4.0 * std::f64::consts::PI.sqrt() / 3.0;
    let a = c * 3f64.powi(-3) / gamma_m32;
    Ok(KrewerasAsymptotics {
        amplitude: a,
        exponent: -2.5,
        growth_per_step: 3.0,
        period: 3,
        singular_coeff: c,
    })
}

/// Real part of a coefficient as `f64`.
pub fn coeff_f64<C: Coeff>(c: &C) -> f64 {
    c.to_complex(64).map_or(f64::NAN, |z| z.re.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Alg;

    fn q(n: i64, d: i64) -> Alg {
        Alg::rational(rat(n, d))
    }

    #[test]
    fn q_of_t_prefix() {
        let qt = kw_q_of_t(&Alg::zero(), 15).unwrap();
        assert_eq!(qt.coeff(r64(9, 2)).unwrap(), q(1, 1));
        assert_eq!(qt.coeff(r64(15, 2)).unwrap(), q(45, 2));
        assert_eq!(qt.coeff(r64(21, 2)).unwrap(), q(4023, 8));
        assert_eq!(qt.coeff(r64(27, 2)).unwrap(), q(184341, 16));
    }

    #[test]
    fn q00_taylor_prefix() {
        let s = kw_q00_t(&Alg::zero(), 10).unwrap();
        for (e, v) in [(0, 1), (3, 2), (6, 16), (9, 192)] {
            assert_eq!(s.coeff_i(e).unwrap(), q(v, 1), "t^{e}");
        }
        assert!(s.coeff_i(1).unwrap().is_zero());
    }

    #[test]
    fn w_fixed_point() {
        let w = kw_w(&Alg::zero(), 8);
        assert_eq!(w.coeff_i(1).unwrap(), q(2, 1));
        assert_eq!(w.coeff_i(4).unwrap(), q(8, 1));
        assert_eq!(w.coeff_i(7).unwrap(), q(96, 1));
    }

    #[test]
    fn critical_matches_algebraic() {
        let p = Alg::zero();
        let a = kw_q00_critical_algebraic(&p, r64(3, 1)).unwrap();
        let c = kw_q00_critical(&p, r64(3, 1)).unwrap();
        for k in 0..6 {
            let e = r64(k, 2);
            assert_eq!(a.coeff(e).unwrap(), c.coeff(e).unwrap(), "exponent {e}");
        }
        assert_eq!(c.coeff(r64(0, 1)).unwrap(), q(9, 8));
        assert!(c.coeff(r64(1, 2)).unwrap().is_zero());
    }
}
