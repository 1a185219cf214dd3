//! The weighted model with steps N, E, S, W (weight 1) and NE (weight `a`).
//!
//! Taylor side: with `s = e^{iγ}` the nome is a series `q(s)`; we carry
//! `P = q²/s⁷` (so `P(0) = a`) because every theta quotient below only needs
//! `q^{n(n+1)}` once the common `q^{1/4}` is cancelled.
//!
//! Critical side: `w = q̂²`, `β = β₀ + δ(w)`, `u = 1 − t/t_c`, and the extra
//! nome `Q' = q̂^{π/β}` carries the logarithms. The bivariate series in the
//! boundary variable `ξ` (outer) and `w` (inner) use the convention
//! `X(ξ) = d θ(ξ)θ(ξ−β) / (θ(ξ+β)θ(ξ−2β))`, so at `q̂ = 0`
//! `x = k sin ξ sin(ξ−β₀) / (sin(ξ−2β₀) sin(ξ+β₀))`.

use num_rational::Rational64;
use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::{float_to_string, Cf, Coeff};
use crate::series::{Order, PuiseuxSeries};
use crate::theta::{theta_log_nome, theta_q_series, NomeArgument, ThetaRing};
use crate::transeries::{ExponentLattice, LatticeExp, TranseriesExpansion};

type Ps<C> = PuiseuxSeries<C>;
/// Series in an outer variable with coefficients that are series in `w`.
pub type Bi = PuiseuxSeries<PuiseuxSeries<Cf>>;

fn fl<T>(p: u32, x: T) -> Float
where
    Float: rug::Assign<T>,
{
    Float::with_val(p, x)
}

fn pi(p: u32) -> Float {
    Float::with_val(p, Constant::Pi)
}

fn at(n: i64) -> Order {
    Order::At(Rational64::from(n))
}

// ---------------------------------------------------------------------------
// Closed-form parameters.

/// The root `k ∈ (0,1)` of `a k³ = 1 − k²`.
pub fn am_k_from_a(a: &Float) -> Result<Float> {
    if *a <= 0 {
        return Err(Error::InvalidArgument(format!(
            "a must be positive, got {}",
            a.to_f64()
        )));
    }
    let p = a.prec();
    let f = |k: &Float| -> Float { fl(p, a * fl(p, k.pow(3u32))) + fl(p, k * k) - 1u32 };
    let (mut lo, mut hi) = (fl(p, 0), fl(p, 1));
    for _ in 0..60 {
        let mid = fl(p, &lo + &hi) / 2u32;
        if f(&mid).is_sign_negative() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut k = fl(p, &lo + &hi) / 2u32;
    for _ in 0..64 {
        let df = fl(p, 3u32 * fl(p, a * fl(p, &k * &k))) + fl(p, 2u32 * &k);
        let step = f(&k) / df;
        k -= &step;
        if step.is_zero() || step.get_exp().is_none_or(|e| e < -(p as i32) + 2) {
            break;
        }
    }
    Ok(k)
}

/// Derived constants of the model for a given `a`.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub prec: u32,
    pub a: Float,
    pub k: Float,
    /// `½ arccos((k²−1)/2)`
    pub beta0: Float,
    /// `½ k²(2k²−1)(1−k²)√((1+k²)(3−k²))`
    pub beta1: Float,
    pub t_c: Float,
    /// `π/(2β₀)`
    pub rho: Float,
    /// `(k²+3)/((k²+1)²(3−k²)³)`, the leading coefficient of `q̂²` in `1 − t/t_c`
    pub big_b: Float,
    /// amplitude of the leading asymptotics
    pub c: Float,
}

impl ModelParams {
    pub fn new(a: &Float) -> Result<Self> {
        let p = a.prec();
        let k = am_k_from_a(a)?;
        let k2 = fl(p, &k * &k);
        let beta0 = fl(p, (fl(p, &k2 - 1u32) / 2u32).acos_ref()) / 2u32;
        let s = fl(p, fl(p, 1u32 + &k2) * fl(p, 3u32 - &k2)).sqrt();
        let beta1 = fl(p, &k2 * fl(p, fl(p, 2u32 * &k2) - 1u32)) * fl(p, 1u32 - &k2) * &s / 2u32;
        let t_c = fl(p, &k / fl(p, &k2 + 3u32));
        let rho = pi(p) / fl(p, 2u32 * &beta0);
        let big_b = fl(p, &k2 + 3u32) / (fl(p, 1u32 + &k2).square() * fl(p, 3u32 - &k2).pow(3u32));
        let g = fl(p, -&rho).gamma();
        let c = fl(p, 2u32 * pi(p)) * &k * fl(p, 3u32 + &k2) * &s
            / (fl(p, &beta0 * fl(p, 1u32 - &k2)) * g)
            * fl(p, (&big_b).pow(&rho));
        Ok(ModelParams {
            prec: p,
            a: a.clone(),
            k,
            beta0,
            beta1,
            t_c,
            rho,
            big_b,
            c,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "a": float_to_string(&self.a),
            "k": float_to_string(&self.k),
            "beta0": float_to_string(&self.beta0),
            "beta1": float_to_string(&self.beta1),
            "t_c": float_to_string(&self.t_c),
            "rho": float_to_string(&self.rho),
            "B": float_to_string(&self.big_b),
            "C": float_to_string(&self.c),
        })
    }
}

/// Interior critical point of `S(x,y) = x + y + 1/x + 1/y + axy` and the
/// angle `θ = arccos(−S_xy/√(S_xx S_yy))` there.
#[derive(Clone, Debug)]
pub struct Saddle {
    pub x0: Float,
    pub y0: Float,
    pub theta: Float,
    pub two_beta0: Float,
    pub gradient: [Float; 2],
}

pub fn am_saddle(a: &Float) -> Result<Saddle> {
    let mp = ModelParams::new(a)?;
    let p = mp.prec;
    let (x, y) = (mp.k.clone(), mp.k.clone());
    let gx = fl(p, 1u32 - fl(p, 1u32 / fl(p, &x * &x))) + fl(p, a * &y);
    let gy = fl(p, 1u32 - fl(p, 1u32 / fl(p, &y * &y))) + fl(p, a * &x);
    let sxx = fl(p, 2u32 / fl(p, (&x).pow(3u32)));
    let syy = fl(p, 2u32 / fl(p, (&y).pow(3u32)));
    let theta = (fl(p, -a) / fl(p, &sxx * &syy).sqrt()).acos();
    Ok(Saddle {
        x0: x,
        y0: y,
        theta,
        two_beta0: fl(p, 2u32 * &mp.beta0),
        gradient: [gx, gy],
    })
}

// ---------------------------------------------------------------------------
// Taylor side: series in s.

/// `θ^{(d)}(kγ | τ)/q^{1/4}` in `s`, given the powers `P^j`, known below `s^{order}`.
fn theta_s<C: ThetaRing>(pp: &mut Vec<Ps<C>>, k: i64, d: u32, order: i64) -> Ps<C> {
    let proto = pp[0].proto().clone();
    let i_d = proto.imag_unit().pow_u(d as u64);
    let mi_d = proto.imag_unit().neg().pow_u(d as u64);
    let mut acc = Ps::zero(&proto, at(order));
    let mut n: i64 = 0;
    loop {
        let tn = n * (n + 1) / 2;
        let m = 2 * n + 1;
        let base = 7 * tn;
        if base - k * m >= order && 7 * n + 3 >= 2 * k {
            break;
        }
        while pp.len() <= tn as usize {
            let next = pp.last().unwrap().mul(&pp[1]);
            pp.push(next);
        }
        let md = proto.from_int_like(m).pow_u(d as u64);
        let sign = if n % 2 == 0 { 1 } else { -1 };
        let cp = i_d.mul(&md).mul_int(sign);
        let cm = mi_d.mul(&md).mul_int(-sign);
        let lp = Ps::from_terms(
            &proto,
            vec![
                (Rational64::from(base + k * m), cp),
                (Rational64::from(base - k * m), cm),
            ],
            Order::Exact,
        );
        acc = acc.add(&lp.mul(&pp[tn as usize]).truncate(at(order)));
        n += 1;
    }
    acc.truncate(at(order))
}

/// Theta values on the Taylor side for a fixed `P(s)`.
struct SThetas<C: Coeff> {
    pp: Vec<Ps<C>>,
}

impl<C: ThetaRing> SThetas<C> {
    fn new(p: &Ps<C>) -> Self {
        SThetas {
            pp: vec![Ps::one(p.proto()), p.clone()],
        }
    }
    /// `θ^{(d)}(kγ)/q^{1/4}` with `rel` slots past its leading exponent.
    fn th(&mut self, k: i64, d: u32, rel: i64) -> Ps<C> {
        let v = match (k, d % 2) {
            (0, _) => 0,
            (4, 0) => -5,
            _ => -k.min(3) - if k == 4 { 2 } else { 0 },
        };
        theta_s(&mut self.pp, k, d, v + rel)
    }
}

fn p_residual<C: ThetaRing>(a: &C, p: &Ps<C>, rel: i64) -> Ps<C> {
    let mut th = SThetas::new(p);
    let t1 = th.th(1, 0, rel);
    let t2 = th.th(2, 0, rel);
    let t3 = th.th(3, 0, rel);
    let t4 = th.th(4, 0, rel);
    let lhs = t2.square().mul(&t3.pow_u(3)).scale(&a.mul(a));
    lhs.sub(&t1.pow_u(3).mul(&t4.square()))
}

/// `P = q²/s⁷` with `n` known coefficients, from
/// `a² θ(2γ)²θ(3γ)³ = θ(γ)³θ(4γ)²`.
pub fn am_p_of_s<C: ThetaRing>(a: &C, n: usize) -> Result<Ps<C>> {
    crate::series::solve_coefficientwise(std::slice::from_ref(a), a, 1, n, |p| {
        Ok(p_residual(a, p, n as i64 + 1))
    })
}

/// `q(s) = s^{7/2} P(s)^{1/2}`, known below `s^{7/2 + n}`.
pub fn am_q_of_s<C: ThetaRing>(a: &C, n: usize) -> Result<Ps<C>> {
    let p = am_p_of_s(a, n)?;
    Ok(p.sqrt()?.shift(Rational64::new(7, 2)))
}

/// Series data on the Taylor side.
pub struct TaylorData<C: Coeff> {
    pub p: Ps<C>,
    /// `c(s)`, the positive branch of `c² = θ(3γ)/θ(γ)`
    pub c: Ps<C>,
    pub t: Ps<C>,
    /// residual of `a c³ = −θ(4γ)/θ(2γ)`
    pub c_residual: Ps<C>,
    /// `Q(0,0)` as a series in `s`
    pub q00: Ps<C>,
}

/// Everything on the Taylor side with `n` slots of relative precision.
pub fn am_taylor_data<C: ThetaRing>(a: &C, n: usize) -> Result<TaylorData<C>> {
    let rel = n as i64 + 8;
    let p = am_p_of_s(a, n + 8)?;
    let mut th = SThetas::new(&p);
    let t1 = th.th(1, 0, rel);
    let t2 = th.th(2, 0, rel);
    let t3 = th.th(3, 0, rel);
    let t4 = th.th(4, 0, rel);
    let d01 = th.th(0, 1, rel);
    let d03 = th.th(0, 3, rel);
    let d11 = th.th(1, 1, rel);
    let d21 = th.th(2, 1, rel);
    let d22 = th.th(2, 2, rel);
    let c = t3.div(&t1)?.sqrt()?;
    let c_residual = c.pow_u(3).scale(a).add(&t4.div(&t2)?);
    let rhs = d11
        .mul(&t2)
        .div(&d01.mul(&t1))?
        .mul_int(4)
        .sub(&d21.div(&d01)?.mul_int(2));
    let t = c.div(&rhs)?;
    // nome s pieces: θ̃ = θ(· | γ/π)
    let half = NomeArgument::pi(Rational64::new(1, 2));
    let zero = NomeArgument::zero();
    let o = Rational64::from(rel + 1);
    let tl = |arg: &NomeArgument, d: u32| theta_q_series(a, arg, d, o);
    let h0 = tl(&half, 0)?;
    let h2 = tl(&half, 2)?;
    let z1 = tl(&zero, 1)?;
    let z3 = tl(&zero, 3)?;
    let l1 = d11.div(&t1)?;
    let l2 = d21.div(&t2)?;
    let br = l1
        .mul(&l2)
        .mul_int(2)
        .sub(&l1.square().mul_int(2))
        .sub(&d22.div(&t2)?.mul_rational(&Rational::from((1, 2))))
        .add(&d03.div(&d01)?.mul_rational(&Rational::from((1, 6))))
        .add(&h2.div(&h0)?.mul_rational(&Rational::from((1, 2))))
        .sub(&z3.div(&z1)?.mul_rational(&Rational::from((1, 6))));
    let lhs = t2.square().div(&c.square().mul(&d01.square()))?.mul(&br);
    let q00 = lhs.sub(&Ps::one(a)).div(&t.scale(a))?;
    Ok(TaylorData {
        p,
        c,
        t,
        c_residual,
        q00,
    })
}

/// `(t(s), c(s))`.
pub fn am_t_c_of_s<C: ThetaRing>(a: &C, n: usize) -> Result<(Ps<C>, Ps<C>)> {
    let d = am_taylor_data(a, n)?;
    Ok((
        d.t.truncate(at(n as i64 + 1)),
        d.c.truncate(at(n as i64 - 1)),
    ))
}

/// `Q(0,0)` as a series in `t`, known below `t^{n+1}`.
pub fn am_q00_taylor<C: ThetaRing>(a: &C, n: usize) -> Result<Ps<C>> {
    let target = at(n as i64 + 1);
    let mut extra = 2usize;
    for _ in 0..6 {
        let d = am_taylor_data(a, n + extra)?;
        let s_of_t = d.t.reversion(None)?;
        let q = d.q00.compose(&s_of_t)?;
        if q.order()
            .value()
            .is_none_or(|o| o >= Rational64::from(n as i64 + 1))
        {
            return Ok(q.truncate(target));
        }
        extra += 4;
    }
    Err(Error::InvalidArgument(format!("could not reach t^{n}")))
}

// ---------------------------------------------------------------------------
// Numeric parameters (c, γ, τ) at a given t.

/// Solution of the parametrisation system at one value of `t`.
#[derive(Clone, Debug)]
pub struct ParamTriple {
    pub t: Float,
    pub q: Float,
    /// `log q`, kept separately since `q` approaches 1 only logarithmically
    pub log_q: Float,
    /// `γ/(πτ)`
    pub v: Float,
    pub c: Float,
    /// residuals of the `a²` relation and of `t`
    pub residuals: [f64; 2],
}

impl ParamTriple {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "t": float_to_string(&self.t),
            "q": float_to_string(&self.q),
            "gamma_over_pi_tau": float_to_string(&self.v),
            "c": float_to_string(&self.c),
            "residuals": self.residuals,
        })
    }
}

/// Bracketed root finding (Illinois variant of regula falsi).
fn illinois(
    mut lo: Float,
    mut hi: Float,
    f: impl Fn(&Float) -> Float,
    tol_bits: i32,
    max_iter: usize,
) -> Result<Float> {
    let p = lo.prec();
    let mut flo = f(&lo);
    let mut fhi = f(&hi);
    if flo.is_sign_negative() == fhi.is_sign_negative() {
        return Err(Error::InvalidArgument("root not bracketed".into()));
    }
    let mut side = 0i32;
    for _ in 0..max_iter {
        let den = fl(p, &fhi - &flo);
        let mut mid = fl(p, &lo - fl(p, &flo * fl(p, &hi - &lo)) / den);
        if !(mid > lo && mid < hi) {
            mid = fl(p, &lo + &hi) / 2u32;
        }
        let fm = f(&mid);
        let width = fl(p, &hi - &lo);
        if fm.is_zero() || width.get_exp().is_none_or(|e| e < -tol_bits) {
            return Ok(mid);
        }
        if fm.is_sign_negative() == flo.is_sign_negative() {
            lo = mid;
            flo = fm;
            if side == -1 {
                fhi /= 2u32;
            }
            side = -1;
        } else {
            hi = mid;
            fhi = fm;
            if side == 1 {
                flo /= 2u32;
            }
            side = 1;
        }
    }
    let w = fl(p, &hi - &lo).to_f64();
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: w,
    })
}

fn theta_re(z: &Cf, lq: &Cf, d: u32) -> Cf {
    theta_log_nome(z, lq, d)
}

/// `(v, c, t)` from `log q` on the direct side (`q ≤ e^{−π}`).
fn direct_side(a: &Float, lq: &Float) -> Result<(Float, Float, Float, f64)> {
    let p = lq.prec();
    let lqc = Cf::real(lq.clone());
    let aq = fl(p, -lq);
    let arg = |v: &Float, k: u32| Cf::from_parts(fl(p, 0), fl(p, v * fl(p, &aq * k)));
    let a2 = fl(p, a * a);
    let rel = |v: &Float| -> Float {
        let t = |k| theta_re(&arg(v, k), &lqc, 0);
        let num = t(1).pow_u(3).mul(&t(4).pow_u(2));
        let den = t(2).pow_u(2).mul(&t(3).pow_u(3));
        fl(p, &num.mul(&den.try_inv().unwrap()).re - &a2)
    };
    let v = illinois(
        fl(p, 0.25),
        fl(p, 1.0 / 3.0),
        rel,
        p as i32 - 8,
        4 * p as usize,
    )?;
    let t = |k, d| theta_re(&arg(&v, k), &lqc, d);
    let c = t(3, 0).mul(&t(1, 0).try_inv()?).re.sqrt();
    let cot = t(1, 1)
        .mul(&t(2, 0))
        .mul(&t(0, 1).mul(&t(1, 0)).try_inv()?)
        .mul_int(4)
        .sub(&t(2, 1).mul(&t(0, 1).try_inv()?).mul_int(2));
    let tt = fl(p, &c / &cot.re);
    let r = rel(&v).to_f64().abs();
    Ok((v, c, tt, r))
}

/// `(v, c, t)` from `log q̂` on the dual side.
fn dual_side(a: &Float, lqh: &Float) -> Result<(Float, Float, Float, f64)> {
    let p = lqh.prec();
    let lqc = Cf::real(lqh.clone());
    let a2 = fl(p, a * a);
    let th = |x: Float, d| theta_re(&Cf::real(x), &lqc, d);
    let rel = |b: &Float| -> Float {
        let t = |k: u32| th(fl(p, b * k), 0);
        let num = t(1).pow_u(3).mul(&t(4).pow_u(2));
        let den = t(2).pow_u(2).mul(&t(3).pow_u(3));
        fl(p, &num.mul(&den.try_inv().unwrap()).re - &a2)
    };
    let pp = pi(p);
    let beta = illinois(
        fl(p, &pp / 4u32),
        fl(p, &pp / 3u32),
        rel,
        p as i32 - 8,
        4 * p as usize,
    )?;
    let t = |k: u32| th(fl(p, &beta * k), 0);
    let r = t(1).pow_u(2).mul(&t(5)).mul(&t(3).pow_u(3).try_inv()?).re;
    let inv_t = fl(p, -a) - fl(p, 1u32 / a) - fl(p, &r / a);
    let tt = fl(p, 1u32 / &inv_t);
    let d = t(3).mul(&t(1).try_inv()?).re.sqrt();
    // c = d exp(−4β²/log q̂)
    let c = d * fl(p, fl(p, -4i32 * fl(p, &beta * &beta)) / lqh).exp();
    let v = fl(p, &beta / &pp);
    let res = rel(&beta).to_f64().abs();
    Ok((v, c, tt, res))
}

/// Solve for `(q, γ/(πτ), c)` at `0 < t < t_c`. The nome is parametrised by
/// `σ ∈ (0,1)` with `log q = −π(1−σ)/σ`; for `σ > ½` the dual nome
/// `log q̂ = −πσ/(1−σ)` is used, so no theta sum has a nome above `e^{−π}`.
pub fn am_solve_params_numeric(a: &Float, t: &Float) -> Result<ParamTriple> {
    let p = a.prec().max(t.prec());
    let mp = ModelParams::new(a)?;
    if *t <= 0 || *t >= mp.t_c {
        return Err(Error::InvalidArgument(format!(
            "t = {} outside (0, t_c)",
            t.to_f64()
        )));
    }
    let eval = |sigma: &Float| -> Result<(Float, Float, Float, f64)> {
        let one_m = fl(p, 1u32 - sigma);
        if *sigma <= 0.5 {
            let lq = fl(p, -pi(p) * &one_m) / sigma;
            direct_side(a, &lq)
        } else {
            let lqh = fl(p, -pi(p) * sigma) / &one_m;
            dual_side(a, &lqh)
        }
    };
    let f = |sigma: &Float| -> Float {
        match eval(sigma) {
            Ok((_, _, tt, _)) => fl(p, &tt - t),
            Err(_) => fl(p, f64::NAN),
        }
    };
    let sigma = illinois(
        fl(p, 1e-3),
        fl(p, 1.0 - 1e-3),
        f,
        p as i32 - 16,
        8 * p as usize,
    )?;
    let (v, c, tt, r) = eval(&sigma)?;
    let lq = fl(p, -pi(p) * fl(p, 1u32 - &sigma)) / &sigma;
    let q = fl(p, lq.exp_ref());
    let rt = fl(p, &tt - t).to_f64().abs();
    Ok(ParamTriple {
        t: t.clone(),
        q,
        log_q: lq,
        v,
        c,
        residuals: [r, rt],
    })
}

/// `Q(0,0)` at `0 < t < t_c` from the theta display, summed numerically.
pub fn am_q00_numeric(a: &Float, t: &Float) -> Result<Float> {
    let pt = am_solve_params_numeric(a, t)?;
    let p = pt.log_q.prec();
    let lqc = Cf::real(pt.log_q.clone());
    let lsc = Cf::real(fl(p, &pt.log_q * &pt.v));
    let g = fl(p, -&pt.log_q) * &pt.v;
    let th = |k: u32, d: u32| theta_re(&Cf::from_parts(fl(p, 0), fl(p, &g * k)), &lqc, d);
    let tt = |x: Float, d: u32| theta_re(&Cf::real(x), &lsc, d);
    let ratio = |x: &Cf, y: &Cf| -> Result<Cf> { Ok(x.mul(&y.try_inv()?)) };
    let l1 = ratio(&th(1, 1), &th(1, 0))?;
    let l2 = ratio(&th(2, 1), &th(2, 0))?;
    let half_pi = fl(p, pi(p) / 2u32);
    let br = l1
        .mul(&l2)
        .mul_int(2)
        .sub(&l1.mul(&l1).mul_int(2))
        .sub(&ratio(&th(2, 2), &th(2, 0))?.mul_rational(&Rational::from((1, 2))))
        .add(&ratio(&th(0, 3), &th(0, 1))?.mul_rational(&Rational::from((1, 6))))
        .add(
            &ratio(&tt(half_pi.clone(), 2), &tt(half_pi, 0))?.mul_rational(&Rational::from((1, 2))),
        )
        .sub(&ratio(&tt(fl(p, 0), 3), &tt(fl(p, 0), 1))?.mul_rational(&Rational::from((1, 6))));
    let d01 = th(0, 1);
    let pre = ratio(
        &th(2, 0).mul(&th(2, 0)),
        &d01.mul(&d01).mul(&Cf::real(fl(p, &pt.c * &pt.c))),
    )?;
    let rhs = pre.mul(&br);
    Ok((rhs.re - 1u32) / fl(p, a * t))
}

// ---------------------------------------------------------------------------
// Critical side: series in w = q̂².

fn cf(p: u32) -> Cf {
    Cf::zero(p)
}

fn re_part(s: &Ps<Cf>) -> Ps<Cf> {
    s.map_coeffs(s.proto(), |c| Cf::real(c.re.clone()))
}

fn im_part(s: &Ps<Cf>) -> Ps<Cf> {
    s.map_coeffs(s.proto(), |c| Cf::real(c.im.clone()))
}

/// `e^{iMβ}` with `β = β₀ + δ(w)`.
fn exp_i_beta(beta0: &Float, delta: &Ps<Cf>, m: i64) -> Result<Ps<Cf>> {
    let p = beta0.prec();
    let e0 = Cf::expi(&fl(p, beta0 * m));
    let ed = delta.scale(&Cf::i(p).mul_int(m)).exp()?;
    Ok(ed.scale(&e0))
}

fn sin_mbeta(beta0: &Float, delta: &Ps<Cf>, m: i64) -> Result<Ps<Cf>> {
    Ok(im_part(&exp_i_beta(beta0, delta, m)?))
}

fn cos_mbeta(beta0: &Float, delta: &Ps<Cf>, m: i64) -> Result<Ps<Cf>> {
    Ok(re_part(&exp_i_beta(beta0, delta, m)?))
}

fn triangular(n: i64) -> i64 {
    n * (n + 1) / 2
}

fn wmono(e: i64, c: Cf) -> Ps<Cf> {
    Ps::monomial(c, Rational64::from(e), Order::Exact)
}

/// `θ(mβ, q̂)/(2i q̂^{1/4}) = Σ (−1)^n w^{n(n+1)/2} sin((2n+1)mβ)` below `w^{nw}`.
fn s_m(beta0: &Float, delta: &Ps<Cf>, m: i64, nw: usize) -> Result<Ps<Cf>> {
    let p = beta0.prec();
    let mut acc = Ps::zero(&cf(p), at(nw as i64));
    let mut n = 0i64;
    while triangular(n) < nw as i64 {
        let sgn = if n % 2 == 0 { 1 } else { -1 };
        let term = sin_mbeta(beta0, delta, (2 * n + 1) * m)?
            .mul(&wmono(triangular(n), Cf::from_f64(p, sgn as f64, 0.0)));
        acc = acc.add(&term);
        n += 1;
    }
    Ok(acc.truncate(at(nw as i64)))
}

/// `θ'(0, q̂)/(2i q̂^{1/4}) = Σ (−1)^n (2n+1) w^{n(n+1)/2}`.
fn s_prime0(p: u32, nw: usize) -> Ps<Cf> {
    let mut terms = Vec::new();
    let mut n = 0i64;
    while triangular(n) < nw as i64 {
        let sgn = if n % 2 == 0 { 1 } else { -1 };
        terms.push((
            Rational64::from(triangular(n)),
            Cf::from_f64(p, (sgn * (2 * n + 1)) as f64, 0.0),
        ));
        n += 1;
    }
    Ps::from_terms(&cf(p), terms, at(nw as i64))
}

/// Series data on the critical side, all in `w = q̂²` with `nw` slots.
#[derive(Clone, Debug)]
pub struct HatData {
    pub params: ModelParams,
    pub nw: usize,
    /// `β − β₀`
    pub delta: Ps<Cf>,
    pub two_cos_2beta: Ps<Cf>,
    pub d: Ps<Cf>,
    pub t: Ps<Cf>,
    /// `w = q̂²` as a series in `u = 1 − t/t_c`
    pub w_of_u: Ps<Cf>,
    /// `(π/(βd)) θ(2β, q̂)/θ'(0, q̂)`
    pub pref: Ps<Cf>,
}

/// Solve the `a²` relation for `β(w)` and derive `d`, `t`, `w(u)`.
pub fn am_hat_data(a: &Float, nw: usize) -> Result<HatData> {
    let mp = ModelParams::new(a)?;
    let p = mp.prec;
    let b0 = mp.beta0.clone();
    let proto = cf(p);
    let a2 = Cf::real(fl(p, a * a));
    let delta =
        crate::series::solve_coefficientwise(std::slice::from_ref(&proto), &proto, 1, nw, |dl| {
            let s1 = s_m(&b0, dl, 1, nw)?;
            let s2 = s_m(&b0, dl, 2, nw)?;
            let s3 = s_m(&b0, dl, 3, nw)?;
            let s4 = s_m(&b0, dl, 4, nw)?;
            Ok(s1
                .pow_u(3)
                .mul(&s4.square())
                .sub(&s2.square().mul(&s3.pow_u(3)).scale(&a2)))
        })?;
    let nw = slots(&delta).unwrap_or(nw);
    let two_cos_2beta = cos_mbeta(&b0, &delta, 2)?.mul_int(2);
    let s1 = s_m(&b0, &delta, 1, nw)?;
    let s2 = s_m(&b0, &delta, 2, nw)?;
    let s3 = s_m(&b0, &delta, 3, nw)?;
    let s5 = s_m(&b0, &delta, 5, nw)?;
    let d = s3.div(&s1)?.sqrt()?;
    let ac = Cf::real(a.clone());
    let ainv = ac.try_inv()?;
    let ratio = s1.square().mul(&s5).div(&s3.pow_u(3))?;
    let inv_t = Ps::constant(ac.add(&ainv).neg(), Order::Exact).sub(&ratio.scale(&ainv));
    let t = inv_t.inv()?;
    let tc = Cf::real(mp.t_c.clone());
    let eps = Ps::one(&proto).sub(&t.scale(&tc.try_inv()?));
    let w_of_u = eps.truncate(at(nw as i64)).reversion(None)?;
    let beta = delta.add(&Ps::constant(Cf::real(b0.clone()), Order::Exact));
    let pref = beta
        .mul(&d)
        .inv()?
        .scale(&Cf::real(pi(p)))
        .mul(&s2.div(&s_prime0(p, nw))?);
    Ok(HatData {
        params: mp,
        nw,
        delta,
        two_cos_2beta,
        d,
        t,
        w_of_u,
        pref,
    })
}

fn slots(s: &Ps<Cf>) -> Option<usize> {
    s.order().value().map(|o| o.to_integer() as usize)
}

impl HatData {
    pub fn beta_coeffs(&self) -> Vec<Float> {
        let p = self.params.prec;
        let mut v = vec![self.params.beta0.clone()];
        for j in 1..self.nw {
            v.push(
                self.delta
                    .coeff_i(j as i64)
                    .map(|c| c.re)
                    .unwrap_or_else(|_| fl(p, f64::NAN)),
            );
        }
        v
    }

    fn beta(&self) -> Ps<Cf> {
        self.delta.add(&Ps::constant(
            Cf::real(self.params.beta0.clone()),
            Order::Exact,
        ))
    }

    /// `t` as a series in `q̂` (even exponents only).
    pub fn t_of_qhat(&self) -> Ps<Cf> {
        in_qhat(&self.t)
    }
}

/// Re-express a series in `w = q̂²` as a series in `q̂`.
pub fn in_qhat(s: &Ps<Cf>) -> Ps<Cf> {
    let terms = s.terms().map(|(e, c)| (e * 2, c.clone())).collect();
    let o = s.order().value().map_or(Order::Exact, |o| Order::At(o * 2));
    Ps::from_terms(s.proto(), terms, o)
}

/// `(β₀, β₁, β₂, …)`.
pub fn am_beta_series(a: &Float, nw: usize) -> Result<Vec<Float>> {
    Ok(am_hat_data(a, nw)?.beta_coeffs())
}

pub fn am_t_of_qhat(a: &Float, nw: usize) -> Result<Ps<Cf>> {
    Ok(am_hat_data(a, nw)?.t_of_qhat())
}

/// `q̂²` as a series in `1 − t/t_c`.
pub fn am_qhat2_of_t(a: &Float, nw: usize) -> Result<Ps<Cf>> {
    Ok(am_hat_data(a, nw)?.w_of_u)
}

pub fn am_d_series(a: &Float, nw: usize) -> Result<Ps<Cf>> {
    Ok(am_hat_data(a, nw)?.d)
}

// ---------------------------------------------------------------------------
// Bivariate X and J.

fn bi_proto(p: u32) -> Ps<Cf> {
    Ps::zero(&cf(p), Order::Exact)
}

fn wconst(c: Cf) -> Ps<Cf> {
    Ps::constant(c, Order::Exact)
}

/// `sin(mξ)` or `cos(mξ)` below `ξ^{n}`, coefficients constant in `w`.
fn trig_xi(p: u32, m: i64, n: usize, sine: bool) -> Bi {
    let mut coeffs = Vec::with_capacity(n);
    let mut c = Rational::from(1);
    for j in 0..n {
        if j > 0 {
            c = c * m / j as i64;
        }
        let use_it = (j % 2 == 1) == sine;
        let v = if use_it {
            let sgn = if (j / 2) % 2 == 0 { 1 } else { -1 };
            Cf::from_rational(p, &Rational::from(&c * sgn))
        } else {
            cf(p)
        };
        coeffs.push(wconst(v));
    }
    Ps::from_coeffs(&bi_proto(p), coeffs, at(n as i64))
}

/// `θ(ξ + jβ, q̂)/(2i q̂^{1/4})` as a bivariate series.
fn theta_shift(h: &HatData, j: i64, nxi: usize) -> Result<Bi> {
    let p = h.params.prec;
    let b0 = &h.params.beta0;
    let nw = h.nw;
    let mut acc = Ps::zero(&bi_proto(p), at(nxi as i64));
    let mut n = 0i64;
    while triangular(n) < nw as i64 {
        let m = 2 * n + 1;
        let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
        let wm = wmono(triangular(n), Cf::from_f64(p, sgn, 0.0));
        let cb = cos_mbeta(b0, &h.delta, m * j)?
            .mul(&wm)
            .truncate(at(nw as i64));
        let sb = sin_mbeta(b0, &h.delta, m * j)?
            .mul(&wm)
            .truncate(at(nw as i64));
        acc = acc
            .add(&trig_xi(p, m, nxi, true).scale(&cb))
            .add(&trig_xi(p, m, nxi, false).scale(&sb));
        n += 1;
    }
    Ok(acc)
}

/// `X(ξ, w)` below `ξ^{nxi}`.
pub fn am_x_hat(h: &HatData, nxi: usize) -> Result<Bi> {
    let num = theta_shift(h, 0, nxi + 1)?.mul(&theta_shift(h, -1, nxi + 1)?);
    let den = theta_shift(h, 1, nxi + 1)?.mul(&theta_shift(h, -2, nxi + 1)?);
    Ok(num.div(&den)?.scale(&h.d).truncate(at(nxi as i64)))
}

/// The coefficients `R_k(Z)`, `k ≤ kmax`, of
/// `R = θ'(0,Q')θ₄(Z,Q') / (θ₄(0,Q') θ(Z,Q'))·(2iQ'^{1/4})`-normalised,
/// i.e. `R = Σ_k Q'^k R_k(Z)` with `R_0 = 1/sin Z`, `R_1 = 4 sin Z`.
pub fn r_coeffs(p: u32, kmax: usize, nz: usize) -> Result<Vec<Ps<Cf>>> {
    let zproto = Ps::zero(&cf(p), Order::Exact);
    let ko = at(kmax as i64 + 1);
    let trig = |m: i64, sine: bool| -> Ps<Cf> {
        let b = trig_xi(p, m, nz + 2, sine);
        b.map_coeffs(&cf(p), |c| c.coeff_i(0).unwrap_or_else(|_| cf(p)))
    };
    let mut th4 = vec![(
        Rational64::from(0),
        wconst(Cf::from_f64(p, 1.0, 0.0)).with_order(Order::Exact),
    )];
    let mut th40 = vec![(Rational64::from(0), wconst(Cf::from_f64(p, 1.0, 0.0)))];
    let mut tp = Vec::new();
    let mut sz = Vec::new();
    let mut n = 0i64;
    loop {
        let sq = n * n;
        let pr = n * (n + 1);
        if sq > kmax as i64 && pr > kmax as i64 {
            break;
        }
        let sgn = if n % 2 == 0 { 1 } else { -1 };
        if n >= 1 && sq <= kmax as i64 {
            th4.push((Rational64::from(sq), trig(2 * n, false).mul_int(2 * sgn)));
            th40.push((
                Rational64::from(sq),
                wconst(Cf::from_f64(p, (2 * sgn) as f64, 0.0)),
            ));
        }
        if pr <= kmax as i64 {
            tp.push((
                Rational64::from(pr),
                wconst(Cf::from_f64(p, (sgn * (2 * n + 1)) as f64, 0.0)),
            ));
            sz.push((Rational64::from(pr), trig(2 * n + 1, true).mul_int(sgn)));
        }
        n += 1;
    }
    let mk = |t: Vec<(Rational64, Ps<Cf>)>| Ps::from_terms(&zproto, t, ko);
    let r = mk(tp).mul(&mk(th4)).div(&mk(th40).mul(&mk(sz)))?;
    (0..=kmax)
        .map(|k| r.coeff_i(k as i64).map(|c| c.truncate(at(nz as i64))))
        .collect()
}

/// `J(ξ, w) = Σ_k Q'^k J_k(ξ, w)` with `J_k = −pref(w) R_k(πξ/β(w))`.
pub fn am_j_hat(h: &HatData, kmax: usize, nxi: usize) -> Result<Vec<Bi>> {
    let p = h.params.prec;
    let rk = r_coeffs(p, kmax, nxi)?;
    let pi_over_beta = h.beta().inv()?.scale(&Cf::real(pi(p)));
    let mut out = Vec::new();
    for r in rk {
        let terms: Vec<(Rational64, Ps<Cf>)> = r
            .terms()
            .map(|(e, c)| {
                let j = e.to_integer();
                let f = if j >= 0 {
                    pi_over_beta.pow_u(j as u64)
                } else {
                    pi_over_beta.inv().unwrap().pow_u((-j) as u64)
                };
                (e, f.scale(c).mul(&h.pref).neg().truncate(at(h.nw as i64)))
            })
            .collect();
        out.push(Ps::from_terms(&bi_proto(p), terms, at(nxi as i64)));
    }
    Ok(out)
}

/// `Q(x,0) = A(x,w) + Σ_{k≥1} Q'^k G_k(x,w)`: returns `[A, G_1, …, G_kmax]`
/// as series in `x` (outer) and `w` (inner), below `x^{nx}`.
pub fn am_qx0_hat(h: &HatData, kmax: usize, nx: usize) -> Result<Vec<Bi>> {
    let p = h.params.prec;
    let nxi = nx + 3;
    let x = am_x_hat(h, nxi)?;
    let xi = x.reversion(None)?;
    let js = am_j_hat(h, kmax, nxi)?;
    let at_inv = h.t.scale(&Cf::real(h.params.a.clone())).inv()?;
    let bp = bi_proto(p);
    let var = Ps::var(&bp, Order::Exact);
    let mut out = Vec::new();
    for (k, jk) in js.iter().enumerate() {
        let jx = jk.compose(&xi)?;
        let body = if k == 0 {
            let half_inv_t = h.t.inv()?.mul_rational(&Rational::from((1, 2)));
            let inv_x = Ps::monomial(
                wconst(Cf::from_f64(p, 1.0, 0.0)),
                Rational64::from(-1),
                Order::Exact,
            );
            Ps::constant(half_inv_t, Order::Exact)
                .sub(&var)
                .sub(&inv_x)
                .sub(&jx)
        } else {
            jx.neg()
        };
        let q = body.scale(&at_inv).shift(Rational64::from(-1));
        out.push(drop_negative(q, nx)?);
    }
    Ok(out)
}

/// Remove the spurious `x^{<0}` parts left by float cancellation, checking
/// they are negligible.
fn drop_negative(q: Bi, nx: usize) -> Result<Bi> {
    let mut terms = Vec::new();
    for (e, c) in q.terms() {
        if e < Rational64::from(0) {
            let mag = c.mag_log2();
            if mag > -(c.proto().prec() as f64) / 2.0 {
                return Err(Error::Verification(format!(
                    "pole of order {} in Q(x,0) does not cancel (2^{mag:.0})",
                    -e
                )));
            }
            continue;
        }
        terms.push((e, c.clone()));
    }
    Ok(Ps::from_terms(
        q.proto(),
        terms,
        q.order().min(at(nx as i64)),
    ))
}

/// The critical transeries of `Q(x,0)` in `u = 1 − t/t_c`:
/// terms `u^{ℓ + kρ} (log u)^m` with x-series coefficients. Terms with
/// `k ≥ 1` are `P_{k−1,ℓ,m}`; `k = 0` is the analytic part.
pub struct CriticalExpansion {
    pub hat: HatData,
    pub series: TranseriesExpansion<Ps<Cf>>,
    pub kmax: usize,
    pub lmax: usize,
}

impl CriticalExpansion {
    /// `P_{k,ℓ,m}(x)` (zero when absent).
    pub fn p(&self, k: u32, l: i64, m: u32) -> Result<Ps<Cf>> {
        let p = self.hat.params.prec;
        crate::transeries::tx_coeff(
            &self.series,
            &Ps::zero(&cf(p), Order::Exact),
            LatticeExp::new(Rational64::from(l), k + 1),
            m,
        )
    }

    /// `[x^j]` of the truncated transeries summed at `u = 1 − t/t_c ∈ (0,1)`.
    pub fn sum_at(&self, u: &Float, j: i64) -> Result<Float> {
        let p = u.prec();
        let lu = fl(p, u.ln_ref());
        let mut s = fl(p, 0);
        for (e, m, c) in self.series.terms() {
            let x = self.series.lattice.value(e);
            let term = fl(p, fl(p, &x * &lu).exp()) * fl(p, (&lu).pow(m)) * c.coeff_i(j)?.re;
            s += term;
        }
        Ok(s)
    }
}

/// `Q'^k = u^{kρ₀} Σ_m (log u)^m S_{k,m}(u)` as `[S_{k,0}, S_{k,1}, …]`.
pub fn qprime_power(h: &HatData, k: u32, nu: usize) -> Result<Vec<Ps<Cf>>> {
    let p = h.params.prec;
    let o = at(nu as i64);
    let one = Ps::one(&cf(p));
    let wu = h.w_of_u.truncate(at(nu as i64 + 1));
    let ratio = wu.shift(Rational64::from(-1)).truncate(o);
    let b = ratio.coeff_i(0)?;
    let lnb = b.re.clone().ln();
    let lam_rest = ratio.scale(&b.try_inv()?).log()?;
    let lam = lam_rest.add(&Ps::constant(Cf::real(lnb.clone()), Order::Exact));
    let rho0 = h.params.rho.clone();
    // ρ(w) − ρ₀ with ρ(w) = π/(2β(w))
    let rho_w = h.beta().inv()?.scale(&Cf::real(fl(p, pi(p) / 2u32)));
    let eta_w = rho_w.sub(&Ps::constant(Cf::real(rho0.clone()), Order::Exact));
    let eta = eta_w.truncate(at(nu as i64)).compose(&wu)?.truncate(o);
    let kr = fl(p, &rho0 * k);
    let e0 = lam_rest
        .scale(&Cf::real(kr.clone()))
        .exp()?
        .scale(&Cf::real(fl(p, (&b.re).pow(&kr))));
    let mut out = vec![Ps::zero(&cf(p), o); nu + 1];
    // Σ_j (kη)^j/j! Σ_m C(j,m) L^m λ^{j−m}
    let keta = eta.mul_int(k as i64);
    let mut kej = one.clone();
    let mut fact = Rational::from(1);
    for j in 0..nu {
        if j > 0 {
            kej = kej.mul(&keta).truncate(o);
            fact *= j as i64;
        }
        if kej.is_zero_series() && j > 0 {
            break;
        }
        let mut lam_pow = one.clone();
        let mut lp = vec![one.clone()];
        for _ in 0..j {
            lam_pow = lam_pow.mul(&lam).truncate(o);
            lp.push(lam_pow.clone());
        }
        let mut binom = Rational::from(1);
        for m in 0..=j {
            if m > 0 {
                binom = binom * (j - m + 1) as i64 / m as i64;
            }
            let w = Rational::from(&binom / &fact);
            let term = kej.mul(&lp[j - m]).mul_rational(&w).truncate(o);
            out[m] = out[m].add(&term);
        }
    }
    let res: Vec<Ps<Cf>> = out.into_iter().map(|s| s.mul(&e0).truncate(o)).collect();
    Ok(res)
}

/// `Q(x,0)` near `t_c` as a transeries in `u = 1 − t/t_c`, with `k ≤ kmax`
/// powers of `Q'` (i.e. `P_{k,ℓ,m}` for `k < kmax`), `ℓ ≤ lmax`, and
/// `x`-series below `x^{nx}`.
pub fn am_critical_transeries(
    a: &Float,
    kmax: usize,
    lmax: usize,
    nx: usize,
) -> Result<CriticalExpansion> {
    let nw = lmax + 2;
    let h = am_hat_data(a, nw)?;
    let p = h.params.prec;
    let nu = lmax + 1;
    let parts = am_qx0_hat(&h, kmax, nx)?;
    let rho = h.params.rho.clone();
    let order = (nu as f64).min(rho.to_f64() * (kmax as f64 + 1.0));
    let lattice = ExponentLattice::irrational("pi/(2 beta0)", rho);
    let mut ts = TranseriesExpansion::new("u", lattice, order);
    let wu = h.w_of_u.truncate(at(nu as i64 + 1));
    for (k, part) in parts.iter().enumerate() {
        // x-coefficients as u-series
        let in_u: Vec<(Rational64, Ps<Cf>)> = part
            .terms()
            .map(|(e, c)| {
                Ok((
                    e,
                    c.truncate(at(nu as i64))
                        .compose(&wu)?
                        .truncate(at(nu as i64)),
                ))
            })
            .collect::<Result<_>>()?;
        let factors = if k == 0 {
            vec![Ps::one(&cf(p))]
        } else {
            qprime_power(&h, k as u32, nu)?
        };
        for (m, f) in factors.iter().enumerate() {
            for l in 0..nu as i64 {
                let mut xs = Vec::new();
                for (e, c) in &in_u {
                    let v = c.mul(f).coeff_i(l)?;
                    xs.push((*e, v));
                }
                let xser = Ps::from_terms(&cf(p), xs, at(nx as i64));
                if !xser.is_zero_series() {
                    ts.add_term(
                        LatticeExp::new(Rational64::from(l), k as u32),
                        m as u32,
                        xser,
                    );
                }
            }
        }
    }
    Ok(CriticalExpansion {
        hat: h,
        series: ts,
        kmax,
        lmax,
    })
}

/// `Q'^1 = q̂^{π/β}` as a transeries in `q̂` over the lattice `π/β₀`,
/// below `q̂^{π/β₀ + 2·nw}`.
pub fn am_qhat_power_transeries(h: &HatData, nw: usize) -> Result<TranseriesExpansion<Cf>> {
    let p = h.params.prec;
    let o = at(nw as i64);
    // exp((π/β − π/β₀) L) with L = log q̂ and π/β − π/β₀ = g(w)
    let pw = h.beta().inv()?.scale(&Cf::real(pi(p)));
    let g = pw
        .sub(&Ps::constant(
            Cf::real(fl(p, pi(p) / &h.params.beta0)),
            Order::Exact,
        ))
        .truncate(o);
    let lattice = ExponentLattice::irrational("pi/beta0", fl(p, pi(p) / &h.params.beta0));
    let mut ts = TranseriesExpansion::new(
        "qhat",
        lattice,
        (2 * nw) as f64 + fl(p, pi(p) / &h.params.beta0).to_f64(),
    );
    let mut gj = Ps::one(&cf(p));
    let mut fact = Rational::from(1);
    for j in 0..nw {
        if j > 0 {
            gj = gj.mul(&g).truncate(o);
            fact *= j as i64;
        }
        let inv = Rational::from(1) / &fact;
        for (e, c) in gj.terms() {
            ts.add_term(LatticeExp::new(e * 2, 1), j as u32, c.mul_rational(&inv));
        }
    }
    Ok(ts)
}

// ---------------------------------------------------------------------------
// Leading asymptotics.

/// `x(ξ) = k sin ξ sin(ξ−β₀)/(sin(ξ−2β₀) sin(ξ+β₀))` below `ξ^{n}`.
fn x_trig(k: &Float, beta0: &Float, n: usize) -> Result<Ps<Cf>> {
    let p = k.prec();
    let sin_shift = |c: Float| -> Ps<Cf> {
        // sin(ξ + c) = sin c cos ξ + cos c sin ξ
        let (s, co) = c.sin_cos(fl(p, 0));
        let sx = trig_xi(p, 1, n + 1, true)
            .map_coeffs(&cf(p), |x| x.coeff_i(0).unwrap_or_else(|_| cf(p)));
        let cx = trig_xi(p, 1, n + 1, false)
            .map_coeffs(&cf(p), |x| x.coeff_i(0).unwrap_or_else(|_| cf(p)));
        sx.scale(&Cf::real(co)).add(&cx.scale(&Cf::real(s)))
    };
    let num = sin_shift(fl(p, 0)).mul(&sin_shift(fl(p, -beta0)));
    let den = sin_shift(fl(p, -2i32 * fl(p, beta0))).mul(&sin_shift(beta0.clone()));
    Ok(num
        .div(&den)?
        .scale(&Cf::real(k.clone()))
        .truncate(at(n as i64)))
}

/// `V(j) = [x^{j+1}] sin(πξ/β₀)` for `j ≤ jmax`, for modulus `k` and angle `β₀`.
pub fn harmonic_gf_coeffs_k(k: &Float, beta0: &Float, jmax: usize) -> Result<Vec<Float>> {
    let p = k.prec();
    let n = jmax + 3;
    let xi = x_trig(k, beta0, n)?.reversion(None)?;
    let zs = xi.scale(&Cf::real(fl(p, pi(p) / beta0)));
    let sin = trig_xi(p, 1, n, true).map_coeffs(&cf(p), |x| x.coeff_i(0).unwrap_or_else(|_| cf(p)));
    let f = sin.compose(&zs)?;
    (0..=jmax)
        .map(|j| f.coeff_i(j as i64 + 1).map(|c| c.re))
        .collect()
}

/// `V(j)`, the generating function of the positive harmonic function.
pub fn am_harmonic_gf_coeffs(a: &Float, jmax: usize) -> Result<Vec<Float>> {
    let mp = ModelParams::new(a)?;
    harmonic_gf_coeffs_k(&mp.k, &mp.beta0, jmax)
}

/// Prediction `C · V(j) · n^{−1−ρ} · t_c^{−n}` for `[x^j][t^n]Q(x,0)`.
#[derive(Clone, Debug, Serialize)]
pub struct LeadingAsymptotics {
    pub j: usize,
    pub n: u64,
    /// `C · V(j) · n^{−1−ρ}`, i.e. the prediction times `t_c^n`
    pub scaled: f64,
    /// decimal string of the unscaled prediction
    pub value: String,
}

pub fn am_leading_asymptotics(a: &Float, j: usize, n: u64) -> Result<LeadingAsymptotics> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mp = ModelParams::new(a)?;
    let p = mp.prec;
    let v = harmonic_gf_coeffs_k(&mp.k, &mp.beta0, j)?;
    let nn = fl(p, n);
    let pw = fl(p, (&nn).pow(&fl(p, -1i32 - fl(p, &mp.rho))));
    let scaled = fl(p, &mp.c * &v[j]) * pw;
    let tcn = fl(p, (&mp.t_c).pow(n));
    let value = fl(p, &scaled / &tcn);
    Ok(LeadingAsymptotics {
        j,
        n,
        scaled: scaled.to_f64(),
        value: float_to_string(&value),
    })
}

// ---------------------------------------------------------------------------
// Closed-form displays, for cross-checking the series machinery.

/// One computed value against its closed form.
#[derive(Clone, Debug)]
pub struct DisplayCheck {
    pub name: String,
    pub computed: Float,
    pub expected: Float,
    /// `|computed − expected| / max(|expected|, 2^{−prec/2})`: relative, except
    /// for closed forms that vanish (e.g. `β₁` at `a = √2`) and are only zero
    /// up to rounding
    pub err: f64,
    pub tol: f64,
}

impl DisplayCheck {
    fn new(name: impl Into<String>, computed: Float, expected: Float, tol: f64) -> Self {
        let p = computed.prec();
        let diff = fl(p, &computed - &expected).abs();
        let floor = fl(p, 1) >> (p / 2);
        let den = fl(p, expected.abs_ref()).max(&floor);
        let err = (diff / den).to_f64();
        DisplayCheck {
            name: name.into(),
            computed,
            expected,
            err,
            tol,
        }
    }

    pub fn pass(&self) -> bool {
        self.err <= self.tol
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.name,
            "computed": float_to_string(&self.computed),
            "expected": float_to_string(&self.expected),
            "error": self.err,
            "tolerance": self.tol,
            "pass": self.pass(),
        })
    }
}

/// Low-order coefficients of `q(s)`, `2cos 2β`, `β`, `t(q̂)`, `d` and `q̂²(u)`
/// against their closed forms in `k`.
pub fn am_structural_checks(a: &Float, tol: f64) -> Result<Vec<DisplayCheck>> {
    let p = a.prec();
    let mp = ModelParams::new(a)?;
    let k = &mp.k;
    let k2 = fl(p, k * k);
    let mut out = Vec::new();
    let q = am_q_of_s(&Cf::real(a.clone()), 4)?;
    let sa = fl(p, a.sqrt_ref());
    out.push(DisplayCheck::new(
        "q(s) [s^7/2]",
        q.coeff(Rational64::new(7, 2))?.re,
        sa.clone(),
        tol,
    ));
    let e1 = fl(p, 1u32 / fl(p, 2u32 * &sa)) - fl(p, fl(p, a * &sa) * 3u32) / 4u32;
    out.push(DisplayCheck::new(
        "q(s) [s^9/2]",
        q.coeff(Rational64::new(9, 2))?.re,
        e1,
        tol,
    ));

    let h = am_hat_data(a, 4)?;
    let km1 = fl(p, &k2 - 1u32);
    let kp1 = fl(p, &k2 + 1u32);
    let k3m = fl(p, &k2 - 3u32);
    let c2 = -fl(p, &k2 * fl(p, fl(p, 2u32 * &k2) - 1u32)) * &kp1 * &k3m * &km1;
    out.push(DisplayCheck::new(
        "2cos(2β) [q̂^0]",
        h.two_cos_2beta.coeff_i(0)?.re,
        km1.clone(),
        tol,
    ));
    out.push(DisplayCheck::new(
        "2cos(2β) [q̂^2]",
        h.two_cos_2beta.coeff_i(1)?.re,
        c2,
        tol,
    ));
    out.push(DisplayCheck::new(
        "β [q̂^2]",
        h.delta.coeff_i(1)?.re,
        mp.beta1.clone(),
        tol,
    ));
    out.push(DisplayCheck::new(
        "t [q̂^0]",
        h.t.coeff_i(0)?.re,
        fl(p, k / fl(p, &k2 + 3u32)),
        tol,
    ));
    let t1 = -fl(p, &mp.t_c * fl(p, kp1.square_ref())) * fl(p, fl(p, 3u32 - &k2).pow(3u32))
        / fl(p, &k2 + 3u32);
    out.push(DisplayCheck::new("t [q̂^2]", h.t.coeff_i(1)?.re, t1, tol));
    out.push(DisplayCheck::new(
        "d [q̂^0]",
        h.d.coeff_i(0)?.re,
        k.clone(),
        tol,
    ));
    let d1 = -fl(p, k * &k2) * &k3m * &km1 * &kp1;
    out.push(DisplayCheck::new("d [q̂^2]", h.d.coeff_i(1)?.re, d1, tol));
    out.push(DisplayCheck::new(
        "q̂^2 [(1-t/t_c)^1]",
        h.w_of_u.coeff_i(1)?.re,
        mp.big_b.clone(),
        tol,
    ));
    Ok(out)
}

/// Value of `[w^j] b(ξ)` for a bivariate series.
pub fn bi_eval(b: &Bi, xi: &Float, wj: i64) -> Result<Float> {
    let p = xi.prec();
    let mut s = fl(p, 0);
    for (e, c) in b.terms() {
        let v = c.coeff_i(wj)?.re;
        s += v * fl(p, xi.pow(e.to_integer() as i32));
    }
    Ok(s)
}

/// The low-order terms of `X` and `J` at sample points `ẑ` (with `ξ = −ẑ`)
/// against the closed forms written in `ẑ` and `u = cos(β₀+2ẑ)/cos β₀ − 1`.
pub fn am_xj_checks(
    h: &HatData,
    zhats: &[Float],
    nxi: usize,
    tol: f64,
) -> Result<Vec<DisplayCheck>> {
    let p = h.params.prec;
    let mp = &h.params;
    let (k, b0, b1) = (&mp.k, &mp.beta0, &mp.beta1);
    let k2 = fl(p, k * k);
    let x = am_x_hat(h, nxi)?;
    let j = am_j_hat(h, 1, nxi)?;
    let pp = pi(p);
    let s2b = fl(p, fl(p, 2u32 * b0).sin());
    let c2b = fl(p, fl(p, 2u32 * b0).cos());
    let mut out = Vec::new();
    for zh in zhats {
        let xi = fl(p, -zh);
        let u = fl(p, fl(p, b0 + fl(p, 2u32 * zh)).cos() / fl(p, b0.cos_ref())) - 1u32;
        let den = fl(p, &u + 3u32) - &k2;
        let x0 = fl(p, k * &u) / &den;
        let pre = fl(p, k * fl(p, 3u32 - &k2)) / fl(p, 1u32 + &k2);
        let x1 = pre
            * (fl(p, -4i32 * fl(p, b1 * fl(p, fl(p, 2u32 * zh).sin()))) / fl(p, den.square_ref())
                + fl(p, &u * fl(p, fl(p, 1u32 + &k2).square()))
                    * (fl(p, 1u32 - &k2) + fl(p, k2.square_ref()) + &u)
                    / &den);
        let arg = fl(p, &pp * zh) / b0;
        let (s, c) = arg.sin_cos(fl(p, 0));
        let lead = fl(p, &pp * &s2b) / fl(p, b0 * k);
        let j0 = fl(p, &lead / &s);
        let br = fl(p, fl(p, 1u32 + &k2) - fl(p, k2.square_ref()))
            * fl(p, 3u32 - &k2)
            * fl(p, 1u32 + &k2)
            + fl(p, &pp * b1) * zh * &c / (fl(p, b0 * b0) * &s)
            + fl(p, 2u32 * b1) * &c2b / &s2b
            - fl(p, b1 / b0);
        let j1 = fl(p, &j0 * &br);
        let jq = fl(p, 4u32 * &lead) * &s;
        let z = zh.to_f64();
        out.push(DisplayCheck::new(
            format!("X [q̂^0] at ẑ={z}"),
            bi_eval(&x, &xi, 0)?,
            x0,
            tol,
        ));
        out.push(DisplayCheck::new(
            format!("X [q̂^2] at ẑ={z}"),
            bi_eval(&x, &xi, 1)?,
            x1,
            tol,
        ));
        out.push(DisplayCheck::new(
            format!("J [q̂^0] at ẑ={z}"),
            bi_eval(&j[0], &xi, 0)?,
            j0,
            tol,
        ));
        out.push(DisplayCheck::new(
            format!("J [q̂^2] at ẑ={z}"),
            bi_eval(&j[0], &xi, 1)?,
            j1,
            tol,
        ));
        out.push(DisplayCheck::new(
            format!("J [q̂^(π/β)] at ẑ={z}"),
            bi_eval(&j[1], &xi, 0)?,
            jq,
            tol,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Alg;

    const P: u32 = 192;

    fn f(x: f64) -> Float {
        Float::with_val(P, x)
    }

    #[test]
    fn k_for_a_one_solves_cubic() {
        let k = am_k_from_a(&f(1.0)).unwrap();
        assert!((k.to_f64() - 0.754877666246693).abs() < 1e-14);
    }

    #[test]
    fn p_of_s_leading_terms() {
        // q = a^{1/2} s^{7/2} + (1/(2√a) − (3/4) a^{3/2}) s^{9/2}: P = a + (1 − 3a²/2) s + …
        let p = am_p_of_s(&Alg::from_i64(1), 6).unwrap();
        assert_eq!(p.coeff_i(0).unwrap(), Alg::from_i64(1));
        assert_eq!(
            p.coeff_i(1).unwrap(),
            Alg::rational(Rational::from((-1, 2)))
        );
    }

    #[test]
    fn c_branch_consistent() {
        let d = am_taylor_data(&Alg::from_i64(2), 6).unwrap();
        let lim = d.c_residual.order().value().unwrap();
        assert!(
            d.c_residual.terms().all(|(e, _)| e >= lim),
            "{:?}",
            d.c_residual
        );
        assert_eq!(d.t.coeff_i(1).unwrap(), Alg::from_i64(1));
    }

    #[test]
    fn taylor_counts_for_a_one() {
        let q = am_q00_taylor(&Alg::from_i64(1), 6).unwrap();
        let want = [1, 0, 2, 2, 10, 26, 86];
        for (j, w) in want.iter().enumerate() {
            assert_eq!(q.coeff_i(j as i64).unwrap(), Alg::from_i64(*w), "t^{j}");
        }
    }

    #[test]
    fn harmonic_limit_at_k_one() {
        let v = harmonic_gf_coeffs_k(&f(1.0), &(pi(P) / 4u32), 4).unwrap();
        for (j, x) in v.iter().enumerate() {
            assert!(
                (x.to_f64() - 4.0 * (j as f64 + 1.0)).abs() < 1e-30,
                "{j}: {}",
                x.to_f64()
            );
        }
    }

    #[test]
    fn r_coeffs_leading() {
        let r = r_coeffs(P, 2, 8).unwrap();
        // R_1 = 4 sin Z
        assert!((r[1].coeff_i(1).unwrap().re.to_f64() - 4.0).abs() < 1e-40);
        assert!((r[1].coeff_i(3).unwrap().re.to_f64() + 4.0 / 6.0).abs() < 1e-40);
        // R_0 = 1/sin Z
        assert!((r[0].coeff_i(-1).unwrap().re.to_f64() - 1.0).abs() < 1e-40);
        assert!((r[0].coeff_i(1).unwrap().re.to_f64() - 1.0 / 6.0).abs() < 1e-40);
    }

    #[test]
    fn structural_series_agree_with_closed_forms() {
        for a in [0.5, 1.0, 3.0] {
            for c in am_structural_checks(&f(a), 1e-40).unwrap() {
                assert!(
                    c.pass(),
                    "a={a} {}: {} vs {}",
                    c.name,
                    c.computed.to_f64(),
                    c.expected.to_f64()
                );
            }
        }
    }

    #[test]
    fn j_terms_match_closed_forms() {
        let h = am_hat_data(&f(1.0), 4).unwrap();
        let zs: Vec<Float> = [0.1, 0.25].iter().map(|&z| f(z)).collect();
        let checks = am_xj_checks(&h, &zs, 60, 1e-20).unwrap();
        for c in checks
            .iter()
            .filter(|c| c.name.starts_with('J') || c.name.starts_with("X [q̂^0]"))
        {
            assert!(
                c.pass(),
                "{}: {} vs {}",
                c.name,
                c.computed.to_f64(),
                c.expected.to_f64()
            );
        }
    }

    #[test]
    fn x_second_order_from_finite_differences() {
        // (X(q̂) − X(0))/q̂² at q̂ = 1e-4, a = 1, from direct theta sums
        let h = am_hat_data(&f(1.0), 4).unwrap();
        let x = am_x_hat(&h, 60).unwrap();
        for (z, want) in [
            (0.1, 0.34680519407),
            (0.2, 0.59102301541),
            (0.3, 0.59777159369),
        ] {
            let got = bi_eval(&x, &f(-z), 1).unwrap().to_f64();
            assert!((got - want).abs() < 1e-6, "ẑ={z}: {got}");
        }
    }

    #[test]
    fn log_ratio_matches_closed_form() {
        let ce = am_critical_transeries(&f(1.0), 1, 2, 3).unwrap();
        let mp = &ce.hat.params;
        let p0 = ce.p(0, 0, 0).unwrap();
        let p1 = ce.p(0, 1, 1).unwrap();
        let want =
            -(pi(P) * &mp.beta1 * &mp.big_b) / (Float::with_val(P, &mp.beta0 * &mp.beta0) * 2u32);
        let v = am_harmonic_gf_coeffs(&f(1.0), 2).unwrap();
        let amp = mp.c.clone() * Float::with_val(P, -mp.rho.clone()).gamma();
        for j in 0..3 {
            let r = p1.coeff_i(j).unwrap().re / p0.coeff_i(j).unwrap().re;
            assert!(((r - &want) / &want).abs().to_f64() < 1e-40);
            let r = p0.coeff_i(j).unwrap().re / &v[j as usize];
            assert!(((r - &amp) / &amp).abs().to_f64() < 1e-40);
        }
        // m ≤ ℓ on every emitted term
        for (e, m, _) in ce.series.terms() {
            assert!(Rational64::from(m as i64) <= e.r);
        }
    }

    #[test]
    fn qhat_power_log_coefficient() {
        let h = am_hat_data(&f(1.0), 4).unwrap();
        let ts = am_qhat_power_transeries(&h, 3).unwrap();
        let mp = &h.params;
        let c = crate::transeries::tx_coeff(
            &ts,
            &Cf::zero(P),
            LatticeExp::new(Rational64::from(2), 1),
            1,
        )
        .unwrap();
        let want = -(pi(P) * &mp.beta1) / Float::with_val(P, &mp.beta0 * &mp.beta0);
        assert!(((c.re - &want) / &want).abs().to_f64() < 1e-40);
    }

    #[test]
    fn numeric_parameters_in_range() {
        let a = Float::with_val(128, 1);
        let tc = ModelParams::new(&a).unwrap().t_c;
        let mut last = 0.0;
        for x in [0.05, 0.5, 0.9, 0.99] {
            let t = Float::with_val(128, &tc * x);
            let r = am_solve_params_numeric(&a, &t).unwrap();
            let v = r.v.to_f64();
            assert!(v > 0.25 && v < 1.0 / 3.0);
            let q = r.q.to_f64();
            assert!(q > last && q < 1.0);
            last = q;
            assert!(
                r.residuals[0] < 1e-30 && r.residuals[1] < 1e-30,
                "{:?}",
                r.residuals
            );
        }
    }

    #[test]
    fn saddle_angle_is_twice_beta0() {
        for a in [0.1, 1.0, 4.5] {
            let s = am_saddle(&f(a)).unwrap();
            let d = (s.theta.clone() - &s.two_beta0).abs().to_f64();
            assert!(d < 1e-50, "a={a} {d} {}", s.gradient[0].to_f64());
            assert!(s.gradient.iter().all(|g| g.clone().abs().to_f64() < 1e-50));
        }
    }

    #[test]
    fn logs_survive_when_beta1_vanishes() {
        let a = Float::with_val(P, 2).sqrt();
        let ce = am_critical_transeries(&a, 2, 4, 3).unwrap();
        let mp = &ce.hat.params;
        let b2 = ce.hat.delta.coeff_i(2).unwrap().re;
        assert!(mp.beta1.clone().abs().to_f64() < 1e-50);
        let p0 = ce.p(0, 0, 0).unwrap();
        let p11 = ce.p(0, 1, 1).unwrap();
        let p21 = ce.p(0, 2, 1).unwrap();
        assert!(ce.p(0, 1, 2).unwrap().is_zero_series());
        let want = -(pi(P) * &b2 * fl(P, mp.big_b.square_ref()))
            / (Float::with_val(P, &mp.beta0 * &mp.beta0) * 2u32);
        for j in 0..3 {
            assert!(p11.coeff_i(j).unwrap().re.abs().to_f64() < 1e-40);
            let r = p21.coeff_i(j).unwrap().re / p0.coeff_i(j).unwrap().re;
            assert!(((r - &want) / &want).abs().to_f64() < 1e-40, "j={j}");
        }
    }

    #[test]
    fn critical_side_agrees_with_theta_display() {
        let a = Float::with_val(256, 1);
        let mp = ModelParams::new(&a).unwrap();
        let t = Float::with_val(256, &mp.t_c * 0.9);
        let num = am_q00_numeric(&a, &t).unwrap();
        let ce = am_critical_transeries(&a, 4, 8, 1).unwrap();
        let s = ce.sum_at(&Float::with_val(256, 0.1), 0).unwrap();
        assert!(((s - &num) / &num).abs().to_f64() < 1e-6);
    }
}
