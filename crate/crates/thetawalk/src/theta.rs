//! Jacobi theta function
//! `θ(z|τ) = Σ_{n≥0} (−1)^n q^{(n+1/2)^2} (e^{(2n+1)iz} − e^{−(2n+1)iz})`, `q = e^{iπτ}`,
//! as q-series for arguments of the form `uπ + vπτ`, and numerically.
//! Also: nome duality, elliptic nome from the modulus, step sets and kernels.

use std::fmt;

use num_rational::Rational64;
use rug::ops::Pow;
use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::ring::{Alg, Cf, Coeff};
use crate::series::{Order, PuiseuxSeries};

/// Theta argument `z = uπ + vπτ`, evaluated on the nome `q^scale`.
/// `hat` records that `τ` is the dual parameter, so the series variable is `q̂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NomeArgument {
    pub u: Rational64,
    pub v: Rational64,
    pub hat: bool,
    pub scale: Rational64,
}

impl NomeArgument {
    pub fn new(u: Rational64, v: Rational64) -> Self {
        NomeArgument {
            u,
            v,
            hat: false,
            scale: Rational64::from(1),
        }
    }
    /// `z = uπ`.
    pub fn pi(u: Rational64) -> Self {
        Self::new(u, Rational64::from(0))
    }
    /// `z = vπτ`.
    pub fn tau(v: Rational64) -> Self {
        Self::new(Rational64::from(0), v)
    }
    pub fn zero() -> Self {
        Self::pi(Rational64::from(0))
    }
    pub fn with_scale(mut self, s: Rational64) -> Self {
        assert!(s > Rational64::from(0), "nome scale must be positive");
        self.scale = s;
        self
    }
    pub fn hatted(mut self) -> Self {
        self.hat = true;
        self
    }
    pub fn neg(self) -> Self {
        NomeArgument {
            u: -self.u,
            v: -self.v,
            ..self
        }
    }
    pub fn plus(self, o: NomeArgument) -> Self {
        NomeArgument {
            u: self.u + o.u,
            v: self.v + o.v,
            ..self
        }
    }
    pub fn times(self, k: i64) -> Self {
        NomeArgument {
            u: self.u * k,
            v: self.v * k,
            ..self
        }
    }
}

impl fmt::Display for NomeArgument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = if self.hat { "τ̂" } else { "τ" };
        write!(
            f,
            "{}π + {}π{t} (nome scale {})",
            self.u, self.v, self.scale
        )
    }
}

/// Coefficient rings able to host `e^{iπu}`.
pub trait ThetaRing: Coeff {
    fn unit_root(&self, u: Rational64) -> Result<Self>;
    fn imag_unit(&self) -> Self;
}

impl ThetaRing for Alg {
    fn unit_root(&self, u: Rational64) -> Result<Self> {
        Alg::unit_root(u).ok_or_else(|| {
            Error::NotRepresentable(format!("exp(i pi {u}) outside Q(i, sqrt 2 | sqrt 3)"))
        })
    }
    fn imag_unit(&self) -> Self {
        Alg::i()
    }
}

impl ThetaRing for Cf {
    fn unit_root(&self, u: Rational64) -> Result<Self> {
        let p = self.prec();
        if let Some(a) = Alg::unit_root(u) {
            return Ok(a.to_cf(p));
        }
        let x = Cf::pi(p) * Float::with_val(p, &crate::ring::r64_to_rug(u));
        Ok(Cf::expi(&x))
    }
    fn imag_unit(&self) -> Self {
        Cf::i(self.prec())
    }
}

/// `d`-th z-derivative of `θ(z | q^s)` as a Puiseux series in `q`, keeping
/// every term of exponent `< order`.
pub fn theta_q_series<C: ThetaRing>(
    proto: &C,
    arg: &NomeArgument,
    d: u32,
    order: Rational64,
) -> Result<PuiseuxSeries<C>> {
    if order <= Rational64::from(0) {
        return Err(Error::InvalidArgument(format!(
            "theta truncation must be positive, got {order}"
        )));
    }
    let s = arg.scale;
    let half = Rational64::new(1, 2);
    let av = if arg.v < Rational64::from(0) {
        -arg.v
    } else {
        arg.v
    };
    let i_d = proto.imag_unit().pow_u(d as u64);
    let mi_d = proto.imag_unit().neg().pow_u(d as u64);
    let mut terms = Vec::new();
    let mut n: i64 = 0;
    loop {
        let m = 2 * n + 1;
        let base = s * (Rational64::from(n) + half) * (Rational64::from(n) + half);
        let lowest = base - av * m;
        // past the vertex of the exponent parabola and beyond the order
        if lowest >= order && Rational64::from(n) * s >= av {
            break;
        }
        let sign = if n % 2 == 0 { 1 } else { -1 };
        let md = proto.from_int_like(m).pow_u(d as u64);
        let e_plus = base + arg.v * m;
        if e_plus < order {
            let c = i_d.mul(&md).mul(&proto.unit_root(arg.u * m)?).mul_int(sign);
            terms.push((e_plus, c));
        }
        let e_minus = base - arg.v * m;
        if e_minus < order {
            let c = mi_d
                .mul(&md)
                .mul(&proto.unit_root(-arg.u * m)?)
                .mul_int(-sign);
            terms.push((e_minus, c));
        }
        n += 1;
    }
    Ok(PuiseuxSeries::from_terms(proto, terms, Order::At(order)))
}

/// Which of `θ(−z) = −θ(z)`, `θ(π−z) = θ(z)` and
/// `θ(z+πsτ) = −q^{−s}e^{−2iz}θ(z)` hold coefficientwise below `q^{order}`
/// (nome `q^s`, `s = arg.scale`).
pub fn theta_symmetries<C: ThetaRing>(
    proto: &C,
    arg: &NomeArgument,
    order: Rational64,
) -> Result<[bool; 3]> {
    let th = theta_q_series(proto, arg, 0, order)?;
    let odd = theta_q_series(proto, &arg.neg(), 0, order)?
        .add(&th)
        .is_zero_series();
    let refl = theta_q_series(
        proto,
        &arg.neg().plus(NomeArgument::pi(Rational64::from(1))),
        0,
        order,
    )?
    .sub(&th)
    .is_zero_series();
    let s = arg.scale;
    let shifted = theta_q_series(proto, &arg.plus(NomeArgument::tau(s)), 0, order)?;
    let factor = proto.unit_root(arg.u * -2)?.neg();
    let rhs = th.scale(&factor).shift(-s - arg.v * 2);
    let quasi = shifted.sub(&rhs).is_zero_series();
    Ok([odd, refl, quasi])
}

/// Direct summation of `θ^{(d)}(z)` for the nome `q = exp(lq)`, `Re lq < 0`.
pub fn theta_log_nome(z: &Cf, lq: &Cf, d: u32) -> Cf {
    let p = z.prec().min(lq.prec());
    assert!(
        lq.re.is_sign_negative(),
        "nome must lie inside the unit disc"
    );
    let i = Cf::i(p);
    let eps = -(p as f64) - 16.0;
    // the Gaussian dominates once n exceeds |Im z| / |Re lq|
    let turn = (z.im.to_f64().abs() / lq.re.to_f64().abs()).ceil() as i64 + 1;
    let mut acc = Cf::zero(p);
    let mut peak = f64::NEG_INFINITY;
    let mut n: i64 = 0;
    loop {
        let m = 2 * n + 1;
        let h = Float::with_val(p, n) + 0.5f64;
        let h2 = Float::with_val(p, &h * &h);
        let qn = lq.scale(&h2).exp();
        let ez = i.mul(z).mul_int(m).exp();
        let ezi = ez.try_inv().expect("exp never vanishes");
        let md = Float::with_val(p, m).pow(d);
        let a = i.pow_u(d as u64).mul(&ez);
        let b = i.neg().pow_u(d as u64).mul(&ezi);
        let mut term = Cf::from_parts(
            Float::with_val(p, &a.re - &b.re),
            Float::with_val(p, &a.im - &b.im),
        )
        .scale(&md)
        .mul(&qn);
        if n % 2 == 1 {
            term = term.neg();
        }
        let mag = term.mag_log2();
        peak = peak.max(mag);
        acc = Cf::from_parts(
            Float::with_val(p, &acc.re + &term.re),
            Float::with_val(p, &acc.im + &term.im),
        );
        if n >= turn && (mag < peak + eps || mag == f64::NEG_INFINITY) {
            break;
        }
        n += 1;
    }
    acc
}

/// `θ^{(d)}(z | τ)` for `Im τ > 0`.
pub fn theta_numeric(z: &Cf, tau: &Cf, d: u32) -> Result<Cf> {
    if !tau.im.is_sign_positive() || tau.im.is_zero() {
        return Err(Error::InvalidArgument("theta needs Im tau > 0".into()));
    }
    let p = z.prec().min(tau.prec());
    let lq = Cf::i(p).mul(tau).scale(&Cf::pi(p));
    Ok(theta_log_nome(z, &lq, d))
}

/// `θ^{(d)}(z, q)` for a real nome `0 < q < 1`.
pub fn theta_real_nome(z: &Cf, q: &Float, d: u32) -> Result<Cf> {
    check_nome(q)?;
    Ok(theta_log_nome(
        z,
        &Cf::real(Float::with_val(q.prec(), q.ln_ref())),
        d,
    ))
}

fn check_nome(q: &Float) -> Result<()> {
    if *q <= 0 || *q >= 1 {
        return Err(Error::InvalidArgument(format!(
            "nome {} outside (0,1)",
            q.to_f64()
        )));
    }
    Ok(())
}

/// `q̂ = exp(π² / log q)`.
pub fn jacobi_dual(q: &Float) -> Result<Float> {
    check_nome(q)?;
    let p = q.prec();
    let pi = Cf::pi(p);
    Ok(Float::with_val(
        p,
        Float::with_val(p, &pi * &pi) / Float::with_val(p, q.ln_ref()),
    )
    .exp())
}

/// Residuals of the nome-duality identity for `θ(z, q)`.
#[derive(Clone, Debug)]
pub struct JacobiResidual {
    /// `|θ(z,q) − i·R|` where `R = sqrt(−log q̂/π) exp(log q̂ z²/π²) θ(i log q̂ z/π, q̂)`.
    pub residual: Float,
    /// `|θ(z,q) − R|`, the same identity without the factor `i`.
    pub residual_without_i: Float,
    pub lhs: Cf,
}

pub fn jacobi_identity_check(z: &Cf, q: &Float) -> Result<JacobiResidual> {
    let p = z.prec().min(q.prec());
    let qh = jacobi_dual(q)?;
    let lqh = Float::with_val(p, qh.ln_ref());
    let pi = Cf::pi(p);
    let lhs = theta_real_nome(z, q, 0)?;
    let pre = (-Float::with_val(p, &lqh / &pi)).sqrt();
    let pi2 = Float::with_val(p, &pi * &pi);
    let g = Float::with_val(p, &lqh / &pi2);
    let ex = z.mul(z).scale(&g).exp();
    let w = Cf::i(p).mul(z).scale(&Float::with_val(p, &lqh / &pi));
    let th = theta_real_nome(&w, &qh, 0)?;
    let rhs = th.mul(&ex).scale(&pre);
    let with_i = Cf::i(p).mul(&rhs);
    Ok(JacobiResidual {
        residual: lhs.sub_raw(&with_i).abs(),
        residual_without_i: lhs.sub_raw(&rhs).abs(),
        lhs,
    })
}

/// Arithmetic-geometric mean of positive reals.
pub fn agm(a: &Float, b: &Float) -> Result<Float> {
    if *a <= 0 || *b <= 0 {
        return Err(Error::InvalidArgument(
            "agm needs positive arguments".into(),
        ));
    }
    let p = a.prec().min(b.prec());
    let (mut x, mut y) = (Float::with_val(p, a), Float::with_val(p, b));
    for _ in 0..(4 * p) {
        let nx = Float::with_val(p, &x + &y) / 2u32;
        let ny = Float::with_val(p, &x * &y).sqrt();
        let done = Float::with_val(p, &nx - &ny).abs()
            <= Float::with_val(p, &nx * Float::with_val(p, Float::i_exp(1, -(p as i32))));
        x = nx;
        y = ny;
        if done {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        iterations: 4 * p as usize,
        residual: Float::with_val(p, &x - &y).to_f64(),
    })
}

fn check_modulus(k: &Float, allow_zero: bool) -> Result<()> {
    if *k < 0 || (*k == 0 && !allow_zero) || *k >= 1 {
        return Err(Error::InvalidArgument(format!(
            "modulus {} outside (0,1)",
            k.to_f64()
        )));
    }
    Ok(())
}

/// Complete elliptic integral of the first kind, `K(k) = π / (2 AGM(1, √(1−k²)))`.
pub fn elliptic_k(k: &Float) -> Result<Float> {
    check_modulus(k, true)?;
    let p = k.prec();
    let kp = Float::with_val(p, 1 - Float::with_val(p, k * k)).sqrt();
    let m = agm(&Float::with_val(p, 1), &kp)?;
    Ok(Float::with_val(p, Cf::pi(p) / m) / 2u32)
}

/// `q = exp(−π K(√(1−k²)) / K(k))`.
pub fn nome_from_modulus(k: &Float) -> Result<Float> {
    check_modulus(k, false)?;
    let p = k.prec();
    let kp = Float::with_val(p, 1 - Float::with_val(p, k * k)).sqrt();
    let r = Float::with_val(p, elliptic_k(&kp)? / elliptic_k(k)?);
    Ok((-(r * Cf::pi(p))).exp())
}

/// A small step `(dx, dy)` with positive rational weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub dx: i8,
    pub dy: i8,
    pub w: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSet {
    steps: Vec<Step>,
}

impl StepSet {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("empty step set".into()));
        }
        for (i, s) in steps.iter().enumerate() {
            if !(-1..=1).contains(&s.dx) || !(-1..=1).contains(&s.dy) || (s.dx == 0 && s.dy == 0) {
                return Err(Error::InvalidArgument(format!(
                    "step ({}, {}) is not a small step",
                    s.dx, s.dy
                )));
            }
            if s.w <= 0 {
                return Err(Error::InvalidArgument(format!(
                    "step ({}, {}) has nonpositive weight",
                    s.dx, s.dy
                )));
            }
            if steps[..i].iter().any(|o| o.dx == s.dx && o.dy == s.dy) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate step ({}, {})",
                    s.dx, s.dy
                )));
            }
        }
        Ok(StepSet { steps })
    }

    fn unit(v: &[(i8, i8)]) -> Self {
        StepSet {
            steps: v
                .iter()
                .map(|&(dx, dy)| Step {
                    dx,
                    dy,
                    w: Rational::from(1),
                })
                .collect(),
        }
    }

    /// `{↙ ... }`: steps W, S, NE.
    pub fn kreweras() -> Self {
        Self::unit(&[(-1, 0), (0, -1), (1, 1)])
    }

    pub fn simple() -> Self {
        Self::unit(&[(0, 1), (1, 0), (0, -1), (-1, 0)])
    }

    /// N, E, S, W with weight 1 and NE with weight `a`.
    pub fn amodel(a: &Rational) -> Result<Self> {
        let mut s = Self::simple().steps;
        s.push(Step {
            dx: 1,
            dy: 1,
            w: a.clone(),
        });
        Self::new(s)
    }

    /// Parse `"dx,dy,w;dx,dy,w;..."`; weights may be integers, fractions or decimals.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let f: Vec<&str> = part.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "step '{part}' is not dx,dy,w"
                )));
            }
            let dx: i8 = f[0]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad dx in '{part}'")))?;
            let dy: i8 = f[1]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad dy in '{part}'")))?;
            steps.push(Step {
                dx,
                dy,
                w: parse_rational(f[2])?,
            });
        }
        Self::new(steps)
    }

    /// `{−s : s ∈ S}` with the same weights; walks to the origin in `S` are
    /// walks from it in the reversed set.
    pub fn reversed(&self) -> Self {
        StepSet {
            steps: self
                .steps
                .iter()
                .map(|s| Step {
                    dx: -s.dx,
                    dy: -s.dy,
                    w: s.w.clone(),
                })
                .collect(),
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// `S(1,1)`.
    pub fn total_weight(&self) -> Rational {
        self.steps.iter().fold(Rational::new(), |a, s| a + &s.w)
    }

    pub fn is_symmetric(&self) -> bool {
        self.steps.iter().all(|s| {
            self.steps
                .iter()
                .any(|o| o.dx == s.dy && o.dy == s.dx && o.w == s.w)
        })
    }

    pub fn to_spec_string(&self) -> String {
        self.steps
            .iter()
            .map(|s| format!("{},{},{}", s.dx, s.dy, s.w))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Parse `"3"`, `"1/2"` or a decimal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Ok(r) = s.parse::<Rational>() {
        return Ok(r);
    }
    let bad = || Error::InvalidArgument(format!("cannot parse '{s}' as a rational"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (ip, fp) = body.split_once('.').ok_or_else(bad)?;
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) || (ip.is_empty() && fp.is_empty())
    {
        return Err(bad());
    }
    let digits: rug::Integer = format!("{ip}{fp}")
        .trim_start_matches('0')
        .parse()
        .unwrap_or_default();
    let den = rug::Integer::from(10).pow(fp.len() as u32);
    let r = Rational::from((digits, den));
    Ok(if neg { -r } else { r })
}

/// `S(x, y) = Σ ω x^dx y^dy`.
pub fn step_poly_eval<C: Coeff>(s: &StepSet, x: &C, y: &C) -> Result<C> {
    if x.is_zero() || y.is_zero() {
        return Err(Error::InvalidArgument(
            "step polynomial is a Laurent polynomial; x and y must be nonzero".into(),
        ));
    }
    let (xi, yi) = (x.try_inv()?, y.try_inv()?);
    let pw = |v: &C, vi: &C, e: i8| match e {
        1 => v.clone(),
        -1 => vi.clone(),
        _ => v.one_like(),
    };
    let mut acc = x.zero_like();
    for st in &s.steps {
        acc = acc.add(
            &pw(x, &xi, st.dx)
                .mul(&pw(y, &yi, st.dy))
                .mul_rational(&st.w),
        );
    }
    Ok(acc)
}

#[derive(Clone, Debug)]
pub struct Kernel<C: Coeff> {
    pub steps: StepSet,
    pub t: C,
}

impl<C: Coeff> Kernel<C> {
    pub fn new(steps: StepSet, t: C) -> Self {
        Kernel { steps, t }
    }
}

/// `K(x, y) = xy (1 − t S(x, y))`.
pub fn kernel_eval<C: Coeff>(k: &Kernel<C>, x: &C, y: &C) -> Result<C> {
    let s = step_poly_eval(&k.steps, x, y)?;
    Ok(x.mul(y).mul(&x.one_like().sub(&k.t.mul(&s))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::r64;

    const P: u32 = 256;

    fn f(x: f64) -> Float {
        Float::with_val(P, x)
    }

    #[test]
    fn theta_at_half_pi() {
        let th = theta_q_series(&Alg::zero(), &NomeArgument::pi(r64(1, 2)), 0, r64(10, 1)).unwrap();
        let two_i = Alg::i().mul_int(2);
        for e in [r64(1, 4), r64(9, 4), r64(25, 4), r64(49, 4)] {
            let c = th.coeff(e).unwrap_or_else(|_| Alg::zero());
            if e < r64(10, 1) {
                assert_eq!(c, two_i, "exponent {e}");
            }
        }
        assert!(th.coeff(r64(5, 4)).unwrap().is_zero());
        let z = theta_q_series(&Alg::zero(), &NomeArgument::zero(), 0, r64(10, 1)).unwrap();
        assert!(z.is_zero_series());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let q = f(0.01);
        let d1 = theta_q_series(&Cf::zero(P), &NomeArgument::zero(), 1, r64(30, 1)).unwrap();
        let val = d1.eval_with(
            Cf::zero(P),
            |c, e| c.scale(&(Float::with_val(P, q.ln_ref()) * *e.numer() / *e.denom()).exp()),
            |a, b| a.add(&b),
        );
        let h = 1e-20;
        let zp = Cf::from_f64(P, h, 0.0);
        let zm = Cf::from_f64(P, -h, 0.0);
        let fd = theta_real_nome(&zp, &q, 0)
            .unwrap()
            .sub_raw(&theta_real_nome(&zm, &q, 0).unwrap())
            .scale(&(f(0.5) / f(h)));
        let err = val.sub_raw(&fd).abs().to_f64() / val.abs().to_f64();
        assert!(err < 1e-30, "relative error {err}");
    }

    #[test]
    fn symmetries_as_series() {
        for arg in [
            NomeArgument::new(r64(1, 3), r64(1, 4)),
            NomeArgument::tau(r64(1, 3)).with_scale(r64(1, 3)),
            NomeArgument::pi(r64(1, 6)).hatted(),
        ] {
            assert_eq!(
                theta_symmetries(&Alg::zero(), &arg, r64(12, 1)).unwrap(),
                [true; 3],
                "{arg}"
            );
        }
    }

    #[test]
    fn jacobi_fixed_point_and_involution() {
        let q = Float::with_val(P, -Cf::pi(P)).exp();
        let qh = jacobi_dual(&q).unwrap();
        assert!(Float::with_val(P, &qh - &q).abs().to_f64() < 1e-70);
        let q2 = f(0.37);
        let back = jacobi_dual(&jacobi_dual(&q2).unwrap()).unwrap();
        assert!(Float::with_val(P, &back - &q2).abs().to_f64() < 1e-70);
        assert!(jacobi_dual(&f(1.0)).is_err());
    }

    #[test]
    fn nome_self_dual_modulus() {
        let k = Float::with_val(P, 0.5f64).sqrt();
        let q = nome_from_modulus(&k).unwrap();
        let e = Float::with_val(P, -Cf::pi(P)).exp();
        assert!(Float::with_val(P, &q - &e).abs().to_f64() < 1e-70);
        let k0 = elliptic_k(&f(0.0)).unwrap();
        let h = Float::with_val(P, Cf::pi(P) / 2u32);
        assert!(Float::with_val(P, &k0 - &h).abs().to_f64() < 1e-70);
    }

    #[test]
    fn step_sets() {
        let kw = StepSet::kreweras();
        let one = Alg::one();
        assert_eq!(step_poly_eval(&kw, &one, &one).unwrap(), Alg::from_i64(3));
        let a = StepSet::amodel(&Rational::from((1, 2))).unwrap();
        assert_eq!(a.total_weight(), Rational::from((9, 2)));
        let k = Kernel::new(kw.clone(), Alg::zero());
        let x = Alg::from_i64(2);
        let y = Alg::from_i64(3);
        assert_eq!(kernel_eval(&k, &x, &y).unwrap(), Alg::from_i64(6));
        assert!(step_poly_eval(&kw, &Alg::zero(), &one).is_err());
        assert_eq!(
            StepSet::parse("1,0,1; 0,1,1/2;1,1,0.25")
                .unwrap()
                .total_weight(),
            Rational::from((7, 4))
        );
        assert!(StepSet::parse("1,0,1;1,0,2").is_err());
        assert!(StepSet::parse("2,0,1").is_err());
    }
}
