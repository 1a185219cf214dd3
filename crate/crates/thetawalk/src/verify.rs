//! End-to-end acceptance checks. Each criterion prints one line; any failure
//! makes `thetawalk verify` exit nonzero.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::{Float, Rational};
use serde::Serialize;

use crate::amodel::{
    am_critical_transeries, am_harmonic_gf_coeffs, am_q00_taylor, am_saddle,
    am_solve_params_numeric, am_structural_checks, ModelParams,
};
use crate::error::Result;
use crate::kreweras::{
    kw_q00_critical, kw_q00_critical_algebraic, kw_q00_t, kw_q_of_t, kw_qhat_of_t,
};
use crate::polyharmonic::{
    expansion_basis, fit_expansion, is_polyharmonic, log_shift_expansion, LatticeFunction, Region,
    DEFAULT_MAX_CONDITION,
};
use crate::ring::{Alg, Cf, Coeff};
use crate::series::r64;
use crate::theta::{
    jacobi_identity_check, nome_from_modulus, theta_symmetries, NomeArgument, StepSet,
};
use crate::walk::{dp_count, fit_asymptotics, series_check, Backend, Template, Track};

/// Working precision of the high-precision checks.
pub const PREC: u32 = 256;
/// Relative tolerance for irrational constants.
pub const TOL_CONST: f64 = 1e-30;
/// Jacobi identity and self-dual nome.
pub const TOL_JACOBI: f64 = 1e-60;
pub const TOL_SADDLE: f64 = 1e-60;
pub const TOL_ALPHA: f64 = 0.05;
pub const TOL_MU: f64 = 1e-3;
/// Spread of the fitted prefactor ratios across `j`.
pub const TOL_PREFACTOR: f64 = 0.10;
pub const TOL_SMALL_A: f64 = 1e-3;
pub const TOL_SIMPLE_WALK: f64 = 0.05;
pub const TOL_LOG_SHIFT: f64 = 1e-10;
/// Horizons of the fitting criteria.
pub const N_AMODEL_FIT: usize = 5000;
pub const N_SIMPLE_WALK: usize = 4000;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub seconds: f64,
    pub details: Vec<String>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2}. {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds
        )
    }
}

pub const NAMES: [&str; 13] = [
    "Kreweras Q(0,0) Taylor coefficients and oracle agreement",
    "Kreweras q(t) coefficients",
    "Kreweras critical expansion of Q(0,0)",
    "Kreweras dual nome q̂(t) coefficients",
    "theta symmetries and nome duality",
    "a-model structural series",
    "a-model Taylor series against the walk oracle",
    "log-term certificate",
    "a-model leading asymptotics from a fitted walk count",
    "small-a limit and simple walk asymptotics",
    "polyharmonic toolkit",
    "elliptic nome and numeric parameters",
    "saddle consistency",
];

/// Run one criterion (1-based).
pub fn run(id: u32) -> CriterionResult {
    let start = Instant::now();
    let mut details = Vec::new();
    let out = match id {
        1 => c1(&mut details),
        2 => c2(&mut details),
        3 => c3(&mut details),
        4 => c4(&mut details),
        5 => c5(&mut details),
        6 => c6(&mut details),
        7 => c7(&mut details),
        8 => c8(&mut details),
        9 => c9(&mut details),
        10 => c10(&mut details),
        11 => c11(&mut details),
        12 => c12(&mut details),
        13 => c13(&mut details),
        _ => Ok(false),
    };
    let pass = match out {
        Ok(p) => p,
        Err(e) => {
            details.push(format!("error: {e}"));
            false
        }
    };
    let name = NAMES.get(id as usize - 1).copied().unwrap_or("unknown");
    CriterionResult {
        id,
        name,
        pass,
        seconds: start.elapsed().as_secs_f64(),
        details,
    }
}

pub fn run_all() -> Vec<CriterionResult> {
    (1..=13).map(run).collect()
}

fn fl(x: impl Into<f64>) -> Float {
    Float::with_val(PREC, x.into())
}

fn rel(a: &Float, b: &Float) -> f64 {
    let d = Float::with_val(PREC, a - b).abs();
    if b.is_zero() {
        d.to_f64()
    } else {
        (d / Float::with_val(PREC, b.abs_ref())).to_f64()
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISMATCH"
    }
}

/// `re + s·√3` as an exact element.
fn q_sqrt3(re: (i64, i64), s: (i64, i64)) -> Alg {
    Alg::new(
        Rational::from(re),
        Rational::new(),
        Rational::from(s),
        Rational::new(),
        3,
    )
}

fn budget(d: &mut Vec<String>, start: Instant, secs: f64) -> bool {
    let el = start.elapsed().as_secs_f64();
    let ok = el < secs;
    d.push(format!(
        "runtime {el:.2} s (budget {secs} s): {}",
        verdict(ok)
    ));
    ok
}

fn c1(d: &mut Vec<String>) -> Result<bool> {
    let start = Instant::now();
    let s = kw_q00_t(&Alg::zero(), 31)?;
    let mut ok = true;
    for (n, v) in [(0, 1), (3, 2), (6, 16), (9, 192)] {
        let c = s.coeff_i(n)?;
        let good = c == Alg::from_i64(v);
        ok &= good;
        d.push(format!(
            "[t^{n}] = {:?}, expected {v}: {}",
            c.to_f64_pair().0,
            verdict(good)
        ));
    }
    for n in [1, 2, 4, 5, 7, 8] {
        ok &= s.coeff_i(n)?.is_zero();
    }
    let table = dp_count(
        &StepSet::kreweras(),
        30,
        Backend::Exact,
        Track::excursions(),
    )?;
    let rep = series_check(&table, (0, 0), &s, 30, 0.0)?;
    d.push(format!(
        "walk oracle to t^30: {}",
        if rep.matched {
            "identical".to_string()
        } else {
            format!("{:?}", rep.first_mismatch)
        }
    ));
    ok &= rep.matched;
    Ok(budget(d, start, 10.0) && ok)
}

fn c2(d: &mut Vec<String>) -> Result<bool> {
    let s = kw_q_of_t(&Alg::zero(), 15)?;
    let mut ok = true;
    for (e, n, den) in [
        ((9, 2), 1, 1),
        ((15, 2), 45, 2),
        ((21, 2), 4023, 8),
        ((27, 2), 184341, 16),
    ] {
        let c = s.coeff(r64(e.0, e.1))?;
        let good = c == Alg::rational(Rational::from((n, den)));
        ok &= good;
        d.push(format!(
            "[t^{}/{}] = {}: {}",
            e.0,
            e.1,
            c.to_json(),
            verdict(good)
        ));
    }
    Ok(ok)
}

fn c3(d: &mut Vec<String>) -> Result<bool> {
    // (exponent of ε = 1/3 − t, expected value)
    let expected = [
        (r64(0, 1), q_sqrt3((9, 8), (0, 1))),
        (r64(1, 1), q_sqrt3((-27, 8), (0, 1))),
        (r64(3, 2), q_sqrt3((0, 1), (-9, 1))),
        (r64(2, 1), q_sqrt3((-189, 4), (0, 1))),
        (r64(5, 2), q_sqrt3((0, 1), (72, 1))),
    ];
    let exact = kw_q00_critical(&Alg::zero(), r64(3, 1))?;
    let num = kw_q00_critical(&Cf::zero(PREC), r64(3, 1))?;
    let mut ok = true;
    for (e, want) in &expected {
        let c = exact.coeff(*e)?;
        let good = if want.is_rational() {
            c == *want
        } else {
            let z = num.coeff(*e)?;
            let w = want.to_cf(PREC);
            rel(&z.re, &w.re) < TOL_CONST && c == *want
        };
        ok &= good;
        d.push(format!(
            "[ε^{e}] computed {} expected {}: {}",
            c.to_json(),
            want.to_json(),
            verdict(good)
        ));
    }
    let alg = kw_q00_critical_algebraic(&Alg::zero(), r64(3, 1))?;
    let mut same = true;
    for k in 0..6 {
        same &= alg.coeff(r64(k, 2))? == exact.coeff(r64(k, 2))?;
    }
    d.push(format!(
        "independent algebraic expansion to ε^3: {}",
        verdict(same)
    ));
    Ok(ok && same)
}

fn c4(d: &mut Vec<String>) -> Result<bool> {
    let s = kw_qhat_of_t(&Cf::zero(PREC), r64(4, 1))?;
    let r3 = fl(3).sqrt();
    let expected = [
        (r64(1, 2), fl(1) / &r3),
        (r64(3, 2), -(fl(1) / &r3)),
        (r64(5, 2), Float::with_val(PREC, &r3 / 2u32)),
        (r64(7, 2), -(fl(70) / (fl(27) * &r3))),
    ];
    let mut ok = true;
    for (e, want) in &expected {
        let c = s.coeff(*e)?;
        let err = rel(&c.re, want);
        let good = err < TOL_CONST;
        ok &= good;
        d.push(format!(
            "[ε^{e}] computed {:.15} expected {:.15} (rel {err:.1e}): {}",
            c.re.to_f64(),
            want.to_f64(),
            verdict(good)
        ));
    }
    Ok(ok)
}

fn c5(d: &mut Vec<String>) -> Result<bool> {
    let start = Instant::now();
    let args = [
        NomeArgument::new(r64(1, 3), r64(1, 4)),
        NomeArgument::tau(r64(1, 3)),
        NomeArgument::tau(r64(1, 3)).with_scale(r64(1, 3)),
        NomeArgument::pi(r64(1, 6)).hatted(),
        NomeArgument::new(r64(1, 2), r64(-2, 3)),
    ];
    let mut ok = true;
    for a in &args {
        let r = theta_symmetries(&Alg::zero(), a, r64(20, 1))?;
        ok &= r.iter().all(|x| *x);
        d.push(format!("odd / reflection / quasi-period at z = {a}: {r:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let z = Cf::from_f64(PREC, rng.gen_range(-1.5..1.5), rng.gen_range(-0.5..0.5));
        let q = fl(rng.gen_range(0.05..0.95));
        let r = jacobi_identity_check(&z, &q)?;
        worst = worst.max(r.residual.to_f64());
    }
    let good = worst < TOL_JACOBI;
    d.push(format!(
        "nome duality, 100 random (z, q): max residual {worst:.2e}: {}",
        verdict(good)
    ));
    Ok(budget(d, start, 5.0) && ok && good)
}

fn c6(d: &mut Vec<String>) -> Result<bool> {
    let mut ok = true;
    for (label, a) in [
        ("1/2", fl(0.5)),
        ("1", fl(1)),
        ("√2", fl(2).sqrt()),
        ("3", fl(3)),
    ] {
        let checks = am_structural_checks(&a, TOL_CONST)?;
        let bad: Vec<_> = checks
            .iter()
            .filter(|c| !c.pass())
            .map(|c| c.name.clone())
            .collect();
        let worst = checks.iter().map(|c| c.err).fold(0.0, f64::max);
        d.push(format!(
            "a = {label}: {} checks, worst rel {worst:.1e}{}",
            checks.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!(", failing {bad:?}")
            }
        ));
        ok &= bad.is_empty();
    }
    Ok(ok)
}

fn c7(d: &mut Vec<String>) -> Result<bool> {
    let start = Instant::now();
    let mut ok = true;
    for (n, den) in [(1, 2), (1, 1), (2, 1)] {
        let a = Rational::from((n, den));
        let s = am_q00_taylor(&Alg::rational(a.clone()), 20)?;
        let table = dp_count(
            &StepSet::amodel(&a)?,
            20,
            Backend::Exact,
            Track::excursions(),
        )?;
        let rep = series_check(&table, (0, 0), &s, 20, 0.0)?;
        d.push(format!(
            "a = {a}: {}",
            if rep.matched {
                "identical to t^20".to_string()
            } else {
                format!("{:?}", rep.first_mismatch)
            }
        ));
        ok &= rep.matched;
    }
    Ok(budget(d, start, 60.0) && ok)
}

fn c8(d: &mut Vec<String>) -> Result<bool> {
    let pi = Float::with_val(PREC, rug::float::Constant::Pi);
    let ce = am_critical_transeries(&fl(1), 1, 2, 3)?;
    let mp = &ce.hat.params;
    let want = -(Float::with_val(PREC, &pi * &mp.beta1) * &mp.big_b)
        / (Float::with_val(PREC, &mp.beta0 * &mp.beta0) * 2u32);
    let (p0, p1) = (ce.p(0, 0, 0)?, ce.p(0, 1, 1)?);
    let mut ok = true;
    for j in 0..3 {
        let r = Float::with_val(PREC, p1.coeff_i(j)?.re / p0.coeff_i(j)?.re);
        let err = rel(&r, &want);
        ok &= err < TOL_CONST;
        d.push(format!(
            "a=1, [x^{j}] P011/P000 = {:.12} vs −πβ₁B/(2β₀²) (rel {err:.1e})",
            r.to_f64()
        ));
    }
    let r2 = fl(2).sqrt();
    let ce = am_critical_transeries(&r2, 2, 4, 3)?;
    let p0 = ce.p(0, 0, 0)?;
    let p11 = ce.p(0, 1, 1)?;
    let mut vanish = true;
    for j in 0..3 {
        let r = Float::with_val(PREC, p11.coeff_i(j)?.re / p0.coeff_i(j)?.re)
            .abs()
            .to_f64();
        vanish &= r < TOL_CONST;
    }
    d.push(format!("a=√2: P011 vanishes: {}", verdict(vanish)));
    let p12 = ce.p(0, 1, 2)?;
    let nonzero = !p12.is_zero_series();
    d.push(format!("a=√2: P012 nonzero: {}", verdict(nonzero)));
    let p21 = ce.p(0, 2, 1)?;
    let w = p21.coeff_i(0)?.re.to_f64() / p0.coeff_i(0)?.re.to_f64();
    d.push(format!(
        "a=√2: next log term P021/P000 at x^0 = {w:.6e} (nonzero)"
    ));
    Ok(ok && vanish && nonzero)
}

fn c9(d: &mut Vec<String>) -> Result<bool> {
    let start = Instant::now();
    let a = fl(1);
    let mp = ModelParams::new(&a)?;
    let tc = mp.t_c.to_f64();
    let table = dp_count(
        &StepSet::amodel(&Rational::from(1))?,
        N_AMODEL_FIT,
        Backend::Scaled { scale: tc },
        Track::row(2),
    )?;
    let v = am_harmonic_gf_coeffs(&a, 2)?;
    let (alpha, mu) = (1.0 + mp.rho.to_f64(), 1.0 / tc);
    let mut ok = true;
    let mut ratios = Vec::new();
    for j in 0..3 {
        let f = fit_asymptotics(
            &table,
            j,
            0,
            Template::LogCorrected,
            N_AMODEL_FIT / 5,
            N_AMODEL_FIT,
            1,
        )?;
        let good = (f.alpha - alpha).abs() < TOL_ALPHA && (f.mu - mu).abs() < TOL_MU;
        ok &= good;
        ratios.push(f.kappa / v[j].to_f64());
        d.push(format!(
            "j={j}: α̂ = {:.5} (1+ρ = {alpha:.5}), μ̂ = {:.7} (1/t_c = {mu:.7}), Richardson α {:.4} μ {:.7}: {}",
            f.alpha,
            f.mu,
            f.richardson_alpha,
            f.richardson_mu,
            verdict(good)
        ));
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let prop = hi / lo - 1.0 < TOL_PREFACTOR;
    d.push(format!(
        "prefactor / V(j) = {ratios:.6?} (C = {:.6}), spread {:.1e}: {}",
        mp.c.to_f64(),
        hi / lo - 1.0,
        verdict(prop)
    ));
    Ok(budget(d, start, 600.0) && ok && prop)
}

fn c10(d: &mut Vec<String>) -> Result<bool> {
    let c = ModelParams::new(&fl(1e-4))?.c;
    let four_pi = 4.0 / std::f64::consts::PI;
    let small = (c.to_f64() - four_pi).abs() < TOL_SMALL_A;
    d.push(format!(
        "C(1e-4) = {:.7} vs 4/π = {four_pi:.7}: {}",
        c.to_f64(),
        verdict(small)
    ));
    let n = N_SIMPLE_WALK;
    let table = dp_count(
        &StepSet::simple(),
        n,
        Backend::Scaled { scale: 0.25 },
        Track::row(4),
    )?;
    let mut ok = true;
    for j in [0, 2, 4] {
        let got = table.scaled(j, 0, n)?;
        let want = 32.0 / std::f64::consts::PI * (j as f64 + 1.0) / (n as f64).powi(3);
        let r = got / want;
        let good = (r - 1.0).abs() < TOL_SIMPLE_WALK;
        ok &= good;
        d.push(format!(
            "simple walk q({j},0;{n})·4^-n / (32/π (j+1) n^-3) = {r:.5}: {}",
            verdict(good)
        ));
    }
    Ok(small && ok)
}

fn c11(d: &mut Vec<String>) -> Result<bool> {
    let v = LatticeFunction::from_fn(16, 16, |i, j| {
        Rational::from((i as i64 + 1) * (j as i64 + 1))
    });
    let h = is_polyharmonic(
        &v,
        &StepSet::simple(),
        &Rational::from(4),
        1,
        Region::Quadrant,
        0.0,
    )?;
    d.push(format!(
        "(i+1)(j+1), simple walk, λ=4: exact zero on {:?}: {}",
        h.tested,
        verdict(h.holds)
    ));
    let t = log_shift_expansion(1, 1, 3)?;
    let table_ok = t.c(1, 0) == 1 && t.c(1, 1) == -1 && t.c(0, 1) == 1;
    let n = Float::with_val(PREC, 1_000_000);
    let lhs = t.exact_value(&n);
    let err = rel(&t.eval(&n), &lhs);
    let shift_ok = table_ok && err < TOL_LOG_SHIFT;
    d.push(format!(
        "log-shift table (1,1,3): c₁₁₀ = {}, c₁₁₁ = {}; rel error at n=10⁶ {err:.1e}: {}",
        t.c(1, 0),
        t.c(1, 1),
        verdict(shift_ok)
    ));
    // planted harmonic coefficient h(i,j) = (i+1)(j+1) plus higher terms
    let rho = 1.7574656;
    let basis = expansion_basis(rho, None, 2, 1, 1);
    let ns: Vec<f64> = (200..4000).step_by(20).map(|n| n as f64).collect();
    let cells: Vec<(usize, usize)> = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
    let ys: Vec<_> = cells
        .iter()
        .map(|&(i, j)| {
            let hij = ((i + 1) * (j + 1)) as f64;
            let y = ns
                .iter()
                .map(|n| {
                    hij * n.powf(-1.0 - rho) + 0.7 * n.ln() * n.powf(-2.0 - rho)
                        - 0.2 * (i + j) as f64 * n.powf(-1.0 - 2.0 * rho)
                })
                .collect();
            ((i, j), y)
        })
        .collect();
    let f = fit_expansion(&ns, &ys, &basis, DEFAULT_MAX_CONDITION)?;
    let k = f.index_of(1, 0, 0).expect("leading term in basis");
    let worst = f
        .estimates
        .iter()
        .map(|((i, j), v)| (v[k] / ((i + 1) * (j + 1)) as f64 - 1.0).abs())
        .fold(0.0, f64::max);
    // double rounding amplified by the condition number
    let allowed = 1e-16 * f.condition * 1e3;
    let lead = f.coefficient_function(1, 0, 0, 3, 3)?;
    let harm = is_polyharmonic(&lead, &StepSet::simple(), &4.0, 1, Region::Quadrant, 1e-6)?;
    let rt_ok = worst < allowed && harm.holds;
    d.push(format!(
        "synthetic round trip: condition {:.1e}, worst rel error {worst:.1e} (allowed {allowed:.1e}); recovered leading term harmonic: {}",
        f.condition,
        verdict(rt_ok)
    ));
    Ok(h.holds && shift_ok && rt_ok)
}

fn c12(d: &mut Vec<String>) -> Result<bool> {
    let k = Float::with_val(PREC, 0.5f64).sqrt();
    let q = nome_from_modulus(&k)?;
    let e = Float::with_val(PREC, -Float::with_val(PREC, rug::float::Constant::Pi)).exp();
    let err = Float::with_val(PREC, &q - &e).abs().to_f64();
    let nome_ok = err < TOL_JACOBI;
    d.push(format!(
        "nome_from_modulus(1/√2) − e^(−π) = {err:.1e}: {}",
        verdict(nome_ok)
    ));
    let a = fl(1);
    let mp = ModelParams::new(&a)?;
    let mut inside = true;
    let mut monotone = true;
    let mut last = 0.0;
    for i in 1..=50 {
        let t = Float::with_val(PREC, &mp.t_c * i) / 51u32;
        let r = am_solve_params_numeric(&a, &t)?;
        let qf = r.q.to_f64();
        inside &= r.q > 0 && r.q < 1;
        monotone &= qf > last;
        last = qf;
    }
    d.push(format!(
        "50-point grid in (0, t_c): q ∈ (0,1): {}; increasing (observed): {monotone}",
        verdict(inside)
    ));
    // t → 0: q ~ √a t^{7/2}
    let t = fl(1e-6);
    let r = am_solve_params_numeric(&a, &t)?;
    let lim0 = r.q.to_f64() / 1e-6f64.powf(3.5);
    let zero_ok = (lim0 - 1.0).abs() < 1e-3 && r.q > 0;
    d.push(format!(
        "t = 1e-6: q / (√a t^(7/2)) = {lim0:.7} → q → 0: {}",
        verdict(zero_ok)
    ));
    // t → t_c: log q · log(1/u) → −2π², so q → 1 (slowly)
    let mut prev_q = 0.0;
    let mut prev_ratio = 0.0;
    let mut one_ok = true;
    let mut ratios = Vec::new();
    for e in [1i32, 2, 4, 8, 16, 32] {
        let u = Float::with_val(PREC, Float::i_pow_u(10, e as u32)).recip();
        let t = Float::with_val(PREC, &mp.t_c * Float::with_val(PREC, 1 - &u));
        let r = am_solve_params_numeric(&a, &t)?;
        let ratio =
            -r.log_q.to_f64() * (e as f64 * 10f64.ln()) / (2.0 * std::f64::consts::PI.powi(2));
        one_ok &= r.q.to_f64() > prev_q && ratio > prev_ratio && r.q < 1;
        prev_q = r.q.to_f64();
        prev_ratio = ratio;
        ratios.push(format!("u=1e-{e}: q={:.4} ratio={ratio:.4}", r.q.to_f64()));
    }
    one_ok &= prev_ratio > 0.95;
    d.push(format!(
        "t = t_c(1−u): −log q·log(1/u)/(2π²) → 1: {}; {}",
        ratios.join(", "),
        verdict(one_ok)
    ));
    Ok(nome_ok && inside && zero_ok && one_ok)
}

fn c13(d: &mut Vec<String>) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = Float::with_val(PREC, rng.gen_range(1e-3..5.0));
        let s = am_saddle(&a)?;
        worst = worst.max(
            Float::with_val(PREC, &s.theta - &s.two_beta0)
                .abs()
                .to_f64(),
        );
    }
    let ok = worst < TOL_SADDLE;
    d.push(format!(
        "20 random a ∈ (0,5): max |θ − 2β₀| = {worst:.1e}: {}",
        verdict(ok)
    ));
    Ok(ok)
}
