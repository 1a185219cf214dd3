//! Discrete Laplacians of quadrant functions, polyharmonicity tests, the
//! `log(n+1)` shift calculus, and least-squares extraction of the functions
//! `v_{k,ℓ,m}(i,j)` multiplying `(log n)^m / n^{kρ+ℓ+1}` in count asymptotics.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rug::{Float, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::theta::StepSet;
use crate::walk::CountTable;

/// Values a lattice function can take.
pub trait Scalar: Clone + Send + Sync + fmt::Debug + PartialEq {
    fn zero() -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn abs_f64(&self) -> f64;
    fn is_exact() -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_rational(r: &Rational) -> Self {
        r.to_f64()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn abs_f64(&self) -> f64 {
        self.abs()
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for Rational {
    fn zero() -> Self {
        Rational::new()
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn add(&self, o: &Self) -> Self {
        Rational::from(self + o)
    }
    fn sub(&self, o: &Self) -> Self {
        Rational::from(self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Rational::from(self * o)
    }
    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
    fn is_exact() -> bool {
        true
    }
}

/// `v(i,j)` on the window `[0,I]×[0,J]`, zero off the quadrant. Values
/// beyond the window are unknown, not zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeFunction<T: Scalar> {
    imax: usize,
    jmax: usize,
    values: Vec<T>,
}

impl<T: Scalar> LatticeFunction<T> {
    pub fn from_fn(imax: usize, jmax: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let values = (0..=imax)
            .flat_map(|i| (0..=jmax).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        LatticeFunction { imax, jmax, values }
    }

    pub fn zero(imax: usize, jmax: usize) -> Self {
        Self::from_fn(imax, jmax, |_, _| T::zero())
    }

    pub fn window(&self) -> (usize, usize) {
        (self.imax, self.jmax)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&T> {
        (i <= self.imax && j <= self.jmax).then(|| &self.values[i * (self.jmax + 1) + j])
    }

    /// Value at a lattice point, zero off the quadrant; `None` beyond the window.
    fn at(&self, i: i64, j: i64) -> Option<T> {
        if i < 0 || j < 0 {
            return Some(T::zero());
        }
        self.get(i as usize, j as usize).cloned()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs_f64()).fold(0.0, f64::max)
    }

    pub fn lin_comb(&self, a: &T, o: &Self, b: &T) -> Result<Self> {
        if self.window() != o.window() {
            return Err(Error::InvalidArgument("windows differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&o.values)
            .map(|(x, y)| a.mul(x).add(&b.mul(y)))
            .collect();
        Ok(LatticeFunction {
            imax: self.imax,
            jmax: self.jmax,
            values,
        })
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> LatticeFunction<U> {
        LatticeFunction {
            imax: self.imax,
            jmax: self.jmax,
            values: self.values.iter().map(f).collect(),
        }
    }
}

/// Scale `λ` in `Δv(A) = Σ ω_s v(A+s) − λ v(A)`.
#[derive(Clone, Debug, PartialEq)]
pub enum LaplacianScale {
    /// `1/t_c`, which balances the walk's growth rate
    InverseCritical,
    /// `t_c` itself
    Critical,
    Value(Rational),
}

impl LaplacianScale {
    /// `t_c` as a rational is only needed for the first two variants.
    pub fn resolve(&self, t_c: Option<&Rational>) -> Result<Rational> {
        let need = || {
            t_c.cloned().ok_or_else(|| {
                Error::InvalidArgument("t_c needed to resolve the Laplacian scale".into())
            })
        };
        match self {
            LaplacianScale::InverseCritical => Ok(Rational::from(1) / need()?),
            LaplacianScale::Critical => need(),
            LaplacianScale::Value(v) => Ok(v.clone()),
        }
    }
}

/// Points at which a Laplacian identity is asserted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Region {
    /// all of the quadrant inside the window, boundary rows included
    Quadrant,
    /// `i, j ≥ 1`
    Interior,
}

/// `Δv` on the window shrunk by the largest positive step.
pub fn laplacian<T: Scalar>(
    v: &LatticeFunction<T>,
    steps: &StepSet,
    lambda: &T,
) -> Result<LatticeFunction<T>> {
    let sx = steps
        .steps()
        .iter()
        .map(|s| s.dx.max(0) as usize)
        .max()
        .unwrap_or(0);
    let sy = steps
        .steps()
        .iter()
        .map(|s| s.dy.max(0) as usize)
        .max()
        .unwrap_or(0);
    if v.imax < sx || v.jmax < sy {
        return Err(Error::InvalidArgument(format!(
            "window {}x{} exhausted",
            v.imax, v.jmax
        )));
    }
    let (imax, jmax) = (v.imax - sx, v.jmax - sy);
    let w: Vec<(i64, i64, T)> = steps
        .steps()
        .iter()
        .map(|s| (s.dx as i64, s.dy as i64, T::from_rational(&s.w)))
        .collect();
    let values: Vec<T> = (0..=imax)
        .into_par_iter()
        .flat_map_iter(|i| {
            let w = &w;
            (0..=jmax).map(move |j| {
                let (i, j) = (i as i64, j as i64);
                let mut s = T::zero();
                for (dx, dy, wt) in w {
                    s = s.add(&wt.mul(&v.at(i + dx, j + dy).expect("inside shrunken window")));
                }
                s.sub(&lambda.mul(&v.at(i, j).expect("inside window")))
            })
        })
        .collect();
    Ok(LatticeFunction { imax, jmax, values })
}

pub fn laplacian_power<T: Scalar>(
    v: &LatticeFunction<T>,
    steps: &StepSet,
    lambda: &T,
    k: usize,
) -> Result<LatticeFunction<T>> {
    let mut u = v.clone();
    for _ in 0..k {
        u = laplacian(&u, steps, lambda)?;
    }
    Ok(u)
}

#[derive(Clone, Debug, Serialize)]
pub struct PolyharmonicReport {
    pub order: usize,
    pub holds: bool,
    pub max_residual: f64,
    /// window on which `Δᵏv` was tested
    pub tested: (usize, usize),
}

/// Whether `Δᵏ v = 0` on the region: exactly for exact scalars, within `tol`
/// (absolute) otherwise.
pub fn is_polyharmonic<T: Scalar>(
    v: &LatticeFunction<T>,
    steps: &StepSet,
    lambda: &T,
    k: usize,
    region: Region,
    tol: f64,
) -> Result<PolyharmonicReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let d = laplacian_power(v, steps, lambda, k)?;
    let lo = match region {
        Region::Quadrant => 0,
        Region::Interior => 1,
    };
    let mut holds = true;
    let mut max_residual = 0.0f64;
    for i in lo..=d.imax {
        for j in lo..=d.jmax {
            let x = d.get(i, j).unwrap();
            max_residual = max_residual.max(x.abs_f64());
            if T::is_exact() {
                holds &= *x == T::zero();
            }
        }
    }
    if !T::is_exact() {
        holds = max_residual <= tol;
    }
    Ok(PolyharmonicReport {
        order: k,
        holds,
        max_residual,
        tested: d.window(),
    })
}

// ---------------------------------------------------------------------------
// log(n+1)^m / (n+1)^ℓ in powers of 1/n and log n.

/// Coefficients `c(i, j)` with
/// `(log(n+1))^m/(n+1)^ℓ = Σ_{i=0}^{p−ℓ} Σ_j c(i,j) (log n)^j / n^{ℓ+i} + O((log n)^m/n^{p+1})`.
/// The `i = 0` entry is the leading `(log n)^m/n^ℓ`.
#[derive(Clone, Debug)]
pub struct LogShiftTable {
    pub l: u32,
    pub m: u32,
    pub p: u32,
    pub coeffs: BTreeMap<(u32, u32), Rational>,
}

fn trunc_mul(a: &[Rational], b: &[Rational], n: usize) -> Vec<Rational> {
    let mut out = vec![Rational::new(); n];
    for (i, x) in a.iter().enumerate().take(n) {
        for (j, y) in b.iter().enumerate().take(n - i) {
            out[i + j] += Rational::from(x * y);
        }
    }
    out
}

fn binom(n: u32, k: u32) -> Rational {
    (0..k).fold(Rational::from(1), |b, r| b * Rational::from((n - r, r + 1)))
}

pub fn log_shift_expansion(l: u32, m: u32, p: u32) -> Result<LogShiftTable> {
    if p <= l {
        return Err(Error::InvalidArgument(format!(
            "need p > ℓ, got p={p}, ℓ={l}"
        )));
    }
    let len = (p - l + 1) as usize;
    // log(1+x), x = 1/n
    let lg: Vec<Rational> = (0..len)
        .map(|r| {
            if r == 0 {
                Rational::new()
            } else {
                Rational::from((if r % 2 == 1 { 1 } else { -1 }, r as i64))
            }
        })
        .collect();
    // (1+x)^{−ℓ}
    let mut sh = vec![Rational::from(1)];
    for r in 1..len {
        let prev = sh[r - 1].clone();
        sh.push(prev * Rational::from((-(l as i64) - (r as i64 - 1), r as i64)));
    }
    let mut coeffs = BTreeMap::new();
    // powers of log(1+x) times the shift factor
    let mut eps_pow = vec![Rational::from(1)];
    eps_pow.resize(len, Rational::new());
    for e in 0..=m {
        let j = m - e;
        let s = trunc_mul(&eps_pow, &sh, len);
        let b = binom(m, j);
        for (i, c) in s.into_iter().enumerate() {
            if c != 0 {
                coeffs.insert((i as u32, j), Rational::from(&b * &c));
            }
        }
        eps_pow = trunc_mul(&eps_pow, &lg, len);
    }
    Ok(LogShiftTable { l, m, p, coeffs })
}

impl LogShiftTable {
    /// `c_{ℓ,m,i,j}`, zero when absent.
    pub fn c(&self, i: u32, j: u32) -> Rational {
        self.coeffs.get(&(i, j)).cloned().unwrap_or_default()
    }

    /// `(log n)^j / n^{ℓ+i}` terms.
    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &Rational)> + '_ {
        self.coeffs.iter().map(|(&(i, j), c)| (self.l + i, j, c))
    }

    pub fn eval(&self, n: &Float) -> Float {
        let p = n.prec();
        let ln = Float::with_val(p, n.ln_ref());
        let mut s = Float::with_val(p, 0);
        for (e, j, c) in self.terms() {
            let t = Float::with_val(p, ln.pow_ref_u(j)) / Float::with_val(p, n.pow_ref_u(e)) * c;
            s += t;
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "l": self.l, "m": self.m, "p": self.p,
            "terms": self.coeffs.iter().map(|(&(i, j), c)| serde_json::json!({
                "i": i, "j": j, "n_power": self.l + i, "log_power": j, "coeff": c.to_string(),
            })).collect::<Vec<_>>(),
        })
    }

    /// The left side `(log(n+1))^m/(n+1)^ℓ`.
    pub fn exact_value(&self, n: &Float) -> Float {
        let p = n.prec();
        let n1 = Float::with_val(p, n + 1u32);
        Float::with_val(p, Float::with_val(p, n1.ln_ref()).pow_ref_u(self.m)) / n1.pow_ref_u(self.l)
    }
}

trait PowRefU {
    fn pow_ref_u(&self, e: u32) -> Float;
}

impl PowRefU for Float {
    fn pow_ref_u(&self, e: u32) -> Float {
        use rug::ops::Pow;
        Float::with_val(self.prec(), self.pow(e))
    }
}

// ---------------------------------------------------------------------------
// Least-squares extraction of expansion coefficients.

/// One basis function `(log n)^m / n^{exponent}`, labelled `(k, ℓ, m)` with
/// `exponent = kρ + ℓ + 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisTerm {
    pub k: u32,
    pub l: u32,
    pub m: u32,
    pub exponent: f64,
}

/// `(k, ℓ, m)` for `1 ≤ k ≤ kmax`, `ℓ ≤ lmax`, `m ≤ mmax`. When `ρ = u/v`
/// is rational, `k` is capped at `v` and duplicate exponents are merged.
pub fn expansion_basis(
    rho: f64,
    rational: Option<(i64, i64)>,
    kmax: u32,
    lmax: u32,
    mmax: u32,
) -> Vec<BasisTerm> {
    let kcap = match rational {
        Some((_, v)) => kmax.min(v.max(1) as u32),
        None => kmax,
    };
    let mut out: Vec<BasisTerm> = Vec::new();
    for k in 1..=kcap {
        for l in 0..=lmax {
            for m in 0..=mmax {
                let exponent = k as f64 * rho + l as f64 + 1.0;
                if out
                    .iter()
                    .any(|b| b.m == m && (b.exponent - exponent).abs() < 1e-12)
                {
                    continue;
                }
                out.push(BasisTerm { k, l, m, exponent });
            }
        }
    }
    out.sort_by(|a, b| a.exponent.total_cmp(&b.exponent).then(b.m.cmp(&a.m)));
    out
}

/// Basis with prescribed exponents and no logarithms (`k = 1`, `ℓ` = index).
pub fn basis_from_exponents(exps: &[f64]) -> Vec<BasisTerm> {
    exps.iter()
        .enumerate()
        .map(|(l, &e)| BasisTerm {
            k: 1,
            l: l as u32,
            m: 0,
            exponent: e,
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionFit {
    pub basis: Vec<BasisTerm>,
    /// 2-norm condition number of the column-equilibrated design matrix
    pub condition: f64,
    /// `((i, j), [v̂_b(i,j) for b in basis])`
    pub estimates: Vec<((usize, usize), Vec<f64>)>,
    pub max_rms_residual: f64,
}

/// Largest condition number accepted by [`fit_expansion`].
pub const DEFAULT_MAX_CONDITION: f64 = 1e13;

/// Least squares of `y_n` (already multiplied by `t_cⁿ`) against the basis,
/// for several sample sets sharing the same `n` values.
pub fn fit_expansion(
    ns: &[f64],
    ys: &[((usize, usize), Vec<f64>)],
    basis: &[BasisTerm],
    max_condition: f64,
) -> Result<ExpansionFit> {
    if ns.len() < basis.len() + 1 {
        return Err(Error::InsufficientData(format!(
            "{} samples for {} basis functions",
            ns.len(),
            basis.len()
        )));
    }
    let mut a = DMatrix::<f64>::zeros(ns.len(), basis.len());
    for (r, &n) in ns.iter().enumerate() {
        for (c, b) in basis.iter().enumerate() {
            a[(r, c)] = n.ln().powi(b.m as i32) * (-b.exponent * n.ln()).exp();
        }
    }
    let norms: Vec<f64> = (0..basis.len()).map(|c| a.column(c).norm()).collect();
    for (c, nm) in norms.iter().enumerate() {
        a.column_mut(c).scale_mut(1.0 / nm);
    }
    let svd = a.clone().svd(true, true);
    let condition = svd.singular_values.max() / svd.singular_values.min();
    if !condition.is_finite() || condition > max_condition {
        return Err(Error::IllConditioned(condition));
    }
    let mut estimates = Vec::new();
    let mut max_rms_residual = 0.0f64;
    for (cell, y) in ys {
        if y.len() != ns.len() {
            return Err(Error::InvalidArgument("sample lengths differ".into()));
        }
        let yv = DVector::from_column_slice(y);
        let x = svd
            .solve(&yv, 0.0)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let scale = yv.amax().max(f64::MIN_POSITIVE);
        max_rms_residual =
            max_rms_residual.max((&a * &x - &yv).norm() / (ns.len() as f64).sqrt() / scale);
        estimates.push((*cell, (0..basis.len()).map(|c| x[c] / norms[c]).collect()));
    }
    Ok(ExpansionFit {
        basis: basis.to_vec(),
        condition,
        estimates,
        max_rms_residual,
    })
}

/// Fit `t_cⁿ q(i,j;n)` from a table (scaled backend with scale `t_c`, or
/// exact) over `n ∈ [lo, hi]` stepping by `period`, for every cell given.
pub fn extract_expansion_coeffs(
    table: &CountTable,
    t_c: f64,
    cells: &[(usize, usize)],
    basis: &[BasisTerm],
    lo: usize,
    hi: usize,
    period: usize,
) -> Result<ExpansionFit> {
    if hi > table.n_max || lo > hi || period == 0 {
        return Err(Error::InsufficientData(format!(
            "range [{lo}, {hi}] on a table of length {}",
            table.n_max
        )));
    }
    let shift = match table.backend {
        crate::walk::Backend::Scaled { scale } => (t_c / scale).ln(),
        _ => t_c.ln(),
    };
    let ns: Vec<usize> = (lo.max(1)..=hi)
        .rev()
        .step_by(period)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let mut ys = Vec::new();
    for &(i, j) in cells {
        let y: Result<Vec<f64>> = ns
            .iter()
            .map(|&n| Ok((table.log_scaled(i, j, n)? + n as f64 * shift).exp()))
            .collect();
        ys.push(((i, j), y?));
    }
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    fit_expansion(&nf, &ys, basis, DEFAULT_MAX_CONDITION)
}

impl ExpansionFit {
    pub fn index_of(&self, k: u32, l: u32, m: u32) -> Option<usize> {
        self.basis.iter().position(|b| (b.k, b.l, b.m) == (k, l, m))
    }

    /// `v̂_{k,ℓ,m}` as a lattice function on `[0,I]×[0,J]` (all cells of
    /// the window must have been fitted).
    pub fn coefficient_function(
        &self,
        k: u32,
        l: u32,
        m: u32,
        imax: usize,
        jmax: usize,
    ) -> Result<LatticeFunction<f64>> {
        let b = self
            .index_of(k, l, m)
            .ok_or_else(|| Error::InvalidArgument(format!("({k},{l},{m}) not in the basis")))?;
        let map: BTreeMap<(usize, usize), f64> =
            self.estimates.iter().map(|(c, v)| (*c, v[b])).collect();
        for i in 0..=imax {
            for j in 0..=jmax {
                if !map.contains_key(&(i, j)) {
                    return Err(Error::InvalidArgument(format!(
                        "cell ({i},{j}) was not fitted"
                    )));
                }
            }
        }
        Ok(LatticeFunction::from_fn(imax, jmax, |i, j| map[&(i, j)]))
    }
}

/// Extend boundary data `h(i,0) = row[i]` into the quadrant so that
/// `Δh = 0` with respect to `steps`, solving the identity at `(i,j)` for
/// `h(i,j+1)`. Needs `(0,1)` to be the only step with a positive `y`
/// component. Row `j` loses one entry per row, so the result lives on a
/// square window of side `(len − 1)/2`. Nothing forces `h(0,j) = h(j,0)`,
/// which makes that symmetry a genuine check.
pub fn harmonic_extension(
    row: &[Float],
    steps: &StepSet,
    lambda: &Float,
) -> Result<LatticeFunction<f64>> {
    let up: Vec<_> = steps.steps().iter().filter(|s| s.dy > 0).collect();
    if up.len() != 1 || up[0].dx != 0 {
        return Err(Error::InvalidArgument(
            "harmonic extension needs (0,1) as the only upward step".into(),
        ));
    }
    let wn = &up[0].w;
    let n = row.len();
    if n < 3 {
        return Err(Error::InsufficientData(
            "need at least three boundary values".into(),
        ));
    }
    let side = (n - 1) / 2;
    let p = lambda.prec();
    let mut h: Vec<Vec<Float>> = vec![row.iter().map(|v| Float::with_val(p, v)).collect()];
    let get = |h: &Vec<Vec<Float>>, i: i64, j: i64| -> Float {
        if i < 0 || j < 0 {
            Float::with_val(p, 0)
        } else {
            h[j as usize][i as usize].clone()
        }
    };
    for j in 0..side {
        let len = h[j].len() - 1;
        let next: Vec<Float> = (0..len)
            .map(|i| {
                let mut s = Float::with_val(p, lambda * &h[j][i]);
                for st in steps.steps().iter().filter(|s| s.dy <= 0) {
                    s -= get(&h, i as i64 + st.dx as i64, j as i64 + st.dy as i64) * &st.w;
                }
                s / wn
            })
            .collect();
        h.push(next);
    }
    Ok(LatticeFunction::from_fn(side, side, |i, j| {
        h[j][i].to_f64()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn product_of_linear_factors_is_harmonic() {
        let v = LatticeFunction::from_fn(12, 12, |i, j| {
            Rational::from((i as i64 + 1) * (j as i64 + 1))
        });
        let r =
            is_polyharmonic(&v, &StepSet::simple(), &q(4, 1), 1, Region::Quadrant, 0.0).unwrap();
        assert!(r.holds && r.max_residual == 0.0);
    }

    #[test]
    fn biharmonic_example() {
        let v = LatticeFunction::from_fn(12, 12, |i, j| {
            let (a, b) = (i as i64 + 1, j as i64 + 1);
            Rational::from(a * b * (a * a + b * b))
        });
        let st = StepSet::simple();
        assert!(
            !is_polyharmonic(&v, &st, &q(4, 1), 1, Region::Quadrant, 0.0)
                .unwrap()
                .holds
        );
        assert!(
            is_polyharmonic(&v, &st, &q(4, 1), 2, Region::Quadrant, 0.0)
                .unwrap()
                .holds
        );
    }

    #[test]
    fn constant_leaks_at_the_boundary() {
        let v = LatticeFunction::from_fn(6, 6, |_, _| Rational::from(1));
        let st = StepSet::amodel(&q(1, 2)).unwrap();
        let d = laplacian(&v, &st, &st.total_weight()).unwrap();
        assert_eq!(*d.get(3, 3).unwrap(), 0);
        assert!(*d.get(0, 3).unwrap() < 0 && *d.get(2, 0).unwrap() < 0);
        assert!(
            is_polyharmonic(&v, &st, &st.total_weight(), 1, Region::Interior, 0.0)
                .unwrap()
                .holds
        );
    }

    #[test]
    fn log_shift_first_terms() {
        let t = log_shift_expansion(1, 1, 3).unwrap();
        assert_eq!(t.c(0, 1), 1);
        assert_eq!(t.c(1, 0), 1);
        assert_eq!(t.c(1, 1), -1);
        assert!(t.terms().all(|(e, j, _)| j <= 1 && e >= 1));
        let n = Float::with_val(200, 1_000_000);
        let err = Float::with_val(200, t.eval(&n) - t.exact_value(&n)) / t.exact_value(&n);
        assert!(err.abs().to_f64() < 1e-10);
    }

    #[test]
    fn log_shift_without_logs() {
        let t = log_shift_expansion(2, 0, 6).unwrap();
        assert!(t.terms().all(|(_, j, _)| j == 0));
        // (n+1)^{-2} = Σ (−1)^i (i+1) n^{−2−i}
        for i in 0..=4 {
            assert_eq!(
                t.c(i, 0),
                Rational::from(if i % 2 == 0 { 1 } else { -1 } * (i as i64 + 1))
            );
        }
        assert!(log_shift_expansion(2, 0, 2).is_err());
    }

    #[test]
    fn rational_rho_caps_k() {
        let b = expansion_basis(1.5, Some((3, 2)), 5, 3, 1);
        assert!(b.iter().all(|t| t.k <= 2));
        let b = expansion_basis(1.7, None, 3, 1, 0);
        assert_eq!(b.len(), 6);
    }

    #[test]
    fn synthetic_round_trip() {
        let rho = 1.7574656;
        let basis = expansion_basis(rho, None, 2, 1, 1);
        let ns: Vec<f64> = (200..4000).step_by(25).map(|n| n as f64).collect();
        let h = |i: usize, j: usize| ((i + 1) * (j + 1)) as f64;
        let ys: Vec<_> = [(0, 0), (1, 2), (3, 1)]
            .iter()
            .map(|&(i, j)| {
                let y = ns
                    .iter()
                    .map(|n| {
                        h(i, j) * n.powf(-1.0 - rho) + 0.3 * n.ln() * n.powf(-2.0 - rho)
                            - 0.1 * n.powf(-1.0 - 2.0 * rho)
                    })
                    .collect();
                ((i, j), y)
            })
            .collect();
        let f = fit_expansion(&ns, &ys, &basis, DEFAULT_MAX_CONDITION).unwrap();
        let k = f.index_of(1, 0, 0).unwrap();
        for ((i, j), v) in &f.estimates {
            assert!((v[k] - h(*i, *j)).abs() < 1e-6 * h(*i, *j), "{v:?}");
        }
    }

    #[test]
    fn ill_conditioned_design_is_rejected() {
        let basis = basis_from_exponents(&[2.0, 2.0 + 1e-14]);
        let ns: Vec<f64> = (10..50).map(|n| n as f64).collect();
        let ys = vec![((0, 0), ns.iter().map(|n| n.powi(-2)).collect())];
        assert!(matches!(
            fit_expansion(&ns, &ys, &basis, DEFAULT_MAX_CONDITION),
            Err(Error::IllConditioned(_))
        ));
    }
}
