//! Exact and scaled enumeration of weighted quadrant walks, an exhaustive
//! path oracle for small lengths, and asymptotic fitting of count sequences.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Integer, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::{Alg, Coeff};
use crate::series::PuiseuxSeries;
use crate::theta::StepSet;

/// Number representation used by [`dp_count`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Backend {
    /// Big integers `q(i,j;n)·Dⁿ` where `D` clears the weight denominators.
    Exact,
    /// Doubles holding `q(i,j;n)·scaleⁿ`, with a per-step power-of-two shift.
    Scaled { scale: f64 },
    /// `q(i,j;n)·Dⁿ mod p`.
    Modular { modulus: u64 },
}

impl Backend {
    pub fn parse(s: &str, scale: f64) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "scaled" | "double" | "f64" => Ok(Backend::Scaled { scale }),
            "modular" => Ok(Backend::Modular {
                modulus: DEFAULT_MODULUS,
            }),
            _ => Err(Error::InvalidArgument(format!(
                "unknown backend '{s}' (exact|scaled|modular)"
            ))),
        }
    }
}

/// `2⁶¹ − 1`.
pub const DEFAULT_MODULUS: u64 = (1 << 61) - 1;

/// Which cells are kept for every length `n`.
#[derive(Clone, Debug, PartialEq)]
pub enum Track {
    /// every reachable cell (small horizons only)
    All,
    Cells(Vec<(usize, usize)>),
}

impl Track {
    pub fn excursions() -> Self {
        Track::Cells(vec![(0, 0)])
    }
    /// The boundary row `(j, 0)`, `j ≤ jmax`.
    pub fn row(jmax: usize) -> Self {
        Track::Cells((0..=jmax).map(|j| (j, 0)).collect())
    }
    pub fn window(imax: usize, jmax: usize) -> Self {
        Track::Cells(
            (0..=imax)
                .flat_map(|i| (0..=jmax).map(move |j| (i, j)))
                .collect(),
        )
    }
}

#[derive(Clone, Debug)]
struct Plane<T> {
    ni: usize,
    nj: usize,
    data: Vec<T>,
}

impl<T: Clone> Plane<T> {
    fn get(&self, i: usize, j: usize) -> Option<&T> {
        if i < self.ni && j < self.nj {
            Some(&self.data[i * self.nj + j])
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
enum Store<T> {
    Planes(Vec<Plane<T>>),
    /// `[cell][n]`
    Cells(Vec<(usize, usize)>, Vec<Vec<T>>),
}

impl<T: Clone> Store<T> {
    fn new(track: &Track) -> Self {
        match track {
            Track::All => Store::Planes(Vec::new()),
            Track::Cells(c) => Store::Cells(c.clone(), vec![Vec::new(); c.len()]),
        }
    }

    fn record(&mut self, plane: &Plane<T>, zero: &T) {
        match self {
            Store::Planes(v) => v.push(plane.clone()),
            Store::Cells(cells, vals) => {
                for (k, &(i, j)) in cells.iter().enumerate() {
                    vals[k].push(plane.get(i, j).cloned().unwrap_or_else(|| zero.clone()));
                }
            }
        }
    }

    fn get(&self, i: usize, j: usize, n: usize) -> Option<Option<&T>> {
        match self {
            Store::Planes(v) => v.get(n).map(|p| p.get(i, j)),
            Store::Cells(cells, vals) => {
                let k = cells.iter().position(|&c| c == (i, j))?;
                vals[k].get(n).map(Some)
            }
        }
    }
}

/// Per-backend arithmetic used by the plane update.
trait DpValue: Clone + Send + Sync {
    type W: Clone + Send + Sync;
    fn zero() -> Self;
    /// `dst[j] += w · src[j]`
    fn axpy(dst: &mut [Self], w: &Self::W, src: &[Self], ctx: u64);
}

impl DpValue for f64 {
    type W = f64;
    fn zero() -> Self {
        0.0
    }
    fn axpy(dst: &mut [f64], w: &f64, src: &[f64], _: u64) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += w * s;
        }
    }
}

impl DpValue for Integer {
    type W = Integer;
    fn zero() -> Self {
        Integer::new()
    }
    fn axpy(dst: &mut [Integer], w: &Integer, src: &[Integer], _: u64) {
        for (d, s) in dst.iter_mut().zip(src) {
            if *s != 0 {
                *d += w * s;
            }
        }
    }
}

impl DpValue for u64 {
    type W = u64;
    fn zero() -> Self {
        0
    }
    fn axpy(dst: &mut [u64], w: &u64, src: &[u64], m: u64) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = ((*d as u128 + *w as u128 * *s as u128) % m as u128) as u64;
        }
    }
}

/// Box of cells that matter at length `n`: reachable from the origin and
/// able to reach a tracked cell within the remaining steps.
fn bounds(n: usize, n_max: usize, reach: Option<(usize, usize)>) -> (usize, usize) {
    let r = n_max - n;
    match reach {
        None => (n + 1, n + 1),
        Some((im, jm)) => (n.min(im + r) + 1, n.min(jm + r) + 1),
    }
}

/// One step of the recurrence; `data` is a recycled buffer.
fn step_plane<T: DpValue>(
    old: &Plane<T>,
    steps: &[(i8, i8, T::W)],
    ni: usize,
    nj: usize,
    ctx: u64,
    mut data: Vec<T>,
) -> Plane<T> {
    data.clear();
    data.resize(ni * nj, T::zero());
    data.par_chunks_mut(nj).enumerate().for_each(|(i, row)| {
        for (dx, dy, w) in steps {
            let si = i as i64 - *dx as i64;
            if si < 0 || si as usize >= old.ni {
                continue;
            }
            let src = &old.data[si as usize * old.nj..(si as usize + 1) * old.nj];
            // new[j] += w·old[j − dy]
            let dy = *dy as i64;
            let j0 = dy.max(0) as usize;
            let j1 = ((old.nj as i64 + dy).min(nj as i64)).max(0) as usize;
            if j0 >= j1 {
                continue;
            }
            let s0 = (j0 as i64 - dy) as usize;
            T::axpy(&mut row[j0..j1], w, &src[s0..s0 + (j1 - j0)], ctx);
        }
    });
    Plane { ni, nj, data }
}

#[derive(Clone, Debug)]
enum Data {
    Exact(Store<Integer>),
    Scaled { store: Store<f64>, shift: Vec<i64> },
    Modular(Store<u64>),
}

/// Counts `q(i,j;n)` of weighted quadrant walks from the origin, for the
/// tracked cells and every `n ≤ n_max`.
#[derive(Clone, Debug)]
pub struct CountTable {
    pub steps: StepSet,
    pub n_max: usize,
    pub backend: Backend,
    pub track: Track,
    /// common denominator of the weights
    pub den: Integer,
    data: Data,
}

/// Default memory budget for [`dp_count`]: 2 GiB.
pub const DEFAULT_BUDGET: usize = 2 << 30;

pub fn dp_count(
    steps: &StepSet,
    n_max: usize,
    backend: Backend,
    track: Track,
) -> Result<CountTable> {
    dp_count_with_budget(steps, n_max, backend, track, DEFAULT_BUDGET)
}

pub fn dp_count_with_budget(
    steps: &StepSet,
    n_max: usize,
    backend: Backend,
    track: Track,
    budget: usize,
) -> Result<CountTable> {
    let den = steps
        .steps()
        .iter()
        .fold(Integer::from(1), |d, s| d.lcm(s.w.denom()));
    let int_w: Vec<(i8, i8, Integer)> = steps
        .steps()
        .iter()
        .map(|s| {
            (
                s.dx,
                s.dy,
                (s.w.numer() * Integer::from(&den / s.w.denom())),
            )
        })
        .collect();
    let reach = match &track {
        Track::All => None,
        Track::Cells(c) if c.is_empty() => {
            return Err(Error::InvalidArgument("no cells to track".into()))
        }
        Track::Cells(c) => Some((
            c.iter().map(|x| x.0).max().unwrap(),
            c.iter().map(|x| x.1).max().unwrap(),
        )),
    };
    // working planes plus what is recorded
    let work: usize = (0..=n_max)
        .map(|n| bounds(n, n_max, reach))
        .map(|(a, b)| a * b)
        .max()
        .unwrap_or(1);
    let growth = (steps.total_weight().to_f64() * den.to_f64())
        .log2()
        .max(1.0);
    let per = |n: usize| -> usize {
        match backend {
            Backend::Exact => 16 + (growth * n as f64 / 8.0) as usize,
            _ => 8,
        }
    };
    let stored: usize = match &track {
        Track::All => (0..=n_max).map(|n| (n + 1) * (n + 1) * per(n)).sum(),
        Track::Cells(c) => c.len() * (n_max + 1) * per(n_max),
    };
    let required = stored + 2 * work * per(n_max);
    if required > budget {
        return Err(Error::Memory {
            required: required as u64,
            budget: budget as u64,
        });
    }
    let data = match backend {
        Backend::Exact => Data::Exact(run(&int_w, n_max, reach, &track, Integer::from(1), 0)),
        Backend::Modular { modulus } => {
            if modulus < 2 {
                return Err(Error::InvalidArgument("modulus must be at least 2".into()));
            }
            let w: Vec<_> = int_w
                .iter()
                .map(|(x, y, w)| (*x, *y, Integer::from(w % modulus).to_u64().unwrap()))
                .collect();
            Data::Modular(run(&w, n_max, reach, &track, 1u64, modulus))
        }
        Backend::Scaled { scale } => {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "scale must be positive, got {scale}"
                )));
            }
            let w: Vec<_> = steps
                .steps()
                .iter()
                .map(|s| (s.dx, s.dy, s.w.to_f64() * scale))
                .collect();
            let renorm = |p: &mut Plane<f64>| -> i64 {
                let m = p.data.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                if m > 1e150 || (m < 1e-150 && m > 0.0) {
                    let e = m.log2().round() as i64;
                    let f = (-e as f64).exp2();
                    p.data.iter_mut().for_each(|x| *x *= f);
                    e
                } else {
                    0
                }
            };
            let (store, shift) = run_scaled(&w, n_max, reach, &track, renorm);
            Data::Scaled { store, shift }
        }
    };
    Ok(CountTable {
        steps: steps.clone(),
        n_max,
        backend,
        track,
        den,
        data,
    })
}

fn run<T: DpValue>(
    w: &[(i8, i8, T::W)],
    n_max: usize,
    reach: Option<(usize, usize)>,
    track: &Track,
    one: T,
    ctx: u64,
) -> Store<T> {
    let (ni, nj) = bounds(0, n_max, reach);
    let mut plane = Plane {
        ni,
        nj,
        data: vec![T::zero(); ni * nj],
    };
    plane.data[0] = one;
    let mut store = Store::new(track);
    let mut spare = Vec::new();
    store.record(&plane, &T::zero());
    for n in 1..=n_max {
        let (ni, nj) = bounds(n, n_max, reach);
        let next = step_plane(&plane, w, ni, nj, ctx, std::mem::take(&mut spare));
        spare = std::mem::replace(&mut plane, next).data;
        store.record(&plane, &T::zero());
    }
    store
}

fn run_scaled(
    w: &[(i8, i8, f64)],
    n_max: usize,
    reach: Option<(usize, usize)>,
    track: &Track,
    renorm: impl Fn(&mut Plane<f64>) -> i64,
) -> (Store<f64>, Vec<i64>) {
    let (ni, nj) = bounds(0, n_max, reach);
    let mut plane = Plane {
        ni,
        nj,
        data: vec![0.0; ni * nj],
    };
    plane.data[0] = 1.0;
    let mut store = Store::new(track);
    let mut spare = Vec::new();
    store.record(&plane, &0.0);
    let mut shift = vec![0i64];
    let mut acc = 0i64;
    for n in 1..=n_max {
        let (ni, nj) = bounds(n, n_max, reach);
        let next = step_plane(&plane, w, ni, nj, 0, std::mem::take(&mut spare));
        spare = std::mem::replace(&mut plane, next).data;
        acc += renorm(&mut plane);
        shift.push(acc);
        store.record(&plane, &0.0);
    }
    (store, shift)
}

impl CountTable {
    /// `Dⁿ`
    pub fn dpow(&self, n: usize) -> Integer {
        Integer::from((&self.den).pow(n as u32))
    }

    fn missing(&self, i: usize, j: usize, n: usize) -> Error {
        Error::InvalidArgument(format!("cell ({i},{j}) at n={n} not in the table"))
    }

    /// Exact count (exact backend only).
    pub fn exact(&self, i: usize, j: usize, n: usize) -> Result<Rational> {
        let Data::Exact(s) = &self.data else {
            return Err(Error::RingMismatch);
        };
        let v = s.get(i, j, n).ok_or_else(|| self.missing(i, j, n))?;
        let v = v.cloned().unwrap_or_default();
        Ok(Rational::from((v, self.dpow(n))))
    }

    /// Count modulo the backend's modulus (`q·Dⁿ`).
    pub fn modular(&self, i: usize, j: usize, n: usize) -> Result<u64> {
        let Data::Modular(s) = &self.data else {
            return Err(Error::RingMismatch);
        };
        let v = s.get(i, j, n).ok_or_else(|| self.missing(i, j, n))?;
        Ok(v.copied().unwrap_or(0))
    }

    /// `ln(q(i,j;n)·scaleⁿ)` for the scaled backend, `ln q` for the others;
    /// `−∞` for zero counts.
    pub fn log_scaled(&self, i: usize, j: usize, n: usize) -> Result<f64> {
        match &self.data {
            Data::Scaled { store, shift } => {
                let v = store
                    .get(i, j, n)
                    .ok_or_else(|| self.missing(i, j, n))?
                    .copied()
                    .unwrap_or(0.0);
                Ok(v.ln() + shift[n] as f64 * std::f64::consts::LN_2)
            }
            Data::Exact(_) => {
                let r = self.exact(i, j, n)?;
                if r == 0 {
                    return Ok(f64::NEG_INFINITY);
                }
                let (m, e) = r.numer().to_f64_exp();
                let (dm, de) = r.denom().to_f64_exp();
                Ok((m / dm).ln() + (e as f64 - de as f64) * std::f64::consts::LN_2)
            }
            Data::Modular(_) => Err(Error::RingMismatch),
        }
    }

    /// `q(i,j;n)·scaleⁿ` as a double (may overflow to `inf` for large shifts).
    pub fn scaled(&self, i: usize, j: usize, n: usize) -> Result<f64> {
        Ok(self.log_scaled(i, j, n)?.exp())
    }

    /// The count as a double, unscaled.
    pub fn value_f64(&self, i: usize, j: usize, n: usize) -> Result<f64> {
        match self.backend {
            Backend::Scaled { scale } => {
                Ok((self.log_scaled(i, j, n)? - n as f64 * scale.ln()).exp())
            }
            _ => Ok(self.log_scaled(i, j, n)?.exp()),
        }
    }

    /// `Σ_{i,j} q(i,j;n)` (needs [`Track::All`], exact backend).
    pub fn mass(&self, n: usize) -> Result<Rational> {
        let Data::Exact(Store::Planes(p)) = &self.data else {
            return Err(Error::InvalidArgument(
                "total mass needs an exact table of all cells".into(),
            ));
        };
        let pl = p.get(n).ok_or_else(|| self.missing(0, 0, n))?;
        let s = pl.data.iter().fold(Integer::new(), |a, b| a + b);
        Ok(Rational::from((s, self.dpow(n))))
    }

    /// Exact counts of a cell as a series in `t`.
    pub fn exact_series(&self, i: usize, j: usize) -> Result<Vec<Rational>> {
        (0..=self.n_max).map(|n| self.exact(i, j, n)).collect()
    }

    pub fn to_rows(&self, cells: &[(usize, usize)]) -> Result<Vec<CountRow>> {
        let mut out = Vec::new();
        for n in 0..=self.n_max {
            for &(i, j) in cells {
                let value = match &self.data {
                    Data::Exact(_) => self.exact(i, j, n)?.to_string(),
                    Data::Modular(_) => self.modular(i, j, n)?.to_string(),
                    Data::Scaled { .. } => format!("{:e}", self.scaled(i, j, n)?),
                };
                out.push(CountRow { n, i, j, value });
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CountRow {
    pub n: usize,
    pub i: usize,
    pub j: usize,
    /// exact rational, residue, or `q·scaleⁿ`
    pub value: String,
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration.

/// Upper limit on `|S|ⁿ` paths explored by [`dfs_enumerate`].
pub const DFS_PATH_LIMIT: f64 = 5e8;

/// Weighted counts of all quadrant walks of length exactly `n`, by endpoint,
/// by explicit path enumeration.
pub fn dfs_enumerate(steps: &StepSet, n: usize) -> Result<HashMap<(usize, usize), Rational>> {
    let paths = (steps.steps().len() as f64).powi(n as i32);
    if n > 12 || paths > DFS_PATH_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "exhaustive enumeration of length {n} is too large ({paths:.1e} paths)"
        )));
    }
    fn go(
        st: &StepSet,
        x: i64,
        y: i64,
        w: &Rational,
        left: usize,
        out: &mut HashMap<(usize, usize), Rational>,
    ) {
        if left == 0 {
            *out.entry((x as usize, y as usize)).or_default() += w;
            return;
        }
        for s in st.steps() {
            let (nx, ny) = (x + s.dx as i64, y + s.dy as i64);
            if nx >= 0 && ny >= 0 {
                go(st, nx, ny, &Rational::from(w * &s.w), left - 1, out);
            }
        }
    }
    let mut out = HashMap::new();
    go(steps, 0, 0, &Rational::from(1), n, &mut out);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Series comparisons.

#[derive(Clone, Debug, Serialize)]
pub struct SeriesReport {
    pub cell: (usize, usize),
    pub checked_to: usize,
    pub matched: bool,
    /// `(n, table value, series value)` at the first disagreement
    pub first_mismatch: Option<(usize, String, String)>,
    pub max_rel_err: f64,
}

/// Compare `[tⁿ]` of a series with the table for `n ≤ order`: exact equality
/// for exact coefficients, relative `rel_tol` otherwise.
pub fn series_check<C: Coeff>(
    table: &CountTable,
    cell: (usize, usize),
    series: &PuiseuxSeries<C>,
    order: usize,
    rel_tol: f64,
) -> Result<SeriesReport> {
    if order > table.n_max {
        return Err(Error::InvalidArgument(format!(
            "table horizon {} below order {order}",
            table.n_max
        )));
    }
    let (i, j) = cell;
    let mut rep = SeriesReport {
        cell,
        checked_to: order,
        matched: true,
        first_mismatch: None,
        max_rel_err: 0.0,
    };
    for n in 0..=order {
        let c = series.coeff_i(n as i64)?;
        let got = table.exact(i, j, n);
        let ok = match (&got, c.is_exact()) {
            (Ok(r), true) => c.sub(&c.from_rational_like(r)).is_zero(),
            _ => {
                let v = match &got {
                    Ok(r) => r.to_f64(),
                    Err(_) => table.value_f64(i, j, n)?,
                };
                let z = c.to_complex(64).ok_or_else(|| {
                    Error::NotRepresentable("coefficient has no numeric value".into())
                })?;
                let (re, im) = z.to_f64_pair();
                let err = ((re - v).abs() + im.abs()) / v.abs().max(f64::MIN_POSITIVE);
                let err = if v == 0.0 {
                    (re.abs() + im.abs()).min(err)
                } else {
                    err
                };
                rep.max_rel_err = rep.max_rel_err.max(err);
                err <= rel_tol
            }
        };
        if !ok && rep.first_mismatch.is_none() {
            rep.matched = false;
            let tv = match &got {
                Ok(r) => r.to_string(),
                Err(_) => format!("{:e}", table.value_f64(i, j, n)?),
            };
            rep.first_mismatch = Some((n, tv, c.to_json().to_string()));
        }
    }
    Ok(rep)
}

/// Residual of `K·Q = K(x,0)Q(x,0) + K(0,y)Q(0,y) − K(0,0)Q(0,0) + xy`,
/// `K = xy(1 − tS(x,y))`, over all coefficients `x^a y^b t^n` with `n ≤ order`.
/// Returns the number of nonzero residual coefficients (needs an exact
/// table of all cells).
pub fn functional_equation_check(table: &CountTable, order: usize) -> Result<usize> {
    if !matches!(table.track, Track::All) || table.backend != Backend::Exact {
        return Err(Error::InvalidArgument(
            "the functional equation check needs an exact table of all cells".into(),
        ));
    }
    let order = order.min(table.n_max);
    let q = |i: i64, j: i64, n: i64| -> Result<Rational> {
        if i < 0 || j < 0 || n < 0 || n as usize > table.n_max {
            return Ok(Rational::new());
        }
        let Data::Exact(Store::Planes(p)) = &table.data else {
            unreachable!()
        };
        match p[n as usize].get(i as usize, j as usize) {
            Some(v) => Ok(Rational::from((v.clone(), table.dpow(n as usize)))),
            None => Ok(Rational::new()),
        }
    };
    // [x^a y^b t^n] of K(x,y)·F(x,y) where F has coefficients f(i,j;n)
    let kf = |a: i64,
              b: i64,
              n: i64,
              f: &dyn Fn(i64, i64, i64) -> Result<Rational>|
     -> Result<Rational> {
        let mut s = f(a - 1, b - 1, n)?;
        for st in table.steps.steps() {
            s -= &st.w * f(a - 1 - st.dx as i64, b - 1 - st.dy as i64, n - 1)?;
        }
        Ok(s)
    };
    let mut bad = 0;
    let span = order as i64 + 2;
    for n in 0..=order as i64 {
        for a in 0..=span {
            for b in 0..=span {
                let lhs = kf(a, b, n, &|i, j, m| q(i, j, m))?;
                // K(x,0)Q(x,0): keep only y^0 of K times the y^0 row of Q
                let kx0 = |i: i64, j: i64, m: i64| {
                    if j == 0 {
                        q(i, 0, m)
                    } else {
                        Ok(Rational::new())
                    }
                };
                let k0y = |i: i64, j: i64, m: i64| {
                    if i == 0 {
                        q(0, j, m)
                    } else {
                        Ok(Rational::new())
                    }
                };
                let k00 = |i: i64, j: i64, m: i64| {
                    if i == 0 && j == 0 {
                        q(0, 0, m)
                    } else {
                        Ok(Rational::new())
                    }
                };
                // K(x,0)·Q(x,0) has no y-dependence, and symmetrically
                let part = |f: &dyn Fn(i64, i64, i64) -> Result<Rational>,
                            ya: bool,
                            xa: bool|
                 -> Result<Rational> {
                    if (ya && b != 0) || (xa && a != 0) {
                        return Ok(Rational::new());
                    }
                    kf_restricted(table, a, b, n, f, ya, xa)
                };
                let rhs = part(&kx0, true, false)? + part(&k0y, false, true)?
                    - part(&k00, true, true)?
                    + Rational::from(if a == 1 && b == 1 && n == 0 { 1 } else { 0 });
                if lhs != rhs {
                    bad += 1;
                }
            }
        }
    }
    Ok(bad)
}

/// `[x^a y^b t^n] K(x,y)|_{restricted} · F` where the kernel is first
/// specialised at `y = 0` (`ya`) and/or `x = 0` (`xa`).
fn kf_restricted(
    table: &CountTable,
    a: i64,
    b: i64,
    n: i64,
    f: &dyn Fn(i64, i64, i64) -> Result<Rational>,
    ya: bool,
    xa: bool,
) -> Result<Rational> {
    // K = xy − t Σ w x^{1+dx} y^{1+dy}
    let mut s = Rational::new();
    let keep = |ex: i64, ey: i64| (!ya || ey == 0) && (!xa || ex == 0);
    if keep(1, 1) {
        s += f(a - 1, b - 1, n)?;
    }
    for st in table.steps.steps() {
        let (ex, ey) = (1 + st.dx as i64, 1 + st.dy as i64);
        if keep(ex, ey) {
            s -= &st.w * f(a - ex, b - ey, n - 1)?;
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Asymptotic fitting.

/// Basis for `ln c_n = ln κ + n ln μ − α ln n + corrections`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Template {
    /// corrections in powers of `1/n`
    Plain,
    /// adds `(log n)/n`, `(log n)/n²`, `(log n)²/n²` for log-corrected expansions
    LogCorrected,
}

impl Template {
    fn columns(&self, n: f64) -> Vec<f64> {
        let l = n.ln();
        match self {
            Template::Plain => vec![1.0, n, l, 1.0 / n, 1.0 / (n * n), 1.0 / (n * n * n)],
            Template::LogCorrected => vec![
                1.0,
                n,
                l,
                1.0 / n,
                l / n,
                1.0 / (n * n),
                l / (n * n),
                l * l / (n * n),
            ],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub mu: f64,
    pub alpha: f64,
    /// `κ` with respect to the input scaling
    pub kappa: f64,
    /// coefficient of `(log n)/n` (log-corrected template only)
    pub log_coeff: Option<f64>,
    /// `true` when that coefficient is large compared with its spread
    pub log_detected: bool,
    /// `|α̂(full range) − α̂(upper half)|`
    pub alpha_spread: f64,
    pub mu_spread: f64,
    pub rms_residual: f64,
    pub condition: f64,
    pub points: usize,
    /// Richardson (order 3) estimates from consecutive ratios
    pub richardson_mu: f64,
    pub richardson_alpha: f64,
}

fn lsq(rows: &[(f64, f64)], tpl: Template) -> Result<(Vec<f64>, f64, f64)> {
    let k = tpl.columns(1.0).len();
    if rows.len() < k + 2 {
        return Err(Error::InsufficientData(format!(
            "need more than {} points",
            k + 2
        )));
    }
    let mut a = DMatrix::<f64>::zeros(rows.len(), k);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    for (r, (n, _)) in rows.iter().enumerate() {
        for (c, v) in tpl.columns(*n).into_iter().enumerate() {
            a[(r, c)] = v;
        }
    }
    // equilibrate columns
    let norms: Vec<f64> = (0..k).map(|c| a.column(c).norm()).collect();
    for c in 0..k {
        a.column_mut(c).scale_mut(1.0 / norms[c]);
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = sv.max() / sv.min();
    let x = svd
        .solve(&y, 1e-14 * sv.max())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let res = &a * &x - &y;
    let rms = (res.norm_squared() / rows.len() as f64).sqrt();
    Ok(((0..k).map(|c| x[c] / norms[c]).collect(), rms, cond))
}

/// Order-3 Richardson extrapolation of `a_n` assumed `a + b/n + c/n² + …`.
pub fn richardson(seq: &[(f64, f64)], order: usize) -> Option<f64> {
    if seq.len() < order + 1 {
        return None;
    }
    let base = seq.len() - order - 1;
    let step = seq[base + 1].0 - seq[base].0;
    let n = seq[base].0 / step;
    let mut s = 0.0;
    let mut f = 1.0;
    for i in 1..=order {
        f *= i as f64;
    }
    for i in 0..=order {
        let binom = (1..=i).fold(1.0, |b, k| b * (order - k + 1) as f64 / k as f64);
        let sign = if (order - i).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        s += sign * binom * (n + i as f64).powi(order as i32) * seq[base + i].1;
    }
    Some(s / f)
}

/// Fit `(n, ln c_n)` samples (one residue class of the period) over `n_range`.
pub fn fit_log_sequence(samples: &[(f64, f64)], tpl: Template) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(_, v)| v.is_finite())
        .collect();
    if pts.len() != samples.len() {
        return Err(Error::InvalidArgument(
            "zero counts in the fitting range (periodicity mismatch?)".into(),
        ));
    }
    let (c, rms, cond) = lsq(&pts, tpl)?;
    let half = &pts[pts.len() / 2..];
    let (c2, _, _) = lsq(half, tpl).unwrap_or((c.clone(), 0.0, 0.0));
    let (mu, alpha) = (c[1].exp(), -c[2]);
    let log_coeff = match tpl {
        Template::LogCorrected => Some(c[4]),
        Template::Plain => None,
    };
    let log_detected = match tpl {
        Template::LogCorrected => c[4].abs() > 4.0 * (c[4] - c2[4]).abs(),
        Template::Plain => false,
    };
    // ratios r_n = (c_n/c_{n−h})^{1/h}; a stride h keeps the Richardson
    // weights (∝ n³) from amplifying rounding noise
    let stride = (pts.len() / 32).max(1);
    let sub: Vec<(f64, f64)> = pts.iter().rev().step_by(stride).rev().copied().collect();
    let mut mus = Vec::new();
    let mut als = Vec::new();
    for w in sub.windows(2) {
        let (n0, l0) = w[0];
        let (n1, l1) = w[1];
        let p = n1 - n0;
        let m = ((l1 - l0) / p).exp();
        mus.push((n1, m));
        als.push((n1, ((l1 - l0) / (n1 / n0).ln(), p / (n1 / n0).ln())));
    }
    let rmu = richardson(&mus, 3).unwrap_or(f64::NAN);
    // local exponent −(ln c_n − ln c_{n−h} − h ln μ)/ln(n/(n−h))
    let alpha_seq: Vec<(f64, f64)> = als
        .iter()
        .map(|(n, (d, h))| (*n, h * rmu.ln() - d))
        .collect();
    let ralpha = richardson(&alpha_seq, 3).unwrap_or(f64::NAN);
    Ok(FitResult {
        mu,
        alpha,
        kappa: c[0].exp(),
        log_coeff,
        log_detected,
        alpha_spread: (alpha + c2[2]).abs(),
        mu_spread: (mu - c2[1].exp()).abs(),
        rms_residual: rms,
        condition: cond,
        points: pts.len(),
        richardson_mu: rmu,
        richardson_alpha: ralpha,
    })
}

/// Fit the counts of one cell over `n ∈ [lo, hi]` on the residue class of
/// `hi` modulo `period`. With a scaled table the fitted `μ` is corrected
/// back by the scale.
pub fn fit_asymptotics(
    table: &CountTable,
    i: usize,
    j: usize,
    tpl: Template,
    lo: usize,
    hi: usize,
    period: usize,
) -> Result<FitResult> {
    if hi > table.n_max || lo >= hi || period == 0 {
        return Err(Error::InsufficientData(format!(
            "fit range [{lo}, {hi}] with period {period} on a table of length {}",
            table.n_max
        )));
    }
    let mut samples = Vec::new();
    let mut n = hi;
    while n >= lo.max(1) {
        samples.push((n as f64, table.log_scaled(i, j, n)?));
        if n < period {
            break;
        }
        n -= period;
    }
    samples.reverse();
    let mut r = fit_log_sequence(&samples, tpl)?;
    if let Backend::Scaled { scale } = table.backend {
        r.mu /= scale;
        r.richardson_mu /= scale;
    }
    Ok(r)
}

/// Weighted endpoint mass of exhaustive enumeration as a check: `Σ ≤ S(1,1)ⁿ`.
pub fn killing_bound_holds(
    steps: &StepSet,
    counts: &HashMap<(usize, usize), Rational>,
    n: usize,
) -> bool {
    let total = counts.values().fold(Rational::new(), |a, b| a + b);
    total <= steps.total_weight().pow(n as i32)
}

/// Convenience: exact excursion series as a [`PuiseuxSeries<Alg>`].
pub fn excursion_series(table: &CountTable, i: usize, j: usize) -> Result<PuiseuxSeries<Alg>> {
    let c = table
        .exact_series(i, j)?
        .into_iter()
        .map(Alg::rational)
        .collect();
    Ok(PuiseuxSeries::from_coeffs(
        &Alg::zero(),
        c,
        crate::series::at(table.n_max as i64 + 1, 1),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn am(a: i64) -> StepSet {
        StepSet::amodel(&Rational::from(a)).unwrap()
    }

    #[test]
    fn kreweras_excursions() {
        let t = dp_count(&StepSet::kreweras(), 9, Backend::Exact, Track::excursions()).unwrap();
        let want = [1, 0, 0, 2, 0, 0, 16, 0, 0, 192];
        for (n, w) in want.iter().enumerate() {
            assert_eq!(t.exact(0, 0, n).unwrap(), *w);
        }
    }

    #[test]
    fn dfs_agrees_with_dp() {
        for st in [StepSet::kreweras(), am(1), am(2)] {
            let t = dp_count(&st, 8, Backend::Exact, Track::All).unwrap();
            for n in 0..=8 {
                let d = dfs_enumerate(&st, n).unwrap();
                for i in 0..=n {
                    for j in 0..=n {
                        let want = d.get(&(i, j)).cloned().unwrap_or_default();
                        assert_eq!(t.exact(i, j, n).unwrap_or_default(), want, "({i},{j};{n})");
                    }
                }
                assert!(killing_bound_holds(&st, &d, n));
            }
        }
    }

    #[test]
    fn backends_agree() {
        let st = StepSet::amodel(&Rational::from((1, 2))).unwrap();
        let e = dp_count(&st, 120, Backend::Exact, Track::row(2)).unwrap();
        let s = dp_count(&st, 120, Backend::Scaled { scale: 0.2 }, Track::row(2)).unwrap();
        let m = dp_count(
            &st,
            120,
            Backend::Modular {
                modulus: DEFAULT_MODULUS,
            },
            Track::row(2),
        )
        .unwrap();
        for n in [0, 7, 60, 120] {
            for j in 0..=2 {
                let x = e.exact(j, 0, n).unwrap();
                let y = s.value_f64(j, 0, n).unwrap();
                assert!(
                    (x.to_f64() - y).abs() <= 1e-10 * x.to_f64().abs(),
                    "{n} {j}"
                );
                let num = x.numer() * e.dpow(n) / x.denom();
                assert_eq!(
                    (num % DEFAULT_MODULUS).to_u64().unwrap(),
                    m.modular(j, 0, n).unwrap()
                );
            }
        }
    }

    #[test]
    fn pruned_and_full_tables_agree() {
        let st = am(3);
        let f = dp_count(&st, 30, Backend::Exact, Track::All).unwrap();
        let p = dp_count(&st, 30, Backend::Exact, Track::row(3)).unwrap();
        for n in 0..=30 {
            for j in 0..=3 {
                assert_eq!(f.exact(j, 0, n).unwrap(), p.exact(j, 0, n).unwrap());
            }
        }
    }

    #[test]
    fn functional_equation_holds() {
        let t = dp_count(&am(2), 8, Backend::Exact, Track::All).unwrap();
        assert_eq!(functional_equation_check(&t, 6).unwrap(), 0);
    }

    #[test]
    fn memory_guard() {
        let r = dp_count_with_budget(&am(1), 2000, Backend::Exact, Track::All, 1 << 20);
        assert!(matches!(r, Err(Error::Memory { .. })));
    }

    #[test]
    fn richardson_exact_on_polynomial_in_inverse_n() {
        let s: Vec<(f64, f64)> = (10..20)
            .map(|n| (n as f64, 2.0 + 3.0 / n as f64 - 1.0 / (n * n) as f64))
            .collect();
        assert!((richardson(&s, 3).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fit_recovers_synthetic_exponents() {
        let s: Vec<(f64, f64)> = (100..2000)
            .step_by(3)
            .map(|n| {
                let n = n as f64;
                (
                    n,
                    0.3 + n * 1.5f64.ln() - 2.7 * n.ln() + (1.0 + 0.5 * n.ln() / n).ln(),
                )
            })
            .collect();
        let r = fit_log_sequence(&s, Template::LogCorrected).unwrap();
        assert!(
            (r.mu - 1.5).abs() < 1e-6 && (r.alpha - 2.7).abs() < 1e-3,
            "{r:?}"
        );
    }
}
