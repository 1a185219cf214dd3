use rug::{Float, Rational};
use thetawalk::amodel::{am_harmonic_gf_coeffs, ModelParams};
use thetawalk::kreweras::kw_transfer_asymptotics;
use thetawalk::polyharmonic::{
    expansion_basis, extract_expansion_coeffs, harmonic_extension, is_polyharmonic, Region,
    DEFAULT_MAX_CONDITION,
};
use thetawalk::ring::Cf;
use thetawalk::theta::StepSet;
use thetawalk::walk::{dp_count, fit_asymptotics, Backend, Template, Track};

#[test]
fn kreweras_growth_exponent_and_amplitude() {
    let n = 3000;
    let t = dp_count(
        &StepSet::kreweras(),
        n,
        Backend::Scaled { scale: 1.0 / 3.0 },
        Track::excursions(),
    )
    .unwrap();
    let f = fit_asymptotics(&t, 0, 0, Template::Plain, 600, n, 3).unwrap();
    assert!((f.mu - 3.0).abs() < 1e-4, "mu = {}", f.mu);
    assert!((f.alpha - 2.5).abs() < 0.05, "alpha = {}", f.alpha);

    // leading term from the singular expansion, in logs (table is scaled by 3^-n)
    let k = kw_transfer_asymptotics(&Cf::zero(128)).unwrap();
    let m = (n / 3) as f64;
    let ln_pred = k.amplitude.ln() + 3.0 * m * (k.growth_per_step / 3.0).ln() + k.exponent * m.ln();
    let ratio = (t.log_scaled(0, 0, n).unwrap() - ln_pred).exp();
    assert!((ratio - 1.0).abs() < 0.05, "count / prediction = {ratio}");
}

#[test]
fn simple_walk_excursions() {
    // q(0,0;2m) ~ (32/π) 4^{2m} (2m)^{-3}
    let n = 2000;
    let t = dp_count(
        &StepSet::simple(),
        n,
        Backend::Scaled { scale: 0.25 },
        Track::excursions(),
    )
    .unwrap();
    let f = fit_asymptotics(&t, 0, 0, Template::Plain, 400, n, 2).unwrap();
    assert!((f.mu - 4.0).abs() < 1e-4, "mu = {}", f.mu);
    assert!((f.alpha - 3.0).abs() < 0.05, "alpha = {}", f.alpha);
    let ratio = (t.log_scaled(0, 0, n).unwrap() + 3.0 * (n as f64).ln()).exp()
        / (32.0 / std::f64::consts::PI);
    assert!((ratio - 1.0).abs() < 0.02, "ratio = {ratio}");
}

#[test]
fn amodel_leading_coefficients_are_reversed_harmonic() {
    // fit v(i,j) n^{-(1+ρ)} t_c^{-n} on a window and compare with the
    // harmonic extension of the boundary row C·V(i)
    let p = 128;
    let mp = ModelParams::new(&Float::with_val(p, 1)).unwrap();
    let steps = StepSet::amodel(&Rational::from(1)).unwrap();
    let (w, n) = (5usize, 1200usize);
    let tc = mp.t_c.to_f64();
    let cells: Vec<_> = (0..=w).flat_map(|i| (0..=w).map(move |j| (i, j))).collect();
    let t = dp_count(
        &steps,
        n,
        Backend::Scaled { scale: tc },
        Track::Cells(cells.clone()),
    )
    .unwrap();
    let basis: Vec<_> = expansion_basis(mp.rho.to_f64(), None, 2, 2, 1)
        .into_iter()
        .filter(|b| b.exponent < 4.0 && !(b.l == 0 && b.m == 1))
        .collect();
    let fit = extract_expansion_coeffs(&t, tc, &cells, &basis, n / 5, n, 1).unwrap();
    assert!(fit.condition < DEFAULT_MAX_CONDITION);
    let v = fit.coefficient_function(1, 0, 0, w, w).unwrap();

    let vv = am_harmonic_gf_coeffs(&mp.a, 2 * w + 1).unwrap();
    let row: Vec<Float> = vv.iter().map(|x| Float::with_val(p, x * &mp.c)).collect();
    let h = harmonic_extension(&row, &steps.reversed(), &Float::with_val(p, 1 / &mp.t_c)).unwrap();
    let mut worst = 0f64;
    for i in 0..=w {
        for j in 0..=w {
            let (a, b) = (v.get(i, j).unwrap(), h.get(i, j).unwrap());
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    assert!(worst < 0.15, "worst relative deviation {worst}");

    let lam = 1.0 / tc;
    let rep = is_polyharmonic(
        &v,
        &steps.reversed(),
        &lam,
        1,
        Region::Quadrant,
        0.05 * v.max_abs(),
    )
    .unwrap();
    assert!(rep.holds, "{rep:?}");
    // the forward step set does not annihilate it
    let fwd = is_polyharmonic(&v, &steps, &lam, 1, Region::Quadrant, 0.05 * v.max_abs()).unwrap();
    assert!(!fwd.holds, "{fwd:?}");
}
