use proptest::prelude::*;
use rug::Rational;
use thetawalk::polyharmonic::{laplacian, LatticeFunction};
use thetawalk::ring::Alg;
use thetawalk::series::{at, PuiseuxSeries};
use thetawalk::theta::{Step, StepSet};
use thetawalk::walk::{dfs_enumerate, dp_count, Backend, Track};

const DIRS: [(i8, i8); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn series(c: &[(i64, i64)], order: i64) -> PuiseuxSeries<Alg> {
    let coeffs = c
        .iter()
        .map(|&(n, d)| Alg::rational(Rational::from((n, d))))
        .collect();
    PuiseuxSeries::from_coeffs(&Alg::zero(), coeffs, at(order, 1))
}

fn coeff() -> impl Strategy<Value = (i64, i64)> {
    (-9i64..=9, 1i64..=5)
}

fn step_set() -> impl Strategy<Value = StepSet> {
    proptest::collection::vec(prop::option::of(1i64..=3), 8)
        .prop_filter("nonempty", |w| w.iter().any(Option::is_some))
        .prop_map(|w| {
            let steps = DIRS
                .iter()
                .zip(w)
                .filter_map(|(&(dx, dy), w)| {
                    w.map(|w| Step {
                        dx,
                        dy,
                        w: Rational::from(w),
                    })
                })
                .collect();
            StepSet::new(steps).unwrap()
        })
}

/// Step sets invariant under (x, y) ↦ (y, x).
fn symmetric_step_set() -> impl Strategy<Value = StepSet> {
    proptest::collection::vec(prop::option::of(1i64..=3), 8).prop_filter_map(
        "empty step set",
        |w| {
            let weight = |d: (i8, i8)| {
                let k = DIRS.iter().position(|&x| x == d).unwrap();
                let t = DIRS.iter().position(|&x| x == (d.1, d.0)).unwrap();
                w[k.min(t)]
            };
            let steps = DIRS
                .iter()
                .filter_map(|&d| {
                    weight(d).map(|w| Step {
                        dx: d.0,
                        dy: d.1,
                        w: Rational::from(w),
                    })
                })
                .collect();
            StepSet::new(steps).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn inverse_is_two_sided(c0 in (1i64..=9, 1i64..=5), rest in proptest::collection::vec(coeff(), 0..8)) {
        let mut c = vec![c0];
        c.extend(rest);
        let a = series(&c, 9);
        let p = a.mul(&a.inv().unwrap());
        prop_assert!(p.sub(&PuiseuxSeries::one(&Alg::zero())).is_zero_series());
    }

    #[test]
    fn exp_inverts_log(rest in proptest::collection::vec(coeff(), 0..7)) {
        let mut c = vec![(1, 1)];
        c.extend(rest);
        let a = series(&c, 8);
        let b = a.log().unwrap().exp().unwrap();
        prop_assert!(b.sub(&a).is_zero_series());
    }

    #[test]
    fn reversion_composes_to_identity(rest in proptest::collection::vec(coeff(), 0..7)) {
        let mut c = vec![(0, 1), (1, 1)];
        c.extend(rest);
        let a = series(&c, 9);
        let b = a.reversion(None).unwrap();
        let x = PuiseuxSeries::var(&Alg::zero(), at(9, 1));
        prop_assert!(a.compose(&b).unwrap().sub(&x).is_zero_series());
        prop_assert!(b.compose(&a).unwrap().sub(&x).is_zero_series());
    }

    #[test]
    fn laplacian_is_linear(
        steps in step_set(),
        u in proptest::collection::vec(-20i64..=20, 36),
        v in proptest::collection::vec(-20i64..=20, 36),
        a in -5i64..=5,
        b in -5i64..=5,
        lam in 1i64..=7,
    ) {
        let f = |w: &Vec<i64>| LatticeFunction::from_fn(5, 5, |i, j| Rational::from(w[6 * i + j]));
        let (u, v) = (f(&u), f(&v));
        let (a, b, lam) = (Rational::from(a), Rational::from(b), Rational::from(lam));
        let lhs = laplacian(&u.lin_comb(&a, &v, &b).unwrap(), &steps, &lam).unwrap();
        let rhs = laplacian(&u, &steps, &lam).unwrap().lin_comb(&a, &laplacian(&v, &steps, &lam).unwrap(), &b).unwrap();
        prop_assert_eq!(lhs.window(), rhs.window());
        let (im, jm) = lhs.window();
        for i in 0..=im {
            for j in 0..=jm {
                prop_assert_eq!(lhs.get(i, j), rhs.get(i, j));
            }
        }
    }

    #[test]
    fn symmetric_steps_give_symmetric_counts(steps in symmetric_step_set(), n in 1usize..=14) {
        let t = dp_count(&steps, n, Backend::Exact, Track::All).unwrap();
        for i in 0..=n {
            for j in 0..i {
                prop_assert_eq!(t.exact(i, j, n).unwrap(), t.exact(j, i, n).unwrap());
            }
        }
    }

    #[test]
    fn dp_matches_enumeration(steps in step_set(), n in 0usize..=6) {
        let t = dp_count(&steps, n, Backend::Exact, Track::All).unwrap();
        let paths = dfs_enumerate(&steps, n).unwrap();
        for i in 0..=n {
            for j in 0..=n {
                let want = paths.get(&(i, j)).cloned().unwrap_or_default();
                prop_assert_eq!(t.exact(i, j, n).unwrap(), want, "cell ({}, {})", i, j);
            }
        }
    }

    #[test]
    fn modular_backend_reduces_exact_counts(steps in step_set(), n in 1usize..=20) {
        let m = 1_000_003u64;
        let cells: Vec<_> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        let e = dp_count(&steps, n, Backend::Exact, Track::Cells(cells.clone())).unwrap();
        let r = dp_count(&steps, n, Backend::Modular { modulus: m }, Track::Cells(cells.clone())).unwrap();
        for &(i, j) in &cells {
            // exact values are integers over Dⁿ; compare the integer numerators
            let scaled = e.exact(i, j, n).unwrap() * Rational::from(e.dpow(n));
            prop_assert!(scaled.denom() == &1);
            let want = scaled.numer().mod_u(m as u32);
            prop_assert_eq!(r.modular(i, j, n).unwrap(), want as u64);
        }
    }
}
