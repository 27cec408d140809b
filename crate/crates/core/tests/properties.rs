use defectlab::counterexample::{Counterexample, CounterexampleSpec};
use defectlab::energy::{energy_eps, Kernel, Quadrature};
use defectlab::gallery;
use defectlab::grid::{finite_diff, restricted_domain, sample, GridSpec, ScalarField};
use defectlab::levelset::rescaled_field;
use defectlab::measure::{defect_measure, CellBox};
use defectlab::ThetaPair;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn field(n: usize, values: Vec<f64>) -> ScalarField {
    ScalarField::from_values(GridSpec::square(-1.0, 1.0, n).unwrap(), values).unwrap()
}

fn grid_values(int: bool) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (3usize..24).prop_flat_map(move |n| {
        let v = if int {
            prop::collection::vec((-3i32..=3).prop_map(f64::from), n * n).boxed()
        } else {
            prop::collection::vec(-5.0f64..5.0, n * n).boxed()
        };
        (Just(n), v)
    })
}

/// A random box of at least 2×2 cells with an interior split point.
fn split(n: usize, rng: &mut ChaCha8Rng) -> (CellBox, [usize; 2]) {
    let c = n - 1;
    let (i0, j0) = (rng.gen_range(0..c - 1), rng.gen_range(0..c - 1));
    let (i1, j1) = (rng.gen_range(i0 + 2..=c), rng.gen_range(j0 + 2..=c));
    let mid = [rng.gen_range(i0 + 1..i1), rng.gen_range(j0 + 1..j1)];
    (CellBox::new([i0, j0], [i1, j1]).unwrap(), mid)
}

fn quarters(b: &CellBox, m: [usize; 2]) -> [CellBox; 4] {
    [
        CellBox::new(b.lo, m).unwrap(),
        CellBox::new([m[0], b.lo[1]], [b.hi[0], m[1]]).unwrap(),
        CellBox::new([b.lo[0], m[1]], [m[0], b.hi[1]]).unwrap(),
        CellBox::new(m, b.hi).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn box_masses_split_additively((n, v) in grid_values(true), seed in any::<u64>()) {
        let u = field(n, v);
        let m = defect_measure(&u);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, mid) = split(n, &mut rng);
        let whole = m.box_mass(&b).unwrap();
        let parts: f64 = quarters(&b, mid).iter().map(|q| m.box_mass(q).unwrap()).sum();
        // integer fields: every partial sum is exact
        prop_assert_eq!(whole, parts);
        prop_assert_eq!(whole, m.prefix_mass(&b).unwrap());
        prop_assert_eq!(whole, m.summed_mass(&b).unwrap());
    }

    #[test]
    fn box_mass_matches_corners_and_is_bounded((n, v) in grid_values(false), seed in any::<u64>()) {
        let u = field(n, v);
        let m = defect_measure(&u);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, mid) = split(n, &mut rng);
        let q = m.box_mass(&b).unwrap();
        let direct = (u.value(b.hi[0], b.hi[1]) - u.value(b.hi[0], b.lo[1])) - (u.value(b.lo[0], b.hi[1]) - u.value(b.lo[0], b.lo[1]));
        prop_assert_eq!(q, direct);
        prop_assert!(q.abs() <= 4.0 * u.sup_norm());
        let parts: f64 = quarters(&b, mid).iter().map(|x| m.box_mass(x).unwrap()).sum();
        prop_assert!((q - parts).abs() <= 1e-12 * 16.0 * u.sup_norm().max(1.0));
    }

    #[test]
    fn restricted_domain_is_antitone(n in 3usize..60, a in 0.0f64..1.2, b in 0.0f64..1.2) {
        let spec = GridSpec::square(-1.0, 1.0, n).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = restricted_domain(&spec, hi);
        let large = restricted_domain(&spec, lo);
        for (i, j) in small.iter_2d() {
            prop_assert!(large.contains(&[i, j]));
        }
    }

    #[test]
    fn finite_differences_telescope(x in prop::array::uniform2(-0.5f64..0.5), z1 in prop::array::uniform2(-0.25f64..0.25), z2 in prop::array::uniform2(-0.25f64..0.25)) {
        let u = gallery::roof(&GridSpec::square(-1.0, 1.0, 33).unwrap()).unwrap().field;
        let whole = finite_diff(&u, x, [z1[0] + z2[0], z1[1] + z2[1]]).unwrap();
        let a = finite_diff(&u, x, z1).unwrap();
        let b = finite_diff(&u, [x[0] + z1[0], x[1] + z1[1]], z2).unwrap();
        prop_assert!(!whole.interpolated && !a.interpolated && !b.interpolated);
        prop_assert!((whole.value - a.value - b.value).abs() < 1e-14);
    }

    #[test]
    fn resampling_is_bitwise_stable(n in 3usize..40, c in prop::array::uniform3(-2.0f64..2.0)) {
        let spec = GridSpec::square(-1.0, 1.0, n).unwrap();
        let f = move |p: [f64; 2]| c[0] * p[0].sin() + c[1] * p[0] * p[1] + c[2] * p[1].abs();
        let u = sample(f, &spec).unwrap();
        let u2 = u.clone();
        let again = sample(move |p| u2.eval(p).unwrap().value, &spec).unwrap();
        prop_assert_eq!(u.values(), again.values());
    }

    #[test]
    fn indicator_boxes_are_quantized(a in prop::array::uniform4(-0.9f64..0.9), seed in any::<u64>()) {
        let spec = gallery::AxisPolygonSpec {
            polygons: vec![vec![
                [a[0].min(a[1]) - 0.05, a[2].min(a[3]) - 0.05],
                [a[0].max(a[1]) + 0.05, a[2].min(a[3]) - 0.05],
                [a[0].max(a[1]) + 0.05, a[2].max(a[3]) + 0.05],
                [a[0].min(a[1]) - 0.05, a[2].max(a[3]) + 0.05],
            ]],
            stripes: vec![],
        };
        let grid = GridSpec::square(-1.0, 1.0, 33).unwrap().offset_for_discontinuities();
        let u = gallery::polygon_indicator(&spec, &grid).unwrap().field;
        let m = defect_measure(&u);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let (b, _) = split(33, &mut rng);
            let q = m.box_mass(&b).unwrap();
            prop_assert!([-2.0, -1.0, 0.0, 1.0, 2.0].contains(&q), "{}", q);
        }
    }

    #[test]
    fn counterexample_potential_is_one_lipschitz(x in prop::array::uniform2(-0.9f64..0.9), y in prop::array::uniform2(-0.9f64..0.9)) {
        let ce = Counterexample::new(CounterexampleSpec::new(4.0, 5).unwrap());
        let (a, b) = (ce.eval(x).unwrap(), ce.eval(y).unwrap());
        let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        prop_assume!(d > 0.0);
        prop_assert!((a.u - b.u).abs() / d <= 1.0 + 1e-9);
        for v in [a.v, b.v] {
            let ok = v == [0.0, 0.0] || (v[0].abs() == 1.0 && v[1] == 0.0) || (v[1].abs() == 1.0 && v[0] == 0.0)
                || (v[1] == 0.0 && ce.spec.radii().iter().enumerate().any(|(k, _)| (v[0].abs() - ce.spec.eps(k)).abs() < 1e-15))
                || (v[0] == 0.0 && ce.spec.radii().iter().enumerate().any(|(k, _)| (v[1].abs() - ce.spec.eps(k)).abs() < 1e-15));
            prop_assert!(ok, "{:?}", v);
        }
    }

    #[test]
    fn dyadic_blowups_rescale_box_masses(k in 0u32..4, i0 in 0usize..20, j0 in 0usize..20) {
        let u = gallery::bifurcation(&GridSpec::square(-1.0, 1.0, 65).unwrap()).unwrap().field;
        let r = 0.5f64.powi(k as i32);
        let center = [0.25, -0.125];
        let v = rescaled_field(&u, center, r).unwrap();
        let (m, mv) = (defect_measure(&u), defect_measure(&v));
        let b = CellBox::new([i0, j0], [i0 + 17, j0 + 9]).unwrap();
        prop_assert_eq!(mv.box_mass(&b).unwrap(), m.box_mass(&b).unwrap() / r);
    }
}

#[test]
fn one_variable_fields_have_zero_energy_at_every_theta() {
    let grid = GridSpec::square(-1.0, 1.0, 65).unwrap();
    let a = sample(|p| (3.0 * p[0]).sin() + p[0].abs(), &grid).unwrap();
    let b = sample(|p| if p[1] > 0.1 { 1.0 } else { 0.0 }, &grid).unwrap();
    for th in [(0.25, 0.25), (0.5, 0.5), (0.1, 0.2), (0.3, 0.7)] {
        let th = ThetaPair::new(th.0, th.1).unwrap();
        for u in [&a, &b] {
            let e = energy_eps(u, 0.2, th, Kernel::UniformBall, Quadrature::default()).unwrap();
            assert_eq!(e.value, 0.0);
        }
    }
}

#[test]
fn larger_exponents_keep_energies_finite() {
    let f = gallery::figure1(65, false).unwrap().field;
    for th in [(0.1, 0.1), (0.2, 0.2), (0.4, 0.3), (0.5, 0.5)] {
        let e = energy_eps(&f, 0.3, ThetaPair::new(th.0, th.1).unwrap(), Kernel::UniformBall, Quadrature::default())
            .unwrap();
        assert!(e.value.is_finite() && e.value > 0.0);
    }
}
