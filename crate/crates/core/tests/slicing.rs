use defectlab::gallery;
use defectlab::grid::GridSpec;
use defectlab::measure::{defect_measure, extract_atoms};
use defectlab::slicing::*;

fn cube(n: usize, dim: usize) -> GridSpec {
    GridSpec::new(vec![-1.0; dim], vec![2.0; dim], vec![n; dim]).unwrap().offset_for_discontinuities()
}

/// Steps of `s·h` with `ε = 1.5 r`.
fn schedule(h: f64, steps: &[usize]) -> Vec<(f64, f64)> {
    steps.iter().map(|&s| (1.5 * s as f64 * h, s as f64 * h)).collect()
}

#[test]
fn extruded_figure1_slices_are_identical() {
    let u = extruded_figure1(64).unwrap();
    let rep = slice_report(&u, [0, 1], &[], 0.5, 0.25).unwrap();
    assert_eq!(rep.rows.len(), 64);
    let first = &rep.rows[0].atoms;
    for row in &rep.rows {
        assert_eq!(row.atoms.len(), first.len());
        for (a, b) in row.atoms.atoms.iter().zip(&first.atoms) {
            assert_eq!(a.mass.to_bits(), b.mass.to_bits());
            assert_eq!(a.position.map(f64::to_bits), b.position.map(f64::to_bits));
        }
    }
    // the base 2D picture
    let base = GridSpec::rect([0.0, 0.0], [6.0, 6.0], [64, 64]).unwrap().offset_for_discontinuities();
    let f = gallery::polygon_indicator(&gallery::figure1_spec(), &base).unwrap().field;
    let direct = extract_atoms(&defect_measure(&f), 0.25).unwrap();
    assert_eq!(direct.masses(), first.masses());
    assert!(first.masses().iter().any(|m| m.abs() == 2.0));

    for pair in u.cross_pairs() {
        let c = slice_commutation(&u, pair).unwrap();
        assert_eq!(c.mismatches, 0);
        assert_eq!(c.cells, 64 * 63 * 63);
    }
    assert_eq!(coordinate_plane_zero_check(&u, [1, 2]).unwrap(), 0.0);
    // slices through x₃ see a field constant along x₃
    let side = slice_report(&u, [0, 2], &[], 0.5, 0.25).unwrap();
    assert!(side.rows.iter().all(|r| r.atoms.is_empty()));
}

#[test]
fn fatou_holds_with_equality_on_extrusions() {
    let u = extruded_figure1(64).unwrap();
    let h = u.spec().spacing(0);
    let rep = slice_energy_integral(&u, [0, 1], &schedule(h, &[8, 4, 2, 1])).unwrap();
    for k in 0..4 {
        assert!(rep.lhs[k] > 0.0);
        assert!(rep.relative_slack[k].abs() < 1e-12, "{rep:?}");
        assert_eq!(rep.lhs[k], rep.lhs_pair[k]);
    }
}

#[test]
fn fatou_is_strict_on_a_tilted_quadrant_stack() {
    // corner at (0.3 x₃, −0.2 x₃): slices see one atom each, but the x₃
    // motion adds cross variation in the (1,3) plane
    let spec = cube(49, 3);
    let u =
        TensorField::sample(|x| if x[0] > 0.3 * x[2] && x[1] > -0.2 * x[2] { 1.0 } else { 0.0 }, &spec, vec![1, 2, 2])
            .unwrap();
    let h = spec.spacing(0);
    let rep = slice_energy_integral(&u, [0, 1], &schedule(h, &[8, 4, 2, 1])).unwrap();
    assert!(rep.holds(1e-9), "{rep:?}");
    assert!(rep.relative_slack.iter().all(|&s| s > 0.05), "{:?}", rep.relative_slack);
    // the (1,2) term alone already dominates its slices
    for k in 0..4 {
        assert!(rep.lhs_pair[k] >= rep.rhs[k] * (1.0 - 1e-9));
    }
}

#[test]
fn tensor_structured_fields_carry_nothing() {
    let spec = cube(17, 3);
    let u = TensorField::sample(|x| (2.0 * x[0]).sin() + x[1] * x[2] + x[2].powi(3), &spec, vec![1, 2, 2]).unwrap();
    let h = spec.spacing(0);
    let rep = slice_energy_integral(&u, [0, 1], &schedule(h, &[4, 2, 1])).unwrap();
    assert!(rep.lhs.iter().chain(&rep.rhs).all(|&v| v.abs() < 1e-12), "{rep:?}");
    let m = tensor_mass_estimate(&u, 0.5, 0.25).unwrap();
    assert_eq!(m.total, 0.0);
    // x₂x₃ is not affine in the second factor
    assert!(coordinate_plane_zero_check(&u, [1, 2]).unwrap() > 1e-3);
}

#[test]
fn single_corner_extrusion_has_unit_mass_per_length() {
    let base = GridSpec::square(-1.0, 1.0, 33).unwrap().offset_for_discontinuities();
    let f = defectlab::grid::sample(|p| if p[0] > 0.0 && p[1] > 0.0 { 1.0 } else { 0.0 }, &base).unwrap();
    let length = 1.7;
    let u = TensorField::extrude(&f, &[(0.1, length, 29)], vec![1, 2, 2]).unwrap();
    let m = tensor_mass_estimate(&u, 0.5, 0.25).unwrap();
    assert!((m.total - length).abs() < 1e-12, "{m:?}");
    assert_eq!(m.resolved_fraction, 1.0);
    assert_eq!(m.excluded_measure, 0.0);
}

#[test]
fn decomposed_field_concentrates_on_its_jump_points() {
    // Σ_j 1{x₁ < a_j} u₂ʲ(x₂, x₃) with u₂¹ = 1{x₂ > 0.1}, u₂² = 2·1{x₃ > −0.2}
    let a = [-0.4, 0.35];
    let spec = cube(41, 3);
    let u = TensorField::sample(
        |x| {
            let s1 = if x[0] < a[0] && x[1] > 0.1 { 1.0 } else { 0.0 };
            let s2 = if x[0] < a[1] && x[2] > -0.2 { 2.0 } else { 0.0 };
            s1 + s2
        },
        &spec,
        vec![1, 2, 2],
    )
    .unwrap();
    let h = spec.spacing(0);
    for (pair, j, mass) in [([0, 1], 0, -1.0), ([0, 2], 1, -2.0)] {
        let rep = slice_report(&u, pair, &[], 0.5, 0.25).unwrap();
        for row in &rep.rows {
            assert_eq!(row.atoms.masses(), vec![mass]);
            assert!((row.atoms.atoms[0].position[0] - a[j]).abs() < h);
        }
    }
    let m = tensor_mass_estimate(&u, 0.5, 0.25).unwrap();
    let side = spec.side(2);
    assert!((m.per_pair[0].1 - side).abs() < 1e-12);
    assert!((m.per_pair[1].1 - 2f64.sqrt() * spec.side(1)).abs() < 1e-12, "{m:?}");
    assert_eq!(coordinate_plane_zero_check(&u, [1, 2]).unwrap(), 0.0);
}

#[test]
fn four_dimensional_pairs_record_their_sign() {
    let spec = cube(9, 4);
    let u = TensorField::sample(
        |x| if x[0] + 0.5 * x[1] > 0.0 && x[2] - 0.3 * x[3] > 0.0 { 1.0 } else { 0.0 },
        &spec,
        vec![1, 1, 2, 2],
    )
    .unwrap();
    let signs: Vec<i32> = u.cross_pairs().iter().map(|&p| u.pair_sign(p).unwrap()).collect();
    assert_eq!(signs, vec![1, -1, -1, 1]);
    for pair in u.cross_pairs() {
        let c = slice_commutation(&u, pair).unwrap();
        assert_eq!((c.slices, c.mismatches), (81, 0));
    }
    let h = spec.spacing(0);
    assert!(slice_energy_integral(&u, [0, 2], &schedule(h, &[2, 1])).unwrap().holds(1e-9));
    assert!(slice(&u, [0, 1], &[0, 0]).is_err());
}
