use defectlab::counterexample::{limit_fraction, Counterexample, CounterexampleSpec};
use defectlab::gallery;
use defectlab::grid::GridSpec;
use defectlab::levelset::*;
use defectlab::measure::{defect_measure, mass_ratio_profile, CellBox};
use std::f64::consts::FRAC_1_SQRT_2;

fn unit(n: usize) -> GridSpec {
    GridSpec::square(-1.0, 1.0, n).unwrap()
}

fn full(n: usize) -> CellBox {
    CellBox::new([0, 0], [n - 1, n - 1]).unwrap()
}

#[test]
fn bifurcation_superlevel_and_corners() {
    let u = gallery::bifurcation(&unit(129)).unwrap().field;
    // t = −0.5: left of x₁ = 0.5 or above x₂ = −0.5
    let s = superlevel(&u, -0.5);
    let spec = u.spec();
    for j in 0..129 {
        for i in 0..129 {
            let p = spec.node(i, j);
            let expect = p[0] < 0.5 || p[1] > -0.5;
            if (p[0] - 0.5).abs() > 1e-9 && (p[1] + 0.5).abs() > 1e-9 {
                assert_eq!(s.inside[i + 129 * j], expect, "{p:?}");
            }
        }
    }
    for t in [0.4, -0.4] {
        let k = kappa(&u, t).unwrap();
        assert_eq!(k.corners.len(), 1, "t = {t}");
        assert_eq!(k.corners[0].sign, 1);
        let p = k.corners[0].position;
        assert!((p[0] - 0.4).abs() < 1e-9 && (p[1] - t).abs() < 1e-9, "{p:?}");
    }
}

#[test]
fn layer_cake_on_bifurcation_and_tensor_sum() {
    let u = gallery::bifurcation(&unit(257)).unwrap().field;
    let lc = layer_cake_check(&u, &full(257), 1024).unwrap();
    assert!((lc.lhs - 2.0).abs() < 1e-9, "{}", lc.lhs);
    assert!(lc.rel_error < 1e-3, "{lc:?}");

    let grid = unit(65).offset_for_discontinuities();
    let step = defectlab::grid::Samples1d::along_axis(&grid, 0, |x| if x > 0.2 { 1.0 } else { 0.0 });
    let flat = defectlab::grid::Samples1d::along_axis(&grid, 1, |_| 0.0);
    let ts = gallery::tensor_sum(&step, &flat, &grid).unwrap().field;
    let lc = layer_cake_check(&ts, &full(65), 256).unwrap();
    assert_eq!((lc.lhs, lc.rhs), (0.0, 0.0));

    // two step factors: corners of opposite sign at different levels, so only
    // the signed identity survives
    let step2 = defectlab::grid::Samples1d::along_axis(&grid, 1, |x| if x > -0.3 { 2.0 } else { 0.0 });
    let ts = gallery::tensor_sum(&step, &step2, &grid).unwrap().field;
    let lc = layer_cake_check(&ts, &full(65), 256).unwrap();
    assert_eq!(lc.lhs, 0.0);
    assert!((lc.rhs - 2.0).abs() < 2.0 * 3.0 / 256.0, "{}", lc.rhs);
    assert_eq!(lc.signed_lhs, 0.0);
    assert!(lc.signed_rhs.abs() < 1e-12);
}

#[test]
fn bifurcation_one_sided_fits_disagree() {
    let u = gallery::bifurcation(&unit(257)).unwrap().field;
    let tr = track_corners(&u, [0.0, 0.0], [-0.1, 0.1], 40).unwrap();
    let (b, a) = (tr.below.unwrap(), tr.above.unwrap());
    assert!((b.slope[0] + 1.0).abs() < 0.02 && (b.slope[1] - 1.0).abs() < 0.02, "{b:?}");
    assert!((a.slope[0] - 1.0).abs() < 0.02 && (a.slope[1] - 1.0).abs() < 0.02, "{a:?}");
    assert!(tr.jump_detected && !tr.two_sided_consistent());
    assert!(estimate_traces(&u, &tr).is_err());

    let right = track_corners(&u, [0.5, 0.5], [0.4, 0.6], 41).unwrap();
    assert!(!right.jump_detected);
    let t = estimate_traces(&u, &right).unwrap();
    assert!((t.v_inf[0] - 1.0).abs() < 0.02 && (t.v_inf[1] - 1.0).abs() < 0.02);
    assert!((t.density - FRAC_1_SQRT_2).abs() < 0.02 * FRAC_1_SQRT_2);
}

#[test]
fn slanted_roof_traces() {
    // min(2x₁, x₂): x(t) = (t/2, t), h′ = (1/2, 1), v∞ = (2, 1), c = 2/√5
    let u = gallery::slanted_roof(&unit(257), 2.0).unwrap().field;
    let tr = track_corners(&u, [0.15, 0.3], [0.2, 0.4], 41).unwrap();
    assert!((tr.h_prime()[0] - 0.5).abs() < 1e-3 && (tr.h_prime()[1] - 1.0).abs() < 1e-3, "{:?}", tr.h_prime());
    let t = estimate_traces(&u, &tr).unwrap();
    assert!(t.consistent, "{t:?}");
    assert!((t.v_inf[0] - 2.0).abs() < 0.04 && (t.v_inf[1] - 1.0).abs() < 0.02);
    assert!((t.density - 2.0 / 5f64.sqrt()).abs() < 0.02);
}

#[test]
fn corner_speed_and_reciprocity() {
    for f in [gallery::roof(&unit(257)).unwrap(), gallery::bifurcation(&unit(257)).unwrap()] {
        let tr = track_corners(&f.field, [0.5, 0.5], [0.4, 0.6], 41).unwrap();
        for w in tr.samples.windows(2) {
            for l in 0..2 {
                assert!(w[1].position[l] - w[0].position[l] >= (w[1].t - w[0].t) * (1.0 - 1e-6), "{}", f.family);
            }
        }
        let t = estimate_traces(&f.field, &tr).unwrap();
        for l in 0..2 {
            assert!((tr.h_prime()[l] * t.v_inf[l] - 1.0).abs() < 0.02);
            assert!(tr.h_prime()[l].abs() >= 1.0 - 1e-6);
        }
    }
}

#[test]
fn density_matches_mass_ratio_at_tracked_corner() {
    let u = gallery::roof(&unit(513)).unwrap().field;
    let tr = track_corners(&u, [0.3, 0.3], [0.2, 0.4], 41).unwrap();
    let t = estimate_traces(&u, &tr).unwrap();
    let m = defect_measure(&u);
    let x = tr.corner_center.position;
    let prof = mass_ratio_profile(&m, x, &[0.0625, 0.03125]).unwrap();
    // |μ|(B_r)/(2r) is the line density
    let density = prof[1].ball.unwrap() / 2.0;
    assert!((density - t.density).abs() < 0.03 * t.density, "{density} vs {}", t.density);
}

#[test]
fn corner_count_is_lower_semicontinuous_near_tracked_levels() {
    let u = gallery::bifurcation(&unit(129)).unwrap().field;
    let levels = generic_levels(&u);
    for w in levels.windows(3).step_by(7) {
        let n = kappa(&u, w[1]).unwrap().count();
        assert_eq!(n, 1);
        for s in [w[0], w[2]] {
            assert!(kappa(&u, s).unwrap().count() >= n);
        }
    }
}

#[test]
fn slice_areas_decrease_with_level() {
    let u = gallery::roof(&unit(65)).unwrap().field;
    let win = CellBox::new([10, 10], [40, 50]).unwrap();
    let mut prev = f64::INFINITY;
    let mut prev_w = f64::INFINITY;
    for t in generic_levels(&u).into_iter().step_by(5) {
        let s = level_slice(&u, t, &[win]).unwrap();
        assert_eq!(s.count, s.corners.iter().map(|c| c.sign.unsigned_abs() as usize).sum::<usize>());
        assert!(s.area <= prev && s.window_areas[0] <= prev_w);
        prev = s.area;
        prev_w = s.window_areas[0];
        // quadrant boundary: two rays of length 1 − t
        assert!((s.perimeter - 2.0 * (1.0 - t)).abs() < 2.0 / 64.0 + 1e-9, "{t}: {}", s.perimeter);
    }
}

#[test]
fn counterexample_fractions_and_inclusion() {
    let ce = Counterexample::new(CounterexampleSpec::new(4.0, 6).unwrap());
    let deepest = ce.spec.deepest_resolvable();
    let r = ce.spec.r(deepest);
    let e = blowup(&ce, [0.0, 0.0], &[r]).unwrap();
    let frac = e[0].ball_fractions.unwrap();
    // even tiles put |v₂| = 1 in the horizontal bands, odd tiles rotate them
    let l = if deepest.is_multiple_of(2) { 1 } else { 0 };
    assert!((frac[l] - limit_fraction()).abs() < 0.05 * limit_fraction(), "{frac:?}");

    let v = ce.sample_vector(&unit(129)).unwrap();
    assert_eq!(inclusion_residual(&v), 0.0);
}

#[test]
fn roof_off_diagonal_is_a_lebesgue_point() {
    let u = gallery::roof(&unit(257)).unwrap().field;
    let src = GradientSource::new(&u);
    let e = blowup(&src, [0.5, -0.3], &[0.2, 0.1, 0.05]).unwrap();
    for x in &e {
        assert_eq!(x.mass_ratio, Some(0.0));
        let f = x.square_fractions.unwrap();
        assert!((f[0] - 0.0).abs() < 1e-12 && (f[1] - 1.0).abs() < 1e-12, "{f:?}");
    }
    assert!(blowup(&src, [0.9, 0.9], &[0.5]).unwrap()[0].flagged());
}
