use lab::config::parse_config;
use lab::report::RunReport;
use lab::run::run;

fn go(text: &str) -> RunReport {
    let cfg = parse_config(text).expect("config parses");
    let r = run(&cfg).expect("experiment runs");
    assert!(r.passed(), "{}", r.render());
    r
}

fn column(r: &RunReport, table: &str, col: &str) -> Vec<String> {
    let t = r.table(table).unwrap_or_else(|| panic!("no table {table}"));
    let k = t.header.iter().position(|h| h == col).unwrap();
    t.rows.iter().map(|row| row[k].clone()).collect()
}

fn floats(v: Vec<String>) -> Vec<f64> {
    v.iter().map(|s| s.parse().unwrap()).collect()
}

#[test]
fn roof_track_moves_along_the_diagonal() {
    let r = go("[experiment]\nname = corner-track\n[field]\nfamily = roof\n[output]\nsvg = true\n");
    let x1 = floats(column(&r, "track", "x1"));
    let x2 = floats(column(&r, "track", "x2"));
    assert!(x1.len() > 10);
    for (a, b) in x1.iter().zip(&x2) {
        assert!((a - b).abs() < 1e-9);
    }
    let (_, svg) = r.svgs.iter().find(|(n, _)| n == "track.svg").unwrap();
    assert!(svg.contains("<polyline") && svg.contains("h' = (1.000, 1.000)"));
}

#[test]
fn bifurcation_fits_disagree_across_the_level() {
    let cfg = parse_config("[experiment]\nname = corner-track\n[field]\nfamily = bifurcation\n").unwrap();
    let r = run(&cfg).unwrap();
    let sides = column(&r, "fits", "side");
    let s1 = floats(column(&r, "fits", "slope1"));
    let below = sides.iter().position(|s| s == "below").unwrap();
    let above = sides.iter().position(|s| s == "above").unwrap();
    assert!((s1[below] + 1.0).abs() < 0.02);
    assert!((s1[above] - 1.0).abs() < 0.02);
}

#[test]
fn blowup_fractions_alternate_with_parity() {
    let r = go("[experiment]\nname = blowup\n[field]\nfamily = counterexample\nalpha = 4\ndepth = 6\n");
    let parity = column(&r, "fractions", "parity");
    let v1 = floats(column(&r, "fractions", "ball_v1"));
    let v2 = floats(column(&r, "fractions", "ball_v2"));
    assert!(parity.len() >= 5);
    // the two outermost balls still see several tiles; from k = 2 on the
    // dominant component of v swaps with each level
    for ((p, a), b) in parity.iter().zip(&v1).zip(&v2).skip(2) {
        if p == "even" {
            assert!(a < b, "{p}: {a} {b}");
        } else {
            assert!(b < a, "{p}: {a} {b}");
        }
    }
}

#[test]
fn counterexample_tiling_draws_nested_rectangles() {
    let r = go(
        "[experiment]\nname = counterexample\n[field]\nfamily = counterexample\nnodes = 129\n[output]\nsvg = true\n",
    );
    let (_, svg) = r.svgs.iter().find(|(n, _)| n == "tiling.svg").unwrap();
    assert_eq!(svg.matches("<polygon").count(), 8);
}

#[test]
fn layer_cake_rows_match_the_levels() {
    let r = go("[experiment]\nname = layer-cake\n[field]\nfamily = roof\nnodes = 129\n[schedules]\nlevels = 256\n");
    assert_eq!(column(&r, "layer_cake", "levels"), vec!["256".to_string()]);
}

#[test]
fn slicing_four_dimensional_stack_records_signs() {
    let r = go("[experiment]\nname = slicing\n[field]\nfamily = quadrant-stack\nnodes = 17\ndims = 4\n");
    let signs = column(&r, "commutation", "sign");
    assert_eq!(signs, vec!["1", "-1", "-1", "1"]);
    assert!(column(&r, "commutation", "mismatches").iter().all(|m| m == "0"));
}

#[test]
fn schedules_energy_second_is_monotone_on_the_roof() {
    let r = go("[experiment]\nname = energy-sweep\n[field]\nfamily = roof\nnodes = 129\n[schedules]\neps = 0.4, 0.2, 0.1\nr = 0.2, 0.1, 0.05\n");
    let e2 = floats(column(&r, "schedule", "energy_second"));
    assert_eq!(e2.len(), 3);
    // exact value 2(1 - eps) - r/3 up to quadrature
    for ((e, eps), rr) in e2.iter().zip([0.4, 0.2, 0.1]).zip([0.2, 0.1, 0.05]) {
        let exact = 2.0 * (1.0 - eps) - rr / 3.0;
        assert!((e - exact).abs() < 0.05 * exact, "{e} vs {exact}");
    }
}
