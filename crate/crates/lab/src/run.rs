//! Executes one configured experiment.

use std::collections::BTreeMap;
use std::time::Instant;

use defectlab::counterexample::limit_fraction;
use defectlab::energy::{energy_eps, energy_prime, energy_second, energy_sweep, Quadrature};
use defectlab::gallery::GroundTruth;
use defectlab::levelset::{
    blowup, estimate_traces, inclusion_residual, layer_cake_check, track_corners, GradientSource,
};
use defectlab::measure::{defect_measure, dimension_profile, extract_atoms, mass_ratio_profile, theta_mass, CellBox};
use defectlab::slicing::{
    coordinate_plane_zero_check, slice_commutation, slice_energy_integral, slice_report, tensor_mass_estimate,
};
use defectlab::{LabError, Point, Result, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::families::{self, Built};
use crate::report::{num, opt, Check, RunReport, Stage, Table};
use crate::svg;

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    summary: BTreeMap<String, Value>,
    checks: Vec<Check>,
    tables: Vec<Table>,
    stages: Vec<Stage>,
    svgs: Vec<(String, String)>,
    clock: Instant,
}

impl<'a> Run<'a> {
    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(Stage { name: name.to_string(), seconds: (now - self.clock).as_secs_f64() });
        self.clock = now;
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn note(&mut self, key: &str, v: Value) {
        self.summary.insert(key.to_string(), v);
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut r = Run {
        cfg,
        summary: BTreeMap::new(),
        checks: Vec::new(),
        tables: Vec::new(),
        stages: Vec::new(),
        svgs: Vec::new(),
        clock: Instant::now(),
    };
    if cfg.experiment == Experiment::Slicing {
        slicing(&mut r)?;
    } else {
        let b = families::build(&cfg.field)?;
        r.stage("build field");
        r.note("family", json!(b.family));
        r.note("nodes", json!(cfg.field.nodes));
        match cfg.experiment {
            Experiment::EnergySweep => energy(&mut r, &b)?,
            Experiment::Atoms => atoms(&mut r, &b)?,
            Experiment::Quantization => quantization(&mut r, &b)?,
            Experiment::LayerCake => layer_cake(&mut r, &b)?,
            Experiment::CornerTrack => corner_track(&mut r, &b)?,
            Experiment::Blowup => blowup_exp(&mut r, &b)?,
            Experiment::Counterexample => counterexample(&mut r, &b)?,
            Experiment::DimensionProfile => dimension(&mut r, &b)?,
            Experiment::Slicing => unreachable!(),
        }
    }
    Ok(RunReport {
        tool_version: crate::report::TOOL_VERSION,
        config: cfg.clone(),
        summary: r.summary,
        checks: r.checks,
        tables: r.tables,
        stages: r.stages,
        svgs: r.svgs,
    })
}

fn energy(r: &mut Run, b: &Built) -> Result<()> {
    let s = &r.cfg.schedules;
    let u = &b.field;
    let rep = energy_sweep(u, &s.eps, s.theta(), s.kernel(), s.quadrature())?;
    r.stage("energy_eps sweep");
    let mut t = Table::new("energy", &["eps", "energy", "empty_domain", "interpolated"]);
    for v in &rep.values {
        t.push(vec![num(v.eps), num(v.value), v.empty_domain.to_string(), v.interpolated.to_string()]);
    }
    r.tables.push(t);
    r.note("liminf_estimate", json!(rep.liminf_estimate));
    let ok = rep.values.iter().all(|v| v.value >= 0.0 && v.value.is_finite());
    r.check(Check::new("energy is finite and nonnegative", ok, format!("{} values", rep.values.len()), "all >= 0"));
    if b.one_variable {
        let max = rep.values.iter().fold(0.0f64, |m, v| m.max(v.value.abs()));
        r.check(Check::new("energy vanishes on one-variable fields", max == 0.0, num(max), "0 exactly"));
    }
    if u.lipschitz().is_some() && u.has_evaluator() {
        let eps = *s.eps.last().unwrap();
        let a = rep.values.last().unwrap().value;
        let fine = energy_eps(u, eps, s.theta(), s.kernel(), Quadrature { z_points: 2 * s.z_points })?.value;
        let rel = if fine == 0.0 { (a - fine).abs() } else { (a - fine).abs() / fine };
        r.stage("doubled z resolution");
        r.check(Check::new("doubling z resolution changes energy by < 1%", rel < 0.01, num(rel), "< 0.01"));
    }
    if !s.r.is_empty() {
        let sch = s.pairs();
        let p = energy_prime(u, &sch, s.theta())?;
        let q = energy_second(u, &sch, 1.0)?;
        r.stage("schedule energies");
        let mut t = Table::new("schedule", &["eps", "r", "energy_prime", "energy_second", "interpolated"]);
        for (k, &(e, rr)) in sch.iter().enumerate() {
            t.push(vec![
                num(e),
                num(rr),
                num(p.values[k]),
                num(q.values[k]),
                (p.interpolated || q.interpolated).to_string(),
            ]);
        }
        r.tables.push(t);
        r.note("energy_prime_tail", json!(p.tail_estimate));
        r.note("energy_second_tail", json!(q.tail_estimate));
        let tv = defect_measure(u).total_variation();
        r.note("total_variation", json!(tv));
        if q.tail_estimate > 0.0 {
            r.note("tv_over_energy_second", json!(tv / q.tail_estimate));
        }
    }
    Ok(())
}

fn cell_diagonal(b: &Built) -> f64 {
    let s = b.field.spec();
    s.spacing(0).hypot(s.spacing(1))
}

fn atoms(r: &mut Run, b: &Built) -> Result<()> {
    let s = &r.cfg.schedules;
    let m = defect_measure(&b.field);
    let a = extract_atoms(&m, s.tol)?;
    r.stage("extract atoms");
    let mut t = Table::new("atoms", &["x1", "x2", "mass", "cells_merged"]);
    for x in &a.atoms {
        t.push(vec![num(x.position[0]), num(x.position[1]), num(x.mass), x.cells_merged.to_string()]);
    }
    r.tables.push(t);
    r.note("atom_count", json!(a.len()));
    r.note("theta_mass", json!(theta_mass(&a, s.theta1 + s.theta2)?));
    r.note("residual", json!(a.residual));
    r.check(Check::new("residual below tolerance", a.residual < s.tol, num(a.residual), format!("< {}", s.tol)));
    match &b.truth {
        Some(GroundTruth::Atoms(truth)) => {
            r.check(Check::new(
                "atom count matches construction",
                a.len() == truth.len(),
                a.len().to_string(),
                truth.len().to_string(),
            ));
            let diag = cell_diagonal(b);
            let mut worst = 0.0f64;
            let mut all_matched = true;
            for p in truth {
                let best = a
                    .atoms
                    .iter()
                    .filter(|x| if b.indicator { x.mass == p.mass } else { (x.mass - p.mass).abs() <= s.tol })
                    .map(|x| (x.position[0] - p.position[0]).hypot(x.position[1] - p.position[1]))
                    .fold(f64::INFINITY, f64::min);
                all_matched &= best <= diag;
                worst = worst.max(best);
            }
            r.check(Check::new(
                "every constructed corner has an atom of equal mass within one cell diagonal",
                all_matched,
                num(worst),
                format!("<= {}", num(diag)),
            ));
            if r.cfg.svg {
                r.svgs.push(("atoms.svg".into(), svg::atoms(&b.field, &a)));
            }
        }
        Some(GroundTruth::Zero) => {
            r.check(Check::new("no atoms for a vanishing measure", a.is_empty(), a.len().to_string(), "0"));
        }
        _ => {
            if r.cfg.svg {
                r.svgs.push(("atoms.svg".into(), svg::atoms(&b.field, &a)));
            }
        }
    }
    Ok(())
}

/// A uniformly random grid-aligned box with at least one cell per side.
pub fn random_box(cx: usize, cy: usize, rng: &mut ChaCha8Rng) -> CellBox {
    let (a, b) = (rng.gen_range(0..=cx), rng.gen_range(0..=cx));
    let (c, d) = (rng.gen_range(0..=cy), rng.gen_range(0..=cy));
    let (mut i0, mut i1) = (a.min(b), a.max(b));
    let (mut j0, mut j1) = (c.min(d), c.max(d));
    if i0 == i1 {
        if i1 < cx {
            i1 += 1
        } else {
            i0 -= 1
        }
    }
    if j0 == j1 {
        if j1 < cy {
            j1 += 1
        } else {
            j0 -= 1
        }
    }
    CellBox::new([i0, j0], [i1, j1]).expect("nonempty box")
}

fn quantization(r: &mut Run, b: &Built) -> Result<()> {
    let m = defect_measure(&b.field);
    let sup = b.field.sup_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(r.cfg.seed);
    let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
    let mut off_lattice = 0usize;
    let mut bound_fail = 0usize;
    let mut prefix_fail = 0usize;
    let mut max_abs = 0.0f64;
    for _ in 0..r.cfg.schedules.boxes {
        let q = random_box(m.cells_x(), m.cells_y(), &mut rng);
        let v = m.box_mass(&q)?;
        max_abs = max_abs.max(v.abs());
        if !(v.abs() < 4.0 * sup || v == 0.0) {
            bound_fail += 1;
        }
        if b.indicator && m.prefix_mass(&q)? != v {
            prefix_fail += 1;
        }
        if v == v.round() && v.abs() <= 2.0 {
            *hist.entry(v as i64).or_default() += 1;
        } else {
            off_lattice += 1;
        }
    }
    r.stage("random boxes");
    let mut t = Table::new("quantization", &["mass", "count"]);
    for (k, c) in &hist {
        t.push(vec![k.to_string(), c.to_string()]);
    }
    if off_lattice > 0 {
        t.push(vec!["other".into(), off_lattice.to_string()]);
    }
    r.tables.push(t);
    r.note("boxes", json!(r.cfg.schedules.boxes));
    r.note("max_abs_mass", json!(max_abs));
    r.check(Check::new(
        "|mu(Q)| < 4 sup|u|",
        bound_fail == 0,
        format!("{bound_fail} violations, max {}", num(max_abs)),
        format!("< {}", num(4.0 * sup)),
    ));
    if b.indicator {
        r.check(Check::new(
            "indicator box masses lie in {-2,...,2}",
            off_lattice == 0,
            format!("{off_lattice} off-lattice"),
            "0",
        ));
        r.check(Check::new(
            "prefix sums reproduce four-point masses exactly",
            prefix_fail == 0,
            format!("{prefix_fail} mismatches"),
            "0",
        ));
    }
    Ok(())
}

fn layer_cake(r: &mut Run, b: &Built) -> Result<()> {
    let m = defect_measure(&b.field);
    let lc = layer_cake_check(&b.field, &m.full_box(), r.cfg.schedules.levels)?;
    r.stage("layer cake");
    let mut t = Table::new(
        "layer_cake",
        &["lhs", "rhs", "rel_error", "signed_lhs", "signed_rhs", "levels", "perturbed_levels"],
    );
    t.push(vec![
        num(lc.lhs),
        num(lc.rhs),
        num(lc.rel_error),
        num(lc.signed_lhs),
        num(lc.signed_rhs),
        lc.levels.to_string(),
        lc.perturbed.len().to_string(),
    ]);
    r.tables.push(t);
    if lc.lhs > 0.0 {
        r.check(Check::new(
            "|mu|(A) = integral of |kappa_t|(A) dt",
            lc.rel_error < 1e-3,
            num(lc.rel_error),
            "< 1e-3 relative",
        ));
    }
    let scale = lc.lhs.max(lc.signed_lhs.abs()).max(1.0);
    let d = (lc.signed_lhs - lc.signed_rhs).abs() / scale;
    r.check(Check::new("mu(A) = integral of kappa_t(A) dt", d < 1e-3, num(d), "< 1e-3 relative"));
    Ok(())
}

fn corner_track(r: &mut Run, b: &Built) -> Result<()> {
    let s = &r.cfg.schedules;
    let (center, window) = match (s.center, s.window, b.track) {
        (Some(c), Some(w), _) => (c, w),
        (c, w, Some((dc, dw))) => (c.unwrap_or(dc), w.unwrap_or(dw)),
        _ => return Err(LabError::InvalidParameter(format!("family {} needs `center` and `window`", b.family))),
    };
    let tr = track_corners(&b.field, center, window, s.samples)?;
    r.stage("track corners");
    let mut t = Table::new("track", &["t", "x1", "x2", "sign"]);
    for x in &tr.samples {
        t.push(vec![num(x.t), num(x.position[0]), num(x.position[1]), x.sign.to_string()]);
    }
    r.tables.push(t);
    let mut f = Table::new("fits", &["side", "slope1", "slope2", "intercept1", "intercept2", "residual", "count"]);
    for (side, fit) in [("all", Some(&tr.fit)), ("below", tr.below.as_ref()), ("above", tr.above.as_ref())] {
        if let Some(x) = fit {
            f.push(vec![
                side.into(),
                num(x.slope[0]),
                num(x.slope[1]),
                num(x.intercept[0]),
                num(x.intercept[1]),
                num(x.residual),
                x.count.to_string(),
            ]);
        }
    }
    r.tables.push(f);
    r.note("h_prime", json!(tr.h_prime()));
    r.note("jump_detected", json!(tr.jump_detected));
    r.note("matched_fraction", json!(tr.matched_fraction));
    let lip = b.field.lipschitz().unwrap_or(1.0);
    let mut worst = f64::INFINITY;
    for w in tr.samples.windows(2) {
        let dt = (w[1].t - w[0].t).abs();
        for l in 0..2 {
            worst = worst.min((w[1].position[l] - w[0].position[l]).abs() - dt / lip * (1.0 - 1e-6));
        }
    }
    r.check(Check::new("corner speed |dx_l| >= |dt|/L", worst >= -1e-12, num(worst), ">= 0 margin"));
    if r.cfg.svg {
        r.svgs.push(("track.svg".into(), svg::track(&b.field, &tr)));
    }
    if tr.jump_detected {
        r.note("two_sided_consistent", json!(tr.two_sided_consistent()));
        return Ok(());
    }
    let tc = estimate_traces(&b.field, &tr)?;
    r.stage("traces");
    let mut t = Table::new(
        "traces",
        &["from_velocity1", "from_velocity2", "v_inf1", "v_inf2", "density", "discrepancy", "consistent"],
    );
    t.push(vec![
        num(tc.from_velocity[0]),
        num(tc.from_velocity[1]),
        num(tc.v_inf[0]),
        num(tc.v_inf[1]),
        num(tc.density),
        num(tc.discrepancy),
        tc.consistent.to_string(),
    ]);
    r.tables.push(t);
    let h = tr.h_prime();
    let rec = (0..2).map(|l| (h[l] * tc.v_inf[l] - 1.0).abs()).fold(0.0, f64::max);
    r.check(Check::new("reciprocity h'_l v_l = 1", rec < 0.02, num(rec), "< 0.02"));
    r.check(Check::new("trace estimates agree", tc.consistent, num(tc.discrepancy), "< 0.02"));
    Ok(())
}

fn blowup_exp(r: &mut Run, b: &Built) -> Result<()> {
    let s = &r.cfg.schedules;
    if let Some(ce) = &b.counterexample {
        let spec = &ce.spec;
        let ks: Vec<usize> = (0..=spec.depth()).filter(|&k| spec.resolvable(k)).collect();
        let center = s.center.unwrap_or([0.0, 0.0]);
        let radii: Vec<f64> =
            if s.radii.is_empty() { ks.iter().map(|&k| spec.r(k)).collect() } else { s.radii.clone() };
        let entries = blowup(ce, center, &radii)?;
        r.stage("blow-up fractions");
        let beta = spec.beta();
        let mut t = Table::new(
            "fractions",
            &["k", "radius", "parity", "mass_ratio", "ball_ratio", "ball_v1", "ball_v2", "square_v1", "square_v2"],
        );
        let mut bound_ok = true;
        let mut worst_bound = 0.0f64;
        for (k, e) in entries.iter().enumerate() {
            let ball = ce.ball_mass(center, e.radius) / e.radius;
            if let Some(beta) = beta {
                let limit = 48.0 * e.radius.powf(beta - 1.0);
                bound_ok &= ball <= limit;
                worst_bound = worst_bound.max(ball / limit);
            }
            let bf = e.ball_fractions.unwrap_or([f64::NAN; 2]);
            let sf = e.square_fractions.unwrap_or([f64::NAN; 2]);
            t.push(vec![
                k.to_string(),
                num(e.radius),
                if k % 2 == 0 { "even" } else { "odd" }.into(),
                opt(e.mass_ratio),
                num(ball),
                num(bf[0]),
                num(bf[1]),
                num(sf[0]),
                num(sf[1]),
            ]);
        }
        r.tables.push(t);
        if beta.is_some() {
            r.check(Check::new("|mu|(B_r)/r <= 48 r^(beta-1)", bound_ok, num(worst_bound), "ratio <= 1"));
        }
        if s.radii.is_empty() && ks.len() >= 2 {
            let q = limit_fraction();
            let frac = |k: usize| entries[k].ball_fractions.unwrap_or([f64::NAN; 2]);
            let last = *ks.last().unwrap();
            let (even, odd) = if last.is_multiple_of(2) { (last, last - 1) } else { (last - 1, last) };
            let fe = frac(even)[1];
            let fo = frac(odd)[0];
            let de = (fe - q).abs() / q;
            let sym = (fo - fe).abs() / q;
            r.note("q", json!(q));
            r.check(Check::new(
                "even-level fraction of |v2| approaches q",
                de < 0.05,
                num(fe),
                format!("{} within 5%", num(q)),
            ));
            r.check(Check::new(
                "odd-level fraction of |v1| matches by symmetry",
                sym < 0.05,
                num(fo),
                format!("{} within 5% of q", num(fe)),
            ));
        }
        return Ok(());
    }
    let center = s.center.unwrap_or([0.5, 0.5]);
    let radii = if s.radii.is_empty() { vec![0.25, 0.125, 0.0625, 0.03125, 0.015625] } else { s.radii.clone() };
    let src = GradientSource::new(&b.field);
    let entries = blowup(&src, center, &radii)?;
    let prof = mass_ratio_profile(src.measure(), center, &radii)?;
    r.stage("blow-up");
    let mut t =
        Table::new("blowup", &["radius", "mass_ratio", "ball_ratio", "square_v1", "square_v2", "ball_v1", "ball_v2"]);
    for (e, p) in entries.iter().zip(&prof) {
        let sf = e.square_fractions.map(|f| f.map(Some)).unwrap_or([None; 2]);
        let bf = e.ball_fractions.map(|f| f.map(Some)).unwrap_or([None; 2]);
        t.push(vec![num(e.radius), opt(e.mass_ratio), opt(p.ball), opt(sf[0]), opt(sf[1]), opt(bf[0]), opt(bf[1])]);
    }
    r.tables.push(t);
    let flagged = entries.iter().filter(|e| e.flagged()).count();
    r.note("flagged_radii", json!(flagged));
    if let Some(GroundTruth::Line { from, to, density }) = &b.truth {
        if point_segment_distance(center, *from, *to) < 1e-12 {
            if let Some(ratio) = prof.last().and_then(|p| p.ball) {
                let rel = (ratio - 2.0 * density).abs() / (2.0 * density);
                r.check(Check::new(
                    "|mu|(B_r)/r approaches 2 x line density",
                    rel < 0.02,
                    num(ratio),
                    format!("{} within 2%", num(2.0 * density)),
                ));
            }
        }
    }
    Ok(())
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

fn counterexample(r: &mut Run, b: &Built) -> Result<()> {
    let Some(ce) = &b.counterexample else {
        return Err(LabError::InvalidParameter("the counterexample experiment needs family = counterexample".into()));
    };
    let spec = &ce.spec;
    let grid = b.field.spec().clone();
    let v = ce.sample_vector(&grid)?;
    let res = inclusion_residual(&v);
    let control = VectorField::sample(|_| [1.0, 1.0], &grid)?;
    let ctrl = inclusion_residual(&control);
    r.stage("inclusion residuals");
    r.check(Check::new("inclusion residual of v is zero", res == 0.0, num(res), "0 exactly"));
    r.check(Check::new("inclusion residual of the constant (1,1) is positive", ctrl > 0.0, num(ctrl), "> 0"));
    let mut rng = ChaCha8Rng::seed_from_u64(r.cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let x: defectlab::Point = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let y: defectlab::Point = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let d = (x[0] - y[0]).hypot(x[1] - y[1]);
        if d > 0.0 {
            worst = worst.max((ce.eval(x)?.u - ce.eval(y)?.u).abs() / d);
        }
    }
    r.stage("Lipschitz sampling");
    r.check(Check::new("potential is 1-Lipschitz on random pairs", worst <= 1.0 + 1e-9, num(worst), "<= 1 + 1e-9"));
    let mut t = Table::new("tiles", &["k", "log2_r", "eps", "resolvable", "ball_ratio"]);
    for k in 0..=spec.depth() {
        let ok = spec.resolvable(k);
        let ratio = if ok { num(ce.ball_mass([0.0, 0.0], spec.r(k)) / spec.r(k)) } else { String::new() };
        t.push(vec![k.to_string(), num(spec.log2_r(k)), num(spec.eps(k)), ok.to_string(), ratio]);
    }
    r.tables.push(t);
    r.note("deepest_resolvable", json!(spec.deepest_resolvable()));
    if r.cfg.svg {
        r.svgs.push(("tiling.svg".into(), svg::tiling(ce, 3)));
    }
    Ok(())
}

fn dimension(r: &mut Run, b: &Built) -> Result<()> {
    let m = defect_measure(&b.field);
    let spec = b.field.spec();
    let h = spec.spacing(0).max(spec.spacing(1));
    let scales: Vec<f64> = if r.cfg.schedules.scales.is_empty() {
        let side = spec.side(0).min(spec.side(1));
        // atoms only look zero-dimensional below their separation
        let cap = match &b.truth {
            Some(GroundTruth::Atoms(a)) => 0.5 * min_separation(a),
            _ => f64::INFINITY,
        };
        (2..).map(|k| side / 2f64.powi(k)).take_while(|&s| s >= 4.0 * h).filter(|&s| s < cap).collect()
    } else {
        r.cfg.schedules.scales.clone()
    };
    r.note("scales", json!(scales.len()));
    if scales.len() < 3 {
        r.note("slope", json!(null));
        return Ok(());
    }
    let p = dimension_profile(&m, &scales, None)?;
    r.stage("box counting");
    let mut t = Table::new("dimension", &["scale", "cells_per_side", "count", "entropy_count"]);
    for s in &p.scales {
        t.push(vec![num(s.scale), s.cells_per_side.to_string(), s.count.to_string(), num(s.entropy_count)]);
    }
    r.tables.push(t);
    r.note("slope", json!(p.slope));
    r.note("entropy_slope", json!(p.entropy_slope));
    let expected = match &b.truth {
        Some(GroundTruth::Atoms(_)) => Some(0.0),
        Some(GroundTruth::Line { .. }) => Some(1.0),
        _ => None,
    };
    if let Some(d) = expected {
        let err = (p.slope - d).abs();
        r.check(Check::new(
            "box-counting slope matches the support dimension",
            err < 0.25,
            num(p.slope),
            format!("{d} within 0.25"),
        ));
    }
    Ok(())
}

/// Smallest sup-norm distance between two atoms; infinite for fewer than two.
fn min_separation(atoms: &[defectlab::gallery::PointMass]) -> f64 {
    let mut d = f64::INFINITY;
    for (i, a) in atoms.iter().enumerate() {
        for b in &atoms[i + 1..] {
            d = d.min((a.position[0] - b.position[0]).abs().max((a.position[1] - b.position[1]).abs()));
        }
    }
    d
}

fn slicing(r: &mut Run) -> Result<()> {
    let cfg = r.cfg;
    let s = &cfg.schedules;
    let (u, extruded) = families::build_tensor(&cfg.field)?;
    r.stage("build tensor field");
    r.note("family", json!(cfg.field.family));
    r.note("dims", json!(cfg.field.dims));
    r.note("extruded", json!(extruded));
    let pairs = u.cross_pairs();
    let mut t = Table::new("commutation", &["a", "b", "sign", "slices", "cells", "mismatches"]);
    let mut mism = 0;
    for &p in &pairs {
        let c = slice_commutation(&u, p)?;
        mism += c.mismatches;
        t.push(vec![
            (p[0] + 1).to_string(),
            (p[1] + 1).to_string(),
            c.sign.to_string(),
            c.slices.to_string(),
            c.cells.to_string(),
            c.mismatches.to_string(),
        ]);
    }
    r.tables.push(t);
    r.stage("commutation");
    r.check(Check::new(
        "slice measures equal sliced cross differences cell by cell",
        mism == 0,
        format!("{mism} mismatches"),
        "0",
    ));

    let dim = u.spec().dim();
    let mut planes = Table::new("planes", &["a", "b", "max_abs"]);
    let mut worst = 0.0f64;
    for a in 0..dim {
        for c in a + 1..dim {
            if u.factors()[a] == u.factors()[c] {
                let v = coordinate_plane_zero_check(&u, [a, c])?;
                worst = worst.max(v);
                planes.push(vec![(a + 1).to_string(), (c + 1).to_string(), num(v)]);
            }
        }
    }
    r.tables.push(planes);
    r.stage("coordinate planes");
    if extruded {
        r.check(Check::new("within-factor planes carry no cross differences", worst == 0.0, num(worst), "0 exactly"));
    }

    let h = u.spec().spacing(0);
    let sch: Vec<(f64, f64)> =
        if s.r.is_empty() { [8.0, 4.0, 2.0, 1.0].iter().map(|&k| (1.5 * k * h, k * h)).collect() } else { s.pairs() };
    let first = pairs[0];
    let f = slice_energy_integral(&u, first, &sch)?;
    r.stage("slice energy integral");
    let mut t = Table::new("fatou", &["eps", "r", "lhs", "lhs_pair", "rhs", "relative_slack"]);
    for (k, &(e, rr)) in sch.iter().enumerate() {
        t.push(vec![num(e), num(rr), num(f.lhs[k]), num(f.lhs_pair[k]), num(f.rhs[k]), num(f.relative_slack[k])]);
    }
    r.tables.push(t);
    let min_slack = f.relative_slack.iter().copied().fold(f64::INFINITY, f64::min);
    r.check(Check::new("E''(u) >= integral of E''(slices)", f.holds(1e-9), num(min_slack), ">= -1e-9 relative"));

    let theta = s.theta1 + s.theta2;
    let rep = slice_report(&u, first, &sch, theta, s.tol)?;
    r.stage("slice report");
    let trans = u.transverse(first);
    let mut header: Vec<String> = trans.iter().map(|a| format!("i{}", a + 1)).collect();
    header.extend(trans.iter().map(|a| format!("x{}", a + 1)));
    header.extend((0..sch.len()).map(|k| format!("energy_second_{k}")));
    header.extend(["atoms", "abs_mass", "theta_mass", "resolved", "weight"].map(String::from));
    let mut t = Table::with_header("slices", header);
    for (row, w) in rep.rows.iter().zip(&rep.weights) {
        let mut cells: Vec<String> = row.offset.iter().map(|i| i.to_string()).collect();
        cells.extend(row.coords.iter().map(|&x| num(x)));
        cells.extend(row.energy_second.iter().map(|&x| num(x)));
        cells.push(row.atoms.len().to_string());
        cells.push(num(row.atoms.atoms.iter().map(|a| a.mass.abs()).sum()));
        cells.push(num(row.theta_mass));
        cells.push(row.resolved.to_string());
        cells.push(num(*w));
        t.push(cells);
    }
    r.tables.push(t);
    r.note("aggregate_energy_second", json!(rep.aggregate_energy));
    r.note("aggregate_theta_mass", json!(rep.aggregate_theta_mass));
    if extruded {
        let base = &rep.rows[0].atoms.atoms;
        let same = rep.rows.iter().all(|row| {
            row.atoms.atoms.len() == base.len()
                && row.atoms.atoms.iter().zip(base).all(|(a, b)| {
                    a.mass.to_bits() == b.mass.to_bits() && a.position.map(f64::to_bits) == b.position.map(f64::to_bits)
                })
        });
        r.check(Check::new(
            "slice atoms are bitwise identical across offsets",
            same,
            format!("{} slices", rep.rows.len()),
            "identical",
        ));
    }
    match tensor_mass_estimate(&u, theta, s.tol) {
        Ok(m) => {
            r.note("tensor_mass", json!(m.total));
            r.note("resolved_fraction", json!(m.resolved_fraction));
        }
        Err(e) => {
            r.note("tensor_mass_error", json!(e.to_string()));
        }
    }
    r.stage("tensor mass");
    Ok(())
}
