//! The acceptance suite: eleven criteria, each with its tolerance and time
//! budget, reported as one pass/fail line apiece.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use defectlab::counterexample::{limit_fraction, Counterexample, CounterexampleSpec};
use defectlab::energy::{energy_eps, Kernel, Quadrature};
use defectlab::gallery::{self, figure1_spec, polygon_indicator, GroundTruth};
use defectlab::levelset::{blowup, estimate_traces, inclusion_residual, layer_cake_check, track_corners};
use defectlab::measure::{
    concentration_integral, defect_measure, extract_atoms, mass_ratio_profile, theta_mass, CellBox, INTEGER_TOL,
};
use defectlab::slicing::{
    coordinate_plane_zero_check, extruded_figure1, slice, slice_commutation, slice_energy_integral, slice_report,
};
use defectlab::{GridSpec, Result, ThetaPair, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{FieldConfig, SecondFactor};
use crate::families;
use crate::report::{num, Table};
use crate::run::random_box;

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    /// Measured values against their tolerances.
    pub measured: String,
    pub seconds: f64,
    pub budget_seconds: f64,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {}: {} [{:.2} s of {} s]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.measured,
            self.seconds,
            self.budget_seconds
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub criteria: Vec<Criterion>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            let _ = writeln!(s, "{}", c.line());
        }
        let n = self.criteria.iter().filter(|c| c.passed).count();
        let _ = writeln!(s, "{n}/{} criteria passed", self.criteria.len());
        s
    }

    /// Writes `criterion-NN/<table>.csv` and `selftest.json` under `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        for c in &self.criteria {
            let sub = dir.join(format!("criterion-{:02}", c.id));
            std::fs::create_dir_all(&sub)?;
            for t in &c.tables {
                std::fs::write(sub.join(t.file_name()), t.to_csv())?;
            }
        }
        std::fs::write(dir.join("selftest.json"), serde_json::to_string_pretty(self).expect("serializes") + "\n")
    }
}

/// Result of one criterion body: pass flag, measured summary, tables.
type Outcome = (bool, String, Vec<Table>);

struct Definition {
    id: usize,
    title: &'static str,
    budget: f64,
    body: fn(u64) -> Result<Outcome>,
}

const CRITERIA: [Definition; 10] = [
    Definition { id: 1, title: "two-polygon quantization", budget: 5.0, body: figure1_quantization },
    Definition { id: 2, title: "indicator box quantization", budget: 5.0, body: box_quantization },
    Definition { id: 3, title: "tensor kill", budget: 10.0, body: tensor_kill },
    Definition { id: 4, title: "roof structure", budget: 30.0, body: roof_structure },
    Definition { id: 5, title: "layer cake", budget: 30.0, body: layer_cake },
    Definition { id: 6, title: "bifurcation detection", budget: 20.0, body: bifurcation },
    Definition { id: 7, title: "counterexample limits", budget: 60.0, body: counterexample_limits },
    Definition { id: 8, title: "concentration bound", budget: 30.0, body: concentration_bound },
    Definition { id: 9, title: "slicing", budget: 120.0, body: slicing },
    Definition { id: 10, title: "differential inclusion", budget: 10.0, body: inclusion },
];

fn evaluate(def: &Definition, seed: u64) -> Criterion {
    let start = Instant::now();
    let (ok, measured, tables) = match (def.body)(seed) {
        Ok(o) => o,
        Err(e) => (false, format!("error: {e}"), Vec::new()),
    };
    let seconds = start.elapsed().as_secs_f64();
    let in_time = seconds < def.budget;
    let measured = if in_time { measured } else { format!("{measured}; over the time budget") };
    Criterion {
        id: def.id,
        title: def.title,
        passed: ok && in_time,
        measured,
        seconds,
        budget_seconds: def.budget,
        tables,
    }
}

/// Runs every criterion; `progress` sees each line as soon as it is known.
pub fn selftest(seed: u64, mut progress: impl FnMut(&Criterion)) -> SelftestReport {
    let start = Instant::now();
    let mut criteria = Vec::new();
    for def in &CRITERIA {
        let c = evaluate(def, seed);
        progress(&c);
        criteria.push(c);
    }
    // determinism: a second pass must reproduce every CSV byte for byte
    let mut differing = Vec::new();
    let mut files = 0;
    for (def, first) in CRITERIA.iter().zip(&criteria) {
        let again = (def.body)(seed).map(|o| o.2).unwrap_or_default();
        let a: Vec<(String, String)> = first.tables.iter().map(|t| (t.file_name(), t.to_csv())).collect();
        let b: Vec<(String, String)> = again.iter().map(|t| (t.file_name(), t.to_csv())).collect();
        files += a.len();
        if a != b {
            differing.push(def.id);
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let budget = 600.0;
    let ok = differing.is_empty() && files > 0 && seconds < budget;
    let c = Criterion {
        id: 11,
        title: "determinism",
        passed: ok,
        measured: format!("{files} CSV files re-generated, criteria with differences: {differing:?}"),
        seconds,
        budget_seconds: budget,
        tables: Vec::new(),
    };
    progress(&c);
    criteria.push(c);
    SelftestReport { seed, criteria }
}

fn atoms_table(name: &str, a: &defectlab::measure::AtomSet) -> Table {
    let mut t = Table::new(name, &["x1", "x2", "mass", "cells_merged"]);
    for x in &a.atoms {
        t.push(vec![num(x.position[0]), num(x.position[1]), num(x.mass), x.cells_merged.to_string()]);
    }
    t
}

fn figure1_quantization(_seed: u64) -> Result<Outcome> {
    let g = gallery::figure1(513, false)?;
    let m = defect_measure(&g.field);
    let a = extract_atoms(&m, INTEGER_TOL)?;
    let GroundTruth::Atoms(truth) = &g.truth else { unreachable!("figure1 has atoms") };
    let mut got = a.masses();
    got.sort_by(f64::total_cmp);
    let mut want = vec![1.0, -1.0, 1.0, -1.0, 2.0, -1.0, -1.0];
    want.sort_by(f64::total_cmp);
    let spec = g.field.spec();
    let diag = spec.spacing(0).hypot(spec.spacing(1));
    let mut worst = 0.0f64;
    let mut prefix_exact = true;
    for p in truth {
        let d = a
            .atoms
            .iter()
            .filter(|x| x.mass == p.mass)
            .map(|x| (x.position[0] - p.position[0]).hypot(x.position[1] - p.position[1]))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
        // a 4×4-cell box around the corner, by prefix sums
        let i = spec.fractional_index(0, p.position[0]).floor() as usize;
        let j = spec.fractional_index(1, p.position[1]).floor() as usize;
        let b = CellBox::new([i - 2, j - 2], [i + 2, j + 2])?;
        prefix_exact &= m.prefix_mass(&b)? == p.mass;
    }
    let ok = a.len() == 7 && got == want && worst <= diag && prefix_exact;
    let measured = format!(
        "{} atoms, masses {:?}, worst offset {} (cell diagonal {}), prefix boxes exact: {prefix_exact}",
        a.len(),
        a.masses(),
        num(worst),
        num(diag)
    );
    Ok((ok, measured, vec![atoms_table("atoms", &a)]))
}

fn box_quantization(seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Table::new("fields", &["family", "boxes", "off_lattice", "max_abs_mass", "bound"]);
    let mut ok = true;
    let mut names = Vec::new();
    for (name, _) in families::all() {
        if families::TENSOR_FAMILIES.iter().any(|(n, _)| *n == name) {
            continue;
        }
        let b = families::build(&FieldConfig::new(name, 257))?;
        if !b.indicator {
            continue;
        }
        let m = defect_measure(&b.field);
        let bound = 4.0 * b.field.sup_norm();
        let (mut off, mut max) = (0usize, 0.0f64);
        for _ in 0..10_000 {
            let q = random_box(m.cells_x(), m.cells_y(), &mut rng);
            let v = m.box_mass(&q)?;
            if !(v == v.round() && v.abs() <= 2.0) {
                off += 1;
            }
            max = max.max(v.abs());
        }
        ok &= off == 0 && max < bound;
        names.push(name);
        t.push(vec![name.into(), "10000".into(), off.to_string(), num(max), num(bound)]);
    }
    ok &= names.len() >= 4;
    Ok((ok, format!("indicator fields {names:?}: all box masses in {{-2..2}} and below 4 sup|u|: {ok}"), vec![t]))
}

fn tensor_kill(_seed: u64) -> Result<Outcome> {
    let eps = [0.4, 0.3, 0.2, 0.15, 0.1, 0.05];
    let th = ThetaPair::new(0.25, 0.25)?;
    let mut t = Table::new("tensor_sums", &["second_factor", "max_cell_mass", "atoms", "eps", "energy"]);
    let mut ok = true;
    let mut notes = Vec::new();
    for (second, label) in [(SecondFactor::Zero, "zero"), (SecondFactor::Step, "step")] {
        let mut cfg = FieldConfig::new("tensor-sum", 257);
        cfg.second_factor = second;
        let b = families::build(&cfg)?;
        let m = defect_measure(&b.field);
        let max = m.cells().iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let atoms = extract_atoms(&m, INTEGER_TOL)?.len();
        ok &= max == 0.0 && atoms == 0;
        for &e in &eps {
            let v = energy_eps(&b.field, e, th, Kernel::UniformBall, Quadrature::default())?.value;
            if second == SecondFactor::Zero {
                ok &= v == 0.0;
            }
            t.push(vec![label.into(), num(max), atoms.to_string(), num(e), num(v)]);
        }
        notes.push(format!("{label}: max |cell| {}, {atoms} atoms", num(max)));
    }
    notes.push("energy exactly 0 at 6 eps for the one-variable sum; the two-step sum has positive energy".into());
    Ok((ok, notes.join("; "), vec![t]))
}

fn roof_structure(_seed: u64) -> Result<Outcome> {
    let fine = gallery::roof(&GridSpec::square(-1.0, 1.0, 1025)?)?;
    let m = defect_measure(&fine.field);
    let total = m.total();
    let radii: Vec<f64> = (2..=6).map(|k| 0.5f64.powi(k)).collect();
    let mut t = Table::new("mass_ratio", &["x1", "x2", "radius", "ball_ratio"]);
    let mut worst_ratio = 0.0f64;
    for c in [[0.0, 0.0], [0.3, 0.3], [-0.45, -0.45]] {
        let prof = mass_ratio_profile(&m, c, &radii)?;
        for p in &prof {
            t.push(vec![num(c[0]), num(c[1]), num(p.radius), p.ball.map(num).unwrap_or_default()]);
        }
        let last = prof.last().and_then(|p| p.ball).unwrap_or(f64::NAN);
        worst_ratio = worst_ratio.max((last - SQRT_2).abs() / SQRT_2);
    }
    let u = gallery::roof(&GridSpec::square(-1.0, 1.0, 257)?)?.field;
    let tr = track_corners(&u, [0.5, 0.5], [0.4, 0.6], 41)?;
    let tc = estimate_traces(&u, &tr)?;
    let h = tr.h_prime();
    let h_err = (0..2).map(|l| (h[l] - 1.0).abs()).fold(0.0, f64::max);
    let v_err = (0..2).map(|l| (tc.v_inf[l] - 1.0).abs()).fold(0.0, f64::max);
    let d_err = (tc.density - FRAC_1_SQRT_2).abs() / FRAC_1_SQRT_2;
    let mut tt = Table::new("traces", &["h1", "h2", "v1", "v2", "density"]);
    tt.push(vec![num(h[0]), num(h[1]), num(tc.v_inf[0]), num(tc.v_inf[1]), num(tc.density)]);
    let ok = total == 2.0 && worst_ratio < 0.02 && v_err < 0.02 && d_err < 0.02 && h_err < 0.01;
    let measured = format!(
        "total {}, ratio error at r=2^-6 {}, v_inf error {}, density error {}, h' error {}",
        num(total),
        num(worst_ratio),
        num(v_err),
        num(d_err),
        num(h_err)
    );
    Ok((ok, measured, vec![t, tt]))
}

fn layer_cake(_seed: u64) -> Result<Outcome> {
    let grid = GridSpec::square(-1.0, 1.0, 257)?;
    let mut t = Table::new("layer_cake", &["family", "lhs", "rhs", "rel_error", "levels"]);
    let mut ok = true;
    let mut notes = Vec::new();
    for g in [gallery::roof(&grid)?, gallery::bifurcation(&grid)?] {
        let m = defect_measure(&g.field);
        let lc = layer_cake_check(&g.field, &m.full_box(), 1024)?;
        ok &= lc.rel_error < 1e-3 && lc.levels >= 1024;
        notes.push(format!("{} {}", g.family, num(lc.rel_error)));
        t.push(vec![g.family.into(), num(lc.lhs), num(lc.rhs), num(lc.rel_error), lc.levels.to_string()]);
    }
    Ok((ok, format!("relative errors {} (< 1e-3)", notes.join(", ")), vec![t]))
}

fn bifurcation(_seed: u64) -> Result<Outcome> {
    let u = gallery::bifurcation(&GridSpec::square(-1.0, 1.0, 257)?)?.field;
    let tr = track_corners(&u, [0.0, 0.0], [-0.1, 0.1], 40)?;
    let (Some(b), Some(a)) = (tr.below, tr.above) else {
        return Ok((false, "one-sided fits missing".into(), Vec::new()));
    };
    let eb = (b.slope[0] + 1.0).abs().max((b.slope[1] - 1.0).abs());
    let ea = (a.slope[0] - 1.0).abs().max((a.slope[1] - 1.0).abs());
    let flagged = tr.jump_detected && !tr.two_sided_consistent();
    let mut t = Table::new("fits", &["side", "slope1", "slope2", "count"]);
    t.push(vec!["below".into(), num(b.slope[0]), num(b.slope[1]), b.count.to_string()]);
    t.push(vec!["above".into(), num(a.slope[0]), num(a.slope[1]), a.count.to_string()]);
    let ok = eb < 0.02 && ea < 0.02 && flagged;
    let measured = format!(
        "below ({}, {}), above ({}, {}), two-sided flagged inconsistent: {flagged}",
        num(b.slope[0]),
        num(b.slope[1]),
        num(a.slope[0]),
        num(a.slope[1])
    );
    Ok((ok, measured, vec![t]))
}

fn counterexample_limits(_seed: u64) -> Result<Outcome> {
    let ce = Counterexample::new(CounterexampleSpec::new(4.0, 6)?);
    let spec = &ce.spec;
    let beta = spec.beta().expect("power family");
    let ks: Vec<usize> = (0..=spec.depth()).filter(|&k| spec.resolvable(k)).collect();
    let radii: Vec<f64> = ks.iter().map(|&k| spec.r(k)).collect();
    let entries = blowup(&ce, [0.0, 0.0], &radii)?;
    let q = limit_fraction();
    let mut t = Table::new("fractions", &["k", "radius", "ball_v1", "ball_v2", "ball_ratio", "bound"]);
    let mut bound_ok = true;
    for (&k, e) in ks.iter().zip(&entries) {
        let f = e.ball_fractions.unwrap_or([f64::NAN; 2]);
        let ratio = ce.ball_mass([0.0, 0.0], e.radius) / e.radius;
        let bound = 48.0 * e.radius.powf(beta - 1.0);
        bound_ok &= ratio <= bound;
        t.push(vec![k.to_string(), num(e.radius), num(f[0]), num(f[1]), num(ratio), num(bound)]);
    }
    let deepest = *ks.last().unwrap();
    let (even, odd) = if deepest.is_multiple_of(2) { (deepest, deepest - 1) } else { (deepest - 1, deepest) };
    let frac = |k: usize| entries[ks.iter().position(|&x| x == k).unwrap()].ball_fractions.unwrap_or([f64::NAN; 2]);
    let fe = frac(even)[1];
    let fo = frac(odd)[0];
    let de = (fe - q).abs() / q;
    let sym = (fo - fe).abs() / q;
    let ok = de < 0.05 && sym < 0.05 && bound_ok;
    let measured = format!(
        "even level {even}: {} vs q = {} (rel {}); odd level {odd}: {}; mass bound at all {} radii: {bound_ok}",
        num(fe),
        num(q),
        num(de),
        num(fo),
        radii.len()
    );
    Ok((ok, measured, vec![t]))
}

fn concentration_bound(_seed: u64) -> Result<Outcome> {
    let mut t = Table::new("concentration", &["family", "theta", "theta_mass", "integral", "ratio"]);
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut count = 0;
    for (name, _) in gallery::FAMILIES {
        let b = match *name {
            "counterexample" => continue,
            _ => {
                let mut cfg = FieldConfig::new(name, 257);
                if name.starts_with("figure1") {
                    cfg.domain = Some((0.0, 6.0));
                }
                families::build(&cfg)?
            }
        };
        let tol = match &b.truth {
            Some(GroundTruth::Atoms(a)) => 0.25 * a.iter().map(|p| p.mass.abs()).fold(f64::INFINITY, f64::min).min(1.0),
            Some(GroundTruth::Zero) => INTEGER_TOL,
            _ => continue,
        };
        let m = defect_measure(&b.field);
        let atoms = extract_atoms(&m, tol)?;
        let spec = b.field.spec();
        let h = spec.spacing(0);
        if (spec.spacing(1) - h).abs() > 1e-12 * h {
            return Ok((false, format!("{name}: non-square cells"), Vec::new()));
        }
        for theta in [0.25, 0.5, 0.75] {
            let tm = theta_mass(&atoms, theta)?;
            let c = concentration_integral(&b.field, h, theta, SQRT_2 * h)?.value;
            let pass = tm <= 1.05 * c || (tm == 0.0 && c == 0.0);
            ok &= pass;
            let ratio = if c > 0.0 {
                tm / c
            } else if tm == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
            count += 1;
            t.push(vec![name.to_string(), num(theta), num(tm), num(c), num(ratio)]);
        }
    }
    Ok((ok, format!("{count} field/theta pairs, largest theta_mass/integral {} (<= 1.05)", num(worst)), vec![t]))
}

fn slicing(_seed: u64) -> Result<Outcome> {
    let u = extruded_figure1(64)?;
    let mut t = Table::new("commutation", &["a", "b", "sign", "slices", "cells", "mismatches"]);
    let mut mism = 0;
    for p in u.cross_pairs() {
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
    let zero = coordinate_plane_zero_check(&u, [1, 2])?;
    let h = u.spec().spacing(0);
    let sch: Vec<(f64, f64)> = [8.0, 4.0, 2.0, 1.0].iter().map(|&k| (1.5 * k * h, k * h)).collect();
    let f = slice_energy_integral(&u, [0, 1], &sch)?;
    let mut ft = Table::new("fatou", &["eps", "r", "lhs", "rhs", "relative_slack"]);
    for (k, &(e, r)) in sch.iter().enumerate() {
        ft.push(vec![num(e), num(r), num(f.lhs[k]), num(f.rhs[k]), num(f.relative_slack[k])]);
    }
    let rep = slice_report(&u, [0, 1], &[], 0.5, INTEGER_TOL)?;
    let base = &rep.rows[0].atoms.atoms;
    let invariant = rep.rows.iter().all(|r| {
        r.atoms.atoms.len() == base.len()
            && r.atoms.atoms.iter().zip(base).all(|(a, b)| a.mass.to_bits() == b.mass.to_bits())
    });
    let plane = slice(&u, [0, 1], &rep.rows[0].offset)?;
    let direct = polygon_indicator(&figure1_spec(), plane.spec())?.field;
    let direct_atoms = extract_atoms(&defect_measure(&direct), INTEGER_TOL)?;
    let matches_direct = direct_atoms.atoms.len() == base.len()
        && direct_atoms.atoms.iter().zip(base).all(|(a, b)| a.mass == b.mass && a.position == b.position);
    let min_slack = f.relative_slack.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = mism == 0 && zero == 0.0 && f.holds(1e-9) && invariant && matches_direct;
    let measured = format!(
        "{mism} commutation mismatches, zero-check {}, min relative slack {}, {} atoms per slice matching the planar field: {matches_direct}, extrusion invariance {invariant}",
        num(zero),
        num(min_slack),
        base.len()
    );
    Ok((ok, measured, vec![t, ft]))
}

fn inclusion(_seed: u64) -> Result<Outcome> {
    let grid = GridSpec::square(-1.0, 1.0, 257)?;
    let ce = Counterexample::new(CounterexampleSpec::new(4.0, 6)?);
    let a = inclusion_residual(&ce.sample_vector(&grid)?);
    let b = inclusion_residual(&gallery::roof_gradient(&grid)?);
    let c = inclusion_residual(&VectorField::sample(|_| [1.0, 1.0], &grid)?);
    let mut t = Table::new("residuals", &["field", "residual"]);
    t.push(vec!["counterexample".into(), num(a)]);
    t.push(vec!["roof-gradient".into(), num(b)]);
    t.push(vec!["constant-1-1".into(), num(c)]);
    let ok = a == 0.0 && b == 0.0 && c > 0.0;
    Ok((ok, format!("counterexample {}, grad roof {}, constant (1,1) {}", num(a), num(b), num(c)), vec![t]))
}
