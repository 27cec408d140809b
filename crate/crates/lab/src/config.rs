//! Line-oriented experiment configuration.
//!
//! ```text
//! [experiment]
//! name = atoms
//! [field]
//! family = figure1
//! nodes = 513
//! [schedules]
//! eps = 0.4, 0.2, 0.1
//! [output]
//! dir = out
//! ```
//!
//! `#` starts a comment. Keys are unique within a section and unknown keys
//! are rejected. Every error names the offending line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use defectlab::energy::{Kernel, Quadrature};
use defectlab::ThetaPair;
use serde::Serialize;

use crate::families;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    EnergySweep,
    Atoms,
    Quantization,
    LayerCake,
    CornerTrack,
    Blowup,
    Counterexample,
    Slicing,
    DimensionProfile,
}

impl Experiment {
    pub const ALL: [(&'static str, Experiment); 9] = [
        ("energy-sweep", Experiment::EnergySweep),
        ("atoms", Experiment::Atoms),
        ("quantization", Experiment::Quantization),
        ("layer-cake", Experiment::LayerCake),
        ("corner-track", Experiment::CornerTrack),
        ("blowup", Experiment::Blowup),
        ("counterexample", Experiment::Counterexample),
        ("slicing", Experiment::Slicing),
        ("dimension-profile", Experiment::DimensionProfile),
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().find(|(n, _)| *n == s).map(|&(_, e)| e)
    }

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, e)| *e == self).map(|(n, _)| *n).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondFactor {
    Zero,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldConfig {
    pub family: String,
    pub nodes: usize,
    /// Box `(lo, hi)²`; `None` uses the family's own domain.
    pub domain: Option<(f64, f64)>,
    pub alpha: f64,
    pub depth: usize,
    pub slope: f64,
    pub second_factor: SecondFactor,
    pub atoms: usize,
    /// Axis count of slicing fields (3 or 4).
    pub dims: usize,
}

impl FieldConfig {
    /// Parameter defaults for `family` on `nodes` per axis.
    pub fn new(family: &str, nodes: usize) -> Self {
        Self {
            family: family.to_string(),
            nodes,
            domain: None,
            alpha: 4.0,
            depth: 6,
            slope: 2.0,
            second_factor: SecondFactor::Zero,
            atoms: 64,
            dims: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedules {
    pub theta1: f64,
    pub theta2: f64,
    pub eps: Vec<f64>,
    pub r: Vec<f64>,
    pub kernel: String,
    pub z_points: usize,
    pub levels: usize,
    pub radii: Vec<f64>,
    pub scales: Vec<f64>,
    pub samples: usize,
    pub tol: f64,
    pub center: Option<[f64; 2]>,
    pub window: Option<[f64; 2]>,
    pub boxes: usize,
}

impl Schedules {
    pub fn theta(&self) -> ThetaPair {
        ThetaPair::new(self.theta1, self.theta2).expect("validated at parse time")
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::parse(&self.kernel).expect("validated at parse time")
    }

    pub fn quadrature(&self) -> Quadrature {
        Quadrature { z_points: self.z_points }
    }

    /// `(ε_k, r_k)` pairs when an `r` schedule is given.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.eps.iter().copied().zip(self.r.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub field: FieldConfig,
    pub schedules: Schedules,
    /// Where the run writes; recorded in `metadata.json`, not the report.
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub svg: bool,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("experiment", &["name", "seed"]),
    ("field", &["family", "nodes", "lo", "hi", "alpha", "depth", "slope", "second_factor", "atoms", "dims"]),
    (
        "schedules",
        &[
            "theta1", "theta2", "eps", "r", "kernel", "z_points", "levels", "radii", "scales", "samples", "tol",
            "center", "window", "boxes",
        ],
    ),
    ("output", &["dir", "svg"]),
];

struct Entry {
    value: String,
    line: usize,
}

type Table = BTreeMap<(String, String), Entry>;

fn lex(text: &str) -> Result<Table, ConfigError> {
    let mut table = Table::new();
    let mut section: Option<&'static str> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, format!("malformed section header `{content}`")))?
                .trim();
            section = Some(
                SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .map(|(s, _)| *s)
                    .ok_or_else(|| ConfigError::at(line, format!("unknown section [{name}]")))?,
            );
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| ConfigError::at(line, format!("key `{key}` before any section")))?;
        let allowed = SECTIONS.iter().find(|(s, _)| *s == sec).unwrap().1;
        if !allowed.contains(&key) {
            return Err(ConfigError::at(line, format!("unknown key `{key}` in [{sec}]")));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, format!("empty value for `{key}`")));
        }
        let slot = (sec.to_string(), key.to_string());
        if let Some(prev) = table.get(&slot) {
            return Err(ConfigError::at(line, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        table.insert(slot, Entry { value: value.to_string(), line });
    }
    Ok(table)
}

struct Reader {
    table: Table,
}

impl Reader {
    fn get(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.table.get(&(sec.to_string(), key.to_string()))
    }

    fn line(&self, sec: &str, key: &str) -> Option<usize> {
        self.get(sec, key).map(|e| e.line)
    }

    fn parsed<T: std::str::FromStr>(&self, sec: &str, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        self.get(sec, key)
            .map(|e| {
                e.value
                    .parse::<T>()
                    .map_err(|_| ConfigError::at(e.line, format!("malformed {what} `{}` for `{key}`", e.value)))
            })
            .transpose()
    }

    fn number(&self, sec: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.parsed(sec, key, "number")?;
        match (v, self.get(sec, key)) {
            (Some(x), Some(e)) if !x.is_finite() => Err(ConfigError::at(e.line, format!("`{key}` must be finite"))),
            _ => Ok(v),
        }
    }

    fn count(&self, sec: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parsed(sec, key, "nonnegative integer")
    }

    fn list(&self, sec: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.get(sec, key) else { return Ok(None) };
        e.value
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ConfigError::at(e.line, format!("malformed number `{s}` in `{key}`")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn pair(&self, sec: &str, key: &str) -> Result<Option<[f64; 2]>, ConfigError> {
        match self.list(sec, key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
            Some(v) => Err(ConfigError::at(
                self.line(sec, key).unwrap(),
                format!("`{key}` needs two numbers, got {}", v.len()),
            )),
        }
    }

    fn text(&self, sec: &str, key: &str) -> Option<&str> {
        self.get(sec, key).map(|e| e.value.as_str())
    }
}

fn strictly_decreasing(v: &[f64]) -> Option<usize> {
    v.windows(2).position(|w| !(w[1] < w[0])).map(|k| k + 1)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let rd = Reader { table: lex(text)? };

    let name = rd.text("experiment", "name").ok_or_else(|| ConfigError::global("missing `name` in [experiment]"))?;
    let experiment = Experiment::parse(name).ok_or_else(|| {
        ConfigError::at(rd.line("experiment", "name").unwrap(), format!("unknown experiment `{name}`"))
    })?;
    let seed = rd.parsed("experiment", "seed", "seed")?.unwrap_or(0u64);

    let family =
        rd.text("field", "family").ok_or_else(|| ConfigError::global("missing `family` in [field]"))?.to_string();
    if families::find(&family).is_none() {
        return Err(ConfigError::at(rd.line("field", "family").unwrap(), format!("unknown family `{family}`")));
    }
    let default_nodes = if experiment == Experiment::Slicing { 64 } else { 257 };
    let nodes = rd.count("field", "nodes")?.unwrap_or(default_nodes);
    if nodes < 17 {
        let line = rd.line("field", "nodes").unwrap();
        return Err(ConfigError::at(line, format!("nodes = {nodes} is below the minimum of 17")));
    }
    let domain = match (rd.number("field", "lo")?, rd.number("field", "hi")?) {
        (None, None) => None,
        (Some(lo), Some(hi)) if lo < hi => Some((lo, hi)),
        (Some(_), Some(_)) => return Err(ConfigError::at(rd.line("field", "hi").unwrap(), "`hi` must exceed `lo`")),
        _ => {
            let line = rd.line("field", "lo").or(rd.line("field", "hi")).unwrap();
            return Err(ConfigError::at(line, "`lo` and `hi` must be given together"));
        }
    };
    let alpha = rd.number("field", "alpha")?.unwrap_or(4.0);
    if !(alpha > 0.0) {
        return Err(ConfigError::at(rd.line("field", "alpha").unwrap(), "`alpha` must be positive"));
    }
    let depth = rd.count("field", "depth")?.unwrap_or(6);
    let slope = rd.number("field", "slope")?.unwrap_or(2.0);
    if !(slope > 0.0) {
        return Err(ConfigError::at(rd.line("field", "slope").unwrap(), "`slope` must be positive"));
    }
    let second_factor = match rd.text("field", "second_factor") {
        None | Some("zero") => SecondFactor::Zero,
        Some("step") => SecondFactor::Step,
        Some(other) => {
            let line = rd.line("field", "second_factor").unwrap();
            return Err(ConfigError::at(line, format!("`second_factor` must be zero or step, got `{other}`")));
        }
    };
    let atoms = rd.count("field", "atoms")?.unwrap_or(64);
    if atoms == 0 {
        return Err(ConfigError::at(rd.line("field", "atoms").unwrap(), "`atoms` must be positive"));
    }
    let dims = rd.count("field", "dims")?.unwrap_or(3);
    if !(3..=4).contains(&dims) {
        return Err(ConfigError::at(rd.line("field", "dims").unwrap(), "`dims` must be 3 or 4"));
    }

    let theta1 = rd.number("schedules", "theta1")?.unwrap_or(0.25);
    let theta2 = rd.number("schedules", "theta2")?.unwrap_or(0.25);
    if let Err(e) = ThetaPair::new(theta1, theta2) {
        let line = rd.line("schedules", "theta2").or(rd.line("schedules", "theta1")).unwrap_or(0);
        return Err(ConfigError { line: (line > 0).then_some(line), message: e.to_string() });
    }
    let eps = rd.list("schedules", "eps")?.unwrap_or_else(|| vec![0.4, 0.2, 0.1]);
    if let Some(k) = strictly_decreasing(&eps) {
        return Err(ConfigError {
            line: rd.line("schedules", "eps"),
            message: format!("eps schedule must be strictly decreasing (entry {} = {})", k + 1, eps[k]),
        });
    }
    if let Some(x) = eps.iter().find(|&&x| !(x > 0.0)) {
        return Err(ConfigError { line: rd.line("schedules", "eps"), message: format!("eps = {x} must be positive") });
    }
    let r = rd.list("schedules", "r")?.unwrap_or_default();
    if let Some(line) = rd.line("schedules", "r") {
        if r.len() != eps.len() {
            return Err(ConfigError::at(line, format!("r has {} entries but eps has {}", r.len(), eps.len())));
        }
        if let Some(k) = strictly_decreasing(&r) {
            return Err(ConfigError::at(
                line,
                format!("r schedule must be strictly decreasing (entry {} = {})", k + 1, r[k]),
            ));
        }
        if let Some(k) = r.iter().zip(&eps).position(|(r, e)| !(*r > 0.0 && r <= e)) {
            return Err(ConfigError::at(
                line,
                format!("r = {} must lie in (0, eps = {}] at entry {}", r[k], eps[k], k + 1),
            ));
        }
    }
    let kernel = rd.text("schedules", "kernel").unwrap_or("uniform-ball").to_string();
    if Kernel::parse(&kernel).is_none() {
        return Err(ConfigError::at(rd.line("schedules", "kernel").unwrap(), format!("unknown kernel `{kernel}`")));
    }
    let z_points = rd.count("schedules", "z_points")?.unwrap_or(64);
    if let Err(e) = (Quadrature { z_points }).validate() {
        return Err(ConfigError::at(rd.line("schedules", "z_points").unwrap_or(0), e.to_string()));
    }
    let levels = rd.count("schedules", "levels")?.unwrap_or(1024);
    if levels < 2 {
        return Err(ConfigError::at(rd.line("schedules", "levels").unwrap(), "`levels` must be at least 2"));
    }
    let radii = rd.list("schedules", "radii")?.unwrap_or_default();
    if let Some(k) = strictly_decreasing(&radii) {
        return Err(ConfigError {
            line: rd.line("schedules", "radii"),
            message: format!("radii must be strictly decreasing (entry {})", k + 1),
        });
    }
    if radii.iter().any(|&x| !(x > 0.0)) {
        return Err(ConfigError { line: rd.line("schedules", "radii"), message: "radii must be positive".into() });
    }
    let scales = rd.list("schedules", "scales")?.unwrap_or_default();
    if let Some(k) = strictly_decreasing(&scales) {
        return Err(ConfigError {
            line: rd.line("schedules", "scales"),
            message: format!("scales must be strictly decreasing (entry {})", k + 1),
        });
    }
    let samples = rd.count("schedules", "samples")?.unwrap_or(41);
    if samples < 5 {
        return Err(ConfigError::at(rd.line("schedules", "samples").unwrap(), "`samples` must be at least 5"));
    }
    let tol = rd.number("schedules", "tol")?.unwrap_or(0.25);
    if !(tol > 0.0) {
        return Err(ConfigError::at(rd.line("schedules", "tol").unwrap(), "`tol` must be positive"));
    }
    let center = rd.pair("schedules", "center")?;
    let window = rd.pair("schedules", "window")?;
    if let Some(w) = window {
        if !(w[0] < w[1]) {
            return Err(ConfigError::at(rd.line("schedules", "window").unwrap(), "`window` must be increasing"));
        }
    }
    let boxes = rd.count("schedules", "boxes")?.unwrap_or(10_000);

    let out_dir = PathBuf::from(rd.text("output", "dir").unwrap_or("out"));
    let svg = match rd.text("output", "svg") {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => {
            let line = rd.line("output", "svg").unwrap();
            return Err(ConfigError::at(line, format!("`svg` must be true or false, got `{other}`")));
        }
    };

    Ok(ExperimentConfig {
        experiment,
        seed,
        field: FieldConfig {
            domain,
            alpha,
            depth,
            slope,
            second_factor,
            atoms,
            dims,
            ..FieldConfig::new(&family, nodes)
        },
        schedules: Schedules {
            theta1,
            theta2,
            eps,
            r,
            kernel,
            z_points,
            levels,
            radii,
            scales,
            samples,
            tol,
            center,
            window,
            boxes,
        },
        out_dir,
        svg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("[experiment]\nname = atoms\n[field]\nfamily = figure1\nnodes = 513\n").unwrap();
        assert_eq!(c.experiment, Experiment::Atoms);
        assert_eq!(c.field.nodes, 513);
        assert_eq!((c.schedules.theta1, c.schedules.theta2), (0.25, 0.25));
        assert_eq!(c.schedules.z_points, 64);
        assert_eq!(c.seed, 0);
        assert!(!c.svg);
    }

    #[test]
    fn schedule_errors_name_the_line() {
        let text = "[experiment]\nname = energy-sweep\n[field]\nfamily = roof\n[schedules]\neps = 0.1, 0.2\n";
        let e = parse_config(text).unwrap_err();
        assert_eq!(e.line, Some(6));
        let text =
            "[experiment]\nname = energy-sweep\n[field]\nfamily = roof\n[schedules]\neps = 0.4, 0.2\nr = 0.1, 0.3\n";
        assert_eq!(parse_config(text).unwrap_err().line, Some(7));
    }

    #[test]
    fn theta_sum_above_one_is_rejected() {
        let text =
            "[experiment]\nname = energy-sweep\n[field]\nfamily = roof\n[schedules]\ntheta1 = 0.6\ntheta2 = 0.6\n";
        let e = parse_config(text).unwrap_err();
        assert_eq!(e.line, Some(7));
        assert!(e.message.contains("exceeds 1"));
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let e = parse_config("[experiment]\nname = atoms\ncolour = red\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = parse_config("[experiment]\nname = atoms\nname = blowup\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("line 2"));
        let e = parse_config("[experiment]\nname = fishing\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_config("[experiment]\nname = atoms\n[field]\nfamily = roof\nnodes = 1e3\n").unwrap_err();
        assert_eq!(e.line, Some(5));
        let e = parse_config("[experiment]\nname = atoms\n[field]\nfamily = roof\nnodes = 9\n").unwrap_err();
        assert_eq!(e.line, Some(5));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# header\n\n[experiment]\nname = blowup # trailing\nseed = 7\n[field]\nfamily = counterexample\n";
        let c = parse_config(text).unwrap();
        assert_eq!((c.experiment, c.seed), (Experiment::Blowup, 7));
    }
}
