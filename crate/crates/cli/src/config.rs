//! Job documents: TOML or JSON text with the top-level keys `quadric`,
//! `command`, `q`, `K`, `points` or `grid`, `quadrature` and `output`, plus
//! `lambda`, `s`, `L` and `suite` for the commands that need them.
//!
//! Complex numbers are `[re, im]` pairs. Inline matrices are given as
//! `quadric.matrices`, a list of `m` row-major `n × n` arrays.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use quadric_core::closed_forms::Preset;
use quadric_core::green::{QuadratureSpec, SphereRule};
use quadric_core::linalg::CMatrix;
use quadric_core::{Complex64, MultiIndex, QuadricForm};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Classify,
    Gamma,
    Szego,
    Green,
    Heat,
    Verify,
}

impl Command {
    pub fn is_kernel(self) -> bool {
        matches!(self, Command::Szego | Command::Green)
    }

    pub fn needs_points(self) -> bool {
        matches!(self, Command::Szego | Command::Green | Command::Heat)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Document syntax of a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Syntax {
    Toml,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuadricSource {
    Preset(Preset),
    Inline(Vec<CMatrix>),
}

impl QuadricSource {
    pub fn quadric(&self) -> CliResult<QuadricForm> {
        match self {
            QuadricSource::Preset(p) => Ok(p.quadric()),
            QuadricSource::Inline(m) => Ok(QuadricForm::new(m.clone())?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub z: Vec<Complex64>,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointSet {
    List(Vec<Point>),
    /// Axes in the order `z_1_re, z_1_im, …, t_1, …`; the last varies fastest.
    Grid(Vec<Axis>),
}

impl PointSet {
    pub fn expand(&self, n: usize) -> Vec<Point> {
        match self {
            PointSet::List(p) => p.clone(),
            PointSet::Grid(axes) => {
                let values: Vec<Vec<f64>> = axes.iter().map(Axis::values).collect();
                let total: usize = values.iter().map(Vec::len).product();
                (0..total)
                    .map(|mut idx| {
                        let mut coords = vec![0.0; axes.len()];
                        for (k, v) in values.iter().enumerate().rev() {
                            coords[k] = v[idx % v.len()];
                            idx /= v.len();
                        }
                        Point {
                            z: (0..n).map(|j| Complex64::new(coords[2 * j], coords[2 * j + 1])).collect(),
                            t: coords[2 * n..].to_vec(),
                        }
                    })
                    .collect()
            }
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            PointSet::List(p) => p.is_empty(),
            PointSet::Grid(a) => a.iter().any(|x| x.count == 0),
        }
    }
}

/// Per-field overrides of [`QuadratureSpec`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_panels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere_rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing_split_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial_max_level: Option<usize>,
}

impl QuadratureOverrides {
    pub fn apply(&self, mut spec: QuadratureSpec) -> CliResult<QuadratureSpec> {
        if let Some(x) = self.rel_tol {
            spec.rel_tol = x;
        }
        if let Some(x) = self.abs_tol {
            spec.abs_tol = x;
        }
        if let Some(x) = self.max_panels {
            spec.max_panels = x;
        }
        if let Some(name) = &self.sphere_rule {
            spec.sphere_rule = Some(
                SphereRule::from_name(name)
                    .ok_or_else(|| CliError::config(format!("unknown sphere_rule {name:?}")))?,
            );
        }
        if let Some(x) = self.crossing_split_tol {
            spec.crossing_split_tol = x;
        }
        if let Some(x) = self.zero_tol {
            spec.zero_tol = x;
        }
        if let Some(x) = self.radial_max_level {
            spec.radial_max_level = x;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

/// A validated job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub quadric: QuadricSource,
    pub command: Command,
    pub q: Option<usize>,
    pub k: Option<MultiIndex>,
    pub points: Option<PointSet>,
    pub quadrature: QuadratureOverrides,
    pub output: OutputSpec,
    /// Directions for `spectrum` and `heat`.
    pub lambda: Vec<Vec<f64>>,
    /// Heat times for `heat`.
    pub s: Vec<f64>,
    /// Eigen multi-index for `heat`.
    pub l: Option<MultiIndex>,
    /// Comma-separated check names or `all`, for `verify`.
    pub suite: Option<String>,
}

impl JobConfig {
    pub fn n(&self) -> usize {
        match &self.quadric {
            QuadricSource::Preset(p) => p.quadric().n(),
            QuadricSource::Inline(m) => m[0].nrows(),
        }
    }

    pub fn m(&self) -> usize {
        match &self.quadric {
            QuadricSource::Preset(p) => p.quadric().m(),
            QuadricSource::Inline(m) => m.len(),
        }
    }

    /// The input component `K`, defaulting to `(1, …, q)`.
    pub fn input_index(&self) -> MultiIndex {
        match (&self.k, self.q) {
            (Some(k), _) => k.clone(),
            (None, Some(q)) => MultiIndex::full(q),
            (None, None) => MultiIndex::empty(),
        }
    }
}

// Serialized form.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadric {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrices: Option<Vec<Vec<Vec<[f64; 2]>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    z: Vec<[f64; 2]>,
    #[serde(default)]
    t: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    axes: Vec<Axis>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<usize>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    k: Option<Vec<usize>>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    l: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    lambda: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    s: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    suite: Option<String>,
    quadric: RawQuadric,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<Vec<RawPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
    #[serde(default)]
    quadrature: QuadratureOverrides,
    #[serde(default)]
    output: OutputSpec,
}

fn matrices_from_raw(raw: &[Vec<Vec<[f64; 2]>>]) -> CliResult<Vec<CMatrix>> {
    if raw.is_empty() {
        return Err(CliError::config("quadric.matrices is empty"));
    }
    let n = raw[0].len();
    if n == 0 {
        return Err(CliError::config("quadric.matrices: matrices must be at least 1 × 1"));
    }
    raw.iter()
        .enumerate()
        .map(|(j, rows)| {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(CliError::config(format!("quadric.matrices[{j}] is not {n} × {n}")));
            }
            Ok(CMatrix::from_fn(n, n, |r, c| Complex64::new(rows[r][c][0], rows[r][c][1])))
        })
        .collect()
}

fn matrices_to_raw(m: &[CMatrix]) -> Vec<Vec<Vec<[f64; 2]>>> {
    m.iter()
        .map(|a| {
            (0..a.nrows())
                .map(|r| (0..a.ncols()).map(|c| [a[(r, c)].re, a[(r, c)].im]).collect())
                .collect()
        })
        .collect()
}

fn multi_index(key: &str, entries: Vec<usize>, n: usize) -> CliResult<MultiIndex> {
    MultiIndex::new(entries, n).map_err(|e| CliError::config(format!("{key}: {e}")))
}

fn validate(raw: RawConfig) -> CliResult<JobConfig> {
    let quadric = match (raw.quadric.preset, raw.quadric.matrices) {
        (Some(p), None) => QuadricSource::Preset(Preset::from_str(&p).map_err(|e| CliError::config(e.to_string()))?),
        (None, Some(m)) => {
            let mats = matrices_from_raw(&m)?;
            // rejects non-Hermitian input with its largest asymmetry
            QuadricForm::new(mats.clone())?;
            QuadricSource::Inline(mats)
        }
        _ => {
            return Err(CliError::config(
                "quadric needs exactly one of `preset` and `matrices`",
            ))
        }
    };
    let form = quadric.quadric()?;
    let (n, m) = (form.n(), form.m());
    if let Some(q) = raw.q {
        if q > n {
            return Err(CliError::config(format!("q = {q} exceeds n = {n}")));
        }
    }
    let k = raw.k.map(|k| multi_index("K", k, n)).transpose()?;
    if let (Some(k), Some(q)) = (&k, raw.q) {
        if k.q() != q {
            return Err(CliError::config(format!("|K| = {} but q = {q}", k.q())));
        }
    }
    let l = raw.l.map(|l| multi_index("L", l, n)).transpose()?;
    let t_len = if raw.command.is_kernel() { m } else { 0 };
    let points = match (raw.points, raw.grid) {
        (Some(_), Some(_)) => return Err(CliError::config("give either `points` or `grid`, not both")),
        (Some(p), None) => {
            let pts = p
                .into_iter()
                .enumerate()
                .map(|(i, p)| {
                    if p.z.len() != n || (raw.command.needs_points() && p.t.len() != t_len) {
                        return Err(CliError::config(format!(
                            "points[{i}]: expected {n} z entries and {t_len} t entries"
                        )));
                    }
                    Ok(Point {
                        z: p.z.iter().map(|w| Complex64::new(w[0], w[1])).collect(),
                        t: p.t,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            Some(PointSet::List(pts))
        }
        (None, Some(g)) => {
            if raw.command.needs_points() && g.axes.len() != 2 * n + t_len {
                return Err(CliError::config(format!(
                    "grid needs {} axes (z real/imaginary parts then t), got {}",
                    2 * n + t_len,
                    g.axes.len()
                )));
            }
            if let Some(a) = g.axes.iter().find(|a| !(a.min.is_finite() && a.max.is_finite()) || a.max < a.min) {
                return Err(CliError::config(format!("bad grid axis {a:?}")));
            }
            Some(PointSet::Grid(g.axes))
        }
        (None, None) => None,
    };
    if raw.command.needs_points() && points.as_ref().is_none_or(PointSet::is_empty) {
        return Err(CliError::config(format!("command `{}` needs nonempty points or grid", raw.command)));
    }
    if matches!(raw.command, Command::Spectrum | Command::Heat) {
        if raw.lambda.is_empty() {
            return Err(CliError::config(format!("command `{}` needs `lambda`", raw.command)));
        }
        if let Some(bad) = raw.lambda.iter().find(|v| v.len() != m) {
            return Err(CliError::config(format!("lambda {bad:?} must have {m} entries")));
        }
    }
    if raw.command == Command::Heat {
        if raw.s.is_empty() || raw.s.iter().any(|s| !(*s > 0.0)) {
            return Err(CliError::config("command `heat` needs positive heat times `s`"));
        }
        if l.is_none() {
            return Err(CliError::config("command `heat` needs `L`"));
        }
    }
    raw.quadrature.apply(QuadratureSpec::default())?;
    Ok(JobConfig {
        quadric,
        command: raw.command,
        q: raw.q,
        k,
        points,
        quadrature: raw.quadrature,
        output: raw.output,
        lambda: raw.lambda,
        s: raw.s,
        l,
        suite: raw.suite,
    })
}

fn to_raw(job: &JobConfig) -> RawConfig {
    let (preset, matrices) = match &job.quadric {
        QuadricSource::Preset(p) => (Some(p.to_string()), None),
        QuadricSource::Inline(m) => (None, Some(matrices_to_raw(m))),
    };
    let (points, grid) = match &job.points {
        None => (None, None),
        Some(PointSet::List(p)) => (
            Some(
                p.iter()
                    .map(|p| RawPoint {
                        z: p.z.iter().map(|w| [w.re, w.im]).collect(),
                        t: p.t.clone(),
                    })
                    .collect(),
            ),
            None,
        ),
        Some(PointSet::Grid(a)) => (None, Some(RawGrid { axes: a.clone() })),
    };
    RawConfig {
        command: job.command,
        q: job.q,
        k: job.k.as_ref().map(|k| k.entries().to_vec()),
        l: job.l.as_ref().map(|l| l.entries().to_vec()),
        lambda: job.lambda.clone(),
        s: job.s.clone(),
        suite: job.suite.clone(),
        quadric: RawQuadric { preset, matrices },
        points,
        grid,
        quadrature: job.quadrature.clone(),
        output: job.output.clone(),
    }
}

/// Guesses the syntax: JSON documents start with `{`.
pub fn detect_syntax(text: &str) -> Syntax {
    if text.trim_start().starts_with('{') {
        Syntax::Json
    } else {
        Syntax::Toml
    }
}

pub fn parse_config(text: &str) -> CliResult<JobConfig> {
    let raw: RawConfig = match detect_syntax(text) {
        Syntax::Json => serde_json::from_str(text).map_err(|e| CliError::config(format!("malformed JSON config: {e}")))?,
        Syntax::Toml => toml::from_str(text).map_err(|e| CliError::config(format!("malformed TOML config: {e}")))?,
    };
    validate(raw)
}

pub fn emit_config(job: &JobConfig, syntax: Syntax) -> String {
    let raw = to_raw(job);
    match syntax {
        Syntax::Json => serde_json::to_string_pretty(&raw).expect("config serializes"),
        Syntax::Toml => toml::to_string(&raw).expect("config serializes"),
    }
}
