//! JSON space definitions: parsing, validation and construction.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chart::{Chart, Point};
use crate::error::{GeometryError, ParseError};
use crate::expr::{parse_scalar, Expr};
use crate::hamilton::HamiltonSpace;
use crate::metric::MetricField;
use crate::sampling::SampleBoxes;
use crate::tensor::{DTensor, IndexSig, Slot};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field {field}: {message}")]
    Field { field: String, message: String },
    #[error("field {field}: {source}")]
    Expression {
        field: String,
        #[source]
        source: ParseError,
    },
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Field {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

/// Tolerance keys understood by the verifier, with their defaults.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("antisymmetry", 1e-12),
    ("decomposition", 1e-12),
    ("dual_path", 1e-9),
    ("fd", 1e-6),
    ("fd_eps", 1e-6),
    ("identity", 1e-9),
    ("metric", 1e-9),
    ("oracle", 1e-9),
    ("reduction", 1e-12),
    ("regularity", 1e-12),
    ("transform", 1e-9),
    ("zero", 1e-12),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances(DEFAULT_TOLERANCES.iter().map(|&(k, v)| (k.to_string(), v)).collect())
    }
}

impl Tolerances {
    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        let field = format!("tolerances.{key}");
        if !self.0.contains_key(key) {
            return Err(ConfigError::field(field, "unknown tolerance key"));
        }
        if !(value.is_finite() && value >= 0.0) {
            return Err(ConfigError::field(field, "must be a finite non-negative number"));
        }
        self.0.insert(key.to_string(), value);
        Ok(())
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub hamiltonian: Option<String>,
    pub g_upper: Option<Vec<Vec<String>>>,
    pub g_lower: Option<Vec<Vec<String>>>,
    #[serde(rename = "U")]
    pub u: Option<Vec<Vec<String>>>,
    #[serde(rename = "F")]
    pub f: Option<String>,
    pub mc: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub m: usize,
    pub n: usize,
    pub h: Vec<Vec<String>>,
    pub body: BodyConfig,
    #[serde(default)]
    pub sample_boxes: BTreeMap<String, [f64; 2]>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_seed() -> u64 {
    7
}

/// A validated config with everything the pipeline needs.
#[derive(Debug, Clone)]
pub struct LoadedSpace {
    pub name: String,
    pub space: HamiltonSpace,
    pub boxes: SampleBoxes,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// SHA-256 of the config bytes.
    pub hash: String,
}

pub fn load(path: &Path) -> Result<LoadedSpace, ConfigError> {
    let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    from_bytes(&bytes, &fallback)
}

pub fn from_bytes(bytes: &[u8], fallback_name: &str) -> Result<LoadedSpace, ConfigError> {
    let config: SpaceConfig = serde_json::from_slice(bytes)?;
    let mut loaded = config.build()?;
    if loaded.name.is_empty() {
        loaded.name = fallback_name.to_string();
    }
    loaded.hash = hex::encode(Sha256::digest(bytes));
    Ok(loaded)
}

fn parse_entry(src: &str, chart: Chart, field: &str) -> Result<Expr, ConfigError> {
    parse_scalar(src, chart).map_err(|source| ConfigError::Expression {
        field: field.to_string(),
        source,
    })
}

fn parse_matrix(
    rows: &[Vec<String>],
    shape: (usize, usize),
    chart: Chart,
    field: &str,
) -> Result<Vec<Vec<Expr>>, ConfigError> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(ConfigError::field(
            field,
            format!("expected a {}x{} matrix", shape.0, shape.1),
        ));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, src)| parse_entry(src, chart, &format!("{field}[{}][{}]", i + 1, j + 1)))
                .collect()
        })
        .collect()
}

/// Entries that differ structurally must still agree numerically; the upper
/// triangle is then used on both sides.
fn symmetrize(mut entries: Vec<Vec<Expr>>, probes: &[Point], field: &str) -> Result<Vec<Vec<Expr>>, ConfigError> {
    let n = entries.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if entries[i][j] == entries[j][i] {
                continue;
            }
            let agree = probes
                .iter()
                .all(|pt| match (entries[i][j].evaluate(pt), entries[j][i].evaluate(pt)) {
                    (Ok(a), Ok(b)) => (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0),
                    _ => false,
                });
            if !agree {
                return Err(ConfigError::field(
                    field,
                    format!(
                        "not symmetric: entries [{}][{}] and [{}][{}] differ",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    ),
                ));
            }
            entries[j][i] = entries[i][j].clone();
        }
    }
    Ok(entries)
}

fn geometry(field: &str, err: GeometryError) -> ConfigError {
    ConfigError::field(field, err)
}

fn tensor(chart: Chart, slots: [Slot; 2], entries: &[Vec<Expr>]) -> DTensor {
    DTensor::from_fn(chart, IndexSig::new(&slots), |idx| entries[idx[0]][idx[1]].clone())
}

impl SpaceConfig {
    pub fn build(&self) -> Result<LoadedSpace, ConfigError> {
        let chart = Chart::new(self.m, self.n).map_err(|e| geometry("m", e))?;
        let boxes = self.boxes(chart)?;
        let probes = boxes.sample_points(chart, 0x5eed, 8);

        let h_entries = symmetrize(parse_matrix(&self.h, (self.m, self.m), chart, "h")?, &probes, "h")?;
        let h = MetricField::from_lower("h", tensor(chart, [Slot::lo_t('a'), Slot::lo_t('b')], &h_entries))
            .map_err(|e| geometry("h", e))?;

        let body = &self.body;
        let space = if let Some(src) = &body.hamiltonian {
            for (present, key) in [
                (body.g_upper.is_some(), "g_upper"),
                (body.g_lower.is_some(), "g_lower"),
                (body.u.is_some(), "U"),
                (body.f.is_some(), "F"),
                (body.mc.is_some(), "mc"),
            ] {
                if present {
                    return Err(ConfigError::field(
                        format!("body.{key}"),
                        "not allowed together with body.hamiltonian",
                    ));
                }
            }
            if self.m != 1 {
                return Err(ConfigError::field(
                    "body.hamiltonian",
                    "a raw Hamiltonian requires m = 1",
                ));
            }
            let hamiltonian = parse_entry(src, chart, "body.hamiltonian")?;
            HamiltonSpace::raw(h, hamiltonian).map_err(|e| geometry("body.hamiltonian", e))?
        } else {
            let g = match (&body.g_upper, &body.g_lower) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::field(
                        "body.g_lower",
                        "give exactly one of g_upper and g_lower",
                    ))
                }
                (None, None) => return Err(ConfigError::field("body.g_upper", "missing spatial metric")),
                (Some(rows), None) => {
                    let e = symmetrize(
                        parse_matrix(rows, (self.n, self.n), chart, "body.g_upper")?,
                        &probes,
                        "body.g_upper",
                    )?;
                    MetricField::from_upper("g_upper", tensor(chart, [Slot::up_x('i'), Slot::up_x('j')], &e))
                        .map_err(|e| geometry("body.g_upper", e))?
                }
                (None, Some(rows)) => {
                    let e = symmetrize(
                        parse_matrix(rows, (self.n, self.n), chart, "body.g_lower")?,
                        &probes,
                        "body.g_lower",
                    )?;
                    MetricField::from_lower("g_lower", tensor(chart, [Slot::lo_x('i'), Slot::lo_x('j')], &e))
                        .map_err(|e| geometry("body.g_lower", e))?
                }
            };
            // U is given m×n, stored [i][a]
            let u_rows = match &body.u {
                Some(rows) => parse_matrix(rows, (self.m, self.n), chart, "body.U")?,
                None => vec![vec![Expr::zero(); self.n]; self.m],
            };
            let u = DTensor::from_fn(chart, IndexSig::new(&[Slot::up_x('i'), Slot::lo_t('a')]), |idx| {
                u_rows[idx[1]][idx[0]].clone()
            });
            let f = match &body.f {
                Some(src) => parse_entry(src, chart, "body.F")?,
                None => Expr::zero(),
            };
            let mc = body.mc.unwrap_or(1.0);
            HamiltonSpace::electrodynamic(h, g, u, f, mc).map_err(|e| {
                let field = match &e {
                    GeometryError::InvalidParameter { .. } => "body.mc".to_string(),
                    GeometryError::Dependency { what, .. } if what == "h" => "h".to_string(),
                    GeometryError::Dependency { what, .. } => format!("body.{what}"),
                    _ => "body".to_string(),
                };
                geometry(&field, e)
            })?
        };

        let mut tolerances = Tolerances::default();
        for (key, &value) in &self.tolerances {
            tolerances.set(key, value)?;
        }
        Ok(LoadedSpace {
            name: self.name.clone().unwrap_or_default(),
            space,
            boxes,
            seed: self.seed,
            tolerances,
            hash: String::new(),
        })
    }

    /// Keys are variable names (`x1`, `p2_1`) or a whole family (`t`, `x`, `p`).
    fn boxes(&self, chart: Chart) -> Result<SampleBoxes, ConfigError> {
        let mut boxes = SampleBoxes::defaults(chart);
        let valid = |key: &str, [lo, hi]: [f64; 2]| {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok((lo, hi))
            } else {
                Err(ConfigError::field(
                    format!("sample_boxes.{key}"),
                    "expected [lo, hi] with lo <= hi",
                ))
            }
        };
        for family in ["t", "x", "p"] {
            if let Some(&interval) = self.sample_boxes.get(family) {
                let interval = valid(family, interval)?;
                for v in chart.vars() {
                    if v.to_string().starts_with(family) {
                        boxes.set(v, interval);
                    }
                }
            }
        }
        for (key, &interval) in &self.sample_boxes {
            if matches!(key.as_str(), "t" | "x" | "p") {
                continue;
            }
            let v = chart
                .lookup(key)
                .ok_or_else(|| ConfigError::field(format!("sample_boxes.{key}"), "not a variable of this chart"))?;
            boxes.set(v, valid(key, interval)?);
        }
        Ok(boxes)
    }
}
