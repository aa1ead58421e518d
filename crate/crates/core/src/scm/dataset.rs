//! Subject-level survival data and its CSV form.
//!
//! File layout: a header row `time,event,x,z[,u_latent]`, where vector
//! covariates expand to `x0,x1,…` / `z0,z1,…`, events are `0`/`1` and every
//! real is written with 17 significant digits so that save → load is exact.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ScenarioConfig;
use crate::error::{invalid, Error, Result};

pub const LATENT_COLUMN: &str = "u_latent";

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecord {
    pub time: f64,
    pub event: bool,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    // Only the simulator and the file layer touch this; estimators cannot.
    u_latent: Option<f64>,
}

impl SubjectRecord {
    pub fn new(time: f64, event: bool, x: Vec<f64>, z: Vec<f64>) -> Self {
        Self {
            time,
            event,
            x,
            z,
            u_latent: None,
        }
    }

    pub(crate) fn with_latent(mut self, u: f64) -> Self {
        self.u_latent = Some(u);
        self
    }

    pub fn has_latent(&self) -> bool {
        self.u_latent.is_some()
    }

    #[cfg(test)]
    pub(crate) fn latent(&self) -> Option<f64> {
        self.u_latent
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Scenario(ScenarioConfig),
    File(PathBuf),
    InMemory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    records: Vec<SubjectRecord>,
    covariate_names: Vec<String>,
    x_dim: usize,
    z_dim: usize,
    provenance: Provenance,
}

fn block_names(prefix: &str, dim: usize) -> Vec<String> {
    match dim {
        1 => vec![prefix.to_string()],
        _ => (0..dim).map(|k| format!("{prefix}{k}")).collect(),
    }
}

impl Dataset {
    pub fn new(records: Vec<SubjectRecord>, provenance: Provenance) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Validation("dataset is empty".into()))?;
        let (x_dim, z_dim) = (first.x.len(), first.z.len());
        if x_dim + z_dim == 0 {
            return Err(Error::Validation("dataset has no covariates".into()));
        }
        let latent = first.has_latent();
        for (i, r) in records.iter().enumerate() {
            if r.x.len() != x_dim || r.z.len() != z_dim {
                return Err(Error::Validation(format!(
                    "subject {i}: covariate dimensions ({}, {}) differ from ({x_dim}, {z_dim})",
                    r.x.len(),
                    r.z.len()
                )));
            }
            if r.has_latent() != latent {
                return Err(Error::Validation(format!(
                    "subject {i}: latent column present on some rows only"
                )));
            }
            if !(r.time.is_finite() && r.time > 0.0) {
                return Err(Error::Validation(format!(
                    "subject {i}: time must be positive and finite, got {}",
                    r.time
                )));
            }
            let finite =
                r.x.iter()
                    .chain(&r.z)
                    .chain(&r.u_latent)
                    .all(|v| v.is_finite());
            if !finite {
                return Err(Error::Validation(format!(
                    "subject {i}: non-finite covariate"
                )));
            }
        }
        let mut covariate_names = block_names("x", x_dim);
        covariate_names.extend(block_names("z", z_dim));
        Ok(Self {
            records,
            covariate_names,
            x_dim,
            z_dim,
            provenance,
        })
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn z_dim(&self) -> usize {
        self.z_dim
    }

    pub fn has_latent(&self) -> bool {
        self.records[0].has_latent()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn event_count(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn event_fraction(&self) -> f64 {
        self.event_count() as f64 / self.len() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    /// Index of an observable covariate. The latent confounder is not one.
    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        if name == LATENT_COLUMN {
            return Err(invalid(
                "the latent confounder is not an observable covariate",
            ));
        }
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown covariate `{name}` (available: {})",
                    self.covariate_names.join(", ")
                ))
            })
    }

    fn value(&self, record: &SubjectRecord, index: usize) -> f64 {
        if index < self.x_dim {
            record.x[index]
        } else {
            record.z[index - self.x_dim]
        }
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.covariate_index(name)?;
        Ok(self.records.iter().map(|r| self.value(r, k)).collect())
    }

    /// Row-major covariate matrix for the named columns.
    pub fn design(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let idx = names
            .iter()
            .map(|n| self.covariate_index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .records
            .iter()
            .map(|r| idx.iter().map(|&k| self.value(r, k)).collect())
            .collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        let mut header = vec!["time".to_string(), "event".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        if self.has_latent() {
            header.push(LATENT_COLUMN.to_string());
        }
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            write!(out, "{:.16e},{}", r.time, u8::from(r.event))?;
            for v in r.x.iter().chain(&r.z).chain(&r.u_latent) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, provenance: Provenance) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let header = reader
            .headers()
            .map_err(|e| csv_error(e, 1))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect::<Vec<_>>();
        let layout = parse_header(&header)?;

        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| csv_error(e, 0))?;
            let line = row.position().map_or(0, |p| p.line());
            if row.len() != header.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", header.len(), row.len()),
                });
            }
            let num = |k: usize| -> Result<f64> {
                let raw = row[k].trim();
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column `{}`: cannot parse `{raw}` as a number", header[k]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Validation(format!(
                        "line {line}, column `{}`: non-finite value",
                        header[k]
                    )));
                }
                Ok(v)
            };
            let time = num(0)?;
            if time <= 0.0 {
                return Err(Error::Validation(format!(
                    "line {line}: time must be positive, got {time}"
                )));
            }
            let event = match row[1].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("event must be 0 or 1, got `{other}`"),
                    })
                }
            };
            let x = (2..2 + layout.x_dim).map(num).collect::<Result<Vec<_>>>()?;
            let z_start = 2 + layout.x_dim;
            let z = (z_start..z_start + layout.z_dim)
                .map(num)
                .collect::<Result<Vec<_>>>()?;
            let mut rec = SubjectRecord::new(time, event, x, z);
            if layout.latent {
                rec = rec.with_latent(num(header.len() - 1)?);
            }
            records.push(rec);
        }
        if records.is_empty() {
            return Err(Error::Validation("dataset file has no data rows".into()));
        }
        Dataset::new(records, provenance)
    }
}

struct Layout {
    x_dim: usize,
    z_dim: usize,
    latent: bool,
}

fn parse_header(header: &[String]) -> Result<Layout> {
    let bad = |msg: String| Error::Parse {
        line: 1,
        message: msg,
    };
    if header.len() < 3 || header[0] != "time" || header[1] != "event" {
        return Err(bad(format!(
            "header must start with `time,event` followed by covariates, got `{}`",
            header.join(",")
        )));
    }
    let latent = header.last().is_some_and(|h| h == LATENT_COLUMN);
    let covs = &header[2..header.len() - usize::from(latent)];
    let x_dim = covs.iter().take_while(|h| h.starts_with('x')).count();
    let z_dim = covs.len() - x_dim;
    if block_names("x", x_dim) != covs[..x_dim] || block_names("z", z_dim) != covs[x_dim..] {
        return Err(bad(format!(
            "covariate columns must be `x`/`x0,x1,…` then `z`/`z0,z1,…`, got `{}`",
            covs.join(",")
        )));
    }
    if x_dim + z_dim == 0 {
        return Err(bad("no covariate columns".into()));
    }
    Ok(Layout {
        x_dim,
        z_dim,
        latent,
    })
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    dataset.write_csv(File::create(path)?)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    Dataset::read_csv(File::open(path)?, Provenance::File(path.to_path_buf()))
}
