//! CSV tables with `#`-prefixed metadata lines.
//!
//! Layout: any number of `# key: value` lines, one header line of column
//! names, then comma-separated rows. Floats are written in shortest
//! round-trip scientific notation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::atoms::AtomGrid;
use crate::integrate::{Column, Trajectory};
use crate::kinetics::KineticState;
use crate::modes::{BandStructure, Mode, ModeClass};
use crate::spectra::Spectrum;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { meta: Vec::new(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn meta_values<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.meta.iter().filter(move |(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| fs_err(dir, e))?;
        }
        fs::write(path, self.render()).map_err(|e| fs_err(path, e))
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut table = Table::default();
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.split_once(':').ok_or(IoError::Parse {
                    line: i + 1,
                    message: "metadata line without `key: value`".into(),
                })?;
                table.meta.push((k.trim().to_string(), v.trim().to_string()));
            } else if !header {
                table.columns = line.split(',').map(|c| c.trim().to_string()).collect();
                header = true;
            } else {
                let row: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
                if row.len() != table.columns.len() {
                    return Err(IoError::Parse {
                        line: i + 1,
                        message: format!("expected {} fields, found {}", table.columns.len(), row.len()),
                    });
                }
                table.rows.push(row);
            }
        }
        if !header {
            return Err(IoError::Parse { line: 0, message: "no header line".into() });
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| fs_err(path, e))?;
        Self::parse(&text)
    }

    pub fn column(&self, name: &str) -> Result<usize, IoError> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| IoError::MissingColumn(name.into()))
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>, IoError> {
        let j = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[j].parse::<f64>().map_err(|e| IoError::Invalid(format!("row {} column `{name}`: {e}", i + 1)))
            })
            .collect()
    }

    pub fn f64_row(&self, i: usize) -> Result<Vec<f64>, IoError> {
        self.rows[i]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|e| IoError::Invalid(format!("row {}: {e}", i + 1))))
            .collect()
    }
}

fn fs_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Fs { path: path.display().to_string(), source }
}

pub fn modes_table(modes: &[Mode<f64>]) -> Table {
    let mut t = Table::new(["index", "omega", "gamma", "m_peak", "k", "class"]);
    for m in modes {
        t.push(vec![
            m.index.to_string(),
            fmt_f64(m.omega),
            fmt_f64(m.gamma),
            m.m_peak.to_string(),
            fmt_f64(m.k_assigned),
            m.class.as_str().into(),
        ]);
    }
    t
}

/// Band points `(k, Ω)`; gaps go into `gap: lo hi` metadata lines.
pub fn bands_table(bands: &BandStructure<f64>) -> Table {
    let mut t = Table::new(["k", "omega"]);
    for (lo, hi) in &bands.gaps {
        t.meta.push(("gap".into(), format!("{} {}", fmt_f64(*lo), fmt_f64(*hi))));
    }
    for (k, w) in &bands.points {
        t.push(vec![fmt_f64(*k), fmt_f64(*w)]);
    }
    t
}

pub fn photons_table(state: &KineticState<f64>, omega: &[f64], gamma: &[f64], class: &[ModeClass]) -> Table {
    let mut t = Table::new(["omega", "N", "gamma", "class"]);
    for k in 0..omega.len() {
        t.push(vec![fmt_f64(omega[k]), fmt_f64(state.photons[k]), fmt_f64(gamma[k]), class[k].as_str().into()]);
    }
    t
}

pub fn electrons_table(state: &KineticState<f64>, grid: &AtomGrid<f64>) -> Table {
    let mut t = Table::new(["omega", "n_e"]);
    for (w, n) in grid.omega.iter().zip(&state.n_e) {
        t.push(vec![fmt_f64(*w), fmt_f64(*n)]);
    }
    t
}

/// Photon table columns needed by the spectrum stage.
pub struct PhotonRecord {
    pub omega: Vec<f64>,
    pub photons: Vec<f64>,
    pub gamma: Vec<f64>,
}

pub fn read_photons(table: &Table) -> Result<PhotonRecord, IoError> {
    Ok(PhotonRecord { omega: table.f64_column("omega")?, photons: table.f64_column("N")?, gamma: table.f64_column("gamma")? })
}

pub fn column_name(c: Column) -> String {
    match c {
        Column::Electron(n) => format!("n_e_{n}"),
        Column::Photon(k) => format!("N_{k}"),
    }
}

pub fn trajectory_table(traj: &Trajectory<f64>) -> Table {
    let mut t = Table::new(std::iter::once("t".to_string()).chain(traj.columns.iter().map(|c| column_name(*c))));
    let mut push = |time: f64, row: &[f64]| {
        t.push(std::iter::once(fmt_f64(time)).chain(row.iter().map(|v| fmt_f64(*v))).collect());
    };
    push(0.0, &traj.initial);
    for (time, row) in traj.times.iter().zip(&traj.samples) {
        push(*time, row);
    }
    t
}

/// Full state from the last row of a trajectory table recorded with every column.
pub fn state_from_trajectory(table: &Table, n_atoms: usize, n_modes: usize) -> Result<KineticState<f64>, IoError> {
    let last = table.rows.len().checked_sub(1).ok_or_else(|| IoError::Invalid("empty trajectory".into()))?;
    let row = table.f64_row(last)?;
    let pick = |c: Column| table.column(&column_name(c)).map(|j| row[j]);
    let n_e = (0..n_atoms).map(|n| pick(Column::Electron(n))).collect::<Result<_, _>>()?;
    let photons = (0..n_modes).map(|k| pick(Column::Photon(k))).collect::<Result<_, _>>()?;
    Ok(KineticState { n_e, photons, t: row[0] })
}

/// Spectra on a shared grid, one value column per kind.
pub fn spectra_table(spectra: &[&Spectrum<f64>]) -> Result<Table, IoError> {
    let first = spectra.first().ok_or_else(|| IoError::Invalid("no spectra".into()))?;
    if spectra.iter().any(|s| s.omega != first.omega) {
        return Err(IoError::Invalid("spectra sampled on different grids".into()));
    }
    let mut t = Table::new(std::iter::once("omega".to_string()).chain(spectra.iter().map(|s| s.kind.to_string())))
        .with_meta("units", "omega in rad/s; raw, detector and blackbody values in rad/s; ratio dimensionless");
    for i in 0..first.len() {
        t.push(std::iter::once(fmt_f64(first.omega[i])).chain(spectra.iter().map(|s| fmt_f64(s.value[i]))).collect());
    }
    Ok(t)
}
