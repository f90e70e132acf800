//! Field dumps: one JSON header plus one raw little-endian `f64` file per field.
//!
//! Hermitian fields are stored as full `n × n` complex matrices per point,
//! row-major, each entry as `(re, im)`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::forms::MatrixField;
use super::grid::{ScalarField, TorusGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Scalar,
    Hermitian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    pub kind: FieldKind,
    pub file: String,
    /// Reals per grid point.
    pub values_per_point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub complex_dim: usize,
    #[serde(rename = "N")]
    pub size: usize,
    pub dtype: String,
    pub layout: String,
    pub axis_order: Vec<String>,
    pub fields: Vec<FieldEntry>,
}

/// Collects fields and writes them under one directory.
#[derive(Debug)]
pub struct FieldDump {
    dir: PathBuf,
    grid: TorusGrid,
    entries: Vec<FieldEntry>,
}

fn axis_names(n: usize) -> Vec<String> {
    (1..=n).flat_map(|j| [format!("x{j}"), format!("y{j}")]).collect()
}

fn write_raw(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

impl FieldDump {
    pub fn new(dir: impl Into<PathBuf>, grid: TorusGrid) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(FieldDump { dir, grid, entries: Vec::new() })
    }

    fn check(&self, grid: &TorusGrid, name: &str) -> Result<()> {
        if *grid != self.grid {
            return Err(Error::Input(format!("field {name} lives on a different grid")));
        }
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::Input(format!("duplicate field name {name}")));
        }
        Ok(())
    }

    pub fn add_scalar(&mut self, name: &str, f: &ScalarField) -> Result<()> {
        self.check(f.grid(), name)?;
        let file = format!("{name}.f64");
        write_raw(&self.dir.join(&file), f.values().iter().copied())?;
        self.entries.push(FieldEntry { name: name.into(), kind: FieldKind::Scalar, file, values_per_point: 1 });
        Ok(())
    }

    pub fn add_hermitian(&mut self, name: &str, f: &MatrixField) -> Result<()> {
        self.check(f.grid(), name)?;
        let n = self.grid.n();
        let file = format!("{name}.f64");
        let values = (0..self.grid.len()).flat_map(|p| {
            let m = f.point(p);
            (0..n * n).flat_map(move |k| {
                let z = m.get(k / n, k % n);
                [z.re, z.im]
            })
        });
        write_raw(&self.dir.join(&file), values)?;
        self.entries.push(FieldEntry {
            name: name.into(),
            kind: FieldKind::Hermitian,
            file,
            values_per_point: 2 * n * n,
        });
        Ok(())
    }

    /// Writes `header.json` and returns its path.
    pub fn finish(self) -> Result<PathBuf> {
        let header = DumpHeader {
            complex_dim: self.grid.n(),
            size: self.grid.size(),
            dtype: "f64-le".into(),
            layout: "row-major".into(),
            axis_order: axis_names(self.grid.n()),
            fields: self.entries,
        };
        let path = self.dir.join("header.json");
        fs::write(&path, serde_json::to_string_pretty(&header)?)?;
        Ok(path)
    }
}

/// Reads one scalar field back from a dump directory.
pub fn read_scalar(dir: &Path, name: &str) -> Result<ScalarField> {
    let header: DumpHeader = serde_json::from_str(&fs::read_to_string(dir.join("header.json"))?)?;
    let entry = header
        .fields
        .iter()
        .find(|e| e.name == name && e.kind == FieldKind::Scalar)
        .ok_or_else(|| Error::Input(format!("no scalar field {name} in dump")))?;
    let grid = TorusGrid::new(header.complex_dim, header.size)?;
    let bytes = fs::read(dir.join(&entry.file))?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::Input(format!("field {name} has the wrong byte length")));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    ScalarField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::HMat;

    #[test]
    fn roundtrip_and_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(2, 4).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] - 2.0 * x[3]);
        let mut d = FieldDump::new(dir.path(), g).unwrap();
        d.add_scalar("phi", &f).unwrap();
        d.add_hermitian("omega", &MatrixField::constant(g, &HMat::identity(2))).unwrap();
        assert!(d.add_scalar("phi", &f).is_err());
        let header = d.finish().unwrap();
        let text = fs::read_to_string(header).unwrap();
        assert!(text.contains("\"f64-le\"") && text.contains("\"hermitian\""));
        assert_eq!(read_scalar(dir.path(), "phi").unwrap(), f);
        let raw = fs::read(dir.path().join("omega.f64")).unwrap();
        assert_eq!(raw.len(), g.len() * 8 * 8);
    }
}
