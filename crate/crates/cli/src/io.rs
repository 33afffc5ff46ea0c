//! Field loading and dumping helpers shared by the subcommands.

use anyhow::{bail, Context, Result};
use formsurf::grid::{GridField, GridValue};
use formsurf::gridio;
use formsurf::smallmat::{RotMat3, SkewMat3, SpdMat2, SymMat2, Vec3};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DumpFormat {
    Csv,
    Binary,
    Both,
}

/// Loads a field from either format, decided by the extension:
/// `.csv` reads the CSV encoding, anything else is treated as a binary
/// stem or header path.
pub fn load_field<T: GridValue>(path: &Path) -> Result<GridField<T>> {
    let field = if path.extension().map(|e| e == "csv").unwrap_or(false) {
        gridio::read_csv(path)?
    } else {
        gridio::read_binary(path)?
    };
    Ok(field)
}

pub fn load_forms(
    a_path: &Path,
    b_path: &Path,
) -> Result<(GridField<SpdMat2>, GridField<SymMat2>)> {
    let a: GridField<SpdMat2> =
        load_field(a_path).with_context(|| format!("loading metric {}", a_path.display()))?;
    let b: GridField<SymMat2> =
        load_field(b_path).with_context(|| format!("loading second form {}", b_path.display()))?;
    Ok((a, b))
}

pub fn load_omega(omega1: &Path, omega2: &Path) -> Result<[GridField<SkewMat3>; 2]> {
    let o1: GridField<SkewMat3> =
        load_field(omega1).with_context(|| format!("loading coefficients {}", omega1.display()))?;
    let o2: GridField<SkewMat3> =
        load_field(omega2).with_context(|| format!("loading coefficients {}", omega2.display()))?;
    Ok([o1, o2])
}

/// Writes a field under `stem` in the requested encodings and returns
/// the files produced.
pub fn dump_field<T: GridValue>(
    field: &GridField<T>,
    stem: &Path,
    format: DumpFormat,
) -> Result<Vec<PathBuf>> {
    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let append = |ext: &str| {
        let mut s = stem.as_os_str().to_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    let mut written = Vec::new();
    if matches!(format, DumpFormat::Csv | DumpFormat::Both) {
        let path = append("csv");
        gridio::write_csv(field, &path)?;
        written.push(path);
    }
    if matches!(format, DumpFormat::Binary | DumpFormat::Both) {
        gridio::write_binary(field, stem)?;
        written.push(append("json"));
        written.push(append("bin"));
    }
    Ok(written)
}

pub fn dump_vec3(field: &GridField<Vec3>, stem: &Path, format: DumpFormat) -> Result<Vec<PathBuf>> {
    dump_field(field, stem, format)
}

pub fn dump_frame(
    field: &GridField<RotMat3>,
    stem: &Path,
    format: DumpFormat,
) -> Result<Vec<PathBuf>> {
    dump_field(field, stem, format)
}

/// Parses `"i,j"` into a node index.
pub fn parse_node(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("expected 'i,j', got '{text}'");
    }
    Ok((parts[0].trim().parse()?, parts[1].trim().parse()?))
}

/// Parses a comma-separated list of positive integers.
pub fn parse_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .with_context(|| format!("bad list entry '{s}'"))
        })
        .collect()
}
