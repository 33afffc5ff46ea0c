//! Grid file formats.
//!
//! Two interchangeable encodings are supported for every field type:
//!
//! * CSV: a header row `i,j,x,y,<components...>`, then one row per node in
//!   storage order (j outer, i inner).
//! * Binary: a JSON header `<path>.json` describing the grid, the value
//!   kind and the component column order, next to a flat little-endian
//!   f64 payload `<path>.bin` with `nx * ny * components` numbers in the
//!   same node order.

use crate::error::{Error, Result};
use crate::grid::{GridField, GridSpec, GridValue, ValueKind};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const FORMAT_NAME: &str = "formsurf-grid";
pub const FORMAT_VERSION: u32 = 1;

/// JSON header of the binary format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridHeader {
    pub format: String,
    pub version: u32,
    pub grid: GridSpec,
    pub value_kind: ValueKind,
    /// Component column order within one node record.
    pub components: Vec<String>,
    /// Payload file name, relative to the header's directory.
    pub payload: String,
    /// Always "little"; spelled out for auditability.
    pub endianness: String,
    pub dtype: String,
    pub node_order: String,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Appends `.ext` to the full file name (unlike `with_extension`, which
/// would replace a dotted suffix such as `case.a`).
fn append_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_os_string();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

pub fn write_csv<T: GridValue>(field: &GridField<T>, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("i,j,x,y");
    for name in T::component_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let mut comps = vec![0.0; T::COMPONENTS];
    let spec = field.spec();
    for (i, j, v) in field.iter_nodes() {
        v.write_components(&mut comps);
        out.push_str(&format!("{},{},{},{}", i, j, spec.x(i), spec.y(j)));
        for c in &comps {
            out.push(',');
            out.push_str(&format!("{c}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_csv<T: GridValue>(path: &Path) -> Result<GridField<T>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    let expected_header: Vec<String> = ["i", "j", "x", "y"]
        .iter()
        .map(|s| s.to_string())
        .chain(T::component_names().iter().map(|s| s.to_string()))
        .collect();
    let got: Vec<&str> = header.split(',').map(str::trim).collect();
    if got
        != expected_header
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>()
    {
        return Err(format_err(
            path,
            format!(
                "header mismatch: expected {:?}, got {:?}",
                expected_header, got
            ),
        ));
    }

    let mut records: Vec<(usize, usize, f64, f64, Vec<f64>)> = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 + T::COMPONENTS {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: line_no + 1,
                message: format!("expected {} fields, got {}", 4 + T::COMPONENTS, parts.len()),
            });
        }
        let parse_usize = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: line_no + 1,
                message: format!("bad index '{s}'"),
            })
        };
        let parse_f64 = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: line_no + 1,
                message: format!("bad number '{s}'"),
            })
        };
        let i = parse_usize(parts[0])?;
        let j = parse_usize(parts[1])?;
        let x = parse_f64(parts[2])?;
        let y = parse_f64(parts[3])?;
        let comps = parts[4..]
            .iter()
            .map(|s| parse_f64(s))
            .collect::<Result<Vec<f64>>>()?;
        records.push((i, j, x, y, comps));
    }
    if records.is_empty() {
        return Err(format_err(path, "no data rows"));
    }

    let nx = records.iter().map(|r| r.0).max().unwrap() + 1;
    let ny = records.iter().map(|r| r.1).max().unwrap() + 1;
    if records.len() != nx * ny {
        return Err(format_err(
            path,
            format!("{} rows do not fill a {}x{} grid", records.len(), nx, ny),
        ));
    }
    // reconstruct spacing and origin from the node coordinates
    let first = &records[0];
    if first.0 != 0 || first.1 != 0 {
        return Err(format_err(path, "rows must start at node (0, 0)"));
    }
    let (x0, y0) = (first.2, first.3);
    let h = if nx > 1 {
        records
            .iter()
            .find(|r| r.0 == 1 && r.1 == 0)
            .map(|r| r.2 - x0)
            .ok_or_else(|| format_err(path, "missing node (1, 0)"))?
    } else {
        records
            .iter()
            .find(|r| r.0 == 0 && r.1 == 1)
            .map(|r| r.3 - y0)
            .ok_or_else(|| format_err(path, "missing node (0, 1)"))?
    };
    let spec = GridSpec::new(x0, y0, h, nx, ny)?;

    let mut values: Vec<Option<T>> = vec![None; spec.node_count()];
    for (i, j, _, _, comps) in &records {
        if *i >= nx || *j >= ny {
            return Err(format_err(path, format!("node ({i}, {j}) out of range")));
        }
        values[j * nx + i] = Some(T::from_components(comps)?);
    }
    let values = values
        .into_iter()
        .collect::<Option<Vec<T>>>()
        .ok_or_else(|| format_err(path, "grid has holes"))?;
    GridField::from_values(spec, values)
}

// ---------------------------------------------------------------------------
// JSON header + binary payload
// ---------------------------------------------------------------------------

/// Writes `<stem>.json` and `<stem>.bin`. `stem` should not carry an
/// extension; the two files it produces are self-describing.
pub fn write_binary<T: GridValue>(field: &GridField<T>, stem: &Path) -> Result<()> {
    let json_path = append_ext(stem, "json");
    let bin_path = append_ext(stem, "bin");
    let bin_name = bin_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| format_err(stem, "stem has no file name"))?;

    let header = GridHeader {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        grid: *field.spec(),
        value_kind: T::KIND,
        components: T::component_names().iter().map(|s| s.to_string()).collect(),
        payload: bin_name,
        endianness: "little".to_string(),
        dtype: "f64".to_string(),
        node_order: "node (i, j) at flat index j * nx + i (i varies fastest)".to_string(),
    };
    let header_text = serde_json::to_string_pretty(&header).expect("header serialization");
    fs::write(&json_path, header_text).map_err(|e| io_err(&json_path, e))?;

    let mut payload = Vec::with_capacity(field.spec().node_count() * T::COMPONENTS * 8);
    let mut comps = vec![0.0; T::COMPONENTS];
    for (_, _, v) in field.iter_nodes() {
        v.write_components(&mut comps);
        for c in &comps {
            payload
                .write_all(&c.to_le_bytes())
                .map_err(|e| io_err(&bin_path, e))?;
        }
    }
    fs::write(&bin_path, payload).map_err(|e| io_err(&bin_path, e))
}

pub fn read_header(stem_or_json: &Path) -> Result<GridHeader> {
    let json_path = if stem_or_json
        .extension()
        .map(|e| e == "json")
        .unwrap_or(false)
    {
        stem_or_json.to_path_buf()
    } else {
        append_ext(stem_or_json, "json")
    };
    let text = fs::read_to_string(&json_path).map_err(|e| io_err(&json_path, e))?;
    let header: GridHeader =
        serde_json::from_str(&text).map_err(|e| format_err(&json_path, e.to_string()))?;
    if header.format != FORMAT_NAME {
        return Err(format_err(
            &json_path,
            format!("unknown format '{}'", header.format),
        ));
    }
    if header.version != FORMAT_VERSION {
        return Err(format_err(
            &json_path,
            format!("unsupported version {}", header.version),
        ));
    }
    if header.endianness != "little" || header.dtype != "f64" {
        return Err(format_err(&json_path, "payload must be little-endian f64"));
    }
    Ok(header)
}

/// Reads a field written by [`write_binary`]. Accepts either the stem or
/// the `.json` header path.
pub fn read_binary<T: GridValue>(stem_or_json: &Path) -> Result<GridField<T>> {
    let json_path = if stem_or_json
        .extension()
        .map(|e| e == "json")
        .unwrap_or(false)
    {
        stem_or_json.to_path_buf()
    } else {
        append_ext(stem_or_json, "json")
    };
    let header = read_header(&json_path)?;
    if header.value_kind != T::KIND {
        return Err(format_err(
            &json_path,
            format!(
                "value kind mismatch: file holds {:?}, caller expects {:?}",
                header.value_kind,
                T::KIND
            ),
        ));
    }

    let bin_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.payload);
    let bytes = fs::read(&bin_path).map_err(|e| io_err(&bin_path, e))?;
    let spec = GridSpec::new(
        header.grid.x0,
        header.grid.y0,
        header.grid.h,
        header.grid.nx,
        header.grid.ny,
    )?;
    let expected = spec.node_count() * T::COMPONENTS * 8;
    if bytes.len() != expected {
        return Err(format_err(
            &bin_path,
            format!("payload is {} bytes, expected {}", bytes.len(), expected),
        ));
    }

    let mut values = Vec::with_capacity(spec.node_count());
    let mut comps = vec![0.0; T::COMPONENTS];
    for node in 0..spec.node_count() {
        for (c, comp) in comps.iter_mut().enumerate() {
            let off = (node * T::COMPONENTS + c) * 8;
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&bytes[off..off + 8]);
            *comp = f64::from_le_bytes(buf);
        }
        let v = T::from_components(&comps)?;
        if !v.is_finite() {
            return Err(format_err(
                &bin_path,
                format!("non-finite value at flat node {node}"),
            ));
        }
        values.push(v);
    }
    GridField::from_values(spec, values)
}
