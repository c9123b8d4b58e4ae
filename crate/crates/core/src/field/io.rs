//! On-disk formats.
//!
//! A field `name` is stored as `name.json` (metadata) next to `name.f64`
//! (little-endian `f64` samples, row-major, last axis fastest). Writes go to a
//! temporary file in the target directory and are renamed into place.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Grid, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::FrameSpec;

pub const FORMAT_VERSION: u32 = 1;
const ORDER: &str = "row-major-last-fastest";
const DTYPE: &str = "f64-le";

/// Sidecar metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub version: u32,
    pub dims: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub order: String,
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `sinogram`, `cone-integral`, or absent for plain fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl FieldMeta {
    pub fn for_field(field: &ScalarField) -> Self {
        let g = field.grid();
        Self {
            version: FORMAT_VERSION,
            dims: g.counts().to_vec(),
            origin: g.origin().to_vec(),
            spacing: g.spacing().to_vec(),
            order: ORDER.into(),
            dtype: DTYPE.into(),
            name: (!field.name.is_empty()).then(|| field.name.clone()),
            role: None,
            frame: None,
            quadrature_step: None,
            source: None,
        }
    }
}

/// `(meta, data)` paths for a field path given with or without the `.f64`/`.json` extension.
pub fn sidecar_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("f64") | Some("json") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".json"), with(".f64"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn store_field(field: &ScalarField, path: &Path) -> Result<()> {
    store_with_meta(field, FieldMeta::for_field(field), path)
}

pub(crate) fn store_with_meta(field: &ScalarField, meta: FieldMeta, path: &Path) -> Result<()> {
    let (meta_path, data_path) = sidecar_paths(path);
    let mut bytes = Vec::with_capacity(field.samples().len() * 8);
    for v in field.samples() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let json = serde_json::to_vec_pretty(&meta)?;
    write_atomic(&data_path, &bytes)?;
    write_atomic(&meta_path, &json)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<ScalarField> {
    load_with_meta(path).map(|(f, _)| f)
}

pub(crate) fn load_with_meta(path: &Path) -> Result<(ScalarField, FieldMeta)> {
    let (meta_path, data_path) = sidecar_paths(path);
    let meta: FieldMeta = serde_json::from_slice(&fs::read(&meta_path)?)?;
    if meta.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {}", meta.version)));
    }
    if meta.order != ORDER || meta.dtype != DTYPE {
        return Err(Error::Format(format!("unsupported layout {} / {}", meta.order, meta.dtype)));
    }
    let grid = Grid::new(meta.origin.clone(), meta.spacing.clone(), meta.dims.clone())
        .map_err(|e| Error::Format(e.to_string()))?;
    let bytes = fs::read(&data_path)?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {} for dims {:?}",
            data_path.display(),
            bytes.len(),
            grid.len() * 8,
            meta.dims
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let name = meta.name.clone().unwrap_or_default();
    let field = ScalarField::new(grid, samples, name).map_err(|e| Error::Format(e.to_string()))?;
    Ok((field, meta))
}

/// CSV with header `x,y[,z],value`, one lattice point per row, 17 significant digits.
pub fn write_csv(field: &ScalarField, path: &Path) -> Result<()> {
    let grid = field.grid();
    let axes = ["x", "y", "z"];
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = axes[..grid.dim()].to_vec();
    header.push("value");
    wtr.write_record(&header)?;
    let mut p = vec![0.0; grid.dim()];
    for (idx, v) in field.samples().iter().enumerate() {
        grid.point_into(idx, &mut p);
        let mut rec: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
        rec.push(format!("{v:.16e}"));
        wtr.write_record(&rec)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Reads a CSV written by [`write_csv`]; the lattice is inferred from the coordinates.
pub fn read_csv(path: &Path) -> Result<ScalarField> {
    let mut rdr = csv::Reader::from_path(path)?;
    let dim = rdr.headers()?.len().checked_sub(1).filter(|d| *d == 2 || *d == 3).ok_or_else(|| {
        Error::Format("CSV header must be x,y[,z],value".into())
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Format(format!("`{s}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != dim + 1 {
            return Err(Error::Format("ragged CSV row".into()));
        }
        rows.push(row);
    }
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for (a, vals) in axes.iter_mut().enumerate() {
        *vals = rows.iter().map(|r| r[a]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
    }
    let counts: Vec<usize> = axes.iter().map(Vec::len).collect();
    let origin: Vec<f64> = axes.iter().map(|v| v[0]).collect();
    let spacing: Vec<f64> = axes
        .iter()
        .map(|v| if v.len() > 1 { (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64 } else { 0.0 })
        .collect();
    let grid = Grid::new(origin, spacing, counts).map_err(|e| Error::Format(e.to_string()))?;
    if rows.len() != grid.len() {
        return Err(Error::Format(format!("{} rows do not fill a {:?} lattice", rows.len(), grid.counts())));
    }
    let mut p = vec![0.0; dim];
    for (idx, row) in rows.iter().enumerate() {
        grid.point_into(idx, &mut p);
        for a in 0..dim {
            if (p[a] - row[a]).abs() > 1e-9 * grid.spacing()[a] + 1e-12 * p[a].abs() {
                return Err(Error::Format(format!("row {} is out of row-major order", idx + 2)));
            }
        }
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
    ScalarField::new(grid, rows.iter().map(|r| r[dim]).collect(), name)
}

/// Binary PGM (P5) of a 2-D field: linear min–max scaling to 0..=255, top row = largest y.
pub fn export_pgm(field: &ScalarField, path: &Path) -> Result<()> {
    let grid = field.grid();
    if grid.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: grid.dim() });
    }
    let (nx, ny) = (grid.counts()[0], grid.counts()[1]);
    let (lo, hi) = (field.min(), field.max());
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let mut out = BufWriter::new(Vec::with_capacity(nx * ny + 32));
    write!(out, "P5\n{nx} {ny}\n255\n")?;
    for row in (0..ny).rev() {
        for col in 0..nx {
            let v = field.samples()[col * ny + row];
            out.write_all(&[((v - lo) * scale).round().clamp(0.0, 255.0) as u8])?;
        }
    }
    let bytes = out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> ScalarField {
        let g = Grid::new(vec![-0.25, 0.5], vec![0.1, 0.3], vec![4, 4]).unwrap();
        ScalarField::from_fn(g, "f", |p| (p[0] * 7.0).sin() / 3.0 + p[1].exp())
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.f64");
        let f = field();
        store_field(&f, &path).unwrap();
        assert!(dir.path().join("a.json").exists());
        let back = load_field(&path).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert!(back.samples().iter().zip(f.samples()).all(|(a, b)| a.to_bits() == b.to_bits()));
        // The bare stem works too.
        assert_eq!(load_field(&dir.path().join("a")).unwrap().samples(), f.samples());
    }

    #[test]
    fn truncated_data_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.f64");
        store_field(&field(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_field(&path), Err(Error::Format(_))));
        assert!(matches!(load_field(&dir.path().join("missing.f64")), Err(Error::Io(_))));
    }

    #[test]
    fn bad_version_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.f64");
        store_field(&field(), &path).unwrap();
        let meta = dir.path().join("c.json");
        let text = fs::read_to_string(&meta).unwrap().replace("\"version\": 1", "\"version\": 7");
        fs::write(&meta, text).unwrap();
        assert!(matches!(load_field(&path), Err(Error::Format(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let f = field();
        write_csv(&f, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,value\n"));
        let back = read_csv(&path).unwrap();
        assert_eq!(back.grid().counts(), f.grid().counts());
        for (a, b) in back.samples().iter().zip(f.samples()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pgm_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let g = Grid::unit(&[3, 2]).unwrap();
        let f = ScalarField::from_fn(g, "f", |p| p[1]);
        export_pgm(&f, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        // Top row is y = 1.
        assert_eq!(&bytes[header.len()..], &[255, 255, 255, 0, 0, 0]);
    }
}
