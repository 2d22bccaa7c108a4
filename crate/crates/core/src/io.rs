//! Binary field and sinogram files.
//!
//! Data files are flat little-endian `binary32` arrays in storage order
//! (`x` fastest for fields, `ρ` fastest for sinograms). Each has a sidecar text
//! header with the same path and extension `hdr`, holding `key=value` lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{make_grid, Field, GridSpec};
use crate::propagation::{Sinogram, SinogramSpec};
use crate::scalar::Scalar;

pub fn header_path(data: &Path) -> PathBuf {
    data.with_extension("hdr")
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

fn write_f32<T: Scalar>(path: &Path, values: &[T]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_f32<T: Scalar>(path: &Path, expected: usize) -> Result<Vec<T>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected * 4 {
        return Err(format_err(path, format!("expected {} bytes, found {}", expected * 4, bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect())
}

/// Parses `key=value` lines; blank lines are ignored.
pub fn parse_header(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| format_err(path, format!("line {} has no '='", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn get<V: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<V> {
    let raw = map.get(key).ok_or_else(|| format_err(path, format!("missing key {key}")))?;
    raw.parse().map_err(|_| format_err(path, format!("bad value for {key}: {raw}")))
}

pub fn write_field<T: Scalar>(path: &Path, field: &Field<T>) -> Result<()> {
    let g = field.grid();
    write_f32(path, field.values())?;
    let header = format!(
        "nx={}\nny={}\nnz={}\nvoxel_size_cm={}\nunit={}\n",
        g.nx,
        g.ny,
        g.nz,
        g.voxel_size,
        field.unit()
    );
    fs::write(header_path(path), header)?;
    Ok(())
}

pub fn read_field_header(path: &Path) -> Result<(GridSpec, String)> {
    let hpath = header_path(path);
    let h = parse_header(&hpath)?;
    let grid = make_grid(
        get(&h, "nx", &hpath)?,
        get(&h, "ny", &hpath)?,
        get(&h, "nz", &hpath)?,
        get(&h, "voxel_size_cm", &hpath)?,
    )
    .map_err(|e| format_err(&hpath, e.to_string()))?;
    let unit = h.get("unit").cloned().unwrap_or_default();
    Ok((grid, unit))
}

pub fn read_field<T: Scalar>(path: &Path) -> Result<Field<T>> {
    let (grid, unit) = read_field_header(path)?;
    let values = read_f32(path, grid.len())?;
    Field::new(grid, values, unit).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_sinogram<T: Scalar>(path: &Path, g: &Sinogram<T>) -> Result<()> {
    let s = g.spec();
    write_f32(path, g.values())?;
    let header = format!(
        "nrho={}\nntheta={}\nnz={}\nangle_start_deg={}\nangle_step_deg={}\n",
        s.n_rho,
        s.n_theta,
        s.n_z,
        s.angle_start.to_degrees(),
        s.angle_step.to_degrees()
    );
    fs::write(header_path(path), header)?;
    Ok(())
}

/// Header contents of a sinogram file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinogramHeader {
    pub n_rho: usize,
    pub n_theta: usize,
    pub n_z: usize,
    pub angle_start_deg: f64,
    pub angle_step_deg: f64,
}

impl SinogramHeader {
    /// Geometry on `grid` described by this header.
    pub fn spec(&self, grid: &GridSpec) -> Result<SinogramSpec> {
        if self.n_z != grid.nz {
            return Err(Error::SpecMismatch(format!(
                "sinogram has {} slices, grid has {}",
                self.n_z, grid.nz
            )));
        }
        SinogramSpec::with_step(
            grid,
            self.n_rho,
            self.n_theta,
            self.angle_start_deg.to_radians(),
            self.angle_step_deg.to_radians(),
        )
    }

    /// Whether the header describes `spec`, up to decimal rounding of the angles.
    pub fn matches(&self, spec: &SinogramSpec) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1e-9);
        self.n_rho == spec.n_rho
            && self.n_theta == spec.n_theta
            && self.n_z == spec.n_z
            && close(self.angle_start_deg.to_radians(), spec.angle_start)
            && close(self.angle_step_deg.to_radians(), spec.angle_step)
    }
}

pub fn read_sinogram_header(path: &Path) -> Result<SinogramHeader> {
    let hpath = header_path(path);
    let h = parse_header(&hpath)?;
    Ok(SinogramHeader {
        n_rho: get(&h, "nrho", &hpath)?,
        n_theta: get(&h, "ntheta", &hpath)?,
        n_z: get(&h, "nz", &hpath)?,
        angle_start_deg: get(&h, "angle_start_deg", &hpath)?,
        angle_step_deg: get(&h, "angle_step_deg", &hpath)?,
    })
}

/// Reads a sinogram whose header must describe `spec`; the result carries `spec`.
pub fn read_sinogram<T: Scalar>(path: &Path, spec: &SinogramSpec) -> Result<Sinogram<T>> {
    let header = read_sinogram_header(path)?;
    if !header.matches(spec) {
        return Err(format_err(path, format!("header {header:?} does not match {spec:?}")));
    }
    let values = read_f32(path, spec.len())?;
    Sinogram::new(spec.clone(), values).map_err(|e| format_err(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dose.f32");
        let g = make_grid(3, 2, 2, 0.0078125).unwrap();
        let f = Field::from_fn(g, "J/cm^3", |i, j, k| (i + 10 * j + 100 * k) as f64 * 0.25);
        write_field(&path, &f).unwrap();
        assert_eq!(fs::read(&path).unwrap().len(), 12 * 4);
        let back: Field<f64> = read_field(&path).unwrap();
        assert_eq!(back, f);
        let text = fs::read_to_string(dir.path().join("dose.hdr")).unwrap();
        assert_eq!(text, "nx=3\nny=2\nnz=2\nvoxel_size_cm=0.0078125\nunit=J/cm^3\n");
    }

    #[test]
    fn byte_layout_is_little_endian_x_fastest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let g = make_grid(2, 1, 1, 1.0).unwrap();
        write_field(&path, &Field::new(g, vec![1.0f32, -2.0], "").unwrap()).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[4..], &(-2.0f32).to_le_bytes());
    }

    #[test]
    fn sinogram_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.f32");
        let g = make_grid(4, 4, 2, 0.1).unwrap();
        let spec = SinogramSpec::full_circle(&g, 7).unwrap();
        let values = (0..spec.len()).map(|i| i as f64).collect();
        let s = Sinogram::new(spec.clone(), values).unwrap();
        write_sinogram(&path, &s).unwrap();
        let header = read_sinogram_header(&path).unwrap();
        assert_eq!((header.n_rho, header.n_theta, header.n_z), (4, 7, 2));
        assert!(header.matches(&spec));
        let rebuilt = header.spec(&g).unwrap();
        assert!((rebuilt.angle_step - spec.angle_step).abs() < 1e-15);
        let back: Sinogram<f64> = read_sinogram(&path, &spec).unwrap();
        assert_eq!(back, s);
        let other = SinogramSpec::full_circle(&g, 8).unwrap();
        assert!(read_sinogram::<f64>(&path, &other).is_err());
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let g = make_grid(2, 2, 1, 1.0).unwrap();
        write_field(&path, &Field::<f64>::zeros(g, "")).unwrap();
        fs::write(&path, [0u8; 7]).unwrap();
        assert!(matches!(read_field::<f64>(&path), Err(Error::Format { .. })));
    }
}
