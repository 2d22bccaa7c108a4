//! Binary PGM (`P5`) images.

use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major from the top row.
    pub pixels: Vec<u16>,
}

impl GrayImage {
    /// Pixel values divided by `maxval`.
    pub fn normalized(&self) -> Vec<f64> {
        let m = self.maxval as f64;
        self.pixels.iter().map(|&p| p as f64 / m).collect()
    }
}

fn bad(path: &Path, reason: impl Into<String>) -> CliError {
    CliError::Image { path: path.to_path_buf(), reason: reason.into() }
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn token<'a>(data: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &data[start..*pos])
}

pub fn decode(data: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 0;
    if token(data, &mut pos) != Some(b"P5") {
        return Err(bad(path, "not a binary PGM (P5)"));
    }
    let mut num = |what: &str| -> Result<usize> {
        let t = token(data, &mut pos).ok_or_else(|| bad(path, format!("missing {what}")))?;
        std::str::from_utf8(t)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(path, format!("bad {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if width == 0 || height == 0 {
        return Err(bad(path, "empty image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(path, format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bytes_per;
    let raster = data.get(pos..pos + need).ok_or_else(|| bad(path, "truncated raster"))?;
    let pixels = if bytes_per == 1 {
        raster.iter().map(|&b| b as u16).collect()
    } else {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    Ok(GrayImage { width, height, maxval: maxval as u16, pixels })
}

pub fn read(path: &Path) -> Result<GrayImage> {
    let data = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&data, path)
}

pub fn encode(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval < 256 {
        out.extend(img.pixels.iter().map(|&p| p as u8));
    } else {
        for p in &img.pixels {
            out.extend_from_slice(&p.to_be_bytes());
        }
    }
    out
}

pub fn write(path: &Path, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode(img)).map_err(|e| CliError::io(path, e))
}

/// 8-bit image of `values` (row-major from the top) with `[0, 1]` mapped
/// linearly onto `[0, 255]`; values outside are clamped.
pub fn render_unit(width: usize, height: usize, values: &[f64]) -> GrayImage {
    let pixels = values.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u16).collect();
    GrayImage { width, height, maxval: 255, pixels }
}
