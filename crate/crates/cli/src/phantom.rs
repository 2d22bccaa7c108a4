//! Response targets on a grid.
//!
//! Planar phantoms are defined in the `xy` plane with `y` pointing up and
//! are repeated along `z`. Coordinates below are normalized by the half
//! width of the grid, so `u, v ∈ [-1, 1]`.

use std::f64::consts::PI;

use bclp_core::{Field, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{PhantomKind, TargetConfig};
use crate::error::{CliError, Context, Result};
use crate::pgm;

pub const TARGET_UNIT: &str = "response";

/// Bit depths of the four grating quadrants: lower right, upper right,
/// upper left, lower left.
pub const GRATING_BITS: [u32; 4] = [1, 2, 4, 12];

fn quantize(v: f64, bits: u32) -> f64 {
    let levels = ((1u64 << bits) - 1) as f64;
    (v.clamp(0.0, 1.0) * levels).round() / levels
}

/// Quadrant index in [`GRATING_BITS`] order and the coordinate across the
/// quadrant in `[0, 1)`.
fn quadrant(u: f64, v: f64) -> (usize, f64) {
    let q = match (u >= 0.0, v >= 0.0) {
        (true, false) => 0,
        (true, true) => 1,
        (false, true) => 2,
        (false, false) => 3,
    };
    let across = if u >= 0.0 { u } else { u + 1.0 };
    (q, across)
}

fn normalized(grid: &GridSpec, i: usize, j: usize) -> (f64, f64) {
    let half = grid.extent_x() / 2.0;
    (grid.center_x(i) / half, grid.center_y(j) / grid.extent_y() * 2.0)
}

fn planar(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Field<f64> {
    Field::from_fn(*grid, TARGET_UNIT, |i, j, _| {
        let (u, v) = normalized(grid, i, j);
        f(u, v)
    })
}

/// Sinusoidal gratings along `x`, one per quadrant, quantized to the
/// quadrant's bit depth.
pub fn four_gratings(grid: &GridSpec, periods: f64, amplitude: f64) -> Field<f64> {
    planar(grid, |u, v| {
        let (q, across) = quadrant(u, v);
        let s = 0.5 + 0.5 * amplitude * (2.0 * PI * periods * across).sin();
        quantize(s, GRATING_BITS[q])
    })
}

/// Square-wave gratings with values in `{0, 1}`, alternating between `x`
/// and `y` orientation from quadrant to quadrant.
pub fn binary_gratings(grid: &GridSpec, periods: f64) -> Field<f64> {
    planar(grid, |u, v| {
        let (q, across_x) = quadrant(u, v);
        let across = if q % 2 == 0 {
            across_x
        } else {
            if v >= 0.0 {
                v
            } else {
                v + 1.0
            }
        };
        if (2.0 * PI * periods * across).sin() >= 0.0 {
            1.0
        } else {
            0.0
        }
    })
}

/// `value` strictly inside a centered disk, zero elsewhere.
pub fn disk(grid: &GridSpec, radius_cm: f64, value: f64) -> Field<f64> {
    Field::from_fn(*grid, TARGET_UNIT, |i, j, _| {
        if grid.center_x(i).hypot(grid.center_y(j)) < radius_cm {
            value
        } else {
            0.0
        }
    })
}

/// A stack of three solids along `z`: a square prism, a cylinder and a tube.
pub fn binary_3d(grid: &GridSpec) -> Field<f64> {
    Field::from_fn(*grid, TARGET_UNIT, |i, j, k| {
        let (u, v) = normalized(grid, i, j);
        let s = (k as f64 + 0.5) / grid.nz as f64;
        let r = u.hypot(v);
        let inside = if (0.1..0.37).contains(&s) {
            u.abs() <= 0.5 && v.abs() <= 0.5
        } else if (0.37..0.63).contains(&s) {
            r <= 0.5
        } else if (0.63..0.9).contains(&s) {
            (0.25..=0.5).contains(&r)
        } else {
            false
        };
        if inside {
            1.0
        } else {
            0.0
        }
    })
}

fn smoothstep(edge: f64, width: f64, x: f64) -> f64 {
    1.0 / (1.0 + (-(x - edge) / width).exp())
}

/// Multi-octave value noise on `[-1, 1]²`, lattice spacing halving from
/// 1/2 down to one voxel, amplitudes falling as the square root of the
/// spacing. Roughly zero-mean with values of order one.
fn value_noise(grid: &GridSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let finest = 2.0 / grid.nx.max(grid.ny) as f64;
    let mut out = vec![0.0; grid.slice_len()];
    let mut spacing = 0.5;
    while spacing >= finest * 0.999 {
        let n = (2.0 / spacing).round() as usize + 2;
        let lattice: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let amp = spacing.sqrt();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (u, v) = normalized(grid, i, j);
                let (x, y) = ((u + 1.0) / spacing, (v + 1.0) / spacing);
                let (x0, y0) = (x.floor() as usize, y.floor() as usize);
                let (tx, ty) = (x - x0 as f64, y - y0 as f64);
                let at = |a: usize, b: usize| lattice[b.min(n - 1) * n + a.min(n - 1)];
                let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
                let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
                out[j * grid.nx + i] += amp * (top * (1.0 - ty) + bottom * ty);
            }
        }
        spacing /= 2.0;
    }
    out
}

/// Synthetic grayscale flower: six shaded petals over a blurry background,
/// with seeded texture down to single voxels. Values spread over `[0, 1]`.
pub fn flower(grid: &GridSpec, seed: u64) -> Field<f64> {
    let noise = value_noise(grid, seed);
    let texture = 0.3;
    Field::from_fn(*grid, TARGET_UNIT, |i, j, _| {
        let (u, v) = normalized(grid, i, j);
        let r = u.hypot(v);
        let phi = v.atan2(u);
        let background = 0.15 + 0.15 * (u + 1.0) / 2.0 + 0.08 * (2.5 * u).sin() * (1.7 * v + 0.4).cos();
        let petal_edge = 0.22 + 0.5 * (3.0 * phi).cos().abs().powf(0.7);
        let petal = smoothstep(0.0, 0.012, petal_edge - r);
        let shade = 0.9 - 0.45 * (r / petal_edge).powi(2) + 0.05 * (45.0 * r).cos() * (6.0 * phi).sin();
        let center = smoothstep(0.0, 0.01, 0.13 - r);
        let seeds = 0.35 + 0.15 * (70.0 * u).cos() * (70.0 * v).cos();
        let value = background * (1.0 - petal) + shade * petal;
        let value = value * (1.0 - center) + seeds * center;
        (value + texture * noise[j * grid.nx + i]).clamp(0.02, 0.98)
    })
}

pub fn random(grid: &GridSpec, seed: u64) -> Field<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    Field::new(*grid, values, TARGET_UNIT).expect("finite values")
}

/// Bilinear resampling of an image onto the grid, pixel centers aligned with
/// voxel centers, values divided by `maxval`.
pub fn from_image(grid: &GridSpec, img: &pgm::GrayImage) -> Field<f64> {
    let data = img.normalized();
    let (w, h) = (img.width, img.height);
    let at = |x: usize, y: usize| data[y * w + x];
    Field::from_fn(*grid, TARGET_UNIT, |i, j, _| {
        let fx = ((i as f64 + 0.5) * w as f64 / grid.nx as f64 - 0.5).clamp(0.0, (w - 1) as f64);
        let row = grid.ny - 1 - j;
        let fy = ((row as f64 + 0.5) * h as f64 / grid.ny as f64 - 0.5).clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
        let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    })
}

pub fn generate_phantom(grid: &GridSpec, cfg: &TargetConfig) -> Result<Field<f64>> {
    let path = || {
        cfg.path.clone().ok_or_else(|| {
            CliError::config("target", format!("target.kind = {} needs target.path", cfg.kind))
        })
    };
    Ok(match cfg.kind {
        PhantomKind::FourGratings => four_gratings(grid, cfg.periods, cfg.amplitude),
        PhantomKind::BinaryGratings => binary_gratings(grid, cfg.periods),
        PhantomKind::Disk => disk(grid, cfg.radius_cm.unwrap_or(grid.extent_x() / 4.0), cfg.value),
        PhantomKind::GrayscaleImage => from_image(grid, &pgm::read(&path()?)?),
        PhantomKind::Binary3d => binary_3d(grid),
        PhantomKind::Flower => flower(grid, cfg.seed),
        PhantomKind::Random => random(grid, cfg.seed),
        PhantomKind::File => {
            let p = path()?;
            let f: Field<f64> =
                bclp_core::io::read_field(&p).context(|| format!("target {}", p.display()))?;
            if f.grid() != grid {
                return Err(CliError::config(
                    "target.path",
                    format!("{} has grid {:?}, config has {:?}", p.display(), f.grid(), grid),
                ));
            }
            f.with_unit(TARGET_UNIT)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bclp_core::make_grid;
    use std::collections::BTreeSet;

    fn quadrant_values(f: &Field<f64>, q: usize) -> Vec<f64> {
        let g = f.grid();
        let mut out = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (u, v) = normalized(g, i, j);
                if quadrant(u, v).0 == q {
                    out.push(f.at(i, j, 0));
                }
            }
        }
        out
    }

    fn on_lattice(v: f64, bits: u32) -> bool {
        let levels = ((1u64 << bits) - 1) as f64;
        (v * levels - (v * levels).round()).abs() < 1e-9
    }

    #[test]
    fn grating_quadrants_have_their_bit_depths() {
        let g = make_grid(128, 128, 1, 0.002).unwrap();
        let f = four_gratings(&g, 4.0, 1.0);
        let one_bit: BTreeSet<u64> = quadrant_values(&f, 0).iter().map(|v| v.to_bits()).collect();
        assert_eq!(one_bit.len(), 2);
        for (q, &bits) in GRATING_BITS.iter().enumerate() {
            let values = quadrant_values(&f, q);
            assert!(values.iter().all(|&v| on_lattice(v, bits) && (0.0..=1.0).contains(&v)));
            if q > 0 {
                let coarser = GRATING_BITS[q - 1];
                assert!(values.iter().any(|&v| !on_lattice(v, coarser)), "quadrant {q}");
            }
        }
    }

    #[test]
    fn binary_gratings_are_binary() {
        let g = make_grid(64, 64, 1, 0.01).unwrap();
        let f = binary_gratings(&g, 4.0);
        assert!(f.values().iter().all(|&v| v == 0.0 || v == 1.0));
        let ones = f.values().iter().filter(|&&v| v == 1.0).count();
        assert!(ones > g.len() / 3 && ones < 2 * g.len() / 3);
    }

    #[test]
    fn zero_radius_disk_is_empty() {
        let g = make_grid(9, 9, 1, 1.0).unwrap();
        assert!(disk(&g, 0.0, 1.0).values().iter().all(|&v| v == 0.0));
        assert_eq!(disk(&g, 1.2, 0.7).values().iter().filter(|&&v| v == 0.7).count(), 5);
    }

    #[test]
    fn constant_image_gives_constant_field() {
        let g = make_grid(16, 12, 2, 0.1).unwrap();
        let img = pgm::GrayImage { width: 5, height: 7, maxval: 255, pixels: vec![51; 35] };
        let f = from_image(&g, &img);
        assert!(f.values().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn image_orientation_top_row_is_high_y() {
        let g = make_grid(2, 2, 1, 1.0).unwrap();
        let img = pgm::GrayImage { width: 2, height: 2, maxval: 255, pixels: vec![255, 255, 0, 0] };
        let f = from_image(&g, &img);
        assert_eq!(f.at(0, 1, 0), 1.0);
        assert_eq!(f.at(0, 0, 0), 0.0);
    }

    #[test]
    fn solid_stack_changes_along_z() {
        let g = make_grid(24, 24, 20, 0.01).unwrap();
        let f = binary_3d(&g);
        assert!(f.values().iter().all(|&v| v == 0.0 || v == 1.0));
        let count = |k: usize| f.slice(k).iter().filter(|&&v| v == 1.0).count();
        assert_eq!(count(0), 0);
        assert!(count(4) > count(10) && count(10) > count(15) && count(15) > 0);
    }

    #[test]
    fn flower_spans_gray_levels() {
        let g = make_grid(128, 128, 1, 0.002).unwrap();
        let f = flower(&g, 0);
        let (lo, hi) = f.values().iter().fold((1.0f64, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo < 0.25 && hi > 0.85);
    }

    #[test]
    fn random_phantom_follows_seed() {
        let g = make_grid(4, 4, 1, 1.0).unwrap();
        assert_eq!(random(&g, 3), random(&g, 3));
        assert_ne!(random(&g, 3), random(&g, 4));
    }
}
