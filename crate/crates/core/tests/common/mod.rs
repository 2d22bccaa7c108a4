#![allow(dead_code)]

use bclp_core::{make_grid, Field, GridSpec, Propagator, Sinogram, SinogramSpec};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(grid: GridSpec, rng: &mut impl Rng, lo: f64, hi: f64) -> Field<f64> {
    let values = (0..grid.len()).map(|_| rng.gen_range(lo..hi)).collect();
    Field::new(grid, values, "").unwrap()
}

pub fn random_sinogram(spec: &SinogramSpec, rng: &mut impl Rng, lo: f64, hi: f64) -> Sinogram<f64> {
    let values = (0..spec.len()).map(|_| rng.gen_range(lo..hi)).collect();
    Sinogram::new(spec.clone(), values).unwrap()
}

/// Square single-slice grid one centimeter across.
pub fn unit_grid(n: usize) -> GridSpec {
    make_grid(n, n, 1, 1.0 / n as f64).unwrap()
}

/// Disk-supported attenuation of `alpha` per cm on both coefficients.
pub fn disk_propagator(grid: &GridSpec, n_theta: usize, alpha: f64) -> Propagator<f64> {
    let spec = SinogramSpec::full_circle(grid, n_theta).unwrap();
    Propagator::with_disk_attenuation(grid, spec, alpha).unwrap()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
