//! Parallel-beam attenuated propagation between sinogram and tomogram space.
//!
//! `backward` maps an areal-dose sinogram `g` to volumetric dose
//!
//! ```text
//! f_j = α_act,j · (ΔS / ΔV) · Σ_r w_rj g_r
//! ```
//!
//! and `forward` is its exact adjoint `(P a)_r = Σ_j w_rj α_act,j a_j` under the
//! quadrature-weighted inner products `⟨a, b⟩_T = Σ a b ΔV` and
//! `⟨g, h⟩_S = Σ g h ΔS`, with `ΔV` the voxel volume and `ΔS = Δρ Δθ Δz`.
//! Stencil weights `w_rj` come from [`ray::trace_ray`]. Slices along `z` are
//! independent.

mod matrix;
pub mod ray;

pub use matrix::{
    memory_estimate, memory_estimate_for, SparseOperator, DEFAULT_MAX_MATRIX_BYTES, HEURISTIC_ENTRY_BYTES,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{inscribed_disk_mask, Field, GridSpec};
use crate::scalar::{pairwise_sum, Scalar};
use ray::{trace_ray, Ray};

/// Attenuation and absorption coefficient used when none is configured, in 1/cm.
pub const DEFAULT_ALPHA: f64 = 0.001;

/// Sampling of sinogram space. Angles are uniformly spaced.
#[derive(Clone, Debug, PartialEq)]
pub struct SinogramSpec {
    pub n_rho: usize,
    pub n_theta: usize,
    pub n_z: usize,
    /// First gantry angle in radians.
    pub angle_start: f64,
    /// Angular spacing in radians.
    pub angle_step: f64,
    /// Transverse sample spacing in cm; `n_rho · rho_step` equals the grid's x extent.
    pub rho_step: f64,
    /// Axial sample spacing in cm (the voxel size).
    pub z_step: f64,
}

impl SinogramSpec {
    /// `n_theta` angles spread uniformly over `coverage` radians starting at
    /// `angle_start`; the endpoint `angle_start + coverage` is excluded.
    pub fn uniform(
        grid: &GridSpec,
        n_rho: usize,
        n_theta: usize,
        angle_start: f64,
        coverage: f64,
    ) -> Result<Self> {
        if n_rho == 0 || n_theta == 0 {
            return Err(Error::InvalidSinogram(format!(
                "sample counts must be positive, got n_rho={n_rho}, n_theta={n_theta}"
            )));
        }
        if !(coverage.is_finite() && coverage > 0.0) {
            return Err(Error::InvalidSinogram(format!("angular coverage must be positive, got {coverage}")));
        }
        Self::with_step(grid, n_rho, n_theta, angle_start, coverage / n_theta as f64)
    }

    /// Full 360° coverage starting at 0 with `n_rho = n_x`.
    pub fn full_circle(grid: &GridSpec, n_theta: usize) -> Result<Self> {
        Self::uniform(grid, grid.nx, n_theta, 0.0, std::f64::consts::TAU)
    }

    /// Explicit start and step, as stored in sinogram headers.
    pub fn with_step(
        grid: &GridSpec,
        n_rho: usize,
        n_theta: usize,
        angle_start: f64,
        angle_step: f64,
    ) -> Result<Self> {
        let tau = std::f64::consts::TAU;
        if n_rho == 0 || n_theta == 0 {
            return Err(Error::InvalidSinogram(format!(
                "sample counts must be positive, got n_rho={n_rho}, n_theta={n_theta}"
            )));
        }
        if !(angle_start.is_finite() && (0.0..tau).contains(&angle_start)) {
            return Err(Error::InvalidSinogram(format!("first angle {angle_start} rad is outside [0, 2π)")));
        }
        if !(angle_step.is_finite() && angle_step > 0.0) {
            return Err(Error::InvalidSinogram(format!("angle step must be positive, got {angle_step}")));
        }
        let last = angle_start + (n_theta - 1) as f64 * angle_step;
        if last >= tau * (1.0 + 1e-12) {
            return Err(Error::InvalidSinogram(format!("last angle {last} rad is not below 2π")));
        }
        Ok(Self {
            n_rho,
            n_theta,
            n_z: grid.nz,
            angle_start,
            angle_step,
            rho_step: grid.extent_x() / n_rho as f64,
            z_step: grid.voxel_size,
        })
    }

    pub fn len(&self) -> usize {
        self.n_rho * self.n_theta * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn angle(&self, t: usize) -> f64 {
        self.angle_start + t as f64 * self.angle_step
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_theta).map(|t| self.angle(t)).collect()
    }

    /// Transverse offset of sample `i`, centered on the rotation axis.
    pub fn rho(&self, i: usize) -> f64 {
        (i as f64 + 0.5 - self.n_rho as f64 / 2.0) * self.rho_step
    }

    /// Quadrature weight `Δρ Δθ Δz` of one sample.
    pub fn sample_measure(&self) -> f64 {
        self.rho_step * self.angle_step * self.z_step
    }

    #[inline]
    pub fn index(&self, rho: usize, theta: usize, z: usize) -> usize {
        rho + self.n_rho * (theta + self.n_theta * z)
    }

    /// Errors unless the spec was derived from `grid`.
    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        let rho_extent = self.n_rho as f64 * self.rho_step;
        let ok = self.n_z == grid.nz
            && (rho_extent - grid.extent_x()).abs() <= 1e-9 * grid.extent_x()
            && (self.z_step - grid.voxel_size).abs() <= 1e-12 * grid.voxel_size;
        if ok {
            Ok(())
        } else {
            Err(Error::SpecMismatch(format!("sinogram {self:?} does not match grid {grid:?}")))
        }
    }
}

/// Areal dose per sinogram sample, `ρ` fastest, then `θ`, then `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram<T> {
    spec: SinogramSpec,
    values: Vec<T>,
}

impl<T: Scalar> Sinogram<T> {
    pub fn new(spec: SinogramSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::SpecMismatch(format!(
                "sinogram has {} values, spec expects {}",
                values.len(),
                spec.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sinogram value at sample {pos}")));
        }
        Ok(Self { spec, values })
    }

    pub(crate) fn from_parts(spec: SinogramSpec, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn filled(spec: SinogramSpec, value: T) -> Self {
        let n = spec.len();
        Self::from_parts(spec, vec![value; n])
    }

    pub fn zeros(spec: SinogramSpec) -> Self {
        Self::filled(spec, T::zero())
    }

    pub fn spec(&self) -> &SinogramSpec {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_spec(&self, spec: &SinogramSpec) -> Result<()> {
        if &self.spec != spec {
            return Err(Error::SpecMismatch(format!("{:?} vs {:?}", self.spec, spec)));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.spec.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Sinogram<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_spec(&other.spec)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_parts(self.spec.clone(), values))
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: T, other: &Sinogram<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a + s * b)
    }

    /// Quadrature-weighted inner product `Σ g h ΔS`.
    pub fn inner(&self, other: &Sinogram<T>) -> Result<T> {
        self.check_spec(&other.spec)?;
        let prods: Vec<T> = self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).collect();
        Ok(pairwise_sum(&prods) * T::lit(self.spec.sample_measure()))
    }

    /// Norm induced by [`Sinogram::inner`].
    pub fn norm(&self) -> T {
        let sq: Vec<T> = self.values.iter().map(|&a| a * a).collect();
        (pairwise_sum(&sq) * T::lit(self.spec.sample_measure())).sqrt()
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// One `(θ, z)` row of `n_rho` samples.
    pub fn row(&self, theta: usize, z: usize) -> &[T] {
        let start = self.spec.index(0, theta, z);
        &self.values[start..start + self.spec.n_rho]
    }
}

/// Quadrature-weighted tomogram inner product `Σ a b ΔV`.
pub fn field_inner<T: Scalar>(a: &Field<T>, b: &Field<T>) -> Result<T> {
    a.check_same_grid(b, "inner product")?;
    let prods: Vec<T> = a.values().iter().zip(b.values()).map(|(&x, &y)| x * y).collect();
    Ok(pairwise_sum(&prods) * T::lit(a.grid().voxel_volume()))
}

/// Norm induced by [`field_inner`].
pub fn field_norm<T: Scalar>(a: &Field<T>) -> T {
    let sq: Vec<T> = a.values().iter().map(|&x| x * x).collect();
    (pairwise_sum(&sq) * T::lit(a.grid().voxel_volume())).sqrt()
}

/// A linear propagator pair between sinogram and tomogram space.
pub trait Propagation<T: Scalar>: Sync {
    fn grid(&self) -> &GridSpec;
    fn sinogram_spec(&self) -> &SinogramSpec;
    /// Absorption of the active species, `α_act` in 1/cm.
    fn alpha_act(&self) -> &Field<T>;
    /// `P`: tomogram field to sinogram.
    fn forward(&self, a: &Field<T>) -> Result<Sinogram<T>>;
    /// `P*`: sinogram to volumetric dose.
    fn backward(&self, g: &Sinogram<T>) -> Result<Field<T>>;
}

/// Largest eigenvalue of `P P*` by power iteration from a constant sinogram.
/// Useful to express step sizes independently of grid and absorption scale.
pub fn operator_norm_sq<T: Scalar, P: Propagation<T> + ?Sized>(prop: &P, iters: usize) -> Result<T> {
    let mut v = Sinogram::filled(prop.sinogram_spec().clone(), T::one());
    let mut lambda = T::zero();
    for _ in 0..iters.max(1) {
        let w = prop.forward(&prop.backward(&v)?)?;
        let norm = w.norm();
        if norm == T::zero() {
            return Ok(T::zero());
        }
        lambda = norm / v.norm();
        v = w.scale(T::one() / norm);
    }
    Ok(lambda)
}

/// Angles accumulated into one partial dose buffer by [`Propagator::backward`].
/// Partial buffers are summed in a fixed order, so the result does not depend
/// on the number of threads.
const BACKWARD_ANGLE_CHUNK: usize = 8;

/// Ray-traced propagator.
#[derive(Clone, Debug)]
pub struct Propagator<T> {
    grid: GridSpec,
    spec: SinogramSpec,
    alpha_total: Field<T>,
    alpha_act: Field<T>,
    alpha_total_f64: Vec<f64>,
}

impl<T: Scalar> Propagator<T> {
    pub fn new(spec: SinogramSpec, alpha_total: Field<T>, alpha_act: Field<T>) -> Result<Self> {
        let grid = *alpha_total.grid();
        alpha_total.check_same_grid(&alpha_act, "attenuation vs absorption field")?;
        spec.check_grid(&grid)?;
        for (name, f) in [("alpha_total", &alpha_total), ("alpha_act", &alpha_act)] {
            if let Some(pos) = f.values().iter().position(|&v| !(v >= T::zero()) || !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, voxel {pos} is {}",
                    f.values()[pos]
                )));
            }
        }
        let alpha_total_f64 = alpha_total.values().iter().map(|v| v.as_f64()).collect();
        Ok(Self { grid, spec, alpha_total, alpha_act, alpha_total_f64 })
    }

    /// Both coefficients equal to `alpha` on the inscribed disk and zero outside.
    pub fn with_disk_attenuation(grid: &GridSpec, spec: SinogramSpec, alpha: f64) -> Result<Self> {
        let field = inscribed_disk_mask::<T>(grid)?.scale(T::lit(alpha)).with_unit("1/cm");
        Self::new(spec, field.clone(), field)
    }

    /// Uniform coefficients over the whole grid.
    pub fn with_uniform(
        grid: &GridSpec,
        spec: SinogramSpec,
        alpha_total: f64,
        alpha_act: f64,
    ) -> Result<Self> {
        Self::new(
            spec,
            Field::filled(*grid, T::lit(alpha_total), "1/cm"),
            Field::filled(*grid, T::lit(alpha_act), "1/cm"),
        )
    }

    pub fn alpha_total(&self) -> &Field<T> {
        &self.alpha_total
    }

    /// `ΔS / ΔV`, the factor converting summed areal dose to volumetric dose.
    pub fn backward_scale(&self) -> f64 {
        self.spec.sample_measure() / self.grid.voxel_volume()
    }

    pub(crate) fn alpha_total_slice(&self, z: usize) -> &[f64] {
        let n = self.grid.slice_len();
        &self.alpha_total_f64[z * n..(z + 1) * n]
    }

    pub(crate) fn ray(&self, rho: usize, theta: usize) -> Ray {
        Ray { rho: self.spec.rho(rho), theta: self.spec.angle(theta) }
    }

    /// Materializes the operator; see [`SparseOperator::build`].
    pub fn build_matrix(&self, max_bytes: u64) -> Result<SparseOperator<T>> {
        SparseOperator::build(self, max_bytes)
    }

    fn check_field(&self, a: &Field<T>) -> Result<()> {
        if a.grid() != &self.grid {
            return Err(Error::GridMismatch(format!("field {:?} vs propagator {:?}", a.grid(), self.grid)));
        }
        Ok(())
    }
}

impl<T: Scalar> Propagation<T> for Propagator<T> {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn sinogram_spec(&self) -> &SinogramSpec {
        &self.spec
    }

    fn alpha_act(&self) -> &Field<T> {
        &self.alpha_act
    }

    fn forward(&self, a: &Field<T>) -> Result<Sinogram<T>> {
        self.check_field(a)?;
        let spec = &self.spec;
        let slice = self.grid.slice_len();
        // Absorbed field α_act · a, sampled along every ray.
        let weighted: Vec<T> = a.values().iter().zip(self.alpha_act.values()).map(|(&x, &w)| x * w).collect();
        let mut out = vec![T::zero(); spec.len()];
        out.par_chunks_mut(spec.n_rho).enumerate().for_each(|(row, dst)| {
            let (theta, z) = (row % spec.n_theta, row / spec.n_theta);
            let src = &weighted[z * slice..(z + 1) * slice];
            let alpha = self.alpha_total_slice(z);
            for (rho, d) in dst.iter_mut().enumerate() {
                let mut acc = T::zero();
                trace_ray(&self.grid, self.ray(rho, theta), alpha, |v, w| {
                    acc += T::lit(w) * src[v];
                });
                *d = acc;
            }
        });
        Ok(Sinogram::from_parts(spec.clone(), out))
    }

    fn backward(&self, g: &Sinogram<T>) -> Result<Field<T>> {
        g.check_spec(&self.spec)?;
        let spec = &self.spec;
        let slice = self.grid.slice_len();
        let n_chunks = spec.n_theta.div_ceil(BACKWARD_ANGLE_CHUNK);
        let scale = T::lit(self.backward_scale());
        let mut values = vec![T::zero(); self.grid.len()];
        values.par_chunks_mut(slice).enumerate().for_each(|(z, dst)| {
            let alpha = self.alpha_total_slice(z);
            let partials: Vec<Vec<T>> = (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let mut acc = vec![T::zero(); slice];
                    let end = ((c + 1) * BACKWARD_ANGLE_CHUNK).min(spec.n_theta);
                    for theta in c * BACKWARD_ANGLE_CHUNK..end {
                        let row = g.row(theta, z);
                        for (rho, &gv) in row.iter().enumerate() {
                            if gv == T::zero() {
                                continue;
                            }
                            trace_ray(&self.grid, self.ray(rho, theta), alpha, |v, w| {
                                acc[v] += T::lit(w) * gv;
                            });
                        }
                    }
                    acc
                })
                .collect();
            for part in &partials {
                for (d, &p) in dst.iter_mut().zip(part) {
                    *d += p;
                }
            }
            let act = &self.alpha_act.values()[z * slice..(z + 1) * slice];
            for (d, &a) in dst.iter_mut().zip(act) {
                *d *= a * scale;
            }
        });
        Ok(Field::from_parts(self.grid, values, "J/cm^3"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn spec_validation() {
        let g = make_grid(8, 8, 1, 0.1).unwrap();
        assert!(SinogramSpec::uniform(&g, 0, 4, 0.0, 1.0).is_err());
        assert!(SinogramSpec::uniform(&g, 8, 0, 0.0, 1.0).is_err());
        assert!(SinogramSpec::uniform(&g, 8, 4, -0.1, 1.0).is_err());
        assert!(SinogramSpec::uniform(&g, 8, 4, 3.0, 7.0).is_err());
        let s = SinogramSpec::full_circle(&g, 360).unwrap();
        assert!((s.angle(359) - (359f64).to_radians()).abs() < 1e-12);
        assert!((s.rho_step - 0.1).abs() < 1e-15);
        let s = SinogramSpec::uniform(&g, 16, 10, 0.5, std::f64::consts::PI).unwrap();
        assert!((s.rho(0) + 0.375).abs() < 1e-12);
    }

    #[test]
    fn zero_absorption_gives_zero_dose() {
        let g = make_grid(8, 8, 1, 0.1).unwrap();
        let s = SinogramSpec::full_circle(&g, 12).unwrap();
        let p = Propagator::<f64>::with_uniform(&g, s.clone(), 0.0, 0.0).unwrap();
        let f = p.backward(&Sinogram::filled(s, 1.0)).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_negative_alpha() {
        let g = make_grid(4, 4, 1, 0.1).unwrap();
        let s = SinogramSpec::full_circle(&g, 4).unwrap();
        assert!(Propagator::<f64>::with_uniform(&g, s, -0.1, 0.0).is_err());
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let g = make_grid(4, 4, 1, 0.1).unwrap();
        let s = SinogramSpec::full_circle(&g, 4).unwrap();
        let p = Propagator::<f64>::with_uniform(&g, s, 0.0, 1.0).unwrap();
        let other = make_grid(5, 5, 1, 0.1).unwrap();
        assert!(p.forward(&Field::zeros(other, "")).is_err());
        let s2 = SinogramSpec::full_circle(&g, 5).unwrap();
        assert!(p.backward(&Sinogram::zeros(s2)).is_err());
    }

    #[test]
    fn uniform_sinogram_gives_full_turn_dose() {
        // At the center every angle contributes Δs = h with no attenuation.
        let g = make_grid(16, 16, 1, 0.1).unwrap();
        let s = SinogramSpec::full_circle(&g, 64).unwrap();
        let p = Propagator::<f64>::with_uniform(&g, s.clone(), 0.0, 2.0).unwrap();
        let f = p.backward(&Sinogram::filled(s, 1.0)).unwrap();
        let center = f.at(8, 8, 0);
        let expect = 2.0 * std::f64::consts::TAU;
        assert!((center - expect).abs() / expect < 0.05, "{center}");
    }
}
