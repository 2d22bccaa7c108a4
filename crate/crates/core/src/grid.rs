//! Regular tomogram grids and the scalar fields sampled on them.
//!
//! Voxel `(i, j, k)` has its center at `((i + 0.5 - n_x/2)·h, (j + 0.5 - n_y/2)·h,
//! (k + 0.5 - n_z/2)·h)` with `h` the isotropic voxel size, so the grid is
//! centered on the origin. Values are stored row-major with `x` fastest, then
//! `y`, then `z`.

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Isotropic voxel edge length in cm.
    pub voxel_size: f64,
}

/// Validated grid constructor.
pub fn make_grid(nx: usize, ny: usize, nz: usize, voxel_size: f64) -> Result<GridSpec> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidGrid(format!("voxel counts must be positive, got {nx}x{ny}x{nz}")));
    }
    if !(voxel_size.is_finite() && voxel_size > 0.0) {
        return Err(Error::InvalidGrid(format!("voxel size must be positive and finite, got {voxel_size}")));
    }
    Ok(GridSpec { nx, ny, nz, voxel_size })
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Voxels in one z slice.
    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn extent_x(&self) -> f64 {
        self.nx as f64 * self.voxel_size
    }

    pub fn extent_y(&self) -> f64 {
        self.ny as f64 * self.voxel_size
    }

    pub fn extent_z(&self) -> f64 {
        self.nz as f64 * self.voxel_size
    }

    /// Volume of one voxel in cm³. A single-slice grid is a slab one voxel thick.
    pub fn voxel_volume(&self) -> f64 {
        self.voxel_size.powi(3)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    /// Inverse of [`GridSpec::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / self.slice_len();
        (i, j, k)
    }

    #[inline]
    pub fn center_x(&self, i: usize) -> f64 {
        (i as f64 + 0.5 - self.nx as f64 / 2.0) * self.voxel_size
    }

    #[inline]
    pub fn center_y(&self, j: usize) -> f64 {
        (j as f64 + 0.5 - self.ny as f64 / 2.0) * self.voxel_size
    }

    #[inline]
    pub fn center_z(&self, k: usize) -> f64 {
        (k as f64 + 0.5 - self.nz as f64 / 2.0) * self.voxel_size
    }
}

/// A scalar per voxel on a [`GridSpec`], with a free-text unit label.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: GridSpec,
    values: Vec<T>,
    unit: String,
}

impl<T: Scalar> Field<T> {
    /// Checks the length and finiteness of `values`.
    pub fn new(grid: GridSpec, values: Vec<T>, unit: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} voxels",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at voxel {pos}")));
        }
        Ok(Self { grid, values, unit: unit.into() })
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<T>, unit: impl Into<String>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, unit: unit.into() }
    }

    pub fn filled(grid: GridSpec, value: T, unit: impl Into<String>) -> Self {
        Self::from_parts(grid, vec![value; grid.len()], unit)
    }

    pub fn zeros(grid: GridSpec, unit: impl Into<String>) -> Self {
        Self::filled(grid, T::zero(), unit)
    }

    /// Builds a field from a function of voxel indices `(i, j, k)`.
    pub fn from_fn(
        grid: GridSpec,
        unit: impl Into<String>,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    values.push(f(i, j, k));
                }
            }
        }
        Self::from_parts(grid, values, unit)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
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

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Errors unless `other` lives on the same grid.
    pub fn check_same_grid(&self, other: &Field<T>, what: &str) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{what}: {:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect(), self.unit.clone())
    }

    pub fn zip_map(&self, other: &Field<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_grid(other, "zip_map")?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_parts(self.grid, values, self.unit.clone()))
    }

    pub fn add(&self, other: &Field<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field<T>) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// Values of z slice `k`.
    pub fn slice(&self, k: usize) -> &[T] {
        let n = self.grid.slice_len();
        &self.values[k * n..(k + 1) * n]
    }

    /// True when every z slice holds the same values.
    pub fn is_z_invariant(&self) -> bool {
        let first = self.slice(0);
        (1..self.grid.nz).all(|k| self.slice(k) == first)
    }

    /// Sum of values times the voxel volume.
    pub fn integral(&self) -> T {
        pairwise_sum(&self.values) * T::lit(self.grid.voxel_volume())
    }
}

/// Indicator of voxels whose center lies inside the circle inscribed in the
/// x-y square, replicated along z.
pub fn inscribed_disk_mask<T: Scalar>(grid: &GridSpec) -> Result<Field<T>> {
    if grid.nx != grid.ny {
        return Err(Error::InvalidGrid(format!(
            "inscribed disk needs a square x-y grid, got {}x{}",
            grid.nx, grid.ny
        )));
    }
    let radius = grid.extent_x().min(grid.extent_y()) / 2.0;
    Ok(disk_mask(grid, radius))
}

/// Indicator of voxel centers within `radius` cm of the rotation axis.
pub fn disk_mask<T: Scalar>(grid: &GridSpec, radius: f64) -> Field<T> {
    let r2 = radius * radius;
    Field::from_fn(*grid, "1", |i, j, _| {
        let (x, y) = (grid.center_x(i), grid.center_y(j));
        if x * x + y * y <= r2 {
            T::one()
        } else {
            T::zero()
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldStats<T> {
    pub min: T,
    pub max: T,
    pub mean: T,
    /// Euclidean norm of the value vector (no volume weighting).
    pub l2_norm: T,
}

pub fn field_stats<T: Scalar>(field: &Field<T>) -> FieldStats<T> {
    let v = field.values();
    let min = v.iter().copied().fold(T::infinity(), T::min);
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let n = T::from_usize(v.len()).unwrap();
    let mean = pairwise_sum(v) / n;
    let squares: Vec<T> = v.iter().map(|&x| x * x).collect();
    FieldStats { min, max, mean, l2_norm: pairwise_sum(&squares).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_extents() {
        let g = make_grid(512, 512, 1, 1.0 / 500.0).unwrap();
        assert!((g.extent_x() - 1.024).abs() < 1e-12);
        let g = make_grid(1, 1, 1, 1.0).unwrap();
        assert_eq!(g.extent_x(), 1.0);
        let g = make_grid(128, 128, 1, 0.0078125).unwrap();
        assert_eq!(g.extent_y(), 1.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(0, 1, 1, 1.0).is_err());
        assert!(make_grid(1, 1, 1, 0.0).is_err());
        assert!(make_grid(1, 1, 1, -2.0).is_err());
        assert!(make_grid(1, 1, 1, f64::NAN).is_err());
    }

    #[test]
    fn disk_mask_small_grids() {
        // 2x2: centers sit at 0.707 voxel from the axis, inside the radius of 1 voxel.
        let g = make_grid(2, 2, 1, 1.0).unwrap();
        let m = inscribed_disk_mask::<f64>(&g).unwrap();
        assert_eq!(m.values(), &[1.0, 1.0, 1.0, 1.0]);

        let g = make_grid(1, 1, 1, 0.3).unwrap();
        let m = inscribed_disk_mask::<f64>(&g).unwrap();
        assert_eq!(m.values(), &[1.0]);

        let g = make_grid(3, 2, 1, 1.0).unwrap();
        assert!(inscribed_disk_mask::<f64>(&g).is_err());
    }

    #[test]
    fn disk_mask_area_fraction() {
        let g = make_grid(512, 512, 1, 0.002).unwrap();
        let m = inscribed_disk_mask::<f64>(&g).unwrap();
        let frac = m.values().iter().sum::<f64>() / g.len() as f64;
        let expect = std::f64::consts::FRAC_PI_4;
        assert!((frac - expect).abs() / expect < 0.01, "{frac}");
    }

    #[test]
    fn disk_mask_replicated_along_z() {
        let g = make_grid(8, 8, 3, 0.1).unwrap();
        let m = inscribed_disk_mask::<f32>(&g).unwrap();
        assert!(m.is_z_invariant());
    }

    #[test]
    fn disk_mask_rotation_invariant() {
        for n in [4usize, 7, 16, 33] {
            let g = make_grid(n, n, 1, 1.0).unwrap();
            let m = inscribed_disk_mask::<f64>(&g).unwrap();
            for j in 0..n {
                for i in 0..n {
                    // 90 degree rotation: (i, j) -> (n-1-j, i)
                    assert_eq!(m.at(i, j, 0), m.at(n - 1 - j, i, 0));
                }
            }
        }
    }

    #[test]
    fn stats_examples() {
        let g = make_grid(4, 1, 1, 1.0).unwrap();
        let s = field_stats(&Field::filled(g, 0.5f64, ""));
        assert_eq!((s.min, s.max, s.mean, s.l2_norm), (0.5, 0.5, 0.5, 1.0));

        let f = Field::new(g, vec![0.0f64, 1.0, 1.0, 0.0], "").unwrap();
        let s = field_stats(&f);
        assert_eq!((s.min, s.max, s.mean), (0.0, 1.0, 0.5));
        assert!((s.l2_norm - 2f64.sqrt()).abs() < 1e-15);

        let s = field_stats(&Field::<f64>::zeros(g, ""));
        assert_eq!((s.min, s.max, s.mean, s.l2_norm), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn field_new_validates() {
        let g = make_grid(2, 1, 1, 1.0).unwrap();
        assert!(Field::new(g, vec![1.0f64], "").is_err());
        assert!(Field::new(g, vec![1.0f64, f64::INFINITY], "").is_err());
        let other = make_grid(1, 2, 1, 1.0).unwrap();
        let a = Field::<f64>::zeros(g, "");
        let b = Field::<f64>::zeros(other, "");
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = make_grid(3, 4, 5, 1.0).unwrap();
        for idx in 0..g.len() {
            let (i, j, k) = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    proptest! {
        #[test]
        fn field_arithmetic_commutes(vals in proptest::collection::vec(-1e3f64..1e3, 6),
                                     other in proptest::collection::vec(-1e3f64..1e3, 6)) {
            let g = make_grid(3, 2, 1, 1.0).unwrap();
            let a = Field::new(g, vals, "").unwrap();
            let b = Field::new(g, other, "").unwrap();
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
            let twice = a.scale(2.0);
            prop_assert_eq!(twice, a.add(&a).unwrap());
        }
    }
}
