//! Materialized propagation matrix.
//!
//! Stores `F_rj = w_rj α_act,j` (ray `r`, voxel `j`) once sorted by ray and once
//! sorted by voxel, so both `forward` and `backward` are row-parallel sparse
//! products with a fixed summation order. When the coefficient fields are the
//! same on every z slice a single slice block is shared by all slices.

use rayon::prelude::*;

use super::ray::trace_ray;
use super::{Propagation, Propagator, Sinogram, SinogramSpec};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::scalar::Scalar;

/// Bytes per entry in the memory heuristic: a 2-byte value plus two 4-byte indices.
pub const HEURISTIC_ENTRY_BYTES: u64 = 10;

/// Default ceiling for [`SparseOperator::build`], 4 GiB.
pub const DEFAULT_MAX_MATRIX_BYTES: u64 = 4 << 30;

/// Heuristic matrix size: every sinogram sample couples to one grid line of
/// `line_voxels` voxels.
pub fn memory_estimate_for(n_samples: u64, line_voxels: u64, bytes_per_entry: u64) -> u64 {
    n_samples * line_voxels * bytes_per_entry
}

/// [`memory_estimate_for`] applied to a propagator's full (unshared) problem.
pub fn memory_estimate<T: Scalar>(prop: &Propagator<T>) -> u64 {
    let spec = prop.sinogram_spec();
    memory_estimate_for(spec.len() as u64, prop.grid().nx as u64, HEURISTIC_ENTRY_BYTES)
}

#[derive(Clone, Debug)]
struct Csr<T> {
    ptr: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    #[inline]
    fn row_dot(&self, row: usize, x: &[T]) -> T {
        let (a, b) = (self.ptr[row], self.ptr[row + 1]);
        let mut acc = T::zero();
        for (&i, &v) in self.idx[a..b].iter().zip(&self.val[a..b]) {
            acc += v * x[i as usize];
        }
        acc
    }
}

#[derive(Clone, Debug)]
struct Block<T> {
    /// Rows are rays of one slice (`ρ + n_ρ θ`), columns voxels of one slice.
    by_ray: Csr<T>,
    /// Transpose of `by_ray`.
    by_voxel: Csr<T>,
}

#[derive(Clone, Debug)]
pub struct SparseOperator<T> {
    grid: GridSpec,
    spec: SinogramSpec,
    alpha_act: Field<T>,
    backward_scale: T,
    blocks: Vec<Block<T>>,
    slice_block: Vec<usize>,
}

impl<T: Scalar> SparseOperator<T> {
    /// Traces every ray once and stores the stencils. Refuses with
    /// [`Error::MemoryLimit`] when the storage estimate exceeds `max_bytes`.
    pub fn build(prop: &Propagator<T>, max_bytes: u64) -> Result<Self> {
        let grid = *prop.grid();
        let spec = prop.sinogram_spec().clone();
        let alpha_act = prop.alpha_act().clone();
        let shared = alpha_act.is_z_invariant() && prop.alpha_total().is_z_invariant();
        let n_blocks = if shared { 1 } else { grid.nz };

        let rays_per_slice = spec.n_rho * spec.n_theta;
        // Each sample touches at most two voxels, and a ray has at most
        // max(n_x, n_y) samples. Both orderings store value + index.
        let per_entry = 2 * (std::mem::size_of::<T>() + 4) as u64;
        let worst_entries = rays_per_slice as u64 * 2 * grid.nx.max(grid.ny) as u64;
        let estimate = n_blocks as u64 * worst_entries * per_entry;
        if estimate > max_bytes {
            return Err(Error::MemoryLimit { estimate, limit: max_bytes });
        }
        if grid.slice_len() > u32::MAX as usize || rays_per_slice > u32::MAX as usize {
            return Err(Error::InvalidParameter("slice too large for 32-bit matrix indices".into()));
        }

        let blocks: Vec<Block<T>> = (0..n_blocks).map(|z| build_block(prop, z)).collect();
        let slice_block = (0..grid.nz).map(|z| if shared { 0 } else { z }).collect();
        Ok(Self { grid, spec, alpha_act, backward_scale: T::lit(prop.backward_scale()), blocks, slice_block })
    }

    /// Stored entries counted over all slices, as if no block were shared.
    pub fn nnz(&self) -> usize {
        self.slice_block.iter().map(|&b| self.blocks[b].by_ray.val.len()).sum()
    }

    /// Entries actually held in memory.
    pub fn stored_entries(&self) -> usize {
        self.blocks.iter().map(|b| b.by_ray.val.len()).sum()
    }

    pub fn shares_slices(&self) -> bool {
        self.blocks.len() == 1 && self.grid.nz > 1
    }

    /// `(voxel, sample, value)` entries of the backward matrix `P*`, with
    /// global voxel and sample indices.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let slice = self.grid.slice_len();
        let rays = self.spec.n_rho * self.spec.n_theta;
        let mut out = Vec::with_capacity(self.nnz());
        for (z, &b) in self.slice_block.iter().enumerate() {
            let csr = &self.blocks[b].by_ray;
            for r in 0..rays {
                for e in csr.ptr[r]..csr.ptr[r + 1] {
                    out.push((
                        z * slice + csr.idx[e] as usize,
                        z * rays + r,
                        csr.val[e] * self.backward_scale,
                    ));
                }
            }
        }
        out
    }
}

fn build_block<T: Scalar>(prop: &Propagator<T>, z: usize) -> Block<T> {
    let grid = prop.grid();
    let spec = prop.sinogram_spec();
    let slice = grid.slice_len();
    let act = &prop.alpha_act().values()[z * slice..(z + 1) * slice];
    let alpha = prop.alpha_total_slice(z);
    let n_rays = spec.n_rho * spec.n_theta;

    let rows: Vec<Vec<(u32, T)>> = (0..n_rays)
        .into_par_iter()
        .map(|r| {
            let mut row = Vec::new();
            trace_ray(grid, prop.ray(r % spec.n_rho, r / spec.n_rho), alpha, |v, w| {
                let value = T::lit(w) * act[v];
                if value != T::zero() {
                    row.push((v as u32, value));
                }
            });
            row
        })
        .collect();

    let mut ptr = Vec::with_capacity(n_rays + 1);
    ptr.push(0);
    let nnz: usize = rows.iter().map(Vec::len).sum();
    let mut idx = Vec::with_capacity(nnz);
    let mut val = Vec::with_capacity(nnz);
    for row in &rows {
        for &(v, w) in row {
            idx.push(v);
            val.push(w);
        }
        ptr.push(idx.len());
    }
    let by_ray = Csr { ptr, idx, val };
    let by_voxel = transpose(&by_ray, slice);
    Block { by_ray, by_voxel }
}

/// Counting-sort transpose; entries within a row keep ascending column order.
fn transpose<T: Scalar>(m: &Csr<T>, n_cols: usize) -> Csr<T> {
    let n_rows = m.ptr.len() - 1;
    let mut counts = vec![0usize; n_cols + 1];
    for &c in &m.idx {
        counts[c as usize + 1] += 1;
    }
    for i in 0..n_cols {
        counts[i + 1] += counts[i];
    }
    let ptr = counts.clone();
    let mut next = counts;
    let mut idx = vec![0u32; m.idx.len()];
    let mut val = vec![T::zero(); m.val.len()];
    for r in 0..n_rows {
        for e in m.ptr[r]..m.ptr[r + 1] {
            let c = m.idx[e] as usize;
            idx[next[c]] = r as u32;
            val[next[c]] = m.val[e];
            next[c] += 1;
        }
    }
    Csr { ptr, idx, val }
}

impl<T: Scalar> Propagation<T> for SparseOperator<T> {
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
        if a.grid() != &self.grid {
            return Err(Error::GridMismatch(format!("field {:?} vs operator {:?}", a.grid(), self.grid)));
        }
        let slice = self.grid.slice_len();
        let rays = self.spec.n_rho * self.spec.n_theta;
        let mut out = vec![T::zero(); self.spec.len()];
        out.par_chunks_mut(rays).enumerate().for_each(|(z, dst)| {
            let csr = &self.blocks[self.slice_block[z]].by_ray;
            let src = &a.values()[z * slice..(z + 1) * slice];
            dst.par_iter_mut().enumerate().for_each(|(r, d)| *d = csr.row_dot(r, src));
        });
        Ok(Sinogram::from_parts(self.spec.clone(), out))
    }

    fn backward(&self, g: &Sinogram<T>) -> Result<Field<T>> {
        g.check_spec(&self.spec)?;
        let slice = self.grid.slice_len();
        let rays = self.spec.n_rho * self.spec.n_theta;
        let scale = self.backward_scale;
        let mut values = vec![T::zero(); self.grid.len()];
        values.par_chunks_mut(slice).enumerate().for_each(|(z, dst)| {
            let csr = &self.blocks[self.slice_block[z]].by_voxel;
            let src = &g.values()[z * rays..(z + 1) * rays];
            dst.par_iter_mut().enumerate().for_each(|(v, d)| *d = csr.row_dot(v, src) * scale);
        });
        Ok(Field::from_parts(self.grid, values, "J/cm^3"))
    }
}
