//! Ray stencils for one z slice.
//!
//! A ray is stepped one voxel at a time along whichever grid axis is closer to
//! its direction, and linearly interpolated across the other axis (Joseph's
//! method). Every sample contributes to at most two voxels. The attenuation
//! seen by a sample is `exp(-(τ + α Δs / 2))`, where `τ` is the optical depth
//! accumulated over the preceding samples, so a uniform medium gives the
//! midpoint rule for `exp(-∫α ds)`.

use crate::grid::GridSpec;

const SNAP: f64 = 1e-9;

/// In-plane ray geometry: `ρ n + t d` with `n = (cos θ, sin θ)` and travel
/// direction `d = (-sin θ, cos θ)`.
#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub rho: f64,
    pub theta: f64,
}

/// Calls `emit(voxel, weight)` for each nonzero stencil entry of `ray`, where
/// `voxel` indexes the slice (`i + n_x j`) and `weight = Δs · attenuation ·
/// interpolation weight`. `alpha_total` holds the slice's attenuation
/// coefficients in 1/cm; entries are emitted in travel order.
pub fn trace_ray(grid: &GridSpec, ray: Ray, alpha_total: &[f64], mut emit: impl FnMut(usize, f64)) {
    let (sin, cos) = ray.theta.sin_cos();
    let (nx, ny) = (grid.nx, grid.ny);
    let h = grid.voxel_size;
    let (px, py) = (ray.rho * cos, ray.rho * sin);
    let (dx, dy) = (-sin, cos);

    // Major axis: the one the ray advances along by exactly one voxel per sample.
    let y_major = dy.abs() >= dx.abs();
    let (n_major, n_minor, d_major, d_minor, p_major, p_minor) =
        if y_major { (ny, nx, dy, dx, py, px) } else { (nx, ny, dx, dy, px, py) };
    let ds = h / d_major.abs();
    let slope = d_minor / d_major;
    let minor_offset = n_minor as f64 / 2.0 - 0.5;
    let major_half = n_major as f64 / 2.0;
    let voxel = |major: usize, minor: usize| {
        if y_major {
            minor + nx * major
        } else {
            major + nx * minor
        }
    };

    let mut tau = 0.0f64;
    let mut stencil: [(usize, f64); 2] = [(0, 0.0); 2];
    for step in 0..n_major {
        let m = if d_major > 0.0 { step } else { n_major - 1 - step };
        let c_major = (m as f64 + 0.5 - major_half) * h;
        let c_minor = p_minor + (c_major - p_major) * slope;
        let u = c_minor / h + minor_offset;
        let mut u0 = u.floor();
        let mut frac = u - u0;
        // Snap rounding noise so axis-aligned rays hit exactly one voxel.
        if frac > 1.0 - SNAP {
            u0 += 1.0;
            frac = 0.0;
        } else if frac < SNAP {
            frac = 0.0;
        }
        let mut count = 0;
        if u0 >= 0.0 && u0 < n_minor as f64 && frac < 1.0 {
            stencil[count] = (voxel(m, u0 as usize), 1.0 - frac);
            count += 1;
        }
        let u1 = u0 + 1.0;
        if u1 >= 0.0 && u1 < n_minor as f64 && frac > 0.0 {
            stencil[count] = (voxel(m, u1 as usize), frac);
            count += 1;
        }
        if count == 0 {
            continue;
        }
        let alpha: f64 = stencil[..count].iter().map(|&(v, w)| w * alpha_total[v]).sum();
        let att = (-(tau + 0.5 * alpha * ds)).exp();
        tau += alpha * ds;
        for &(v, w) in &stencil[..count] {
            emit(v, ds * att * w);
        }
    }
}
