//! Initial sinograms: a filtered-backprojection style estimate and an
//! iterative least-squares estimate.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::bclp::ProblemSpec;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::optimize::{project_feasible, FeasibleSet};
use crate::propagation::{field_inner, field_norm, Propagation, Sinogram, SinogramSpec};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FilterKind {
    /// Plain ramp `|ν|`.
    #[default]
    RamLak,
    /// Ramp tapered by `sinc(ν Δρ)`.
    SheppLogan,
}

/// Ramp filter acting on rows zero-padded to a power of two.
#[derive(Clone)]
pub struct RampFilter<T: Scalar> {
    padded_len: usize,
    response: Vec<T>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> RampFilter<T> {
    /// Row length is padded to the next power of two at least `2 n_ρ`. The
    /// response is `|ν| π / C`, where `C` is the angular coverage; the factor
    /// turns the sum over angles in `backward` into an inverse Radon transform.
    pub fn new(spec: &SinogramSpec, kind: FilterKind) -> Self {
        let padded_len = (2 * spec.n_rho).next_power_of_two().max(2);
        let coverage = spec.n_theta as f64 * spec.angle_step;
        let scale = std::f64::consts::PI / coverage;
        let drho = spec.rho_step;
        let response = (0..padded_len)
            .map(|k| {
                let nu = k.min(padded_len - k) as f64 / (padded_len as f64 * drho);
                let taper = match kind {
                    FilterKind::RamLak => 1.0,
                    FilterKind::SheppLogan => sinc(nu * drho),
                };
                T::lit(nu * scale * taper)
            })
            .collect();
        let mut planner = FftPlanner::<T>::new();
        let fwd = planner.plan_fft_forward(padded_len);
        let inv = planner.plan_fft_inverse(padded_len);
        Self { padded_len, response, fwd, inv }
    }

    /// Circular filtering of a row that already has the padded length.
    pub fn apply_periodic(&self, padded: &[T]) -> Vec<T> {
        assert_eq!(padded.len(), self.padded_len);
        let mut buf: Vec<Complex<T>> = padded.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fwd.process(&mut buf);
        for (b, &h) in buf.iter_mut().zip(&self.response) {
            *b = *b * h;
        }
        self.inv.process(&mut buf);
        let inv_n = T::one() / T::from_usize(self.padded_len).unwrap();
        buf.iter().map(|b| b.re * inv_n).collect()
    }

    /// Zero-pads `row`, filters, and crops back to its length.
    pub fn apply(&self, row: &[T]) -> Vec<T> {
        let mut padded = vec![T::zero(); self.padded_len];
        padded[..row.len()].copy_from_slice(row);
        let mut out = self.apply_periodic(&padded);
        out.truncate(row.len());
        out
    }

    pub fn padded_len(&self) -> usize {
        self.padded_len
    }

    pub fn response(&self) -> &[T] {
        &self.response
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Filters every `(θ, z)` row of `g` along `ρ`.
pub fn filter_sinogram<T: Scalar>(g: &Sinogram<T>, kind: FilterKind) -> Sinogram<T> {
    let spec = g.spec().clone();
    let filter = RampFilter::<T>::new(&spec, kind);
    let mut out = g.values().to_vec();
    out.par_chunks_mut(spec.n_rho).for_each(|row| {
        let filtered = filter.apply(row);
        row.copy_from_slice(&filtered);
    });
    Sinogram::new(spec, out).expect("filtering preserves finiteness")
}

pub fn ram_lak_filter<T: Scalar>(g: &Sinogram<T>) -> Sinogram<T> {
    filter_sinogram(g, FilterKind::RamLak)
}

/// Errors when some voxel with positive weight cannot absorb light.
pub fn check_absorbing_support<T: Scalar, P: Propagation<T> + ?Sized>(
    spec: &ProblemSpec<T>,
    prop: &P,
) -> Result<()> {
    let support = spec.weights().support();
    let dark = support
        .values()
        .iter()
        .zip(prop.alpha_act().values())
        .filter(|&(&w, &a)| w > T::zero() && a <= T::zero())
        .count();
    if dark > 0 {
        return Err(Error::Infeasible(format!(
            "{dark} weighted voxels have zero absorption and can never receive dose"
        )));
    }
    Ok(())
}

/// Unconstrained estimate `R P(α_act⁻² M⁻¹(f_T))`, before projection.
pub fn unconstrained_init<T: Scalar, P: Propagation<T> + ?Sized>(
    spec: &ProblemSpec<T>,
    prop: &P,
    kind: FilterKind,
) -> Result<Sinogram<T>> {
    check_absorbing_support(spec, prop)?;
    let dose = spec.response().invert_field(spec.target());
    let scaled =
        dose.zip_map(prop.alpha_act(), |d, a| if a > T::zero() { d / (a * a) } else { T::zero() })?;
    let projected = prop.forward(&scaled)?;
    let filtered = filter_sinogram(&projected, kind);
    if !filtered.is_finite() {
        return Err(Error::NonFinite("initial sinogram".into()));
    }
    Ok(filtered)
}

/// Filtered estimate projected onto the feasible set.
pub fn analytic_init<T: Scalar, P: Propagation<T> + ?Sized>(
    spec: &ProblemSpec<T>,
    prop: &P,
    feasible: &FeasibleSet,
    kind: FilterKind,
) -> Result<Sinogram<T>> {
    project_feasible(feasible, &unconstrained_init(spec, prop, kind)?)
}

#[derive(Clone, Debug)]
pub struct LsqResult<T> {
    pub sinogram: Sinogram<T>,
    /// `‖P* g_i - d‖` for the starting point `g_0 = 0` and every iterate.
    pub residuals: Vec<T>,
}

/// Minimizes `‖P* g - d‖` over sinograms by conjugate gradients on the normal
/// equations (CGLS), using only `forward` and `backward` products. Residual
/// norms are non-increasing.
pub fn lsq_init<T: Scalar, P: Propagation<T> + ?Sized>(
    prop: &P,
    target_dose: &Field<T>,
    iters: usize,
) -> Result<LsqResult<T>> {
    if iters == 0 {
        return Err(Error::InvalidParameter(
            "least-squares initialization needs at least one iteration".into(),
        ));
    }
    if target_dose.grid() != prop.grid() {
        return Err(Error::GridMismatch(format!(
            "target dose {:?} vs propagator {:?}",
            target_dose.grid(),
            prop.grid()
        )));
    }
    let mut x = Sinogram::zeros(prop.sinogram_spec().clone());
    let mut r = target_dose.clone();
    let mut s = prop.forward(&r)?;
    let mut dir = s.clone();
    let mut gamma = s.inner(&s)?;
    let mut residuals = vec![field_norm(&r)];
    for _ in 0..iters {
        if gamma == T::zero() {
            break;
        }
        let q = prop.backward(&dir)?;
        let qq = field_inner(&q, &q)?;
        if qq == T::zero() {
            break;
        }
        let alpha = gamma / qq;
        x = x.axpy(alpha, &dir)?;
        r = r.zip_map(&q, |a, b| a - alpha * b)?;
        residuals.push(field_norm(&r));
        s = prop.forward(&r)?;
        let gamma_next = s.inner(&s)?;
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        dir = s.axpy(beta, &dir)?;
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("least-squares iterate".into()));
    }
    Ok(LsqResult { sinogram: x, residuals })
}
