//! Dose matching (DM), penalty minimization (PM) and object-space model
//! optimization (OSMO) written as BCLP problems, plus a literal OSMO iteration
//! for comparison.
//!
//! One-sided constraints are expressed as bands whose far edge sits at
//! `±far` (default 10⁶). Representing `f_T ± ε` near that magnitude needs
//! `f64`; in `f32` the near band edge is only accurate to about 0.03.

use crate::bclp::{ProblemSpec, WeightSchedule};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::propagation::{Propagation, Sinogram};
use crate::response::ResponseModel;
use crate::scalar::Scalar;

/// Default position of the unused band edge, in dose units.
pub const DEFAULT_FAR_LIMIT: f64 = 1e6;
/// Default erosion width for the PM regions, in voxels.
pub const DEFAULT_PM_EROSION: usize = 2;
/// Step size that turns a PGD step into an OSMO update.
pub const OSMO_STEP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeName {
    Dm,
    Pm,
    Osmo,
}

impl SchemeName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Dm => "dm",
            Self::Pm => "pm",
            Self::Osmo => "osmo",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SchemePreset<T> {
    pub name: SchemeName,
    pub spec: ProblemSpec<T>,
    /// Step size the scheme prescribes, if any.
    pub eta: Option<f64>,
}

fn check_binary<T: Scalar>(mask: &Field<T>) -> Result<()> {
    if let Some(pos) = mask.values().iter().position(|&v| v != T::zero() && v != T::one()) {
        return Err(Error::InvalidParameter(format!(
            "mask must be binary, voxel {pos} is {}",
            mask.values()[pos]
        )));
    }
    Ok(())
}

/// Keeps a voxel iff every voxel of its `(2w+1)` neighborhood (a square on
/// single-slice grids, a cube otherwise) is inside the grid and set.
pub fn erode<T: Scalar>(mask: &Field<T>, width: usize) -> Result<Field<T>> {
    check_binary(mask)?;
    let g = *mask.grid();
    let mut cur: Vec<bool> = mask.values().iter().map(|&v| v == T::one()).collect();
    if width > 0 {
        let axes = if g.nz > 1 { 3 } else { 2 };
        for axis in 0..axes {
            cur = erode_axis(&cur, &g, axis, width);
        }
    }
    let values = cur.into_iter().map(|b| if b { T::one() } else { T::zero() }).collect();
    Ok(Field::new(g, values, mask.unit())?)
}

/// One-dimensional erosion along `axis` (0 = x, 1 = y, 2 = z).
fn erode_axis(src: &[bool], g: &GridSpec, axis: usize, w: usize) -> Vec<bool> {
    let (n, stride) = match axis {
        0 => (g.nx, 1),
        1 => (g.ny, g.nx),
        _ => (g.nz, g.slice_len()),
    };
    let mut out = vec![false; src.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let (i, j, k) = g.coords(idx);
        let pos = [i, j, k][axis];
        if pos < w || pos + w >= n {
            continue;
        }
        let base = idx - pos * stride;
        *o = (pos - w..=pos + w).all(|p| src[base + p * stride]);
    }
    out
}

/// Dose matching: `ε = 0`, `w = 1`, `p = q = 1`.
pub fn dm_preset<T: Scalar>(target: &Field<T>, response: ResponseModel<T>) -> Result<SchemePreset<T>> {
    let (a, k) = response.range();
    if let Some(pos) = target.values().iter().position(|&v| !(v.as_f64() > a && v.as_f64() < k)) {
        return Err(Error::InvalidParameter(format!(
            "target value {} at voxel {pos} is outside the response range ({a}, {k})",
            target.values()[pos]
        )));
    }
    let g = *target.grid();
    let spec = ProblemSpec::constant(
        target.clone(),
        Field::zeros(g, target.unit()),
        Field::filled(g, T::one(), "1"),
        1.0,
        1.0,
        response,
    )?;
    Ok(SchemePreset { name: SchemeName::Dm, spec, eta: None })
}

/// Parameters of the penalty-minimization preset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmParams {
    /// Minimum dose required inside the eroded part.
    pub d_h: f64,
    /// Maximum dose allowed inside the eroded complement.
    pub d_l: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub erosion_width: usize,
    pub far: f64,
}

impl PmParams {
    pub fn new(d_h: f64, d_l: f64) -> Self {
        Self { d_h, d_l, rho1: 1.0, rho2: 1.0, erosion_width: DEFAULT_PM_EROSION, far: DEFAULT_FAR_LIMIT }
    }
}

/// Penalty minimization: `f ≥ d_h` on the eroded part (weight `ρ1`),
/// `f ≤ d_l` on the eroded complement (weight `ρ2`), nothing in the buffer
/// between; linear response, `p = q = 1`.
pub fn pm_preset<T: Scalar>(binary_target: &Field<T>, params: &PmParams) -> Result<SchemePreset<T>> {
    let PmParams { d_h, d_l, rho1, rho2, erosion_width, far } = *params;
    if !(d_l > 0.0 && d_h > d_l) {
        return Err(Error::InvalidParameter(format!("need d_h > d_l > 0, got d_h={d_h}, d_l={d_l}")));
    }
    if !(rho1 >= 0.0 && rho2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("region weights must be >= 0, got {rho1}, {rho2}")));
    }
    if !(far > d_h) {
        return Err(Error::InvalidParameter(format!("far limit {far} must exceed d_h = {d_h}")));
    }
    check_binary(binary_target)?;
    let r1 = erode(binary_target, erosion_width)?;
    let r2 = erode(&binary_target.map(|v| T::one() - v), erosion_width)?;
    for (name, r) in [("eroded part", &r1), ("eroded complement", &r2)] {
        if r.values().iter().all(|&v| v == T::zero()) {
            return Err(Error::EmptyRegion(format!(
                "{name} is empty after eroding by {erosion_width} voxels"
            )));
        }
    }
    let g = *binary_target.grid();
    let mut target = Field::zeros(g, "J/cm^3");
    let mut tolerance = Field::zeros(g, "J/cm^3");
    let mut weights = Field::zeros(g, "1");
    for idx in 0..g.len() {
        if r1.values()[idx] == T::one() {
            target.values_mut()[idx] = T::lit((d_h + far) / 2.0);
            tolerance.values_mut()[idx] = T::lit((far - d_h) / 2.0);
            weights.values_mut()[idx] = T::lit(rho1);
        } else if r2.values()[idx] == T::one() {
            target.values_mut()[idx] = T::lit((d_l - far) / 2.0);
            tolerance.values_mut()[idx] = T::lit((d_l + far) / 2.0);
            weights.values_mut()[idx] = T::lit(rho2);
        }
    }
    let spec = ProblemSpec::constant(target, tolerance, weights, 1.0, 1.0, ResponseModel::linear_identity())?;
    Ok(SchemePreset { name: SchemeName::Pm, spec, eta: None })
}

/// Object-space model optimization: `f ≥ D_h` in part, `f ≤ D_l` out of part,
/// linear response, `p = q = 2`, step 1/2. With `alternating`, even iterations
/// weight only the out-of-part region and odd iterations only the part.
pub fn osmo_preset<T: Scalar>(
    binary_target: &Field<T>,
    d_h: f64,
    d_l: f64,
    alternating: bool,
    far: f64,
) -> Result<SchemePreset<T>> {
    if !(d_l > 0.0 && d_h > d_l) {
        return Err(Error::InvalidParameter(format!("need D_h > D_l > 0, got D_h={d_h}, D_l={d_l}")));
    }
    if !(far > d_h) {
        return Err(Error::InvalidParameter(format!("far limit {far} must exceed D_h = {d_h}")));
    }
    check_binary(binary_target)?;
    let ip = binary_target.clone().with_unit("1");
    let ofp = ip.map(|v| T::one() - v);
    let pick = |v: T, inside: f64, outside: f64| {
        if v == T::one() {
            T::lit(inside)
        } else {
            T::lit(outside)
        }
    };
    let target = ip.map(|v| pick(v, far, -far)).with_unit("J/cm^3");
    let tolerance = ip.map(|v| pick(v, far - d_h, far + d_l)).with_unit("J/cm^3");
    let weights = if alternating {
        WeightSchedule::Alternating { even: ofp, odd: ip }
    } else {
        WeightSchedule::Constant(Field::filled(*binary_target.grid(), T::one(), "1"))
    };
    let spec = ProblemSpec::new(target, tolerance, weights, 2.0, 2.0, ResponseModel::linear_identity())?;
    Ok(SchemePreset { name: SchemeName::Osmo, spec, eta: Some(OSMO_STEP) })
}

/// State of the published OSMO iteration, which updates an object-space
/// model `M` instead of a sinogram.
#[derive(Clone, Debug)]
pub struct OsmoState<T> {
    pub model: Field<T>,
    /// Number of half-cycles taken; even steps correct out-of-part overdose,
    /// odd steps in-part underdose.
    pub parity: usize,
    pub d_h: f64,
    pub d_l: f64,
    /// Divide each dose field by its maximum before thresholding.
    pub normalize: bool,
    ip: Field<T>,
    /// Dose computed in the most recent step.
    pub last_dose: Option<Field<T>>,
}

impl<T: Scalar> OsmoState<T> {
    /// Starts from `M_0` equal to the binary target.
    pub fn new(binary_target: &Field<T>, d_h: f64, d_l: f64, normalize: bool) -> Result<Self> {
        check_binary(binary_target)?;
        if !(d_l > 0.0 && d_h > d_l) {
            return Err(Error::InvalidParameter(format!("need D_h > D_l > 0, got D_h={d_h}, D_l={d_l}")));
        }
        Ok(Self {
            model: binary_target.clone(),
            parity: 0,
            d_h,
            d_l,
            normalize,
            ip: binary_target.clone(),
            last_dose: None,
        })
    }

    /// `max(0, P M)`, the sinogram the model stands for.
    pub fn sinogram<P: Propagation<T> + ?Sized>(&self, prop: &P) -> Result<Sinogram<T>> {
        Ok(prop.forward(&self.model)?.map(|v| v.max(T::zero())))
    }
}

/// One half-cycle: `f = P* max(0, P M)` (optionally divided by its maximum),
/// then `M -= max(0, f - D_l)` out of part on even steps or
/// `M += max(0, D_h - f)` in part on odd steps.
pub fn osmo_reference_step<T: Scalar, P: Propagation<T> + ?Sized>(
    state: &OsmoState<T>,
    prop: &P,
) -> Result<OsmoState<T>> {
    let mut f = prop.backward(&state.sinogram(prop)?)?;
    if state.normalize {
        let max = f.values().iter().copied().fold(T::neg_infinity(), T::max);
        if max > T::zero() {
            f = f.scale(T::one() / max);
        }
    }
    let (d_h, d_l) = (T::lit(state.d_h), T::lit(state.d_l));
    let even = state.parity % 2 == 0;
    state.model.check_same_grid(&f, "object model")?;
    let mut model = state.model.clone();
    for ((m, &fv), &inside) in model.values_mut().iter_mut().zip(f.values()).zip(state.ip.values()) {
        let in_part = inside == T::one();
        if even && !in_part {
            *m -= (fv - d_l).max(T::zero());
        } else if !even && in_part {
            *m += (d_h - fv).max(T::zero());
        }
    }
    Ok(OsmoState {
        model,
        parity: state.parity + 1,
        d_h: state.d_h,
        d_l: state.d_l,
        normalize: state.normalize,
        ip: state.ip.clone(),
        last_dose: Some(f),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn square(n: usize, lo: usize, hi: usize) -> Field<f64> {
        let g = make_grid(n, n, 1, 1.0).unwrap();
        Field::from_fn(
            g,
            "",
            |i, j, _| {
                if (lo..hi).contains(&i) && (lo..hi).contains(&j) {
                    1.0
                } else {
                    0.0
                }
            },
        )
    }

    #[test]
    fn erosion_examples() {
        let m = square(9, 2, 7);
        assert_eq!(erode(&m, 0).unwrap(), m);
        assert_eq!(erode(&m, 1).unwrap(), square(9, 3, 6));
        assert_eq!(erode(&m, 2).unwrap(), square(9, 4, 5));
        assert!(erode(&m.map(|v| v * 0.5), 1).is_err());
    }

    #[test]
    fn erosion_treats_outside_as_empty() {
        let g = make_grid(5, 5, 1, 1.0).unwrap();
        let full = Field::<f64>::filled(g, 1.0, "");
        assert_eq!(erode(&full, 1).unwrap(), square(5, 1, 4));
    }

    #[test]
    fn erosion_uses_cube_in_3d() {
        let g = make_grid(5, 5, 5, 1.0).unwrap();
        let full = Field::<f64>::filled(g, 1.0, "");
        let e = erode(&full, 1).unwrap();
        let kept: f64 = e.values().iter().sum();
        assert_eq!(kept, 27.0);
        assert_eq!(e.at(2, 2, 2), 1.0);
        assert_eq!(e.at(2, 2, 0), 0.0);
    }

    #[test]
    fn dm_rejects_out_of_range_target() {
        let g = make_grid(2, 1, 1, 1.0).unwrap();
        let r = ResponseModel::<f64>::logistic(Default::default()).unwrap();
        let bad = Field::new(g, vec![0.5, 1.0], "").unwrap();
        assert!(dm_preset(&bad, r.clone()).is_err());
        let ok = Field::new(g, vec![0.5, 0.9], "").unwrap();
        let p = dm_preset(&ok, r).unwrap();
        assert!(p.spec.tolerance().values().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn osmo_far_limits() {
        let t = square(4, 1, 3);
        let p = osmo_preset(&t, 0.8, 0.2, false, DEFAULT_FAR_LIMIT).unwrap();
        let spec = &p.spec;
        let inside = t.grid().index(1, 1, 0);
        let outside = 0;
        let upper = spec.target().values()[inside] + spec.tolerance().values()[inside];
        assert!((upper - 2e6 + 0.8).abs() < 1e-6);
        assert!((spec.target().values()[inside] - spec.tolerance().values()[inside] - 0.8).abs() < 1e-9);
        assert!((spec.target().values()[outside] + spec.tolerance().values()[outside] - 0.2).abs() < 1e-9);
        assert_eq!(p.eta, Some(0.5));
        assert_eq!((spec.p(), spec.q()), (2.0, 2.0));
    }

    #[test]
    fn osmo_alternating_weights() {
        let t = square(4, 1, 3);
        let p = osmo_preset(&t, 0.8, 0.2, true, DEFAULT_FAR_LIMIT).unwrap();
        let w = p.spec.weights();
        for idx in 0..t.values().len() {
            let inside = t.values()[idx] == 1.0;
            assert_eq!(w.at(0).values()[idx] == 0.0, inside);
            assert_eq!(w.at(1).values()[idx] == 0.0, !inside);
        }
    }

    #[test]
    fn pm_needs_nonempty_regions() {
        let t = square(6, 1, 3);
        assert!(matches!(pm_preset(&t, &PmParams::new(1.0, 0.5)), Err(Error::EmptyRegion(_))));
        assert!(pm_preset(&t, &PmParams::new(0.5, 1.0)).is_err());
    }
}
