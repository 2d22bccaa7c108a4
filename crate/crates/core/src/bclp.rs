//! Band-constraint Lp-norm loss and its sinogram-space gradient.
//!
//! With band excess `E = |M(f) - f_T| - ε` and violation set
//! `V = {E > 0, w_k > 0}`, the loss is
//!
//! ```text
//! L = ( Σ_V w_k E^p ΔV )^(q/p)
//! ```
//!
//! and its gradient with respect to the sinogram, taken under the quadrature
//! inner product of sinogram space, is
//!
//! ```text
//! ∇L = q L^((q-p)/q) · P( v w_k E^(p-1) sgn(M(f) - f_T) M'(f) )
//! ```

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::propagation::{Propagation, Sinogram};
use crate::response::ResponseModel;
use crate::scalar::{pairwise_sum, signum0, Scalar};

/// Lower bound on `E` inside the gradient when `p < 1`, in response units.
pub const EXCESS_FLOOR: f64 = 1e-9;

/// Per-voxel weights, either fixed or switching with iteration parity.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightSchedule<T> {
    Constant(Field<T>),
    /// Weights used on even iterations, then on odd iterations.
    Alternating {
        even: Field<T>,
        odd: Field<T>,
    },
}

impl<T: Scalar> WeightSchedule<T> {
    pub fn at(&self, k: usize) -> &Field<T> {
        match self {
            Self::Constant(w) => w,
            Self::Alternating { even, odd } => {
                if k % 2 == 0 {
                    even
                } else {
                    odd
                }
            }
        }
    }

    pub fn is_alternating(&self) -> bool {
        matches!(self, Self::Alternating { .. })
    }

    /// Indicator of voxels with a positive weight at any iteration.
    pub fn support(&self) -> Field<T> {
        let positive = |w: T| if w > T::zero() { T::one() } else { T::zero() };
        match self {
            Self::Constant(w) => w.map(positive),
            Self::Alternating { even, odd } => {
                even.zip_map(odd, |a, b| positive(a.max(b))).expect("schedule fields share a grid")
            }
        }
    }

    fn fields(&self) -> Vec<&Field<T>> {
        match self {
            Self::Constant(w) => vec![w],
            Self::Alternating { even, odd } => vec![even, odd],
        }
    }
}

/// Everything that defines one loss.
#[derive(Clone, Debug)]
pub struct ProblemSpec<T> {
    target: Field<T>,
    tolerance: Field<T>,
    weights: WeightSchedule<T>,
    p: f64,
    q: f64,
    response: ResponseModel<T>,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(
        target: Field<T>,
        tolerance: Field<T>,
        weights: WeightSchedule<T>,
        p: f64,
        q: f64,
        response: ResponseModel<T>,
    ) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
        }
        target.check_same_grid(&tolerance, "tolerance")?;
        if let Some(pos) = tolerance.values().iter().position(|&e| e < T::zero()) {
            return Err(Error::InvalidParameter(format!("tolerance is negative at voxel {pos}")));
        }
        for w in weights.fields() {
            target.check_same_grid(w, "weights")?;
            if let Some(pos) = w.values().iter().position(|&x| x < T::zero()) {
                return Err(Error::InvalidParameter(format!("weight is negative at voxel {pos}")));
            }
        }
        Ok(Self { target, tolerance, weights, p, q, response })
    }

    /// Same problem with constant weights.
    pub fn constant(
        target: Field<T>,
        tolerance: Field<T>,
        weights: Field<T>,
        p: f64,
        q: f64,
        response: ResponseModel<T>,
    ) -> Result<Self> {
        Self::new(target, tolerance, WeightSchedule::Constant(weights), p, q, response)
    }

    pub fn grid(&self) -> &GridSpec {
        self.target.grid()
    }

    pub fn target(&self) -> &Field<T> {
        &self.target
    }

    pub fn tolerance(&self) -> &Field<T> {
        &self.tolerance
    }

    pub fn weights(&self) -> &WeightSchedule<T> {
        &self.weights
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn response(&self) -> &ResponseModel<T> {
        &self.response
    }

    pub fn with_exponents(&self, p: f64, q: f64) -> Result<Self> {
        Self::new(
            self.target.clone(),
            self.tolerance.clone(),
            self.weights.clone(),
            p,
            q,
            self.response.clone(),
        )
    }

    pub fn with_weights(&self, weights: WeightSchedule<T>) -> Result<Self> {
        Self::new(self.target.clone(), self.tolerance.clone(), weights, self.p, self.q, self.response.clone())
    }

    pub fn with_tolerance(&self, tolerance: Field<T>) -> Result<Self> {
        Self::new(self.target.clone(), tolerance, self.weights.clone(), self.p, self.q, self.response.clone())
    }

    fn check_dose(&self, f: &Field<T>) -> Result<()> {
        self.target.check_same_grid(f, "dose field")?;
        if !f.is_finite() {
            return Err(Error::NonFinite("dose field".into()));
        }
        Ok(())
    }

    /// Band excess `E = |M(f) - f_T| - ε` per voxel; negative inside the band.
    pub fn excess(&self, f: &Field<T>) -> Result<Field<T>> {
        self.check_dose(f)?;
        let values = f
            .values()
            .iter()
            .zip(self.target.values())
            .zip(self.tolerance.values())
            .map(|((&fv, &t), &e)| (self.response.respond(fv) - t).abs() - e)
            .collect();
        Field::new(*f.grid(), values, "response")
    }
}

/// Scalar summary of a loss evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport<T> {
    pub loss: T,
    /// `I = Σ_V w E^p ΔV`, so that `loss = I^(q/p)`.
    pub integral: T,
    /// `|V|` divided by the number of voxels with positive weight.
    pub violation_fraction: T,
    /// Largest positive excess over `V`, zero when `V` is empty.
    pub max_excess: T,
}

/// Indicator of the violation set at iteration `k`.
pub fn violation_set<T: Scalar>(spec: &ProblemSpec<T>, f: &Field<T>, k: usize) -> Result<Field<T>> {
    let e = spec.excess(f)?;
    let w = spec.weights.at(k);
    e.zip_map(w, |e, w| if e > T::zero() && w > T::zero() { T::one() } else { T::zero() })
        .map(|v| v.with_unit("1"))
}

pub fn loss<T: Scalar>(spec: &ProblemSpec<T>, f: &Field<T>, k: usize) -> Result<LossReport<T>> {
    let e = spec.excess(f)?;
    Ok(report_from_excess(spec, &e, k))
}

fn report_from_excess<T: Scalar>(spec: &ProblemSpec<T>, e: &Field<T>, k: usize) -> LossReport<T> {
    let w = spec.weights.at(k);
    let p = T::lit(spec.p);
    let mut terms = Vec::new();
    let mut weighted = 0usize;
    let mut max_excess = T::zero();
    for (&ev, &wv) in e.values().iter().zip(w.values()) {
        if wv > T::zero() {
            weighted += 1;
            if ev > T::zero() {
                terms.push(wv * ev.powf(p));
                max_excess = max_excess.max(ev);
            }
        }
    }
    let integral = pairwise_sum(&terms) * T::lit(spec.grid().voxel_volume());
    let loss = if terms.is_empty() { T::zero() } else { integral.powf(T::lit(spec.q / spec.p)) };
    let violation_fraction = if weighted == 0 {
        T::zero()
    } else {
        T::from_usize(terms.len()).unwrap() / T::from_usize(weighted).unwrap()
    };
    LossReport { loss, integral, violation_fraction, max_excess }
}

/// Tomogram-side factor of the gradient,
/// `q L^((q-p)/q) v w_k E^(p-1) sgn(M(f) - f_T) M'(f)`, together with the loss.
pub fn gradient_integrand<T: Scalar>(
    spec: &ProblemSpec<T>,
    f: &Field<T>,
    k: usize,
) -> Result<(LossReport<T>, Field<T>)> {
    let e = spec.excess(f)?;
    let report = report_from_excess(spec, &e, k);
    if report.loss == T::zero() {
        return Ok((report, Field::zeros(*f.grid(), "")));
    }
    let (p, q) = (spec.p, spec.q);
    let prefactor = T::lit(q) * report.loss.powf(T::lit((q - p) / q));
    let pm1 = T::lit(p - 1.0);
    let floor = T::lit(EXCESS_FLOOR);
    let w = spec.weights.at(k);
    let values = f
        .values()
        .iter()
        .zip(e.values())
        .zip(w.values())
        .zip(spec.target.values())
        .map(|(((&fv, &ev), &wv), &t)| {
            if ev > T::zero() && wv > T::zero() {
                let (m, dm) = spec.response.respond_with_derivative(fv);
                let base = if p < 1.0 { ev.max(floor) } else { ev };
                prefactor * wv * base.powf(pm1) * signum0(m - t) * dm
            } else {
                T::zero()
            }
        })
        .collect();
    Ok((report, Field::from_parts(*f.grid(), values, "")))
}

/// Loss report and gradient at the dose field `f`.
pub fn loss_and_gradient<T: Scalar, P: Propagation<T> + ?Sized>(
    spec: &ProblemSpec<T>,
    f: &Field<T>,
    prop: &P,
    k: usize,
) -> Result<(LossReport<T>, Sinogram<T>)> {
    let (report, integrand) = gradient_integrand(spec, f, k)?;
    let grad = if report.loss == T::zero() {
        Sinogram::zeros(prop.sinogram_spec().clone())
    } else {
        prop.forward(&integrand)?
    };
    if !grad.is_finite() {
        return Err(Error::NonFinite("loss gradient".into()));
    }
    Ok((report, grad))
}

pub fn loss_gradient<T: Scalar, P: Propagation<T> + ?Sized>(
    spec: &ProblemSpec<T>,
    f: &Field<T>,
    prop: &P,
    k: usize,
) -> Result<Sinogram<T>> {
    loss_and_gradient(spec, f, prop, k).map(|(_, g)| g)
}

/// `Σ ω_i L_i` and `Σ ω_i ∇L_i`.
pub fn composite_loss<T: Scalar, P: Propagation<T> + ?Sized>(
    terms: &[(T, &ProblemSpec<T>)],
    f: &Field<T>,
    prop: &P,
    k: usize,
) -> Result<(T, Sinogram<T>)> {
    let (first, rest) = terms
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("composite loss needs at least one term".into()))?;
    for (_, spec) in rest {
        first.1.target().check_same_grid(spec.target(), "composite term")?;
    }
    let mut value = T::zero();
    let mut grad = Sinogram::zeros(prop.sinogram_spec().clone());
    for &(omega, spec) in terms {
        let (report, g) = loss_and_gradient(spec, f, prop, k)?;
        value += omega * report.loss;
        grad = grad.axpy(omega, &g)?;
    }
    Ok((value, grad))
}
