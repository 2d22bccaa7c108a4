//! Evaluation metrics computed from a dose field, independent of the loss
//! used for optimization.

use crate::bclp::{loss, ProblemSpec};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::response::ResponseModel;
use crate::scalar::{pairwise_sum, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricKind {
    /// BCLP loss with the given exponents.
    Bclp { p: f64, q: f64 },
    /// `Σ_V w ΔV`.
    ViolationVolume,
    /// Largest band excess over the violation set.
    MaxExcess,
    /// Intersection over union of `{M(f) ≥ threshold}` and the binary target.
    Jaccard { threshold: f64 },
    /// Voxel error rate of the binary target.
    Ver,
    /// In-part response range `1 - min/max`.
    Ipdr,
    /// Positive `p`-th moment of the weighted error distribution.
    Moment { p: f64 },
}

impl MetricKind {
    pub fn name(&self) -> String {
        match self {
            Self::Bclp { p, q } => format!("bclp_p{p}_q{q}"),
            Self::ViolationVolume => "violation_volume".into(),
            Self::MaxExcess => "max_excess".into(),
            Self::Jaccard { .. } => "jaccard".into(),
            Self::Ver => "ver".into(),
            Self::Ipdr => "ipdr".into(),
            Self::Moment { p } => format!("moment_p{p}"),
        }
    }
}

/// A metric value; `empty` marks values defined by convention on an empty set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricValue<T> {
    pub value: T,
    pub empty: bool,
}

impl<T> MetricValue<T> {
    fn of(value: T) -> Self {
        Self { value, empty: false }
    }
}

/// What to evaluate and against which problem.
#[derive(Clone, Copy, Debug)]
pub struct MetricSpec<'a, T> {
    pub kind: MetricKind,
    /// Supplies target, tolerance, weights and response.
    pub problem: &'a ProblemSpec<T>,
    /// Needed by the binary metrics (Jaccard, VER, IPDR).
    pub binary_target: Option<&'a Field<T>>,
    /// Selects the weights of an alternating schedule.
    pub iteration: usize,
}

pub fn eval_metric<T: Scalar>(m: &MetricSpec<'_, T>, f: &Field<T>) -> Result<MetricValue<T>> {
    let spec = m.problem;
    let k = m.iteration;
    let binary = || {
        m.binary_target
            .ok_or_else(|| Error::InvalidParameter(format!("metric {} needs a binary target", m.kind.name())))
    };
    match m.kind {
        MetricKind::Bclp { p, q } => Ok(MetricValue::of(loss(&spec.with_exponents(p, q)?, f, k)?.loss)),
        MetricKind::ViolationVolume => violation_volume(spec, f, k).map(MetricValue::of),
        MetricKind::MaxExcess => max_excess(spec, f, k),
        MetricKind::Jaccard { threshold } => jaccard(f, spec.response(), binary()?, T::lit(threshold)),
        MetricKind::Ver => voxel_error_rate(f, spec.response(), binary()?).map(MetricValue::of),
        MetricKind::Ipdr => in_part_dose_range(f, spec.response(), binary()?).map(MetricValue::of),
        MetricKind::Moment { p } => positive_moment(spec, f, k, p).map(MetricValue::of),
    }
}

/// `Σ_V w ΔV`.
pub fn violation_volume<T: Scalar>(spec: &ProblemSpec<T>, f: &Field<T>, k: usize) -> Result<T> {
    let e = spec.excess(f)?;
    let w = spec.weights().at(k);
    let terms: Vec<T> = e
        .values()
        .iter()
        .zip(w.values())
        .filter(|&(&ev, &wv)| ev > T::zero() && wv > T::zero())
        .map(|(_, &wv)| wv)
        .collect();
    Ok(pairwise_sum(&terms) * T::lit(f.grid().voxel_volume()))
}

/// Largest band excess over the violation set; zero with the `empty` flag
/// when nothing violates.
pub fn max_excess<T: Scalar>(spec: &ProblemSpec<T>, f: &Field<T>, k: usize) -> Result<MetricValue<T>> {
    let e = spec.excess(f)?;
    let w = spec.weights().at(k);
    let max = e
        .values()
        .iter()
        .zip(w.values())
        .filter(|&(&ev, &wv)| ev > T::zero() && wv > T::zero())
        .map(|(&ev, _)| ev)
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(match max {
        Some(v) => MetricValue::of(v),
        None => MetricValue { value: T::zero(), empty: true },
    })
}

/// `Σ_{E > 0} w E^p ΔV`, computed exactly without binning.
pub fn positive_moment<T: Scalar>(spec: &ProblemSpec<T>, f: &Field<T>, k: usize, p: f64) -> Result<T> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidParameter(format!("moment order must be positive, got {p}")));
    }
    let e = spec.excess(f)?;
    let w = spec.weights().at(k);
    let pt = T::lit(p);
    let terms: Vec<T> = e
        .values()
        .iter()
        .zip(w.values())
        .filter(|&(&ev, &wv)| ev > T::zero() && wv > T::zero())
        .map(|(&ev, &wv)| wv * ev.powf(pt))
        .collect();
    Ok(pairwise_sum(&terms) * T::lit(f.grid().voxel_volume()))
}

fn check_binary<T: Scalar>(mask: &Field<T>, what: &str) -> Result<()> {
    if mask.values().iter().any(|&v| v != T::zero() && v != T::one()) {
        return Err(Error::InvalidParameter(format!("{what} must contain only 0 and 1")));
    }
    Ok(())
}

/// `|B ∩ T| / |B ∪ T|` with `B = {M(f) ≥ threshold}`. Two empty sets give 1,
/// flagged as empty.
pub fn jaccard<T: Scalar>(
    f: &Field<T>,
    response: &ResponseModel<T>,
    binary_target: &Field<T>,
    threshold: T,
) -> Result<MetricValue<T>> {
    f.check_same_grid(binary_target, "jaccard target")?;
    check_binary(binary_target, "binary target")?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&fv, &t) in f.values().iter().zip(binary_target.values()) {
        let b = response.respond(fv) >= threshold;
        let t = t == T::one();
        inter += (b && t) as usize;
        union += (b || t) as usize;
    }
    if union == 0 {
        return Ok(MetricValue { value: T::one(), empty: true });
    }
    Ok(MetricValue::of(T::from_usize(inter).unwrap() / T::from_usize(union).unwrap()))
}

fn in_part_responses<T: Scalar>(
    f: &Field<T>,
    response: &ResponseModel<T>,
    ip_mask: &Field<T>,
) -> Result<Vec<T>> {
    f.check_same_grid(ip_mask, "in-part mask")?;
    check_binary(ip_mask, "in-part mask")?;
    let ip: Vec<T> = f
        .values()
        .iter()
        .zip(ip_mask.values())
        .filter(|&(_, &m)| m == T::one())
        .map(|(&fv, _)| response.respond(fv))
        .collect();
    if ip.is_empty() {
        return Err(Error::EmptyRegion("in-part region has no voxels".into()));
    }
    Ok(ip)
}

/// Fraction of all voxels that are out of part yet respond at least as
/// strongly as the weakest in-part voxel.
pub fn voxel_error_rate<T: Scalar>(
    f: &Field<T>,
    response: &ResponseModel<T>,
    ip_mask: &Field<T>,
) -> Result<T> {
    let ip = in_part_responses(f, response, ip_mask)?;
    let ip_min = ip.iter().copied().fold(T::infinity(), T::min);
    let wrong = f
        .values()
        .iter()
        .zip(ip_mask.values())
        .filter(|&(&fv, &m)| m == T::zero() && response.respond(fv) >= ip_min)
        .count();
    Ok(T::from_usize(wrong).unwrap() / T::from_usize(f.values().len()).unwrap())
}

/// `1 - min/max` of the in-part response. Zero when the maximum is not positive.
pub fn in_part_dose_range<T: Scalar>(
    f: &Field<T>,
    response: &ResponseModel<T>,
    ip_mask: &Field<T>,
) -> Result<T> {
    let ip = in_part_responses(f, response, ip_mask)?;
    let lo = ip.iter().copied().fold(T::infinity(), T::min);
    let hi = ip.iter().copied().fold(T::neg_infinity(), T::max);
    if hi <= T::zero() {
        return Ok(T::zero());
    }
    Ok(T::one() - lo / hi)
}

/// Weighted-volume histogram of the band excess `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram<T> {
    /// `n_bins + 1` ascending edges.
    pub edges: Vec<T>,
    /// Sum of `w ΔV` per bin.
    pub mass: Vec<T>,
}

impl<T: Scalar> Histogram<T> {
    pub fn total_mass(&self) -> T {
        pairwise_sum(&self.mass)
    }

    /// Index of the bin holding `e`, with outliers clamped to the end bins.
    pub fn bin_of(&self, e: T) -> usize {
        let n = self.mass.len();
        let lo = self.edges[0];
        let hi = self.edges[n];
        let pos = ((e - lo) / (hi - lo) * T::from_usize(n).unwrap()).floor();
        if !(pos > T::zero()) {
            0
        } else {
            pos.to_usize().unwrap_or(n - 1).min(n - 1)
        }
    }
}

/// Histogram of `E` over all voxels, weighted by `w_k ΔV`, on `n_bins` equal
/// bins spanning `range`. Values outside the range are counted in the end
/// bins, so the total mass always equals `Σ w ΔV`.
pub fn error_histogram<T: Scalar>(
    spec: &ProblemSpec<T>,
    f: &Field<T>,
    k: usize,
    n_bins: usize,
    range: (T, T),
) -> Result<Histogram<T>> {
    if n_bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::InvalidParameter(format!("histogram range ({lo}, {hi}) is empty")));
    }
    let e = spec.excess(f)?;
    let w = spec.weights().at(k);
    let width = (hi - lo) / T::from_usize(n_bins).unwrap();
    let edges = (0..=n_bins).map(|i| lo + width * T::from_usize(i).unwrap()).collect();
    let mut hist = Histogram { edges, mass: vec![T::zero(); n_bins] };
    let dv = T::lit(f.grid().voxel_volume());
    let mut per_bin: Vec<Vec<T>> = vec![Vec::new(); n_bins];
    for (&ev, &wv) in e.values().iter().zip(w.values()) {
        if wv > T::zero() {
            per_bin[hist.bin_of(ev)].push(wv * dv);
        }
    }
    for (m, terms) in hist.mass.iter_mut().zip(&per_bin) {
        *m = pairwise_sum(terms);
    }
    Ok(hist)
}

/// Range of `E` over weighted voxels, widened when degenerate.
pub fn excess_range<T: Scalar>(spec: &ProblemSpec<T>, f: &Field<T>, k: usize) -> Result<(T, T)> {
    let e = spec.excess(f)?;
    let w = spec.weights().at(k);
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for (&ev, &wv) in e.values().iter().zip(w.values()) {
        if wv > T::zero() {
            lo = lo.min(ev);
            hi = hi.max(ev);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Ok((-T::one(), T::one()));
    }
    if hi <= lo {
        let pad = T::lit(0.5) * lo.abs().max(T::one());
        return Ok((lo - pad, hi + pad));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn linear(grid: crate::grid::GridSpec, f_t: Vec<f64>, eps: f64, w: Vec<f64>) -> ProblemSpec<f64> {
        ProblemSpec::constant(
            Field::new(grid, f_t, "").unwrap(),
            Field::filled(grid, eps, ""),
            Field::new(grid, w, "").unwrap(),
            1.0,
            1.0,
            ResponseModel::linear_identity(),
        )
        .unwrap()
    }

    #[test]
    fn single_voxel_metrics() {
        let g = make_grid(1, 1, 1, 1.0).unwrap();
        let spec = linear(g, vec![0.0], 0.03, vec![1.0]);
        let f = Field::filled(g, 0.1, "");
        assert!((violation_volume(&spec, &f, 0).unwrap() - 1.0).abs() < 1e-15);
        let m = max_excess(&spec, &f, 0).unwrap();
        assert!((m.value - 0.07).abs() < 1e-15 && !m.empty);
        let ms = MetricSpec {
            kind: MetricKind::Bclp { p: 1.0, q: 1.0 },
            problem: &spec,
            binary_target: None,
            iteration: 0,
        };
        assert!((eval_metric(&ms, &f).unwrap().value - 0.07).abs() < 1e-15);
    }

    #[test]
    fn in_band_metrics_are_empty() {
        let g = make_grid(2, 2, 1, 1.0).unwrap();
        let spec = linear(g, vec![0.5; 4], 0.1, vec![1.0; 4]);
        let f = Field::filled(g, 0.55, "");
        assert_eq!(violation_volume(&spec, &f, 0).unwrap(), 0.0);
        let m = max_excess(&spec, &f, 0).unwrap();
        assert_eq!(m, MetricValue { value: 0.0, empty: true });
        assert_eq!(positive_moment(&spec, &f, 0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn moment_single_voxel() {
        let g = make_grid(1, 1, 1, 1.0).unwrap();
        let spec = linear(g, vec![0.0], 0.0, vec![2.0]);
        let f = Field::filled(g, 0.5, "");
        assert!((positive_moment(&spec, &f, 0, 2.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jaccard_examples() {
        let g = make_grid(4, 4, 1, 1.0).unwrap();
        let r = ResponseModel::<f64>::linear_identity();
        let t = Field::from_fn(g, "", |i, j, _| if i < 3 && j < 3 { 1.0 } else { 0.0 });
        assert_eq!(jaccard(&t, &r, &t, 0.5).unwrap().value, 1.0);
        let disjoint = t.map(|v| 1.0 - v);
        assert_eq!(jaccard(&disjoint, &r, &t, 0.5).unwrap().value, 0.0);
        let mut extra = t.clone();
        extra.values_mut()[15] = 1.0;
        assert!((jaccard(&extra, &r, &t, 0.5).unwrap().value - 0.9).abs() < 1e-15);
        let zeros = Field::zeros(g, "");
        let both_empty = jaccard(&zeros, &r, &zeros, 0.5).unwrap();
        assert!(both_empty.empty && both_empty.value == 1.0);
        assert!(jaccard(&zeros, &r, &Field::filled(g, 0.5, ""), 0.5).is_err());
    }

    #[test]
    fn ver_and_ipdr_examples() {
        let g = make_grid(4, 1, 1, 1.0).unwrap();
        let r = ResponseModel::<f64>::linear_identity();
        let ip = Field::new(g, vec![1.0, 1.0, 0.0, 0.0], "").unwrap();
        let separated = Field::new(g, vec![0.9, 1.0, 0.1, 0.2], "").unwrap();
        assert_eq!(voxel_error_rate(&separated, &r, &ip).unwrap(), 0.0);
        let mixed = Field::new(g, vec![0.8, 1.0, 0.9, 0.95], "").unwrap();
        assert_eq!(voxel_error_rate(&mixed, &r, &ip).unwrap(), 0.5);
        assert!((in_part_dose_range(&mixed, &r, &ip).unwrap() - 0.2).abs() < 1e-12);
        let uniform = Field::filled(g, 0.7, "");
        assert_eq!(in_part_dose_range(&uniform, &r, &ip).unwrap(), 0.0);
        assert!(voxel_error_rate(&uniform, &r, &Field::zeros(g, "")).is_err());
    }

    #[test]
    fn histogram_single_bin() {
        let g = make_grid(2, 2, 2, 0.5).unwrap();
        let spec = linear(g, vec![0.0; 8], 0.0, vec![1.0; 8]);
        let f = Field::filled(g, 0.1, "");
        let h = error_histogram(&spec, &f, 0, 10, (-0.5, 0.5)).unwrap();
        let occupied: Vec<f64> = h.mass.iter().copied().filter(|&m| m > 0.0).collect();
        assert_eq!(occupied.len(), 1);
        assert!((occupied[0] - 8.0 * g.voxel_volume()).abs() < 1e-15);
        assert_eq!(h.bin_of(0.1), 6);
        assert!(error_histogram(&spec, &f, 0, 0, (0.0, 1.0)).is_err());
        assert!(error_histogram(&spec, &f, 0, 4, (1.0, 1.0)).is_err());
    }
}
