//! Projected gradient descent over the feasible set of sinograms.

use crate::bclp::{loss, loss_and_gradient, LossReport, ProblemSpec};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::propagation::{Propagation, Sinogram};
use crate::scalar::Scalar;

/// Number of recent loss changes averaged by [`converged`].
pub const CONVERGENCE_WINDOW: usize = 5;
/// Mean absolute change, relative to the current loss, below which a run has converged.
pub const CONVERGENCE_RATIO: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantizeMode {
    Never,
    /// Once, after the last iteration.
    Final,
    EveryStep,
}

/// Hard constraints on sinogram values: a clamp to `[h_min, h_max]` and an
/// optional lattice of `2^b + 1` evenly spaced levels between the bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibleSet {
    h_min: f64,
    h_max: Option<f64>,
    bit_depth: Option<u32>,
    mode: QuantizeMode,
}

impl Default for FeasibleSet {
    fn default() -> Self {
        Self { h_min: 0.0, h_max: None, bit_depth: None, mode: QuantizeMode::Never }
    }
}

impl FeasibleSet {
    /// Non-negativity only.
    pub fn non_negative() -> Self {
        Self::default()
    }

    /// `mode` defaults to [`QuantizeMode::Final`] when a bit depth is given
    /// and to [`QuantizeMode::Never`] otherwise.
    pub fn new(
        h_min: f64,
        h_max: Option<f64>,
        bit_depth: Option<u32>,
        mode: Option<QuantizeMode>,
    ) -> Result<Self> {
        if !(h_min.is_finite() && h_min >= 0.0) {
            return Err(Error::InvalidParameter(format!("h_min must be finite and >= 0, got {h_min}")));
        }
        if let Some(h) = h_max {
            if !(h.is_finite() && h > h_min) {
                return Err(Error::InvalidParameter(format!("h_max must exceed h_min = {h_min}, got {h}")));
            }
        }
        if bit_depth == Some(0) || bit_depth.is_some_and(|b| b > 52) {
            return Err(Error::InvalidParameter(format!("bit depth must be in 1..=52, got {bit_depth:?}")));
        }
        let mode =
            mode.unwrap_or(if bit_depth.is_some() { QuantizeMode::Final } else { QuantizeMode::Never });
        if mode != QuantizeMode::Never {
            if bit_depth.is_none() {
                return Err(Error::InvalidParameter("quantization requested without a bit depth".into()));
            }
            if h_max.is_none() {
                return Err(Error::InvalidParameter("quantization lattice needs h_max".into()));
            }
        }
        Ok(Self { h_min, h_max, bit_depth, mode })
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn h_max(&self) -> Option<f64> {
        self.h_max
    }

    pub fn bit_depth(&self) -> Option<u32> {
        self.bit_depth
    }

    pub fn mode(&self) -> QuantizeMode {
        self.mode
    }

    /// Lattice spacing `(h_max - h_min) / 2^b`, when a lattice is defined.
    pub fn lattice_step(&self) -> Option<f64> {
        match (self.h_max, self.bit_depth) {
            (Some(hi), Some(b)) => Some((hi - self.h_min) / 2f64.powi(b as i32)),
            _ => None,
        }
    }

    fn clamp<T: Scalar>(&self, v: T) -> T {
        let lo = T::lit(self.h_min);
        let v = v.max(lo);
        match self.h_max {
            Some(hi) => v.min(T::lit(hi)),
            None => v,
        }
    }

    fn snap<T: Scalar>(&self, v: T, step: f64, levels: f64) -> T {
        let lo = T::lit(self.h_min);
        let step_t = T::lit(step);
        let c = ((v - lo) / step_t).round().max(T::zero()).min(T::lit(levels));
        c * step_t + lo
    }

    fn apply<T: Scalar>(&self, g: &Sinogram<T>, quantize: bool) -> Result<Sinogram<T>> {
        if !quantize {
            return Ok(g.map(|v| self.clamp(v)));
        }
        let step = self.lattice_step().ok_or_else(|| {
            Error::InvalidParameter("quantization lattice needs h_max and a bit depth".into())
        })?;
        let levels = 2f64.powi(self.bit_depth.unwrap_or(0) as i32);
        Ok(g.map(|v| self.snap(self.clamp(v), step, levels)))
    }
}

/// Projection used inside the iteration: clamp, plus lattice rounding when
/// the mode is [`QuantizeMode::EveryStep`].
pub fn project_feasible<T: Scalar>(fs: &FeasibleSet, g: &Sinogram<T>) -> Result<Sinogram<T>> {
    fs.apply(g, fs.mode == QuantizeMode::EveryStep)
}

/// Clamp followed by lattice rounding regardless of mode. Errors when the
/// lattice is undefined.
pub fn project_quantized<T: Scalar>(fs: &FeasibleSet, g: &Sinogram<T>) -> Result<Sinogram<T>> {
    fs.apply(g, true)
}

/// True iff `k ≥ 5` and the mean of `|L_i - L_{i-1}|` over `i = k-4..=k` is at
/// most `0.001 · L_k`.
pub fn converged<T: Scalar>(history: &[T], k: usize) -> bool {
    if k < CONVERGENCE_WINDOW || k >= history.len() {
        return false;
    }
    let mut total = T::zero();
    for i in k + 1 - CONVERGENCE_WINDOW..=k {
        total += (history[i] - history[i - 1]).abs();
    }
    total / T::lit(CONVERGENCE_WINDOW as f64) <= T::lit(CONVERGENCE_RATIO) * history[k]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub eta: f64,
    pub max_iters: usize,
    /// Stop early when [`converged`] holds. Zero loss always stops the run.
    pub check_convergence: bool,
}

impl OptimizerConfig {
    pub fn new(eta: f64, max_iters: usize) -> Result<Self> {
        let cfg = Self { eta, max_iters, check_convergence: true };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {}", self.eta)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ZeroLoss,
    Converged,
    MaxIters,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ZeroLoss => "zero_loss",
            Self::Converged => "converged",
            Self::MaxIters => "max_iters",
        }
    }
}

/// Loss state of iterate `g_k`, recorded before the step from `g_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub loss: T,
    pub violation_fraction: T,
    pub max_excess: T,
    pub eta: f64,
}

/// Final sinogram with its dose, response and loss.
#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub sinogram: Sinogram<T>,
    pub dose: Field<T>,
    pub response: Field<T>,
    pub report: LossReport<T>,
}

#[derive(Clone, Debug)]
pub struct RunRecord<T> {
    pub history: Vec<IterationRecord<T>>,
    pub termination: Termination,
    pub solution: Solution<T>,
    /// Present when the lattice was applied once after the loop.
    pub quantized: Option<Solution<T>>,
}

impl<T: Scalar> RunRecord<T> {
    pub fn losses(&self) -> Vec<T> {
        self.history.iter().map(|r| r.loss).collect()
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

/// `g_{k+1} = project(g_k - η ∇L(P* g_k))`, with the loss report of `g_k`.
pub fn pgd_step<T: Scalar, P: Propagation<T> + ?Sized>(
    g: &Sinogram<T>,
    spec: &ProblemSpec<T>,
    prop: &P,
    fs: &FeasibleSet,
    eta: f64,
    k: usize,
) -> Result<(Sinogram<T>, LossReport<T>)> {
    let f = prop.backward(g)?;
    let (report, grad) = loss_and_gradient(spec, &f, prop, k)?;
    let next = project_feasible(fs, &g.axpy(-T::lit(eta), &grad)?)?;
    if !next.is_finite() {
        return Err(Error::NonFinite(format!("iterate after step {k}")));
    }
    Ok((next, report))
}

fn solution<T: Scalar, P: Propagation<T> + ?Sized>(
    g: Sinogram<T>,
    spec: &ProblemSpec<T>,
    prop: &P,
    k: usize,
) -> Result<Solution<T>> {
    let dose = prop.backward(&g)?;
    let report = loss(spec, &dose, k)?;
    let response = spec.response().respond_field(&dose);
    Ok(Solution { sinogram: g, dose, response, report })
}

/// Runs projected gradient descent from `g0` until the loss is zero, the
/// convergence test passes, or `max_iters` iterates have been evaluated.
///
/// With alternating weights a zero loss only measures one of the two weight
/// sets, so the run stops once two consecutive iterates have zero loss.
pub fn run<T: Scalar, P: Propagation<T> + ?Sized>(
    spec: &ProblemSpec<T>,
    prop: &P,
    fs: &FeasibleSet,
    cfg: &OptimizerConfig,
    g0: &Sinogram<T>,
) -> Result<RunRecord<T>> {
    cfg.validate()?;
    g0.check_spec(prop.sinogram_spec())?;
    let alternating = spec.weights().is_alternating();
    let eta = T::lit(cfg.eta);
    let mut g = g0.clone();
    let mut history: Vec<IterationRecord<T>> = Vec::new();
    let mut losses: Vec<T> = Vec::new();
    let mut termination = Termination::MaxIters;
    let mut final_k = 0;

    for k in 0..cfg.max_iters {
        let f = prop.backward(&g)?;
        let (report, grad) = loss_and_gradient(spec, &f, prop, k)?;
        history.push(IterationRecord {
            loss: report.loss,
            violation_fraction: report.violation_fraction,
            max_excess: report.max_excess,
            eta: cfg.eta,
        });
        losses.push(report.loss);
        final_k = k;

        let zero = report.loss == T::zero();
        if zero && (!alternating || (k > 0 && losses[k - 1] == T::zero())) {
            termination = Termination::ZeroLoss;
            break;
        }
        if cfg.check_convergence && converged(&losses, k) {
            termination = Termination::Converged;
            break;
        }
        if k + 1 == cfg.max_iters {
            break;
        }
        g = project_feasible(fs, &g.axpy(-eta, &grad)?)?;
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("iterate after step {k}")));
        }
    }

    let quantized = if fs.mode() == QuantizeMode::Final {
        let gq = project_quantized(fs, &g)?;
        Some(solution(gq, spec, prop, final_k)?)
    } else {
        None
    };
    let solution = solution(g, spec, prop, final_k)?;
    Ok(RunRecord { history, termination, solution, quantized })
}
