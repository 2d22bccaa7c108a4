//! Drivers for single runs and sweeps, and the files they write.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bclp_core::io::{read_field, read_sinogram, write_field, write_sinogram};
use bclp_core::metrics::{
    error_histogram, excess_range, in_part_dose_range, jaccard, positive_moment, violation_volume,
    voxel_error_rate, Histogram,
};
use bclp_core::{
    analytic_init, inscribed_disk_mask, loss, lsq_init, make_grid, operator_norm_sq, osmo_preset, pm_preset,
    project_feasible, run, FeasibleSet, Field, FilterKind, GridSpec, LogisticParams, OptimizerConfig,
    PmParams, ProblemSpec, Propagation, Propagator, QuantizeMode, ResponseModel, RunRecord, Scalar, Sinogram,
    SinogramSpec, SparseOperator, WeightSchedule,
};
use rayon::prelude::*;

use crate::config::{
    EtaUnit, FilterName, InitMethod, Precision, QuantizeName, RegionConfig, ResponseKind, RunConfig,
    SchemeKind, Support,
};
use crate::error::{CliError, Context, Result};
use crate::pgm;
use crate::phantom::generate_phantom;

/// Power iterations used to normalize step sizes.
pub const NORM_ITERS: usize = 30;

/// Outcome of one run, in `f64` whatever the working precision.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub final_loss: f64,
    pub iterations: usize,
    pub termination: String,
    pub violation_fraction: f64,
    pub max_excess: f64,
    /// Share of weighted voxels whose error is inside the band.
    pub in_band_fraction: f64,
    /// Step size actually used, in absolute units.
    pub eta: f64,
    pub losses: Vec<f64>,
    pub histogram: Histogram<f64>,
}

fn to_scalar<T: Scalar>(f: &Field<f64>) -> Field<T> {
    Field::new(*f.grid(), f.values().iter().map(|&v| T::lit(v)).collect(), f.unit())
        .expect("finite values stay finite")
}

fn indicator<T: Scalar>(f: &Field<T>, pred: impl Fn(T) -> bool) -> Field<T> {
    f.map(|v| if pred(v) { T::one() } else { T::zero() }).with_unit("1")
}

pub fn build_grid(cfg: &RunConfig) -> Result<GridSpec> {
    let g = &cfg.grid;
    make_grid(g.nx, g.ny, g.nz, g.voxel_size_cm).context(|| "grid".into())
}

fn region_field<T: Scalar>(grid: &GridSpec, r: &RegionConfig, name: &str, unit: &str) -> Result<Field<T>> {
    let mut f = match &r.path {
        Some(p) => {
            let f: Field<T> = read_field(p).context(|| format!("{name}.path {}", p.display()))?;
            if f.grid() != grid {
                return Err(CliError::config(
                    format!("{name}.path"),
                    format!("{} has grid {:?}, config has {:?}", p.display(), f.grid(), grid),
                ));
            }
            f.with_unit(unit)
        }
        None => Field::filled(*grid, T::lit(r.value), unit),
    };
    if let (Some(radius), Some(value)) = (r.disk_radius_cm, r.disk_value) {
        let disk: Field<T> = bclp_core::disk_mask(grid, radius);
        for (v, &d) in f.values_mut().iter_mut().zip(disk.values()) {
            if d == T::one() {
                *v = T::lit(value);
            }
        }
    }
    Ok(f)
}

fn response_model<T: Scalar>(cfg: &RunConfig) -> Result<ResponseModel<T>> {
    let r = &cfg.response;
    match r.variant {
        ResponseKind::Linear => Ok(ResponseModel::linear_identity()),
        ResponseKind::Logistic => {
            ResponseModel::logistic(LogisticParams { a: r.a, k: r.k, b: r.b, m_shift: r.m_shift, nu: r.nu })
                .context(|| "response".into())
        }
    }
}

/// Everything a run needs before choosing a starting point.
pub struct Setup<T: Scalar> {
    pub grid: GridSpec,
    pub prop: Propagator<T>,
    pub matrix: Option<SparseOperator<T>>,
    /// Response target as configured.
    pub target: Field<T>,
    pub problem: ProblemSpec<T>,
    /// Part indicator for the binary metrics and the binary schemes.
    pub binary: Option<Field<T>>,
    pub feasible: FeasibleSet,
    /// Step prescribed by the scheme, in absolute units.
    pub scheme_eta: Option<f64>,
    /// Voxels that can absorb light.
    pub support: Field<T>,
}

impl<T: Scalar> Setup<T> {
    /// The operator used for iterations: the sparse matrix when built.
    pub fn op(&self) -> &dyn Propagation<T> {
        match &self.matrix {
            Some(m) => m,
            None => &self.prop,
        }
    }
}

fn feasible_set(cfg: &RunConfig) -> Result<FeasibleSet> {
    let f = &cfg.feasible;
    let mode = f.quantize.map(|q| match q {
        QuantizeName::Never => QuantizeMode::Never,
        QuantizeName::Final => QuantizeMode::Final,
        QuantizeName::EveryStep => QuantizeMode::EveryStep,
    });
    FeasibleSet::new(f.h_min, f.h_max, f.bit_depth, mode).context(|| "feasible".into())
}

pub fn build_setup<T: Scalar>(cfg: &RunConfig) -> Result<Setup<T>> {
    let grid = build_grid(cfg)?;
    let s = &cfg.sinogram;
    let spec = SinogramSpec::uniform(
        &grid,
        s.n_rho.unwrap_or(grid.nx),
        s.n_theta,
        s.angle_start_deg.to_radians(),
        s.coverage_deg.to_radians(),
    )
    .context(|| "sinogram".into())?;

    let p = &cfg.propagator;
    let region: Field<T> = match p.support {
        Support::Disk => inscribed_disk_mask(&grid).context(|| "propagator.support".into())?,
        Support::Full => Field::filled(grid, T::one(), "1"),
    };
    let prop = Propagator::new(
        spec,
        region.scale(T::lit(p.alpha_total)).with_unit("1/cm"),
        region.scale(T::lit(p.alpha_act)).with_unit("1/cm"),
    )
    .context(|| "propagator".into())?;
    let matrix = if p.matrix {
        let limit = (p.max_matrix_mb * 1024.0 * 1024.0) as u64;
        Some(prop.build_matrix(limit).context(|| "propagator.matrix".into())?)
    } else {
        None
    };
    let support = indicator(prop.alpha_act(), |a| a > T::zero());

    let target = to_scalar::<T>(&generate_phantom(&grid, &cfg.target)?);
    let tolerance = region_field::<T>(&grid, &cfg.tolerance, "tolerance", "response")?;
    let weights =
        region_field::<T>(&grid, &cfg.weights, "weights", "1")?.mul(&support).context(|| "weights".into())?;
    let response = response_model::<T>(cfg)?;
    let binary_part = indicator(&target, |v| v >= T::lit(0.5));
    let target_is_binary = target.values().iter().all(|&v| v == T::zero() || v == T::one());
    let on_support = |w: &Field<T>| w.mul(&weights).context(|| "weights".into());

    let sc = &cfg.scheme;
    let (problem, binary, scheme_eta) = match sc.kind {
        SchemeKind::Bclp => {
            let spec =
                ProblemSpec::constant(target.clone(), tolerance, weights, cfg.loss.p, cfg.loss.q, response)
                    .context(|| "problem".into())?;
            (spec, target_is_binary.then(|| binary_part.clone()), None)
        }
        SchemeKind::Dm => {
            let preset = bclp_core::dm_preset(&target, response).context(|| "scheme = dm".into())?;
            let w = on_support(preset.spec.weights().at(0))?;
            let spec =
                preset.spec.with_weights(WeightSchedule::Constant(w)).context(|| "scheme = dm".into())?;
            (spec, target_is_binary.then(|| binary_part.clone()), preset.eta)
        }
        SchemeKind::Pm => {
            let params = PmParams {
                d_h: sc.d_h,
                d_l: sc.d_l,
                rho1: sc.rho1,
                rho2: sc.rho2,
                erosion_width: sc.erosion,
                far: sc.far,
            };
            let preset = pm_preset(&binary_part, &params).context(|| "scheme = pm".into())?;
            let w = on_support(preset.spec.weights().at(0))?;
            let spec =
                preset.spec.with_weights(WeightSchedule::Constant(w)).context(|| "scheme = pm".into())?;
            (spec, Some(binary_part.clone()), preset.eta)
        }
        SchemeKind::Osmo => {
            let preset = osmo_preset(&binary_part, sc.d_h, sc.d_l, sc.alternating, sc.far)
                .context(|| "scheme = osmo".into())?;
            let schedule = match preset.spec.weights() {
                WeightSchedule::Constant(w) => WeightSchedule::Constant(on_support(w)?),
                WeightSchedule::Alternating { even, odd } => {
                    WeightSchedule::Alternating { even: on_support(even)?, odd: on_support(odd)? }
                }
            };
            let spec = preset.spec.with_weights(schedule).context(|| "scheme = osmo".into())?;
            (spec, Some(binary_part.clone()), preset.eta)
        }
    };

    Ok(Setup {
        grid,
        prop,
        matrix,
        target,
        problem,
        binary,
        feasible: feasible_set(cfg)?,
        scheme_eta,
        support,
    })
}

/// Target dose the starting point aims for. The binary schemes aim for
/// `d_h` inside the part and nothing outside.
fn init_problem<T: Scalar>(cfg: &RunConfig, setup: &Setup<T>) -> Result<ProblemSpec<T>> {
    match cfg.scheme.kind {
        SchemeKind::Bclp | SchemeKind::Dm => Ok(setup.problem.clone()),
        SchemeKind::Pm | SchemeKind::Osmo => {
            let part = setup.binary.as_ref().expect("binary schemes have a part");
            ProblemSpec::constant(
                part.scale(T::lit(cfg.scheme.d_h)).with_unit("J/cm^3"),
                Field::zeros(setup.grid, "J/cm^3"),
                setup.support.clone(),
                2.0,
                1.0,
                ResponseModel::linear_identity(),
            )
            .context(|| "initial dose".into())
        }
    }
}

pub fn initial_sinogram<T: Scalar>(cfg: &RunConfig, setup: &Setup<T>) -> Result<Sinogram<T>> {
    let spec = setup.prop.sinogram_spec();
    let op = setup.op();
    match cfg.init.method {
        InitMethod::Zero => Ok(Sinogram::zeros(spec.clone())),
        InitMethod::File => {
            let p = cfg.init.path.as_ref().expect("validated");
            let g = read_sinogram(p, spec).context(|| format!("init.path {}", p.display()))?;
            project_feasible(&setup.feasible, &g).context(|| "init".into())
        }
        InitMethod::Analytic => {
            let kind = match cfg.init.filter {
                FilterName::RamLak => FilterKind::RamLak,
                FilterName::SheppLogan => FilterKind::SheppLogan,
            };
            analytic_init(&init_problem(cfg, setup)?, op, &setup.feasible, kind).context(|| "init".into())
        }
        InitMethod::Lsq => {
            let problem = init_problem(cfg, setup)?;
            let dose = problem
                .response()
                .invert_field(problem.target())
                .mul(&setup.support)
                .context(|| "init".into())?;
            let res = lsq_init(op, &dose, cfg.init.lsq_iters).context(|| "init".into())?;
            project_feasible(&setup.feasible, &res.sinogram).context(|| "init".into())
        }
    }
}

/// `V_w^((p - q) / p)` with `V_w = Σ w ΔV`: the loss gradient carries this
/// power of the weighted volume, so dividing it out keeps normalized steps
/// independent of voxel size and part size.
fn weighted_volume_factor<T: Scalar>(spec: &ProblemSpec<T>) -> f64 {
    let w = spec.weights().at(0);
    let v: f64 = w.values().iter().map(|x| x.as_f64()).sum::<f64>() * spec.grid().voxel_volume();
    if v > 0.0 {
        v.powf((spec.p() - spec.q()) / spec.p())
    } else {
        1.0
    }
}

/// Absolute step size: the configured value, else the scheme's step, else 1.
/// Only a configured value is subject to `optimizer.eta_unit`.
pub fn absolute_eta<T: Scalar>(cfg: &RunConfig, setup: &Setup<T>) -> Result<f64> {
    match (cfg.optimizer.eta, setup.scheme_eta) {
        (None, Some(eta)) => Ok(eta),
        (eta, _) => {
            let eta = eta.unwrap_or(1.0);
            match cfg.optimizer.eta_unit {
                EtaUnit::Absolute => Ok(eta),
                EtaUnit::Normalized => {
                    let lambda =
                        operator_norm_sq(setup.op(), NORM_ITERS).context(|| "step size".into())?.as_f64();
                    if !(lambda > 0.0) {
                        return Err(CliError::config(
                            "optimizer.eta_unit",
                            "propagator is zero, cannot normalize the step size",
                        ));
                    }
                    Ok(eta * weighted_volume_factor(&setup.problem) / lambda)
                }
            }
        }
    }
}

fn write_csv(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn core_io<V>(r: bclp_core::Result<V>, path: &Path) -> Result<V> {
    r.context(|| format!("writing {}", path.display()))
}

fn save_field<T: Scalar>(dir: &Path, name: &str, f: &Field<T>) -> Result<()> {
    let p = dir.join(name);
    core_io(write_field(&p, f), &p)
}

fn save_sinogram<T: Scalar>(dir: &Path, name: &str, g: &Sinogram<T>) -> Result<()> {
    let p = dir.join(name);
    core_io(write_sinogram(&p, g), &p)
}

/// Middle `z` slice, top row at the largest `y`.
fn render<T: Scalar>(path: &Path, f: &Field<T>) -> Result<()> {
    let g = f.grid();
    let slice = f.slice(g.nz / 2);
    let mut rows = Vec::with_capacity(g.slice_len());
    for j in (0..g.ny).rev() {
        rows.extend(slice[j * g.nx..(j + 1) * g.nx].iter().map(|v| v.as_f64()));
    }
    pgm::write(path, &pgm::render_unit(g.nx, g.ny, &rows))
}

/// Histogram range with a bin edge exactly on the band edge `E = 0`.
fn band_aligned_range(lo: f64, hi: f64, bins: usize) -> (f64, f64) {
    if hi <= 0.0 || bins == 1 {
        return (lo, hi.max(0.0).max(lo + f64::EPSILON));
    }
    if lo >= 0.0 {
        return (0.0, hi);
    }
    let below = ((bins as f64 * -lo / (hi - lo)).round() as usize).clamp(1, bins - 1);
    let width = (-lo / below as f64).max(hi / (bins - below) as f64);
    (-(below as f64) * width, (bins - below) as f64 * width)
}

fn histogram_f64<T: Scalar>(h: &Histogram<T>) -> Histogram<f64> {
    Histogram {
        edges: h.edges.iter().map(|v| v.as_f64()).collect(),
        mass: h.mass.iter().map(|v| v.as_f64()).collect(),
    }
}

/// Metrics of dose `f` at iteration `k`, as `(name, value, flags)` rows.
pub struct Evaluation {
    pub rows: Vec<(String, String, String)>,
    pub in_band_fraction: f64,
    pub histogram: Histogram<f64>,
}

pub fn evaluate<T: Scalar>(cfg: &RunConfig, setup: &Setup<T>, f: &Field<T>, k: usize) -> Result<Evaluation> {
    let spec = &setup.problem;
    let ctx = || "metrics".to_string();
    let mut rows: Vec<(String, String, String)> = Vec::new();
    let mut push =
        |name: &str, value: f64, flags: &str| rows.push((name.into(), value.to_string(), flags.into()));

    let report = loss(spec, f, k).context(ctx)?;
    push(&format!("bclp_p{}_q{}", spec.p(), spec.q()), report.loss.as_f64(), "");
    push("violation_volume", violation_volume(spec, f, k).context(ctx)?.as_f64(), "");
    push("violation_fraction", report.violation_fraction.as_f64(), "");
    let empty = report.max_excess == T::zero() && report.violation_fraction == T::zero();
    push("max_excess", report.max_excess.as_f64(), if empty { "empty" } else { "" });

    let e = spec.excess(f).context(ctx)?;
    let w = spec.weights().at(k);
    let (mut weighted, mut inside) = (0usize, 0usize);
    for (&ev, &wv) in e.values().iter().zip(w.values()) {
        if wv > T::zero() {
            weighted += 1;
            inside += (ev <= T::zero()) as usize;
        }
    }
    let in_band_fraction = if weighted == 0 { 1.0 } else { inside as f64 / weighted as f64 };
    push("in_band_fraction", in_band_fraction, if weighted == 0 { "empty" } else { "" });
    push(&format!("moment_p{}", spec.p()), positive_moment(spec, f, k, spec.p()).context(ctx)?.as_f64(), "");

    if let Some(part) = &setup.binary {
        let jac = jaccard(f, spec.response(), part, T::lit(cfg.output.jaccard_threshold)).context(ctx)?;
        push("jaccard", jac.value.as_f64(), if jac.empty { "empty" } else { "" });
        push("ver", voxel_error_rate(f, spec.response(), part).context(ctx)?.as_f64(), "");
        push("ipdr", in_part_dose_range(f, spec.response(), part).context(ctx)?.as_f64(), "response_ratio");
    }

    let bins = cfg.output.histogram_bins;
    let (lo, hi) = excess_range(spec, f, k).context(ctx)?;
    let (lo, hi) = band_aligned_range(lo.as_f64(), hi.as_f64(), bins);
    let hist = error_histogram(spec, f, k, bins, (T::lit(lo), T::lit(hi))).context(ctx)?;
    Ok(Evaluation { rows, in_band_fraction, histogram: histogram_f64(&hist) })
}

fn metrics_csv(rows: &[(String, String, String)]) -> String {
    let mut out = String::from("name,value,flags\n");
    for (n, v, f) in rows {
        let _ = writeln!(out, "{n},{v},{f}");
    }
    out
}

fn histogram_csv(h: &Histogram<f64>) -> String {
    let mut out = String::from("bin_left,bin_right,weighted_volume\n");
    for (b, m) in h.mass.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", h.edges[b], h.edges[b + 1], m);
    }
    out
}

fn convergence_csv<T: Scalar>(record: &RunRecord<T>) -> String {
    let mut out = String::from("iteration,loss,violation_fraction,max_excess,eta\n");
    for (k, r) in record.history.iter().enumerate() {
        let _ = writeln!(out, "{k},{},{},{},{}", r.loss, r.violation_fraction, r.max_excess, r.eta);
    }
    out
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn run_typed<T: Scalar>(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    create_dir(out)?;
    let setup = build_setup::<T>(cfg)?;
    let g0 = initial_sinogram(cfg, &setup)?;
    let eta = absolute_eta(cfg, &setup)?;
    let opt = OptimizerConfig {
        eta,
        max_iters: cfg.optimizer.max_iters,
        check_convergence: cfg.optimizer.check_convergence,
    };
    let record =
        run(&setup.problem, setup.op(), &setup.feasible, &opt, &g0).context(|| "optimization".into())?;
    let last = record.iterations() - 1;
    let sol = &record.solution;

    write_csv(&out.join("config.txt"), &cfg.to_text())?;
    save_sinogram(out, "g0.f32", &g0)?;
    save_sinogram(out, "sinogram.f32", &sol.sinogram)?;
    if let Some(q) = &record.quantized {
        save_sinogram(out, "quantized_sinogram.f32", &q.sinogram)?;
    }
    save_field(out, "target.f32", &setup.target)?;
    save_field(out, "dose.f32", &sol.dose)?;
    save_field(out, "response.f32", &sol.response)?;
    let error = sol.response.sub(setup.problem.target()).context(|| "response error".into())?;
    save_field(out, "response_error.f32", &error.with_unit("response"))?;
    save_field(out, "band_excess.f32", &setup.problem.excess(&sol.dose).context(|| "band excess".into())?)?;

    let eval = evaluate(cfg, &setup, &sol.dose, last)?;
    let mut rows = vec![
        ("termination".to_string(), record.termination.as_str().to_string(), String::new()),
        ("iterations".to_string(), record.iterations().to_string(), String::new()),
        ("final_loss".to_string(), sol.report.loss.to_string(), String::new()),
        ("eta".to_string(), eta.to_string(), String::new()),
    ];
    rows.extend(eval.rows);
    if let Some(q) = &record.quantized {
        rows.push(("final_loss_quantized".into(), q.report.loss.to_string(), String::new()));
    }
    write_csv(&out.join("metrics.csv"), &metrics_csv(&rows))?;
    write_csv(&out.join("convergence.csv"), &convergence_csv(&record))?;
    write_csv(&out.join("histogram.csv"), &histogram_csv(&eval.histogram))?;
    if cfg.output.renders {
        render(&out.join("target.pgm"), &setup.target)?;
        render(&out.join("response.pgm"), &sol.response)?;
    }

    Ok(RunSummary {
        final_loss: sol.report.loss.as_f64(),
        iterations: record.iterations(),
        termination: record.termination.as_str().to_string(),
        violation_fraction: sol.report.violation_fraction.as_f64(),
        max_excess: sol.report.max_excess.as_f64(),
        in_band_fraction: eval.in_band_fraction,
        eta,
        losses: record.losses().iter().map(|v| v.as_f64()).collect(),
        histogram: eval.histogram,
    })
}

/// Runs the optimization described by `cfg` and writes its outputs into `out`.
pub fn run_single(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    match cfg.precision {
        Precision::F64 => run_typed::<f64>(cfg, out),
        Precision::F32 => run_typed::<f32>(cfg, out),
    }
}

/// One row of a sweep summary.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: String,
    pub dir: PathBuf,
    pub outcome: std::result::Result<RunSummary, String>,
}

fn summary_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{param},final_loss,iterations,violation_fraction,max_excess,termination,error\n");
    for r in rows {
        match &r.outcome {
            Ok(s) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},",
                    r.value, s.final_loss, s.iterations, s.violation_fraction, s.max_excess, s.termination
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{},,,,,error,\"{}\"", r.value, e.replace('"', "'"));
            }
        }
    }
    out
}

/// Runs every sweep value into `out/run_NNN` and writes `out/summary.csv`.
/// A failing run is recorded in its row and the sweep continues.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepRow>> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::config("sweep", "no sweep.param configured"))?;
    create_dir(out)?;
    write_csv(&out.join("config.txt"), &cfg.to_text())?;
    let one = |(i, value): (usize, &String)| {
        let dir = out.join(format!("run_{i:03}"));
        let outcome = cfg
            .sweep_point(i, value)
            .map_err(|e| CliError::config("sweep", e))
            .and_then(|point| run_single(&point, &dir))
            .map_err(|e| e.to_string());
        SweepRow { value: value.clone(), dir, outcome }
    };
    let rows: Vec<SweepRow> = if sweep.parallel {
        sweep.values.par_iter().enumerate().map(one).collect()
    } else {
        sweep.values.iter().enumerate().map(one).collect()
    };
    write_csv(&out.join("summary.csv"), &summary_csv(&sweep.param, &rows))?;
    Ok(rows)
}

fn init_typed<T: Scalar>(cfg: &RunConfig, out: &Path) -> Result<()> {
    create_dir(out)?;
    let setup = build_setup::<T>(cfg)?;
    let g0 = initial_sinogram(cfg, &setup)?;
    save_sinogram(out, "g0.f32", &g0)?;
    let dose = setup.op().backward(&g0).context(|| "initial dose".into())?;
    save_field(out, "g0_dose.f32", &dose)
}

/// Writes the starting sinogram and its dose.
pub fn run_init(cfg: &RunConfig, out: &Path) -> Result<()> {
    match cfg.precision {
        Precision::F64 => init_typed::<f64>(cfg, out),
        Precision::F32 => init_typed::<f32>(cfg, out),
    }
}

/// Existing result to evaluate.
#[derive(Clone, Debug)]
pub enum MetricsInput {
    Dose(PathBuf),
    Sinogram(PathBuf),
}

fn metrics_typed<T: Scalar>(cfg: &RunConfig, input: &MetricsInput, out: &Path) -> Result<Evaluation> {
    create_dir(out)?;
    let mut cfg = cfg.clone();
    // the matrix only pays off over many iterations
    cfg.propagator.matrix = false;
    let setup = build_setup::<T>(&cfg)?;
    let dose: Field<T> = match input {
        MetricsInput::Dose(p) => {
            let f: Field<T> = read_field(p).context(|| format!("dose {}", p.display()))?;
            if f.grid() != &setup.grid {
                return Err(CliError::config(
                    "--dose",
                    format!("{} does not match the configured grid", p.display()),
                ));
            }
            f
        }
        MetricsInput::Sinogram(p) => {
            let g = read_sinogram(p, setup.prop.sinogram_spec())
                .context(|| format!("sinogram {}", p.display()))?;
            setup.prop.backward(&g).context(|| "dose".into())?
        }
    };
    let eval = evaluate(&cfg, &setup, &dose, 0)?;
    write_csv(&out.join("metrics.csv"), &metrics_csv(&eval.rows))?;
    write_csv(&out.join("histogram.csv"), &histogram_csv(&eval.histogram))?;
    Ok(eval)
}

/// Evaluates metrics of a dose or sinogram file against the configured problem.
pub fn run_metrics(cfg: &RunConfig, input: &MetricsInput, out: &Path) -> Result<Evaluation> {
    match cfg.precision {
        Precision::F64 => metrics_typed::<f64>(cfg, input, out),
        Precision::F32 => metrics_typed::<f32>(cfg, input, out),
    }
}

/// Writes the configured target as a field file and a render.
pub fn run_phantom(cfg: &RunConfig, out: &Path) -> Result<Field<f64>> {
    create_dir(out)?;
    let grid = build_grid(cfg)?;
    let target = generate_phantom(&grid, &cfg.target)?;
    save_field(out, "target.f32", &target)?;
    render(&out.join("target.pgm"), &target)?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_range_has_edge_at_zero() {
        for (lo, hi, bins) in [(-0.3, 0.1, 64), (-0.05, 2.0, 10), (-1.0, 1e-3, 7)] {
            let (a, b) = band_aligned_range(lo, hi, bins);
            assert!(a <= lo && b >= hi);
            let width = (b - a) / bins as f64;
            let k = (-a / width).round();
            assert!((a + k * width).abs() < 1e-12, "{a} {b}");
        }
        assert_eq!(band_aligned_range(-0.2, -0.01, 8), (-0.2, 0.0));
        assert_eq!(band_aligned_range(0.1, 0.5, 8), (0.0, 0.5));
    }
}
