//! Flat `key = value` run configuration.
//!
//! One setting per line, keys are dotted paths such as `grid.nx` or
//! `response.B`. Lines starting with `#` and blank lines are ignored. Unknown
//! keys are errors. An empty value clears an optional setting. Relative paths
//! are resolved against the directory of the config file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, Result};

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!("expected one of: {}", [$($text),+].join(", "))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

named_enum!(Precision { F32 => "f32", F64 => "f64" });

named_enum!(
    /// Where the attenuation and absorption coefficients are nonzero.
    Support { Disk => "disk", Full => "full" }
);

named_enum!(ResponseKind { Logistic => "logistic", Linear => "linear" });

named_enum!(PhantomKind {
    FourGratings => "four_gratings",
    BinaryGratings => "binary_gratings",
    Disk => "disk",
    GrayscaleImage => "grayscale_image",
    Binary3d => "binary_3d",
    Flower => "flower",
    Random => "random",
    File => "file",
});

named_enum!(SchemeKind { Bclp => "bclp", Dm => "dm", Pm => "pm", Osmo => "osmo" });

named_enum!(InitMethod { Analytic => "analytic", Lsq => "lsq", Zero => "zero", File => "file" });

named_enum!(FilterName { RamLak => "ram_lak", SheppLogan => "shepp_logan" });

named_enum!(QuantizeName { Never => "never", Final => "final", EveryStep => "every_step" });

named_enum!(
    /// `normalized` divides the configured step by the largest eigenvalue of
    /// `P P*` and multiplies it by `V_w^((p - q) / p)`, where `V_w` is the
    /// weighted volume, which makes step sizes portable across grids and
    /// absorptions.
    EtaUnit { Normalized => "normalized", Absolute => "absolute" }
);

named_enum!(
    /// `coupled_weight` sets `weights.disk_value = v` and
    /// `weights.value = (1 - 0.25 v) / (1 - 0.25)` for each swept value `v`.
    SweepMode { Plain => "plain", CoupledWeight => "coupled_weight" }
);

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub voxel_size_cm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SinogramConfig {
    /// Defaults to `grid.nx`.
    pub n_rho: Option<usize>,
    pub n_theta: usize,
    pub angle_start_deg: f64,
    pub coverage_deg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorConfig {
    pub alpha_total: f64,
    pub alpha_act: f64,
    pub support: Support,
    /// Materialize the sparse matrix for the iterations.
    pub matrix: bool,
    pub max_matrix_mb: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResponseConfig {
    pub variant: ResponseKind,
    pub a: f64,
    pub k: f64,
    pub b: f64,
    pub m_shift: f64,
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetConfig {
    pub kind: PhantomKind,
    pub path: Option<PathBuf>,
    /// Disk radius; defaults to a quarter of the grid width.
    pub radius_cm: Option<f64>,
    pub value: f64,
    /// Grating periods across one quadrant.
    pub periods: f64,
    /// Peak-to-peak grating amplitude, centered on 0.5.
    pub amplitude: f64,
    pub seed: u64,
}

/// A scalar field given as a constant, a file, or a constant with a
/// different value inside a centered disk.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionConfig {
    pub value: f64,
    pub path: Option<PathBuf>,
    pub disk_radius_cm: Option<f64>,
    pub disk_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossConfig {
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub d_h: f64,
    pub d_l: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub erosion: usize,
    pub far: f64,
    pub alternating: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    pub method: InitMethod,
    pub filter: FilterName,
    pub lsq_iters: usize,
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleConfig {
    pub h_min: f64,
    pub h_max: Option<f64>,
    pub bit_depth: Option<u32>,
    pub quantize: Option<QuantizeName>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerSection {
    /// Defaults to the scheme's step, or 1.
    pub eta: Option<f64>,
    pub eta_unit: EtaUnit,
    pub max_iters: usize,
    pub check_convergence: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub renders: bool,
    pub histogram_bins: usize,
    pub jaccard_threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub param: String,
    /// Raw values, applied as if written for `param`.
    pub values: Vec<String>,
    /// Per-value step overrides; empty or one per value.
    pub eta: Vec<f64>,
    pub mode: SweepMode,
    pub parallel: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub precision: Precision,
    pub grid: GridConfig,
    pub sinogram: SinogramConfig,
    pub propagator: PropagatorConfig,
    pub response: ResponseConfig,
    pub target: TargetConfig,
    pub tolerance: RegionConfig,
    pub weights: RegionConfig,
    pub loss: LossConfig,
    pub scheme: SchemeConfig,
    pub init: InitConfig,
    pub feasible: FeasibleConfig,
    pub optimizer: OptimizerSection,
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            precision: Precision::F64,
            grid: GridConfig { nx: 128, ny: 128, nz: 1, voxel_size_cm: 0.002 },
            sinogram: SinogramConfig { n_rho: None, n_theta: 360, angle_start_deg: 0.0, coverage_deg: 360.0 },
            propagator: PropagatorConfig {
                alpha_total: 0.001,
                alpha_act: 0.001,
                support: Support::Disk,
                matrix: true,
                max_matrix_mb: 4096.0,
            },
            response: ResponseConfig {
                variant: ResponseKind::Logistic,
                a: 0.0,
                k: 1.0,
                b: 10.0,
                m_shift: 0.5,
                nu: 1.0,
            },
            target: TargetConfig {
                kind: PhantomKind::FourGratings,
                path: None,
                radius_cm: None,
                value: 1.0,
                periods: 4.0,
                amplitude: 1.0,
                seed: 0,
            },
            tolerance: RegionConfig { value: 0.05, path: None, disk_radius_cm: None, disk_value: None },
            weights: RegionConfig { value: 1.0, path: None, disk_radius_cm: None, disk_value: None },
            loss: LossConfig { p: 2.0, q: 1.0 },
            scheme: SchemeConfig {
                kind: SchemeKind::Bclp,
                d_h: 0.8,
                d_l: 0.2,
                rho1: 1.0,
                rho2: 1.0,
                erosion: 2,
                far: 1e6,
                alternating: false,
            },
            init: InitConfig {
                method: InitMethod::Analytic,
                filter: FilterName::RamLak,
                lsq_iters: 20,
                path: None,
            },
            feasible: FeasibleConfig { h_min: 0.0, h_max: None, bit_depth: None, quantize: None },
            optimizer: OptimizerSection {
                eta: None,
                eta_unit: EtaUnit::Normalized,
                max_iters: 200,
                check_convergence: true,
            },
            output: OutputConfig { renders: true, histogram_bins: 64, jaccard_threshold: 0.5 },
            sweep: None,
        }
    }
}

fn parse<V: FromStr>(key: &str, raw: &str) -> std::result::Result<V, String>
where
    V::Err: fmt::Display,
{
    raw.parse().map_err(|e| format!("bad value {raw:?} for {key}: {e}"))
}

fn parse_opt<V: FromStr>(key: &str, raw: &str) -> std::result::Result<Option<V>, String>
where
    V::Err: fmt::Display,
{
    if raw.is_empty() {
        Ok(None)
    } else {
        parse(key, raw).map(Some)
    }
}

fn parse_list<V: FromStr>(key: &str, raw: &str) -> std::result::Result<Vec<V>, String>
where
    V::Err: fmt::Display,
{
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|s| parse(key, s.trim())).collect()
}

fn show_opt<V: fmt::Display>(v: &Option<V>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn join<V: fmt::Display>(values: &[V]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RegionConfig {
    fn set(&mut self, key: &str, field: &str, raw: &str) -> std::result::Result<(), String> {
        match field {
            "value" => self.value = parse(key, raw)?,
            "path" => self.path = parse_opt(key, raw)?,
            "disk_radius_cm" => self.disk_radius_cm = parse_opt(key, raw)?,
            "disk_value" => self.disk_value = parse_opt(key, raw)?,
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    fn pairs(&self, prefix: &str, out: &mut Vec<(String, String)>) {
        out.push((format!("{prefix}.value"), self.value.to_string()));
        out.push((format!("{prefix}.path"), show_path(&self.path)));
        out.push((format!("{prefix}.disk_radius_cm"), show_opt(&self.disk_radius_cm)));
        out.push((format!("{prefix}.disk_value"), show_opt(&self.disk_value)));
    }
}

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, raw: &str) -> std::result::Result<(), String> {
        let raw = raw.trim();
        let (section, field) = key.split_once('.').unwrap_or((key, ""));
        match (section, field) {
            ("precision", "") => self.precision = parse(key, raw)?,
            ("grid", "nx") => self.grid.nx = parse(key, raw)?,
            ("grid", "ny") => self.grid.ny = parse(key, raw)?,
            ("grid", "nz") => self.grid.nz = parse(key, raw)?,
            ("grid", "voxel_size_cm") => self.grid.voxel_size_cm = parse(key, raw)?,
            ("sinogram", "n_rho") => self.sinogram.n_rho = parse_opt(key, raw)?,
            ("sinogram", "n_theta") => self.sinogram.n_theta = parse(key, raw)?,
            ("sinogram", "angle_start_deg") => self.sinogram.angle_start_deg = parse(key, raw)?,
            ("sinogram", "coverage_deg") => self.sinogram.coverage_deg = parse(key, raw)?,
            ("propagator", "alpha_total") => self.propagator.alpha_total = parse(key, raw)?,
            ("propagator", "alpha_act") => self.propagator.alpha_act = parse(key, raw)?,
            ("propagator", "support") => self.propagator.support = parse(key, raw)?,
            ("propagator", "matrix") => self.propagator.matrix = parse(key, raw)?,
            ("propagator", "max_matrix_mb") => self.propagator.max_matrix_mb = parse(key, raw)?,
            ("response", "variant") => self.response.variant = parse(key, raw)?,
            ("response", "A") => self.response.a = parse(key, raw)?,
            ("response", "K") => self.response.k = parse(key, raw)?,
            ("response", "B") => self.response.b = parse(key, raw)?,
            ("response", "Mprime") => self.response.m_shift = parse(key, raw)?,
            ("response", "nu") => self.response.nu = parse(key, raw)?,
            ("target", "kind") => self.target.kind = parse(key, raw)?,
            ("target", "path") => self.target.path = parse_opt(key, raw)?,
            ("target", "radius_cm") => self.target.radius_cm = parse_opt(key, raw)?,
            ("target", "value") => self.target.value = parse(key, raw)?,
            ("target", "periods") => self.target.periods = parse(key, raw)?,
            ("target", "amplitude") => self.target.amplitude = parse(key, raw)?,
            ("target", "seed") => self.target.seed = parse(key, raw)?,
            ("tolerance", f) => self.tolerance.set(key, f, raw)?,
            ("weights", f) => self.weights.set(key, f, raw)?,
            ("loss", "p") => self.loss.p = parse(key, raw)?,
            ("loss", "q") => self.loss.q = parse(key, raw)?,
            ("scheme", "") => self.scheme.kind = parse(key, raw)?,
            ("scheme", "d_h") => self.scheme.d_h = parse(key, raw)?,
            ("scheme", "d_l") => self.scheme.d_l = parse(key, raw)?,
            ("scheme", "rho1") => self.scheme.rho1 = parse(key, raw)?,
            ("scheme", "rho2") => self.scheme.rho2 = parse(key, raw)?,
            ("scheme", "erosion") => self.scheme.erosion = parse(key, raw)?,
            ("scheme", "far") => self.scheme.far = parse(key, raw)?,
            ("scheme", "alternating") => self.scheme.alternating = parse(key, raw)?,
            ("init", "method") => self.init.method = parse(key, raw)?,
            ("init", "filter") => self.init.filter = parse(key, raw)?,
            ("init", "lsq_iters") => self.init.lsq_iters = parse(key, raw)?,
            ("init", "path") => self.init.path = parse_opt(key, raw)?,
            ("feasible", "h_min") => self.feasible.h_min = parse(key, raw)?,
            ("feasible", "h_max") => self.feasible.h_max = parse_opt(key, raw)?,
            ("feasible", "bit_depth") => self.feasible.bit_depth = parse_opt(key, raw)?,
            ("feasible", "quantize") => self.feasible.quantize = parse_opt(key, raw)?,
            ("optimizer", "eta") => self.optimizer.eta = parse_opt(key, raw)?,
            ("optimizer", "eta_unit") => self.optimizer.eta_unit = parse(key, raw)?,
            ("optimizer", "max_iters") => self.optimizer.max_iters = parse(key, raw)?,
            ("optimizer", "check_convergence") => self.optimizer.check_convergence = parse(key, raw)?,
            ("output", "renders") => self.output.renders = parse(key, raw)?,
            ("output", "histogram_bins") => self.output.histogram_bins = parse(key, raw)?,
            ("output", "jaccard_threshold") => self.output.jaccard_threshold = parse(key, raw)?,
            ("sweep", f) => self.set_sweep(key, f, raw)?,
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    fn set_sweep(&mut self, key: &str, field: &str, raw: &str) -> std::result::Result<(), String> {
        let sweep = self.sweep.get_or_insert_with(|| SweepConfig {
            param: String::new(),
            values: Vec::new(),
            eta: Vec::new(),
            mode: SweepMode::Plain,
            parallel: false,
        });
        match field {
            "param" => sweep.param = raw.to_string(),
            "values" => sweep.values = parse_list(key, raw)?,
            "eta" => sweep.eta = parse_list(key, raw)?,
            "mode" => sweep.mode = parse(key, raw)?,
            "parallel" => sweep.parallel = parse(key, raw)?,
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a fixed order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("precision", self.precision.to_string());
        push("grid.nx", self.grid.nx.to_string());
        push("grid.ny", self.grid.ny.to_string());
        push("grid.nz", self.grid.nz.to_string());
        push("grid.voxel_size_cm", self.grid.voxel_size_cm.to_string());
        push("sinogram.n_rho", show_opt(&self.sinogram.n_rho));
        push("sinogram.n_theta", self.sinogram.n_theta.to_string());
        push("sinogram.angle_start_deg", self.sinogram.angle_start_deg.to_string());
        push("sinogram.coverage_deg", self.sinogram.coverage_deg.to_string());
        push("propagator.alpha_total", self.propagator.alpha_total.to_string());
        push("propagator.alpha_act", self.propagator.alpha_act.to_string());
        push("propagator.support", self.propagator.support.to_string());
        push("propagator.matrix", self.propagator.matrix.to_string());
        push("propagator.max_matrix_mb", self.propagator.max_matrix_mb.to_string());
        push("response.variant", self.response.variant.to_string());
        push("response.A", self.response.a.to_string());
        push("response.K", self.response.k.to_string());
        push("response.B", self.response.b.to_string());
        push("response.Mprime", self.response.m_shift.to_string());
        push("response.nu", self.response.nu.to_string());
        push("target.kind", self.target.kind.to_string());
        push("target.path", show_path(&self.target.path));
        push("target.radius_cm", show_opt(&self.target.radius_cm));
        push("target.value", self.target.value.to_string());
        push("target.periods", self.target.periods.to_string());
        push("target.amplitude", self.target.amplitude.to_string());
        push("target.seed", self.target.seed.to_string());
        push("loss.p", self.loss.p.to_string());
        push("loss.q", self.loss.q.to_string());
        push("scheme", self.scheme.kind.to_string());
        push("scheme.d_h", self.scheme.d_h.to_string());
        push("scheme.d_l", self.scheme.d_l.to_string());
        push("scheme.rho1", self.scheme.rho1.to_string());
        push("scheme.rho2", self.scheme.rho2.to_string());
        push("scheme.erosion", self.scheme.erosion.to_string());
        push("scheme.far", self.scheme.far.to_string());
        push("scheme.alternating", self.scheme.alternating.to_string());
        push("init.method", self.init.method.to_string());
        push("init.filter", self.init.filter.to_string());
        push("init.lsq_iters", self.init.lsq_iters.to_string());
        push("init.path", show_path(&self.init.path));
        push("feasible.h_min", self.feasible.h_min.to_string());
        push("feasible.h_max", show_opt(&self.feasible.h_max));
        push("feasible.bit_depth", show_opt(&self.feasible.bit_depth));
        push("feasible.quantize", show_opt(&self.feasible.quantize));
        push("optimizer.eta", show_opt(&self.optimizer.eta));
        push("optimizer.eta_unit", self.optimizer.eta_unit.to_string());
        push("optimizer.max_iters", self.optimizer.max_iters.to_string());
        push("optimizer.check_convergence", self.optimizer.check_convergence.to_string());
        push("output.renders", self.output.renders.to_string());
        push("output.histogram_bins", self.output.histogram_bins.to_string());
        push("output.jaccard_threshold", self.output.jaccard_threshold.to_string());
        self.tolerance.pairs("tolerance", &mut out);
        self.weights.pairs("weights", &mut out);
        if let Some(s) = &self.sweep {
            out.push(("sweep.param".into(), s.param.clone()));
            out.push(("sweep.values".into(), s.values.join(",")));
            out.push(("sweep.eta".into(), join(&s.eta)));
            out.push(("sweep.mode".into(), s.mode.to_string()));
            out.push(("sweep.parallel".into(), s.parallel.to_string()));
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Parses config text. `source_name` labels errors; `base` resolves
    /// relative paths.
    pub fn parse_text(text: &str, source_name: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::config(source_name, format!("line {}: expected key = value", n + 1))
            })?;
            cfg.set(k.trim(), v)
                .map_err(|e| CliError::config(source_name, format!("line {}: {e}", n + 1)))?;
        }
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        cfg.validate().map_err(|e| CliError::config(source_name, e))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse_text(&text, &path.display().to_string(), path.parent())
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in
            [&mut self.target.path, &mut self.tolerance.path, &mut self.weights.path, &mut self.init.path]
                .into_iter()
                .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Checks that do not touch the file system.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let g = &self.grid;
        if g.nx == 0 || g.ny == 0 || g.nz == 0 {
            return Err("grid dimensions must be positive".into());
        }
        if !(g.voxel_size_cm.is_finite() && g.voxel_size_cm > 0.0) {
            return Err("grid.voxel_size_cm must be positive".into());
        }
        if !(self.loss.p > 0.0 && self.loss.q > 0.0) {
            return Err("loss.p and loss.q must be positive".into());
        }
        if self.optimizer.max_iters == 0 {
            return Err("optimizer.max_iters must be at least 1".into());
        }
        if self.output.histogram_bins == 0 {
            return Err("output.histogram_bins must be at least 1".into());
        }
        let needs_path = matches!(self.target.kind, PhantomKind::GrayscaleImage | PhantomKind::File);
        if needs_path && self.target.path.is_none() {
            return Err(format!("target.kind = {} needs target.path", self.target.kind));
        }
        if self.init.method == InitMethod::File && self.init.path.is_none() {
            return Err("init.method = file needs init.path".into());
        }
        for (name, r) in [("tolerance", &self.tolerance), ("weights", &self.weights)] {
            if r.disk_radius_cm.is_some() != r.disk_value.is_some() {
                return Err(format!("{name}.disk_radius_cm and {name}.disk_value go together"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.param.is_empty() {
                return Err("sweep.param is required when sweeping".into());
            }
            if s.param.starts_with("sweep") {
                return Err("a sweep cannot vary its own settings".into());
            }
            if s.values.is_empty() {
                return Err("sweep.values is empty".into());
            }
            if !s.eta.is_empty() && s.eta.len() != s.values.len() {
                return Err(format!("sweep.eta has {} entries for {} values", s.eta.len(), s.values.len()));
            }
            if s.mode == SweepMode::CoupledWeight && s.param != "weights.disk_value" {
                return Err("sweep.mode = coupled_weight sweeps weights.disk_value".into());
            }
            if s.mode == SweepMode::CoupledWeight && self.weights.disk_radius_cm.is_none() {
                return Err("sweep.mode = coupled_weight needs weights.disk_radius_cm".into());
            }
            for (i, v) in s.values.iter().enumerate() {
                self.sweep_point(i, v)?;
            }
        }
        Ok(())
    }

    /// The single-run config for value `i` of the sweep.
    pub fn sweep_point(&self, i: usize, value: &str) -> std::result::Result<RunConfig, String> {
        let s = self.sweep.as_ref().ok_or("no sweep configured")?;
        let mut cfg = self.clone();
        cfg.sweep = None;
        match s.mode {
            SweepMode::Plain => cfg.set(&s.param, value)?,
            SweepMode::CoupledWeight => {
                let w: f64 = parse(&s.param, value)?;
                cfg.weights.disk_value = Some(w);
                cfg.weights.value = (1.0 - 0.25 * w) / (1.0 - 0.25);
            }
        }
        if let Some(&eta) = s.eta.get(i) {
            cfg.optimizer.eta = Some(eta);
        }
        Ok(cfg)
    }
}
