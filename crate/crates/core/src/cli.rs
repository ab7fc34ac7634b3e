//! Config-driven experiment runs behind the `sps` binary.
//!
//! Every run writes `manifest.json` into the output directory before any
//! result, then the subcommand's result files, then rewrites the manifest
//! with the wall time. All files are written atomically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constants::{
    self, AscentConfig, BlowupOutcome, EstimateDocument, ScalingSource, ScalingTable, ThresholdVerdict,
};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Grid, GridMeta};
use crate::identities::IdentityReport;
use crate::minimize::{self, GroundStateResult, Init, MinimizeConfig, TracePoint};
use crate::params::{Params, Variant};
use crate::snapshot;
use crate::spectral::{self, EnergyBreakdown};

/// Version of every CSV layout written here.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Energy,
    Minimize,
    Curve,
    BestConstant,
    Scaling,
    Verify,
}

/// Command line, after parsing.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: usize,
    pub seed: Option<u64>,
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub box_length: f64,
    /// Coulomb truncation radius; `None` means `L/2`.
    pub truncation_radius: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 64,
            box_length: 16.0,
            truncation_radius: None,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        match self.truncation_radius {
            Some(t) => Grid::with_truncation(self.n, self.box_length, t),
            None => Grid::new(self.n, self.box_length),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub rho: Option<f64>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            alpha: 1.0,
            beta: 1.0,
            p: 2.5,
            rho: None,
        }
    }
}

impl ParamsConfig {
    fn with_rho(&self, rho: f64) -> Result<Params> {
        Params::new(self.alpha, self.beta, self.p, rho)
    }

    fn require(&self) -> Result<Params> {
        let rho = self
            .rho
            .ok_or_else(|| Error::Config("params.rho is required for this command".into()))?;
        self.with_rho(rho)
    }
}

/// Relative-residual tolerances for `verify`; `null` skips a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub virial: Option<f64>,
    pub pohozaev: Option<f64>,
    pub el: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            virial: Some(1e-4),
            pohozaev: Some(1e-4),
            el: Some(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Centered Gaussian of the given width carrying mass `params.rho`.
    Gaussian {
        width: f64,
    },
    Snapshot {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub schedule: Vec<f64>,
}

/// One JSON document configures one run; sections unused by the chosen
/// subcommand are ignored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub params: ParamsConfig,
    pub minimize: MinimizeConfig,
    /// Extra random starts for `minimize` and `curve`.
    pub seeds: Vec<u64>,
    /// Seed for the quotient ascent and for a random `minimize.init`.
    pub seed: Option<u64>,
    pub rhos: Vec<f64>,
    pub snapshot: Option<PathBuf>,
    pub omega: Option<f64>,
    pub tolerances: Tolerances,
    pub ascent: AscentConfig,
    /// `(α, β)` pairs classified against the estimated constant.
    pub pairs: Vec<[f64; 2]>,
    pub blowup: Option<ExperimentConfig>,
    pub blowdown: Option<ExperimentConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed.or(self.seed) {
            self.seed = Some(s);
            self.ascent.seed = s;
            if let Init::Random { seed } = &mut self.minimize.init {
                *seed = s;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub version: String,
    pub config: RunConfig,
    pub grid: Option<GridMeta>,
    pub workers: usize,
    pub status: String,
    pub wall_time_s: Option<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    snapshot::write_atomic(path, s.as_bytes())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    snapshot::write_atomic(path, text.as_bytes())
}

fn csv_header(columns: &[&str]) -> String {
    format!("# schema_version={CSV_SCHEMA_VERSION}\n{}\n", columns.join(","))
}

/// Runs `f` on every item with up to `workers` threads; order is kept.
fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item is processed"))
        .collect()
}

/// Summary of what a run produced, for the caller's console output.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

pub fn run(inv: &Invocation) -> Result<Outcome> {
    let started = Instant::now();
    let mut config = match &inv.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    config.apply_seed(inv.seed);
    if inv.snapshot.is_some() {
        config.snapshot = inv.snapshot.clone();
    }
    if inv.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let plan = prepare(inv.command, &config)?;

    std::fs::create_dir_all(&inv.out)?;
    let mut manifest = Manifest {
        command: inv.command,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        grid: plan.grid_meta(),
        workers: inv.workers,
        status: "running".into(),
        wall_time_s: None,
    };
    let manifest_path = inv.out.join("manifest.json");
    write_json(&manifest_path, &manifest)?;

    let result = execute(plan, &config, inv);
    manifest.wall_time_s = Some(started.elapsed().as_secs_f64());
    manifest.status = match &result {
        Ok(_) => "ok".into(),
        Err(e) => format!("error (exit {}): {e}", e.exit_code()),
    };
    write_json(&manifest_path, &manifest)?;
    let mut outcome = result?;
    outcome.files.insert(0, manifest_path);
    Ok(outcome)
}

/// Everything validated and loaded before the manifest is written.
enum Plan {
    Energy {
        field: Field,
        params: Params,
    },
    Minimize {
        grid: Grid,
        params: Params,
        starts: Vec<Init>,
    },
    Curve {
        grid: Grid,
        params: ParamsConfig,
        rhos: Vec<f64>,
        seeds: Vec<u64>,
    },
    BestConstant {
        grid: Grid,
    },
    Scaling {
        grid: Grid,
        params: Params,
        blowup: Option<(ScalingSource, Vec<f64>)>,
        blowdown: Option<(ScalingSource, Vec<f64>)>,
    },
    Verify {
        field: Field,
        params: Params,
    },
}

impl Plan {
    fn grid_meta(&self) -> Option<GridMeta> {
        let g = match self {
            Plan::Energy { field, .. } | Plan::Verify { field, .. } => field.grid(),
            Plan::Minimize { grid, .. }
            | Plan::Curve { grid, .. }
            | Plan::BestConstant { grid }
            | Plan::Scaling { grid, .. } => grid,
        };
        Some(GridMeta::from(g))
    }
}

fn snapshot_path(config: &RunConfig) -> Result<&Path> {
    config
        .snapshot
        .as_deref()
        .ok_or_else(|| Error::Config("a snapshot path is required (config `snapshot` or --snapshot)".into()))
}

/// Couplings for evaluating a stored field; the mass comes from the field.
fn params_for_field(config: &RunConfig, field: &Field) -> Result<Params> {
    let m = field.mass();
    config.params.with_rho(if m > 0.0 { m } else { 1.0 })
}

fn check_tolerances(t: &Tolerances) -> Result<()> {
    for (name, v) in [("virial", t.virial), ("pohozaev", t.pohozaev), ("el", t.el)] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("tolerance {name} must be > 0, got {v}")));
            }
        }
    }
    Ok(())
}

fn starts(config: &RunConfig, seeds: &[u64]) -> Vec<Init> {
    std::iter::once(config.minimize.init.clone())
        .chain(seeds.iter().map(|&seed| Init::Random { seed }))
        .collect()
}

fn scaling_source(cfg: &ExperimentConfig, params: &Params) -> Result<ScalingSource> {
    match &cfg.source {
        SourceConfig::Gaussian { width } => {
            if !(width.is_finite() && *width > 0.0) {
                return Err(Error::Config(format!("gaussian width must be > 0, got {width}")));
            }
            let amplitude = constants::gaussian_amplitude_for_mass(params.rho, *width);
            Ok(ScalingSource::Gaussian {
                amplitude,
                width: *width,
            })
        }
        SourceConfig::Snapshot { path } => Ok(ScalingSource::Sampled(snapshot::read_snapshot(path)?)),
    }
}

fn prepare(command: Command, config: &RunConfig) -> Result<Plan> {
    match command {
        Command::Energy => {
            let field = snapshot::read_snapshot(snapshot_path(config)?)?;
            let params = params_for_field(config, &field)?;
            Ok(Plan::Energy { field, params })
        }
        Command::Verify => {
            check_tolerances(&config.tolerances)?;
            if let Some(w) = config.omega {
                if !w.is_finite() {
                    return Err(Error::Config("omega must be finite".into()));
                }
            }
            let field = snapshot::read_snapshot(snapshot_path(config)?)?;
            let params = params_for_field(config, &field)?;
            Ok(Plan::Verify { field, params })
        }
        Command::Minimize => {
            let grid = config.grid.build()?;
            let params = config.params.require()?;
            config.minimize.validate()?;
            Ok(Plan::Minimize {
                grid,
                params,
                starts: starts(config, &config.seeds),
            })
        }
        Command::Curve => {
            let grid = config.grid.build()?;
            config.minimize.validate()?;
            if config.rhos.len() < 2 {
                return Err(Error::Config("curve needs at least two rho values".into()));
            }
            for &rho in &config.rhos {
                config.params.with_rho(rho)?;
            }
            Ok(Plan::Curve {
                grid,
                params: config.params.clone(),
                rhos: config.rhos.clone(),
                seeds: config.seeds.clone(),
            })
        }
        Command::BestConstant => {
            let grid = config.grid.build()?;
            config.ascent.validate()?;
            for [a, b] in &config.pairs {
                if !(a.is_finite() && *a > 0.0 && b.is_finite() && *b > 0.0) {
                    return Err(Error::Config(format!("pair ({a}, {b}) must have alpha, beta > 0")));
                }
            }
            Ok(Plan::BestConstant { grid })
        }
        Command::Scaling => {
            let grid = config.grid.build()?;
            let params = config.params.require()?;
            if config.blowup.is_none() && config.blowdown.is_none() {
                return Err(Error::Config("scaling needs a `blowup` or `blowdown` section".into()));
            }
            let blowup = match &config.blowup {
                Some(c) => Some((scaling_source(c, &params)?, c.schedule.clone())),
                None => None,
            };
            let blowdown = match &config.blowdown {
                Some(c) => Some((scaling_source(c, &params)?, c.schedule.clone())),
                None => None,
            };
            Ok(Plan::Scaling {
                grid,
                params,
                blowup,
                blowdown,
            })
        }
    }
}

fn execute(plan: Plan, config: &RunConfig, inv: &Invocation) -> Result<Outcome> {
    let out = inv.out.as_path();
    match plan {
        Plan::Energy { field, params } => cmd_energy(&field, &params, out),
        Plan::Verify { field, params } => cmd_verify(&field, &params, config, out),
        Plan::Minimize { grid, params, starts } => {
            cmd_minimize(&grid, &params, &config.minimize, &starts, inv.workers, out)
        }
        Plan::Curve {
            grid,
            params,
            rhos,
            seeds,
        } => cmd_curve(&grid, &params, &config.minimize, &rhos, &seeds, inv.workers, out),
        Plan::BestConstant { grid } => cmd_best_constant(&grid, &config.ascent, &config.pairs, out),
        Plan::Scaling {
            grid,
            params,
            blowup,
            blowdown,
        } => cmd_scaling(&grid, &params, blowup, blowdown, out),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyDocument {
    pub energy: EnergyBreakdown,
    /// `Ẽ`, the same terms with the homogeneous kinetic energy.
    pub energy_tilde: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
}

fn cmd_energy(field: &Field, params: &Params, out: &Path) -> Result<Outcome> {
    let e = spectral::energy(field, params, Variant::Inhomogeneous)?;
    let et = EnergyBreakdown::assemble(params, Variant::Homogeneous, e.norms, e.d_value);
    let doc = EnergyDocument {
        energy: e,
        energy_tilde: et.total,
        alpha: params.alpha,
        beta: params.beta,
        p: params.p,
    };
    let path = out.join("energy.json");
    write_json(&path, &doc)?;
    Ok(Outcome {
        summary: serde_json::to_string_pretty(&doc)?,
        files: vec![path],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyDocument {
    pub report: IdentityReport,
    pub virial_relative: f64,
    pub pohozaev_relative: f64,
    pub el_relative: f64,
    pub tolerances: Tolerances,
    /// Names of the checks that exceeded their tolerance.
    pub failed: Vec<String>,
}

fn failed_checks(r: &IdentityReport, t: &Tolerances) -> Vec<String> {
    let mut failed = Vec::new();
    let checks = [
        ("virial", r.virial_relative(), t.virial),
        ("pohozaev", r.pohozaev_relative(), t.pohozaev),
        ("el", r.el_residual_rel, t.el),
    ];
    for (name, value, tol) in checks {
        if let Some(tol) = tol {
            if value.is_nan() || value >= tol {
                failed.push(name.to_string());
            }
        }
    }
    failed
}

fn cmd_verify(field: &Field, params: &Params, config: &RunConfig, out: &Path) -> Result<Outcome> {
    let report = crate::identities::identity_report(field, params, config.omega)?;
    let doc = VerifyDocument {
        report,
        virial_relative: report.virial_relative(),
        pohozaev_relative: report.pohozaev_relative(),
        el_relative: report.el_residual_rel,
        tolerances: config.tolerances.clone(),
        failed: failed_checks(&report, &config.tolerances),
    };
    let path = out.join("identity.json");
    write_json(&path, &doc)?;
    if !doc.failed.is_empty() {
        return Err(Error::Verification(format!(
            "residuals above tolerance: {}",
            doc.failed.join(", ")
        )));
    }
    Ok(Outcome {
        summary: serde_json::to_string_pretty(&doc)?,
        files: vec![path],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: String,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeDocument {
    pub params: Params,
    pub config: MinimizeConfig,
    pub starts: Vec<StartSummary>,
    pub best_start: usize,
    pub energy: EnergyBreakdown,
    pub omega: f64,
    pub residuals: IdentityReport,
    pub virial_relative: f64,
    pub pohozaev_relative: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stagnated: bool,
    pub imaginary_fraction: f64,
    pub boundary_mass_fraction: f64,
    pub trace: Vec<TracePoint>,
}

fn init_label(init: &Init) -> String {
    serde_json::to_string(init).unwrap_or_else(|_| format!("{init:?}"))
}

/// Runs every start and keeps the lowest energy (first on ties).
fn best_of(
    params: &Params,
    cfg: &MinimizeConfig,
    initials: Vec<(String, Field)>,
    workers: usize,
) -> Result<(usize, GroundStateResult, Vec<StartSummary>)> {
    let results = parallel_map(&initials, workers, |(_, u0)| {
        minimize::minimize_from(u0.clone(), params, cfg)
    });
    let mut summaries = Vec::new();
    let mut best: Option<(usize, GroundStateResult)> = None;
    for (i, (r, (start, _))) in results.into_iter().zip(initials).enumerate() {
        let r = r?;
        summaries.push(StartSummary {
            start,
            energy: r.energy.total,
            converged: r.converged,
            iterations: r.iterations,
        });
        let better = match &best {
            None => true,
            Some((_, b)) => r.energy.total < b.energy.total,
        };
        if better {
            best = Some((i, r));
        }
    }
    let (i, r) = best.ok_or_else(|| Error::Config("no starting points".into()))?;
    Ok((i, r, summaries))
}

fn minimize_document(
    params: &Params,
    cfg: &MinimizeConfig,
    best_start: usize,
    r: &GroundStateResult,
    starts: Vec<StartSummary>,
) -> MinimizeDocument {
    MinimizeDocument {
        params: *params,
        config: cfg.clone(),
        starts,
        best_start,
        energy: r.energy,
        omega: r.omega,
        residuals: r.residuals,
        virial_relative: r.residuals.virial_relative(),
        pohozaev_relative: r.residuals.pohozaev_relative(),
        iterations: r.iterations,
        converged: r.converged,
        stagnated: r.stagnated,
        imaginary_fraction: r.imaginary_fraction,
        boundary_mass_fraction: r.field.boundary_mass_fraction(),
        trace: r.trace.clone(),
    }
}

fn cmd_minimize(
    grid: &Grid,
    params: &Params,
    cfg: &MinimizeConfig,
    inits: &[Init],
    workers: usize,
    out: &Path,
) -> Result<Outcome> {
    let initials = inits
        .iter()
        .map(|i| Ok((init_label(i), minimize::initial_field(grid, params.rho, i)?)))
        .collect::<Result<Vec<_>>>()?;
    let (best_start, r, starts) = best_of(params, cfg, initials, workers)?;
    let doc = minimize_document(params, cfg, best_start, &r, starts);
    let result_path = out.join("result.json");
    let identity_path = out.join("identity.json");
    let field_path = out.join("field.spsf");
    write_json(&result_path, &doc)?;
    write_json(&identity_path, &r.residuals)?;
    snapshot::write_snapshot(&field_path, &r.field)?;
    Ok(Outcome {
        summary: format!(
            "E = {:.12e}, omega = {:.9}, converged = {}, iterations = {}, virial rel = {:.3e}, pohozaev rel = {:.3e}, el rel = {:.3e}",
            r.energy.total,
            r.omega,
            r.converged,
            r.iterations,
            doc.virial_relative,
            doc.pohozaev_relative,
            r.residuals.el_residual_rel
        ),
        files: vec![result_path, identity_path, field_path],
    })
}

/// One point of the empirical `ρ ↦ I(ρ)` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rho: f64,
    /// Best energy over the starts; an upper bound for the infimum.
    pub i_rho: f64,
    pub ratio: f64,
    pub converged: bool,
    pub iterations: usize,
    pub omega: f64,
    pub virial_relative: f64,
    pub pohozaev_relative: f64,
    pub el_relative: f64,
    /// `‖v‖_{H^{1/2}}/√ρ`
    pub h_half_over_sqrt_rho: f64,
    pub boundary_mass_fraction: f64,
}

pub const CURVE_COLUMNS: [&str; 11] = [
    "rho",
    "i_rho",
    "ratio",
    "converged",
    "iterations",
    "omega",
    "virial_relative",
    "pohozaev_relative",
    "el_relative",
    "h_half_over_sqrt_rho",
    "boundary_mass_fraction",
];

/// Verdicts over a curve; `None` when some point did not converge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveVerdicts {
    pub all_below_half: Option<bool>,
    /// Ratios strictly increase as `ρ` decreases.
    pub increasing_as_rho_decreases: Option<bool>,
    /// Ratios monotone in `ρ`, either direction.
    pub monotone: Option<bool>,
    /// `max/min` of `‖v‖_{H^{1/2}}/√ρ` over the points.
    pub norm_ratio_spread: Option<f64>,
}

/// Points must be sorted by increasing `ρ`.
pub fn curve_verdicts(points: &[CurvePoint]) -> CurveVerdicts {
    if points.is_empty() || points.iter().any(|p| !p.converged) {
        return CurveVerdicts {
            all_below_half: None,
            increasing_as_rho_decreases: None,
            monotone: None,
            norm_ratio_spread: None,
        };
    }
    let dec = points.windows(2).all(|w| w[0].ratio > w[1].ratio);
    let inc = points.windows(2).all(|w| w[0].ratio < w[1].ratio);
    let (lo, hi) = points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
        (lo.min(p.h_half_over_sqrt_rho), hi.max(p.h_half_over_sqrt_rho))
    });
    CurveVerdicts {
        all_below_half: Some(points.iter().all(|p| p.ratio < 0.5)),
        increasing_as_rho_decreases: Some(dec),
        monotone: Some(dec || inc),
        norm_ratio_spread: Some(hi / lo),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveDocument {
    pub points: Vec<CurvePoint>,
    pub verdicts: CurveVerdicts,
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = csv_header(&CURVE_COLUMNS);
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.rho,
            p.i_rho,
            p.ratio,
            p.converged,
            p.iterations,
            p.omega,
            p.virial_relative,
            p.pohozaev_relative,
            p.el_relative,
            p.h_half_over_sqrt_rho,
            p.boundary_mass_fraction
        );
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_curve(
    grid: &Grid,
    params: &ParamsConfig,
    cfg: &MinimizeConfig,
    rhos: &[f64],
    seeds: &[u64],
    workers: usize,
    out: &Path,
) -> Result<Outcome> {
    let mut points = Vec::with_capacity(rhos.len());
    let mut previous: Option<Field> = None;
    for (k, &rho) in rhos.iter().enumerate() {
        let p = params.with_rho(rho)?;
        let mut initials = Vec::new();
        match &previous {
            Some(v) => initials.push((
                format!("warm start from rho = {}", rhos[k - 1]),
                minimize::project_mass(v, rho)?,
            )),
            None => initials.push((init_label(&cfg.init), minimize::initial_field(grid, rho, &cfg.init)?)),
        }
        for &seed in seeds {
            let init = Init::Random { seed };
            let u0 = minimize::initial_field(grid, rho, &init)?;
            initials.push((init_label(&init), u0));
        }
        let (_, r, _) = best_of(&p, cfg, initials, workers)?;
        let norms = r.energy.norms;
        points.push(CurvePoint {
            rho,
            i_rho: r.energy.total,
            ratio: r.energy.total / rho,
            converged: r.converged,
            iterations: r.iterations,
            omega: r.omega,
            virial_relative: r.residuals.virial_relative(),
            pohozaev_relative: r.residuals.pohozaev_relative(),
            el_relative: r.residuals.el_residual_rel,
            h_half_over_sqrt_rho: (norms.h_half_sq / rho).sqrt(),
            boundary_mass_fraction: r.field.boundary_mass_fraction(),
        });
        log::info!("curve point rho = {rho}: I/rho = {}", r.energy.total / rho);
        previous = Some(r.field);
    }
    points.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    let verdicts = curve_verdicts(&points);
    let csv_path = out.join("curve.csv");
    let json_path = out.join("curve.json");
    write_text(&csv_path, &curve_csv(&points))?;
    write_json(
        &json_path,
        &CurveDocument {
            points: points.clone(),
            verdicts,
        },
    )?;
    Ok(Outcome {
        summary: format!("{}verdicts: {verdicts:?}", curve_csv(&points)),
        files: vec![csv_path, json_path],
    })
}

pub fn verdicts_csv(verdicts: &[ThresholdVerdict]) -> String {
    let mut s = csv_header(&["alpha", "beta", "lhs", "rhs_lower", "verdict"]);
    for v in verdicts {
        let name = match v.verdict {
            constants::Verdict::UnboundedCertified => "unbounded_certified",
            constants::Verdict::Indeterminate => "indeterminate",
        };
        let _ = writeln!(s, "{},{},{},{},{}", v.alpha, v.beta, v.lhs, v.rhs_lower, name);
    }
    s
}

fn cmd_best_constant(grid: &Grid, ascent: &AscentConfig, pairs: &[[f64; 2]], out: &Path) -> Result<Outcome> {
    let est = constants::estimate_best_constant(grid, ascent)?;
    let est_path = out.join("estimate.json");
    let field_path = out.join("maximizer.spsf");
    write_json(&est_path, &EstimateDocument::from(&est))?;
    snapshot::write_snapshot(&field_path, &est.maximizer)?;
    let mut files = vec![est_path, field_path];
    let mut summary = format!("s_lower = {:.10}", est.s_lower);
    if !pairs.is_empty() {
        let verdicts = pairs
            .iter()
            .map(|[a, b]| constants::classify_boundedness(*a, *b, &est))
            .collect::<Result<Vec<_>>>()?;
        let csv_path = out.join("verdicts.csv");
        let json_path = out.join("verdicts.json");
        write_text(&csv_path, &verdicts_csv(&verdicts))?;
        write_json(&json_path, &verdicts)?;
        files.push(csv_path);
        files.push(json_path);
        summary.push('\n');
        summary.push_str(&verdicts_csv(&verdicts));
    }
    Ok(Outcome { summary, files })
}

pub const SCALING_COLUMNS: [&str; 8] = [
    "theta",
    "E",
    "E_tilde",
    "hdot_half",
    "mass",
    "method",
    "kinetic_gap",
    "E_tilde_over_theta",
];

pub fn scaling_csv(table: &ScalingTable) -> String {
    let mut s = csv_header(&SCALING_COLUMNS);
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.theta,
            r.energy,
            r.energy_tilde,
            r.hdot_half,
            r.mass,
            r.method.as_str(),
            r.kinetic_gap,
            r.energy_tilde / r.theta
        );
    }
    for w in &table.warnings {
        let _ = writeln!(s, "# warning: {w}");
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingDocument {
    pub blowup: Option<BlowupOutcome>,
    /// Last two blow-up energies strictly decreasing.
    pub blowup_energy_tail_decreasing: Option<bool>,
    pub blowdown: Option<ScalingTable>,
    /// Every blow-down row has `Ẽ > 0`.
    pub blowdown_all_positive: Option<bool>,
    /// `‖φ_θ‖_{Ḣ^{1/2}}` strictly decreasing along the blow-down rows.
    pub blowdown_hdot_decreasing: Option<bool>,
}

fn cmd_scaling(
    grid: &Grid,
    params: &Params,
    blowup: Option<(ScalingSource, Vec<f64>)>,
    blowdown: Option<(ScalingSource, Vec<f64>)>,
    out: &Path,
) -> Result<Outcome> {
    let mut files = Vec::new();
    let mut doc = ScalingDocument {
        blowup: None,
        blowup_energy_tail_decreasing: None,
        blowdown: None,
        blowdown_all_positive: None,
        blowdown_hdot_decreasing: None,
    };
    if let Some((source, schedule)) = blowup {
        let outcome = constants::blowup_experiment(&source, Some(grid), params, &schedule)?;
        match &outcome {
            BlowupOutcome::Table(t) => {
                let path = out.join("blowup.csv");
                write_text(&path, &scaling_csv(t))?;
                files.push(path);
                doc.blowup_energy_tail_decreasing = Some(constants::energy_tail_decreasing(t));
            }
            BlowupOutcome::SignReport { energy_tilde } => {
                log::warn!("blow-up needs E_tilde < 0, got {energy_tilde}; no table");
            }
        }
        doc.blowup = Some(outcome);
    }
    if let Some((source, schedule)) = blowdown {
        let table = constants::blowdown_experiment(&source, Some(grid), params, &schedule)?;
        let path = out.join("blowdown.csv");
        write_text(&path, &scaling_csv(&table))?;
        files.push(path);
        doc.blowdown_all_positive = Some(table.rows.iter().all(|r| r.energy_tilde > 0.0));
        doc.blowdown_hdot_decreasing = Some(table.rows.windows(2).all(|w| w[1].hdot_half < w[0].hdot_half));
        doc.blowdown = Some(table);
    }
    let path = out.join("scaling.json");
    write_json(&path, &doc)?;
    files.push(path);
    Ok(Outcome {
        summary: serde_json::to_string_pretty(&doc)?,
        files,
    })
}
