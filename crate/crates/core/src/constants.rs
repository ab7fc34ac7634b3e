//! Best-constant estimation for the critical Gagliardo–Nirenberg-type
//! inequality, the boundedness threshold, and dilation experiments.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Grid, GridMeta};
use crate::params::{Params, Variant, P_CRITICAL};
use crate::spectral::{self, EnergyBreakdown, Resampled};

const P_QUOTIENT: f64 = P_CRITICAL;

/// The three ingredients of the Weinstein quotient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientParts {
    /// `‖φ‖_{8/3}`
    pub l83: f64,
    /// `‖φ‖²_{Ḣ^{1/2}}`
    pub hdot_half_sq: f64,
    /// `D(φ)`
    pub d_value: f64,
}

impl QuotientParts {
    pub fn quotient(&self) -> f64 {
        self.l83 / (self.hdot_half_sq.powf(0.25) * self.d_value.powf(0.125))
    }
}

pub fn quotient_parts(phi: &Field) -> Result<QuotientParts> {
    phi.ensure_finite()?;
    if phi.is_zero() {
        return Err(Error::Degenerate(
            "the Weinstein quotient of the zero field is undefined",
        ));
    }
    let norms = spectral::norms(phi, P_QUOTIENT)?;
    let d_value = spectral::hartree_double_integral(phi)?;
    if norms.hdot_half_sq <= 0.0 || d_value <= 0.0 {
        return Err(Error::Degenerate(
            "field has vanishing Ḣ^{1/2} seminorm or Coulomb energy",
        ));
    }
    Ok(QuotientParts {
        l83: norms.lp_p.powf(1.0 / P_QUOTIENT),
        hdot_half_sq: norms.hdot_half_sq,
        d_value,
    })
}

/// `‖φ‖_{8/3} / (‖φ‖_{Ḣ^{1/2}}^{1/2} D(φ)^{1/8})`.
pub fn weinstein_quotient(phi: &Field) -> Result<f64> {
    Ok(quotient_parts(phi)?.quotient())
}

/// L² gradient of `log Q` at `φ`, together with `Q`.
fn log_quotient_gradient(phi: &Field) -> Result<(f64, Field)> {
    let parts = quotient_parts(phi)?;
    let p_int = parts.l83.powf(P_QUOTIENT);
    let kin = spectral::apply_abs_derivative(phi)?;
    let pot = spectral::coulomb_potential(phi);
    let ch = 0.5 / parts.hdot_half_sq;
    let cd = 0.5 / parts.d_value;
    let values = phi
        .values()
        .iter()
        .zip(kin.values())
        .zip(&pot)
        .map(|((v, kv), f)| spectral::power_term(*v, P_QUOTIENT) / p_int - kv * ch - v * (cd * f))
        .collect();
    Ok((parts.quotient(), Field::from_values_unchecked(phi.grid(), values)))
}

/// Settings for the quotient ascent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscentConfig {
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Width of the Gaussian start; `None` means `L/16`.
    pub width: Option<f64>,
    /// Relative L² size of the seeded perturbation added to the Gaussian.
    pub perturbation: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            steps: 200,
            step_size: 1.0,
            seed: 0,
            width: None,
            perturbation: 0.05,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Config("ascent needs at least one step".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Config(format!("step_size must be > 0, got {}", self.step_size)));
        }
        if let Some(w) = self.width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Config(format!("width must be > 0, got {w}")));
            }
        }
        if !(self.perturbation.is_finite() && self.perturbation >= 0.0) {
            return Err(Error::Config(format!(
                "perturbation must be >= 0, got {}",
                self.perturbation
            )));
        }
        Ok(())
    }
}

/// Outcome of the quotient ascent. `s_lower` is a lower bound for the best
/// constant up to discretization error.
#[derive(Debug, Clone)]
pub struct BestConstantEstimate {
    pub s_lower: f64,
    pub maximizer: Field,
    /// `(iteration, best quotient so far)`, starting with the initial field.
    pub ascent_trace: Vec<(usize, f64)>,
    pub grid_meta: GridMeta,
    /// `‖φ‖²_{Ḣ^{1/2}}` of the maximizer at unit mass; tracks dilation drift.
    pub hdot_half_sq: f64,
    /// High-frequency mass fraction of the maximizer.
    pub high_frequency_fraction: f64,
    pub warning: Option<String>,
}

/// Serializable summary of an estimate (the field goes to a snapshot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDocument {
    pub s_lower: f64,
    pub ascent_trace: Vec<(usize, f64)>,
    pub grid: GridMeta,
    pub hdot_half_sq: f64,
    pub high_frequency_fraction: f64,
    pub warning: Option<String>,
}

impl From<&BestConstantEstimate> for EstimateDocument {
    fn from(e: &BestConstantEstimate) -> Self {
        EstimateDocument {
            s_lower: e.s_lower,
            ascent_trace: e.ascent_trace.clone(),
            grid: e.grid_meta,
            hdot_half_sq: e.hdot_half_sq,
            high_frequency_fraction: e.high_frequency_fraction,
            warning: e.warning.clone(),
        }
    }
}

fn normalize(u: &Field) -> Result<Field> {
    let m = u.mass();
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Degenerate("cannot normalize a zero field"));
    }
    Ok(u.scaled(1.0 / m.sqrt()))
}

/// Indicator of the centered ball of half the Coulomb truncation radius.
///
/// The ascent lives on fields supported there: the truncated kernel is then
/// exact, and the periodic zero mode (whose Ḣ^{1/2} seminorm vanishes) is
/// out of reach.
pub fn ascent_support(grid: &Grid) -> Vec<bool> {
    let r = 0.5 * grid.coulomb().radius();
    (0..grid.len())
        .map(|i| {
            let (x, y, z) = grid.unflatten(i);
            let (x, y, z) = (grid.coordinate(x), grid.coordinate(y), grid.coordinate(z));
            x * x + y * y + z * z <= r * r
        })
        .collect()
}

fn restrict(u: &Field, support: &[bool]) -> Field {
    let mut out = u.clone();
    for (v, &inside) in out.values_mut().iter_mut().zip(support) {
        if !inside {
            *v = Default::default();
        }
    }
    out
}

/// Unit-mass Gaussian plus the seeded smooth perturbation, restricted to
/// [`ascent_support`].
pub fn ascent_start(grid: &Grid, config: &AscentConfig) -> Result<Field> {
    let width = config.width.unwrap_or(grid.box_length() / 16.0);
    let support = ascent_support(grid);
    let base = normalize(&Field::gaussian(grid, 1.0, width, [0.0; 3]))?;
    if config.perturbation == 0.0 {
        return normalize(&restrict(&base, &support));
    }
    let noise = normalize(&Field::random_smooth(grid, width, config.seed))?;
    normalize(&restrict(&base.axpy(config.perturbation, &noise), &support))
}

const MAX_HALVINGS: usize = 40;
const HIGH_FREQUENCY_WARN: f64 = 1e-4;

/// Preconditioned projected ascent on `log Q` over the unit L² sphere.
pub fn estimate_best_constant(grid: &Grid, config: &AscentConfig) -> Result<BestConstantEstimate> {
    config.validate()?;
    let start = ascent_start(grid, config)?;
    ascend_from(start, config)
}

/// Same as [`estimate_best_constant`] with an explicit starting field, which
/// is restricted to [`ascent_support`] first.
pub fn ascend_from(start: Field, config: &AscentConfig) -> Result<BestConstantEstimate> {
    config.validate()?;
    let grid = start.grid().clone();
    let support = ascent_support(&grid);
    let mut phi = normalize(&restrict(&start, &support))?;
    let (mut q, mut g) = log_quotient_gradient(&phi)?;
    let mut trace = vec![(0, q)];
    if !q.is_finite() {
        return Err(Error::Ascent { iteration: 0, trace });
    }
    let pm = grid.inverse_half_wave_symbol();
    let mut tau = config.step_size;

    for it in 1..=config.steps {
        let dir = restrict(&spectral::apply_multiplier(&g, pm), &support);
        let dir = dir.axpy(-dir.re_inner(&phi), &phi);
        let mut accepted = None;
        let mut t = tau;
        for _ in 0..MAX_HALVINGS {
            let trial = normalize(&phi.axpy(t, &dir))?;
            match log_quotient_gradient(&trial) {
                Ok((qt, _)) if !qt.is_finite() => {
                    trace.push((it, qt));
                    return Err(Error::Ascent { iteration: it, trace });
                }
                Ok((qt, gt)) if qt > q => {
                    accepted = Some((trial, qt, gt));
                    break;
                }
                _ => t *= 0.5,
            }
        }
        let Some((next, qn, gn)) = accepted else {
            log::debug!("quotient ascent stalled at step {it}, Q = {q}");
            break;
        };
        phi = next;
        q = qn;
        g = gn;
        tau = (2.0 * t).min(config.step_size);
        trace.push((it, q));
    }

    let hdot = spectral::norms(&phi, P_QUOTIENT)?.hdot_half_sq;
    let hf = spectral::high_frequency_fraction(&phi);
    let warning = (hf > HIGH_FREQUENCY_WARN).then(|| {
        format!("maximizer carries {hf:.2e} of its mass near the grid cutoff; the estimate may reflect lattice effects")
    });
    Ok(BestConstantEstimate {
        s_lower: weinstein_quotient(&phi)?,
        maximizer: phi,
        ascent_trace: trace,
        grid_meta: GridMeta::from(&grid),
        hdot_half_sq: hdot,
        high_frequency_fraction: hf,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    UnboundedCertified,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVerdict {
    pub alpha: f64,
    pub beta: f64,
    /// `(27α/β³)^{1/8}`
    pub lhs: f64,
    /// `√2·s_lower`
    pub rhs_lower: f64,
    pub verdict: Verdict,
}

/// `(27α/β³)^{1/8}`.
pub fn threshold_lhs(alpha: f64, beta: f64) -> f64 {
    (27.0 * alpha / (beta * beta * beta)).powf(0.125)
}

/// Compares against a lower bound for the best constant. A lower bound can
/// only ever certify unboundedness.
pub fn classify_with_lower_bound(alpha: f64, beta: f64, s_lower: f64) -> Result<ThresholdVerdict> {
    if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
        return Err(Error::Config(format!(
            "threshold needs alpha, beta > 0, got ({alpha}, {beta})"
        )));
    }
    if !(s_lower.is_finite() && s_lower > 0.0) {
        return Err(Error::Config(format!("s_lower must be > 0, got {s_lower}")));
    }
    let lhs = threshold_lhs(alpha, beta);
    let rhs_lower = SQRT_2 * s_lower;
    let verdict = if lhs < rhs_lower {
        Verdict::UnboundedCertified
    } else {
        Verdict::Indeterminate
    };
    Ok(ThresholdVerdict {
        alpha,
        beta,
        lhs,
        rhs_lower,
        verdict,
    })
}

pub fn classify_boundedness(alpha: f64, beta: f64, estimate: &BestConstantEstimate) -> Result<ThresholdVerdict> {
    classify_with_lower_bound(alpha, beta, estimate.s_lower)
}

/// What a dilation experiment is run on.
#[derive(Debug, Clone)]
pub enum ScalingSource {
    /// `A·exp(−|x|²/w²)`, re-sampled exactly at every `θ`.
    Gaussian { amplitude: f64, width: f64 },
    /// An arbitrary field, dilated by interpolation.
    Sampled(Field),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMethod {
    Analytic,
    Resampled,
}

impl ScalingMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScalingMethod::Analytic => "analytic",
            ScalingMethod::Resampled => "resampled",
        }
    }
}

/// One row of a dilation table for `φ_θ = θ^{3/2}φ(θ·)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub theta: f64,
    pub energy: f64,
    pub energy_tilde: f64,
    /// `‖φ_θ‖_{Ḣ^{1/2}}`
    pub hdot_half: f64,
    pub mass: f64,
    pub method: ScalingMethod,
    /// `‖φ_θ‖²_{H^{1/2}} − ‖φ_θ‖²_{Ḣ^{1/2}}`, the gap between the two energies.
    pub kinetic_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// `Ẽ(φ)` at `θ = 1`.
    pub base_energy_tilde: f64,
    /// Largest relative deviation of `Ẽ(φ_θ)/θ` from `Ẽ(φ)`.
    pub tilde_ratio_spread: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum BlowupOutcome {
    Table(ScalingTable),
    /// `Ẽ(φ) ≥ 0`, so the blow-up family does not diverge.
    SignReport {
        energy_tilde: f64,
    },
}

/// Fraction of mass outside the centered ball of half the truncation radius.
fn outside_coulomb_ball(u: &Field) -> f64 {
    let g = u.grid();
    let r = 0.5 * g.coulomb().radius();
    let total = u.mass();
    if total == 0.0 {
        return 0.0;
    }
    let out: f64 = u
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let (x, y, z) = g.unflatten(*i);
            let (x, y, z) = (g.coordinate(x), g.coordinate(y), g.coordinate(z));
            x * x + y * y + z * z > r * r
        })
        .map(|(_, v)| v.norm_sqr())
        .sum();
    out * g.cell_volume() / total
}

/// Mass fraction above which a dilated field counts as not representable.
const SUPPORT_WARN: f64 = 1e-2;

fn resolution_problem(u: &Field, theta: f64) -> Option<String> {
    let hf = spectral::high_frequency_fraction(u);
    if hf > HIGH_FREQUENCY_WARN {
        return Some(format!(
            "theta = {theta}: {hf:.2e} of the mass near the grid cutoff; schedule truncated"
        ));
    }
    let out = outside_coulomb_ball(u);
    if out > SUPPORT_WARN {
        return Some(format!(
            "theta = {theta}: {out:.2e} of the mass beyond the Coulomb truncation ball; schedule truncated"
        ));
    }
    None
}

fn dilate(source: &ScalingSource, grid: &Grid, theta: f64) -> Result<(Field, ScalingMethod, Option<String>)> {
    match source {
        ScalingSource::Gaussian { amplitude, width } => {
            let f = Field::gaussian(grid, amplitude * theta.powf(1.5), width / theta, [0.0; 3]);
            Ok((f, ScalingMethod::Analytic, None))
        }
        ScalingSource::Sampled(u) => {
            let r = spectral::scale_mass_preserving(u, theta)?;
            Ok((r.field, ScalingMethod::Resampled, r.warning))
        }
    }
}

fn source_grid(source: &ScalingSource, grid: Option<&Grid>) -> Result<Grid> {
    match (source, grid) {
        (ScalingSource::Sampled(u), _) => Ok(u.grid().clone()),
        (ScalingSource::Gaussian { .. }, Some(g)) => Ok(g.clone()),
        (ScalingSource::Gaussian { .. }, None) => Err(Error::Config("an analytic source needs a grid".into())),
    }
}

fn check_critical(params: &Params) -> Result<()> {
    params.validate()?;
    if (params.p - P_CRITICAL).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "dilation experiments need p = 8/3, got {}",
            params.p
        )));
    }
    Ok(())
}

fn row(field: &Field, theta: f64, method: ScalingMethod, params: &Params) -> Result<ScalingRow> {
    let e = spectral::energy(field, params, Variant::Inhomogeneous)?;
    let et = EnergyBreakdown::assemble(params, Variant::Homogeneous, e.norms, e.d_value);
    Ok(ScalingRow {
        theta,
        energy: e.total,
        energy_tilde: et.total,
        hdot_half: e.norms.hdot_half_sq.sqrt(),
        mass: e.norms.l2_sq,
        method,
        kinetic_gap: e.norms.h_half_sq - e.norms.hdot_half_sq,
    })
}

fn run_schedule(
    source: &ScalingSource,
    grid: &Grid,
    params: &Params,
    schedule: &[f64],
    base_tilde: f64,
) -> Result<ScalingTable> {
    let mut rows = Vec::with_capacity(schedule.len());
    let mut warnings = Vec::new();
    for &theta in schedule {
        let (field, method, warn) = dilate(source, grid, theta)?;
        if let Some(w) = warn.or_else(|| resolution_problem(&field, theta)) {
            log::warn!("{w}");
            warnings.push(w);
            break;
        }
        rows.push(row(&field, theta, method, params)?);
    }
    let tilde_ratio_spread = rows
        .iter()
        .map(|r| ((r.energy_tilde / r.theta - base_tilde) / base_tilde).abs())
        .fold(0.0, f64::max);
    Ok(ScalingTable {
        rows,
        base_energy_tilde: base_tilde,
        tilde_ratio_spread,
        warnings,
    })
}

fn check_schedule(schedule: &[f64], increasing: bool) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Config("theta schedule is empty".into()));
    }
    if schedule.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Config("theta values must be positive".into()));
    }
    let ordered = schedule
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    if !ordered {
        let dir = if increasing { "increasing" } else { "decreasing" };
        return Err(Error::Config(format!("theta schedule must be strictly {dir}")));
    }
    Ok(())
}

fn base_tilde(source: &ScalingSource, grid: &Grid, params: &Params) -> Result<f64> {
    let (f, _, _) = dilate(source, grid, 1.0)?;
    let e = spectral::energy(&f, params, Variant::Homogeneous)?;
    Ok(e.total)
}

/// Evaluates `E` and `Ẽ` along an increasing `θ` schedule when `Ẽ(φ) < 0`.
pub fn blowup_experiment(
    source: &ScalingSource,
    grid: Option<&Grid>,
    params: &Params,
    schedule: &[f64],
) -> Result<BlowupOutcome> {
    check_critical(params)?;
    check_schedule(schedule, true)?;
    let grid = source_grid(source, grid)?;
    let base = base_tilde(source, &grid, params)?;
    if base >= 0.0 {
        return Ok(BlowupOutcome::SignReport { energy_tilde: base });
    }
    Ok(BlowupOutcome::Table(run_schedule(
        source, &grid, params, schedule, base,
    )?))
}

/// Evaluates `Ẽ` and `‖·‖_{Ḣ^{1/2}}` along a decreasing `θ` schedule.
pub fn blowdown_experiment(
    source: &ScalingSource,
    grid: Option<&Grid>,
    params: &Params,
    schedule: &[f64],
) -> Result<ScalingTable> {
    check_critical(params)?;
    check_schedule(schedule, false)?;
    let grid = source_grid(source, grid)?;
    let base = base_tilde(source, &grid, params)?;
    run_schedule(source, &grid, params, schedule, base)
}

/// Whether the last two energies of a blow-up table are strictly decreasing.
pub fn energy_tail_decreasing(table: &ScalingTable) -> bool {
    let n = table.rows.len();
    n >= 2 && table.rows[n - 1].energy < table.rows[n - 2].energy
}

/// Gaussian amplitude giving mass `rho` for width `w`.
pub fn gaussian_amplitude_for_mass(rho: f64, width: f64) -> f64 {
    // ∫exp(−2|x|²/w²) = (π/2)^{3/2} w³
    (rho / ((std::f64::consts::PI / 2.0).powf(1.5) * width.powi(3))).sqrt()
}

/// `φ(θ·)` without mass normalization, via interpolation.
pub fn dilate_plain(u: &Field, theta: f64) -> Result<Resampled> {
    let r = spectral::scale_mass_preserving(u, theta)?;
    Ok(Resampled {
        field: r.field.scaled(theta.powf(-1.5)),
        warning: r.warning,
    })
}
