//! Variational identities evaluated as residuals at a candidate field.
//!
//! Each identity vanishes at exact constrained critical points of the
//! relevant scaling family; residuals are reported raw together with a
//! positive scale (the largest constituent term) so tolerances are
//! dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::params::{Params, Variant};
use crate::spectral::{self, EnergyBreakdown};

/// Machine-checkable certificate for one field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IdentityReport {
    pub virial_residual: f64,
    pub virial_scale: f64,
    pub pohozaev_residual: f64,
    pub pohozaev_scale: f64,
    pub el_residual_rel: f64,
    pub f_prime_at_1: f64,
    pub g_prime_at_1: f64,
    pub omega: f64,
}

impl IdentityReport {
    pub fn virial_relative(&self) -> f64 {
        self.virial_residual.abs() / self.virial_scale
    }

    pub fn pohozaev_relative(&self) -> f64 {
        self.pohozaev_residual.abs() / self.pohozaev_scale
    }
}

/// Scale convention: the largest term, or 1 when every term vanishes.
fn scale_of(terms: &[f64]) -> f64 {
    let m = terms.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

pub(crate) fn virial_from(e: &EnergyBreakdown, params: &Params) -> (f64, f64) {
    let coulomb = 2.0 * params.alpha * e.d_value;
    let local = params.beta * (params.p - 2.0) * e.norms.lp_p;
    (coulomb - local, scale_of(&[coulomb, local]))
}

pub(crate) fn pohozaev_from(e: &EnergyBreakdown, params: &Params) -> (f64, f64) {
    let kinetic = 0.5 * (e.norms.h_half_sq - e.norms.h_minus_half_sq);
    let coulomb = params.alpha * e.d_value;
    let local = params.beta * 0.5 * (3.0 * params.p - 6.0) * e.norms.lp_p;
    (kinetic + coulomb - local, scale_of(&[kinetic, coulomb, local]))
}

/// Amplitude-scaling identity: `2αD(v) − β(p−2)‖v‖_p^p`.
pub fn virial_residual(v: &Field, params: &Params) -> Result<(f64, f64)> {
    let e = spectral::energy(v, params, Variant::Inhomogeneous)?;
    Ok(virial_from(&e, params))
}

/// Dilation identity:
/// `½‖v‖²_{H^{1/2}} − ½‖v‖²_{H^{−1/2}} + αD(v) − β(3p−6)/2·‖v‖_p^p`.
pub fn pohozaev_residual(v: &Field, params: &Params) -> Result<(f64, f64)> {
    let e = spectral::energy(v, params, Variant::Inhomogeneous)?;
    Ok(pohozaev_from(&e, params))
}

/// The Pohozaev kinetic term in its two algebraically equal forms:
/// `½(‖v‖²_{H^{1/2}} − ‖v‖²_{H^{−1/2}})` and `½Σ |k|²/√(1+|k|²)|v̂|²`.
pub fn pohozaev_kinetic_forms(v: &Field) -> Result<(f64, f64)> {
    v.ensure_finite()?;
    let g = v.grid();
    let s = v.spectrum();
    let two_norm = 0.5
        * (spectral::spectral_quadratic(g, &s, g.half_wave_symbol())
            - spectral::spectral_quadratic(g, &s, g.inverse_half_wave_symbol()));
    let symbol: Vec<f64> = g
        .k_squared()
        .iter()
        .zip(g.inverse_half_wave_symbol())
        .map(|(k2, inv)| k2 * inv)
        .collect();
    let multiplier = 0.5 * spectral::spectral_quadratic(g, &s, &symbol);
    Ok((two_norm, multiplier))
}

/// `‖√(1−Δ)v + 4αΦv − βp|v|^{p−2}v − ωv‖₂ / ‖v‖₂`.
pub fn el_residual(v: &Field, params: &Params, omega: f64) -> Result<f64> {
    let m = v.mass();
    if m == 0.0 {
        return Err(Error::Degenerate("Euler-Lagrange residual of the zero field"));
    }
    let g = spectral::gradient(v, params, Variant::Inhomogeneous)?;
    let r = g.axpy(-omega, v);
    Ok((r.mass() / m).sqrt())
}

/// Lagrange multiplier `ω = Re⟨∇E(v), v⟩/‖v‖₂²` for the given variant.
pub fn lagrange_multiplier_variant(v: &Field, params: &Params, variant: Variant) -> Result<f64> {
    let m = v.mass();
    if m == 0.0 {
        return Err(Error::Degenerate("Lagrange multiplier of the zero field"));
    }
    let g = spectral::gradient(v, params, variant)?;
    Ok(g.re_inner(v) / m)
}

/// Lagrange multiplier of the inhomogeneous problem.
pub fn lagrange_multiplier(v: &Field, params: &Params) -> Result<f64> {
    lagrange_multiplier_variant(v, params, Variant::Inhomogeneous)
}

/// Analytic derivatives of the two scaling families at `θ = 1` together
/// with central finite differences of the scaled energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    /// `d/dθ [E(θv)/‖θv‖₂²]` at 1.
    pub f_prime_at_1: f64,
    /// `d/dθ E(θ^{3/2}v(θx))` at 1.
    pub g_prime_at_1: f64,
    pub f_prime_fd: f64,
    pub g_prime_fd: f64,
    /// Term-magnitude scales for relative comparisons.
    pub f_scale: f64,
    pub g_scale: f64,
}

/// Step used for the finite-difference derivatives.
pub const SCALING_FD_STEP: f64 = 1e-3;

pub fn scaling_derivative_check(v: &Field, params: &Params) -> Result<ScalingCheck> {
    let m = v.mass();
    if m == 0.0 {
        return Err(Error::Degenerate("scaling derivatives of the zero field"));
    }
    let e = spectral::energy(v, params, Variant::Inhomogeneous)?;
    let (vr, vs) = virial_from(&e, params);
    let (pr, ps) = pohozaev_from(&e, params);
    let f_prime_at_1 = vr / m;

    let eps = SCALING_FD_STEP;
    let f_at = |theta: f64| -> Result<f64> {
        let w = v.scaled(theta);
        Ok(spectral::energy(&w, params, Variant::Inhomogeneous)?.total / w.mass())
    };
    let f_prime_fd = (f_at(1.0 + eps)? - f_at(1.0 - eps)?) / (2.0 * eps);

    let g_at = |theta: f64| -> Result<f64> {
        let w = spectral::scale_mass_preserving(v, theta)?.field;
        Ok(spectral::energy(&w, params, Variant::Inhomogeneous)?.total)
    };
    let g_prime_fd = (g_at(1.0 + eps)? - g_at(1.0 - eps)?) / (2.0 * eps);

    Ok(ScalingCheck {
        f_prime_at_1,
        g_prime_at_1: pr,
        f_prime_fd,
        g_prime_fd,
        f_scale: vs / m,
        g_scale: ps,
    })
}

/// Full report at `v`; `omega` is extracted when not supplied.
pub fn identity_report(v: &Field, params: &Params, omega: Option<f64>) -> Result<IdentityReport> {
    v.ensure_finite()?;
    let m = v.mass();
    if m == 0.0 {
        return Ok(IdentityReport {
            virial_scale: 1.0,
            pohozaev_scale: 1.0,
            ..Default::default()
        });
    }
    let e = spectral::energy(v, params, Variant::Inhomogeneous)?;
    let (virial_residual, virial_scale) = virial_from(&e, params);
    let (pohozaev_residual, pohozaev_scale) = pohozaev_from(&e, params);
    let grad = spectral::gradient(v, params, Variant::Inhomogeneous)?;
    let omega = omega.unwrap_or_else(|| grad.re_inner(v) / m);
    let el_residual_rel = (grad.axpy(-omega, v).mass() / m).sqrt();
    Ok(IdentityReport {
        virial_residual,
        virial_scale,
        pohozaev_residual,
        pohozaev_scale,
        el_residual_rel,
        f_prime_at_1: virial_residual / m,
        g_prime_at_1: pohozaev_residual,
        omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use num_complex::Complex64;

    #[test]
    fn zero_field_convention() {
        let g = Grid::new(8, 4.0).unwrap();
        let z = Field::zeros(&g);
        let p = Params::new(1.0, 1.0, 2.5, 0.1).unwrap();
        assert_eq!(virial_residual(&z, &p).unwrap(), (0.0, 1.0));
        assert_eq!(pohozaev_residual(&z, &p).unwrap(), (0.0, 1.0));
        let r = identity_report(&z, &p, None).unwrap();
        assert_eq!(r.virial_relative(), 0.0);
        assert_eq!(r.pohozaev_relative(), 0.0);
        assert!(matches!(el_residual(&z, &p, 1.0), Err(Error::Degenerate(_))));
        assert!(matches!(lagrange_multiplier(&z, &p), Err(Error::Degenerate(_))));
        assert!(matches!(scaling_derivative_check(&z, &p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn decoupled_constant_is_an_exact_eigenpair() {
        let g = Grid::new(8, 4.0).unwrap();
        let c = Field::from_fn(&g, |_, _, _| Complex64::new(0.3, 0.1));
        let p = Params::new(0.0, 0.0, 2.5, 0.1).unwrap();
        assert!((lagrange_multiplier(&c, &p).unwrap() - 1.0).abs() < 1e-14);
        assert!(el_residual(&c, &p, 1.0).unwrap() < 1e-14);
        let off = el_residual(&c, &p, 1.1).unwrap();
        assert!((off - 0.1).abs() < 1e-12);
    }

    #[test]
    fn decoupled_plane_wave_multiplier() {
        let g = Grid::new(8, 8.0).unwrap();
        let dk = 2.0 * std::f64::consts::PI / 8.0;
        let k0 = [dk, 2.0 * dk, -dk];
        let w = Field::from_fn(&g, |x, y, z| {
            Complex64::from_polar(1.0, k0[0] * x + k0[1] * y + k0[2] * z)
        });
        let p = Params::new(0.0, 0.0, 2.5, 0.1).unwrap();
        let expect = (1.0 + k0.iter().map(|k| k * k).sum::<f64>()).sqrt();
        assert!((lagrange_multiplier(&w, &p).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn kinetic_forms_agree() {
        let g = Grid::new(16, 8.0).unwrap();
        for seed in 0..4 {
            let v = Field::random_smooth(&g, 1.5, seed);
            let (a, b) = pohozaev_kinetic_forms(&v).unwrap();
            assert!((a - b).abs() / a.abs().max(b.abs()) < 1e-10);
        }
    }

    #[test]
    fn f_prime_is_virial_over_mass() {
        let g = Grid::new(16, 8.0).unwrap();
        let v = Field::random_smooth(&g, 1.5, 2);
        let p = Params::new(1.0, 1.0, 2.5, 0.1).unwrap();
        let r = identity_report(&v, &p, None).unwrap();
        let m = v.mass();
        assert_eq!(r.f_prime_at_1, r.virial_residual / m);
        assert!((r.f_prime_at_1 * m - r.virial_residual).abs() <= 4.0 * f64::EPSILON * r.virial_scale);
        let s = scaling_derivative_check(&v, &p).unwrap();
        assert_eq!(s.f_prime_at_1, r.f_prime_at_1);
        assert_eq!(s.g_prime_at_1, r.pohozaev_residual);
    }
}
