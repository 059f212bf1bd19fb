//! Closed-form profiles of the diffusion and diffusion-convection equations.
//!
//! One-dimensional profiles are functions of the distance `s` (km) along a
//! gradient line, increasing away from the source, and of the time `t` (yr).
//! The front moves downstream according to a [`ConvectionLaw`] `f`, entering
//! the equation as the transport term `(λ/τ) f'(t/τ) ∂G/∂s`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::special::{erfc, exp_cube_integral, gamma, QuadratureError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("time must be positive, got t = {0}")]
    NonPositiveTime(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unknown convection law {0:?} (expected none, linear or special)")]
    UnknownLaw(String),
    #[error("profile is flat (|G'| < 1e-8) on z in [{from}, {to}]")]
    FlatProfile { from: f64, to: f64 },
    #[error("profile needs at least 3 samples on an increasing grid starting at z = 0")]
    BadGrid,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Time dependence of the front displacement, `λ f(t/τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvectionLaw {
    #[default]
    None,
    /// Constant speed `λ/τ`.
    Linear,
    /// Advances, stops at `t = θ`, then regresses.
    Special { theta: f64 },
}

impl ConvectionLaw {
    pub fn from_name(name: &str, theta: Option<f64>) -> Result<Self, ModelError> {
        let law = match name.to_ascii_lowercase().as_str() {
            "none" => Self::None,
            "linear" => Self::Linear,
            "special" => Self::Special {
                theta: theta
                    .ok_or_else(|| ModelError::InvalidParam("special law needs theta".into()))?,
            },
            other => return Err(ModelError::UnknownLaw(other.to_string())),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Linear => "linear",
            Self::Special { .. } => "special",
        }
    }

    pub fn validate(self) -> Result<(), ModelError> {
        match self {
            Self::Special { theta } if !(theta > 0.0) => Err(ModelError::InvalidParam(format!(
                "theta must be positive, got {theta}"
            ))),
            _ => Ok(()),
        }
    }

    /// `(f(t/τ), f'(t/τ))`, the derivative taken with respect to `t/τ`.
    pub fn eval(self, t: f64, tau: f64) -> (f64, f64) {
        let x = t / tau;
        match self {
            Self::None => (0.0, 0.0),
            Self::Linear => (x, 1.0),
            Self::Special { theta } => {
                let e = ((tau / theta) * (1.0 - x)).exp();
                (x * e, (1.0 - t / theta) * e)
            }
        }
    }
}

pub fn convection_f(law: ConvectionLaw, t: f64, tau: f64) -> Result<(f64, f64), ModelError> {
    if !(t >= 0.0) {
        return Err(ModelError::InvalidParam(format!(
            "t must be non-negative, got {t}"
        )));
    }
    check_positive("tau", tau)?;
    law.validate()?;
    Ok(law.eval(t, tau))
}

fn check_time(t: f64) -> Result<(), ModelError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveTime(t))
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParam(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// `½ erfc(s / (2√(ηt)))`: the front spreading from a held boundary at `s = 0`.
pub fn erfc_profile(s: f64, t: f64, eta: f64) -> Result<f64, ModelError> {
    check_time(t)?;
    check_positive("eta", eta)?;
    Ok(0.5 * erfc(s / (2.0 * (eta * t).sqrt())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErfcParams {
    /// Inverse width (1/km) at `t = τ`.
    pub kappa: f64,
    /// Position of the 0.5 level at `t = τ` (km).
    pub s0: f64,
    /// Distance travelled by the front over `τ` (km).
    pub lambda: f64,
    /// Age of the front (yr).
    pub tau: f64,
    pub law: ConvectionLaw,
}

impl ErfcParams {
    /// Constant diffusivity `1/(κ²τ)` (km²/yr).
    pub fn eta(&self) -> f64 {
        1.0 / (self.kappa * self.kappa * self.tau)
    }

    /// κ matching a diffusivity `eta` over `tau`.
    pub fn kappa_for(eta: f64, tau: f64) -> f64 {
        1.0 / (eta * tau).sqrt()
    }

    fn validate(&self) -> Result<(), ModelError> {
        check_positive("kappa", self.kappa)?;
        check_positive("tau", self.tau)?;
        self.law.validate()
    }
}

/// Grouping of the moving centre in [`erfc_evolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErfcForm {
    /// Centre `s0 + λ(f(t/τ) − f(1))`; reduces to the fitted profile at `t = τ`.
    #[default]
    Corrected,
    /// Centre `(s0 + λ) f(t/τ) − λ f(1)`.
    Literal,
}

pub fn erfc_evolution(s: f64, t: f64, p: &ErfcParams, form: ErfcForm) -> Result<f64, ModelError> {
    check_time(t)?;
    p.validate()?;
    let (f, _) = p.law.eval(t, p.tau);
    let (f1, _) = p.law.eval(p.tau, p.tau);
    let centre = match form {
        ErfcForm::Corrected => p.s0 + p.lambda * f - p.lambda * f1,
        ErfcForm::Literal => (p.s0 + p.lambda) * f - p.lambda * f1,
    };
    Ok(0.5 * erfc((s - centre) * p.kappa / (2.0 * (t / p.tau).sqrt())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    /// `2 k(τ)` (1/km).
    pub chi: f64,
    /// Upper end of the front at `t = τ` (km).
    pub s1: f64,
    pub lambda: f64,
    pub tau: f64,
    pub law: ConvectionLaw,
}

impl LinearParams {
    fn validate(&self) -> Result<(), ModelError> {
        check_positive("chi", self.chi)?;
        check_positive("tau", self.tau)?;
        self.law.validate()
    }

    /// Slope magnitude `χ / (2√(t/τ))` (1/km).
    pub fn k(&self, t: f64) -> f64 {
        self.chi / (2.0 * (t / self.tau).sqrt())
    }

    /// Where the front leaves the value 1.
    pub fn front_start(&self, t: f64) -> f64 {
        let (f, _) = self.law.eval(t, self.tau);
        let (f1, _) = self.law.eval(self.tau, self.tau);
        self.s1 + self.lambda * f - self.lambda * f1
    }

    /// Where the front reaches 0.
    pub fn front_end(&self, t: f64) -> f64 {
        self.front_start(t) + 1.0 / self.k(t)
    }
}

pub fn linear_profile(s: f64, t: f64, p: &LinearParams) -> Result<f64, ModelError> {
    check_time(t)?;
    p.validate()?;
    let start = p.front_start(t);
    Ok((1.0 - p.k(t) * (s - start)).clamp(0.0, 1.0))
}

/// Diffusivity that makes [`linear_profile`] an exact solution (km²/yr).
pub fn linear_diffusivity(s: f64, t: f64, p: &LinearParams) -> Result<f64, ModelError> {
    check_time(t)?;
    p.validate()?;
    let (start, end) = (p.front_start(t), p.front_end(t));
    if s >= end {
        return Ok(0.0);
    }
    Ok(((end - start).powi(2) - (s - start).powi(2)) / (4.0 * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchmidtParams {
    /// Diffusivity scale η̂ (km²/yr).
    pub eta_hat: f64,
    /// Length scale `a` of `η(r) = η̂ a / r` (km).
    pub a: f64,
    pub center: Point,
    pub t_trigger: f64,
}

impl SchmidtParams {
    pub fn diffusivity(&self, r: f64) -> f64 {
        self.eta_hat * self.a / r
    }

    fn validate(&self) -> Result<(), ModelError> {
        check_positive("eta_hat", self.eta_hat)?;
        check_positive("a", self.a)
    }
}

/// Similarity scale of the Schmidt profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchmidtScale {
    /// `r / (9 η̂ a t)^{1/3}`, which solves the polar equation with `η = η̂a/r`.
    #[default]
    Consistent,
    /// `r / (3 η̂ a t)^{1/3}`.
    Literal,
}

impl SchmidtScale {
    fn factor(self) -> f64 {
        match self {
            Self::Consistent => 9.0,
            Self::Literal => 3.0,
        }
    }
}

pub fn schmidt_profile(r: f64, t: f64, p: &SchmidtParams) -> Result<f64, ModelError> {
    schmidt_profile_scaled(r, t, p, SchmidtScale::Consistent)
}

/// `1 − (3/Γ(1/3)) ∫₀^u e^{−x³} dx` with `u = r / (c η̂ a (t − t_trigger))^{1/3}`.
pub fn schmidt_profile_scaled(
    r: f64,
    t: f64,
    p: &SchmidtParams,
    scale: SchmidtScale,
) -> Result<f64, ModelError> {
    check_time(t - p.t_trigger)?;
    p.validate()?;
    if !(r >= 0.0) {
        return Err(ModelError::InvalidParam(format!(
            "radius must be non-negative, got {r}"
        )));
    }
    let u = r / (scale.factor() * p.eta_hat * p.a * (t - p.t_trigger)).cbrt();
    let g = 1.0 - 3.0 / gamma(1.0 / 3.0) * exp_cube_integral(u);
    Ok(g.clamp(0.0, 1.0))
}

/// Instantaneous unit point source at the origin.
pub fn fundamental_2d(x: f64, y: f64, t: f64, eta_hat: f64) -> Result<f64, ModelError> {
    check_time(t)?;
    check_positive("eta_hat", eta_hat)?;
    let d = 4.0 * eta_hat * t;
    Ok((-(x * x + y * y) / d).exp() / (PI * d))
}

/// Instantaneous unit line source along `s = 0`.
pub fn line_source_profile(s: f64, t: f64, eta_hat: f64) -> Result<f64, ModelError> {
    check_time(t)?;
    check_positive("eta_hat", eta_hat)?;
    Ok((-s * s / (4.0 * eta_hat * t)).exp() / (2.0 * (PI * eta_hat * t).sqrt()))
}

/// Diffusivity `η(z)` under which the sampled similarity profile `G(z)`
/// solves `−2z G' = (η G')'`:
///
/// `η(z) = (c0 − 2 ∫₀^z ξ G'(ξ) dξ) / G'(z)`, with `c0 = η(0) G'(0)`.
///
/// `z` must be increasing and start at 0.
pub fn recover_diffusivity(z: &[f64], g: &[f64], c0: f64) -> Result<Vec<f64>, ModelError> {
    let (dg, integral) = similarity_terms(z, g)?;
    Ok(dg
        .iter()
        .zip(&integral)
        .map(|(d, i)| (c0 - 2.0 * i) / d)
        .collect())
}

/// `2 (G')⁻¹ ∫₀^z ξ G'` with no boundary constant. Only valid for profiles
/// whose flux vanishes at `z = 0`; kept for comparison.
pub fn recover_diffusivity_literal(z: &[f64], g: &[f64]) -> Result<Vec<f64>, ModelError> {
    let (dg, integral) = similarity_terms(z, g)?;
    Ok(dg.iter().zip(&integral).map(|(d, i)| 2.0 * i / d).collect())
}

// G' by central differences (second-order one-sided at the ends) and the
// running trapezoid integral of ξ G'.
fn similarity_terms(z: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let n = z.len();
    if n < 3 || g.len() != n || z[0] != 0.0 || z.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ModelError::BadGrid);
    }
    let mut dg = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (z[i] - z[i - 1], z[i + 1] - z[i]);
        dg[i] = (h0 * h0 * (g[i + 1] - g[i]) + h1 * h1 * (g[i] - g[i - 1])) / (h0 * h1 * (h0 + h1));
    }
    dg[0] = one_sided(z[0], z[1], z[2], g[0], g[1], g[2]);
    dg[n - 1] = one_sided(z[n - 1], z[n - 2], z[n - 3], g[n - 1], g[n - 2], g[n - 3]);

    let flat: Vec<usize> = (0..n).filter(|&i| dg[i].abs() < 1e-8).collect();
    if let (Some(&a), Some(&b)) = (flat.first(), flat.last()) {
        return Err(ModelError::FlatProfile {
            from: z[a],
            to: z[b],
        });
    }

    let mut integral = vec![0.0; n];
    for i in 1..n {
        integral[i] =
            integral[i - 1] + 0.5 * (z[i] - z[i - 1]) * (z[i] * dg[i] + z[i - 1] * dg[i - 1]);
    }
    Ok((dg, integral))
}

// Derivative at x0 of the parabola through (x0, y0), (x1, y1), (x2, y2).
fn one_sided(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let (a, b) = (x1 - x0, x2 - x0);
    ((y1 - y0) * b * b - (y2 - y0) * a * a) / (a * b * (b - a))
}
