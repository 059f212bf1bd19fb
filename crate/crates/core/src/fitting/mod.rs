//! Chi-square fits of the linear and erfc front profiles.
//!
//! Points are `(⟨d⟩, level)` pairs from the front statistics; the level is
//! the dependent variable. No per-point uncertainties exist, so
//! `χ² = Σ residual²` and the reduced value divides by `n − 2`.

pub mod nelder_mead;

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::special::erfc;
use nelder_mead::{minimize, NelderMeadOptions};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("{model} fit needs at least {need} points, got {got}")]
    TooFewPoints {
        model: &'static str,
        need: usize,
        got: usize,
    },
    #[error("fit points must be finite")]
    NonFinite,
    #[error("all distances coincide; slope is undetermined")]
    DegenerateSpread,
    #[error("erfc fit did not converge after restart (best kappa {kappa}, s0 {s0}, chi2 {chi2})")]
    NoConvergence { kappa: f64, s0: f64, chi2: f64 },
    #[error("{0} is zero; the front width is unbounded")]
    ZeroSlope(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitPoint {
    /// Mean distance from the 0.9 level (km).
    pub d: f64,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Erfc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitParams {
    /// `level = intercept + slope · d`.
    Linear { slope: f64, intercept: f64 },
    /// `level = ½ erfc((d − s0) κ / 2)`.
    Erfc { kappa: f64, s0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: FitParams,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn model(&self) -> ModelKind {
        match self.params {
            FitParams::Linear { .. } => ModelKind::Linear,
            FitParams::Erfc { .. } => ModelKind::Erfc,
        }
    }

    pub fn predict(&self, d: f64) -> f64 {
        match self.params {
            FitParams::Linear { slope, intercept } => intercept + slope * d,
            FitParams::Erfc { kappa, s0 } => erfc_model(d, kappa, s0),
        }
    }
}

fn erfc_model(d: f64, kappa: f64, s0: f64) -> f64 {
    0.5 * erfc((d - s0) * kappa / 2.0)
}

fn check(points: &[FitPoint], model: &'static str, need: usize) -> Result<(), FitError> {
    if points.len() < need {
        return Err(FitError::TooFewPoints {
            model,
            need,
            got: points.len(),
        });
    }
    if points
        .iter()
        .any(|p| !p.d.is_finite() || !p.level.is_finite())
    {
        return Err(FitError::NonFinite);
    }
    Ok(())
}

fn finish(points: &[FitPoint], params: FitParams) -> FitResult {
    let mut r = FitResult {
        params,
        chi2: 0.0,
        reduced_chi2: 0.0,
        dof: points.len() - 2,
        residuals: Vec::new(),
    };
    r.residuals = points.iter().map(|p| p.level - r.predict(p.d)).collect();
    r.chi2 = r.residuals.iter().map(|e| e * e).sum();
    r.reduced_chi2 = r.chi2 / r.dof as f64;
    r
}

/// Ordinary least squares of level against distance.
pub fn fit_linear(points: &[FitPoint]) -> Result<FitResult, FitError> {
    check(points, "linear", 3)?;
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.d).sum::<f64>() / n;
    let my = points.iter().map(|p| p.level).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.d - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.d - mx) * (p.level - my)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0).powi(2) * n {
        return Err(FitError::DegenerateSpread);
    }
    let slope = sxy / sxx;
    Ok(finish(
        points,
        FitParams::Linear {
            slope,
            intercept: my - slope * mx,
        },
    ))
}

/// Least-squares `½ erfc((d − s0) κ / 2)` by Nelder–Mead over `(κ, s0)`.
pub fn fit_erfc(points: &[FitPoint]) -> Result<FitResult, FitError> {
    check(points, "erfc", 4)?;
    let chi2 = |x: &[f64]| -> f64 {
        if !(x[0] > 0.0) {
            return f64::INFINITY;
        }
        points
            .iter()
            .map(|p| (p.level - erfc_model(p.d, x[0], x[1])).powi(2))
            .sum()
    };
    let (kappa0, s00) = initial_guess(points);
    let opts = NelderMeadOptions::default();
    let first = minimize(chi2, &[kappa0, s00], &[0.2 * kappa0, 0.5 / kappa0], opts);
    // Restart from the best point with a fresh, smaller simplex.
    let k = first.x[0];
    let second = minimize(chi2, &first.x, &[0.05 * k, 0.1 / k], opts);
    let best = if second.f <= first.f { &second } else { &first };
    if !second.converged {
        return Err(FitError::NoConvergence {
            kappa: best.x[0],
            s0: best.x[1],
            chi2: best.f,
        });
    }
    Ok(finish(
        points,
        FitParams::Erfc {
            kappa: best.x[0],
            s0: best.x[1],
        },
    ))
}

// κ from the distance between the 0.75 and 0.25 crossings, s0 at the 0.5 crossing.
fn initial_guess(points: &[FitPoint]) -> (f64, f64) {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.d.total_cmp(&b.d));
    let crossing = |level: f64| -> Option<f64> {
        sorted.windows(2).find_map(|w| {
            let (a, b) = (w[0], w[1]);
            let (lo, hi) = (a.level.min(b.level), a.level.max(b.level));
            (lo <= level && level <= hi && a.level != b.level)
                .then(|| a.d + (level - a.level) / (b.level - a.level) * (b.d - a.d))
        })
    };
    let span = sorted.last().expect("checked").d - sorted[0].d;
    let mid = 0.5 * (sorted[0].d + sorted.last().expect("checked").d);
    // erfc(±0.476936...) = 1 ∓ 0.5
    const Q: f64 = 0.476_936_276_204_469_9;
    let kappa = match (crossing(0.75), crossing(0.25)) {
        (Some(d75), Some(d25)) if d25 > d75 => 4.0 * Q / (d25 - d75),
        _ if span > 0.0 => 4.0 / span,
        _ => 1.0,
    };
    (kappa, crossing(0.5).unwrap_or(mid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derived {
    /// Slope of the profile at its centre at `t = τ` (1/km).
    pub k_tau: f64,
    /// `1 / k(τ)` (km).
    pub w_fit: f64,
    /// Erfc: the constant diffusivity `1/(κ²τ)`. Linear: the diffusivity
    /// `1/(χ²τ)` at the top of the front, which is time independent.
    pub eta: f64,
    /// Linear fits only: `χ = 2 k(τ)`.
    pub chi: Option<f64>,
}

pub fn derived_quantities(fit: &FitResult, tau: f64) -> Result<Derived, FitError> {
    match fit.params {
        FitParams::Linear { slope, .. } => {
            let k = slope.abs();
            if k == 0.0 {
                return Err(FitError::ZeroSlope("slope"));
            }
            let chi = 2.0 * k;
            Ok(Derived {
                k_tau: k,
                w_fit: 1.0 / k,
                eta: 1.0 / (chi * chi * tau),
                chi: Some(chi),
            })
        }
        FitParams::Erfc { kappa, .. } => {
            if kappa == 0.0 {
                return Err(FitError::ZeroSlope("kappa"));
            }
            let k = kappa / (2.0 * std::f64::consts::PI.sqrt());
            Ok(Derived {
                k_tau: k,
                w_fit: 1.0 / k,
                eta: 1.0 / (kappa * kappa * tau),
                chi: None,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonInput {
    pub feature: String,
    pub n: usize,
    pub linear: Option<FitResult>,
    pub erfc: Option<FitResult>,
    /// Measured front width Σ⟨δ⟩ (km).
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Favored {
    Linear,
    Erfc,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub feature: String,
    pub n: usize,
    pub linear_chi2: Option<f64>,
    pub erfc_chi2: Option<f64>,
    pub w: f64,
    pub favored: Option<Favored>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Reduced chi-squares agree when equal at two significant digits.
pub fn chi2_tie(a: f64, b: f64) -> bool {
    format!("{a:.1e}") == format!("{b:.1e}")
}

pub fn compare_models(inputs: &[ComparisonInput]) -> ComparisonTable {
    let rows = inputs
        .iter()
        .map(|inp| {
            let lin = inp.linear.as_ref().map(|f| f.reduced_chi2);
            let erf = inp.erfc.as_ref().map(|f| f.reduced_chi2);
            let favored = match (lin, erf) {
                (Some(l), Some(e)) if chi2_tie(l, e) => Some(Favored::Both),
                (Some(l), Some(e)) => Some(if l < e {
                    Favored::Linear
                } else {
                    Favored::Erfc
                }),
                _ => None,
            };
            ComparisonRow {
                feature: inp.feature.clone(),
                n: inp.n,
                linear_chi2: lin,
                erfc_chi2: erf,
                w: inp.w,
                favored,
            }
        })
        .collect();
    ComparisonTable { rows }
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("feature,n,linear_reduced_chi2,erfc_reduced_chi2,w_km,favored\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        for r in &self.rows {
            let fav = match r.favored {
                Some(Favored::Linear) => "linear",
                Some(Favored::Erfc) => "erfc",
                Some(Favored::Both) => "both",
                None => "",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{}",
                r.feature,
                r.n,
                opt(r.linear_chi2),
                opt(r.erfc_chi2),
                r.w,
                fav
            );
        }
        out
    }

    /// Fixed-width table; favoured cells carry a `*`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<24} {:>4} {:>12} {:>12} {:>9}\n",
            "feature", "N", "linear", "erfc", "w (km)"
        );
        for r in &self.rows {
            let cell = |v: Option<f64>, mine: bool| match v {
                Some(x) => format!("{x:.3e}{}", if mine { "*" } else { " " }),
                None => "-".to_string(),
            };
            let lin = matches!(r.favored, Some(Favored::Linear | Favored::Both));
            let erf = matches!(r.favored, Some(Favored::Erfc | Favored::Both));
            let _ = writeln!(
                out,
                "{:<24} {:>4} {:>12} {:>12} {:>9.2}",
                r.feature,
                r.n,
                cell(r.linear_chi2, lin),
                cell(r.erfc_chi2, erf),
                r.w
            );
        }
        out
    }
}
