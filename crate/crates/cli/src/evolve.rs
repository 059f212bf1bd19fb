//! Sampled time evolution of the fitted front profiles.

use std::fmt::Write as _;

use isogloss_core::models::{
    erfc_evolution, linear_profile, ErfcForm, ErfcParams, LinearParams, ModelError,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum EvolveModel {
    Erfc { params: ErfcParams, form: ErfcForm },
    Linear { params: LinearParams },
}

impl EvolveModel {
    pub fn eval(&self, s: f64, t: f64) -> Result<f64, ModelError> {
        match self {
            EvolveModel::Erfc { params, form } => erfc_evolution(s, t, params, *form),
            EvolveModel::Linear { params } => linear_profile(s, t, params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub s_min: f64,
    pub s_max: f64,
    /// Number of samples, endpoints included.
    pub n: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            s_min: -50.0,
            s_max: 150.0,
            n: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub t: f64,
    pub s: Vec<f64>,
    pub g: Vec<f64>,
    /// First `s` where the profile falls through 0.5, linearly interpolated.
    pub half_crossing: Option<f64>,
}

pub fn sample_profile(
    model: &EvolveModel,
    t: f64,
    sampling: Sampling,
) -> Result<Profile, ModelError> {
    if sampling.n < 2 || !(sampling.s_max > sampling.s_min) {
        return Err(ModelError::InvalidParam(format!(
            "need n >= 2 and s_max > s_min, got n = {}, [{}, {}]",
            sampling.n, sampling.s_min, sampling.s_max
        )));
    }
    let h = (sampling.s_max - sampling.s_min) / (sampling.n - 1) as f64;
    let s: Vec<f64> = (0..sampling.n)
        .map(|i| sampling.s_min + i as f64 * h)
        .collect();
    let g = s
        .iter()
        .map(|&s| model.eval(s, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Profile {
        t,
        half_crossing: half_crossing(&s, &g),
        s,
        g,
    })
}

pub fn half_crossing(s: &[f64], g: &[f64]) -> Option<f64> {
    s.windows(2).zip(g.windows(2)).find_map(|(s, g)| {
        (g[0] >= 0.5 && g[1] < 0.5).then(|| s[0] + (g[0] - 0.5) / (g[0] - g[1]) * (s[1] - s[0]))
    })
}

pub fn sample_profiles(
    model: &EvolveModel,
    times: &[f64],
    sampling: Sampling,
) -> Result<Vec<Profile>, ModelError> {
    times
        .iter()
        .map(|&t| sample_profile(model, t, sampling))
        .collect()
}

/// Long table `t,s,g`.
pub fn profiles_csv(profiles: &[Profile]) -> String {
    let mut out = String::from("t,s,g\n");
    for p in profiles {
        for (s, g) in p.s.iter().zip(&p.g) {
            let _ = writeln!(out, "{},{},{}", p.t, s, g);
        }
    }
    out
}
