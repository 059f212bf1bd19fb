use serde::Serialize;

use super::{path_levels, FieldError, GradientPath};

/// Averaged geometry of a set of complete gradient paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontStats {
    /// Complete paths averaged.
    pub n: usize,
    pub truncated: usize,
    /// ⟨δ⁽ʲ⁾⟩ for the nine intervals 0.9→0.8, …, 0.1→0.0 (km).
    pub mean_delta: Vec<f64>,
    /// Sample variance of δ⁽ʲ⁾ (zero for a single path).
    pub var_delta: Vec<f64>,
    /// ⟨d⁽ʲ⁾⟩ from the 0.9 level to level `levels[j]` (km); the first entry is 0.
    pub mean_distance: Vec<f64>,
    pub levels: Vec<f64>,
    /// Σ⟨δ⁽ʲ⁾⟩ (km).
    pub w: f64,
}

pub fn front_stats(paths: &[GradientPath]) -> Result<FrontStats, FieldError> {
    let complete: Vec<&GradientPath> = paths.iter().filter(|p| p.is_complete()).collect();
    let truncated = paths.len() - complete.len();
    if complete.is_empty() {
        return Err(FieldError::NoCompletePaths { truncated });
    }
    let n = complete.len();
    let mut mean_delta = vec![0.0; 9];
    let mut var_delta = vec![0.0; 9];
    for j in 0..9 {
        let m = complete.iter().map(|p| p.segment_lengths[j]).sum::<f64>() / n as f64;
        mean_delta[j] = m;
        if n > 1 {
            var_delta[j] = complete
                .iter()
                .map(|p| (p.segment_lengths[j] - m).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
        }
    }
    let mut mean_distance = vec![0.0; 10];
    for j in 1..10 {
        mean_distance[j] = mean_distance[j - 1] + mean_delta[j - 1];
    }
    Ok(FrontStats {
        n,
        truncated,
        w: mean_delta.iter().sum(),
        mean_delta,
        var_delta,
        mean_distance,
        levels: path_levels().to_vec(),
    })
}
