//! Vertex gradients by minimising bending energy along triangulation edges.
//!
//! Along each edge the surface restricted to the edge is a cubic Hermite
//! curve fixed by the two end values and the projected end gradients. The
//! global energy is the sum over edges of ∫ h''(t)² dt; setting its
//! derivative with respect to one vertex gradient to zero gives a 2×2 system
//! per vertex, solved in Gauss-Seidel sweeps. Sweeps start from a local
//! least-squares plane fit, which already reproduces affine data exactly.

use serde::Serialize;

use super::triangulation::Triangulation;
use crate::geom::Point;

#[derive(Debug, Clone, Copy)]
pub struct GradientOptions {
    /// Stop once no gradient component moves by more than this (value per km).
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 400,
        }
    }
}

/// Outcome of the relaxation; non-convergence is reported, not raised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientStatus {
    pub sweeps: usize,
    pub max_change: f64,
    pub converged: bool,
}

pub fn estimate_gradients(
    tri: &Triangulation,
    values: &[f64],
    opts: GradientOptions,
) -> (Vec<Point>, GradientStatus) {
    let pts = tri.points();
    let adj = tri.vertex_neighbors();
    let mut grad: Vec<Point> = (0..pts.len())
        .map(|i| plane_fit(pts, values, i, &adj[i]))
        .collect();

    let mut status = GradientStatus {
        sweeps: 0,
        max_change: f64::INFINITY,
        converged: false,
    };
    for sweep in 1..=opts.max_sweeps {
        let mut max_change: f64 = 0.0;
        for i in 0..pts.len() {
            let (mut qxx, mut qxy, mut qyy) = (0.0, 0.0, 0.0);
            let (mut sx, mut sy) = (0.0, 0.0);
            for &j in &adj[i] {
                let e = pts[j].sub(pts[i]);
                let l = e.norm();
                let l3 = l * l * l;
                let rhs = (6.0 * (values[j] - values[i]) - 2.0 * grad[j].dot(e)) / l3;
                qxx += 4.0 * e.x * e.x / l3;
                qxy += 4.0 * e.x * e.y / l3;
                qyy += 4.0 * e.y * e.y / l3;
                sx += rhs * e.x;
                sy += rhs * e.y;
            }
            let det = qxx * qyy - qxy * qxy;
            if det.abs() <= f64::EPSILON * (qxx * qyy).abs() {
                continue;
            }
            let g = Point::new((qyy * sx - qxy * sy) / det, (qxx * sy - qxy * sx) / det);
            let change = (g.x - grad[i].x).abs().max((g.y - grad[i].y).abs());
            max_change = max_change.max(change);
            grad[i] = g;
        }
        status.sweeps = sweep;
        status.max_change = max_change;
        if max_change < opts.tol {
            status.converged = true;
            break;
        }
    }
    if !status.converged {
        log::warn!(
            "gradient relaxation stopped after {} sweeps with max change {:e}",
            status.sweeps,
            status.max_change
        );
    }
    (grad, status)
}

// Least-squares plane through vertex i anchored at its value.
fn plane_fit(pts: &[Point], values: &[f64], i: usize, nbrs: &[usize]) -> Point {
    let (mut axx, mut axy, mut ayy, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &j in nbrs {
        let e = pts[j].sub(pts[i]);
        let df = values[j] - values[i];
        axx += e.x * e.x;
        axy += e.x * e.y;
        ayy += e.y * e.y;
        bx += e.x * df;
        by += e.y * df;
    }
    let det = axx * ayy - axy * axy;
    if det.abs() <= f64::EPSILON * (axx * ayy).abs() || det == 0.0 {
        return Point::default();
    }
    Point::new((ayy * bx - axy * by) / det, (axx * by - axy * bx) / det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scattered(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new(rng.gen_range(0.0..30.0), rng.gen_range(0.0..30.0)))
            .collect()
    }

    #[test]
    fn linear_field_gradients_exact() {
        let pts = scattered(80, 1);
        let tri = Triangulation::new(pts.clone()).unwrap();
        let vals: Vec<f64> = pts.iter().map(|p| 0.2 + 0.01 * p.x + 0.02 * p.y).collect();
        let (g, status) = estimate_gradients(&tri, &vals, GradientOptions::default());
        assert!(status.converged);
        for gi in g {
            assert!(
                (gi.x - 0.01).abs() < 1e-9 && (gi.y - 0.02).abs() < 1e-9,
                "{gi:?}"
            );
        }
    }

    #[test]
    fn constant_field_zero_gradients() {
        let pts = scattered(40, 2);
        let tri = Triangulation::new(pts).unwrap();
        let (g, status) = estimate_gradients(&tri, &[0.7; 40], GradientOptions::default());
        assert!(status.converged);
        assert!(g.iter().all(|gi| gi.x.abs() < 1e-12 && gi.y.abs() < 1e-12));
    }

    #[test]
    fn quadratic_on_fine_grid() {
        // x^2 on a regular grid: analytic derivative (2x, 0).
        let h = 0.05;
        let mut pts = Vec::new();
        for j in 0..21 {
            for i in 0..21 {
                pts.push(Point::new(1.0 + i as f64 * h, j as f64 * h));
            }
        }
        let vals: Vec<f64> = pts.iter().map(|p| p.x * p.x).collect();
        let tri = Triangulation::new(pts.clone()).unwrap();
        let (g, status) = estimate_gradients(&tri, &vals, GradientOptions::default());
        assert!(status.converged, "{status:?}");
        for (k, p) in pts.iter().enumerate() {
            let interior =
                p.x > 1.0 + 2.0 * h && p.x < 2.0 - 2.0 * h && p.y > 2.0 * h && p.y < 1.0 - 2.0 * h;
            if interior {
                assert!(
                    (g[k].x - 2.0 * p.x).abs() < 0.05 * 2.0 * p.x,
                    "at {p:?}: {:?}",
                    g[k]
                );
                assert!(g[k].y.abs() < 0.05 * 2.0 * p.x);
            }
        }
    }

    #[test]
    fn reports_non_convergence_without_failing() {
        let pts = scattered(60, 5);
        let tri = Triangulation::new(pts.clone()).unwrap();
        let vals: Vec<f64> = pts
            .iter()
            .map(|p| ((p.x * 0.3).sin() + 1.0) / 2.0)
            .collect();
        let (g, status) = estimate_gradients(
            &tri,
            &vals,
            GradientOptions {
                tol: 0.0,
                max_sweeps: 3,
            },
        );
        assert!(!status.converged);
        assert_eq!(status.sweeps, 3);
        assert_eq!(g.len(), 60);
    }
}
