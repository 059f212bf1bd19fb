//! The continuous feature-fraction surface.
//!
//! Observed 0/1 values are interpolated with C¹ Clough-Tocher macro-elements
//! over a Delaunay triangulation of the localities. Evaluations are clamped
//! to `[0, 1]` by default, which flattens the surface to exactly 0 or 1 on
//! the regions the cubic patches would otherwise overshoot.

mod clough_tocher;
mod gradients;
mod triangulation;

use thiserror::Error;

pub use clough_tocher::{barycentric, Patch};
pub use gradients::{estimate_gradients, GradientOptions, GradientStatus};
pub use triangulation::{incircle, orient, Triangulation};

use crate::dataio::{DataError, Dataset};
use crate::field::Grid;
use crate::geom::{BBox, Point};
use crate::par::Exec;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite point ({0}, {1})")]
    NonFinitePoint(f64, f64),
    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },
    #[error("all points are collinear")]
    Collinear,
    #[error("{values} values for {points} points")]
    LengthMismatch { points: usize, values: usize },
    #[error("value {value} at vertex {vertex} is not finite")]
    NonFiniteValue { vertex: usize, value: f64 },
    #[error("insufficient data for feature {feature:?}: {source}")]
    InsufficientData {
        feature: String,
        #[source]
        source: Box<SurfaceError>,
    },
    #[error("degenerate raster request: {0}")]
    DegenerateRaster(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Interpolated surface over one feature's observations.
#[derive(Debug, Clone)]
pub struct FeatureSurface {
    tri: Triangulation,
    values: Vec<f64>,
    gradients: Vec<Point>,
    patches: Vec<Patch>,
    clamp: bool,
    status: GradientStatus,
}

impl FeatureSurface {
    pub fn new(points: Vec<Point>, values: Vec<f64>, clamp: bool) -> Result<Self, SurfaceError> {
        Self::with_options(points, values, clamp, GradientOptions::default())
    }

    pub fn with_options(
        points: Vec<Point>,
        values: Vec<f64>,
        clamp: bool,
        opts: GradientOptions,
    ) -> Result<Self, SurfaceError> {
        if points.len() != values.len() {
            return Err(SurfaceError::LengthMismatch {
                points: points.len(),
                values: values.len(),
            });
        }
        if let Some((vertex, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SurfaceError::NonFiniteValue { vertex, value });
        }
        let tri = Triangulation::new(points)?;
        let (gradients, status) = estimate_gradients(&tri, &values, opts);
        let patches = tri
            .triangles()
            .iter()
            .enumerate()
            .map(|(t, v)| {
                Patch::new(
                    tri.triangle_points(t),
                    [values[v[0]], values[v[1]], values[v[2]]],
                    [gradients[v[0]], gradients[v[1]], gradients[v[2]]],
                )
            })
            .collect();
        Ok(Self {
            tri,
            values,
            gradients,
            patches,
            clamp,
            status,
        })
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradients(&self) -> &[Point] {
        &self.gradients
    }

    pub fn clamped(&self) -> bool {
        self.clamp
    }

    pub fn gradient_status(&self) -> GradientStatus {
        self.status
    }

    /// Same surface with the clamp switched on or off.
    pub fn with_clamp(&self, clamp: bool) -> Self {
        Self {
            clamp,
            ..self.clone()
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.tri.locate(p).is_some()
    }

    /// Surface value, or `None` outside the convex hull of the data.
    pub fn evaluate(&self, p: Point) -> Option<f64> {
        let v = self.evaluate_unclamped(p)?;
        Some(if self.clamp { v.clamp(0.0, 1.0) } else { v })
    }

    pub fn evaluate_unclamped(&self, p: Point) -> Option<f64> {
        let t = self.tri.locate(p)?;
        let lambda = barycentric(self.tri.triangle_points(t), p);
        Some(self.patches[t].eval(lambda))
    }

    /// Samples the surface at the cell centres of an `nx` × `ny` raster.
    /// Cells outside the hull hold `fill`.
    pub fn rasterize(
        &self,
        bbox: BBox,
        nx: usize,
        ny: usize,
        fill: f64,
        exec: Exec,
    ) -> Result<Grid, SurfaceError> {
        if nx < 2 || ny < 2 {
            return Err(SurfaceError::DegenerateRaster(format!("{nx}x{ny} cells")));
        }
        if !bbox.is_proper() {
            return Err(SurfaceError::DegenerateRaster(format!("{bbox:?}")));
        }
        let mut grid = Grid::filled(bbox, nx, ny, fill);
        let (dx, dy) = (grid.dx(), grid.dy());
        exec.for_each_row(grid.values_mut(), nx, |j, row| {
            let y = bbox.ymin + (j as f64 + 0.5) * dy;
            for (i, cell) in row.iter_mut().enumerate() {
                let x = bbox.xmin + (i as f64 + 0.5) * dx;
                if let Some(v) = self.evaluate(Point::new(x, y)) {
                    *cell = v;
                }
            }
        });
        Ok(grid)
    }
}

/// Builds the surface of `feature` from every locality that observed it.
pub fn build_surface(
    dataset: &Dataset,
    feature: &str,
    clamp: bool,
) -> Result<FeatureSurface, SurfaceError> {
    let (points, values) = dataset.feature_samples(feature)?;
    FeatureSurface::new(points, values, clamp).map_err(|e| match e {
        e @ (SurfaceError::TooFewPoints(_)
        | SurfaceError::Collinear
        | SurfaceError::DuplicatePoint { .. }) => SurfaceError::InsufficientData {
            feature: feature.to_string(),
            source: Box::new(e),
        },
        e => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scattered(n: usize, seed: u64, w: f64, h: f64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h)))
            .collect()
    }

    fn inside_point(s: &FeatureSurface, rng: &mut ChaCha8Rng) -> Point {
        let b = s.triangulation().bbox();
        loop {
            let p = Point::new(rng.gen_range(b.xmin..b.xmax), rng.gen_range(b.ymin..b.ymax));
            if s.contains(p) {
                return p;
            }
        }
    }

    #[test]
    fn nodal_exactness() {
        let pts = scattered(150, 3, 40.0, 30.0);
        let vals: Vec<f64> = pts
            .iter()
            .map(|p| if p.y > 15.0 { 1.0 } else { 0.0 })
            .collect();
        let s = FeatureSurface::new(pts.clone(), vals.clone(), false).unwrap();
        for (p, v) in pts.iter().zip(&vals) {
            assert!((s.evaluate(*p).unwrap() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn all_ones_is_flat() {
        let pts = scattered(50, 4, 10.0, 10.0);
        let s = FeatureSurface::new(pts, vec![1.0; 50], true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = inside_point(&s, &mut rng);
            assert!((s.evaluate(p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_precision_at_random_points() {
        let pts = scattered(120, 5, 20.0, 20.0);
        let lin = |p: Point| 0.1 + 0.02 * p.x + 0.015 * p.y;
        let vals: Vec<f64> = pts.iter().map(|&p| lin(p)).collect();
        let s = FeatureSurface::new(pts, vals, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let p = inside_point(&s, &mut rng);
            assert!((s.evaluate(p).unwrap() - lin(p)).abs() < 1e-9);
        }
    }

    #[test]
    fn outside_hull_is_none() {
        let pts = scattered(30, 6, 10.0, 10.0);
        let s = FeatureSurface::new(pts, vec![0.5; 30], true).unwrap();
        assert_eq!(s.evaluate(Point::new(1e4, 1e4)), None);
    }

    #[test]
    fn single_one_overshoots_unclamped_only() {
        let mut pts = Vec::new();
        for j in 0..9 {
            for i in 0..9 {
                pts.push(Point::new(
                    i as f64 * 2.0 + 0.1 * (j % 2) as f64,
                    j as f64 * 2.0,
                ));
            }
        }
        let centre = 4 * 9 + 4;
        let vals: Vec<f64> = (0..pts.len())
            .map(|k| if k == centre { 1.0 } else { 0.0 })
            .collect();
        let s = FeatureSurface::new(pts, vals, false).unwrap();
        let c = s.with_clamp(true);
        let bb = s.triangulation().bbox();
        let raw = s
            .rasterize(bb, 120, 120, f64::NAN, Exec::Sequential)
            .unwrap();
        let clamped = c
            .rasterize(bb, 120, 120, f64::NAN, Exec::Sequential)
            .unwrap();
        let min = |g: &Grid| {
            g.values()
                .iter()
                .filter(|v| !v.is_nan())
                .fold(f64::INFINITY, |a, &b| a.min(b))
        };
        assert!(min(&raw) < 0.0, "expected undershoot, min {}", min(&raw));
        assert_eq!(min(&clamped), 0.0);
    }

    #[test]
    fn half_plane_is_bounded_and_monotone() {
        let pts = scattered(300, 7, 40.0, 40.0);
        let vals: Vec<f64> = pts
            .iter()
            .map(|p| if p.y > 20.0 { 1.0 } else { 0.0 })
            .collect();
        let s = FeatureSurface::new(pts, vals, true).unwrap();
        let g = s
            .rasterize(
                BBox::new(10.0, 5.0, 30.0, 35.0),
                20,
                60,
                f64::NAN,
                Exec::Parallel,
            )
            .unwrap();
        assert!(g
            .values()
            .iter()
            .all(|v| v.is_nan() || (0.0..=1.0).contains(v)));
        // Away from the noisy edges, the column mean rises from south to north.
        let mean_row = |j: usize| {
            (0..20)
                .map(|i| g.get(i, j))
                .filter(|v| !v.is_nan())
                .sum::<f64>()
        };
        assert!(mean_row(5) < mean_row(30) && mean_row(30) < mean_row(55));
    }

    #[test]
    fn clamp_semantics() {
        let pts = scattered(100, 8, 20.0, 20.0);
        let vals: Vec<f64> = pts
            .iter()
            .map(|p| if p.x + 0.3 * p.y > 12.0 { 1.0 } else { 0.0 })
            .collect();
        let raw = FeatureSurface::new(pts, vals, false).unwrap();
        let clamped = raw.with_clamp(true);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let p = inside_point(&raw, &mut rng);
            let u = raw.evaluate(p).unwrap();
            assert_eq!(clamped.evaluate(p).unwrap(), u.clamp(0.0, 1.0));
        }
    }

    #[test]
    fn c1_across_interior_edges() {
        let pts = scattered(120, 12, 30.0, 30.0);
        let vals: Vec<f64> = pts
            .iter()
            .map(|p| 0.5 + 0.5 * (0.2 * p.x).sin() * (0.15 * p.y).cos())
            .collect();
        let s = FeatureSurface::new(pts, vals, false).unwrap();
        let tri = s.triangulation();
        let f = |p: Point| s.evaluate_unclamped(p).unwrap();
        let h = 1e-4;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        while checked < 50 {
            let t = rng.gen_range(0..tri.triangles().len());
            let e = rng.gen_range(0..3);
            if tri.neighbors()[t][e].is_none() {
                continue;
            }
            let v = tri.triangles()[t];
            let (a, b) = (tri.points()[v[(e + 1) % 3]], tri.points()[v[(e + 2) % 3]]);
            let along = rng.gen_range(0.2..0.8);
            let m = a.add(b.sub(a).scale(along));
            let d = b.sub(a);
            let n = Point::new(-d.y, d.x).scale(1.0 / d.norm());
            // Second-order one-sided differences from each side.
            let plus =
                (-3.0 * f(m) + 4.0 * f(m.add(n.scale(h))) - f(m.add(n.scale(2.0 * h)))) / (2.0 * h);
            let minus =
                (3.0 * f(m) - 4.0 * f(m.sub(n.scale(h))) + f(m.sub(n.scale(2.0 * h)))) / (2.0 * h);
            let scale = plus.abs().max(minus.abs()).max(1e-2);
            assert!(
                (plus - minus).abs() / scale < 1e-4,
                "edge {t}/{e}: {plus} vs {minus}"
            );
            checked += 1;
        }
    }

    #[test]
    fn rasterize_constant_and_outside() {
        let pts = scattered(40, 14, 10.0, 10.0);
        let s = FeatureSurface::new(pts, vec![0.25; 40], true).unwrap();
        let hull = s.triangulation().bbox();
        let inner = BBox::new(hull.xmin, hull.ymin, hull.xmax, hull.ymax);
        let g = s.rasterize(inner, 10, 10, -1.0, Exec::Sequential).unwrap();
        assert!(g
            .values()
            .iter()
            .all(|&v| v == -1.0 || (v - 0.25).abs() < 1e-12));
        let far = s
            .rasterize(
                BBox::new(100.0, 100.0, 110.0, 110.0),
                10,
                10,
                f64::NAN,
                Exec::Sequential,
            )
            .unwrap();
        assert!(far.values().iter().all(|v| v.is_nan()));
        assert!(matches!(
            s.rasterize(
                BBox::new(0.0, 0.0, 0.0, 1.0),
                10,
                10,
                f64::NAN,
                Exec::Sequential
            ),
            Err(SurfaceError::DegenerateRaster(_))
        ));
        assert!(s
            .rasterize(hull, 1, 10, f64::NAN, Exec::Sequential)
            .is_err());
    }

    #[test]
    fn parallel_and_sequential_rasters_match() {
        let pts = scattered(200, 15, 30.0, 30.0);
        let vals: Vec<f64> = pts
            .iter()
            .map(|p| if p.y > 15.0 { 1.0 } else { 0.0 })
            .collect();
        let s = FeatureSurface::new(pts, vals, true).unwrap();
        let bb = s.triangulation().bbox();
        let a = s.rasterize(bb, 64, 48, f64::NAN, Exec::Parallel).unwrap();
        let b = s.rasterize(bb, 64, 48, f64::NAN, Exec::Sequential).unwrap();
        let bits = |g: &Grid| g.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn clamped_surface_stays_in_unit_range(seed in 0u64..10_000) {
            let pts = scattered(60, seed, 20.0, 20.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
            let vals: Vec<f64> = (0..60).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let s = FeatureSurface::new(pts, vals, true).unwrap();
            for _ in 0..200 {
                let p = inside_point(&s, &mut rng);
                let v = s.evaluate(p).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
