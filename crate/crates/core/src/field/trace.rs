//! Steepest-descent gradient lines across the 0.1 contour intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ContourSet, FieldError};
use crate::geom::Point;
use crate::surface::FeatureSurface;

/// Levels crossed by a gradient line, from 0.9 down to 0.0.
pub fn path_levels() -> [f64; 10] {
    std::array::from_fn(|i| (9 - i) as f64 / 10.0)
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    /// Ray march substep (km).
    pub substep: f64,
    /// Central-difference step for the gradient (km).
    pub h: f64,
    /// A level `L` counts as reached once the surface is at or below `L + level_tol`.
    pub level_tol: f64,
    /// Starts farther than this from the 0.9 contour are rejected (km).
    pub snap_radius: f64,
    /// Gradients weaker than this stop the path (value/km).
    pub min_grad: f64,
    /// Final bracket width of the crossing bisection (km).
    pub bisect_width: f64,
    /// Give up on a segment that has not reached its level after this distance (km).
    pub max_segment: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            substep: 0.1,
            h: 0.05,
            level_tol: 5e-4,
            snap_radius: 0.5,
            min_grad: 1e-6,
            bisect_width: 1e-7,
            max_segment: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathStatus {
    Complete,
    /// Stopped after reaching `level`.
    Truncated {
        level: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientPath {
    pub start: Point,
    /// One point per level reached, starting with 0.9.
    pub crossings: Vec<Point>,
    pub levels: Vec<f64>,
    /// δ between consecutive crossings (km).
    pub segment_lengths: Vec<f64>,
    pub status: PathStatus,
}

impl GradientPath {
    pub fn is_complete(&self) -> bool {
        self.status == PathStatus::Complete
    }

    pub fn total_length(&self) -> f64 {
        self.segment_lengths.iter().sum()
    }
}

/// Central-difference gradient of the (clamped) surface.
pub fn gradient_at(surface: &FeatureSurface, p: Point, h: f64) -> Result<Point, FieldError> {
    let at = |q: Point| {
        surface
            .evaluate(q)
            .ok_or(FieldError::OutsideHull { x: q.x, y: q.y })
    };
    let e = at(p.add(Point::new(h, 0.0)))?;
    let w = at(p.sub(Point::new(h, 0.0)))?;
    let n = at(p.add(Point::new(0.0, h)))?;
    let s = at(p.sub(Point::new(0.0, h)))?;
    Ok(Point::new((e - w) / (2.0 * h), (n - s) / (2.0 * h)))
}

/// Closest point to `p` on the polylines of `level`, with its distance.
pub fn snap_to_contour(contours: &ContourSet, level: f64, p: Point) -> Option<(Point, f64)> {
    let mut best: Option<(Point, f64)> = None;
    for line in &contours.level(level)?.polylines {
        for w in line.points.windows(2) {
            let q = closest_on_segment(w[0], w[1], p);
            let d = q.dist(p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((q, d));
            }
        }
    }
    best
}

fn closest_on_segment(a: Point, b: Point, p: Point) -> Point {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a;
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    a.add(ab.scale(t))
}

/// Traces from `start`, which must lie within `snap_radius` of the 0.9 contour.
pub fn trace_gradient_line(
    surface: &FeatureSurface,
    contours: &ContourSet,
    start: Point,
    opts: &TraceOptions,
) -> Result<GradientPath, FieldError> {
    let (snapped, d) =
        snap_to_contour(contours, 0.9, start).ok_or(FieldError::NoContour { level: 0.9 })?;
    if d > opts.snap_radius {
        return Err(FieldError::StartOffContour {
            x: start.x,
            y: start.y,
            distance: d,
        });
    }
    trace_from(surface, snapped, opts)
}

/// Traces from a point already on (or next to) the 0.9 contour.
///
/// The start is first moved along the local gradient onto the 0.9 level.
/// From each crossing the descent direction is frozen and the straight ray
/// is marched until the surface drops to the next level.
pub fn trace_from(
    surface: &FeatureSurface,
    start: Point,
    opts: &TraceOptions,
) -> Result<GradientPath, FieldError> {
    let levels = path_levels();
    let truncated = |start: Point, crossings: Vec<Point>, lengths: Vec<f64>| {
        let level = levels[crossings.len().saturating_sub(1)];
        GradientPath {
            start,
            levels: levels[..crossings.len()].to_vec(),
            crossings,
            segment_lengths: lengths,
            status: PathStatus::Truncated { level },
        }
    };

    let first = match settle_on_level(surface, start, levels[0] + opts.level_tol, opts) {
        Some(p) => p,
        None => return Ok(truncated(start, vec![start], Vec::new())),
    };
    let mut crossings = vec![first];
    let mut lengths = Vec::with_capacity(9);
    for &level in &levels[1..] {
        let c = *crossings.last().expect("non-empty");
        let g = match gradient_at(surface, c, opts.h) {
            Ok(g) if g.norm() >= opts.min_grad => g,
            _ => return Ok(truncated(start, crossings, lengths)),
        };
        let u = g.scale(-1.0 / g.norm());
        match march(surface, c, u, level + opts.level_tol, opts) {
            Some(s) => {
                crossings.push(c.add(u.scale(s)));
                lengths.push(s);
            }
            None => return Ok(truncated(start, crossings, lengths)),
        }
    }
    Ok(GradientPath {
        start,
        crossings,
        levels: levels.to_vec(),
        segment_lengths: lengths,
        status: PathStatus::Complete,
    })
}

// Distance along `u` from `c` at which the surface first drops to `target`.
fn march(
    surface: &FeatureSurface,
    c: Point,
    u: Point,
    target: f64,
    opts: &TraceOptions,
) -> Option<f64> {
    let at = |s: f64| surface.evaluate(c.add(u.scale(s)));
    let mut lo = 0.0;
    let steps = (opts.max_segment / opts.substep).ceil() as usize;
    let reached = |s: f64| at(s).is_none_or(|v| v <= target);
    for k in 1..=steps {
        let hi = k as f64 * opts.substep;
        match at(hi) {
            Some(v) if v <= target => return Some(bisect(reached, lo, hi, opts.bisect_width)),
            Some(_) => lo = hi,
            None => {
                // The ray leaves the hull within this substep; the level may
                // still be reached before the edge.
                let (inside, _) = bracket(|s| at(s).is_none(), lo, hi, opts.bisect_width);
                return (at(inside)? <= target)
                    .then(|| bisect(reached, lo, inside, opts.bisect_width));
            }
        }
    }
    None
}

// Smallest s in (lo, hi] with `below(s)`, given `!below(lo)` and `below(hi)`.
fn bisect(below: impl Fn(f64) -> bool, lo: f64, hi: f64, width: f64) -> f64 {
    bracket(below, lo, hi, width).1
}

// Shrinks `[lo, hi]` around the switch of `below` to at most `width`.
fn bracket(below: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64) {
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

// Moves `p` along the gradient line to the first point at or below
// `target`; `None` on flat or off-hull ground.
fn settle_on_level(
    surface: &FeatureSurface,
    p: Point,
    target: f64,
    opts: &TraceOptions,
) -> Option<Point> {
    let g = gradient_at(surface, p, opts.h).ok()?;
    if g.norm() < opts.min_grad {
        return None;
    }
    let u = g.scale(-1.0 / g.norm());
    let below = |s: f64| surface.evaluate(p.add(u.scale(s))).map(|v| v <= target);
    // Bracket [lo, hi] with lo above the level and hi at or below it,
    // widening away from p downhill or uphill as needed.
    let limit = opts.snap_radius.max(opts.substep);
    let downhill = !below(0.0)?;
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut step = opts.substep / 8.0;
    loop {
        if downhill {
            hi = lo + step;
            if below(hi)? {
                break;
            }
            lo = hi;
        } else {
            lo = hi - step;
            if !below(lo)? {
                break;
            }
            hi = lo;
        }
        if lo.abs().max(hi.abs()) >= limit {
            return None;
        }
        step *= 2.0;
    }
    let s = bisect(|s| below(s).unwrap_or(true), lo, hi, opts.bisect_width);
    Some(p.add(u.scale(s)))
}

/// Continuous steepest descent (midpoint rule, arc-length parameter) with
/// linear interpolation of the level crossings. Used to cross-check the
/// straight-segment construction on smooth fields.
pub fn trace_continuous(
    surface: &FeatureSurface,
    start: Point,
    step: f64,
    opts: &TraceOptions,
) -> Result<GradientPath, FieldError> {
    let levels = path_levels();
    let dir = |p: Point| -> Option<Point> {
        let g = gradient_at(surface, p, opts.h).ok()?;
        let n = g.norm();
        (n >= opts.min_grad).then(|| g.scale(-1.0 / n))
    };
    let first = settle_on_level(surface, start, levels[0] + opts.level_tol, opts).ok_or(
        FieldError::OutsideHull {
            x: start.x,
            y: start.y,
        },
    )?;
    let mut crossings = vec![first];
    let mut lengths = Vec::new();
    let mut p = first;
    let mut v = surface.evaluate(p).expect("settled inside hull");
    let mut arc = 0.0;
    let mut last_arc = 0.0;
    let max_steps = (opts.max_segment * 9.0 / step).ceil() as usize;
    let mut next = 1;
    for _ in 0..max_steps {
        if next == levels.len() {
            break;
        }
        let Some(d1) = dir(p) else { break };
        let Some(d2) = dir(p.add(d1.scale(0.5 * step))) else {
            break;
        };
        let q = p.add(d2.scale(step));
        let Some(w) = surface.evaluate(q) else { break };
        while next < levels.len() && w <= levels[next] + opts.level_tol {
            let target = levels[next] + opts.level_tol;
            let t = if v == w {
                1.0
            } else {
                ((v - target) / (v - w)).clamp(0.0, 1.0)
            };
            let at = arc + t * step;
            crossings.push(p.add(q.sub(p).scale(t)));
            lengths.push(at - last_arc);
            last_arc = at;
            next += 1;
        }
        p = q;
        v = w;
        arc += step;
    }
    let status = if next == levels.len() {
        PathStatus::Complete
    } else {
        PathStatus::Truncated {
            level: levels[next - 1],
        }
    };
    Ok(GradientPath {
        start,
        levels: levels[..crossings.len()].to_vec(),
        crossings,
        segment_lengths: lengths,
        status,
    })
}

/// `n` points drawn uniformly by arc length over the polylines of `level`.
pub fn sample_starts(
    contours: &ContourSet,
    level: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<Point>, FieldError> {
    let lines = contours
        .level(level)
        .map(|c| c.polylines.as_slice())
        .unwrap_or(&[]);
    let segs: Vec<(Point, Point)> = lines
        .iter()
        .flat_map(|l| l.points.windows(2).map(|w| (w[0], w[1])))
        .filter(|(a, b)| a != b)
        .collect();
    let mut cumulative = Vec::with_capacity(segs.len());
    let mut total = 0.0;
    for (a, b) in &segs {
        total += a.dist(*b);
        cumulative.push(total);
    }
    if segs.is_empty() || total <= 0.0 {
        return Err(FieldError::NoContour { level });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let s = rng.gen_range(0.0..total);
            let k = cumulative.partition_point(|&c| c <= s).min(segs.len() - 1);
            let before = if k == 0 { 0.0 } else { cumulative[k - 1] };
            let (a, b) = segs[k];
            let t = ((s - before) / a.dist(b)).clamp(0.0, 1.0);
            a.add(b.sub(a).scale(t))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{extract_contours, Grid};
    use crate::geom::BBox;
    use crate::par::Exec;
    use crate::special::erfc;
    use rand::Rng;

    // Jittered lattice over [0, w] x [0, h] with spacing `d`.
    fn lattice(w: f64, h: f64, d: f64, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nx, ny) = ((w / d) as usize, (h / d) as usize);
        let mut pts = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                let jitter = |k: usize, n: usize, r: &mut ChaCha8Rng| {
                    if k == 0 || k == n {
                        0.0
                    } else {
                        r.gen_range(-0.2..0.2) * d
                    }
                };
                let (jx, jy) = (jitter(i, nx, &mut rng), jitter(j, ny, &mut rng));
                pts.push(Point::new(i as f64 * d + jx, j as f64 * d + jy));
            }
        }
        pts
    }

    fn surface_of(pts: Vec<Point>, f: impl Fn(Point) -> f64) -> FeatureSurface {
        let vals = pts.iter().map(|&p| f(p)).collect();
        FeatureSurface::new(pts, vals, true).unwrap()
    }

    fn contours_of(s: &FeatureSurface, n: usize) -> ContourSet {
        let bb = s.triangulation().bbox();
        let g: Grid = s.rasterize(bb, n, n, f64::NAN, Exec::Sequential).unwrap();
        extract_contours(&g, &path_levels()).unwrap()
    }

    fn planar() -> FeatureSurface {
        // Falls towards the north: 1 at y = 3, 0 at y = 3 + 1/0.07.
        surface_of(lattice(20.0, 24.0, 1.5, 1), |p| 1.0 - 0.07 * (p.y - 3.0))
    }

    #[test]
    fn gradient_of_linear_field() {
        let s = surface_of(lattice(10.0, 10.0, 1.0, 2), |p| {
            0.2 + 0.03 * p.x + 0.04 * p.y
        });
        let g = gradient_at(&s, Point::new(5.0, 5.0), 0.05).unwrap();
        assert!((g.x - 0.03).abs() < 1e-6 && (g.y - 0.04).abs() < 1e-6);
        assert!(matches!(
            gradient_at(&s, Point::new(0.01, 5.0), 0.05),
            Err(FieldError::OutsideHull { .. })
        ));
    }

    #[test]
    fn last_level_next_to_the_hull_edge() {
        // The hull ends 0.007 km beyond the 0.0 crossing, inside one substep.
        let h = 1.0 / 0.07;
        let s = surface_of(lattice(20.0, h, h / 10.0, 4), |p| 1.0 - 0.07 * p.y);
        let path = trace_from(&s, Point::new(10.0, 1.0 / 0.7), &TraceOptions::default()).unwrap();
        assert!(path.is_complete(), "{path:?}");
        for d in &path.segment_lengths {
            assert!((d - 1.0 / 0.7).abs() < 1e-5, "{d}");
        }
    }

    #[test]
    fn gradient_on_plateau_is_zero() {
        let s = surface_of(lattice(10.0, 10.0, 1.0, 3), |p| 1.5 - 0.01 * p.x);
        assert_eq!(
            gradient_at(&s, Point::new(5.0, 5.0), 0.05).unwrap(),
            Point::new(0.0, 0.0)
        );
    }

    #[test]
    fn gradient_of_erfc_front() {
        let kappa = 0.3;
        let s = surface_of(lattice(20.0, 40.0, 0.4, 4), |p| {
            0.5 * erfc((p.y - 20.0) * kappa)
        });
        let g = gradient_at(&s, Point::new(10.0, 20.0), 0.05).unwrap();
        let expect = -kappa / std::f64::consts::PI.sqrt();
        assert!((g.y - expect).abs() < 0.01 * expect.abs(), "{g:?}");
    }

    #[test]
    fn planar_field_has_equal_intervals() {
        let s = planar();
        let c = contours_of(&s, 80);
        let start = Point::new(10.0, 3.0 + 0.1 / 0.07);
        let path = trace_gradient_line(&s, &c, start, &TraceOptions::default()).unwrap();
        assert!(path.is_complete());
        assert_eq!(path.crossings.len(), 10);
        for d in &path.segment_lengths {
            assert!((d - 0.1 / 0.07).abs() < 1e-6, "{d}");
        }
        for q in &path.crossings {
            assert!((q.x - path.crossings[0].x).abs() < 1e-9);
        }
        for (q, l) in path.crossings.iter().zip(&path.levels) {
            assert!((s.evaluate(*q).unwrap() - l).abs() < 1e-3);
        }
    }

    #[test]
    fn continuous_tracer_agrees_on_plane() {
        let s = planar();
        let p = trace_continuous(&s, Point::new(8.0, 4.5), 0.01, &TraceOptions::default()).unwrap();
        assert!(p.is_complete());
        for d in &p.segment_lengths {
            assert!((d - 0.1 / 0.07).abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn start_far_from_contour_is_rejected() {
        let s = planar();
        let c = contours_of(&s, 80);
        let r = trace_gradient_line(&s, &c, Point::new(10.0, 10.0), &TraceOptions::default());
        assert!(matches!(r, Err(FieldError::StartOffContour { .. })));
    }

    #[test]
    fn flat_start_truncates_at_first_level() {
        let s = surface_of(lattice(10.0, 10.0, 1.0, 5), |_| 0.9);
        let p = trace_from(&s, Point::new(5.0, 5.0), &TraceOptions::default()).unwrap();
        assert_eq!(p.status, PathStatus::Truncated { level: 0.9 });
        assert!(p.segment_lengths.is_empty());
    }

    #[test]
    fn erfc_intervals_match_inverse_spacing() {
        let kappa = 0.3;
        let y0 = 20.0;
        let s = surface_of(lattice(16.0, 44.0, 0.4, 6), |p| {
            0.5 * erfc((p.y - y0) * kappa / 2.0)
        });
        let opts = TraceOptions::default();
        // Position where the profile equals v, by bisection on the profile itself.
        let position = |v: f64| {
            let (mut lo, mut hi) = (y0 - 30.0, y0 + 30.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if 0.5 * erfc((mid - y0) * kappa / 2.0) > v {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let levels = path_levels();
        let expect: Vec<f64> = (1..10)
            .map(|j| {
                position(levels[j] + opts.level_tol) - position(levels[j - 1] + opts.level_tol)
            })
            .collect();
        let p = trace_from(&s, Point::new(8.0, position(0.9)), &opts).unwrap();
        assert!(p.is_complete());
        for (d, e) in p.segment_lengths.iter().zip(&expect) {
            assert!((d - e).abs() < 0.01 * e, "{d} vs {e}");
        }
        // Narrowest near the 0.5 level, widest in the tail.
        assert!(p.segment_lengths[4] < p.segment_lengths[8]);
        assert!((p.segment_lengths[3] - p.segment_lengths[4]).abs() < 0.01 * p.segment_lengths[4]);
    }

    #[test]
    fn descent_is_monotone() {
        let s = surface_of(lattice(30.0, 30.0, 0.75, 7), |p| {
            0.5 * erfc(((p.x - 15.0).powi(2) + (p.y - 15.0).powi(2)).sqrt() * 0.4 - 2.0)
        });
        let c = contours_of(&s, 120);
        for start in sample_starts(&c, 0.9, 20, 3).unwrap() {
            let p = trace_gradient_line(&s, &c, start, &TraceOptions::default()).unwrap();
            assert!(p.is_complete());
            let vals: Vec<f64> = p
                .crossings
                .iter()
                .map(|q| s.evaluate(*q).unwrap())
                .collect();
            for (v, l) in vals.iter().zip(&p.levels) {
                assert!((v - l).abs() < 1e-3);
            }
            assert!(p.segment_lengths.iter().all(|&d| d > 0.0));
        }
    }

    #[test]
    fn contour_tangent_is_orthogonal_to_gradient() {
        let s = surface_of(lattice(30.0, 30.0, 0.5, 8), |p| {
            0.5 + 0.4 * (0.15 * p.x).sin() * (0.12 * p.y).cos()
        });
        let g = s
            .rasterize(
                BBox::new(2.0, 2.0, 28.0, 28.0),
                400,
                400,
                f64::NAN,
                Exec::Parallel,
            )
            .unwrap();
        let c = extract_contours(&g, &[0.3, 0.5, 0.7]).unwrap();
        let mut segs = Vec::new();
        for lv in &c.levels {
            for l in &lv.polylines {
                for w in l.points.windows(2) {
                    if w[0].dist(w[1]) > 1e-3 {
                        segs.push((w[0], w[1]));
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let (a, b) = segs[rng.gen_range(0..segs.len())];
            let m = a.add(b).scale(0.5);
            let t = b.sub(a).scale(1.0 / a.dist(b));
            let gr = gradient_at(&s, m, 0.05).unwrap();
            let cos = (t.dot(gr) / gr.norm()).abs();
            assert!(cos < (2f64).to_radians().sin(), "cos {cos} at {m:?}");
        }
    }

    #[test]
    fn starts_are_seeded_and_on_the_line() {
        let s = planar();
        let c = contours_of(&s, 80);
        let a = sample_starts(&c, 0.9, 5, 42).unwrap();
        assert_eq!(a, sample_starts(&c, 0.9, 5, 42).unwrap());
        assert_ne!(a, sample_starts(&c, 0.9, 5, 43).unwrap());
        let one = sample_starts(&c, 0.9, 1, 1).unwrap();
        assert!(snap_to_contour(&c, 0.9, one[0]).unwrap().1 < 1e-9);
        assert!(matches!(
            sample_starts(&c, 0.42, 3, 1),
            Err(FieldError::NoContour { .. })
        ));
    }

    #[test]
    fn starts_uniform_on_a_circle() {
        let g = Grid::from_fn(BBox::new(-5.0, -5.0, 5.0, 5.0), 200, 200, |p| {
            (1.0 - (p.x * p.x + p.y * p.y).sqrt() / 5.0).max(0.0)
        });
        let c = extract_contours(&g, &[0.9]).unwrap();
        let pts = sample_starts(&c, 0.9, 1000, 7).unwrap();
        let mut bins = [0usize; 20];
        for p in pts {
            let a = p.y.atan2(p.x) + std::f64::consts::PI;
            bins[((a / (2.0 * std::f64::consts::PI) * 20.0) as usize).min(19)] += 1;
        }
        let chi2: f64 = bins.iter().map(|&b| (b as f64 - 50.0).powi(2) / 50.0).sum();
        // 99th percentile of chi-square with 19 degrees of freedom.
        assert!(chi2 < 36.19, "chi2 {chi2}, bins {bins:?}");
    }
}
