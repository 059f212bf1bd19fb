//! Delaunay triangulation of scattered points.
//!
//! Built in two passes: a lexicographic sweep produces a valid triangulation
//! of the convex hull, then Lawson edge flips restore the empty-circumcircle
//! property. Orientation and in-circle tests use adaptive exact predicates.

use std::collections::HashMap;

use robust::Coord;

use super::SurfaceError;
use crate::geom::{BBox, Point};

#[inline]
fn coord(p: Point) -> Coord<f64> {
    Coord { x: p.x, y: p.y }
}

/// Exact sign of the signed area of `(a, b, c)`: positive when counter-clockwise.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Positive when `d` lies strictly inside the circumcircle of ccw `(a, b, c)`.
#[inline]
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    points: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    /// `neighbors[t][i]` is the triangle across the edge opposite vertex `i`.
    neighbors: Vec<[Option<usize>; 3]>,
    hull: Vec<usize>,
    locator: Locator,
}

impl Triangulation {
    /// Delaunay triangulation of `points`; vertex indices follow input order.
    pub fn new(points: Vec<Point>) -> Result<Self, SurfaceError> {
        if points.len() < 3 {
            return Err(SurfaceError::TooFewPoints(points.len()));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(SurfaceError::NonFinitePoint(p.x, p.y));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .x
                .total_cmp(&points[b].x)
                .then(points[a].y.total_cmp(&points[b].y))
        });
        for w in order.windows(2) {
            if points[w[0]] == points[w[1]] {
                return Err(SurfaceError::DuplicatePoint {
                    first: w[0].min(w[1]),
                    second: w[0].max(w[1]),
                });
            }
        }

        let (triangles, hull) = sweep(&points, &order)?;
        let neighbors = build_adjacency(&triangles);
        let mut tri = Self {
            points,
            triangles,
            neighbors,
            hull,
            locator: Locator::default(),
        };
        tri.legalize();
        tri.locator = Locator::build(&tri);
        Ok(tri)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    /// Convex hull as counter-clockwise vertex indices.
    pub fn hull(&self) -> &[usize] {
        &self.hull
    }

    pub fn hull_polygon(&self) -> Vec<Point> {
        self.hull.iter().map(|&i| self.points[i]).collect()
    }

    pub fn bbox(&self) -> BBox {
        BBox::around(&self.points).expect("triangulation has at least 3 points")
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.points[a], self.points[b], self.points[c]]
    }

    /// Sorted, de-duplicated neighbour lists per vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.points.len()];
        for t in &self.triangles {
            for i in 0..3 {
                adj[t[i]].push(t[(i + 1) % 3]);
                adj[t[i]].push(t[(i + 2) % 3]);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Triangle containing `p` (boundary included), or `None` outside the hull.
    pub fn locate(&self, p: Point) -> Option<usize> {
        if !p.is_finite() || self.triangles.is_empty() {
            return None;
        }
        let start = self.locator.hint(p);
        match self.walk(start, p) {
            Walk::Found(t) => Some(t),
            Walk::Outside => None,
            Walk::GaveUp => self.scan(p),
        }
    }

    fn walk(&self, start: usize, p: Point) -> Walk {
        let mut t = start;
        let mut prev = usize::MAX;
        let limit = 4 * self.triangles.len() + 16;
        for _ in 0..limit {
            let [a, b, c] = self.triangle_points(t);
            let verts = [a, b, c];
            let mut moved = false;
            for i in 0..3 {
                let (u, v) = (verts[(i + 1) % 3], verts[(i + 2) % 3]);
                if orient(u, v, p) < 0.0 {
                    match self.neighbors[t][i] {
                        Some(n) if n != prev => {
                            prev = t;
                            t = n;
                            moved = true;
                            break;
                        }
                        Some(_) => continue,
                        None => return Walk::Outside,
                    }
                }
            }
            if !moved {
                if verts
                    .iter()
                    .enumerate()
                    .all(|(i, _)| orient(verts[(i + 1) % 3], verts[(i + 2) % 3], p) >= 0.0)
                {
                    return Walk::Found(t);
                }
                return Walk::GaveUp;
            }
        }
        Walk::GaveUp
    }

    fn scan(&self, p: Point) -> Option<usize> {
        (0..self.triangles.len()).find(|&t| {
            let [a, b, c] = self.triangle_points(t);
            orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0
        })
    }

    fn legalize(&mut self) {
        let mut stack: Vec<usize> = (0..self.triangles.len()).rev().collect();
        let mut guard = 0usize;
        let cap = 64 * self.triangles.len() * self.triangles.len().max(16);
        while let Some(t) = stack.pop() {
            guard += 1;
            if guard > cap {
                log::warn!("edge-flip pass hit its iteration cap");
                break;
            }
            for i in 0..3 {
                let Some(u) = self.neighbors[t][i] else {
                    continue;
                };
                if self.flip_if_illegal(t, i, u) {
                    stack.push(t);
                    stack.push(u);
                    break;
                }
            }
        }
    }

    // Edge opposite vertex `i` of `t`, shared with `u`.
    fn flip_if_illegal(&mut self, t: usize, i: usize, u: usize) -> bool {
        let tv = self.triangles[t];
        let (a, b, c) = (tv[i], tv[(i + 1) % 3], tv[(i + 2) % 3]);
        let uv = self.triangles[u];
        let Some(j) = (0..3).find(|&k| uv[k] != b && uv[k] != c) else {
            return false;
        };
        let d = uv[j];
        debug_assert_eq!(uv[(j + 1) % 3], c);
        debug_assert_eq!(uv[(j + 2) % 3], b);
        let p = &self.points;
        if incircle(p[a], p[b], p[c], p[d]) <= 0.0 {
            return false;
        }
        // Quad a-b-d-c must be strictly convex for the flip to be valid.
        if orient(p[a], p[b], p[d]) <= 0.0 || orient(p[a], p[d], p[c]) <= 0.0 {
            return false;
        }
        let n_ca = self.neighbors[t][(i + 1) % 3];
        let n_ab = self.neighbors[t][(i + 2) % 3];
        let n_bd = self.neighbors[u][(j + 1) % 3];
        let n_dc = self.neighbors[u][(j + 2) % 3];

        self.triangles[t] = [a, b, d];
        self.neighbors[t] = [n_bd, Some(u), n_ab];
        self.triangles[u] = [a, d, c];
        self.neighbors[u] = [n_dc, n_ca, Some(t)];

        if let Some(n) = n_bd {
            self.replace_neighbor(n, u, t);
        }
        if let Some(n) = n_ca {
            self.replace_neighbor(n, t, u);
        }
        true
    }

    fn replace_neighbor(&mut self, tri: usize, old: usize, new: usize) {
        for slot in &mut self.neighbors[tri] {
            if *slot == Some(old) {
                *slot = Some(new);
                return;
            }
        }
    }
}

enum Walk {
    Found(usize),
    Outside,
    GaveUp,
}

fn sweep(points: &[Point], order: &[usize]) -> Result<(Vec<[usize; 3]>, Vec<usize>), SurfaceError> {
    let p0 = points[order[0]];
    let p1 = points[order[1]];
    let k = (2..order.len())
        .find(|&k| orient(p0, p1, points[order[k]]) != 0.0)
        .ok_or(SurfaceError::Collinear)?;
    let apex = order[k];
    let side = orient(p0, p1, points[apex]);

    let mut triangles = Vec::with_capacity(2 * points.len());
    for w in order[..k].windows(2) {
        if side > 0.0 {
            triangles.push([w[0], w[1], apex]);
        } else {
            triangles.push([w[1], w[0], apex]);
        }
    }
    let mut hull: Vec<usize> = if side > 0.0 {
        order[..k]
            .iter()
            .copied()
            .chain(std::iter::once(apex))
            .collect()
    } else {
        std::iter::once(order[0])
            .chain(std::iter::once(apex))
            .chain(order[1..k].iter().rev().copied())
            .collect()
    };

    for &pi in &order[k + 1..] {
        let p = points[pi];
        let h = hull.len();
        let visible: Vec<bool> = (0..h)
            .map(|e| orient(points[hull[e]], points[hull[(e + 1) % h]], p) < 0.0)
            .collect();
        let Some(first) = (0..h).find(|&e| visible[e] && !visible[(e + h - 1) % h]) else {
            // The new point is lexicographically extreme, so some edge must see it.
            return Err(SurfaceError::Collinear);
        };
        let mut last = first;
        while visible[(last + 1) % h] && (last + 1) % h != first {
            last = (last + 1) % h;
        }
        let mut e = first;
        loop {
            let (a, b) = (hull[e], hull[(e + 1) % h]);
            triangles.push([b, a, pi]);
            if e == last {
                break;
            }
            e = (e + 1) % h;
        }
        // Drop hull[first+1 ..= last] and put the new point in their place.
        let count = (last + h - first) % h;
        let mut next = Vec::with_capacity(h + 1);
        let mut idx = (last + 1) % h;
        for _ in 0..(h - count) {
            next.push(hull[idx]);
            idx = (idx + 1) % h;
        }
        // `next` starts at hull[last+1] and ends at hull[first]; close with the new point.
        next.push(pi);
        hull = next;
    }
    // Rotate so the hull starts at its lowest index for stable output.
    if let Some(pos) = hull
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .map(|(i, _)| i)
    {
        hull.rotate_left(pos);
    }
    Ok((triangles, hull))
}

fn build_adjacency(triangles: &[[usize; 3]]) -> Vec<[Option<usize>; 3]> {
    let mut edges: HashMap<(usize, usize), (usize, usize)> =
        HashMap::with_capacity(triangles.len() * 3);
    let mut nbr = vec![[None; 3]; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (u, v) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            let key = (u.min(v), u.max(v));
            if let Some((ot, oi)) = edges.remove(&key) {
                nbr[t][i] = Some(ot);
                nbr[ot][oi] = Some(t);
            } else {
                edges.insert(key, (t, i));
            }
        }
    }
    nbr
}

/// Bucket grid of starting triangles for point-location walks.
///
/// Hints depend only on the query point, so location is deterministic no
/// matter how evaluations are scheduled across threads.
#[derive(Debug, Clone, Default)]
struct Locator {
    bbox: Option<BBox>,
    nx: usize,
    ny: usize,
    cells: Vec<usize>,
}

impl Locator {
    fn build(tri: &Triangulation) -> Self {
        let bbox = tri.bbox();
        let side = ((tri.triangles.len() as f64).sqrt().ceil() as usize).clamp(1, 256);
        let (nx, ny) = (side, side);
        let centroids: Vec<Point> = (0..tri.triangles.len())
            .map(|t| {
                let [a, b, c] = tri.triangle_points(t);
                Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
            })
            .collect();
        // Seed each bucket with the triangle whose centroid is closest to the
        // bucket centre, using a coarse binning of centroids.
        let mut bins: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
        let cell_of = |p: Point| -> (usize, usize) {
            let fx = ((p.x - bbox.xmin) / bbox.width().max(f64::MIN_POSITIVE) * nx as f64).floor();
            let fy = ((p.y - bbox.ymin) / bbox.height().max(f64::MIN_POSITIVE) * ny as f64).floor();
            (
                (fx.max(0.0) as usize).min(nx - 1),
                (fy.max(0.0) as usize).min(ny - 1),
            )
        };
        for (t, c) in centroids.iter().enumerate() {
            let (i, j) = cell_of(*c);
            bins[j * nx + i].push(t);
        }
        let mut cells = vec![0usize; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let centre = Point::new(
                    bbox.xmin + (i as f64 + 0.5) * bbox.width() / nx as f64,
                    bbox.ymin + (j as f64 + 0.5) * bbox.height() / ny as f64,
                );
                let mut best = None;
                let mut ring = 0usize;
                while best.is_none() && ring <= nx.max(ny) {
                    let (i0, i1) = (i.saturating_sub(ring), (i + ring).min(nx - 1));
                    let (j0, j1) = (j.saturating_sub(ring), (j + ring).min(ny - 1));
                    for jj in j0..=j1 {
                        for ii in i0..=i1 {
                            for &t in &bins[jj * nx + ii] {
                                let d = centroids[t].dist(centre);
                                if best.is_none_or(|(_, bd)| d < bd) {
                                    best = Some((t, d));
                                }
                            }
                        }
                    }
                    ring += 1;
                }
                cells[j * nx + i] = best.map(|b| b.0).unwrap_or(0);
            }
        }
        Self {
            bbox: Some(bbox),
            nx,
            ny,
            cells,
        }
    }

    fn hint(&self, p: Point) -> usize {
        let Some(b) = self.bbox else { return 0 };
        let fx = ((p.x - b.xmin) / b.width().max(f64::MIN_POSITIVE) * self.nx as f64).floor();
        let fy = ((p.y - b.ymin) / b.height().max(f64::MIN_POSITIVE) * self.ny as f64).floor();
        let i = (fx.max(0.0).min((self.nx - 1) as f64)) as usize;
        let j = (fy.max(0.0).min((self.ny - 1) as f64)) as usize;
        self.cells[j * self.nx + i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
            .collect()
    }

    fn check_structure(tri: &Triangulation) {
        for (t, v) in tri.triangles().iter().enumerate() {
            let [a, b, c] = tri.triangle_points(t);
            assert!(orient(a, b, c) > 0.0, "triangle {t} {v:?} not ccw");
            for i in 0..3 {
                if let Some(n) = tri.neighbors()[t][i] {
                    assert!(
                        tri.neighbors()[n].contains(&Some(t)),
                        "asymmetric adjacency {t}<->{n}"
                    );
                    let (u, w) = (v[(i + 1) % 3], v[(i + 2) % 3]);
                    assert!(tri.triangles()[n].contains(&u) && tri.triangles()[n].contains(&w));
                }
            }
        }
        // Euler: T = 2n - 2 - h for a triangulated convex hull with h hull vertices.
        let n = tri.points().len();
        assert_eq!(tri.triangles().len(), 2 * n - 2 - tri.hull().len());
    }

    // Brute-force oracle: no input point strictly inside any circumcircle.
    fn assert_delaunay(tri: &Triangulation) {
        for (t, v) in tri.triangles().iter().enumerate() {
            let [a, b, c] = tri.triangle_points(t);
            for (k, &p) in tri.points().iter().enumerate() {
                if v.contains(&k) {
                    continue;
                }
                assert!(
                    incircle(a, b, c, p) <= 0.0,
                    "point {k} inside circumcircle of {t}"
                );
            }
        }
    }

    #[test]
    fn three_points_one_triangle() {
        let tri = Triangulation::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        assert_eq!(tri.triangles().len(), 1);
        assert_eq!(tri.hull().len(), 3);
        check_structure(&tri);
    }

    #[test]
    fn square_has_two_delaunay_triangles() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let tri = Triangulation::new(pts).unwrap();
        assert_eq!(tri.triangles().len(), 2);
        check_structure(&tri);
        assert_delaunay(&tri);
    }

    #[test]
    fn random_points_are_delaunay() {
        for seed in 0..5 {
            let tri = Triangulation::new(random_points(100, seed)).unwrap();
            check_structure(&tri);
            assert_delaunay(&tri);
        }
    }

    #[test]
    fn regular_grid_with_collinear_rows() {
        let mut pts = Vec::new();
        for j in 0..7 {
            for i in 0..9 {
                pts.push(Point::new(i as f64, j as f64 * 1.5));
            }
        }
        let tri = Triangulation::new(pts).unwrap();
        check_structure(&tri);
        assert_delaunay(&tri);
        assert_eq!(tri.hull().len(), 2 * (9 + 7) - 4);
    }

    #[test]
    fn rejects_degenerate_input() {
        let line: Vec<Point> = (0..5)
            .map(|i| Point::new(i as f64, 2.0 * i as f64))
            .collect();
        assert!(matches!(
            Triangulation::new(line),
            Err(SurfaceError::Collinear)
        ));
        let dup = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 0.0),
        ];
        assert!(matches!(
            Triangulation::new(dup),
            Err(SurfaceError::DuplicatePoint {
                first: 0,
                second: 2
            })
        ));
        assert!(matches!(
            Triangulation::new(vec![Point::new(0.0, 0.0)]),
            Err(SurfaceError::TooFewPoints(1))
        ));
    }

    #[test]
    fn locate_inside_and_outside() {
        let pts = random_points(60, 9);
        let tri = Triangulation::new(pts.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = Point::new(rng.gen_range(-20.0..120.0), rng.gen_range(-20.0..120.0));
            assert_eq!(tri.locate(p).is_some(), tri.scan(p).is_some());
            if let Some(t) = tri.locate(p) {
                let [a, b, c] = tri.triangle_points(t);
                assert!(orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0);
            }
        }
        for p in &pts {
            assert!(tri.locate(*p).is_some());
        }
        assert!(tri.locate(Point::new(1e6, 1e6)).is_none());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn delaunay_property_holds(seed in 0u64..10_000, n in 3usize..80) {
            let tri = Triangulation::new(random_points(n, seed));
            if let Ok(tri) = tri {
                check_structure(&tri);
                assert_delaunay(&tri);
            }
        }
    }
}
