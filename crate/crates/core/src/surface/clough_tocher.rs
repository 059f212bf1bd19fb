//! Clough-Tocher macro-elements.
//!
//! Each triangle is split at its centroid into three cubic Bézier
//! sub-triangles. Vertex and first-ring control points come from the vertex
//! value and gradient; the edge interior point is chosen so the normal
//! derivative along each outer edge is linear, which makes the assembled
//! surface C¹ across triangles; the remaining points follow from the C¹
//! conditions on the three internal edges.

use crate::geom::Point;

/// Control net of one macro-triangle `(P0, P1, P2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patch {
    /// Vertex values.
    f: [f64; 3],
    /// `toward[i][0]` sits on edge `i -> i+1`, `toward[i][1]` on edge `i -> i+2`.
    toward: [[f64; 2]; 3],
    /// First point on the internal edge `Pi -> C`.
    inner: [f64; 3],
    /// Edge interior point of the sub-triangle opposite vertex `k`.
    edge: [f64; 3],
    /// Second point on the internal edge `Pi -> C`.
    near_centre: [f64; 3],
    centre: f64,
}

impl Patch {
    pub fn new(p: [Point; 3], f: [f64; 3], g: [Point; 3]) -> Self {
        let c = Point::new(
            (p[0].x + p[1].x + p[2].x) / 3.0,
            (p[0].y + p[1].y + p[2].y) / 3.0,
        );
        let mut toward = [[0.0; 2]; 3];
        let mut inner = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            toward[i][0] = f[i] + g[i].dot(p[j].sub(p[i])) / 3.0;
            toward[i][1] = f[i] + g[i].dot(p[k].sub(p[i])) / 3.0;
            inner[i] = f[i] + g[i].dot(c.sub(p[i])) / 3.0;
        }
        // Points on edge i -> j as seen from i (index 0) and from j (index 1).
        let along = |i: usize, j: usize| -> f64 {
            if (i + 1) % 3 == j {
                toward[i][0]
            } else {
                toward[i][1]
            }
        };
        let mut edge = [0.0; 3];
        for (k, slot) in edge.iter_mut().enumerate() {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let e = p[j].sub(p[i]);
            let m = c.sub(p[i]);
            // Direction normal to the edge, in barycentric increments of (Pi, Pj, C).
            let db = -m.dot(e) / e.dot(e);
            let da = -1.0 - db;
            let (bij, bji) = (along(i, j), along(j, i));
            let d0 = da * f[i] + db * bij + inner[i];
            let d2 = da * bji + db * f[j] + inner[j];
            *slot = 0.5 * (d0 + d2) - da * bij - db * bji;
        }
        let mut near_centre = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            // Edges touching vertex i are the ones opposite j and opposite k.
            near_centre[i] = (inner[i] + edge[j] + edge[k]) / 3.0;
        }
        let centre = near_centre.iter().sum::<f64>() / 3.0;
        Self {
            f,
            toward,
            inner,
            edge,
            near_centre,
            centre,
        }
    }

    /// Evaluates the macro-element at barycentric coordinates `lambda`.
    pub fn eval(&self, lambda: [f64; 3]) -> f64 {
        // The sub-triangle opposite vertex k contains points where lambda_k is smallest.
        let mut k = 0;
        for m in 1..3 {
            if lambda[m] < lambda[k] {
                k = m;
            }
        }
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let u = lambda[i] - lambda[k];
        let v = lambda[j] - lambda[k];
        let w = 3.0 * lambda[k];

        let b300 = self.f[i];
        let b030 = self.f[j];
        let b210 = self.toward[i][0]; // i -> i+1 = j
        let b120 = self.toward[j][1]; // j -> j+2 = i
        let b201 = self.inner[i];
        let b021 = self.inner[j];
        let b111 = self.edge[k];
        let b102 = self.near_centre[i];
        let b012 = self.near_centre[j];
        let b003 = self.centre;

        u * u * u * b300
            + v * v * v * b030
            + w * w * w * b003
            + 3.0 * u * u * v * b210
            + 3.0 * u * v * v * b120
            + 3.0 * u * u * w * b201
            + 3.0 * v * v * w * b021
            + 3.0 * u * w * w * b102
            + 3.0 * v * w * w * b012
            + 6.0 * u * v * w * b111
    }
}

/// Barycentric coordinates of `q` in triangle `p`. Exact zeros and ones at
/// the vertices.
pub fn barycentric(p: [Point; 3], q: Point) -> [f64; 3] {
    let area = p[1].sub(p[0]).cross(p[2].sub(p[0]));
    let l1 = p[2].sub(p[0]).cross(q.sub(p[0])) / -area;
    let l2 = p[1].sub(p[0]).cross(q.sub(p[0])) / area;
    [1.0 - l1 - l2, l1, l2]
}
