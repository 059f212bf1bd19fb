//! Marching squares on the cell-centre lattice of a [`Grid`].

use std::collections::BTreeMap;

use serde::Serialize;

use super::{FieldError, Grid};
use crate::geom::Point;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyline {
    pub points: Vec<Point>,
    /// Closed polylines repeat their first point at the end.
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourLevel {
    pub level: f64,
    pub polylines: Vec<Polyline>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ContourSet {
    pub levels: Vec<ContourLevel>,
}

impl ContourSet {
    pub fn level(&self, level: f64) -> Option<&ContourLevel> {
        self.levels.iter().find(|c| (c.level - level).abs() < 1e-12)
    }
}

/// The ten front levels 1.0, 0.9, …, 0.0 plus whatever else is asked for.
pub fn default_levels() -> Vec<f64> {
    (0..=10).rev().map(|k| k as f64 / 10.0).collect()
}

// Lattice edge between two adjacent centre nodes; `H(i, j)` joins (i, j)
// and (i+1, j), `V(i, j)` joins (i, j) and (i, j+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

pub fn extract_contours(grid: &Grid, levels: &[f64]) -> Result<ContourSet, FieldError> {
    if grid.nx() < 2 || grid.ny() < 2 {
        return Err(FieldError::GridShape {
            nx: grid.nx(),
            ny: grid.ny(),
            len: grid.values().len(),
        });
    }
    let mut out = ContourSet::default();
    for &level in levels {
        if !(0.0..=1.0).contains(&level) {
            return Err(FieldError::LevelOutOfRange(level));
        }
        out.levels.push(ContourLevel {
            level,
            polylines: contour_level(grid, level),
        });
    }
    Ok(out)
}

fn contour_level(grid: &Grid, level: f64) -> Vec<Polyline> {
    let inside = |v: f64| if level >= 1.0 { v >= level } else { v > level };
    let edge_point = |e: Edge| -> Point {
        let (a, b) = match e {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (va, vb) = (grid.get(a.0, a.1), grid.get(b.0, b.1));
        let (pa, pb) = (grid.centre(a.0, a.1), grid.centre(b.0, b.1));
        let t = (level - va) / (vb - va);
        if t <= 0.0 {
            pa
        } else if t >= 1.0 {
            pb
        } else {
            pa.add(pb.sub(pa).scale(t))
        }
    };

    let mut segments: Vec<[Edge; 2]> = Vec::new();
    for j in 0..grid.ny() - 1 {
        for i in 0..grid.nx() - 1 {
            let v = [
                grid.get(i, j),
                grid.get(i + 1, j),
                grid.get(i + 1, j + 1),
                grid.get(i, j + 1),
            ];
            if v.iter().any(|x| x.is_nan()) {
                continue;
            }
            let s = v.map(inside);
            // Edge k runs from corner k to corner k+1.
            let edges = [
                Edge::H(i, j),
                Edge::V(i + 1, j),
                Edge::H(i, j + 1),
                Edge::V(i, j),
            ];
            let crossing: Vec<usize> = (0..4).filter(|&k| s[k] != s[(k + 1) % 4]).collect();
            match crossing.len() {
                2 => segments.push([edges[crossing[0]], edges[crossing[1]]]),
                4 => {
                    let centre_in = inside(v.iter().sum::<f64>() / 4.0);
                    // Cut off the corners on the minority side of the centre.
                    for k in 0..4 {
                        if s[k] != centre_in {
                            segments.push([edges[(k + 3) % 4], edges[k]]);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    let mut at: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
    for (k, seg) in segments.iter().enumerate() {
        for e in seg {
            at.entry(*e).or_default().push(k);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    let walk = |first_edge: Edge, used: &mut Vec<bool>| -> Option<(Vec<Edge>, bool)> {
        let mut seg = *at[&first_edge].iter().find(|&&k| !used[k])?;
        let mut chain = vec![first_edge];
        let mut cur = first_edge;
        loop {
            used[seg] = true;
            let next = if segments[seg][0] == cur {
                segments[seg][1]
            } else {
                segments[seg][0]
            };
            chain.push(next);
            if next == first_edge {
                return Some((chain, true));
            }
            match at[&next].iter().find(|&&k| !used[k]) {
                Some(&k) => {
                    seg = k;
                    cur = next;
                }
                None => return Some((chain, false)),
            }
        }
    };

    // Open chains start from edges used by a single segment.
    let ends: Vec<Edge> = at
        .iter()
        .filter(|(_, s)| s.len() == 1)
        .map(|(e, _)| *e)
        .collect();
    for e in ends {
        if let Some((chain, closed)) = walk(e, &mut used) {
            lines.push((chain, closed));
        }
    }
    let all: Vec<Edge> = at.keys().copied().collect();
    for e in all {
        while let Some((chain, closed)) = walk(e, &mut used) {
            lines.push((chain, closed));
        }
    }

    lines
        .into_iter()
        .filter_map(|(chain, closed)| {
            let mut pts: Vec<Point> = Vec::with_capacity(chain.len());
            for e in chain {
                let p = edge_point(e);
                if pts.last() != Some(&p) {
                    pts.push(p);
                }
            }
            (pts.len() >= 2).then_some(Polyline {
                points: pts,
                closed,
            })
        })
        .collect()
}
