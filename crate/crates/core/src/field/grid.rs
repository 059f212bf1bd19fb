use serde::Serialize;

use super::FieldError;
use crate::geom::{BBox, Point};

/// Row-major raster of cell-centre samples; row 0 is the southern edge.
/// `NaN` marks cells without a value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    bbox: BBox,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn filled(bbox: BBox, nx: usize, ny: usize, value: f64) -> Self {
        Self {
            bbox,
            nx,
            ny,
            values: vec![value; nx * ny],
        }
    }

    pub fn from_values(
        bbox: BBox,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
    ) -> Result<Self, FieldError> {
        if nx == 0 || ny == 0 || values.len() != nx * ny {
            return Err(FieldError::GridShape {
                nx,
                ny,
                len: values.len(),
            });
        }
        if !bbox.is_proper() {
            return Err(FieldError::GridBBox(bbox));
        }
        Ok(Self {
            bbox,
            nx,
            ny,
            values,
        })
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(bbox: BBox, nx: usize, ny: usize, f: impl Fn(Point) -> f64) -> Self {
        let mut g = Self::filled(bbox, nx, ny, 0.0);
        for j in 0..ny {
            for i in 0..nx {
                let v = f(g.centre(i, j));
                g.values[j * nx + i] = v;
            }
        }
        g
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.bbox.width() / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.bbox.height() / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.bbox.xmin + (i as f64 + 0.5) * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.bbox.ymin + (j as f64 + 0.5) * self.dy()
    }

    pub fn centre(&self, i: usize, j: usize) -> Point {
        Point::new(self.x(i), self.y(j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.nx + i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Bilinear interpolation between cell centres. `None` outside the
    /// centre lattice or when a surrounding sample is missing.
    pub fn bilinear(&self, p: Point) -> Option<f64> {
        let fx = (p.x - self.bbox.xmin) / self.dx() - 0.5;
        let fy = (p.y - self.bbox.ymin) / self.dy() - 0.5;
        let (maxx, maxy) = ((self.nx - 1) as f64, (self.ny - 1) as f64);
        if !(0.0..=maxx).contains(&fx) || !(0.0..=maxy).contains(&fy) {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let j = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let (i1, j1) = ((i + 1).min(self.nx - 1), (j + 1).min(self.ny - 1));
        let v = (1.0 - tx) * (1.0 - ty) * self.get(i, j)
            + tx * (1.0 - ty) * self.get(i1, j)
            + (1.0 - tx) * ty * self.get(i, j1)
            + tx * ty * self.get(i1, j1);
        (!v.is_nan()).then_some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centres_and_spacing() {
        let g = Grid::filled(BBox::new(0.0, 10.0, 4.0, 12.0), 4, 2, 0.0);
        assert_eq!(g.dx(), 1.0);
        assert_eq!(g.dy(), 1.0);
        assert_eq!(g.centre(0, 0), Point::new(0.5, 10.5));
        assert_eq!(g.centre(3, 1), Point::new(3.5, 11.5));
    }

    #[test]
    fn bilinear_reproduces_planes() {
        let g = Grid::from_fn(BBox::new(0.0, 0.0, 10.0, 5.0), 20, 10, |p| {
            2.0 * p.x - p.y + 1.0
        });
        for &(x, y) in &[(0.25, 0.25), (3.3, 2.7), (9.75, 4.75), (5.0, 1.0)] {
            let v = g.bilinear(Point::new(x, y)).unwrap();
            assert!((v - (2.0 * x - y + 1.0)).abs() < 1e-12);
        }
        assert_eq!(g.bilinear(Point::new(0.1, 1.0)), None);
    }

    #[test]
    fn shape_is_validated() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        assert!(Grid::from_values(b, 2, 2, vec![0.0; 3]).is_err());
        assert!(Grid::from_values(BBox::new(0.0, 0.0, 0.0, 1.0), 1, 1, vec![0.0]).is_err());
        assert!(Grid::from_values(b, 2, 2, vec![0.0; 4]).is_ok());
    }
}
