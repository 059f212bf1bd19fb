//! Synthetic fraction datasets with a known front, for demos and tests.

use isogloss_core::dataio::{unproject, Dataset, GeoPoint, RawLocality, ValuePolicy};
use isogloss_core::special::erfc;
use isogloss_core::{BBox, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FEATURE: &str = "synthetic";
pub const ORIGIN: GeoPoint = GeoPoint {
    lon: 11.35,
    lat: 46.5,
};

#[derive(Debug, Clone, Copy)]
pub struct Layout {
    /// Planar box around the origin (km).
    pub bbox: BBox,
    /// Random localities; the four box corners are added on top.
    pub n: usize,
    pub seed: u64,
}

/// Localities at random positions in the box (plus its corners) carrying
/// `value(p)` for the single feature [`FEATURE`].
pub fn sample(layout: Layout, value: impl Fn(Point) -> f64) -> Dataset {
    let b = layout.bbox;
    let mut rng = ChaCha8Rng::seed_from_u64(layout.seed);
    let mut pts = vec![
        Point::new(b.xmin, b.ymin),
        Point::new(b.xmax, b.ymin),
        Point::new(b.xmin, b.ymax),
        Point::new(b.xmax, b.ymax),
    ];
    pts.extend(
        (0..layout.n)
            .map(|_| Point::new(rng.gen_range(b.xmin..b.xmax), rng.gen_range(b.ymin..b.ymax))),
    );
    let rows = pts
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let g = unproject(p, ORIGIN);
            RawLocality {
                id: format!("S{i:04}"),
                lon: g.lon,
                lat: g.lat,
                values: vec![Some(value(p).clamp(0.0, 1.0))],
            }
        })
        .collect();
    Dataset::from_rows(
        vec![FEATURE.into()],
        rows,
        Some(ORIGIN),
        ValuePolicy::Fraction,
    )
    .expect("synthetic rows are valid")
}

/// `½ erfc((y − y0) κ / 2)` with the front at `y0 = 0`, on a 40 × 45 km box
/// reaching 20 km behind the front and 25 km ahead of it.
pub fn erfc_front(kappa: f64, n: usize, seed: u64) -> Dataset {
    let layout = Layout {
        bbox: BBox::new(-20.0, -20.0, 20.0, 25.0),
        n,
        seed,
    };
    sample(layout, |p| 0.5 * erfc(p.y * kappa / 2.0))
}

/// `1 − slope · y` on a box whose y-extent is exactly the front, `[0, 1/slope]`.
pub fn planar_front(slope: f64, n: usize, seed: u64) -> Dataset {
    let layout = Layout {
        bbox: BBox::new(-20.0, 0.0, 20.0, 1.0 / slope),
        n,
        seed,
    };
    sample(layout, |p| 1.0 - slope * p.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_values_follow_the_front() {
        let ds = erfc_front(0.3, 50, 3);
        assert_eq!(ds.localities().len(), 54);
        assert_eq!(ds.features(), &[FEATURE.to_string()]);
        for (i, l) in ds.localities().iter().enumerate() {
            let want = 0.5 * erfc(l.y_km * 0.15);
            assert!((ds.value(i, 0).unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn planar_spans_exactly_one_to_zero() {
        let ds = planar_front(0.07, 20, 1);
        let vals: Vec<f64> = (0..ds.localities().len())
            .map(|i| ds.value(i, 0).unwrap())
            .collect();
        assert!(vals.iter().any(|&v| (v - 1.0).abs() < 1e-9));
        assert!(vals.iter().any(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn seeded() {
        assert_eq!(erfc_front(0.3, 30, 8), erfc_front(0.3, 30, 8));
        assert_ne!(erfc_front(0.3, 30, 8), erfc_front(0.3, 30, 9));
    }
}
