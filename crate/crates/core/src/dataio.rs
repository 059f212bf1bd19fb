//! Locality tables: loading, validation and the local planar projection.
//!
//! Input files are UTF-8 CSV with header `id,lon,lat,<feature>...`. Feature
//! cells hold `0`, `1` or nothing (missing observation). Coordinates are
//! projected with a local equirectangular map centred on the dataset origin.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;

/// Mean Earth radius (km) of the spherical model.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("bad header: {0}")]
    Header(String),
    #[error("duplicate locality id {id:?} at line {line}")]
    DuplicateId { id: String, line: u64 },
    #[error("coordinate out of range at line {line}: lon {lon}, lat {lat}")]
    OutOfRange { line: u64, lon: f64, lat: f64 },
    #[error("coordinate out of range: lon {lon}, lat {lat}")]
    CoordinateRange { lon: f64, lat: f64 },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("unknown locality {0:?}")]
    UnknownLocality(String),
    #[error("observation value {value} for {locality:?}/{feature:?} is outside [0, 1]")]
    BadValue {
        locality: String,
        feature: String,
        value: f64,
    },
    #[error("dataset has no localities")]
    Empty,
}

/// Geographic coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, DataError> {
        check_range(lon, lat)?;
        Ok(Self { lon, lat })
    }
}

fn check_range(lon: f64, lat: f64) -> Result<(), DataError> {
    if (-180.0..=180.0).contains(&lon) && (-90.0..=90.0).contains(&lat) {
        Ok(())
    } else {
        Err(DataError::CoordinateRange { lon, lat })
    }
}

/// Local equirectangular projection of `(lon, lat)` around `origin`.
pub fn project(lon: f64, lat: f64, origin: GeoPoint) -> Result<Point, DataError> {
    check_range(lon, lat)?;
    let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    let x = k * origin.lat.to_radians().cos() * (lon - origin.lon);
    let y = k * (lat - origin.lat);
    Ok(Point::new(x, y))
}

/// Inverse of [`project`].
pub fn unproject(p: Point, origin: GeoPoint) -> GeoPoint {
    let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    GeoPoint {
        lon: origin.lon + p.x / (k * origin.lat.to_radians().cos()),
        lat: origin.lat + p.y / k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locality {
    pub id: String,
    pub lon_deg: f64,
    pub lat_deg: f64,
    pub x_km: f64,
    pub y_km: f64,
}

impl Locality {
    pub fn position(&self) -> Point {
        Point::new(self.x_km, self.y_km)
    }
}

/// Which values a feature cell may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValuePolicy {
    /// Survey data: exactly 0 or 1.
    #[default]
    Binary,
    /// Pre-aggregated fractions in [0, 1] (synthetic or pooled data).
    Fraction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub locality: usize,
    pub feature: usize,
    pub value: f64,
}

/// Immutable set of localities and their feature observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    origin: GeoPoint,
    localities: Vec<Locality>,
    features: Vec<String>,
    observations: BTreeMap<(usize, usize), f64>,
}

/// Raw row before projection, used to assemble datasets in code.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLocality {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    /// One entry per feature; `None` is a missing observation.
    pub values: Vec<Option<f64>>,
}

impl Dataset {
    /// Builds a dataset from rows, projecting around `origin` (centroid when
    /// `None`).
    pub fn from_rows(
        features: Vec<String>,
        rows: Vec<RawLocality>,
        origin: Option<GeoPoint>,
        policy: ValuePolicy,
    ) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let mut seen = HashSet::new();
        for (i, r) in rows.iter().enumerate() {
            check_range(r.lon, r.lat).map_err(|_| DataError::OutOfRange {
                line: i as u64 + 2,
                lon: r.lon,
                lat: r.lat,
            })?;
            if !seen.insert(r.id.as_str()) {
                return Err(DataError::DuplicateId {
                    id: r.id.clone(),
                    line: i as u64 + 2,
                });
            }
            if r.values.len() != features.len() {
                return Err(DataError::Malformed {
                    line: i as u64 + 2,
                    reason: format!(
                        "expected {} feature values, got {}",
                        features.len(),
                        r.values.len()
                    ),
                });
            }
        }
        let origin = match origin {
            Some(o) => o,
            None => {
                let n = rows.len() as f64;
                GeoPoint {
                    lon: rows.iter().map(|r| r.lon).sum::<f64>() / n,
                    lat: rows.iter().map(|r| r.lat).sum::<f64>() / n,
                }
            }
        };
        let mut localities = Vec::with_capacity(rows.len());
        let mut observations = BTreeMap::new();
        for (li, r) in rows.into_iter().enumerate() {
            let p = project(r.lon, r.lat, origin)?;
            for (fi, v) in r.values.iter().enumerate() {
                if let Some(v) = *v {
                    validate_value(v, policy).map_err(|_| DataError::BadValue {
                        locality: r.id.clone(),
                        feature: features[fi].clone(),
                        value: v,
                    })?;
                    observations.insert((li, fi), v);
                }
            }
            localities.push(Locality {
                id: r.id,
                lon_deg: r.lon,
                lat_deg: r.lat,
                x_km: p.x,
                y_km: p.y,
            });
        }
        Ok(Self {
            origin,
            localities,
            features,
            observations,
        })
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn localities(&self) -> &[Locality] {
        &self.localities
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn feature_index(&self, feature: &str) -> Result<usize, DataError> {
        self.features
            .iter()
            .position(|f| f == feature)
            .ok_or_else(|| DataError::UnknownFeature(feature.to_string()))
    }

    pub fn observation_count(&self) -> usize {
        self.observations.len()
    }

    pub fn value(&self, locality: usize, feature: usize) -> Option<f64> {
        self.observations.get(&(locality, feature)).copied()
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.observations
            .iter()
            .map(|(&(locality, feature), &value)| Observation {
                locality,
                feature,
                value,
            })
    }

    /// Projected positions and values of every locality observed for `feature`.
    pub fn feature_samples(&self, feature: &str) -> Result<(Vec<Point>, Vec<f64>), DataError> {
        let fi = self.feature_index(feature)?;
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        for (li, loc) in self.localities.iter().enumerate() {
            if let Some(v) = self.value(li, fi) {
                pts.push(loc.position());
                vals.push(v);
            }
        }
        Ok((pts, vals))
    }

    /// Writes the dataset back out in the input CSV layout.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string(), "lon".to_string(), "lat".to_string()];
        header.extend(self.features.iter().cloned());
        w.write_record(&header)?;
        for (li, loc) in self.localities.iter().enumerate() {
            let mut rec = vec![
                loc.id.clone(),
                format!("{}", loc.lon_deg),
                format!("{}", loc.lat_deg),
            ];
            for fi in 0..self.features.len() {
                rec.push(
                    self.value(li, fi)
                        .map(|v| format!("{v}"))
                        .unwrap_or_default(),
                );
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn validate_value(v: f64, policy: ValuePolicy) -> Result<(), ()> {
    match policy {
        ValuePolicy::Binary if v == 0.0 || v == 1.0 => Ok(()),
        ValuePolicy::Fraction if (0.0..=1.0).contains(&v) => Ok(()),
        _ => Err(()),
    }
}

/// Loads a locality CSV file.
pub fn load_dataset(
    path: &Path,
    origin: Option<GeoPoint>,
    policy: ValuePolicy,
) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(file, origin, policy)
}

/// Parses locality CSV from any reader.
pub fn read_dataset<R: Read>(
    input: R,
    origin: Option<GeoPoint>,
    policy: ValuePolicy,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| DataError::Header(e.to_string()))?
        .clone();
    if header.len() < 3 || &header[0] != "id" || &header[1] != "lon" || &header[2] != "lat" {
        return Err(DataError::Header(format!(
            "expected `id,lon,lat,<features...>`, got `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let features: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    if let Some(dup) = first_duplicate(&features) {
        return Err(DataError::Header(format!("feature {dup:?} appears twice")));
    }

    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut ids = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(DataError::Malformed {
                line,
                reason: format!("expected {} fields, got {}", header.len(), rec.len()),
            });
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(DataError::Malformed {
                line,
                reason: "empty locality id".into(),
            });
        }
        let lon = parse_num(&rec[1], line, "lon")?;
        let lat = parse_num(&rec[2], line, "lat")?;
        if check_range(lon, lat).is_err() {
            return Err(DataError::OutOfRange { line, lon, lat });
        }
        if !ids.insert(id.clone()) {
            return Err(DataError::DuplicateId { id, line });
        }
        let mut values = Vec::with_capacity(features.len());
        for (k, cell) in rec.iter().skip(3).enumerate() {
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            let v = parse_num(cell, line, &features[k])?;
            if validate_value(v, policy).is_err() {
                return Err(DataError::Malformed {
                    line,
                    reason: match policy {
                        ValuePolicy::Binary => format!(
                            "feature {:?} must be 0, 1 or empty, got {cell:?}",
                            features[k]
                        ),
                        ValuePolicy::Fraction => {
                            format!("feature {:?} must lie in [0, 1], got {cell:?}", features[k])
                        }
                    },
                });
            }
            values.push(Some(v));
        }
        rows.push(RawLocality {
            id,
            lon,
            lat,
            values,
        });
        lines.push(line);
    }
    Dataset::from_rows(features, rows, origin, policy)
}

fn parse_num(cell: &str, line: u64, what: &str) -> Result<f64, DataError> {
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DataError::Malformed {
            line,
            reason: format!("{what}: {cell:?} is not a number"),
        })
}

fn first_duplicate(names: &[String]) -> Option<&str> {
    let mut seen = HashSet::new();
    names
        .iter()
        .find(|n| !seen.insert(n.as_str()))
        .map(String::as_str)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Dataset, DataError> {
        read_dataset(text.as_bytes(), None, ValuePolicy::Binary)
    }

    #[test]
    fn three_rows_one_feature() {
        let ds = load("id,lon,lat,meteoverbs\nL1,11.0,46.0,1\nL2,11.1,46.1,0\nL3,11.2,46.0,1\n")
            .unwrap();
        assert_eq!(ds.localities().len(), 3);
        assert_eq!(ds.observation_count(), 3);
        assert_eq!(ds.value(1, 0), Some(0.0));
        let o = ds.origin();
        assert!((o.lon - 11.1).abs() < 1e-12 && (o.lat - 46.0333333333333).abs() < 1e-9);
    }

    #[test]
    fn missing_cell_keeps_locality() {
        let ds = load(
            "id,lon,lat,meteoverbs,Wh_encl\nL1,11,46,1,0\nloc2,11.1,46.1,,1\nL3,11.2,46,0,0\n",
        )
        .unwrap();
        assert_eq!(ds.localities().len(), 3);
        assert_eq!(ds.value(1, 0), None);
        assert_eq!(ds.value(1, 1), Some(1.0));
        assert_eq!(ds.observation_count(), 5);
        let (pts, vals) = ds.feature_samples("meteoverbs").unwrap();
        assert_eq!((pts.len(), vals.len()), (2, 2));
    }

    #[test]
    fn duplicate_id_names_line() {
        let err = load("id,lon,lat,f\nL7,11,46,1\nL8,11.1,46,0\nL7,11.2,46,1\n").unwrap_err();
        assert!(
            matches!(err, DataError::DuplicateId { ref id, line: 4 } if id == "L7"),
            "{err}"
        );
        assert!(err.to_string().contains("line 4"));
    }

    #[test]
    fn malformed_rows_name_line() {
        let err = load("id,lon,lat,f\nL1,11,46,1\nL2,11.1,46\n").unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 3, .. }), "{err}");
        let err = load("id,lon,lat,f\nL1,eleven,46,1\n").unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");
        let err = load("id,lon,lat,f\nL1,11,46,0.5\n").unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");
        assert!(matches!(load("name,x,y\n"), Err(DataError::Header(_))));
    }

    #[test]
    fn out_of_range_coordinates_rejected() {
        let err = load("id,lon,lat,f\nL1,11,46,1\nL2,190,46,1\n").unwrap_err();
        assert!(
            matches!(err, DataError::OutOfRange { line: 3, .. }),
            "{err}"
        );
        let err = load("id,lon,lat,f\nL1,11,-91,1\n").unwrap_err();
        assert!(matches!(err, DataError::OutOfRange { line: 2, .. }));
    }

    #[test]
    fn fraction_policy_accepts_fractions() {
        let ds = read_dataset(
            "id,lon,lat,f\nA,11,46,0.25\n".as_bytes(),
            None,
            ValuePolicy::Fraction,
        )
        .unwrap();
        assert_eq!(ds.value(0, 0), Some(0.25));
        assert!(read_dataset(
            "id,lon,lat,f\nA,11,46,1.5\n".as_bytes(),
            None,
            ValuePolicy::Fraction
        )
        .is_err());
    }

    #[test]
    fn projection_examples() {
        let origin = GeoPoint::new(11.0, 46.0).unwrap();
        let p = project(11.0, 46.0, origin).unwrap();
        assert_eq!((p.x, p.y), (0.0, 0.0));
        // Oracles: R*pi/180 and R*cos(46 deg)*pi/180, evaluated directly.
        let meridian_deg = 6371.0088 * std::f64::consts::PI / 180.0;
        let p = project(11.0, 47.0, origin).unwrap();
        assert!((p.y - meridian_deg).abs() < 1e-9 && p.x == 0.0);
        assert!((p.y - 111.195).abs() < 1e-3);
        let p = project(12.0, 46.0, origin).unwrap();
        assert!((p.x - meridian_deg * 0.6946583704589973).abs() < 1e-9);
        assert!((p.x - 77.25).abs() < 0.01);
        assert!(project(181.0, 0.0, origin).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let text = "id,lon,lat,a,b\nL1,11,46,1,\nL2,11.5,46.2,0,1\nL3,11.2,45.9,1,0\n";
        let ds = load(text).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let again = read_dataset(buf.as_slice(), Some(ds.origin()), ValuePolicy::Binary).unwrap();
        assert_eq!(ds, again);
    }

    proptest::proptest! {
        #[test]
        fn unproject_inverts_project(lon0 in -170.0f64..170.0, lat0 in -80.0f64..80.0,
                                     dlon in -3.0f64..3.0, dlat in -3.0f64..3.0) {
            let origin = GeoPoint::new(lon0, lat0).unwrap();
            let (lon, lat) = (lon0 + dlon, (lat0 + dlat).clamp(-90.0, 90.0));
            let back = unproject(project(lon, lat, origin).unwrap(), origin);
            proptest::prop_assert!((back.lon - lon).abs() < 1e-9);
            proptest::prop_assert!((back.lat - lat).abs() < 1e-9);
        }
    }
}
