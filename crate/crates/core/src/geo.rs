//! Administrative region lookup, neighbor search and affected-area geometry.
//!
//! Polygons are treated as planar in (lon, lat) degrees, which is adequate at
//! the scale of provinces and districts. Distances use the haversine formula
//! on a sphere of radius [`EARTH_RADIUS_M`].

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{is_valid_id, DisasterReport, GeoPoint, MAX_ID_LEN};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Default neighbor fan-out radius.
pub const DEFAULT_NEIGHBOR_RADIUS_M: f64 = 10_000.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("point {0} is not inside any covered region")]
    OutOfCoverage(GeoPoint),
    #[error("degenerate ring: {0}")]
    DegenerateRing(&'static str),
    #[error("invalid region file: {0}")]
    InvalidRegionFile(String),
    #[error("reading region file: {0}")]
    Io(#[from] std::io::Error),
}

/// A polygon ring in `[lat, lon]` pair form on disk.
mod rings_serde {
    use super::GeoPoint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(rings: &[Vec<GeoPoint>], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<Vec<[f64; 2]>> = rings
            .iter()
            .map(|r| r.iter().map(|p| [p.lat, p.lon]).collect())
            .collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<GeoPoint>>, D::Error> {
        let raw = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|r| r.into_iter().map(|[lat, lon]| GeoPoint { lat, lon }).collect())
            .collect())
    }
}

mod point_serde {
    use super::GeoPoint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &GeoPoint, s: S) -> Result<S::Ok, S::Error> {
        [p.lat, p.lon].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GeoPoint, D::Error> {
        let [lat, lon] = <[f64; 2]>::deserialize(d)?;
        Ok(GeoPoint { lat, lon })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Village {
    pub id: String,
    #[serde(with = "point_serde")]
    pub location: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kumban {
    pub id: String,
    #[serde(with = "rings_serde")]
    pub rings: Vec<Vec<GeoPoint>>,
    #[serde(default)]
    pub villages: Vec<Village>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct District {
    pub id: String,
    #[serde(with = "rings_serde")]
    pub rings: Vec<Vec<GeoPoint>>,
    #[serde(default)]
    pub kumbans: Vec<Kumban>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Province {
    pub id: String,
    #[serde(with = "rings_serde")]
    pub rings: Vec<Vec<GeoPoint>>,
    #[serde(default)]
    pub districts: Vec<District>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RegionFile {
    provinces: Vec<Province>,
}

/// The resolved administrative regions of a point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub province_id: String,
    pub district_id: String,
    pub kumban_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub village: Village,
    pub distance_m: f64,
}

/// Province → district → kumban → village containment tree. Immutable once
/// built.
#[derive(Debug, Clone)]
pub struct AdminHierarchy {
    provinces: Vec<Province>,
    /// district id → (province index, district index)
    district_index: HashMap<String, (usize, usize)>,
    province_index: HashMap<String, usize>,
}

impl AdminHierarchy {
    pub fn new(mut provinces: Vec<Province>) -> Result<Self, GeoError> {
        let mut province_index = HashMap::new();
        let mut district_index = HashMap::new();
        let mut kumban_ids = HashSet::new();
        let mut village_ids = HashSet::new();

        for (pi, province) in provinces.iter_mut().enumerate() {
            normalize_region(&province.id, &mut province.rings)?;
            if province_index.insert(province.id.clone(), pi).is_some() {
                return Err(invalid(format!("duplicate province id {:?}", province.id)));
            }
            let province_box = BBox::of_rings(&province.rings);
            for (di, district) in province.districts.iter_mut().enumerate() {
                normalize_region(&district.id, &mut district.rings)?;
                if district_index.insert(district.id.clone(), (pi, di)).is_some() {
                    return Err(invalid(format!("duplicate district id {:?}", district.id)));
                }
                let district_box = BBox::of_rings(&district.rings);
                if !province_box.contains_box(&district_box) {
                    return Err(invalid(format!(
                        "district {:?} extends outside province {:?}",
                        district.id, province.id
                    )));
                }
                for kumban in &mut district.kumbans {
                    normalize_region(&kumban.id, &mut kumban.rings)?;
                    if !kumban_ids.insert(kumban.id.clone()) {
                        return Err(invalid(format!("duplicate kumban id {:?}", kumban.id)));
                    }
                    if !district_box.contains_box(&BBox::of_rings(&kumban.rings)) {
                        return Err(invalid(format!(
                            "kumban {:?} extends outside district {:?}",
                            kumban.id, district.id
                        )));
                    }
                    for village in &kumban.villages {
                        check_id(&village.id)?;
                        if !village.location.in_range() {
                            return Err(invalid(format!("village {:?} has bad coordinates", village.id)));
                        }
                        if !village_ids.insert(village.id.clone()) {
                            return Err(invalid(format!("duplicate village id {:?}", village.id)));
                        }
                    }
                }
            }
        }

        Ok(Self {
            provinces,
            district_index,
            province_index,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, GeoError> {
        let file: RegionFile = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        Self::new(file.provinces)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeoError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RegionFile {
            provinces: self.provinces.clone(),
        })
        .expect("region file serializes")
    }

    pub fn provinces(&self) -> &[Province] {
        &self.provinces
    }

    pub fn province(&self, id: &str) -> Option<&Province> {
        self.province_index.get(id).map(|&i| &self.provinces[i])
    }

    pub fn district(&self, id: &str) -> Option<&District> {
        self.district_index
            .get(id)
            .map(|&(pi, di)| &self.provinces[pi].districts[di])
    }

    /// Province id owning a district.
    pub fn province_of_district(&self, district_id: &str) -> Option<&str> {
        self.district_index
            .get(district_id)
            .map(|&(pi, _)| self.provinces[pi].id.as_str())
    }

    pub fn villages(&self) -> impl Iterator<Item = &Village> {
        self.provinces
            .iter()
            .flat_map(|p| &p.districts)
            .flat_map(|d| &d.kumbans)
            .flat_map(|k| &k.villages)
    }

    /// Innermost regions containing `point`. Boundary points count as inside;
    /// when several siblings contain the point the first in file order wins.
    pub fn locate(&self, point: GeoPoint) -> Result<Location, GeoError> {
        let province = self
            .provinces
            .iter()
            .find(|p| rings_contain(&p.rings, point))
            .ok_or(GeoError::OutOfCoverage(point))?;
        let district = province
            .districts
            .iter()
            .find(|d| rings_contain(&d.rings, point))
            .ok_or(GeoError::OutOfCoverage(point))?;
        let kumban = district.kumbans.iter().find(|k| rings_contain(&k.rings, point));
        Ok(Location {
            province_id: province.id.clone(),
            district_id: district.id.clone(),
            kumban_id: kumban.map(|k| k.id.clone()),
        })
    }

    /// Villages within `radius_m` of `center`, nearest first. A non-positive
    /// radius yields nothing.
    pub fn neighbors(&self, center: GeoPoint, radius_m: f64) -> Vec<Neighbor> {
        if !(radius_m > 0.0) {
            return Vec::new();
        }
        let mut found: Vec<Neighbor> = self
            .villages()
            .filter_map(|v| {
                let distance_m = haversine_m(center, v.location);
                (distance_m <= radius_m).then(|| Neighbor {
                    village: v.clone(),
                    distance_m,
                })
            })
            .collect();
        found.sort_by(|a, b| {
            a.distance_m
                .total_cmp(&b.distance_m)
                .then_with(|| a.village.id.cmp(&b.village.id))
        });
        found
    }
}

fn invalid(msg: String) -> GeoError {
    GeoError::InvalidRegionFile(msg)
}

fn check_id(id: &str) -> Result<(), GeoError> {
    if !is_valid_id(id) {
        return Err(invalid(format!("region id {id:?} must be 1..={MAX_ID_LEN} bytes without control characters")));
    }
    Ok(())
}

fn normalize_region(id: &str, rings: &mut Vec<Vec<GeoPoint>>) -> Result<(), GeoError> {
    check_id(id)?;
    if rings.is_empty() {
        return Err(invalid(format!("region {id:?} has no polygon")));
    }
    for ring in rings.iter_mut() {
        open_ring(ring);
        if ring.len() < 3 || ring.iter().any(|p| !p.in_range()) {
            return Err(invalid(format!("region {id:?} has an invalid ring")));
        }
    }
    Ok(())
}

/// Drops an explicit closing vertex.
fn open_ring(ring: &mut Vec<GeoPoint>) {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    min_lat: f64,
    max_lat: f64,
    min_lon: f64,
    max_lon: f64,
}

impl BBox {
    fn of_rings(rings: &[Vec<GeoPoint>]) -> Self {
        let mut b = BBox {
            min_lat: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
            min_lon: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
        };
        for p in rings.iter().flatten() {
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lat = b.max_lat.max(p.lat);
            b.min_lon = b.min_lon.min(p.lon);
            b.max_lon = b.max_lon.max(p.lon);
        }
        b
    }

    fn contains_box(&self, other: &BBox) -> bool {
        const EPS: f64 = 1e-9;
        other.min_lat >= self.min_lat - EPS
            && other.max_lat <= self.max_lat + EPS
            && other.min_lon >= self.min_lon - EPS
            && other.max_lon <= self.max_lon + EPS
    }
}

fn rings_contain(rings: &[Vec<GeoPoint>], p: GeoPoint) -> bool {
    rings.iter().any(|r| ring_contains(r, p))
}

/// Ray casting along +lon. Points on an edge or vertex are inside.
pub fn ring_contains(ring: &[GeoPoint], p: GeoPoint) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let cross_lon = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < cross_lon {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    let scale = (b.lon - a.lon).abs().max((b.lat - a.lat).abs()).max(1.0);
    if cross.abs() > 1e-12 * scale {
        return false;
    }
    p.lon >= a.lon.min(b.lon) && p.lon <= a.lon.max(b.lon) && p.lat >= a.lat.min(b.lat) && p.lat <= a.lat.max(b.lat)
}

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Area centroid of an open ring (closing edge implicit).
pub fn ring_centroid(ring: &[GeoPoint]) -> Result<GeoPoint, GeoError> {
    if ring.len() < 3 {
        return Err(GeoError::DegenerateRing("fewer than 3 points"));
    }
    // Work relative to the first vertex to limit cancellation.
    let origin = ring[0];
    let n = ring.len();
    let (mut area2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (x0, y0) = (ring[i].lon - origin.lon, ring[i].lat - origin.lat);
        let j = (i + 1) % n;
        let (x1, y1) = (ring[j].lon - origin.lon, ring[j].lat - origin.lat);
        let cross = x0 * y1 - x1 * y0;
        area2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if !area2.is_finite() || area2.abs() < 1e-15 {
        return Err(GeoError::DegenerateRing("zero area"));
    }
    Ok(GeoPoint {
        lat: origin.lat + cy / (3.0 * area2),
        lon: origin.lon + cx / (3.0 * area2),
    })
}

/// Sets the affected area of a report, moves its location to the area's
/// centroid and re-resolves its regions.
pub fn attach_geometry(
    report: &DisasterReport,
    ring: &[GeoPoint],
    hierarchy: &AdminHierarchy,
) -> Result<DisasterReport, GeoError> {
    let mut ring = ring.to_vec();
    open_ring(&mut ring);
    if ring.iter().any(|p| !p.in_range()) {
        return Err(GeoError::DegenerateRing("coordinates out of range"));
    }
    let centroid = ring_centroid(&ring)?;
    let location = hierarchy.locate(centroid)?;
    let mut next = report.clone();
    next.geometry = Some(ring);
    next.location = centroid;
    next.province_id = location.province_id;
    next.district_id = location.district_id;
    next.kumban_id = location.kumban_id;
    Ok(next)
}
