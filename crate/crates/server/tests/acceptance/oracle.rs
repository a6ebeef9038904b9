//! Reference implementations the system under test is compared with. None
//! of these call into the code they check.

use std::collections::BTreeSet;

use disaster_core::domain::{Actor, DisasterKind, GeoPoint, Role, Severity};
use disaster_core::geo::Province;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Great-circle distance from the chord between unit vectors.
pub fn distance_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let unit = |p: GeoPoint| {
        let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (u, v) = (unit(a), unit(b));
    let chord = ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2) + (u[2] - v[2]).powi(2)).sqrt();
    2.0 * EARTH_RADIUS_M * (chord / 2.0).min(1.0).asin()
}

/// Winding-number containment; points within 1e-12 degrees of an edge count
/// as inside.
pub fn winding_contains(ring: &[GeoPoint], p: GeoPoint) -> bool {
    let n = ring.len();
    let mut winding = 0i32;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2).clamp(0.0, 1.0)
        };
        let (cx, cy) = (a.lon + t * dx, a.lat + t * dy);
        if ((p.lon - cx).powi(2) + (p.lat - cy).powi(2)).sqrt() < 1e-12 {
            return true;
        }
        let left = dx * (p.lat - a.lat) - (p.lon - a.lon) * dy;
        if a.lat <= p.lat {
            if b.lat > p.lat && left > 0.0 {
                winding += 1;
            }
        } else if b.lat <= p.lat && left < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

fn any_ring(rings: &[Vec<GeoPoint>], p: GeoPoint) -> bool {
    rings.iter().any(|r| winding_contains(r, p))
}

/// First province, then first district within it, then first kumban.
pub fn locate(provinces: &[Province], p: GeoPoint) -> Option<(String, String, Option<String>)> {
    let province = provinces.iter().find(|pr| any_ring(&pr.rings, p))?;
    let district = province.districts.iter().find(|d| any_ring(&d.rings, p))?;
    let kumban = district.kumbans.iter().find(|k| any_ring(&k.rings, p));
    Some((province.id.clone(), district.id.clone(), kumban.map(|k| k.id.clone())))
}

/// Villages within `radius_m`, by brute force over every village.
pub fn villages_within(provinces: &[Province], center: GeoPoint, radius_m: f64) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for p in provinces {
        for d in &p.districts {
            for k in &d.kumbans {
                for v in &k.villages {
                    if distance_m(center, v.location) <= radius_m {
                        out.insert(v.id.clone());
                    }
                }
            }
        }
    }
    out
}

/// Smallest distance between `radius_m` and any village, to keep queries
/// away from ties a rounding difference could flip.
pub fn closest_to_radius(provinces: &[Province], center: GeoPoint, radius_m: f64) -> f64 {
    provinces
        .iter()
        .flat_map(|p| &p.districts)
        .flat_map(|d| &d.kumbans)
        .flat_map(|k| &k.villages)
        .map(|v| (distance_m(center, v.location) - radius_m).abs())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Maf,
    Pafo,
    Dafo,
}

/// The escalation table written out cell by cell.
pub const ESCALATION: [(DisasterKind, Severity, Tier); 24] = {
    use DisasterKind::*;
    use Severity::*;
    use Tier::*;
    [
        (Flood, Minor, Pafo),
        (Flood, Moderate, Pafo),
        (Flood, Severe, Pafo),
        (Flood, Extreme, Maf),
        (BushFire, Minor, Pafo),
        (BushFire, Moderate, Pafo),
        (BushFire, Severe, Pafo),
        (BushFire, Extreme, Maf),
        (Infrastructure, Minor, Dafo),
        (Infrastructure, Moderate, Dafo),
        (Infrastructure, Severe, Dafo),
        (Infrastructure, Extreme, Dafo),
        (HumanDisease, Minor, Dafo),
        (HumanDisease, Moderate, Dafo),
        (HumanDisease, Severe, Pafo),
        (HumanDisease, Extreme, Pafo),
        (AnimalDisease, Minor, Dafo),
        (AnimalDisease, Moderate, Dafo),
        (AnimalDisease, Severe, Pafo),
        (AnimalDisease, Extreme, Pafo),
        (PlantDisease, Minor, Dafo),
        (PlantDisease, Moderate, Dafo),
        (PlantDisease, Severe, Pafo),
        (PlantDisease, Extreme, Pafo),
    ]
};

pub fn tier(kind: DisasterKind, severity: Severity) -> Tier {
    ESCALATION
        .iter()
        .find(|(k, s, _)| *k == kind && *s == severity)
        .map(|(_, _, t)| *t)
        .expect("table covers every pair")
}

/// Topic of the unit at `tier` over the given regions.
pub fn tier_topic(tier: Tier, province: &str, district: &str) -> String {
    match tier {
        Tier::Maf => "MAF".to_string(),
        Tier::Pafo => format!("PAFO:{province}"),
        Tier::Dafo => format!("DAFO:{district}"),
    }
}

/// Every office topic a report in (province, district) must reach.
pub fn office_topics(actors: &[Actor], province: &str, district: &str) -> BTreeSet<String> {
    let mut topics = BTreeSet::from([
        "MAF".to_string(),
        format!("PAFO:{province}"),
        format!("DAFO:{district}"),
    ]);
    for a in actors {
        if a.role == Role::Ingo && a.unit_id == province {
            topics.insert(format!("INGO:{}", a.id.as_str()));
        }
    }
    topics
}

/// `(element, whitespace-normalized text)` for every leaf element, found by
/// scanning the text.
pub fn leaf_values(xml: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut rest = xml;
    while let Some(open) = rest.find('<') {
        rest = &rest[open + 1..];
        let Some(close) = rest.find('>') else { break };
        let tag = &rest[..close];
        rest = &rest[close + 1..];
        if tag.starts_with('/') || tag.starts_with('?') || tag.contains(' ') {
            continue;
        }
        let end = format!("</{tag}>");
        let next = rest.find('<').unwrap_or(rest.len());
        if rest[next..].starts_with(&end) {
            out.push((tag.to_string(), rest[..next].split_whitespace().collect::<Vec<_>>().join(" ")));
        }
    }
    out
}
