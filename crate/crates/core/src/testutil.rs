//! Test-only helpers and oracles.

use chrono::{DateTime, Utc};
use proptest::prelude::*;

use crate::domain::{
    ActorId, DisasterKind, DisasterReport, ExtraParameter, GeoPoint, KindDetails, LifecycleState, Severity,
};
use crate::geo::{AdminHierarchy, District, Kumban, Province, Village};

pub use crate::fixtures::{listing_hierarchy, listing_report, rect};

pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `(element, whitespace-normalized text)` for every leaf element, found by
/// plain string scanning.
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
            out.push((tag.to_string(), normalize_ws(&rest[..next])));
        }
    }
    out
}

/// Winding number containment, with points on an edge counted as inside.
pub fn winding_contains(ring: &[GeoPoint], p: GeoPoint) -> bool {
    let n = ring.len();
    let mut winding = 0i32;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        // distance from p to segment ab in degree space
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
        let is_left = dx * (p.lat - a.lat) - (p.lon - a.lon) * dy;
        if a.lat <= p.lat {
            if b.lat > p.lat && is_left > 0.0 {
                winding += 1;
            }
        } else if b.lat <= p.lat && is_left < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

pub fn square_province(id: &str, lat: f64, lon: f64) -> Province {
    Province {
        id: id.into(),
        rings: vec![rect(lat, lon, lat + 1.0, lon + 1.0)],
        districts: vec![District {
            id: format!("{id}-d"),
            rings: vec![rect(lat, lon, lat + 1.0, lon + 1.0)],
            kumbans: vec![],
        }],
    }
}

/// One 2°×2° province around the given villages.
pub fn hierarchy_with_villages(villages: &[(&str, GeoPoint)]) -> AdminHierarchy {
    let c = villages[0].1;
    let ring = rect(c.lat - 1.0, c.lon - 1.0, c.lat + 1.0, c.lon + 1.0);
    AdminHierarchy::new(vec![Province {
        id: "P".into(),
        rings: vec![ring.clone()],
        districts: vec![District {
            id: "D".into(),
            rings: vec![ring.clone()],
            kumbans: vec![Kumban {
                id: "K".into(),
                rings: vec![ring],
                villages: villages
                    .iter()
                    .map(|(id, p)| Village {
                        id: id.to_string(),
                        location: *p,
                    })
                    .collect(),
            }],
        }],
    }])
    .unwrap()
}

fn token() -> impl Strategy<Value = String> {
    prop::string::string_regex("[A-Za-z0-9._-]{1,20}").unwrap()
}

fn text() -> impl Strategy<Value = String> {
    prop::string::string_regex("[a-zA-Z0-9<>&'\"\r\n\t \u{0E81}-\u{0EAE};:,.+-]{0,40}").unwrap()
}

fn details(kind: DisasterKind) -> BoxedStrategy<KindDetails> {
    match kind {
        DisasterKind::Flood => (0u32..=10_000)
            .prop_map(|water_level_cm| KindDetails::Flood { water_level_cm })
            .boxed(),
        DisasterKind::BushFire => prop::option::of(any::<u64>())
            .prop_map(|area_estimate_m2| KindDetails::BushFire { area_estimate_m2 })
            .boxed(),
        DisasterKind::Infrastructure => text()
            .prop_map(|facility| KindDetails::Infrastructure { facility })
            .boxed(),
        disease => (text(), any::<u32>())
            .prop_map(move |(name, count)| KindDetails::disease(disease, name, count).unwrap())
            .boxed(),
    }
}

/// Reports that pass validation against [`listing_hierarchy`].
pub fn arb_report() -> impl Strategy<Value = DisasterReport> {
    let where_ = prop_oneof![
        (19.7001f64..19.9499, 102.0001f64..102.1999)
            .prop_map(|(lat, lon)| (GeoPoint::new(lat, lon), "Louangphabang", "Louangprabang", Some("Sangkalok"))),
        (17.6f64..18.4, 102.1f64..102.9)
            .prop_map(|(lat, lon)| (GeoPoint::new(lat, lon), "Vientiane", "Xaysetha", None)),
    ];
    let kind = prop::sample::select(DisasterKind::ALL.to_vec());
    let state = prop::sample::select(LifecycleState::ALL.to_vec());
    let severity = prop::sample::select(Severity::ALL.to_vec());
    (
        kind.prop_flat_map(|k| (Just(k), details(k))),
        where_,
        prop::option::of(0.0001f64..0.01),
        (token(), token(), text(), text()),
        (0i64..2_000_000_000_000, state, severity, token()),
        prop::collection::vec(token(), 0..3),
        prop::collection::vec((token(), text()), 0..3),
    )
        .prop_map(
            |((kind, details), (location, province, district, kumban), size, (id, reporter, phone, desc), (ms, state, severity, winner), attachments, extensions)| {
                DisasterReport {
                    id,
                    kind,
                    details,
                    location,
                    geometry: size.map(|s| {
                        vec![
                            GeoPoint::new(location.lat - s, location.lon - s),
                            GeoPoint::new(location.lat - s, location.lon + s),
                            GeoPoint::new(location.lat + s, location.lon),
                        ]
                    }),
                    province_id: province.into(),
                    district_id: district.into(),
                    kumban_id: kumban.map(Into::into),
                    reporter: ActorId::new(reporter),
                    reporter_phone: phone,
                    description: format!("d{desc}"),
                    created_at: DateTime::<Utc>::from_timestamp_millis(ms).unwrap(),
                    state,
                    severity,
                    merged_into: (state == LifecycleState::Merged).then_some(winner),
                    attachments,
                    extensions: extensions
                        .into_iter()
                        .map(|(name, value)| ExtraParameter {
                            name: format!("x-{name}"),
                            value,
                        })
                        .collect(),
                }
            },
        )
}
