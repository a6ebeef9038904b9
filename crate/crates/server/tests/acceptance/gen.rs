//! Seeded generators for the acceptance suite.

use chrono::{DateTime, FixedOffset, SecondsFormat, Utc};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use disaster_core::cap::{
    CapAlert, CapArea, CapInfo, CapParameter, CapSeverity, CapTime, Category, Certainty, MsgType, ResponseType,
    Scope, Status, Urgency,
};
use disaster_core::domain::{
    Actor, ActorId, DisasterKind, DisasterReport, ExtraParameter, GeoPoint, KindDetails, LifecycleState, Role,
    Severity,
};
use disaster_core::geo::{AdminHierarchy, District, Kumban, Province, Village};
use disaster_core::routing::ActorDirectory;

pub type Rng8 = ChaCha8Rng;

fn text_pool() -> Vec<char> {
    let mut pool: Vec<char> = ('a'..='z').chain('A'..='Z').chain('0'..='9').collect();
    pool.extend("<>&'\";:,.+- \t\n\r".chars());
    pool.extend('\u{0E81}'..='\u{0EAE}');
    pool
}

/// Printable text with markup characters, CR/LF/tab and Lao script.
pub fn text(rng: &mut Rng8, max: usize) -> String {
    let pool = text_pool();
    let n = rng.random_range(0..=max);
    (0..n).map(|_| *pool.choose(rng).unwrap()).collect()
}

pub fn token(rng: &mut Rng8, max: usize) -> String {
    const POOL: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-";
    let n = rng.random_range(1..=max);
    (0..n).map(|_| *POOL.choose(rng).unwrap() as char).collect()
}

pub fn pick<T: Copy>(rng: &mut Rng8, all: &[T]) -> T {
    *all.choose(rng).unwrap()
}

pub fn maybe<T>(rng: &mut Rng8, f: impl FnOnce(&mut Rng8) -> T) -> Option<T> {
    if rng.random_bool(0.5) {
        Some(f(rng))
    } else {
        None
    }
}

pub fn cap_time(rng: &mut Rng8) -> CapTime {
    let secs = rng.random_range(0i64..4_000_000_000);
    let ms = if rng.random_bool(0.5) { rng.random_range(0u32..1000) } else { 0 };
    let offset = FixedOffset::east_opt(rng.random_range(-12i32..=14) * 3600).unwrap();
    let dt = DateTime::from_timestamp(secs, ms * 1_000_000).unwrap().with_timezone(&offset);
    CapTime::parse(&dt.to_rfc3339_opts(SecondsFormat::AutoSi, false)).unwrap()
}

fn coordinate_list(rng: &mut Rng8, n: usize) -> String {
    (0..n)
        .map(|_| format!("{:.4},{:.4}", rng.random_range(-89.0..89.0), rng.random_range(-179.0..179.0)))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn cap_alert(rng: &mut Rng8) -> CapAlert {
    let parameters = (0..rng.random_range(0..7))
        .map(|_| CapParameter::new(token(rng, 16), text(rng, 30)))
        .collect();
    let areas = (0..rng.random_range(0..3))
        .map(|_| CapArea {
            area_desc: text(rng, 20),
            polygons: (0..rng.random_range(0..3)).map(|_| coordinate_list(rng, 4)).collect(),
            circles: (0..rng.random_range(0..2))
                .map(|_| format!("{} {:.1}", coordinate_list(rng, 1), rng.random_range(0.1..50.0)))
                .collect(),
        })
        .collect();
    CapAlert {
        identifier: token(rng, 16),
        sender: token(rng, 16),
        sent: cap_time(rng),
        status: pick(rng, Status::ALL),
        msg_type: pick(rng, MsgType::ALL),
        source: maybe(rng, |r| text(r, 30)),
        scope: pick(rng, Scope::ALL),
        info: CapInfo {
            language: maybe(rng, |r| token(r, 8)),
            category: pick(rng, Category::ALL),
            event: text(rng, 40),
            response_type: maybe(rng, |r| pick(r, ResponseType::ALL)),
            urgency: pick(rng, Urgency::ALL),
            severity: pick(rng, CapSeverity::ALL),
            certainty: pick(rng, Certainty::ALL),
            effective: maybe(rng, cap_time),
            parameters,
            areas,
        },
    }
}

pub fn details(rng: &mut Rng8, kind: DisasterKind) -> KindDetails {
    match kind {
        DisasterKind::Flood => KindDetails::Flood {
            water_level_cm: rng.random_range(0..=10_000),
        },
        DisasterKind::BushFire => KindDetails::BushFire {
            area_estimate_m2: maybe(rng, |r| r.random()),
        },
        DisasterKind::Infrastructure => KindDetails::Infrastructure {
            facility: format!("f{}", text(rng, 30)),
        },
        disease => KindDetails::disease(disease, format!("n{}", text(rng, 30)), rng.random()).unwrap(),
    }
}

/// A report that validates against the sample hierarchy, in any state.
pub fn listing_report(rng: &mut Rng8) -> DisasterReport {
    let kind = pick(rng, &DisasterKind::ALL);
    let (location, province, district, kumban) = if rng.random_bool(0.7) {
        (
            GeoPoint::new(rng.random_range(19.7001..19.9499), rng.random_range(102.0001..102.1999)),
            "Louangphabang",
            "Louangprabang",
            Some("Sangkalok"),
        )
    } else {
        (
            GeoPoint::new(rng.random_range(17.6..18.4), rng.random_range(102.1..102.9)),
            "Vientiane",
            "Xaysetha",
            None,
        )
    };
    let state = pick(rng, &LifecycleState::ALL);
    let geometry = maybe(rng, |r| {
        let s = r.random_range(0.0001..0.01);
        vec![
            GeoPoint::new(location.lat - s, location.lon - s),
            GeoPoint::new(location.lat - s, location.lon + s),
            GeoPoint::new(location.lat + s, location.lon),
        ]
    });
    DisasterReport {
        id: token(rng, 12),
        kind,
        details: details(rng, kind),
        location,
        geometry,
        province_id: province.into(),
        district_id: district.into(),
        kumban_id: kumban.map(Into::into),
        reporter: ActorId::new(token(rng, 20)),
        reporter_phone: text(rng, 16),
        description: format!("d{}", text(rng, 60)),
        created_at: DateTime::<Utc>::from_timestamp_millis(rng.random_range(0i64..2_000_000_000_000)).unwrap(),
        state,
        severity: pick(rng, &Severity::ALL),
        merged_into: (state == LifecycleState::Merged).then(|| token(rng, 8)),
        attachments: (0..rng.random_range(0..3)).map(|_| token(rng, 20)).collect(),
        extensions: (0..rng.random_range(0..3))
            .map(|_| ExtraParameter {
                name: format!("x-{}", token(rng, 10)),
                value: text(rng, 20),
            })
            .collect(),
    }
}

/// The lower part of a district strip, which its polygon always covers.
#[derive(Debug, Clone)]
pub struct Cell {
    pub province: String,
    pub district: String,
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl Cell {
    pub fn sample(&self, rng: &mut Rng8) -> GeoPoint {
        GeoPoint::new(
            rng.random_range(self.min_lat..self.max_lat),
            rng.random_range(self.min_lon..self.max_lon),
        )
    }
}

pub struct Synthetic {
    pub provinces: Vec<Province>,
    pub hierarchy: AdminHierarchy,
    pub cells: Vec<Cell>,
    pub actors: Vec<Actor>,
    pub directory: ActorDirectory,
}

pub struct Shape {
    pub max_provinces: usize,
    pub max_districts: usize,
    pub max_villages_per_kumban: usize,
    /// Pads region and actor ids to 64 bytes with characters that need
    /// escaping or several UTF-8 bytes.
    pub long_ids: bool,
}

fn name(rng: &mut Rng8, base: String, long: bool) -> String {
    if !long {
        return base;
    }
    let mut id = base;
    loop {
        let c = pick(rng, &['"', '\\', '\u{0EAA}', '€', 'x', '/']);
        if id.len() + c.len_utf8() > 64 {
            break;
        }
        id.push(c);
    }
    id
}

fn rect(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Vec<GeoPoint> {
    vec![
        GeoPoint::new(min_lat, min_lon),
        GeoPoint::new(min_lat, max_lon),
        GeoPoint::new(max_lat, max_lon),
        GeoPoint::new(max_lat, min_lon),
    ]
}

/// Provinces on a grid of tiles. Each province is split into vertical
/// district strips whose top edge has a notch, so district polygons are
/// concave and leave part of the province uncovered. Kumbans are bands in
/// the lower part of a strip and villages lie inside kumbans.
pub fn synthetic(rng: &mut Rng8, shape: &Shape) -> Synthetic {
    let n_provinces = rng.random_range(1..=shape.max_provinces);
    let cols = 5usize;
    let rows = n_provinces.div_ceil(cols);
    let tile_lat = rng.random_range(0.3..1.2);
    let tile_lon = rng.random_range(0.3..1.2);
    let origin_lat = rng.random_range(-60.0..(60.0 - rows as f64 * tile_lat));
    let origin_lon = rng.random_range(-175.0..(175.0 - cols as f64 * tile_lon));
    let lats: Vec<f64> = (0..=rows).map(|r| origin_lat + r as f64 * tile_lat).collect();
    let lons: Vec<f64> = (0..=cols).map(|c| origin_lon + c as f64 * tile_lon).collect();

    let mut provinces = Vec::new();
    let mut cells = Vec::new();
    let mut actors = vec![Actor {
        id: ActorId::new(name(rng, "maf".into(), shape.long_ids)),
        role: Role::Ministry,
        unit_id: "MAF".into(),
        phone: String::new(),
    }];
    for i in 0..n_provinces {
        let (row, col) = (i / cols, i % cols);
        let (lat0, lat1, lon0, lon1) = (lats[row], lats[row + 1], lons[col], lons[col + 1]);
        let h = lat1 - lat0;
        let province_id = name(rng, format!("P{i}"), shape.long_ids);
        let n_districts = rng.random_range(1..=shape.max_districts);
        let edge = |j: usize| {
            if j == n_districts {
                lon1
            } else {
                lon0 + (lon1 - lon0) * j as f64 / n_districts as f64
            }
        };
        let mut districts = Vec::new();
        for j in 0..n_districts {
            let (a, b) = (edge(j), edge(j + 1));
            let district_id = name(rng, format!("P{i}-D{j}"), shape.long_ids);
            let depth = rng.random_range(0.0..0.3) * h;
            let ring = vec![
                GeoPoint::new(lat0, a),
                GeoPoint::new(lat0, b),
                GeoPoint::new(lat1, b),
                GeoPoint::new(lat1 - depth, (a + b) / 2.0),
                GeoPoint::new(lat1, a),
            ];
            let n_kumbans = rng.random_range(0..=3usize);
            let band = 0.6 * h / n_kumbans.max(1) as f64;
            let gap_lat = band * 0.05;
            let gap_lon = (b - a) * 0.05;
            let mut kumbans = Vec::new();
            for k in 0..n_kumbans {
                let lo = lat0 + 0.05 * h + k as f64 * band;
                let (min_lat, max_lat, min_lon, max_lon) = (lo + gap_lat, lo + band - gap_lat, a + gap_lon, b - gap_lon);
                let kumban_id = name(rng, format!("P{i}-D{j}-K{k}"), shape.long_ids);
                let villages = (0..rng.random_range(0..=shape.max_villages_per_kumban))
                    .map(|v| Village {
                        id: name(rng, format!("P{i}-D{j}-K{k}-V{v}"), shape.long_ids),
                        location: GeoPoint::new(
                            rng.random_range(min_lat..max_lat),
                            rng.random_range(min_lon..max_lon),
                        ),
                    })
                    .collect();
                kumbans.push(Kumban {
                    id: kumban_id,
                    rings: vec![rect(min_lat, min_lon, max_lat, max_lon)],
                    villages,
                });
            }
            cells.push(Cell {
                province: province_id.clone(),
                district: district_id.clone(),
                min_lat: lat0,
                max_lat: lat0 + 0.7 * h,
                min_lon: a,
                max_lon: b,
            });
            actors.push(Actor {
                id: ActorId::new(name(rng, format!("dafo-{i}-{j}"), shape.long_ids)),
                role: Role::DistrictOffice,
                unit_id: district_id.clone(),
                phone: String::new(),
            });
            districts.push(District {
                id: district_id,
                rings: vec![ring],
                kumbans,
            });
        }
        actors.push(Actor {
            id: ActorId::new(name(rng, format!("pafo-{i}"), shape.long_ids)),
            role: Role::ProvinceOffice,
            unit_id: province_id.clone(),
            phone: String::new(),
        });
        provinces.push(Province {
            id: province_id,
            rings: vec![rect(lat0, lon0, lat1, lon1)],
            districts,
        });
    }
    // INGOs registered for random provinces, and a few villagers.
    for k in 0..rng.random_range(0..=n_provinces * 2) {
        let unit = provinces.choose(rng).unwrap().id.clone();
        actors.push(Actor {
            id: ActorId::new(name(rng, format!("ingo-{k}"), shape.long_ids)),
            role: Role::Ingo,
            unit_id: unit,
            phone: String::new(),
        });
    }
    for k in 0..3 {
        actors.push(Actor {
            id: ActorId::new(name(rng, format!("villager-{k}"), shape.long_ids)),
            role: Role::Villager,
            unit_id: String::new(),
            phone: String::new(),
        });
    }
    let hierarchy = AdminHierarchy::new(provinces.clone()).expect("generated hierarchy is valid");
    let directory = ActorDirectory::new(actors.clone()).expect("generated directory is valid");
    Synthetic {
        provinces,
        hierarchy,
        cells,
        actors,
        directory,
    }
}

/// A valid report somewhere in the hierarchy, regions set from the cell it
/// was drawn from.
pub fn synthetic_report(rng: &mut Rng8, s: &Synthetic) -> DisasterReport {
    let cell = s.cells.choose(rng).unwrap();
    let loc = cell.sample(rng);
    report_at(rng, cell, loc)
}

pub fn report_at(rng: &mut Rng8, cell: &Cell, location: GeoPoint) -> DisasterReport {
    let kind = pick(rng, &DisasterKind::ALL);
    DisasterReport {
        id: String::new(),
        kind,
        details: details(rng, kind),
        location,
        geometry: None,
        province_id: cell.province.clone(),
        district_id: cell.district.clone(),
        kumban_id: None,
        reporter: ActorId::new(format!("reporter-{}", rng.random_range(0..50))),
        reporter_phone: String::new(),
        description: format!("d{}", text(rng, 40)),
        created_at: DateTime::<Utc>::from_timestamp(rng.random_range(1_300_000_000..1_800_000_000), 0).unwrap(),
        state: LifecycleState::Submitted,
        severity: pick(rng, &Severity::ALL),
        merged_into: None,
        attachments: Vec::new(),
        extensions: Vec::new(),
    }
}
