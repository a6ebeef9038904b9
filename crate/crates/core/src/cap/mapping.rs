//! Report ↔ CAP alert mapping.
//!
//! Native report attributes go to their CAP elements. Everything else is
//! written as a `parameter` so an exported alert can be imported back
//! without loss:
//!
//! | parameter        | report field                          |
//! |------------------|---------------------------------------|
//! | `location`       | `location` as `lat,lon`               |
//! | `disasterType`   | `kind` + `Info` (e.g. `FloodInfo`)     |
//! | `province`, `district`, `kumban` | region ids            |
//! | `waterLevelCm`, `areaEstimateM2`, `facility`, `diseaseName`, `affectedCount` | kind details |
//! | `geometry`       | ring as space separated `lat,lon` pairs |
//! | `reporterPhone`, `reporter`, `lifecycleState`, `mergedInto` | same-named fields |
//! | `attachment`     | one per attachment, in order          |
//!
//! Unrecognised parameters are carried in `extensions`, in order.

use chrono::{DateTime, Utc};

use super::{
    CapAlert, CapError, CapInfo, CapParameter, CapSeverity, CapTime, Category, Certainty, MsgType, ResponseType,
    Scope, Status, Urgency,
};
use crate::domain::{
    Actor, ActorId, DisasterKind, DisasterReport, ExtraParameter, GeoPoint, KindDetails, LifecycleState, Severity,
    RESERVED_PARAMETERS,
};
use crate::geo::{self, AdminHierarchy};

const DISASTER_TYPE_SUFFIX: &str = "Info";

pub fn category_for(kind: DisasterKind) -> Category {
    match kind {
        DisasterKind::Flood => Category::Met,
        DisasterKind::BushFire => Category::Fire,
        DisasterKind::Infrastructure => Category::Infra,
        DisasterKind::HumanDisease | DisasterKind::AnimalDisease | DisasterKind::PlantDisease => Category::Health,
    }
}

fn kind_for_category(category: Category) -> DisasterKind {
    match category {
        Category::Health => DisasterKind::HumanDisease,
        Category::Fire => DisasterKind::BushFire,
        _ => DisasterKind::Infrastructure,
    }
}

fn cap_severity(severity: Severity) -> CapSeverity {
    match severity {
        Severity::Minor => CapSeverity::Minor,
        Severity::Moderate => CapSeverity::Moderate,
        Severity::Severe => CapSeverity::Severe,
        Severity::Extreme => CapSeverity::Extreme,
    }
}

fn report_severity(severity: CapSeverity) -> Severity {
    match severity {
        CapSeverity::Minor => Severity::Minor,
        CapSeverity::Moderate | CapSeverity::Unknown => Severity::Moderate,
        CapSeverity::Severe => Severity::Severe,
        CapSeverity::Extreme => Severity::Extreme,
    }
}

fn urgency_for(report: &DisasterReport) -> Urgency {
    if report.state.is_terminal() {
        Urgency::Past
    } else if matches!(report.kind, DisasterKind::Flood | DisasterKind::BushFire) {
        Urgency::Immediate
    } else {
        Urgency::Expected
    }
}

fn certainty_for(state: LifecycleState) -> Certainty {
    match state {
        LifecycleState::Verified | LifecycleState::Resolved => Certainty::Observed,
        LifecycleState::UnderReview => Certainty::Likely,
        LifecycleState::Submitted | LifecycleState::Distributed | LifecycleState::Merged => Certainty::Possible,
    }
}

fn response_type_for(report: &DisasterReport) -> ResponseType {
    let spreading = matches!(report.kind, DisasterKind::Flood | DisasterKind::BushFire);
    if !report.state.is_terminal() && spreading && report.severity >= Severity::Severe {
        ResponseType::Prepare
    } else {
        ResponseType::NoResponse
    }
}

/// Text for the CAP `source` element: `<unit> office; <phone>; <role>`.
pub fn source_line(sender: &Actor) -> String {
    format!("{} office; {}; {}", sender.unit_id, sender.phone, sender.role.code())
}

fn format_ring(ring: &[GeoPoint]) -> String {
    ring.iter().map(GeoPoint::to_string).collect::<Vec<_>>().join(" ")
}

fn parse_point(text: &str) -> Option<GeoPoint> {
    let (lat, lon) = text.trim().split_once(',')?;
    let point = GeoPoint {
        lat: lat.trim().parse().ok()?,
        lon: lon.trim().parse().ok()?,
    };
    (point.lat.is_finite() && point.lon.is_finite() && point.in_range()).then_some(point)
}

fn parse_ring(text: &str) -> Option<Vec<GeoPoint>> {
    text.split_whitespace().map(parse_point).collect()
}

/// Exports a report using its creation time as the `sent` time.
pub fn report_to_cap(report: &DisasterReport, sender: &Actor, msg_type: MsgType) -> CapAlert {
    report_to_cap_at(report, sender, msg_type, CapTime::from_utc(report.created_at))
}

pub fn report_to_cap_at(report: &DisasterReport, sender: &Actor, msg_type: MsgType, sent: CapTime) -> CapAlert {
    let mut parameters = vec![
        CapParameter::new("location", report.location.to_string()),
        CapParameter::new("disasterType", format!("{}{DISASTER_TYPE_SUFFIX}", report.kind.name())),
        CapParameter::new("province", &report.province_id),
        CapParameter::new("district", &report.district_id),
    ];
    if let Some(kumban) = &report.kumban_id {
        parameters.push(CapParameter::new("kumban", kumban));
    }
    match &report.details {
        KindDetails::Flood { water_level_cm } => {
            parameters.push(CapParameter::new("waterLevelCm", water_level_cm.to_string()));
        }
        KindDetails::BushFire { area_estimate_m2 } => {
            if let Some(area) = area_estimate_m2 {
                parameters.push(CapParameter::new("areaEstimateM2", area.to_string()));
            }
        }
        KindDetails::Infrastructure { facility } => {
            parameters.push(CapParameter::new("facility", facility));
        }
        KindDetails::HumanDisease {
            disease_name,
            affected_count,
        }
        | KindDetails::AnimalDisease {
            disease_name,
            affected_count,
        }
        | KindDetails::PlantDisease {
            disease_name,
            affected_count,
        } => {
            parameters.push(CapParameter::new("diseaseName", disease_name));
            parameters.push(CapParameter::new("affectedCount", affected_count.to_string()));
        }
    }
    if let Some(ring) = &report.geometry {
        parameters.push(CapParameter::new("geometry", format_ring(ring)));
    }
    parameters.push(CapParameter::new("reporterPhone", &report.reporter_phone));
    parameters.push(CapParameter::new("reporter", report.reporter.as_str()));
    parameters.push(CapParameter::new("lifecycleState", report.state.name()));
    if let Some(winner) = &report.merged_into {
        parameters.push(CapParameter::new("mergedInto", winner));
    }
    for doc in &report.attachments {
        parameters.push(CapParameter::new("attachment", doc));
    }
    for extra in &report.extensions {
        parameters.push(CapParameter::new(&extra.name, &extra.value));
    }

    CapAlert {
        identifier: report.id.clone(),
        sender: sender.id.to_string(),
        sent,
        status: Status::Actual,
        msg_type,
        source: Some(source_line(sender)),
        scope: Scope::Public,
        info: CapInfo {
            language: Some("en-US".to_string()),
            category: category_for(report.kind),
            event: report.description.clone(),
            response_type: Some(response_type_for(report)),
            urgency: urgency_for(report),
            severity: cap_severity(report.severity),
            certainty: certainty_for(report.state),
            effective: Some(CapTime::from_utc(report.created_at)),
            parameters,
            areas: Vec::new(),
        },
    }
}

/// Parameters sorted into the ones this mapping owns and the rest.
struct Params<'a> {
    owned: Vec<(&'a str, &'a str)>,
    attachments: Vec<String>,
    extensions: Vec<ExtraParameter>,
}

impl<'a> Params<'a> {
    fn split(parameters: &'a [CapParameter]) -> Result<Self, CapError> {
        let mut params = Params {
            owned: Vec::new(),
            attachments: Vec::new(),
            extensions: Vec::new(),
        };
        for p in parameters {
            let name = p.value_name.as_str();
            if name == "attachment" {
                params.attachments.push(p.value.clone());
            } else if RESERVED_PARAMETERS.contains(&name) {
                if params.owned.iter().any(|(n, _)| *n == name) {
                    return Err(bad(name, &p.value));
                }
                params.owned.push((name, p.value.as_str()));
            } else {
                params.extensions.push(ExtraParameter {
                    name: p.value_name.clone(),
                    value: p.value.clone(),
                });
            }
        }
        Ok(params)
    }

    fn get(&self, name: &str) -> Option<&'a str> {
        self.owned.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    fn parsed<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, CapError> {
        self.get(name)
            .map(|v| v.trim().parse().map_err(|_| bad(name, v)))
            .transpose()
    }
}

fn bad(name: &str, value: &str) -> CapError {
    CapError::BadParameter {
        name: name.to_string(),
        value: value.to_string(),
    }
}

/// Location of a foreign alert from its first usable `<area>` shape.
fn area_location(alert: &CapAlert) -> Option<GeoPoint> {
    alert.info.areas.iter().find_map(|area| {
        area.polygons
            .iter()
            .filter_map(|p| parse_ring(p))
            .find_map(|mut ring| {
                if ring.len() > 1 && ring.first() == ring.last() {
                    ring.pop();
                }
                geo::ring_centroid(&ring).ok()
            })
            .or_else(|| {
                // "lat,lon radius"
                area.circles
                    .iter()
                    .find_map(|c| c.split_whitespace().next().and_then(parse_point))
            })
    })
}

/// Imports an alert as a report. Alerts exported by [`report_to_cap`] map
/// back exactly; foreign alerts get their kind from the category and their
/// regions from `hierarchy`.
pub fn cap_to_report(alert: &CapAlert, hierarchy: &AdminHierarchy) -> Result<DisasterReport, CapError> {
    let params = Params::split(&alert.info.parameters)?;

    let location = match params.get("location") {
        Some(text) => parse_point(text).ok_or_else(|| bad("location", text))?,
        None => area_location(alert).ok_or(CapError::MissingLocation)?,
    };

    let kind = match params.get("disasterType") {
        Some(text) => text
            .strip_suffix(DISASTER_TYPE_SUFFIX)
            .and_then(DisasterKind::from_name)
            .ok_or_else(|| bad("disasterType", text))?,
        None => kind_for_category(alert.info.category),
    };

    let event = &alert.info.event;
    let details = match kind {
        DisasterKind::Flood => KindDetails::Flood {
            water_level_cm: params.parsed("waterLevelCm")?.unwrap_or(0),
        },
        DisasterKind::BushFire => KindDetails::BushFire {
            area_estimate_m2: params.parsed("areaEstimateM2")?,
        },
        DisasterKind::Infrastructure => KindDetails::Infrastructure {
            facility: params.get("facility").unwrap_or(event).to_string(),
        },
        disease => KindDetails::disease(
            disease,
            params.get("diseaseName").unwrap_or(event).to_string(),
            params.parsed("affectedCount")?.unwrap_or(0),
        )
        .expect("disease kind"),
    };

    let (province_id, district_id, kumban_id) = match (params.get("province"), params.get("district")) {
        (Some(p), Some(d)) => (p.to_string(), d.to_string(), params.get("kumban").map(str::to_string)),
        _ => {
            let found = hierarchy.locate(location)?;
            (found.province_id, found.district_id, found.kumban_id)
        }
    };

    let geometry = params
        .get("geometry")
        .map(|text| parse_ring(text).ok_or_else(|| bad("geometry", text)))
        .transpose()?;

    let state = match params.get("lifecycleState") {
        Some(text) => LifecycleState::from_name(text.trim()).ok_or_else(|| bad("lifecycleState", text))?,
        None => LifecycleState::Submitted,
    };

    let created_at: DateTime<Utc> = alert.info.effective.as_ref().unwrap_or(&alert.sent).utc();

    Ok(DisasterReport {
        id: alert.identifier.clone(),
        kind,
        details,
        location,
        geometry,
        province_id,
        district_id,
        kumban_id,
        reporter: ActorId::new(params.get("reporter").unwrap_or(&alert.sender)),
        reporter_phone: params.get("reporterPhone").unwrap_or_default().to_string(),
        description: event.clone(),
        created_at,
        state,
        severity: report_severity(alert.info.severity),
        merged_into: params.get("mergedInto").map(str::to_string),
        attachments: params.attachments,
        extensions: params.extensions,
    })
}
