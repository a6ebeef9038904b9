//! Disaster, actor and lifecycle types shared by every other module.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{self, AdminHierarchy};

/// Upper bound for the flood water level. The reporting slider is bounded, so
/// anything above this is input noise.
pub const MAX_WATER_LEVEL_CM: u32 = 10_000;

/// Identifiers end up in push payloads, which have a hard size budget.
pub const MAX_ID_LEN: usize = 64;

/// Ids are 1..=[`MAX_ID_LEN`] bytes without control characters; they end up
/// in push topics, which have a size budget.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= MAX_ID_LEN && !id.chars().any(char::is_control)
}

/// Parameter names the CAP mapping owns. Foreign extensions may not reuse them.
pub const RESERVED_PARAMETERS: &[&str] = &[
    "location",
    "disasterType",
    "province",
    "district",
    "kumban",
    "waterLevelCm",
    "geometry",
    "reporterPhone",
    "lifecycleState",
    "reporter",
    "facility",
    "diseaseName",
    "affectedCount",
    "areaEstimateM2",
    "mergedInto",
    "attachment",
];

/// WGS84 position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn in_range(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.lat, self.lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DisasterKind {
    Flood,
    BushFire,
    Infrastructure,
    HumanDisease,
    AnimalDisease,
    PlantDisease,
}

impl DisasterKind {
    pub const ALL: [DisasterKind; 6] = [
        DisasterKind::Flood,
        DisasterKind::BushFire,
        DisasterKind::Infrastructure,
        DisasterKind::HumanDisease,
        DisasterKind::AnimalDisease,
        DisasterKind::PlantDisease,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DisasterKind::Flood => "Flood",
            DisasterKind::BushFire => "BushFire",
            DisasterKind::Infrastructure => "Infrastructure",
            DisasterKind::HumanDisease => "HumanDisease",
            DisasterKind::AnimalDisease => "AnimalDisease",
            DisasterKind::PlantDisease => "PlantDisease",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_disease(self) -> bool {
        matches!(
            self,
            DisasterKind::HumanDisease | DisasterKind::AnimalDisease | DisasterKind::PlantDisease
        )
    }
}

impl fmt::Display for DisasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kind-specific payload of a report. The variant must agree with the
/// report's [`DisasterKind`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum KindDetails {
    Flood {
        water_level_cm: u32,
    },
    BushFire {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        area_estimate_m2: Option<u64>,
    },
    Infrastructure {
        facility: String,
    },
    HumanDisease {
        disease_name: String,
        affected_count: u32,
    },
    AnimalDisease {
        disease_name: String,
        affected_count: u32,
    },
    PlantDisease {
        disease_name: String,
        affected_count: u32,
    },
}

impl KindDetails {
    pub fn kind(&self) -> DisasterKind {
        match self {
            KindDetails::Flood { .. } => DisasterKind::Flood,
            KindDetails::BushFire { .. } => DisasterKind::BushFire,
            KindDetails::Infrastructure { .. } => DisasterKind::Infrastructure,
            KindDetails::HumanDisease { .. } => DisasterKind::HumanDisease,
            KindDetails::AnimalDisease { .. } => DisasterKind::AnimalDisease,
            KindDetails::PlantDisease { .. } => DisasterKind::PlantDisease,
        }
    }

    /// Builds the disease payload for one of the three disease kinds.
    pub fn disease(kind: DisasterKind, disease_name: String, affected_count: u32) -> Option<Self> {
        Some(match kind {
            DisasterKind::HumanDisease => KindDetails::HumanDisease { disease_name, affected_count },
            DisasterKind::AnimalDisease => KindDetails::AnimalDisease { disease_name, affected_count },
            DisasterKind::PlantDisease => KindDetails::PlantDisease { disease_name, affected_count },
            _ => return None,
        })
    }
}

/// CAP 1.1 severity scale, ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Minor,
    Moderate,
    Severe,
    Extreme,
}

impl Severity {
    pub const ALL: [Severity; 4] = [
        Severity::Minor,
        Severity::Moderate,
        Severity::Severe,
        Severity::Extreme,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Severity::Minor => "Minor",
            Severity::Moderate => "Moderate",
            Severity::Severe => "Severe",
            Severity::Extreme => "Extreme",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LifecycleState {
    Submitted,
    Distributed,
    UnderReview,
    Verified,
    Resolved,
    Merged,
}

impl LifecycleState {
    pub const ALL: [LifecycleState; 6] = [
        LifecycleState::Submitted,
        LifecycleState::Distributed,
        LifecycleState::UnderReview,
        LifecycleState::Verified,
        LifecycleState::Resolved,
        LifecycleState::Merged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LifecycleState::Submitted => "Submitted",
            LifecycleState::Distributed => "Distributed",
            LifecycleState::UnderReview => "UnderReview",
            LifecycleState::Verified => "Verified",
            LifecycleState::Resolved => "Resolved",
            LifecycleState::Merged => "Merged",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, LifecycleState::Resolved | LifecycleState::Merged)
    }

    /// The legal edges of the lifecycle.
    pub fn can_transition_to(self, target: LifecycleState) -> bool {
        use LifecycleState::*;
        matches!(
            (self, target),
            (Submitted, Distributed)
                | (Distributed, UnderReview)
                | (UnderReview, Verified)
                | (UnderReview, Resolved)
                | (UnderReview, Merged)
                | (Verified, Resolved)
                | (Verified, Merged)
        )
    }
}

impl fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorId(pub String);

impl ActorId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// MAF
    Ministry,
    /// PAFO
    ProvinceOffice,
    /// DAFO
    DistrictOffice,
    #[serde(rename = "INGO")]
    Ingo,
    Villager,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Ministry,
        Role::ProvinceOffice,
        Role::DistrictOffice,
        Role::Ingo,
        Role::Villager,
    ];

    /// Short code used in CAP `source` lines.
    pub fn code(self) -> &'static str {
        match self {
            Role::Ministry => "MAF",
            Role::ProvinceOffice => "PAFO",
            Role::DistrictOffice => "DAFO",
            Role::Ingo => "INGO",
            Role::Villager => "Villager",
        }
    }

    /// Governmental administrative units may run administrative actions.
    pub fn is_administrative(self) -> bool {
        matches!(self, Role::Ministry | Role::ProvinceOffice | Role::DistrictOffice)
    }

    /// Whether a verification by this role is an official stamp rather than a
    /// crowd attestation.
    pub fn is_official(self) -> bool {
        !matches!(self, Role::Villager)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A registered participant. `unit_id` is the administered region for office
/// roles, the province for INGOs and the home village for villagers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub id: ActorId,
    pub role: Role,
    pub unit_id: String,
    #[serde(default)]
    pub phone: String,
}

/// CAP parameter carried by a report that this system does not interpret.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraParameter {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisasterReport {
    pub id: String,
    pub kind: DisasterKind,
    pub details: KindDetails,
    pub location: GeoPoint,
    /// Affected area as an open ring; the closing edge is implicit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Vec<GeoPoint>>,
    pub province_id: String,
    pub district_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kumban_id: Option<String>,
    pub reporter: ActorId,
    #[serde(default)]
    pub reporter_phone: String,
    pub description: String,
    pub created_at: DateTime<Utc>,
    pub state: LifecycleState,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_into: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extensions: Vec<ExtraParameter>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("report id longer than {MAX_ID_LEN} bytes")]
    IdTooLong,
    #[error("invalid reporter id {0:?}")]
    InvalidReporter(String),
    #[error("coordinates out of range: {0}")]
    CoordinateOutOfRange(String),
    #[error("details tag mismatch: kind {kind} with {details} details")]
    DetailsTagMismatch {
        kind: DisasterKind,
        details: DisasterKind,
    },
    #[error("water level {0} cm exceeds {MAX_WATER_LEVEL_CM} cm")]
    WaterLevelOutOfRange(u32),
    #[error("description is empty")]
    EmptyDescription,
    #[error("location outside coverage")]
    OutOfCoverage,
    #[error("region inconsistency: {level} is {found:?} but location resolves to {expected:?}")]
    RegionInconsistency {
        level: &'static str,
        expected: Option<String>,
        found: Option<String>,
    },
    #[error("degenerate geometry ring")]
    DegenerateGeometry,
    #[error("merged_into must be set exactly when the state is Merged")]
    MergeLinkMismatch,
    #[error("extension parameter {0:?} uses a reserved name")]
    ReservedExtension(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition {
        from: LifecycleState,
        to: LifecycleState,
    },
    #[error("a Merged report needs merged_into")]
    MissingMergeTarget,
}

/// Checks a report against every domain invariant. Violations are returned
/// as data; the report is never modified.
pub fn validate_report(report: &DisasterReport, hierarchy: &AdminHierarchy) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();

    if report.id.len() > MAX_ID_LEN {
        violations.push(Violation::IdTooLong);
    }
    if !is_valid_id(report.reporter.as_str()) {
        violations.push(Violation::InvalidReporter(report.reporter.0.clone()));
    }
    if report.details.kind() != report.kind {
        violations.push(Violation::DetailsTagMismatch {
            kind: report.kind,
            details: report.details.kind(),
        });
    }
    if let KindDetails::Flood { water_level_cm } = report.details {
        if water_level_cm > MAX_WATER_LEVEL_CM {
            violations.push(Violation::WaterLevelOutOfRange(water_level_cm));
        }
    }
    if report.description.trim().is_empty() {
        violations.push(Violation::EmptyDescription);
    }
    if report.merged_into.is_some() != (report.state == LifecycleState::Merged) {
        violations.push(Violation::MergeLinkMismatch);
    }
    for extra in &report.extensions {
        if RESERVED_PARAMETERS.contains(&extra.name.as_str()) {
            violations.push(Violation::ReservedExtension(extra.name.clone()));
        }
    }
    if let Some(ring) = &report.geometry {
        if ring.iter().any(|p| !p.in_range()) || geo::ring_centroid(ring).is_err() {
            violations.push(Violation::DegenerateGeometry);
        }
    }

    if !report.location.in_range() || !report.location.lat.is_finite() || !report.location.lon.is_finite() {
        violations.push(Violation::CoordinateOutOfRange(report.location.to_string()));
    } else {
        match hierarchy.locate(report.location) {
            Ok(found) => {
                if found.province_id != report.province_id {
                    violations.push(Violation::RegionInconsistency {
                        level: "province",
                        expected: Some(found.province_id.clone()),
                        found: Some(report.province_id.clone()),
                    });
                }
                if found.district_id != report.district_id {
                    violations.push(Violation::RegionInconsistency {
                        level: "district",
                        expected: Some(found.district_id.clone()),
                        found: Some(report.district_id.clone()),
                    });
                }
                if found.kumban_id != report.kumban_id {
                    violations.push(Violation::RegionInconsistency {
                        level: "kumban",
                        expected: found.kumban_id,
                        found: report.kumban_id.clone(),
                    });
                }
            }
            Err(_) => violations.push(Violation::OutOfCoverage),
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Returns a copy of `report` moved to `target`. Moving to `Merged` needs
/// `merged_into` already set on the report.
pub fn transition(report: &DisasterReport, target: LifecycleState) -> Result<DisasterReport, TransitionError> {
    if !report.state.can_transition_to(target) {
        return Err(TransitionError::IllegalTransition {
            from: report.state,
            to: target,
        });
    }
    if target == LifecycleState::Merged && report.merged_into.is_none() {
        return Err(TransitionError::MissingMergeTarget);
    }
    let mut next = report.clone();
    next.state = target;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{listing_hierarchy, listing_report};

    fn flood() -> DisasterReport {
        let mut r = listing_report();
        r.kind = DisasterKind::Flood;
        r.details = KindDetails::Flood { water_level_cm: 150 };
        r
    }

    #[test]
    fn valid_flood_report() {
        assert_eq!(validate_report(&flood(), &listing_hierarchy()), Ok(()));
    }

    #[test]
    fn details_tag_mismatch() {
        let mut r = flood();
        r.details = KindDetails::AnimalDisease {
            disease_name: "anthrax".into(),
            affected_count: 3,
        };
        let v = validate_report(&r, &listing_hierarchy()).unwrap_err();
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("details tag mismatch"));
    }

    #[test]
    fn region_inconsistency() {
        let mut r = flood();
        r.district_id = "Chompet".into();
        let v = validate_report(&r, &listing_hierarchy()).unwrap_err();
        assert_eq!(
            v,
            vec![Violation::RegionInconsistency {
                level: "district",
                expected: Some("Louangprabang".into()),
                found: Some("Chompet".into()),
            }]
        );
        assert!(v[0].to_string().starts_with("region inconsistency"));
    }

    #[test]
    fn water_level_cap_and_other_violations() {
        let mut r = flood();
        r.details = KindDetails::Flood { water_level_cm: MAX_WATER_LEVEL_CM + 1 };
        r.description = "  ".into();
        r.merged_into = Some("x".into());
        r.extensions.push(ExtraParameter {
            name: "province".into(),
            value: "x".into(),
        });
        let v = validate_report(&r, &listing_hierarchy()).unwrap_err();
        assert_eq!(v.len(), 4);

        let mut r = flood();
        r.location = GeoPoint::new(0.0, 0.0);
        assert_eq!(validate_report(&r, &listing_hierarchy()), Err(vec![Violation::OutOfCoverage]));
        r.location = GeoPoint::new(91.0, 0.0);
        assert!(matches!(
            validate_report(&r, &listing_hierarchy()).unwrap_err()[0],
            Violation::CoordinateOutOfRange(_)
        ));
    }

    #[test]
    fn transition_examples() {
        let mut r = flood();
        r.state = LifecycleState::Submitted;
        let d = transition(&r, LifecycleState::Distributed).unwrap();
        assert_eq!(d.state, LifecycleState::Distributed);

        r.state = LifecycleState::Resolved;
        assert_eq!(
            transition(&r, LifecycleState::UnderReview),
            Err(TransitionError::IllegalTransition {
                from: LifecycleState::Resolved,
                to: LifecycleState::UnderReview
            })
        );

        r.state = LifecycleState::UnderReview;
        assert_eq!(transition(&r, LifecycleState::Merged), Err(TransitionError::MissingMergeTarget));
        r.merged_into = Some("A7".into());
        let m = transition(&r, LifecycleState::Merged).unwrap();
        assert_eq!(m.state, LifecycleState::Merged);
        assert_eq!(m.merged_into.as_deref(), Some("A7"));
    }

    #[test]
    fn exhaustive_transition_table() {
        use LifecycleState::*;
        let legal = [
            (Submitted, Distributed),
            (Distributed, UnderReview),
            (UnderReview, Verified),
            (UnderReview, Resolved),
            (UnderReview, Merged),
            (Verified, Resolved),
            (Verified, Merged),
        ];
        let mut r = flood();
        r.merged_into = Some("other".into());
        for from in LifecycleState::ALL {
            for to in LifecycleState::ALL {
                r.state = from;
                let ok = transition(&r, to).is_ok();
                assert_eq!(ok, legal.contains(&(from, to)), "{from} -> {to}");
            }
        }
    }

    #[test]
    fn legal_paths_keep_reports_valid() {
        use LifecycleState::*;
        let hierarchy = listing_hierarchy();
        let paths: [&[LifecycleState]; 4] = [
            &[Distributed, UnderReview, Verified, Resolved],
            &[Distributed, UnderReview, Resolved],
            &[Distributed, UnderReview, Verified, Merged],
            &[Distributed, UnderReview, Merged],
        ];
        for path in paths {
            let mut r = flood();
            r.state = Submitted;
            for &step in path {
                if step == Merged {
                    r.merged_into = Some("W".into());
                }
                r = transition(&r, step).unwrap();
                assert_eq!(validate_report(&r, &hierarchy), Ok(()), "{path:?}");
            }
        }
    }

    #[test]
    fn severity_order_total_and_antisymmetric() {
        for (i, a) in Severity::ALL.iter().enumerate() {
            for (j, b) in Severity::ALL.iter().enumerate() {
                assert_eq!(a.cmp(b), i.cmp(&j));
                if a <= b && b <= a {
                    assert_eq!(a, b);
                }
            }
        }
    }
}
