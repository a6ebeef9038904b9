//! Who is responsible for a report and who hears about it.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{is_valid_id, Actor, ActorId, DisasterKind, DisasterReport, Role, Severity};
use crate::geo::AdminHierarchy;

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("unknown region {0:?}")]
    UnknownRegion(String),
    #[error("invalid actor directory: {0}")]
    InvalidDirectory(String),
    #[error("reading actor directory: {0}")]
    Io(#[from] std::io::Error),
}

/// An administrative unit or registered organisation that receives reports.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "unit", content = "id")]
pub enum Recipient {
    Ministry,
    ProvinceOffice(String),
    DistrictOffice(String),
    Ingo(ActorId),
}

impl Recipient {
    pub fn topic(&self) -> String {
        match self {
            Recipient::Ministry => topics::MINISTRY.to_string(),
            Recipient::ProvinceOffice(p) => topics::province(p),
            Recipient::DistrictOffice(d) => topics::district(d),
            Recipient::Ingo(a) => topics::ingo(a),
        }
    }

    /// The recipient an office actor represents, if any.
    pub fn for_actor(actor: &Actor) -> Option<Recipient> {
        match actor.role {
            Role::Ministry => Some(Recipient::Ministry),
            Role::ProvinceOffice => Some(Recipient::ProvinceOffice(actor.unit_id.clone())),
            Role::DistrictOffice => Some(Recipient::DistrictOffice(actor.unit_id.clone())),
            Role::Ingo => Some(Recipient::Ingo(actor.id.clone())),
            Role::Villager => None,
        }
    }
}

impl fmt::Display for Recipient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.topic())
    }
}

/// Push topic names.
pub mod topics {
    use crate::domain::ActorId;

    pub const MINISTRY: &str = "MAF";

    pub fn province(id: &str) -> String {
        format!("PAFO:{id}")
    }

    pub fn district(id: &str) -> String {
        format!("DAFO:{id}")
    }

    pub fn ingo(actor: &ActorId) -> String {
        format!("INGO:{actor}")
    }

    pub fn village(id: &str) -> String {
        format!("village:{id}")
    }

    /// Personal topic of a reporter.
    pub fn actor(actor: &ActorId) -> String {
        format!("actor:{actor}")
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct DirectoryFile {
    actors: Vec<Actor>,
}

/// Registered actors, indexed by id.
#[derive(Debug, Clone, Default)]
pub struct ActorDirectory {
    actors: Vec<Actor>,
    by_id: HashMap<ActorId, usize>,
}

impl ActorDirectory {
    pub fn new(actors: Vec<Actor>) -> Result<Self, RoutingError> {
        let mut by_id = HashMap::new();
        for (i, a) in actors.iter().enumerate() {
            if !is_valid_id(a.id.as_str()) {
                return Err(RoutingError::InvalidDirectory(format!("bad actor id {:?}", a.id)));
            }
            if by_id.insert(a.id.clone(), i).is_some() {
                return Err(RoutingError::InvalidDirectory(format!("duplicate actor {}", a.id)));
            }
        }
        Ok(Self { actors, by_id })
    }

    pub fn from_json(text: &str) -> Result<Self, RoutingError> {
        let file: DirectoryFile =
            serde_json::from_str(text).map_err(|e| RoutingError::InvalidDirectory(e.to_string()))?;
        Self::new(file.actors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RoutingError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DirectoryFile {
            actors: self.actors.clone(),
        })
        .expect("directory serializes")
    }

    pub fn get(&self, id: &ActorId) -> Option<&Actor> {
        self.by_id.get(id).map(|&i| &self.actors[i])
    }

    pub fn actors(&self) -> &[Actor] {
        &self.actors
    }

    pub fn ingos_for_province<'a>(&'a self, province_id: &'a str) -> impl Iterator<Item = &'a Actor> + 'a {
        self.actors
            .iter()
            .filter(move |a| a.role == Role::Ingo && a.unit_id == province_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub responsible: Recipient,
    pub notified: BTreeSet<Recipient>,
    /// Villages that get the alert immediately, before any review.
    pub neighbor_villages: Vec<String>,
    /// Administrative recipients are expected to review; the village fan-out
    /// never waits for that.
    pub requires_review: bool,
}

impl RoutingDecision {
    /// Every push topic the report is distributed to.
    pub fn topics(&self) -> BTreeSet<String> {
        self.notified
            .iter()
            .map(Recipient::topic)
            .chain(self.neighbor_villages.iter().map(|v| topics::village(v)))
            .collect()
    }
}

fn check_regions(report: &DisasterReport, hierarchy: &AdminHierarchy) -> Result<(), RoutingError> {
    if hierarchy.province(&report.province_id).is_none() {
        return Err(RoutingError::UnknownRegion(report.province_id.clone()));
    }
    if hierarchy.province_of_district(&report.district_id) != Some(report.province_id.as_str()) {
        return Err(RoutingError::UnknownRegion(report.district_id.clone()));
    }
    Ok(())
}

/// Escalation table: which tier acts on a kind at a severity.
pub fn escalation_tier(kind: DisasterKind, severity: Severity) -> Role {
    match kind {
        DisasterKind::Infrastructure => Role::DistrictOffice,
        k if k.is_disease() => {
            if severity >= Severity::Severe {
                Role::ProvinceOffice
            } else {
                Role::DistrictOffice
            }
        }
        // Flood and bush fire.
        _ => {
            if severity == Severity::Extreme {
                Role::Ministry
            } else {
                Role::ProvinceOffice
            }
        }
    }
}

/// The unit that has to act on a report.
pub fn responsible_unit(report: &DisasterReport, hierarchy: &AdminHierarchy) -> Result<Recipient, RoutingError> {
    check_regions(report, hierarchy)?;
    Ok(match escalation_tier(report.kind, report.severity) {
        Role::Ministry => Recipient::Ministry,
        Role::ProvinceOffice => Recipient::ProvinceOffice(report.province_id.clone()),
        _ => Recipient::DistrictOffice(report.district_id.clone()),
    })
}

/// All units over the report's region, the province's INGOs, and the
/// villages within `radius_m` of the report.
pub fn notification_set(
    report: &DisasterReport,
    hierarchy: &AdminHierarchy,
    directory: &ActorDirectory,
    radius_m: f64,
) -> Result<RoutingDecision, RoutingError> {
    let responsible = responsible_unit(report, hierarchy)?;
    let mut notified = BTreeSet::from([
        Recipient::Ministry,
        Recipient::ProvinceOffice(report.province_id.clone()),
        Recipient::DistrictOffice(report.district_id.clone()),
    ]);
    notified.extend(
        directory
            .ingos_for_province(&report.province_id)
            .map(|a| Recipient::Ingo(a.id.clone())),
    );
    let neighbor_villages = hierarchy
        .neighbors(report.location, radius_m)
        .into_iter()
        .map(|n| n.village.id)
        .collect();
    Ok(RoutingDecision {
        responsible,
        notified,
        neighbor_villages,
        requires_review: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{KindDetails, LifecycleState};
    use crate::fixtures::{listing_directory, listing_hierarchy, listing_report};
    use crate::geo::DEFAULT_NEIGHBOR_RADIUS_M;

    fn report(kind: DisasterKind, severity: Severity) -> DisasterReport {
        let mut r = listing_report();
        r.kind = kind;
        r.severity = severity;
        r.details = match kind {
            DisasterKind::Flood => KindDetails::Flood { water_level_cm: 10 },
            DisasterKind::BushFire => KindDetails::BushFire { area_estimate_m2: None },
            DisasterKind::Infrastructure => KindDetails::Infrastructure { facility: "bridge".into() },
            d => KindDetails::disease(d, "x".into(), 1).unwrap(),
        };
        r
    }

    #[test]
    fn infrastructure_goes_to_district() {
        let r = report(DisasterKind::Infrastructure, Severity::Moderate);
        assert_eq!(
            responsible_unit(&r, &listing_hierarchy()).unwrap(),
            Recipient::DistrictOffice("Louangprabang".into())
        );
    }

    #[test]
    fn severe_disease_goes_to_province() {
        let r = report(DisasterKind::AnimalDisease, Severity::Extreme);
        assert_eq!(
            responsible_unit(&r, &listing_hierarchy()).unwrap(),
            Recipient::ProvinceOffice("Louangphabang".into())
        );
    }

    #[test]
    fn full_table_matches_hand_written_oracle() {
        use DisasterKind::*;
        use Severity::*;
        // (kind, severity) -> tier, written out row by row.
        let table: [(DisasterKind, [Role; 4]); 6] = [
            (Flood, [Role::ProvinceOffice, Role::ProvinceOffice, Role::ProvinceOffice, Role::Ministry]),
            (BushFire, [Role::ProvinceOffice, Role::ProvinceOffice, Role::ProvinceOffice, Role::Ministry]),
            (Infrastructure, [Role::DistrictOffice; 4]),
            (HumanDisease, [Role::DistrictOffice, Role::DistrictOffice, Role::ProvinceOffice, Role::ProvinceOffice]),
            (AnimalDisease, [Role::DistrictOffice, Role::DistrictOffice, Role::ProvinceOffice, Role::ProvinceOffice]),
            (PlantDisease, [Role::DistrictOffice, Role::DistrictOffice, Role::ProvinceOffice, Role::ProvinceOffice]),
        ];
        let h = listing_hierarchy();
        for (kind, row) in table {
            for (severity, tier) in [Minor, Moderate, Severe, Extreme].into_iter().zip(row) {
                let expected = match tier {
                    Role::Ministry => Recipient::Ministry,
                    Role::ProvinceOffice => Recipient::ProvinceOffice("Louangphabang".into()),
                    _ => Recipient::DistrictOffice("Louangprabang".into()),
                };
                assert_eq!(responsible_unit(&report(kind, severity), &h).unwrap(), expected, "{kind} {severity}");
            }
        }
    }

    #[test]
    fn unknown_region() {
        let mut r = report(DisasterKind::Flood, Severity::Minor);
        r.district_id = "Nowhere".into();
        assert!(matches!(
            responsible_unit(&r, &listing_hierarchy()),
            Err(RoutingError::UnknownRegion(d)) if d == "Nowhere"
        ));
        // district from another province
        r.district_id = "Xaysetha".into();
        assert!(responsible_unit(&r, &listing_hierarchy()).is_err());
    }

    #[test]
    fn notification_with_and_without_ingo() {
        let h = listing_hierarchy();
        let r = report(DisasterKind::Flood, Severity::Moderate);
        let with = ActorDirectory::new(listing_directory()).unwrap();
        let decision = notification_set(&r, &h, &with, DEFAULT_NEIGHBOR_RADIUS_M).unwrap();
        let expected: BTreeSet<Recipient> = [
            Recipient::Ministry,
            Recipient::ProvinceOffice("Louangphabang".into()),
            Recipient::DistrictOffice("Louangprabang".into()),
            Recipient::Ingo(ActorId::new("ingo-lpb")),
        ]
        .into();
        assert_eq!(decision.notified, expected);
        assert!(decision.notified.contains(&decision.responsible));

        let without = ActorDirectory::new(
            listing_directory()
                .into_iter()
                .filter(|a| a.role != Role::Ingo)
                .collect(),
        )
        .unwrap();
        let decision = notification_set(&r, &h, &without, DEFAULT_NEIGHBOR_RADIUS_M).unwrap();
        assert_eq!(decision.notified.len(), 3);
    }

    #[test]
    fn neighbor_villages_ignore_review_state() {
        let h = listing_hierarchy();
        let dir = ActorDirectory::new(listing_directory()).unwrap();
        let mut r = report(DisasterKind::Flood, Severity::Moderate);
        r.state = LifecycleState::Submitted;
        let fresh = notification_set(&r, &h, &dir, DEFAULT_NEIGHBOR_RADIUS_M).unwrap();
        r.state = LifecycleState::Verified;
        let verified = notification_set(&r, &h, &dir, DEFAULT_NEIGHBOR_RADIUS_M).unwrap();
        assert_eq!(fresh.neighbor_villages, verified.neighbor_villages);
        // Haversine distances computed offline: Sangkalok 64.7 m, Xiengmen
        // 5779 m, Phonsavan 11036 m (outside 10 km).
        assert_eq!(fresh.neighbor_villages, ["Ban Sangkalok", "Ban Xiengmen"]);
        assert!(fresh.topics().contains("village:Ban Xiengmen"));
    }

    #[test]
    fn directory_rejects_duplicates() {
        let mut actors = listing_directory();
        actors.push(actors[0].clone());
        assert!(ActorDirectory::new(actors).is_err());
        let dir = ActorDirectory::new(listing_directory()).unwrap();
        let again = ActorDirectory::from_json(&dir.to_json()).unwrap();
        assert_eq!(again.actors(), dir.actors());
    }
}
