//! Sample data: a small Louangphabang hierarchy and the matching CAP alert.
//! Used by tests and the demo data.

use chrono::{TimeZone, Utc};

use crate::domain::{Actor, ActorId, DisasterKind, DisasterReport, GeoPoint, KindDetails, LifecycleState, Role, Severity};
use crate::geo::{AdminHierarchy, District, Kumban, Province, Village};

/// A plant disease report exported as CAP 1.1.
pub const LISTING_XML: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<alert xmlns="urn:oasis:names:tc:emergency:cap:1.1">
   <identifier>7</identifier>
   <sender>89</sender>
   <sent>2013-09-25T07:05:02.917-05:00</sent>
   <status>Actual</status>
   <msgType>Alert</msgType>
   <source>MAF office; +856 1234567; MAF</source>
   <scope>Public</scope>
   <info>
      <language>en-US</language>
      <category>Health</category>
      <event>I have seen the same thing in another 
             village nearby last year</event>
      <responseType>None</responseType>
      <urgency>Future</urgency>
      <severity>Extreme</severity>
      <certainty>Possible</certainty>
      <effective>2013-09-24T19:00:00-05:00
      </effective>
      <parameter>
         <valueName>location</valueName>
         <value>19.845519,102.078652</value>
      </parameter>
      <parameter>
         <valueName>disasterType</valueName>
         <value>PlantDiseaseInfo</value>
      </parameter>
      <parameter>
         <valueName>province</valueName>
         <value>Louangphabang</value>
      </parameter>
      <parameter>
         <valueName>district</valueName>
         <value>Louangprabang</value>
      </parameter>
      <parameter>
         <valueName>kumban</valueName>
         <value>Sangkalok</value>
      </parameter>
   </info>
</alert>
"#;

/// Axis-aligned rectangle ring, counter-clockwise from the south-west corner.
pub fn rect(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Vec<GeoPoint> {
    vec![
        GeoPoint::new(min_lat, min_lon),
        GeoPoint::new(min_lat, max_lon),
        GeoPoint::new(max_lat, max_lon),
        GeoPoint::new(max_lat, min_lon),
    ]
}

fn village(id: &str, lat: f64, lon: f64) -> Village {
    Village {
        id: id.to_string(),
        location: GeoPoint::new(lat, lon),
    }
}

/// Louangphabang with two districts, plus a second province to the south.
pub fn listing_hierarchy() -> AdminHierarchy {
    let louangphabang = Province {
        id: "Louangphabang".into(),
        rings: vec![rect(19.0, 101.5, 21.0, 103.0)],
        districts: vec![
            District {
                id: "Louangprabang".into(),
                rings: vec![rect(19.5, 101.9, 20.2, 102.4)],
                kumbans: vec![
                    Kumban {
                        id: "Sangkalok".into(),
                        rings: vec![rect(19.7, 102.0, 19.95, 102.2)],
                        villages: vec![
                            village("Ban Sangkalok", 19.8460, 102.0790),
                            village("Ban Xiengmen", 19.8800, 102.1200),
                            village("Ban Phonsavan", 19.7500, 102.0500),
                        ],
                    },
                    Kumban {
                        id: "Pakxuang".into(),
                        rings: vec![rect(20.0, 102.2, 20.2, 102.4)],
                        villages: vec![village("Ban Pakxuang", 20.1, 102.3)],
                    },
                ],
            },
            District {
                id: "Chompet".into(),
                rings: vec![rect(19.5, 101.5, 20.2, 101.9)],
                kumbans: vec![Kumban {
                    id: "Chomphet".into(),
                    rings: vec![rect(19.6, 101.6, 19.9, 101.85)],
                    villages: vec![village("Ban Chomphet", 19.8, 101.8)],
                }],
            },
        ],
    };
    let vientiane = Province {
        id: "Vientiane".into(),
        rings: vec![rect(17.5, 102.0, 18.5, 103.0)],
        districts: vec![District {
            id: "Xaysetha".into(),
            rings: vec![rect(17.5, 102.0, 18.5, 103.0)],
            kumbans: vec![],
        }],
    };
    AdminHierarchy::new(vec![louangphabang, vientiane]).expect("fixture hierarchy is valid")
}

/// The ministry actor that sent the sample alert.
pub fn listing_sender() -> Actor {
    Actor {
        id: ActorId::new("89"),
        role: Role::Ministry,
        unit_id: "MAF".into(),
        phone: "+856 1234567".into(),
    }
}

/// Offices for the sample hierarchy plus one villager.
pub fn listing_directory() -> Vec<Actor> {
    let actor = |id: &str, role, unit: &str, phone: &str| Actor {
        id: ActorId::new(id),
        role,
        unit_id: unit.into(),
        phone: phone.into(),
    };
    vec![
        listing_sender(),
        actor("pafo-lpb", Role::ProvinceOffice, "Louangphabang", "+856 71 212 000"),
        actor("dafo-lpb", Role::DistrictOffice, "Louangprabang", "+856 71 212 100"),
        actor("dafo-chompet", Role::DistrictOffice, "Chompet", "+856 71 212 200"),
        actor("pafo-vte", Role::ProvinceOffice, "Vientiane", "+856 21 000 000"),
        actor("dafo-xaysetha", Role::DistrictOffice, "Xaysetha", "+856 21 000 100"),
        actor("ingo-lpb", Role::Ingo, "Louangphabang", "+856 20 777 777"),
        actor("villager-1", Role::Villager, "Ban Sangkalok", "+856 20 123 456"),
        actor("villager-2", Role::Villager, "Ban Xiengmen", "+856 20 123 457"),
    ]
}

/// The plant disease report behind [`LISTING_XML`].
pub fn listing_report() -> DisasterReport {
    DisasterReport {
        id: "7".into(),
        kind: DisasterKind::PlantDisease,
        details: KindDetails::PlantDisease {
            disease_name: "rice blast".into(),
            affected_count: 12,
        },
        location: GeoPoint::new(19.845519, 102.078652),
        geometry: None,
        province_id: "Louangphabang".into(),
        district_id: "Louangprabang".into(),
        kumban_id: Some("Sangkalok".into()),
        reporter: ActorId::new("villager-1"),
        reporter_phone: "+856 20 123 456".into(),
        description: "I have seen the same thing in another village nearby last year".into(),
        created_at: Utc.with_ymd_and_hms(2013, 9, 25, 0, 0, 0).unwrap(),
        state: LifecycleState::Submitted,
        severity: Severity::Extreme,
        merged_into: None,
        attachments: Vec::new(),
        extensions: Vec::new(),
    }
}
