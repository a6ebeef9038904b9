//! End-to-end runs through the public API: demo configuration, CAP import,
//! routing, verification, and recovery from disk.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use chrono::{TimeZone, Utc};

use disaster_core::cap::{parse_cap, MsgType};
use disaster_core::config::Config;
use disaster_core::domain::{ActorId, DisasterKind, LifecycleState};
use disaster_core::fixtures::LISTING_XML;
use disaster_core::server::{replay, Action, AlertServer, ManualClock, ServerError};

fn demo_config(dir: &Path) -> Config {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo/server.toml");
    let mut config = Config::load(&demo).expect("demo config loads");
    config.event_log = Some(dir.join("nested/events.log"));
    config.snapshot = Some(dir.join("nested/snapshot.json"));
    config.snapshot_every = 3;
    config
}

fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::with_step(
        Utc.with_ymd_and_hms(2013, 10, 25, 2, 0, 0).unwrap(),
        chrono::Duration::seconds(1),
    ))
}

#[test]
fn imported_alert_is_routed_verified_and_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let config = demo_config(dir.path());
    let server = AlertServer::from_config(&config, clock()).unwrap();

    let id = server.import_cap(LISTING_XML.as_bytes(), Some("listing")).unwrap();
    assert_eq!(server.import_cap(LISTING_XML.as_bytes(), Some("listing")).unwrap(), id);
    let report = server.report(&id).unwrap();
    assert_eq!(report.kind, DisasterKind::PlantDisease);
    assert_eq!(report.state, LifecycleState::Distributed);

    // Extreme plant disease goes to the province office; everyone in the
    // province hears about it.
    let topics: BTreeSet<String> = server
        .state()
        .topics
        .into_iter()
        .filter(|(_, log)| log.iter().any(|m| m.summary.report_id == id))
        .map(|(t, _)| t)
        .collect();
    for t in ["MAF", "PAFO:Louangphabang", "DAFO:Louangprabang", "INGO:ingo-lpb"] {
        assert!(topics.contains(t), "{t} missing from {topics:?}");
    }
    assert!(!topics.contains("PAFO:Vientiane"));

    let villager = ActorId::new("villager-2");
    server.verify(&id, &villager, "saw it too").unwrap();
    assert_eq!(server.report(&id).unwrap().state, LifecycleState::Distributed);
    assert!(matches!(server.verify(&id, &villager, "again"), Err(ServerError::DuplicateVerification(_))));
    server.verify(&id, &ActorId::new("pafo-lpb"), "confirmed").unwrap();
    let score = server.reliability_score(&id).unwrap();
    assert_eq!((score.official_count, score.user_count, score.score), (1, 1, 4.0));
    assert_eq!(server.report(&id).unwrap().state, LifecycleState::Verified);
    assert!(server.topic_log("actor:89").iter().any(|m| m.summary.report_id == id));

    server.process_report(&id, &ActorId::new("dafo-lpb"), Action::Resolve).unwrap();
    let exported = parse_cap(&server.export_cap(&id, None).unwrap()).unwrap();
    assert_eq!(exported.msg_type, MsgType::Update);

    let live = server.snapshot_bytes();
    assert_eq!(replay(&server.events()).unwrap().snapshot_bytes(), live);
    drop(server);
    assert!(dir.path().join("nested/snapshot.json").exists());
    let reopened = AlertServer::from_config(&config, clock()).unwrap();
    assert_eq!(reopened.snapshot_bytes(), live);
    assert!(matches!(
        reopened.verify(&id, &ActorId::new("dafo-lpb"), "late"),
        Err(ServerError::ReportClosed(_))
    ));
}
