mod common;

use std::fs::OpenOptions;
use std::io::Write;

use btties_service::app::{RegisterJudge, SubmitJudgement};
use btties_service::store::{LOG_FILE, SNAPSHOT_FILE};
use btties_service::{App, ServiceConfig, StudyDefinition};
use btties_core::dataset::Outcome;
use common::open;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uuid::Uuid;

fn study(app: &App, wards: usize) -> Uuid {
    let def: StudyDefinition = serde_json::from_value(common::definition(wards, wards)).unwrap();
    app.create_study(def).unwrap().0.id
}

/// Records `n` random judgements from two judges, one per region.
fn fill(app: &App, id: Uuid, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let judges: Vec<Uuid> = ["North", "South"]
        .iter()
        .map(|r| {
            app.register_judge(id, RegisterJudge { familiar_regions: vec![r.to_string()] })
                .unwrap()
                .judge
                .id
        })
        .collect();
    for k in 0..n {
        let jid = judges[k % 2];
        let pair = app.next_pair(id, jid).unwrap();
        let outcome = [Outcome::I, Outcome::J, Outcome::Tie, Outcome::Skip][rng.random_range(0..4)];
        app.record_judgement(
            id,
            jid,
            SubmitJudgement {
                ward_i: pair.left.label,
                ward_j: pair.right.label,
                outcome,
                idempotency_key: Some(pair.presentation_id.to_string()),
            },
        )
        .unwrap();
    }
}

#[test]
fn replay_reproduces_exports_and_counters() {
    for compact_every in [0, 7] {
        let dir = tempfile::tempdir().unwrap();
        let app = open(dir.path(), compact_every);
        let id = study(&app, 4);
        fill(&app, id, 60, 1);
        let before = app.export(id).unwrap();
        let csv_before = app.export_csv(id).unwrap();
        let state_before = app.state(id).unwrap();
        drop(app);

        let snapshot = dir.path().join("studies").join(id.to_string()).join(SNAPSHOT_FILE);
        assert_eq!(snapshot.exists(), compact_every > 0);

        let app = open(dir.path(), compact_every);
        assert_eq!(app.export(id).unwrap(), before);
        assert_eq!(app.export_csv(id).unwrap(), csv_before);
        let state_after = app.state(id).unwrap();
        assert_eq!(*state_after, *state_before);
        for judge in state_after.judges.values() {
            let events = state_after.events.iter().filter(|e| e.judge_id == judge.id).count() as u64;
            assert_eq!(judge.comparisons_made, events);
        }

        // Keys survive the restart too.
        let last = state_after.events.last().unwrap().clone();
        let ack = app
            .record_judgement(
                id,
                last.judge_id,
                SubmitJudgement {
                    ward_i: state_after.study.definition.wards[last.ward_i].label.clone(),
                    ward_j: state_after.study.definition.wards[last.ward_j].label.clone(),
                    outcome: last.outcome,
                    idempotency_key: last.idempotency_key.clone(),
                },
            )
            .unwrap();
        assert!(ack.duplicate);
        assert_eq!(ack.seq, last.seq);
    }
}

#[test]
fn log_lines_covered_by_the_snapshot_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let id = study(&app, 3);
    fill(&app, id, 20, 2);
    let study_dir = dir.path().join("studies").join(id.to_string());
    let full_log = std::fs::read(study_dir.join(LOG_FILE)).unwrap();
    let expected = app.export(id).unwrap();
    drop(app);

    // Crash after the snapshot rename but before the log was emptied.
    let app = open(dir.path(), 1);
    fill(&app, id, 0, 3);
    drop(app);
    let app = open(dir.path(), 0);
    let with_judges = app.export(id).unwrap();
    assert_eq!(with_judges.events, expected.events);
    drop(app);
    assert!(study_dir.join(SNAPSHOT_FILE).exists());
    std::fs::write(study_dir.join(LOG_FILE), &full_log).unwrap();
    let app = open(dir.path(), 0);
    assert_eq!(app.export(id).unwrap().events, expected.events);
    assert_eq!(app.state(id).unwrap().judges.len(), 4);
}

#[test]
fn torn_trailing_line_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let id = study(&app, 3);
    fill(&app, id, 10, 4);
    let expected = app.export(id).unwrap();
    drop(app);

    let log = dir.path().join("studies").join(id.to_string()).join(LOG_FILE);
    let mut f = OpenOptions::new().append(true).open(&log).unwrap();
    f.write_all(br#"{"type":"judgement_recorded","event":{"seq":99"#).unwrap();
    drop(f);

    let app = open(dir.path(), 0);
    assert_eq!(app.export(id).unwrap(), expected);
    // Appends after recovery land on a clean line.
    fill(&app, id, 2, 5);
    drop(app);
    let app = open(dir.path(), 0);
    assert_eq!(app.export(id).unwrap().total_events, 12);
}

#[test]
fn corrupt_middle_line_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let id = study(&app, 3);
    fill(&app, id, 3, 6);
    drop(app);
    let log = dir.path().join("studies").join(id.to_string()).join(LOG_FILE);
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "not json";
    std::fs::write(&log, lines.join("\n") + "\n").unwrap();
    assert!(App::open(ServiceConfig::new(dir.path())).is_err());
}
