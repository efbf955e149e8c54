mod common;

use axum::http::StatusCode;
use btties_core::WardGraph;
use common::{call, call_raw, create, definition, judge, open, submit};
use serde_json::{json, Value};

#[tokio::test]
async fn creates_small_and_county_sized_studies() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);

    let id = create(&app, definition(2, 0)).await;
    let (status, body) = call(&app, "GET", &format!("/studies/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "active");
    assert_eq!(body["n_wards"], 2);
    assert_eq!(body["target_comparisons"], 30);

    let (graph, regions) = WardGraph::surrogate_county();
    let wards: Vec<Value> = graph
        .labels()
        .iter()
        .zip(&regions)
        .map(|(l, r)| json!({ "label": l, "region": r }))
        .collect();
    let id = create(&app, json!({ "name": "county", "wards": wards })).await;
    let (_, body) = call(&app, "GET", &format!("/studies/{id}"), None).await;
    assert_eq!(body["n_wards"], 95);
    assert_eq!(body["regions"].as_array().unwrap().len(), 4);

    let (status, body) = call(&app, "GET", "/studies", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn rejects_invalid_definitions() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let duplicate = json!({ "name": "x", "wards": [
        { "label": "A", "region": "R" }, { "label": "A", "region": "R" }
    ]});
    let (status, body) = call(&app, "POST", "/studies", Some(duplicate)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["message"].as_str().unwrap().contains("duplicate"));

    let empty = json!({ "name": "x", "wards": [] });
    assert_eq!(call(&app, "POST", "/studies", Some(empty)).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let bad_edge = json!({ "name": "x", "wards": [{ "label": "A", "region": "R" }], "adjacency": [["A", "Z"]] });
    assert_eq!(call(&app, "POST", "/studies", Some(bad_edge)).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let no_region = json!({ "name": "x", "wards": [{ "label": "A", "region": "" }] });
    assert_eq!(call(&app, "POST", "/studies", Some(no_region)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn creation_is_idempotent_per_client_token() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let mut def = definition(3, 0);
    def["client_token"] = json!("token-1");
    let (first, a) = call(&app, "POST", "/studies", Some(def.clone())).await;
    let (second, b) = call(&app, "POST", "/studies", Some(def.clone())).await;
    assert_eq!(first, StatusCode::CREATED);
    assert_eq!(second, StatusCode::OK);
    assert_eq!(a["id"], b["id"]);

    def["name"] = json!("something else");
    assert_eq!(call(&app, "POST", "/studies", Some(def)).await.0, StatusCode::CONFLICT);

    // Without a token, identical payloads create distinct studies.
    let x = create(&app, definition(3, 0)).await;
    let y = create(&app, definition(3, 0)).await;
    assert_ne!(x, y);
}

#[tokio::test]
async fn judge_registration_validates_regions() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let id = create(&app, definition(3, 2)).await;
    let uri = format!("/studies/{id}/judges");
    let (status, _) = call(&app, "POST", &uri, Some(json!({ "familiar_regions": [] }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "POST", &uri, Some(json!({ "familiar_regions": ["East"] }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let jid = judge(&app, &id, &["North", "North"]).await;
    let (status, body) = call(&app, "GET", &format!("/studies/{id}/judges/{jid}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["familiar_regions"], json!(["North"]));
    assert_eq!(body["familiar_wards"], 3);
    assert_eq!(body["comparisons_made"], 0);

    let missing = uuid::Uuid::new_v4();
    assert_eq!(call(&app, "POST", &format!("/studies/{missing}/judges"), Some(json!({ "familiar_regions": ["North"] }))).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", &format!("/studies/{id}/judges/{missing}"), None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn next_pair_stays_in_familiar_wards() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let id = create(&app, definition(2, 1)).await;
    let north = judge(&app, &id, &["North"]).await;
    let south = judge(&app, &id, &["South"]).await;

    for _ in 0..50 {
        let (status, body) = call(&app, "GET", &format!("/studies/{id}/judges/{north}/next-pair"), None).await;
        assert_eq!(status, StatusCode::OK);
        let mut pair = [body["left"]["label"].as_str().unwrap(), body["right"]["label"].as_str().unwrap()];
        pair.sort();
        assert_eq!(pair, ["A1", "A2"]);
        assert!(body["presentation_id"].is_string());
    }
    let (status, body) = call(&app, "GET", &format!("/studies/{id}/judges/{south}/next-pair"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "no_pair_available");
}

#[tokio::test]
async fn judgements_fold_into_export() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let id = create(&app, definition(3, 1)).await;
    let jid = judge(&app, &id, &["North"]).await;

    let (status, ack) = submit(&app, &id, &jid, "A1", "A2", "tie").await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(ack["comparisons_made"], 1);
    let (_, export) = call(&app, "GET", &format!("/studies/{id}/export"), None).await;
    assert_eq!(export["ties"][0][1], 1);
    assert_eq!(export["ties"][1][0], 1);
    assert_eq!(export["tie_events"], 1);

    let (_, ack) = submit(&app, &id, &jid, "A2", "A3", "skip").await;
    assert_eq!(ack["comparisons_made"], 2);
    let (_, after_skip) = call(&app, "GET", &format!("/studies/{id}/export"), None).await;
    assert_eq!(after_skip["wins"], export["wins"]);
    assert_eq!(after_skip["ties"], export["ties"]);
    assert_eq!(after_skip["skips"], 1);

    submit(&app, &id, &jid, "A3", "A1", "i").await;
    submit(&app, &id, &jid, "A3", "A1", "j").await;
    let (_, export) = call(&app, "GET", &format!("/studies/{id}/export"), None).await;
    assert_eq!(export["wins"][2][0], 1);
    assert_eq!(export["wins"][0][2], 1);
    assert_eq!(export["total_events"], 4);
    assert_eq!(export["comparisons"], 3);
    assert_eq!(export["tie_percentage"], "33.3%");

    let (_, judge_body) = call(&app, "GET", &format!("/studies/{id}/judges/{jid}"), None).await;
    assert_eq!(judge_body["comparisons_made"], 4);

    let (status, csv) = call_raw(&app, "GET", &format!("/studies/{id}/export?format=csv"), None).await;
    assert_eq!(status, StatusCode::OK);
    let csv = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "judge_id,ward_i,ward_j,outcome,timestamp");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].contains(",A1,A2,tie,"));

    let (status, _) = call(&app, "GET", &format!("/studies/{id}/export?format=xml"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn judgement_validation() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let id = create(&app, definition(2, 2)).await;
    let jid = judge(&app, &id, &["North"]).await;
    assert_eq!(submit(&app, &id, &jid, "A1", "B1", "i").await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(submit(&app, &id, &jid, "A1", "A1", "i").await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(submit(&app, &id, &jid, "A1", "Q9", "i").await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let stranger = uuid::Uuid::new_v4().to_string();
    assert_eq!(submit(&app, &id, &stranger, "A1", "A2", "i").await.0, StatusCode::NOT_FOUND);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/studies/{id}/judges/{jid}/judgements"),
        Some(json!({ "ward_i": "A1", "ward_j": "A2", "outcome": "maybe" })),
    )
    .await;
    assert!(status.is_client_error());
    let (_, export) = call(&app, "GET", &format!("/studies/{id}/export"), None).await;
    assert_eq!(export["total_events"], 0);
    assert_eq!(export["tie_percentage"], "0.0%");
}

#[tokio::test]
async fn double_submit_records_once() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let id = create(&app, definition(3, 0)).await;
    let jid = judge(&app, &id, &["North"]).await;
    let (_, pair) = call(&app, "GET", &format!("/studies/{id}/judges/{jid}/next-pair"), None).await;
    let body = json!({
        "ward_i": pair["left"]["label"],
        "ward_j": pair["right"]["label"],
        "outcome": "tie",
        "idempotency_key": pair["presentation_id"],
    });
    let uri = format!("/studies/{id}/judges/{jid}/judgements");
    let (s1, a1) = call(&app, "POST", &uri, Some(body.clone())).await;
    let (s2, a2) = call(&app, "POST", &uri, Some(body.clone())).await;
    assert_eq!((s1, s2), (StatusCode::CREATED, StatusCode::OK));
    assert_eq!(a1["seq"], a2["seq"]);
    assert_eq!(a2["duplicate"], true);
    assert_eq!(a2["comparisons_made"], 1);

    let mut altered = body.clone();
    altered["outcome"] = json!("i");
    assert_eq!(call(&app, "POST", &uri, Some(altered)).await.0, StatusCode::CONFLICT);

    let (_, export) = call(&app, "GET", &format!("/studies/{id}/export"), None).await;
    assert_eq!(export["total_events"], 1);
}

#[tokio::test]
async fn wards_endpoint_serves_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let square = json!({ "type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]] });
    let def = json!({
        "name": "geo",
        "wards": [
            { "label": "A", "region": "R", "geometry": square },
            { "label": "B", "region": "R" },
            { "label": "C", "region": "S" },
        ],
        "geojson": { "type": "FeatureCollection", "features": [
            { "type": "Feature", "properties": { "name": "B" }, "geometry": { "type": "Point", "coordinates": [2, 2] } },
            { "type": "Feature", "properties": { "name": "elsewhere" }, "geometry": null },
        ]},
    });
    let id = create(&app, def).await;
    let (status, body) = call(&app, "GET", &format!("/studies/{id}/wards"), None).await;
    assert_eq!(status, StatusCode::OK);
    let features = body["geojson"]["features"].as_array().unwrap();
    assert_eq!(features.len(), 3);
    assert_eq!(features[0]["geometry"], square);
    assert_eq!(features[1]["geometry"]["type"], "Point");
    assert!(features[2]["geometry"].is_null());
    assert_eq!(features[2]["properties"]["region"], "S");
    assert_eq!(body["regions"], json!(["R", "S"]));

    let jid = judge(&app, &id, &["R"]).await;
    let (_, pair) = call(&app, "GET", &format!("/studies/{id}/judges/{jid}/next-pair"), None).await;
    let a_card = if pair["left"]["label"] == "A" { &pair["left"] } else { &pair["right"] };
    assert_eq!(a_card["geometry"], square);
}

#[tokio::test]
async fn health_and_unknown_routes() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path(), 0);
    let (status, body) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    let missing = uuid::Uuid::new_v4();
    assert_eq!(call(&app, "GET", &format!("/studies/{missing}"), None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/studies/not-a-uuid", None).await.0, StatusCode::BAD_REQUEST);
}
