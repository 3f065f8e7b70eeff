#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::sync::Arc;

use serde_json::{json, Value};

use kgforge_core::backend::BackendError;
use kgforge_core::pipeline::{Backends, Pipeline, PipelineConfig};
use kgforge_core::relation::{ExtractedRelation, ExtractorBackend};

use common::*;
use support::*;

const WEIMAR_REPUBLIC: &str = "http://www.wikidata.org/entity/Q41304";

fn fixture_server(dir: &std::path::Path) -> TestServer {
    let pipeline = Arc::new(reference_pipeline(Arc::new(kb()), PipelineConfig::default()));
    TestServer::start(pipeline, dir, 1000)
}

fn construct(server: &TestServer, text: &str) -> Value {
    let r = post(&format!("{}/api/construct", server.base), &json!({ "text": text }).to_string());
    assert_eq!(r.status, 200, "{}", r.body);
    r.json()
}

fn edit(server: &TestServer, id: &str, revision: u64, edit: Value) -> Reply {
    put(&format!("{}/api/graph/{id}", server.base), &json!({ "revision": revision, "edit": edit }).to_string())
}

fn session_id(payload: &Value) -> String {
    payload["sessionId"].as_str().unwrap().to_string()
}

#[test]
fn construct_returns_graph_and_overlay_data() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let p = construct(&server, FIXTURE_TEXT);
    assert_eq!(p["revision"], 0);
    let triples = p["graph"]["triples"].as_array().unwrap();
    assert_eq!(triples.len(), 1);
    assert_eq!(triples[0]["subject"], WEIMAR);
    assert_eq!(triples[0]["predicate"]["iri"], COUNTRY);
    assert_eq!(triples[0]["predicate"]["label"], "country");
    assert_eq!(triples[0]["object"], GERMANY);
    let mentions = p["mentions"].as_array().unwrap();
    let spans: Vec<(u64, u64, &str)> = mentions
        .iter()
        .map(|m| (m["start"].as_u64().unwrap(), m["end"].as_u64().unwrap(), m["nodeId"].as_str().unwrap()))
        .collect();
    assert_eq!(spans, [(0, 6, WEIMAR), (20, 27, GERMANY)]);
    let weimar: Vec<&str> =
        mentions[0]["candidates"].as_array().unwrap().iter().map(|c| c["iri"].as_str().unwrap()).collect();
    assert_eq!(weimar, [WEIMAR, WEIMAR_REPUBLIC]);
    let node_ids: Vec<&str> =
        p["graph"]["nodes"].as_array().unwrap().iter().map(|n| n["id"].as_str().unwrap()).collect();
    assert_eq!(node_ids, [WEIMAR, GERMANY]);
}

#[test]
fn identical_requests_get_distinct_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let a = construct(&server, FIXTURE_TEXT);
    let b = construct(&server, FIXTURE_TEXT);
    assert_ne!(a["sessionId"], b["sessionId"]);
    assert_eq!(a["graph"], b["graph"]);
    assert_eq!(a["mentions"], b["mentions"]);
}

#[test]
fn bad_construct_requests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let url = format!("{}/api/construct", server.base);
    for body in ["", "{}", "not json", r#"{"text": ""}"#, r#"{"text": "   "}"#] {
        let r = post(&url, body);
        assert_eq!(r.status, 400, "{body:?}");
        assert!(r.json()["error"].is_string());
    }
    let long = json!({ "text": "Weimar ".repeat(200) }).to_string();
    assert_eq!(post(&url, &long).status, 400);
}

#[test]
fn candidate_search() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let found = get(&format!("{}/api/entities?q=Germany", server.base));
    assert_eq!(found.status, 200);
    let list = found.json();
    assert_eq!(list[0]["iri"], GERMANY);
    assert_eq!(list[0]["label"], "Germany");
    assert!(list.as_array().unwrap().len() <= 20);
    assert!(list.as_array().unwrap().iter().all(|c| c["score"].as_f64().unwrap() >= 20.0));
    assert_eq!(get(&format!("{}/api/entities?q=zzzz", server.base)).json(), json!([]));
    assert_eq!(get(&format!("{}/api/entities", server.base)).status, 400);
    assert_eq!(get(&format!("{}/api/entities?q=", server.base)).status, 400);
    let props = get(&format!("{}/api/properties?q=country", server.base)).json();
    assert_eq!(props[0]["iri"], COUNTRY);
    assert_eq!(get(&format!("{}/api/properties", server.base)).status, 400);
}

#[test]
fn relink_rewrites_triples() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let id = session_id(&construct(&server, FIXTURE_TEXT));
    let r = edit(
        &server,
        &id,
        0,
        json!({ "op": "relink-mention", "mention": { "start": 0, "end": 6 }, "iri": WEIMAR_REPUBLIC }),
    );
    assert_eq!(r.status, 200, "{}", r.body);
    let p = r.json();
    assert_eq!(p["revision"], 1);
    assert_eq!(p["graph"]["triples"][0]["subject"], WEIMAR_REPUBLIC);
    assert_eq!(p["mentions"][0]["selected"], 1);
    assert_eq!(get(&format!("{}/api/graph/{id}", server.base)).json(), p);
    let nt = get(&format!("{}/api/graph/{id}/ntriples", server.base)).body;
    assert_eq!(nt, FIXTURE_LINE.replace(WEIMAR, WEIMAR_REPUBLIC));
}

#[test]
fn relink_to_unlinked_exports_a_blank_node() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let id = session_id(&construct(&server, FIXTURE_TEXT));
    let p = edit(&server, &id, 0, json!({ "op": "relink-mention", "mention": { "start": 20, "end": 27 } })).json();
    assert_eq!(p["mentions"][1]["status"], "unlinked");
    let nt = get(&format!("{}/api/graph/{id}/ntriples", server.base)).body;
    assert_eq!(nt, format!("<{WEIMAR}> <{COUNTRY}> _:b0 .\n"));
    valid_ntriples(&nt).unwrap();
}

#[test]
fn stale_revision_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let id = session_id(&construct(&server, FIXTURE_TEXT));
    let delete = json!({ "op": "delete-relation", "triple": 0 });
    assert_eq!(
        edit(
            &server,
            &id,
            0,
            json!({ "op": "relink-mention", "mention": { "start": 0, "end": 6 }, "iri": WEIMAR_REPUBLIC })
        )
        .status,
        200
    );
    let before = get(&format!("{}/api/graph/{id}", server.base)).body;
    let r = edit(&server, &id, 0, delete.clone());
    assert_eq!(r.status, 409);
    assert_eq!(get(&format!("{}/api/graph/{id}", server.base)).body, before);
    assert_eq!(edit(&server, &id, 1, delete).status, 200);
}

#[test]
fn delete_entity_cascades() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let id = session_id(&construct(&server, FIXTURE_TEXT));
    let p = edit(&server, &id, 0, json!({ "op": "delete-entity", "mention": { "start": 0, "end": 6 } })).json();
    assert_eq!(p["graph"]["triples"], json!([]));
    assert_eq!(p["mentions"].as_array().unwrap().len(), 1);
    let r = get(&format!("{}/api/graph/{id}/ntriples", server.base));
    assert_eq!((r.status, r.body.as_str()), (200, ""));
}

#[test]
fn authoring_entities_and_relations() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let id = session_id(&construct(&server, FIXTURE_TEXT));
    let city = json!({ "start": 12, "end": 16 });
    let p = edit(&server, &id, 0, json!({ "op": "add-entity", "span": city })).json();
    assert_eq!(p["mentions"][1]["surface"], "city");
    assert_eq!(p["mentions"][1]["status"], "unlinked");
    let r = edit(
        &server,
        &id,
        1,
        json!({ "op": "add-relation", "subject": { "start": 0, "end": 6 }, "object": city, "property": "P31" }),
    );
    assert_eq!(r.status, 200, "{}", r.body);
    let nt = get(&format!("{}/api/graph/{id}/ntriples", server.base)).body;
    let instance = "http://www.wikidata.org/prop/direct/P31";
    assert_eq!(nt, format!("{FIXTURE_LINE}<{WEIMAR}> <{instance}> _:b0 .\n"));
    let linked = edit(&server, &id, 2, json!({ "op": "add-entity", "span": { "start": 0, "end": 2 }, "iri": GERMANY }));
    assert_eq!(linked.status, 422);
}

#[test]
fn invalid_edits_are_unprocessable() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let id = session_id(&construct(&server, FIXTURE_TEXT));
    let before = get(&format!("{}/api/graph/{id}", server.base)).body;
    for bad in [
        json!({ "op": "relink-mention", "mention": { "start": 1, "end": 6 }, "iri": WEIMAR }),
        json!({ "op": "relink-mention", "mention": { "start": 0, "end": 6 }, "iri": "http://www.wikidata.org/entity/Q999999" }),
        json!({ "op": "delete-entity", "mention": { "start": 7, "end": 9 } }),
        json!({ "op": "delete-relation", "triple": 5 }),
        json!({ "op": "add-entity", "span": { "start": 25, "end": 90 } }),
        json!({ "op": "add-entity", "span": { "start": 3, "end": 9 } }),
        json!({ "op": "add-relation", "subject": { "start": 0, "end": 6 }, "object": { "start": 20, "end": 27 }, "property": "P999" }),
        json!({ "op": "add-relation", "subject": { "start": 0, "end": 6 }, "object": { "start": 0, "end": 6 }, "property": "P17" }),
        json!({ "op": "rename", "mention": { "start": 0, "end": 6 } }),
    ] {
        let r = edit(&server, &id, 0, bad.clone());
        assert_eq!(r.status, 422, "{bad}: {}", r.body);
    }
    assert_eq!(get(&format!("{}/api/graph/{id}", server.base)).body, before);
    let no_revision =
        put(&format!("{}/api/graph/{id}", server.base), r#"{"edit": {"op": "delete-relation", "triple": 0}}"#);
    assert_eq!(no_revision.status, 400);
}

#[test]
fn unknown_sessions_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    for id in ["00000000-0000-4000-8000-000000000000", "nope"] {
        assert_eq!(get(&format!("{}/api/graph/{id}", server.base)).status, 404);
        assert_eq!(get(&format!("{}/api/graph/{id}/ntriples", server.base)).status, 404);
        assert_eq!(edit(&server, id, 0, json!({ "op": "delete-relation", "triple": 0 })).status, 404);
    }
}

#[test]
fn download_is_an_attachment() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let id = session_id(&construct(&server, FIXTURE_TEXT));
    let r = get(&format!("{}/api/graph/{id}/ntriples", server.base));
    assert_eq!(r.body, FIXTURE_LINE);
    assert!(r.header("content-disposition").unwrap().starts_with("attachment"));
    assert!(r.header("content-type").unwrap().starts_with("application/n-triples"));
}

#[test]
fn edits_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let id = session_id(&construct(&server, FIXTURE_TEXT));
    let edited = edit(
        &server,
        &id,
        0,
        json!({ "op": "relink-mention", "mention": { "start": 0, "end": 6 }, "iri": WEIMAR_REPUBLIC }),
    )
    .json();
    server.stop();
    let server = fixture_server(dir.path());
    let after = get(&format!("{}/api/graph/{id}", server.base));
    assert_eq!(after.status, 200);
    assert_eq!(after.json(), edited);
    assert_eq!(edit(&server, &id, 0, json!({ "op": "delete-relation", "triple": 0 })).status, 409);
}

#[test]
fn concurrent_edits_on_one_revision_admit_one() {
    let dir = tempfile::tempdir().unwrap();
    let server = fixture_server(dir.path());
    let id = session_id(&construct(&server, FIXTURE_TEXT));
    let statuses: Vec<u16> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..8)
            .map(|_| {
                scope.spawn(|| {
                    edit(&server, &id, 0, json!({ "op": "add-entity", "span": { "start": 12, "end": 16 } })).status
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(statuses.iter().filter(|s| **s == 200).count(), 1, "{statuses:?}");
    assert!(statuses.iter().all(|s| *s == 200 || *s == 409));
    assert_eq!(get(&format!("{}/api/graph/{id}", server.base)).json()["revision"], 1);
}

struct Exploding;

impl ExtractorBackend for Exploding {
    fn id(&self) -> &str {
        "exploding"
    }
    fn extract(&self, _: &str) -> Result<Vec<ExtractedRelation>, BackendError> {
        panic!("model crashed")
    }
}

#[test]
fn pipeline_failure_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut backends = Backends::reference(gazetteer(), Default::default());
    backends.extractor = Arc::new(Exploding);
    let pipeline = Arc::new(Pipeline::new(Arc::new(kb()), backends, PipelineConfig::default()));
    let server = TestServer::start(pipeline, dir.path(), 1000);
    let r = post(&format!("{}/api/construct", server.base), &json!({ "text": FIXTURE_TEXT }).to_string());
    assert_eq!(r.status, 500);
    assert_eq!(r.json()["stage"], "relation extraction");
    assert!(r.json()["error"].as_str().unwrap().contains("model crashed"));
}
