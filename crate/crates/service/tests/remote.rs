#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::sync::Arc;

use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use kgforge_core::discovery::EmbedderBackend;
use kgforge_core::model::to_ntriples;
use kgforge_core::pipeline::Pipeline;
use kgforge_service::app::build_backends;
use kgforge_service::config::{AppConfig, BackendChoice};
use kgforge_service::remote::RemoteEmbedder;

use common::*;

/// Mock model services; returns the base URL. The server lives as long as the process.
fn mock_backends(nli_labels_ok: bool) -> String {
    let app = Router::new()
        .route(
            "/ner",
            post(|Json(_): Json<Value>| async {
                Json(json!({ "mentions": [
                    { "start": 0, "end": 6, "type": "GPE" },
                    { "start": 20, "end": 27, "type": "GPE", "iri": GERMANY },
                    { "start": 90, "end": 95, "type": "GPE" },
                ]}))
            }),
        )
        .route(
            "/embed",
            post(|Json(body): Json<Value>| async move {
                let n = body["sentence"].as_str().unwrap_or_default().len() as f64;
                Json(json!({ "vector": [1.0, n, 0.5] }))
            }),
        )
        .route(
            "/rel",
            post(|Json(_): Json<Value>| async {
                Json(json!({ "relations": [
                    { "subject": { "start": 0, "end": 6 }, "object": { "start": 20, "end": 27 }, "predicate": "country" }
                ]}))
            }),
        )
        .route(
            "/nli",
            post(move |Json(body): Json<Value>| async move {
                let n = body["labels"].as_array().map_or(0, Vec::len);
                let n = if nli_labels_ok { n } else { n + 1 };
                Json(json!({ "probabilities": vec![0.5; n] }))
            }),
        );
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        tokio::runtime::Runtime::new().unwrap().block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        })
    });
    format!("http://{}", rx.recv().unwrap())
}

fn remote_pipeline(base: &str) -> Pipeline {
    let mut config = AppConfig::default();
    config.backends.recognizer = BackendChoice::Remote(format!("{base}/ner"));
    config.backends.embedder = BackendChoice::Remote(format!("{base}/embed"));
    config.backends.extractor = BackendChoice::Remote(format!("{base}/rel"));
    config.backends.nli = BackendChoice::Remote(format!("{base}/nli"));
    let backends = build_backends(&config).unwrap();
    Pipeline::new(Arc::new(kb()), backends, config.pipeline_config())
}

#[test]
fn remote_backends_drive_the_pipeline() {
    let base = mock_backends(true);
    let out = remote_pipeline(&base).run_stages(FIXTURE_TEXT).unwrap();
    assert_eq!(to_ntriples(&out.graph).unwrap(), FIXTURE_LINE);
    assert_eq!(out.discovery.mentions.len(), 2);
    assert!(out.warnings.iter().any(|w| w.contains("90..95") || w.contains("span")), "{:?}", out.warnings);
    let scores: Vec<f64> = out.fused[0].candidates.iter().map(|c| c.nli_probability).collect();
    assert!(scores.iter().all(|p| *p == 0.5));
}

#[test]
fn malformed_nli_output_degrades_to_a_warning() {
    let base = mock_backends(false);
    let out = remote_pipeline(&base).run_stages(FIXTURE_TEXT).unwrap();
    assert_eq!(to_ntriples(&out.graph).unwrap(), FIXTURE_LINE);
    assert!(out.fused[0].candidates.iter().all(|c| c.nli_probability == 1.0));
    assert!(!out.warnings.is_empty());
}

#[test]
fn embedder_learns_its_dimension() {
    let base = mock_backends(true);
    let e = RemoteEmbedder::connect(&format!("{base}/embed")).unwrap();
    assert_eq!(e.dim(), 3);
    assert_eq!(e.embed("abcd").unwrap(), [1.0, 4.0, 0.5]);
    assert!(RemoteEmbedder::connect("http://127.0.0.1:9/embed").is_err());
}

#[test]
fn unreachable_backends_become_warnings() {
    let mut config = AppConfig::default();
    config.backends.recognizer = BackendChoice::Remote("http://127.0.0.1:9/ner".into());
    config.backends.extractor = BackendChoice::Remote("http://127.0.0.1:9/rel".into());
    let pipeline = Pipeline::new(Arc::new(kb()), build_backends(&config).unwrap(), config.pipeline_config());
    let out = pipeline.run_stages(FIXTURE_TEXT).unwrap();
    assert!(out.graph.is_empty());
    assert!(out.warnings.len() >= 2, "{:?}", out.warnings);
}
