//! Fixture engine and request helpers shared by the gateway tests.
#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use hearhere_core::corpus::{build_vocab, synth_corpus, CorpusSpec, ExamplePipeline};
use hearhere_core::feed::ReadKind;
use hearhere_core::opinion_map::TsneConfig;
use hearhere_core::stance::{CommentModel, StanceDistribution};
use hearhere_gateway::{router, AppState, Engine, EngineParts, SESSION_HEADER};
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use serde_json::Value;
use std::path::Path;
use std::sync::Arc;
use tower::ServiceExt;

pub const COMMENTS_PER_SIDE: usize = 16;

/// Six topics of 30 articles whose predictions peak on the gold class with
/// distinct extremeness values, and 16 comments per community per topic.
pub fn fixture_engine() -> Arc<Engine> {
    let (mut articles, comments) =
        synth_corpus(&CorpusSpec::new(6, 15, COMMENTS_PER_SIDE, 0.0, 11)).unwrap();
    let n = articles.len() as f64;
    for (i, a) in articles.iter_mut().enumerate() {
        let ext = 0.30 + 0.69 * (i as f64 + 0.5) / n;
        let mut p = [(1.0 - ext) / 4.0; 5];
        p[a.gold_stance.unwrap().index()] = ext;
        a.prediction = Some(StanceDistribution::new(p).unwrap());
    }
    let vocab = build_vocab(&articles, &comments, 1).unwrap();
    let comment_model = CommentModel::new(&vocab, 16, 5);
    Arc::new(
        Engine::new(EngineParts {
            articles,
            comments,
            vocab,
            comment_model,
            tsne: TsneConfig {
                iterations: 300,
                seed: 3,
                ..TsneConfig::default()
            },
            examples: ExamplePipeline {
                collect: 16,
                sample: 12,
                select: 10,
            },
            seed: 9,
            max_comments_per_topic: 500,
        })
        .unwrap(),
    )
}

pub fn app(engine: &Arc<Engine>, dir: &Path) -> (Router, Arc<AppState>) {
    let state = AppState::open(Arc::clone(engine), dir, ReadKind::ArticleOpen).unwrap();
    (router(Arc::clone(&state), None), state)
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!(
                "non-JSON body ({e}): {}",
                String::from_utf8_lossy(&self.body)
            )
        })
    }

    /// Deserializes into a strict mirror type, which doubles as a schema check.
    pub fn parse<T: DeserializeOwned>(&self) -> T {
        assert!(
            self.status.is_success(),
            "status {} body {}",
            self.status,
            String::from_utf8_lossy(&self.body)
        );
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!(
                "schema mismatch ({e}): {}",
                String::from_utf8_lossy(&self.body)
            )
        })
    }

    /// Error replies carry exactly `{"error": string}`.
    pub fn error(&self, status: StatusCode) -> String {
        assert_eq!(
            self.status,
            status,
            "body {}",
            String::from_utf8_lossy(&self.body)
        );
        let v = self.json();
        let obj = v.as_object().expect("error body is an object");
        assert_eq!(obj.len(), 1, "{v}");
        obj["error"]
            .as_str()
            .expect("error message is a string")
            .to_string()
    }
}

pub async fn call(
    app: &Router,
    method: &str,
    uri: &str,
    token: Option<&str>,
    body: Option<&str>,
) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(SESSION_HEADER, t);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, body }
}

pub async fn get(app: &Router, uri: &str, token: Option<&str>) -> Reply {
    call(app, "GET", uri, token, None).await
}

pub async fn post(app: &Router, uri: &str, token: Option<&str>, body: &str) -> Reply {
    call(app, "POST", uri, token, Some(body)).await
}

pub async fn new_session(app: &Router) -> (String, String) {
    let r = post(app, "/api/session", None, "").await;
    assert_eq!(r.status, StatusCode::CREATED);
    let v = r.json();
    (
        v["session_id"].as_str().unwrap().to_string(),
        v["participant"].as_str().unwrap().to_string(),
    )
}
