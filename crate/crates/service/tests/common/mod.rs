#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use reqwest::{Method, StatusCode};
use serde_json::{json, Value};
use stakeweigh_service::{router, SessionStore};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub const ATTRS: [&str; 3] = ["safety", "speed", "comfort"];

pub struct TestServer {
    pub base: String,
    pub data_dir: PathBuf,
    pub client: reqwest::Client,
    stop: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<()>>,
}

impl TestServer {
    pub async fn start(data_dir: &Path) -> Self {
        Self::start_with(data_dir, 100).await
    }

    pub async fn start_with(data_dir: &Path, snapshot_every: u64) -> Self {
        let store = Arc::new(SessionStore::open(data_dir, snapshot_every).expect("store opens"));
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr: SocketAddr = listener.local_addr().unwrap();
        let (tx, rx) = oneshot::channel::<()>();
        let handle = tokio::spawn(async move {
            axum::serve(listener, router(store))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
        });
        Self {
            base: format!("http://{addr}"),
            data_dir: data_dir.to_owned(),
            client: reqwest::Client::new(),
            stop: Some(tx),
            handle: Some(handle),
        }
    }

    /// Stops the server and waits until the store is dropped.
    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            h.await.unwrap();
        }
    }

    pub async fn call(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, String) {
        let mut req = self
            .client
            .request(method, format!("{}{}", self.base, path));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.expect("request");
        let status = resp.status();
        (status, resp.text().await.unwrap())
    }

    pub async fn json(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, Value) {
        let (status, text) = self.call(method, path, token, body).await;
        let value = if text.is_empty() {
            Value::Null
        } else {
            serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"))
        };
        (status, value)
    }

    pub async fn get(&self, path: &str, token: &str) -> (StatusCode, Value) {
        self.json(Method::GET, path, Some(token), None).await
    }

    pub async fn post(&self, path: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.json(Method::POST, path, Some(token), Some(body)).await
    }
}

pub struct Fixture {
    pub sid: String,
    pub facilitator: String,
    /// (stakeholder id, pseudonym, token)
    pub stakeholders: Vec<(String, String, String)>,
}

impl Fixture {
    pub fn path(&self, tail: &str) -> String {
        format!("/v1/sessions/{}{}", self.sid, tail)
    }

    pub fn token(&self, id: &str) -> &str {
        &self.stakeholders.iter().find(|s| s.0 == id).unwrap().2
    }

    pub fn pseudonym(&self, id: &str) -> &str {
        &self.stakeholders.iter().find(|s| s.0 == id).unwrap().1
    }
}

pub fn attributes() -> Value {
    json!(ATTRS
        .iter()
        .map(|a| json!({ "id": a, "name": a }))
        .collect::<Vec<_>>())
}

/// Creates a session over `ATTRS` and issues a token to every stakeholder.
pub async fn setup(server: &TestServer, ids: &[&str], config: Value) -> Fixture {
    let participants: Vec<Value> = ids
        .iter()
        .map(|id| json!({ "id": id, "weight": 1.0 }))
        .collect();
    let (status, body) = server
        .json(
            Method::POST,
            "/v1/sessions",
            None,
            Some(json!({
                "attributes": attributes(),
                "participants": participants,
                "config": config,
            })),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let sid = body["session_id"].as_str().unwrap().to_owned();
    let facilitator = body["facilitator_token"].as_str().unwrap().to_owned();
    let mut stakeholders = Vec::new();
    for id in ids {
        let (status, inv) = server
            .post(
                &format!("/v1/sessions/{sid}/invitations"),
                &facilitator,
                json!({ "stakeholder_id": id }),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{inv}");
        stakeholders.push((
            id.to_string(),
            inv["pseudonym"].as_str().unwrap().to_owned(),
            inv["token"].as_str().unwrap().to_owned(),
        ));
    }
    Fixture {
        sid,
        facilitator,
        stakeholders,
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Matrix document with `a_ij = w_i / w_j`; ratios must stay on the scale.
pub fn matrix_from_weights(attrs: &[&str], weights: &[u64]) -> Value {
    let mut entries = Vec::new();
    for &wi in weights {
        for &wj in weights {
            let g = gcd(wi, wj);
            entries.push(json!([wi / g, wj / g]));
        }
    }
    json!({ "attributes": attrs, "entries": entries })
}

/// Safety very strongly (7) over speed, extremely (9) over comfort; speed
/// and comfort equal.
pub fn robot_matrix() -> Value {
    json!({
        "attributes": ATTRS,
        "entries": [[1, 1], [7, 1], [9, 1], [1, 7], [1, 1], [1, 1], [1, 9], [1, 1], [1, 1]],
    })
}

/// Circular preferences: safety 9x speed, speed 9x comfort, comfort 9x
/// safety.
pub fn circular_matrix() -> Value {
    json!({
        "attributes": ATTRS,
        "entries": [[1, 1], [9, 1], [1, 9], [1, 9], [1, 1], [9, 1], [9, 1], [1, 9], [1, 1]],
    })
}

pub async fn submit(
    server: &TestServer,
    fx: &Fixture,
    id: &str,
    matrix: Value,
) -> (StatusCode, Value) {
    server
        .post(
            &fx.path("/submissions"),
            fx.token(id),
            json!({ "matrix": matrix }),
        )
        .await
}

pub async fn advance(server: &TestServer, fx: &Fixture) -> (StatusCode, Value) {
    server
        .post(&fx.path("/advance"), &fx.facilitator, json!({}))
        .await
}
