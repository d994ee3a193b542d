mod common;

use common::*;
use reqwest::{Method, StatusCode};
use serde_json::{json, Value};

fn approx(v: &Value, want: f64, tol: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() <= tol
}

#[tokio::test]
async fn health_on_empty_store() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let (status, body) = server.json(Method::GET, "/v1/health", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({ "sessions": 0, "status": "ok" }));
}

#[tokio::test]
async fn robot_matrix_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice"], json!({})).await;
    let (status, body) = submit(&server, &fx, "alice", robot_matrix()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["accepted"], json!(true));
    let p = &body["priorities"]["values"];
    assert!(approx(&p[0], 0.8, 0.01), "{p}");
    assert!(approx(&p[1], 0.1, 0.01), "{p}");
    assert!(approx(&p[2], 0.1, 0.01), "{p}");
    assert!(approx(&body["consistency"]["cr"], 0.01, 0.005));

    let (status, own) = server
        .get(&fx.path("/submissions/me"), fx.token("alice"))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(own["current"]["priorities"], body["priorities"]);
}

#[tokio::test]
async fn inconsistent_matrix_is_422_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice"], json!({})).await;
    let (status, body) = submit(&server, &fx, "alice", circular_matrix()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "inconsistent");
    let report = &body["error"]["details"]["consistency"];
    assert!(report["cr"].as_f64().unwrap() > 0.10);
    assert!(
        !report["offending_triples"].as_array().unwrap().is_empty(),
        "{report}"
    );

    let (_, own) = server
        .get(&fx.path("/submissions/me"), fx.token("alice"))
        .await;
    assert_eq!(own["current"], Value::Null);
}

#[tokio::test]
async fn utility_before_closed_is_409() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice"], json!({})).await;
    let (status, body) = server.get(&fx.path("/utility"), &fx.facilitator).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "not_closed");
}

#[tokio::test]
async fn unanimous_elicitation_closes_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice", "bob"], json!({})).await;
    for id in ["alice", "bob"] {
        let (status, _) = submit(&server, &fx, id, robot_matrix()).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (status, body) = advance(&server, &fx).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["phase"], "closed");

    let (status, u) = server.get(&fx.path("/utility"), fx.token("bob")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(u["expression"].as_str().unwrap().starts_with("U(m) = "));
    let (status, raw) = server
        .call(
            Method::GET,
            &fx.path("/utility?format=canonical_json"),
            Some(fx.token("bob")),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(raw, u["canonical_json"].as_str().unwrap());
    let (status, expr) = server
        .call(
            Method::GET,
            &fx.path("/utility?format=expression"),
            Some(fx.token("bob")),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(expr, u["expression"].as_str().unwrap());
    let (status, _) = server
        .call(
            Method::GET,
            &fx.path("/utility?format=xml"),
            Some(fx.token("bob")),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // Closed phase refuses submissions.
    let (status, body) = submit(&server, &fx, "alice", robot_matrix()).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
}

#[tokio::test]
async fn identical_resubmission_keeps_state_and_logs_twice() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice", "bob"], json!({})).await;
    let m = matrix_from_weights(&ATTRS, &[4, 2, 1]);
    let (_, first) = submit(&server, &fx, "alice", m.clone()).await;
    let (_, own1) = server
        .get(&fx.path("/submissions/me"), fx.token("alice"))
        .await;
    let (_, second) = submit(&server, &fx, "alice", m).await;
    let (_, own2) = server
        .get(&fx.path("/submissions/me"), fx.token("alice"))
        .await;
    assert_eq!(first, second);
    assert_eq!(own1, own2);

    let (_, audit) = server.get(&fx.path("/audit"), &fx.facilitator).await;
    let records = audit["records"].as_array().unwrap();
    let seqs: Vec<u64> = records.iter().map(|r| r["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, vec![1, 2, 3]);
    assert_eq!(records[1]["event"], records[2]["event"]);
}

#[tokio::test]
async fn authentication_and_roles() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice"], json!({})).await;

    let (status, _) = server.json(Method::GET, &fx.path(""), None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = server.get(&fx.path(""), "not-a-token").await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = server.get("/v1/sessions/nope", &fx.facilitator).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = advance(&server, &fx).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = server
        .post(&fx.path("/advance"), fx.token("alice"), json!({}))
        .await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = server
        .post(
            &fx.path("/submissions"),
            &fx.facilitator,
            json!({ "matrix": robot_matrix() }),
        )
        .await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = server
        .post(
            &fx.path("/invitations"),
            fx.token("alice"),
            json!({ "stakeholder_id": "alice" }),
        )
        .await;
    assert_eq!(status, StatusCode::FORBIDDEN);

    // A token from one session means nothing in another.
    let other = setup(&server, &["alice"], json!({})).await;
    let (status, _) = server.get(&other.path(""), fx.token("alice")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);

    // Reissuing invalidates the old token.
    let (_, inv) = server
        .post(
            &fx.path("/invitations"),
            &fx.facilitator,
            json!({ "stakeholder_id": "alice" }),
        )
        .await;
    let (status, _) = server.get(&fx.path(""), fx.token("alice")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = server
        .get(&fx.path(""), inv["token"].as_str().unwrap())
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(inv["token"].as_str().unwrap().len(), 64);

    let (status, _) = server
        .post(
            &fx.path("/invitations"),
            &fx.facilitator,
            json!({ "stakeholder_id": "mallory" }),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice"], json!({})).await;
    let (status, body) = server
        .post(
            &fx.path("/submissions"),
            fx.token("alice"),
            json!({ "matrix": { "attributes": ATTRS, "entries": [[1, 1], "x"] } }),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["details"]["path"], "matrix.entries[1]");

    let (status, body) = server
        .post(
            &fx.path("/submissions"),
            fx.token("alice"),
            json!({ "matrix": matrix_from_weights(&ATTRS, &[1, 1, 1]), "extra": 1 }),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");

    // Reciprocity violations are a domain error, not a parse error.
    let (status, body) = server
        .post(
            &fx.path("/submissions"),
            fx.token("alice"),
            json!({ "matrix": {
                "attributes": ATTRS,
                "entries": [[1, 1], [3, 1], [1, 1], [3, 1], [1, 1], [1, 1], [1, 1], [1, 1], [1, 1]],
            } }),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["error"]["code"], "invalid_matrix");

    let (status, body) = server
        .json(
            Method::POST,
            "/v1/sessions",
            None,
            Some(json!({ "attributes": attributes(), "participants": [] })),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "no_participants");
}

#[tokio::test]
async fn delegation_by_pseudonym() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice", "bob", "carol"], json!({})).await;
    let (status, body) = server
        .json(
            Method::PUT,
            &fx.path("/delegation"),
            Some(fx.token("carol")),
            Some(json!({ "delegate": fx.pseudonym("alice") })),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["until"], "round3");

    let (status, body) = submit(&server, &fx, "carol", robot_matrix()).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "delegating");

    let (status, body) = server
        .json(
            Method::PUT,
            &fx.path("/delegation"),
            Some(fx.token("alice")),
            Some(json!({ "delegate": fx.pseudonym("carol") })),
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(body["error"]["code"], "delegation_cycle");

    let (status, _) = server
        .json(
            Method::PUT,
            &fx.path("/delegation"),
            Some(fx.token("alice")),
            Some(json!({ "delegate": "Participant Z" })),
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, st) = server.get(&fx.path(""), fx.token("carol")).await;
    assert_eq!(st["you"]["delegation"]["delegate"], fx.pseudonym("alice"));
    assert_eq!(st["you"]["active"], false);

    let (status, _) = server
        .json(
            Method::DELETE,
            &fx.path("/delegation"),
            Some(fx.token("carol")),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = server
        .json(
            Method::DELETE,
            &fx.path("/delegation"),
            Some(fx.token("carol")),
            None,
        )
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = submit(&server, &fx, "carol", robot_matrix()).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn incomplete_round_names_pseudonyms() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice", "bob"], json!({})).await;
    submit(&server, &fx, "alice", robot_matrix()).await;
    let (status, body) = advance(&server, &fx).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "incomplete_round");
    assert_eq!(
        body["error"]["details"]["waiting_for"],
        json!([fx.pseudonym("bob")])
    );

    let (_, c) = server
        .get(&fx.path("/concordance"), fx.token("alice"))
        .await;
    assert_eq!(c["current"]["waiting_for"], json!([fx.pseudonym("bob")]));
}

#[tokio::test]
async fn responses_are_canonical_json() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path()).await;
    let fx = setup(&server, &["alice"], json!({})).await;
    let (_, text) = server
        .call(
            Method::POST,
            &fx.path("/submissions"),
            Some(fx.token("alice")),
            Some(json!({ "matrix": robot_matrix() })),
        )
        .await;
    let value: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(text, stakeweigh_core::canonical::to_string(&value).unwrap());
}
