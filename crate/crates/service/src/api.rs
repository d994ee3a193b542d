//! `/v1` routes.
//!
//! Callers authenticate with `Authorization: Bearer <token>`. Creating a
//! session returns the facilitator token; the facilitator then issues one
//! token per stakeholder. Responses to stakeholder tokens only ever name
//! other participants by pseudonym.

use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stakeweigh_core::ahp::{ComparisonMatrix, MatrixDocument, QualityAttribute};
use stakeweigh_core::session::{
    Abstention, EventOutcome, ParticipantSpec, Phase, PhaseChange, Pseudonym, RationaleInput,
    Session, SessionConfig, SessionError, SessionEvent, SessionId, Timestamp,
};
use stakeweigh_core::utility::ExportFormat;
use stakeweigh_core::StakeholderId;

use crate::error::{ApiError, Canonical};
use crate::store::{SessionStore, Slot};
use crate::tokens::Role;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
}

pub fn router(store: Arc<SessionStore>) -> Router {
    let session_routes = Router::new()
        .route("/", get(status))
        .route("/invitations", post(invite))
        .route("/attributes", get(attributes))
        .route("/submissions", post(submit))
        .route("/submissions/me", get(own_submission))
        .route("/rationales", post(post_rationale))
        .route("/prompts", post(publish_prompt))
        .route("/delegation", put(delegate).delete(revoke))
        .route("/feedback", get(feedback))
        .route("/advance", post(advance))
        .route("/concordance", get(concordance))
        .route("/utility", get(utility))
        .route("/audit", get(audit))
        .route("/recover", post(recover));
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/sessions", post(create_session))
        .nest("/v1/sessions/{sid}", session_routes)
        .layer(middleware::from_fn(log_requests))
        .with_state(AppState { store })
}

async fn log_requests(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_owned();
    let started = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        %method,
        %path,
        status = response.status().as_u16(),
        elapsed_ms = started.elapsed().as_secs_f64() * 1000.0,
        "request"
    );
    response
}

fn now() -> Timestamp {
    let ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    Timestamp(ms)
}

/// Parses a JSON body, reporting the path of the offending field.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request(format!("invalid request body at `{path}`: {}", e.inner()))
            .with_details(json!({ "path": path }))
    })
}

fn authenticate(state: &AppState, sid: &SessionId, headers: &HeaderMap) -> Result<Role, ApiError> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or_else(ApiError::unauthorized)?;
    state
        .store
        .authenticate(sid, token.trim())?
        .ok_or_else(ApiError::unauthorized)
}

fn require_facilitator(role: &Role) -> Result<(), ApiError> {
    match role {
        Role::Facilitator => Ok(()),
        Role::Stakeholder(_) => Err(ApiError::forbidden("facilitator token required")),
    }
}

fn require_stakeholder(role: Role) -> Result<StakeholderId, ApiError> {
    match role {
        Role::Stakeholder(id) => Ok(id),
        Role::Facilitator => Err(ApiError::forbidden("stakeholder token required")),
    }
}

async fn health(State(state): State<AppState>) -> Canonical<Value> {
    Canonical(json!({ "status": "ok", "sessions": state.store.len() }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSessionRequest {
    attributes: Vec<QualityAttribute>,
    participants: Vec<ParticipantSpec>,
    #[serde(default)]
    config: SessionConfig,
}

#[derive(Serialize)]
struct ParticipantView<'a> {
    id: &'a StakeholderId,
    pseudonym: &'a Pseudonym,
    weight: f64,
    token_issued: bool,
}

fn participant_views(slot: &Slot) -> Vec<ParticipantView<'_>> {
    slot.session()
        .participants()
        .iter()
        .map(|p| ParticipantView {
            id: &p.id,
            pseudonym: &p.pseudonym,
            weight: p.weight,
            token_issued: slot.tokens().has_token(&p.id),
        })
        .collect()
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Canonical<Value>), ApiError> {
    let req: CreateSessionRequest = parse_body(&body)?;
    let (sid, token) = state
        .store
        .create(req.attributes, req.participants, req.config, now())?;
    let body = state.store.read(&sid, |slot| {
        json!({
            "session_id": sid,
            "facilitator_token": token,
            "phase": slot.session().phase(),
            "participants": participant_views(slot),
        })
    })?;
    tracing::info!(session = %sid, "session created");
    Ok((StatusCode::CREATED, Canonical(body)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InviteRequest {
    stakeholder_id: StakeholderId,
}

async fn invite(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<(StatusCode, Canonical<Value>), ApiError> {
    require_facilitator(&authenticate(&state, &sid, &headers)?)?;
    let req: InviteRequest = parse_body(&body)?;
    let (token, pseudonym) = state.store.issue_token(&sid, &req.stakeholder_id)?;
    Ok((
        StatusCode::CREATED,
        Canonical(json!({
            "stakeholder_id": req.stakeholder_id,
            "pseudonym": pseudonym,
            "token": token,
        })),
    ))
}

#[derive(Serialize)]
struct OwnView<'a> {
    stakeholder_id: &'a StakeholderId,
    pseudonym: &'a Pseudonym,
    active: bool,
    dissented: bool,
    delegation: Option<Value>,
}

fn own_view<'a>(session: &'a Session, id: &'a StakeholderId) -> Option<OwnView<'a>> {
    let participant = session.participant(id)?;
    let delegation = session
        .delegations()
        .iter()
        .find(|d| &d.delegator == id)
        .map(|d| {
            json!({
                "delegate": session.pseudonym_of(&d.delegate),
                "from": d.from,
                "until": d.until,
            })
        });
    Some(OwnView {
        stakeholder_id: id,
        pseudonym: &participant.pseudonym,
        active: session.is_active(id),
        dissented: session.has_dissented(id),
        delegation,
    })
}

async fn status(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
) -> Result<Canonical<Value>, ApiError> {
    let role = authenticate(&state, &sid, &headers)?;
    let body = state.store.read(&sid, |slot| {
        let s = slot.session();
        let mut body = json!({
            "session_id": s.id(),
            "phase": s.phase(),
            "attributes": s.attributes(),
            "participation": s.participation(),
            "waiting_for": s.missing_inputs(),
            "history": s.history(),
            "read_only": slot.damage().is_some(),
        });
        match &role {
            Role::Facilitator => {
                body["participants"] = json!(participant_views(slot));
                body["suggestions"] = json!(s.suggestion_queue().collect::<Vec<_>>());
                body["prompts"] = json!(s.prompts());
                if let Some(d) = slot.damage() {
                    body["damage"] = json!({ "line": d.line, "reason": d.reason });
                }
            }
            Role::Stakeholder(id) => {
                body["you"] = json!(own_view(s, id));
            }
        }
        body
    })?;
    Ok(Canonical(body))
}

async fn attributes(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
) -> Result<Canonical<Value>, ApiError> {
    authenticate(&state, &sid, &headers)?;
    let attrs = state
        .store
        .read(&sid, |slot| json!(slot.session().attributes()))?;
    Ok(Canonical(json!({ "attributes": attrs })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitRequest {
    matrix: MatrixDocument,
    #[serde(default)]
    abstentions: Vec<Abstention>,
}

async fn submit(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Canonical<Value>, ApiError> {
    let me = require_stakeholder(authenticate(&state, &sid, &headers)?)?;
    let req: SubmitRequest = parse_body(&body)?;
    let matrix = ComparisonMatrix::try_from(req.matrix).map_err(SessionError::from)?;
    let event = SessionEvent::MatrixSubmitted {
        stakeholder: me,
        matrix,
        abstentions: req.abstentions,
    };
    match state.store.execute(&sid, event, now())? {
        EventOutcome::Submitted(sub) => Ok(Canonical(json!({
            "accepted": true,
            "round": sub.round,
            "priorities": sub.priorities,
            "consistency": sub.consistency,
            "abstentions": sub.abstentions,
        }))),
        _ => unreachable!("submission yields a submission"),
    }
}

async fn own_submission(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
) -> Result<Canonical<Value>, ApiError> {
    let me = require_stakeholder(authenticate(&state, &sid, &headers)?)?;
    let body = state.store.read(&sid, |slot| {
        let s = slot.session();
        json!({
            "phase": s.phase(),
            "current": s.current_submission(&me),
            "latest": s.effective_submission(&me),
        })
    })?;
    Ok(Canonical(body))
}

async fn post_rationale(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<(StatusCode, Canonical<Value>), ApiError> {
    let me = require_stakeholder(authenticate(&state, &sid, &headers)?)?;
    let rationale: RationaleInput = parse_body(&body)?;
    let kind = rationale.kind;
    state.store.execute(
        &sid,
        SessionEvent::RationalePosted {
            stakeholder: me,
            rationale,
        },
        now(),
    )?;
    Ok((
        StatusCode::CREATED,
        Canonical(json!({ "stored": true, "kind": kind })),
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptRequest {
    text: String,
    #[serde(default)]
    attributes: Vec<stakeweigh_core::AttributeId>,
}

async fn publish_prompt(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<(StatusCode, Canonical<Value>), ApiError> {
    require_facilitator(&authenticate(&state, &sid, &headers)?)?;
    let req: PromptRequest = parse_body(&body)?;
    let outcome = state.store.execute(
        &sid,
        SessionEvent::PromptPublished {
            text: req.text,
            attributes: req.attributes,
        },
        now(),
    )?;
    let EventOutcome::PromptPublished(id) = outcome else {
        unreachable!("prompt yields an id")
    };
    Ok((StatusCode::CREATED, Canonical(json!({ "prompt_id": id }))))
}

/// Delegation target is named by pseudonym so that no stakeholder id is
/// exchanged between participants.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DelegateRequest {
    delegate: String,
    #[serde(default)]
    from: Option<Phase>,
    #[serde(default)]
    until: Option<Phase>,
}

async fn delegate(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Canonical<Value>, ApiError> {
    let me = require_stakeholder(authenticate(&state, &sid, &headers)?)?;
    let req: DelegateRequest = parse_body(&body)?;
    let (target, from) = state.store.read(&sid, |slot| {
        let s = slot.session();
        (
            s.stakeholder_by_pseudonym(&req.delegate).cloned(),
            s.phase(),
        )
    })?;
    let target = target.ok_or(SessionError::UnknownStakeholder)?;
    let from = req.from.unwrap_or(from);
    let until = req.until.unwrap_or(Phase::Round3);
    state.store.execute(
        &sid,
        SessionEvent::DelegationSet {
            delegator: me,
            delegate: target,
            from,
            until,
        },
        now(),
    )?;
    Ok(Canonical(json!({
        "delegate": req.delegate,
        "from": from,
        "until": until,
    })))
}

async fn revoke(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
) -> Result<StatusCode, ApiError> {
    let me = require_stakeholder(authenticate(&state, &sid, &headers)?)?;
    state.store.execute(
        &sid,
        SessionEvent::DelegationRevoked { delegator: me },
        now(),
    )?;
    Ok(StatusCode::NO_CONTENT)
}

async fn feedback(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
) -> Result<Canonical<Value>, ApiError> {
    let me = require_stakeholder(authenticate(&state, &sid, &headers)?)?;
    let bundle = state
        .store
        .read(&sid, |slot| slot.session().feedback_bundle(&me))??;
    Ok(Canonical(json!(bundle)))
}

async fn advance(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
) -> Result<Canonical<Value>, ApiError> {
    require_facilitator(&authenticate(&state, &sid, &headers)?)?;
    let from = state.store.read(&sid, |slot| slot.session().phase())?;
    let outcome =
        state
            .store
            .execute(&sid, SessionEvent::RoundAdvanced { from, to: from }, now())?;
    let EventOutcome::Advanced(phase) = outcome else {
        unreachable!("advance yields a phase")
    };
    let history: Vec<PhaseChange> = state.store.read(&sid, |slot| {
        slot.session()
            .history()
            .iter()
            .filter(|h| h.from >= from)
            .cloned()
            .collect()
    })?;
    Ok(Canonical(
        json!({ "from": from, "phase": phase, "transitions": history }),
    ))
}

async fn concordance(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
) -> Result<Canonical<Value>, ApiError> {
    authenticate(&state, &sid, &headers)?;
    let body = state.store.read(&sid, |slot| {
        let s = slot.session();
        let current = match s.check_agreement_gate() {
            Ok(report) => json!({ "report": report }),
            Err(SessionError::IncompleteRound(waiting)) => json!({ "waiting_for": waiting }),
            Err(_) => Value::Null,
        };
        let recorded: Vec<_> = s
            .history()
            .iter()
            .filter_map(|h| {
                h.concordance
                    .as_ref()
                    .map(|c| json!({ "phase": h.from, "report": c }))
            })
            .collect();
        json!({
            "phase": s.phase(),
            "threshold": s.config().agreement_threshold,
            "current": current,
            "recorded": recorded,
        })
    })?;
    Ok(Canonical(body))
}

#[derive(Deserialize)]
struct UtilityQuery {
    format: Option<String>,
}

async fn utility(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
    Query(query): Query<UtilityQuery>,
) -> Result<Response, ApiError> {
    authenticate(&state, &sid, &headers)?;
    let result = state
        .store
        .read(&sid, |slot| slot.session().result().cloned())?;
    let result = result.ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "not_closed",
            "the utility function exists once the session is closed",
        )
    })?;
    let canonical = result.utility.export(ExportFormat::CanonicalJson);
    let expression = result.utility.export(ExportFormat::HumanReadableExpression);
    Ok(match query.format.as_deref() {
        None => Canonical(json!({
            "priorities": result.priorities,
            "canonical_json": canonical,
            "expression": expression,
            "dissent": result.dissent,
        }))
        .into_response(),
        Some("canonical_json") => {
            ([(header::CONTENT_TYPE, "application/json")], canonical).into_response()
        }
        Some("expression") => (
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            expression,
        )
            .into_response(),
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "unknown format `{other}`; use canonical_json or expression"
            )))
        }
    })
}

async fn audit(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
) -> Result<Canonical<Value>, ApiError> {
    let role = authenticate(&state, &sid, &headers)?;
    let body = state.store.read(&sid, |slot| {
        let records = slot.read_log()?;
        let view = match role {
            Role::Facilitator => json!(records),
            Role::Stakeholder(_) => json!(records
                .iter()
                .map(|r| slot.session().audit_record(r))
                .collect::<Vec<_>>()),
        };
        Ok::<_, std::io::Error>(view)
    })?;
    let records = body.map_err(crate::store::StoreError::from)?;
    Ok(Canonical(json!({ "records": records })))
}

async fn recover(
    State(state): State<AppState>,
    Path(sid): Path<SessionId>,
    headers: HeaderMap,
) -> Result<Canonical<Value>, ApiError> {
    require_facilitator(&authenticate(&state, &sid, &headers)?)?;
    let kept = state.store.recover(&sid)?;
    Ok(Canonical(json!({ "recovered": true, "last_seq": kept })))
}
