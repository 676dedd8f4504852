//! HTTP session API: clients report learner mistakes and outcomes and get
//! reinforcers chosen by the engine.
//!
//! | Method | Path | Body | Reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{group, catalog, seed?, config?}` | `{session_id, entries}` |
//! | POST | `/sessions/{id}/mistake` | `{state_tag}` | `{reinforcer_id?, message?}` |
//! | POST | `/sessions/{id}/outcome` | `{reinforcer_id, rectified}` | `{weights?, entropy?, regret?}` |
//! | GET | `/sessions/{id}/metrics` | | `{interaction_count, weights, entropy_series, total_regret, preferred_reinforcer}` |
//! | DELETE | `/sessions/{id}` | | the closing session summary |
//! | GET | `/catalogs` | | catalog names, sizes and entries |

mod error;
mod service;
mod sink;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::{Json, Router};

pub use error::ServiceError;
pub use service::{
    BoxedSink, CatalogInfo, Clock, CreateSessionRequest, CreateSessionResponse, ManualClock, MetricsResponse,
    MistakeRequest, MistakeResponse, OutcomeRequest, OutcomeResponse, SystemClock, TrainerService,
    DEFAULT_IDLE_TIMEOUT, LOG_FILE_NAME,
};
pub use sink::MemorySink;

pub const DEFAULT_PORT: u16 = 7477;

type Shared = State<Arc<TrainerService>>;

async fn create_session(
    State(svc): Shared,
    Json(req): Json<CreateSessionRequest>,
) -> Result<Json<CreateSessionResponse>, ServiceError> {
    svc.create_session(req).map(Json)
}

async fn report_mistake(
    State(svc): Shared,
    Path(id): Path<String>,
    Json(req): Json<MistakeRequest>,
) -> Result<Json<MistakeResponse>, ServiceError> {
    svc.report_mistake(&id, req).map(Json)
}

async fn report_outcome(
    State(svc): Shared,
    Path(id): Path<String>,
    Json(req): Json<OutcomeRequest>,
) -> Result<Json<OutcomeResponse>, ServiceError> {
    svc.report_outcome(&id, req).map(Json)
}

async fn metrics(State(svc): Shared, Path(id): Path<String>) -> Result<Json<MetricsResponse>, ServiceError> {
    svc.metrics(&id).map(Json)
}

async fn end_session(
    State(svc): Shared,
    Path(id): Path<String>,
) -> Result<Json<mrl_core::SessionLogSummary>, ServiceError> {
    svc.end_session(&id).map(Json)
}

async fn catalogs(State(svc): Shared) -> Json<Vec<CatalogInfo>> {
    Json(svc.catalogs())
}

pub fn router(service: Arc<TrainerService>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(end_session))
        .route("/sessions/{id}/mistake", post(report_mistake))
        .route("/sessions/{id}/outcome", post(report_outcome))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/catalogs", get(catalogs))
        .with_state(service)
}

/// Serves until `shutdown` resolves, reaping idle sessions once a minute.
/// Sessions still open at shutdown are ended so the log stays replayable.
pub async fn serve(
    service: Arc<TrainerService>,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "trainer service listening");

    let reaper = {
        let service = Arc::clone(&service);
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(60));
            loop {
                tick.tick().await;
                for id in service.expire_idle() {
                    tracing::info!(session_id = %id, "idle session ended");
                }
            }
        })
    };
    let result = axum::serve(listener, router(Arc::clone(&service)))
        .with_graceful_shutdown(shutdown)
        .await;
    reaper.abort();
    service.end_all();
    result
}
