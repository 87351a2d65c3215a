//! JSON over HTTP for the suggestion service. Service calls may block on an
//! experiment lock, so they run on the blocking pool.

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use mulch_core::engine::{BoSettings, ExperimentConfig, Strategy};
use mulch_core::gp::LengthscaleBox;
use mulch_core::priors::{shipped_priors, PriorEnsemble};
use mulch_core::service::{ExperimentPatch, Service};
use mulch_core::{Configuration, Error, SearchSpace};

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                code: "invalid_request",
                message: message.into(),
            },
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::UnknownExperiment(_) => (StatusCode::NOT_FOUND, "unknown_experiment"),
            Error::UnknownSuggestion(_) => (StatusCode::NOT_FOUND, "unknown_suggestion"),
            Error::NoObservations(_) => (StatusCode::NOT_FOUND, "no_observations"),
            Error::DuplicateReport(_) => (StatusCode::CONFLICT, "duplicate_report"),
            Error::NotServed(_) => (StatusCode::CONFLICT, "not_served"),
            Error::BudgetExhausted => (StatusCode::CONFLICT, "budget_exhausted"),
            Error::InvalidPatch(_) => (StatusCode::BAD_REQUEST, "invalid_patch"),
            Error::InvalidArgument(_)
            | Error::InvalidParameter { .. }
            | Error::InvalidSpace(_)
            | Error::UnknownPreset(_)
            | Error::OutOfDomain { .. }
            | Error::DimensionMismatch { .. } => (StatusCode::BAD_REQUEST, "invalid_request"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self {
            status,
            body: ErrorBody {
                code,
                message: e.to_string(),
            },
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs a service call off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody {
                code: "internal",
                message: e.to_string(),
            },
        }),
    }
}

/// `space` is a preset name or a space object; `priors` is "shipped",
/// "none" or an ensemble object.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub space: Value,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    pub budget: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub priors: Option<Value>,
    #[serde(default)]
    pub lengthscale_box: Option<LengthscaleBox>,
    #[serde(default)]
    pub bo: Option<BoSettings>,
}

fn default_strategy() -> Strategy {
    Strategy::Bo
}

impl CreateRequest {
    pub fn into_config(self) -> ApiResult<ExperimentConfig> {
        let space = match self.space {
            Value::String(name) => SearchSpace::preset(&name)?,
            v => serde_json::from_value::<SearchSpace>(v).map_err(|e| ApiError::bad_request(format!("space: {e}")))?,
        };
        let priors = match self.priors {
            None if self.strategy == Strategy::FslBo => Some(shipped_priors()),
            None => None,
            Some(Value::String(s)) if s == "shipped" => Some(shipped_priors()),
            Some(Value::String(s)) if s == "none" => None,
            Some(Value::String(s)) => return Err(ApiError::bad_request(format!("priors: unknown name `{s}`"))),
            Some(v) => Some(PriorEnsemble::from_json(&v.to_string())?),
        };
        let mut config = ExperimentConfig::new(space, self.strategy, self.budget, self.seed);
        config.priors = priors;
        config.lengthscale_box = self.lengthscale_box;
        if let Some(bo) = self.bo {
            config.bo = bo;
        }
        Ok(config)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ObservationRequest {
    pub suggestion_id: u64,
    pub metric: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Best {
    pub config: Configuration,
    pub metric: f64,
}

async fn create(
    State(service): State<Service>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let config = body?.0.into_config()?;
    let id = blocking(move || service.create_experiment(config)).await?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn status(State(service): State<Service>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || service.status(&id)).await?))
}

async fn suggestion(State(service): State<Service>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || service.request_suggestion(&id)).await?))
}

async fn observe(
    State(service): State<Service>,
    Path(id): Path<String>,
    body: Result<Json<ObservationRequest>, JsonRejection>,
) -> ApiResult<StatusCode> {
    let req = body?.0;
    blocking(move || service.report_observation(&id, req.suggestion_id, req.metric)).await?;
    Ok(StatusCode::ACCEPTED)
}

async fn patch(
    State(service): State<Service>,
    Path(id): Path<String>,
    body: Result<Json<ExperimentPatch>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let p = body?.0;
    let svc = service.clone();
    let st = blocking(move || {
        svc.update_experiment(&id, &p)?;
        svc.status(&id)
    })
    .await?;
    Ok(Json(st))
}

async fn best(State(service): State<Service>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let (config, metric) = blocking(move || service.get_best(&id)).await?;
    Ok(Json(Best { config, metric }))
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/experiments", post(create))
        .route("/experiments/{id}", get(status).patch(patch))
        .route("/experiments/{id}/suggestions", get(suggestion))
        .route("/experiments/{id}/observations", post(observe))
        .route("/experiments/{id}/best", get(best))
        .with_state(service)
}
