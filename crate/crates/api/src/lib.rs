//! Read-only HTTP service over mounted run stores.
//!
//! | method | path | result |
//! |---|---|---|
//! | GET | `/runs` | run descriptors sorted by id |
//! | GET | `/runs/{id}` | one descriptor |
//! | GET | `/runs/{id}/cells/{cell}/series` | per-year quantiles of one variable |
//! | GET | `/runs/{id}/fields/{variable}` | per-cell percentile field for one year |
//! | POST | `/runs/{id}/risk-index` | moderate/high risk maps (JSON, CSV or raster) |
//! | GET | `/runs/{id}/localities/{admin}/summary` | PV, relative PV and risk dates |

mod error;
mod handlers;
mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;

pub use error::ApiError;
pub use handlers::{RiskIndexRequest, RunDescriptor};
pub use state::{ApiSession, RequestLogEntry};

pub fn router(session: Arc<ApiSession>) -> Router {
    Router::new()
        .route("/runs", get(handlers::list_runs))
        .route("/runs/{id}", get(handlers::get_run))
        .route("/runs/{id}/cells/{cell}/series", get(handlers::cell_series))
        .route("/runs/{id}/fields/{variable}", get(handlers::field))
        .route("/runs/{id}/risk-index", post(handlers::risk_index))
        .route("/runs/{id}/localities/{admin}/summary", get(handlers::locality_summary))
        .with_state(session)
}

/// Serve until the process is stopped.
pub async fn serve(session: Arc<ApiSession>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("serving {} run(s) on http://{}", session.run_ids().len(), listener.local_addr()?);
    axum::serve(listener, router(session)).await
}
