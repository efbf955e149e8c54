//! Study service: hosts comparative-judgement studies over HTTP, stores every
//! judgement in an append-only log per study, and runs model fits on demand.

pub mod api;
pub mod app;
pub mod domain;
pub mod error;
pub mod scheduler;
pub mod store;

pub use api::router;
pub use app::{App, FitRecord, FitRequest, FitStatus, ServiceConfig};
pub use domain::{ExportSummary, Judge, JudgementEvent, Study, StudyDefinition, WardDefinition};
pub use error::{ServiceError, ServiceResult};

/// Serves the API on `addr` until ctrl-c.
pub async fn serve(app: App, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
