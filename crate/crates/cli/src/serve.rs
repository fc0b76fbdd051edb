use std::io::Write;

use idsel_service::{AppState, ServiceConfig};
use tokio::net::TcpListener;

use crate::args::ServeArgs;
use crate::commands::{CliError, CliResult};

pub fn run(args: &ServeArgs) -> CliResult<()> {
    for (what, path) in [("corpus", &args.corpus), ("embeddings", &args.embeddings)] {
        if let Some(p) = path {
            if !p.is_file() {
                return Err(CliError::invalid(format!("{what} {} does not exist", p.display())));
            }
        }
    }
    if let Some(dir) = &args.static_dir {
        if !dir.is_dir() {
            return Err(CliError::invalid(format!("static dir {} does not exist", dir.display())));
        }
    }
    let state = AppState::new(ServiceConfig {
        default_corpus: args.corpus.clone(),
        default_embeddings: args.embeddings.clone(),
        journal: args.journal.clone(),
        static_dir: args.static_dir.clone(),
        background_threshold: args.background_threshold,
    })
    .map_err(|e| CliError::runtime(format!("cannot start: {e}")))?;

    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::runtime(format!("tokio runtime: {e}")))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::runtime(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::runtime(e.to_string()))?;
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        };
        idsel_service::serve(listener, state, shutdown)
            .await
            .map_err(|e| CliError::runtime(format!("server error: {e}")))
    })
}
