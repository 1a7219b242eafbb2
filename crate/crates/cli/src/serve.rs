use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use locus_core::model::GameSpec;
use locus_protocol::{router, serve, Service};

use crate::{load_game, ServeArgs, EXIT_ENV, EXIT_INPUT, EXIT_OK};

/// Every valid `*.game` file of `dir`, in file name order. Invalid files are
/// logged and skipped.
pub fn load_dir(dir: &Path) -> io::Result<Vec<Arc<GameSpec>>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "game"))
        .collect();
    paths.sort();
    let mut specs = Vec::new();
    for path in paths {
        match load_game(&path) {
            Ok(spec) => {
                log::info!("loaded `{}` from {}", spec.game_id, path.display());
                specs.push(Arc::new(spec));
            }
            Err(e) => log::warn!("skipping invalid game\n{}", e.report(&path)),
        }
    }
    Ok(specs)
}

pub fn run(args: &ServeArgs) -> i32 {
    let specs = match load_dir(&args.games_dir) {
        Ok(s) => s,
        Err(e) => {
            log::error!(
                "cannot read games directory {}: {e}",
                args.games_dir.display()
            );
            return EXIT_INPUT;
        }
    };
    if specs.is_empty() {
        log::error!("no valid game in {}", args.games_dir.display());
        return EXIT_INPUT;
    }
    let service = match Service::restore(specs, args.snapshot_dir.as_deref()) {
        Ok(s) => Arc::new(s),
        Err((game, e)) => {
            log::error!("cannot resume `{game}`: {} ({e})", e.code());
            return EXIT_INPUT;
        }
    };
    let rt = match tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
    {
        Ok(rt) => rt,
        Err(e) => {
            log::error!("cannot start runtime: {e}");
            return EXIT_ENV;
        }
    };
    rt.block_on(async {
        let addr = match tokio::net::lookup_host(&args.listen)
            .await
            .map(|mut a| a.next())
        {
            Ok(Some(addr)) => addr,
            _ => {
                log::error!("cannot resolve listen address {:?}", args.listen);
                return EXIT_INPUT;
            }
        };
        let listener = match tokio::net::TcpListener::bind(addr).await {
            Ok(l) => l,
            Err(e) => {
                log::error!("cannot listen on {addr}: {e}");
                return EXIT_ENV;
            }
        };
        let bound = listener.local_addr().map_or(addr, |a| a);
        println!("listening on http://{bound}");
        let _ = io::stdout().flush();
        log::info!("serving {}", service.game_ids().join(", "));

        let app = router(Arc::clone(&service), args.app_dir.clone());
        if let Err(e) = serve(listener, app, shutdown_signal()).await {
            log::error!("server failed: {e}");
            return EXIT_ENV;
        }
        log::info!("shutting down");
        match &args.snapshot_dir {
            Some(dir) => match service.snapshot_all(dir) {
                Ok(infos) => {
                    for i in infos {
                        log::info!(
                            "saved `{}` at seq {} ({} bytes)",
                            i.game_id,
                            i.taken_at_seq,
                            i.bytes
                        );
                    }
                    EXIT_OK
                }
                Err(e) => {
                    log::error!("snapshot failed: {} ({e})", e.code());
                    EXIT_ENV
                }
            },
            None => EXIT_OK,
        }
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}
