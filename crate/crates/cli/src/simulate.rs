use std::fs;
use std::io::Write;
use std::sync::Arc;

use locus_core::engine::GameInstance;
use locus_core::harness::{
    parse_scripts, render_transcripts, run_concurrent, InProcess, Script, Transcript,
};
use locus_core::model::GameSpec;
use locus_protocol::{router, spawn_local, Service, WireTransport};

use crate::{load_game, SimulateArgs, EXIT_ENV, EXIT_FAILURE, EXIT_INPUT, EXIT_OK};

fn play(
    spec: &Arc<GameSpec>,
    scripts: &[Script],
    seed: u64,
    wire: bool,
) -> Result<Vec<Transcript>, String> {
    let game = GameInstance::new(Arc::clone(spec)).map_err(|e| e.to_string())?;
    if !wire {
        return Ok(run_concurrent(&mut InProcess::new(game), scripts, seed));
    }
    let server =
        spawn_local(router(Arc::new(Service::new([game])), None)).map_err(|e| e.to_string())?;
    let mut t = WireTransport::new(&server.base_url(), &spec.game_id);
    let transcripts = run_concurrent(&mut t, scripts, seed);
    server.stop().map_err(|e| e.to_string())?;
    Ok(transcripts)
}

/// Runs each script file on a fresh instance. Transcripts go to `out`, or to
/// one file per script when `--out` is given; failures are also summarized
/// on stderr.
pub fn run(args: &SimulateArgs, out: &mut dyn Write) -> i32 {
    let spec = match load_game(&args.game) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("{}", e.report(&args.game));
            return EXIT_INPUT;
        }
    };
    let mut parsed = Vec::new();
    let mut bad_input = false;
    for path in &args.scripts {
        match fs::read_to_string(path) {
            Err(e) => {
                eprintln!("{}: cannot read: {e}", path.display());
                bad_input = true;
            }
            Ok(src) => match parse_scripts(&src) {
                Ok(s) => parsed.push((path, s)),
                Err(errors) => {
                    for e in errors {
                        eprintln!("{}:{e}", path.display());
                    }
                    bad_input = true;
                }
            },
        }
    }
    if bad_input {
        return EXIT_INPUT;
    }
    if let Some(dir) = &args.out {
        if let Err(e) = fs::create_dir_all(dir) {
            eprintln!("{}: {e}", dir.display());
            return EXIT_ENV;
        }
    }

    let mut passed = true;
    for (path, scripts) in parsed {
        let transcripts = match play(&spec, &scripts, args.seed, args.wire) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return EXIT_ENV;
            }
        };
        for t in transcripts.iter().filter(|t| !t.passed()) {
            passed = false;
            eprintln!("{}: script {} FAILED", path.display(), t.player_id);
            for f in &t.failures {
                eprintln!(
                    "  step {}: expected {}, got {}",
                    f.index, f.expected, f.actual
                );
            }
            if let Some(reason) = &t.aborted {
                eprintln!("  aborted: {reason}");
            }
        }
        let text = render_transcripts(&transcripts);
        let written = match &args.out {
            Some(dir) => {
                let stem = path
                    .file_stem()
                    .map_or("script".into(), |s| s.to_string_lossy());
                fs::write(dir.join(format!("{stem}.txt")), text)
            }
            None => out.write_all(text.as_bytes()),
        };
        if let Err(e) = written {
            eprintln!("cannot write transcript: {e}");
            return EXIT_ENV;
        }
    }
    if passed {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}
