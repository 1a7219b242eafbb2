use std::fs;
use std::io::Write;
use std::path::PathBuf;

use locus_core::model::{parse_game_bytes, validate_game, Severity};

use crate::{EXIT_FAILURE, EXIT_INPUT, EXIT_OK};

/// Prints every diagnostic of every file. The worst outcome wins: an
/// unreadable file beats an invalid one.
pub fn run(paths: &[PathBuf], out: &mut dyn Write) -> i32 {
    let mut code = EXIT_OK;
    for path in paths {
        let name = path.display();
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                let _ = writeln!(out, "{name}: cannot read: {e}");
                code = code.max(EXIT_INPUT);
                continue;
            }
        };
        match parse_game_bytes(&bytes) {
            Err(errors) => {
                for e in &errors {
                    let _ = writeln!(out, "{name}:{e}");
                }
                code = code.max(EXIT_FAILURE);
            }
            Ok(spec) => {
                let diags = validate_game(&spec);
                for d in &diags {
                    let _ = writeln!(out, "{name}: {d}");
                }
                let errors = diags
                    .iter()
                    .filter(|d| d.severity == Severity::Error)
                    .count();
                if errors > 0 {
                    code = code.max(EXIT_FAILURE);
                } else {
                    let _ = writeln!(out, "{name}: ok ({} warning(s))", diags.len());
                }
            }
        }
    }
    code
}
