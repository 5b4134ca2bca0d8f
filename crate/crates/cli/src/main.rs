//! `udf`: command-line driver for the unit-distance constructions.

mod args;
mod commands;
mod manifest;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, ReplayArgs};
use manifest::{digest_mismatches, unix_now, Outputs, RunManifest, MANIFEST_FILE};

/// Why a command did not succeed. Usage errors exit with 2, everything else with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Certificate(String),
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let result = match cli.command {
        Command::Replay(r) => replay(&r),
        other => run_recorded(other, argv).map(|m| m.certified),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: certificate check failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Certificate(msg) | Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Replaces `--norm` by its canonical JSON so the manifest does not depend on files or spelling.
fn canonicalize(cmd: &mut Command) -> Result<Option<serde_json::Value>, Failure> {
    let norm = match cmd {
        Command::Construct(a) => &mut a.norm.norm,
        Command::Compose(a) => &mut a.norm.norm,
        _ => return Ok(None),
    };
    let json = commands::read_norm_spec(norm)?.to_json();
    *norm = json.clone();
    Ok(serde_json::from_str(&json).ok())
}

fn run_recorded(mut cmd: Command, argv: Vec<String>) -> Result<RunManifest, Failure> {
    let norm = canonicalize(&mut cmd)?;
    let started = unix_now();
    let run = cmd.run_args_mut().expect("recorded commands carry run args").clone();
    let mut out = Outputs::new(&run.out_dir);
    let (certified, d, m, n) = match &cmd {
        Command::Construct(a) => (commands::construct(a, &mut out)?, Some(a.norm.d), Some(a.m), None),
        Command::Compose(a) => (commands::compose(a, &mut out)?, Some(a.norm.d), None, Some(a.n.clone())),
        Command::Kdm(a) => (commands::kdm(a, &mut out)?, Some(a.d), Some(a.m), None),
        Command::VerifyLemmas(a) => (commands::verify_lemmas(a, &mut out)?, None, None, None),
        Command::Replay(_) => unreachable!("replay is not recorded"),
    };
    let dir = out.dir().to_path_buf();
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        argv,
        invocation: cmd,
        norm,
        d,
        m,
        n,
        seed: run.seed,
        tolerances: run.tolerances(),
        started_unix: started,
        finished_unix: unix_now(),
        certified,
        outputs: out.into_digests(),
    };
    let text = udf_core::io::to_document("run_manifest", &manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(manifest)
}

fn replay(r: &ReplayArgs) -> Result<bool, Failure> {
    let text = fs::read_to_string(&r.manifest)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", r.manifest.display())))?;
    let recorded: RunManifest = udf_core::io::from_document("run_manifest", &text).map_err(Failure::Usage)?;
    let out_dir = match &r.out_dir {
        Some(d) => d.clone(),
        None => r.manifest.parent().unwrap_or(Path::new(".")).join("replay"),
    };
    let mut cmd = recorded.invocation.clone();
    cmd.run_args_mut()
        .ok_or_else(|| Failure::Usage("manifest records a replay".into()))?
        .out_dir = out_dir;
    let mut argv = vec!["replay".to_string(), "--manifest".to_string()];
    argv.push(r.manifest.display().to_string());
    let fresh = run_recorded(cmd, argv)?;
    let bad = digest_mismatches(&recorded.outputs, &fresh.outputs);
    for name in &bad {
        println!("MISMATCH {name}");
    }
    if bad.is_empty() {
        println!("replay matched {} outputs", fresh.outputs.len());
    }
    Ok(bad.is_empty() && fresh.certified == recorded.certified)
}
