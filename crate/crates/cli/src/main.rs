mod args;
mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bgt_core::Error;
use clap::Parser;
use serde::Serialize;

use args::Cli;
use commands::{Failure, Output};

const SUBCOMMANDS: [&str; 8] = ["gen", "mcmc", "landscape", "fmf", "region", "critical-c", "cover", "gfun"];

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    params: serde_json::Value,
    seed: u64,
    version: &'static str,
    outputs: Vec<String>,
    threads: usize,
    wall_time_s: f64,
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Usage(_) => 2,
        Failure::Check(_) => 4,
        Failure::Core(e) => match e {
            Error::Domain(_) | Error::Format(_) => 2,
            Error::CapExceeded { .. } | Error::Memory { .. } => 3,
            Error::FrozenChain(_) | Error::UndefinedEnergy | Error::Infeasible(_) | Error::NoRoot(_) => 4,
            _ => 1,
        },
    }
}

fn describe(f: &Failure) -> String {
    match f {
        Failure::Usage(m) => format!("usage: {m}"),
        Failure::Check(m) => m.clone(),
        Failure::Core(e) => e.to_string(),
    }
}

/// Expands `--config file.json` into flags placed right after the subcommand,
/// so that flags given on the command line take precedence.
fn expand_config(raw: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let strs: Vec<String> = raw.iter().map(|s| s.to_string_lossy().into_owned()).collect();
    let path = strs.iter().enumerate().find_map(|(i, s)| {
        if s == "--config" {
            strs.get(i + 1).cloned()
        } else {
            s.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else { return Ok(raw) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let obj: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| format!("config {path} is not a JSON object: {e}"))?;
    let mut extra = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            serde_json::Value::Bool(true) => extra.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => extra.extend([flag, s]),
            serde_json::Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string))
                    .collect();
                extra.extend([flag, joined.join(",")]);
            }
            other => extra.extend([flag, other.to_string()]),
        }
    }
    let at = strs
        .iter()
        .position(|s| SUBCOMMANDS.contains(&s.as_str()))
        .ok_or("a subcommand is required")?;
    let mut args = raw;
    for (i, e) in extra.into_iter().enumerate() {
        args.insert(at + 1 + i, e.into());
    }
    Ok(args)
}

fn write_outputs(dir: &Option<PathBuf>, outputs: &[Output]) -> std::io::Result<Vec<String>> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            outputs
                .iter()
                .map(|o| {
                    let path = dir.join(&o.name);
                    std::fs::write(&path, &o.bytes)?;
                    Ok(path.display().to_string())
                })
                .collect()
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for o in outputs {
                stdout.write_all(&o.bytes)?;
            }
            Ok(outputs.iter().map(|o| format!("<stdout>/{}", o.name)).collect())
        }
    }
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let outputs = match commands::run(&cli) {
        Ok(o) => o,
        Err(f) => {
            eprintln!("error: {}", describe(&f));
            return ExitCode::from(exit_code(&f));
        }
    };
    let paths = match write_outputs(&cli.global.out, &outputs) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let params = serde_json::to_value(&cli).unwrap_or(serde_json::Value::Null);
    let manifest = RunManifest {
        command: params["command"]["command"].as_str().unwrap_or(""),
        params: params.clone(),
        seed: cli.global.seed,
        version: env!("CARGO_PKG_VERSION"),
        outputs: paths,
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let written = match &cli.global.out {
        Some(dir) => std::fs::write(dir.join("manifest.json"), text),
        None => std::io::stderr().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
