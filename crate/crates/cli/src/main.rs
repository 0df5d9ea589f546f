mod config;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::{ConfigError, RunConfig, SystemData, TaskConfig};
use tasks::{run_task, TaskOutput};

const DEFAULT_OUTPUT: &str = "downfold-out";

#[derive(Parser)]
#[command(name = "downfold", version, about = "Downfolding laboratory for small fermionic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a configuration and write report.json.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides `seed` in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Run tasks on separate threads; the report keeps configuration order.
        #[arg(long)]
        parallel: bool,
    },
    /// Parse the configuration and build the system without running tasks.
    Validate { config: PathBuf },
}

/// Distinct, reproducible seed for each task.
fn task_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn load(path: &Path) -> Result<(RunConfig, SystemData), ConfigError> {
    let cfg = RunConfig::load(path)?;
    let sys = cfg.build_system()?;
    Ok((cfg, sys))
}

fn system_json(sys: &SystemData) -> Value {
    json!({
        "spin_orbitals": sys.basis.n_orbitals(),
        "electrons": sys.basis.n_electrons(),
        "dimension": sys.basis.len(),
        "partition": {
            "occ_inactive": sys.part.occ_inactive(),
            "occ_active": sys.part.occ_active(),
            "virt_active": sys.part.virt_active(),
            "virt_inactive": sys.part.virt_inactive(),
        },
    })
}

fn task_json(index: usize, task: &TaskConfig, seed: u64, dir: &str, outcome: &downfold::Result<TaskOutput>) -> Value {
    let mut entry = json!({ "index": index, "name": task.name(), "seed": seed });
    let obj = entry.as_object_mut().expect("object literal");
    match outcome {
        Ok(out) => {
            obj.insert("results".into(), Value::Object(out.results.clone().into_iter().collect()));
            obj.insert("checks".into(), out.checks.iter().map(|c| c.to_json()).collect());
            let files: Vec<String> = out.files.iter().map(|f| format!("{dir}/{f}")).collect();
            obj.insert("files".into(), json!(files));
            if out.passed() {
                obj.insert("status".into(), "passed".into());
            } else {
                let failed: Vec<&str> = out.checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
                obj.insert("status".into(), "failed".into());
                obj.insert(
                    "error".into(),
                    json!({ "code": "tolerance-exceeded", "message": format!("checks failed: {}", failed.join(", ")) }),
                );
            }
        }
        Err(e) => {
            obj.insert("status".into(), "failed".into());
            obj.insert("error".into(), json!({ "code": e.code(), "message": e.to_string() }));
        }
    }
    entry
}

fn run(config: &Path, output: Option<PathBuf>, seed: Option<u64>, parallel: bool) -> ExitCode {
    let (cfg, sys) = match load(config) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let seed = seed.unwrap_or(cfg.seed);
    let out_dir = output
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return ExitCode::from(2);
    }

    let seeds: Vec<u64> = (0..cfg.tasks.len()).map(|i| task_seed(seed, i)).collect();
    // each task writes only inside its own directory, so concurrent tasks never share a file
    let dirs: Vec<String> = cfg.tasks.iter().enumerate().map(|(i, t)| format!("{i}-{}", t.name())).collect();
    for d in &dirs {
        if let Err(e) = std::fs::create_dir_all(out_dir.join(d)) {
            eprintln!("error: cannot create {}: {e}", out_dir.join(d).display());
            return ExitCode::from(2);
        }
    }
    let outcomes: Vec<downfold::Result<TaskOutput>> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = cfg
                .tasks
                .iter()
                .zip(&seeds)
                .zip(&dirs)
                .map(|((t, &sd), d)| {
                    let (sys, dir) = (&sys, out_dir.join(d));
                    s.spawn(move || run_task(t, sys, sd, &dir))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("task thread panicked")).collect()
        })
    } else {
        cfg.tasks
            .iter()
            .zip(&seeds)
            .zip(&dirs)
            .map(|((t, &sd), d)| run_task(t, &sys, sd, &out_dir.join(d)))
            .collect()
    };

    let mut failed = false;
    let mut entries = Vec::new();
    for (i, (((task, &sd), dir), outcome)) in cfg.tasks.iter().zip(&seeds).zip(&dirs).zip(&outcomes).enumerate() {
        let entry = task_json(i, task, sd, dir, outcome);
        let status = entry["status"].as_str().unwrap_or("failed");
        println!("task {i} {}: {status}", task.name());
        if status != "passed" {
            failed = true;
            eprintln!("task {i} ({}) failed: {}", task.name(), entry["error"]["message"].as_str().unwrap_or(""));
        }
        entries.push(entry);
    }

    let report = json!({
        "tool": { "name": "downfold", "version": env!("CARGO_PKG_VERSION") },
        "config": serde_json::to_value(&cfg).expect("configuration serializes"),
        "seed": seed,
        "system": system_json(&sys),
        "tasks": entries,
        "status": if failed { "failed" } else { "passed" },
    });
    let path = out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Err(e) = std::fs::write(&path, text) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return ExitCode::from(2);
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            output,
            seed,
            parallel,
        } => run(&config, output, seed, parallel),
        Command::Validate { config } => match load(&config) {
            Ok((cfg, sys)) => {
                println!(
                    "{}: {} tasks, {} spin-orbitals, {} electrons, {} determinants",
                    config.display(),
                    cfg.tasks.len(),
                    sys.basis.n_orbitals(),
                    sys.basis.n_electrons(),
                    sys.basis.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", config.display());
                ExitCode::from(2)
            }
        },
    }
}
