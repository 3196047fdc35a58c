use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use cantor_tits_cli::run::{check_dir, run_scenario, verify_file, write_outputs};
use cantor_tits_cli::scenario::{fixture, parse_scenario, Kind, Profile, FIXTURES, PROFILE_VAR};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cantor-tits", version, about = "Random walks and exact certificates for groups acting on Cantor sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Scenario file, or the name of a bundled fixture.
    scenario: String,
    /// Overrides the scenario's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides budgets.runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Overrides budgets.depth.
    #[arg(long)]
    depth: Option<u32>,
    /// Output directory (default: the scenario's, else out/<scenario name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-step series as CSV.
    #[arg(long)]
    emit_series: bool,
    /// Budget profile: quick, default or thorough.
    #[arg(long, env = PROFILE_VAR)]
    profile: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario as its own kind says.
    Run(RunFlags),
    /// Walk statistics: stationary measure, residual, entropy, contraction.
    Simulate(RunFlags),
    /// Search for a ping-pong certificate of a free subgroup.
    CertifyFree(RunFlags),
    /// Solve for an invariant measure or a Farkas certificate against one.
    FindMeasure(RunFlags),
    /// Check or search for a Morse-Smale element.
    MorseSmale(RunFlags),
    /// Blow up a GIET group into homeomorphisms of a Cantor set.
    GietBlowup(RunFlags),
    /// Re-check a certificate file; nonzero exit when it does not hold.
    Verify {
        certificate: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a bundled scenario, or list them.
    Fixture { name: Option<String> },
}

fn load(spec: &str) -> Result<(String, PathBuf, String)> {
    let p = Path::new(spec);
    if p.exists() {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {spec}"))?;
        let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
        return Ok((text, base, stem));
    }
    let text = fixture(spec).ok_or_else(|| anyhow!("no scenario file or bundled fixture named `{spec}`"))?;
    Ok((text.to_string(), PathBuf::from("."), spec.trim_end_matches(".json").to_string()))
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn execute(flags: RunFlags, kind: Option<Kind>) -> Result<i32> {
    let profile = match &flags.profile {
        Some(p) => Profile::parse(p)?,
        None => Profile::Default,
    };
    let (text, base, stem) = load(&flags.scenario)?;
    let mut s = parse_scenario(&text)?;
    if let Some(k) = kind {
        s.kind = k;
    }
    if let Some(seed) = flags.seed {
        s.seed = seed;
    }
    if let Some(r) = flags.runs {
        s.budgets.runs = Some(r);
    }
    if let Some(d) = flags.depth {
        s.budgets.depth = Some(d);
    }
    let dir = flags.out.or_else(|| s.output.dir.clone().map(|d| base.join(d))).unwrap_or_else(|| Path::new("out").join(&stem));
    check_dir(&dir)?;
    let out = run_scenario(&s, profile, &base)?;
    let meta = json!({
        "tool": "cantor-tits",
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": unix_time(),
        "scenario": flags.scenario,
        "kind": s.kind.name(),
        "seed": s.seed,
        "profile": profile.name(),
        "exit_code": out.status.exit_code(),
    });
    write_outputs(&out, &dir, flags.emit_series || s.output.emit_series, &meta)?;
    println!("{}", out.verdict);
    Ok(out.status.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(f) => execute(f, None),
        Command::Simulate(f) => execute(f, Some(Kind::Simulate)),
        Command::CertifyFree(f) => execute(f, Some(Kind::CertifyFree)),
        Command::FindMeasure(f) => execute(f, Some(Kind::FindMeasure)),
        Command::MorseSmale(f) => execute(f, Some(Kind::MorseSmale)),
        Command::GietBlowup(f) => execute(f, Some(Kind::GietBlowup)),
        Command::Verify { certificate, out } => {
            let o = verify_file(&certificate)?;
            if let Some(dir) = out {
                let meta = json!({ "tool": "cantor-tits", "version": env!("CARGO_PKG_VERSION"), "timestamp_unix": unix_time(), "certificate": certificate });
                write_outputs(&o, &dir, false, &meta)?;
            }
            println!("{}", o.verdict);
            Ok(o.status.exit_code())
        }
        Command::Fixture { name: None } => {
            for (n, _) in FIXTURES {
                println!("{n}");
            }
            Ok(0)
        }
        Command::Fixture { name: Some(n) } => {
            print!("{}", fixture(&n).ok_or_else(|| anyhow!("no bundled fixture `{n}`"))?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
