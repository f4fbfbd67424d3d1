use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use otlab::scenario::{export_csv, preset, presets, render_all, run_scenario, RunReport, Scenario};
use otlab::CostFunction;

#[derive(Parser)]
#[command(name = "otlab", version, about = "Semi-discrete optimal transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a built-in preset name) and write its artifacts.
    Run {
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample the structural conditions and Loeper's principle for a cost.
    VerifyCost {
        id: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

fn load(arg: &str) -> anyhow::Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return Scenario::parse(&text).with_context(|| format!("in {arg}"));
    }
    match presets::preset_text(arg) {
        Some(_) => Ok(preset(arg)?),
        None => bail!("no scenario file or preset named `{arg}`"),
    }
}

fn print(report: &RunReport) {
    for v in &report.verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
}

fn run(arg: &str, out: &Path, resolution: Option<usize>, seed: Option<u64>) -> anyhow::Result<bool> {
    let mut text = load(arg)?.to_config();
    if let Some(r) = resolution {
        text.push_str(&format!("mesh.resolution = {r}\n"));
    }
    if let Some(s) = seed {
        text.push_str(&format!("seed = {s}\n"));
    }
    // Later keys override earlier ones.
    let mut seen = std::collections::BTreeMap::new();
    for line in text.lines() {
        if let Some((k, _)) = line.split_once('=') {
            seen.insert(k.trim().to_string(), line.to_string());
        }
    }
    let s = Scenario::parse(&seen.into_values().collect::<Vec<_>>().join("\n"))?;
    let mut report = run_scenario(&s)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("scenario.cfg"), s.to_config())?;
    report.artifacts = export_csv(&report, out)?;
    report.artifacts.extend(render_all(&report, out)?);
    print(&report);
    for a in &report.artifacts {
        eprintln!("wrote {}", a.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("OTLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Run { scenario, out, resolution, seed } => run(&scenario, &out, resolution, seed),
        Command::VerifyCost { id, samples } => id
            .parse::<CostFunction>()
            .map_err(anyhow::Error::from)
            .and_then(|cost| run_scenario(&presets::cost_scenario(cost, samples)).map_err(anyhow::Error::from))
            .map(|r| {
                print(&r);
                r.passed()
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
