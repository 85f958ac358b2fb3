//! `fastsplit` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fastsplit_core::blockwise::{blockwise_split_with, BlockwiseOptions};
use fastsplit_core::dag::{build_split_dag, restructure};
use fastsplit_core::delay::{NetParams, WeightMode};
use fastsplit_core::edgesim::sim::summarize;
use fastsplit_core::edgesim::{
    parse_scenario, simulate_all, write_csv, Band, ChannelCondition, RateTable, Scenario, Strategy,
};
use fastsplit_core::fixtures::{self, FIXTURE_NAMES};
use fastsplit_core::oracle::oracle_check;
use fastsplit_core::profile::{parse_model_profile, validate_profile, ModelProfile};
use fastsplit_core::splitter::optimal_split;

#[derive(Parser)]
#[command(name = "fastsplit", version, about = "Delay-optimal device/server model splitting")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the optimal split of one profile under fixed rates.
    Split(SplitArgs),
    /// Compare the min-cut splitter against exhaustive enumeration.
    OracleCheck {
        #[arg(long, default_value_t = 1000)]
        seeds: u64,
        #[arg(long, default_value_t = 12)]
        max_layers: usize,
    },
    /// Run the dynamic edge-network simulation.
    Simulate(SimArgs),
    /// Check a profile (and optionally a scenario) and print diagnostics.
    Validate {
        /// Profile file or built-in fixture name.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Print a built-in profile or scenario preset.
    GenFixture {
        /// Fixture name, or `scenario` for a scenario preset. Omit to list.
        name: Option<String>,
        #[arg(long, value_enum, default_value_t = BandArg::Mmwave)]
        band: BandArg,
        #[arg(long, value_enum, default_value_t = ConditionArg::Normal)]
        condition: ConditionArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct SplitArgs {
    /// Profile file or built-in fixture name.
    #[arg(long)]
    profile: String,
    /// Uplink rate, bytes per second.
    #[arg(long)]
    rate_up: u64,
    /// Downlink rate, bytes per second.
    #[arg(long)]
    rate_down: u64,
    #[arg(long, default_value_t = 1)]
    iters: u64,
    #[arg(long)]
    blockwise: bool,
    /// Abstract no block unless every block passes the intra-block test.
    #[arg(long, requires = "blockwise")]
    strict_alg3: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Consistent)]
    mode: ModeArg,
    /// Do not charge the raw input when no layer runs on the device.
    #[arg(long)]
    no_input_cost: bool,
    /// Also write the restructured graph in Graphviz format.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimArgs {
    /// Scenario config file. Without it a preset is built from
    /// --band, --condition and --seed.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BandArg::Mmwave)]
    band: BandArg,
    #[arg(long, value_enum, default_value_t = ConditionArg::Normal)]
    condition: ConditionArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the scenario's epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Profile file or built-in fixture name.
    #[arg(long, default_value = "googlenet")]
    profile: String,
    /// proposed, oss, device-only or all.
    #[arg(long, default_value = "all")]
    strategy: String,
    /// SNR to rate CSV replacing the Shannon rate.
    #[arg(long)]
    rate_table: Option<PathBuf>,
    #[arg(long, env = "FASTSPLIT_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Consistent,
    PaperLiteral,
}

#[derive(Clone, Copy, ValueEnum)]
enum BandArg {
    Sub6,
    Mmwave,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditionArg {
    Good,
    Normal,
    Poor,
}

impl From<BandArg> for Band {
    fn from(b: BandArg) -> Self {
        match b {
            BandArg::Sub6 => Band::Sub6,
            BandArg::Mmwave => Band::Mmwave,
        }
    }
}

impl From<ConditionArg> for ChannelCondition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::Good => ChannelCondition::Good,
            ConditionArg::Normal => ChannelCondition::Normal,
            ConditionArg::Poor => ChannelCondition::Poor,
        }
    }
}

/// Failure that has already been reported on stdout.
#[derive(Debug)]
struct Reported(&'static str, String);

impl std::fmt::Display for Reported {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Reported {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            let module = e
                .chain()
                .find_map(|c| c.downcast_ref::<fastsplit_core::Error>())
                .map(|c| c.module())
                .or_else(|| e.downcast_ref::<Reported>().map(|r| r.0))
                .unwrap_or("cli");
            eprintln!("error [{module}]: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn run(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Split(a) => split(a),
        Cmd::OracleCheck { seeds, max_layers } => {
            let c = oracle_check(seeds, max_layers)?;
            let line = format!("{}/{} match", c.matched, c.seeds);
            emit(&json!({ "result": line, "seeds": c.seeds, "matched": c.matched, "mismatches": c.mismatches }))?;
            eprintln!("{line}");
            if !c.passed() {
                return Err(Reported("oracle", format!("{} of {} seeds disagree", c.mismatches.len(), c.seeds)).into());
            }
            Ok(())
        }
        Cmd::Simulate(a) => simulate(a),
        Cmd::Validate { profile, scenario } => validate(profile, scenario),
        Cmd::GenFixture { name, band, condition, seed, out } => {
            let Some(name) = name else {
                let mut out = std::io::stdout().lock();
                for n in FIXTURE_NAMES.iter().chain(&["scenario"]) {
                    writeln!(out, "{n}")?;
                }
                return Ok(());
            };
            let text = if name == "scenario" {
                Scenario::preset(band.into(), condition.into(), seed).to_json()
            } else {
                fixtures::fixture(&name)?.to_json()
            };
            match out {
                Some(path) => fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => writeln!(std::io::stdout().lock(), "{text}")?,
            }
            Ok(())
        }
    }
}

fn emit(v: &Value) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

/// A path that exists is read as a profile document; anything else is
/// looked up among the built-in fixtures.
fn load_profile(spec: &str) -> anyhow::Result<ModelProfile> {
    let path = Path::new(spec);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {spec}"))?;
        return parse_model_profile(&text).with_context(|| format!("parsing {spec}"));
    }
    fixtures::fixture(spec).with_context(|| format!("`{spec}` is neither a file nor a fixture"))
}

fn split(a: SplitArgs) -> anyhow::Result<()> {
    let p = load_profile(&a.profile)?;
    let mode = match a.mode {
        ModeArg::Consistent => WeightMode::Consistent,
        ModeArg::PaperLiteral => WeightMode::PaperLiteral,
    };
    let n = NetParams::new(a.rate_up, a.rate_down, a.iters)?
        .with_mode(mode)
        .with_input_cost(!a.no_input_cost);

    let (decision, abstracted, graph) = if a.blockwise {
        let o = blockwise_split_with(&p, &n, BlockwiseOptions { strict_alg3: a.strict_alg3 })?;
        let ids: Vec<String> = o.abstracted.iter().map(|&i| p.blocks()[i].annotation.block_id.clone()).collect();
        (o.decision, Some(ids), o.graph)
    } else {
        (optimal_split(&p, &n)?, None, build_split_dag(&p, &n)?)
    };
    let r = restructure(&graph)?;
    if let Some(path) = &a.dot {
        fs::write(path, r.to_dot()).with_context(|| format!("writing {}", path.display()))?;
    }

    let part = &decision.partition;
    let mut doc = json!({
        "model": p.name(),
        "method": decision.method,
        "weight_mode": n.weight_mode,
        "input_cost": n.input_cost,
        "rate_up_bps": n.rate_up_bps,
        "rate_down_bps": n.rate_down_bps,
        "local_iters": n.local_iters,
        "device": part.device_ids(&p),
        "server": part.server_ids(&p),
        "cut_value_us": decision.cut_value_us,
        "delay_us": decision.delay_us,
        "graph": { "vertices": r.vertex_count(), "arcs": r.arc_count() },
    });
    if let Some(ids) = abstracted {
        doc["abstracted_blocks"] = json!(ids);
    }
    emit(&doc)?;

    eprintln!("{:<14} {}", "model", p.name());
    eprintln!("{:<14} {}", "method", decision.method);
    eprintln!("{:<14} {} of {} layers", "device layers", part.device_layer_count(), p.num_layers());
    eprintln!("{:<14} {}", "device", part.device_ids(&p).join(","));
    eprintln!("{:<14} {} us", "cut value", decision.cut_value_us);
    eprintln!("{:<14} {} us", "delay", decision.delay_us);
    Ok(())
}

fn simulate(a: SimArgs) -> anyhow::Result<()> {
    let mut sc = match &a.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_scenario(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => Scenario::preset(a.band.into(), a.condition.into(), a.seed),
    };
    if let Some(e) = a.epochs {
        sc.epochs = e;
    }
    if let Some(path) = &a.rate_table {
        sc.rate_table = Some(RateTable::from_csv_path(path)?.rows().to_vec());
    }
    sc.check()?;
    let p = load_profile(&a.profile)?;
    let diags = validate_profile(&p);
    if !diags.is_empty() {
        bail!("profile has {} diagnostics; run `fastsplit validate`", diags.len());
    }
    let strategies: Vec<Strategy> = if a.strategy == "all" {
        Strategy::ALL.to_vec()
    } else {
        a.strategy
            .split(',')
            .map(|s| s.trim().parse::<Strategy>())
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow::anyhow!("{e}"))?
    };

    let runs = simulate_all(&sc, &p, &strategies)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let csv_path = a.out.join("epochs.csv");
    let file = fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    write_csv(std::io::BufWriter::new(file), runs.iter().flat_map(|(_, r)| r))?;
    let summary = summarize(&sc, &p, &runs);
    let summary_path = a.out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    emit(&serde_json::to_value(&summary)?)?;

    for (s, total) in &summary.total_delay_us {
        let pct = summary
            .proposed_reduction_pct
            .get(s)
            .map(|v| format!("{v:+.2}%"))
            .unwrap_or_default();
        eprintln!("{:<12} {:>16} us {}", s.name(), total, pct);
    }
    eprintln!("wrote {} and {}", csv_path.display(), summary_path.display());
    Ok(())
}

fn validate(profile: Option<String>, scenario: Option<PathBuf>) -> anyhow::Result<()> {
    if profile.is_none() && scenario.is_none() {
        bail!("nothing to validate: pass --profile and/or --scenario");
    }
    let mut diagnostics = Vec::new();
    if let Some(spec) = &profile {
        let p = load_profile(spec)?;
        for d in validate_profile(&p) {
            diagnostics.push(json!({ "module": "model-profile", "subject": d.subject, "rule": d.rule, "message": d.message }));
        }
    }
    if let Some(path) = &scenario {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if let Err(e) = parse_scenario(&text) {
            diagnostics.push(json!({ "module": "edgesim", "subject": path.display().to_string(), "rule": "scenario", "message": e.to_string() }));
        }
    }
    emit(&json!({ "diagnostics": diagnostics }))?;
    for d in &diagnostics {
        eprintln!("{}: {} [{}] {}", d["module"].as_str().unwrap_or(""), d["subject"].as_str().unwrap_or(""), d["rule"].as_str().unwrap_or(""), d["message"].as_str().unwrap_or(""));
    }
    if diagnostics.is_empty() {
        eprintln!("ok");
        Ok(())
    } else {
        Err(Reported("model-profile", format!("{} diagnostics", diagnostics.len())).into())
    }
}
