use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccrelay_cli::attacks::{run_suite, Attack};
use ccrelay_cli::audit::{audit, render_json, render_text};
use ccrelay_cli::benchmark::{self, batch_sweep, gap_of, is_nondecreasing, Mode};
use ccrelay_cli::exit;
use ccrelay_cli::report::ScenarioReport;
use ccrelay_core::testbed::{Scenario, SimError, Simulation};
use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "ccrelay", version, about = "Confidential cross-chain relay testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Wallclock,
    Virtual,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON-lines report; the summary goes next to it as `<output>.summary.json`.
        /// Without it the report goes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Persist each relay node's chain under this directory.
        #[arg(long)]
        chain_dir: Option<PathBuf>,
    },
    /// Run the adversary scripts against a base scenario.
    AttackSuite {
        #[arg(long)]
        config: PathBuf,
        /// Restrict to these attacks (repeatable).
        #[arg(long, value_parser = |s: &str| s.parse::<Attack>())]
        only: Vec<Attack>,
        /// Also rerun each attack with its defense disabled and require it to fail.
        #[arg(long)]
        negative_controls: bool,
        #[arg(long)]
        json: bool,
    },
    /// Measure end-to-end latency and per-block processing time.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 4000)]
        txs: usize,
        /// Gap between emissions; defaults to the workload's `every_ms`, else 2.
        #[arg(long)]
        gap_ms: Option<u64>,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,3000")]
        batch_sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Wallclock)]
        mode: ModeArg,
        /// Full JSON report, including per-transaction latency.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the on-chain evidence for one session.
    Audit {
        #[arg(long)]
        chain_dir: PathBuf,
        #[arg(long)]
        session: String,
        #[arg(long)]
        json: bool,
    },
}

fn load(path: &Path) -> Result<Scenario, ExitCode> {
    Scenario::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(exit::CONFIG as u8)
    })
}

fn write(path: &Path, text: &str) -> Result<(), ExitCode> {
    std::fs::write(path, text).map_err(|e| {
        eprintln!("error: writing {}: {e}", path.display());
        ExitCode::from(exit::CONFIG as u8)
    })
}

fn sim_failure(e: SimError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        SimError::Deadlock { .. } => ExitCode::from(exit::WORKLOAD_FAILED as u8),
        _ => ExitCode::from(exit::CONFIG as u8),
    }
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    match cli.command {
        Command::Run { scenario, seed, output, chain_dir } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let sim = match &chain_dir {
                Some(dir) => Simulation::with_chain_dir(s, dir),
                None => Simulation::new(s),
            }
            .map_err(sim_failure)?;
            let result = sim.run().map_err(sim_failure)?;
            let report = ScenarioReport::from_result(&result);
            match &output {
                Some(path) => {
                    write(path, &report.to_jsonl())?;
                    let mut summary = path.clone().into_os_string();
                    summary.push(".summary.json");
                    write(Path::new(&summary), &report.summary_json())?;
                    eprint!("{}", report.summary_json());
                }
                None => print!("{}", report.to_jsonl()),
            }
            if !report.summary.all_completed {
                eprintln!("workload did not complete: {:?}", report.summary.outcomes);
                return Err(ExitCode::from(exit::WORKLOAD_FAILED as u8));
            }
        }
        Command::AttackSuite { config, only, negative_controls, json } => {
            let base = load(&config)?;
            let attacks = if only.is_empty() { Attack::ALL.to_vec() } else { only };
            let report = run_suite(&base, &attacks, negative_controls).map_err(|e| {
                eprintln!("error: {e}");
                ExitCode::from(exit::CONFIG as u8)
            })?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                for c in &report.cases {
                    let verdict = if c.passed { "PASS" } else { "FAIL" };
                    println!("{verdict}  {:<20} expected {:<26} observed {}", c.attack.name(), c.expected, c.observed);
                    if !c.passed {
                        for line in &c.trace {
                            println!("      {line}");
                        }
                    }
                }
                for (a, flipped) in &report.controls {
                    let verdict = if *flipped { "PASS" } else { "FAIL" };
                    println!("{verdict}  {:<20} negative control {}", a.name(), if *flipped { "fails as it should" } else { "still passes" });
                }
            }
            if !report.passed() {
                return Err(ExitCode::from(exit::ATTACK_SUITE as u8));
            }
        }
        Command::Benchmark { config, txs, gap_ms, batch_sizes, reps, mode, output } => {
            let base = load(&config)?;
            let gap = gap_ms.unwrap_or_else(|| gap_of(&base));
            let mode = match mode {
                ModeArg::Wallclock => Mode::Wallclock,
                ModeArg::Virtual => Mode::Virtual,
            };
            let fail = |e: benchmark::BenchError| {
                eprintln!("error: {e}");
                ExitCode::from(exit::CONFIG as u8)
            };
            let report = benchmark::run(&base, mode, txs, gap).map_err(fail)?;
            let sweep = if batch_sizes.is_empty() { Vec::new() } else { batch_sweep(&base, &batch_sizes, reps).map_err(fail)? };
            let l = &report.latency;
            println!("transactions  {} sent, {} answered, gap {} ms, batch interval {} ms", report.txs, report.completed, report.gap_ms, report.batch_interval_ms);
            println!("latency ms    min {:.2}  p50 {:.2}  p90 {:.2}  p99 {:.2}  max {:.2}  mean {:.2}", l.min, l.p50, l.p90, l.p99, l.max, l.mean);
            println!("relay blocks  {}  mean processing {:.1} us", report.blocks.len(), report.mean_block_processing_us);
            let st = &report.sawtooth;
            println!(
                "sawtooth      expected period {:.2} tx, acf peak at lag {} ({:.3}) -> {}",
                st.expected_period,
                st.peak_lag,
                st.peak_acf,
                if st.detected { "detected" } else { "not detected" }
            );
            for p in &sweep {
                println!("batch {:>5}    {:>12.1} us per block", p.batch_size, p.processing_us);
            }
            if !sweep.is_empty() {
                println!("sweep         {}", if is_nondecreasing(&sweep) { "nondecreasing" } else { "NOT monotone" });
            }
            if let Some(path) = output {
                let doc = serde_json::json!({ "benchmark": report, "sweep": sweep });
                write(&path, &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))?;
            }
            if report.completed < report.txs {
                return Err(ExitCode::from(exit::WORKLOAD_FAILED as u8));
            }
        }
        Command::Audit { chain_dir, session, json } => match audit(&chain_dir, &session) {
            Ok(trail) => print!("{}", if json { render_json(&trail) } else { render_text(&trail) }),
            Err(e) => {
                eprintln!("{e}");
                return Err(ExitCode::from(exit::WORKLOAD_FAILED as u8));
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("CCRELAY_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
