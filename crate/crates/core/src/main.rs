use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use nurules::acceptance::{Suite, DEFAULT_MASTER_SEED};
use nurules::ensemble::{
    default_parallelism, run_ensemble_with, run_trajectory_with, trajectory_seed, EnsembleOptions,
    RecordCollector, RunOptions, PARALLELISM_ENV,
};
use nurules::model::{ComponentId, LoggedEvent};
use nurules::scenario::{self, Scenario, BUILTIN_NAMES};
use nurules::{export_config, oracle, parse_config};

#[derive(Parser)]
#[command(name = "nurules", version, about = "Ready-state reduction simulator")]
struct Cli {
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Built-in name (`counter-chain:K`, `three-level-atom:STRONG,WEAK`
    /// take parameters) or a path to a TOML scenario.
    #[arg(long, short)]
    scenario: String,
    /// Overrides the scenario horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Disables blocking.
    #[arg(long)]
    unblocked: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble and write PREFIX.csv and PREFIX.json.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, short = 'n', default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        master_seed: u64,
        /// Worker threads; 0 picks the machine default.
        #[arg(long, env = PARALLELISM_ENV, default_value_t = 0)]
        parallelism: usize,
        /// Writes PREFIX.csv and PREFIX.json.
        #[arg(long, short, value_name = "PREFIX")]
        output: Option<PathBuf>,
        /// Also record every trajectory's label and seed in the JSON report.
        #[arg(long)]
        keep_outcomes: bool,
    },
    /// Exact outcome law, plus a first-collapse CDF when asked.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Component whose first-collapse time distribution is printed.
        #[arg(long)]
        cdf: Option<String>,
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
    /// Print a built-in scenario as TOML.
    ExportScenario { name: String },
    /// List built-in scenarios.
    List,
    /// Run the acceptance criteria.
    Verify {
        #[arg(long, default_value_t = DEFAULT_MASTER_SEED)]
        master_seed: u64,
        #[arg(long, env = PARALLELISM_ENV, default_value_t = 0)]
        parallelism: usize,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Print one trajectory as JSON lines.
    Trace {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        master_seed: u64,
        /// Trajectory index within the ensemble for `master_seed`.
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Emit weight samples at this spacing.
        #[arg(long)]
        dense_dt: Option<f64>,
    },
}

fn load(args: &ScenarioArgs) -> Result<Scenario, String> {
    let sc = load_named(&args.scenario)?;
    let sc = match args.horizon {
        Some(h) => sc.with_horizon(Some(h)).map_err(|e| e.to_string())?,
        None => sc,
    };
    Ok(if args.unblocked {
        sc.with_blocking(false)
    } else {
        sc
    })
}

fn load_named(name: &str) -> Result<Scenario, String> {
    if let Some((base, params)) = name.split_once(':') {
        let nums: Result<Vec<f64>, _> = params.split(',').map(|p| p.trim().parse()).collect();
        let nums = nums.map_err(|e| format!("bad parameters in {name:?}: {e}"))?;
        return match (base, nums.as_slice()) {
            ("counter-chain", [k]) if k.fract() == 0.0 && *k >= 0.0 => {
                scenario::counter_chain(*k as usize)
            }
            ("three-level-atom", [s, w]) => scenario::three_level_atom(*s, *w),
            _ => return Err(format!("unknown parameterised scenario {name:?}")),
        }
        .map_err(|e| e.to_string());
    }
    if BUILTIN_NAMES.contains(&name) {
        return scenario::builtin(name).map_err(|e| e.to_string());
    }
    let text = fs::read_to_string(name).map_err(|e| format!("{name}: {e}"))?;
    parse_config(&text).map_err(|e| format!("{name}: {e}"))
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run {
            scenario,
            trials,
            master_seed,
            parallelism,
            output,
            keep_outcomes,
        } => {
            let sc = load(&scenario)?;
            let options = EnsembleOptions {
                run: RunOptions::default(),
                keep_outcomes,
            };
            let report = run_ensemble_with(&sc, trials, master_seed, parallelism, options)
                .map_err(|e| e.to_string())?;
            // Recurrent event trees grow too fast to enumerate on every run.
            let law = if sc.is_recurrent() {
                None
            } else {
                match oracle::outcome_law(&sc) {
                    Ok(l) => Some(l),
                    Err(e) => {
                        log::info!("no oracle law: {e}");
                        None
                    }
                }
            };
            let mut labels: Vec<&String> = report.labels.keys().collect();
            if let Some(l) = &law {
                labels.extend(l.probabilities.keys());
            }
            labels.sort();
            labels.dedup();
            let mut rows = Vec::new();
            for label in labels {
                let stat = report.labels.get(label);
                rows.push((
                    label.clone(),
                    stat.map_or(0, |s| s.count),
                    stat.map_or(0.0, |s| s.frequency),
                    stat.map_or(0.0, |s| s.std_error),
                    law.as_ref().map(|l| l.get(label)),
                ));
            }
            println!(
                "{} trials={} master_seed={} wall={:.2}s violations={} max_drift={:.2e}",
                report.scenario,
                report.trials,
                report.master_seed,
                report.wall_clock_seconds,
                report.violations.total(),
                report.max_modulus_drift
            );
            println!(
                "{:<40} {:>9} {:>10} {:>10} {:>10}",
                "label", "count", "freq", "stderr", "oracle"
            );
            for (label, count, f, se, p) in &rows {
                let p = p.map_or("-".to_string(), |p| format!("{p:.6}"));
                println!("{label:<40} {count:>9} {f:>10.6} {se:>10.6} {p:>10}");
            }
            if let Some(prefix) = output {
                let csv_path = prefix.with_extension("csv");
                let mut w = csv::Writer::from_path(&csv_path)
                    .map_err(|e| format!("{}: {e}", csv_path.display()))?;
                let csv_err = |e: csv::Error| format!("{}: {e}", csv_path.display());
                w.write_record([
                    "label",
                    "count",
                    "frequency",
                    "std_error",
                    "oracle_probability",
                ])
                .map_err(csv_err)?;
                for (label, count, f, se, p) in &rows {
                    w.write_record([
                        label.clone(),
                        count.to_string(),
                        f.to_string(),
                        se.to_string(),
                        p.map_or(String::new(), |p| p.to_string()),
                    ])
                    .map_err(csv_err)?;
                }
                w.flush().map_err(|e| e.to_string())?;
                let json_path = prefix.with_extension("json");
                let mut doc = serde_json::to_value(&report).map_err(|e| e.to_string())?;
                doc["oracle"] = law.as_ref().map_or(Value::Null, |l| json!(l.probabilities));
                fs::write(
                    &json_path,
                    serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?,
                )
                .map_err(|e| format!("{}: {e}", json_path.display()))?;
            }
            Ok(true)
        }
        Command::Oracle {
            scenario,
            cdf,
            points,
        } => {
            let sc = load(&scenario)?;
            let law = oracle::outcome_law(&sc).map_err(|e| e.to_string())?;
            for (label, p) in &law.probabilities {
                println!("{label}\t{p:.12}");
            }
            if law.truncated > 0.0 {
                println!("(truncated mass {:.3e})", law.truncated);
            }
            if let Some(name) = cdf {
                let f = oracle::hit_time_cdf(&sc, &name).map_err(|e| e.to_string())?;
                let end = sc
                    .horizon()
                    .or_else(|| f.breakpoints().last().copied())
                    .unwrap_or(1.0);
                println!("cdf {name} (limit {:.12})", f.limit());
                let steps = points.max(2) - 1;
                for i in 0..=steps {
                    let t = end * i as f64 / steps as f64;
                    println!("{t:.6}\t{:.12}", f.eval(t));
                }
            }
            Ok(true)
        }
        Command::ExportScenario { name } => {
            let sc = load_named(&name)?;
            print!("{}", export_config(&sc).map_err(|e| e.to_string())?);
            Ok(true)
        }
        Command::List => {
            for name in BUILTIN_NAMES {
                println!("{name}");
            }
            Ok(true)
        }
        Command::Verify {
            master_seed,
            parallelism,
            only,
        } => {
            let workers = if parallelism == 0 {
                default_parallelism()
            } else {
                parallelism
            };
            let suite = Suite::new(master_seed, workers);
            let ids = if only.is_empty() {
                (1..=9).collect()
            } else {
                only
            };
            let mut ok = true;
            for id in ids {
                let r = suite.criterion(id);
                ok &= r.passed;
                println!("{r}");
            }
            Ok(ok)
        }
        Command::Trace {
            scenario,
            master_seed,
            index,
            dense_dt,
        } => {
            let sc = load(&scenario)?;
            let seed = trajectory_seed(master_seed, index);
            let mut log = RecordCollector::default();
            let options = RunOptions {
                horizon: None,
                dense_dt,
            };
            let out =
                run_trajectory_with(&sc, seed, &mut log, options).map_err(|e| e.to_string())?;
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            for e in &log.events {
                writeln!(w, "{}", trace_line(&sc, e)).map_err(|e| e.to_string())?;
            }
            let end = json!({ "outcome": out.outcome, "master_seed": master_seed, "index": index, "seed": seed });
            writeln!(w, "{end}").map_err(|e| e.to_string())?;
            Ok(true)
        }
    }
}

fn weights_hash(weights: &[(ComponentId, f64)]) -> String {
    let mut h = Sha256::new();
    for (c, w) in weights {
        h.update((c.index() as u64).to_le_bytes());
        h.update(w.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn trace_line(sc: &Scenario, e: &LoggedEvent) -> Value {
    let graph = sc.graph();
    let weights: Map<String, Value> = e
        .weights
        .iter()
        .map(|&(c, w)| (graph.component_name(c).to_string(), json!(w)))
        .collect();
    json!({
        "time": e.event.time,
        "kind": e.event.kind,
        "component": e.event.component.map(|c| graph.component_name(c)),
        "edge": e.event.edge.map(|x| graph.edge_name(x)),
        "weights": weights,
        "weights_sha256": weights_hash(&e.weights),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
