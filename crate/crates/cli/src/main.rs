mod settings;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use longact::agent::{AgentConfig, ExternalReasoner, ProcessTransport, Reasoner};
use longact::metrics::{calibrated_power_law_series, improvement_rate, match_power_law_exponent, segmentation_levels, MetricsReport};
use longact::session::{self, run_batch, EpisodeStore, ReasonerKind, RunConfig, RunManifest, SessionConfig};
use longact::sim::generate_layout;
use longact::task::{generate_episode, CategoryTag, Episode, Scenario};
use longact::trajectory::TrajectoryLog;

use settings::*;

const RUN_MANIFEST_FILE: &str = "manifest.json";
const RUN_LOG_DIR: &str = "logs";
/// Category columns of the summary table.
const TABLE_TAGS: [CategoryTag; 4] = [CategoryTag::PP, CategoryTag::TO, CategoryTag::OC, CategoryTag::Sl];

/// Long-horizon household task benchmark: episode generation, agent runs,
/// evaluation, replay and the teleoperation server.
///
/// Every option can also be set through its LONGACT_* environment variable or
/// in the config file (a table per subcommand). Flags win over the
/// environment, which wins over the file.
#[derive(Parser, Debug)]
#[command(name = "longact", version)]
struct Cli {
    /// TOML config file; `longact.toml` in the working directory is read when present.
    #[arg(long, global = true, env = "LONGACT_CONFIG")]
    config: Option<PathBuf>,
    /// Log verbosity (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate episodes and a corpus manifest.
    Generate(GenerateOpts),
    /// Run a reasoner over a corpus, writing logs and a run manifest.
    Run(RunOpts),
    /// Score trajectory logs; prints a CSV table.
    Evaluate {
        #[command(flatten)]
        opts: EvaluateOpts,
        /// Log files or directories of `.jsonl` logs.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Re-simulate logs and check every recorded result.
    Replay {
        #[command(flatten)]
        opts: ReplayOpts,
        /// Log files or directories; defaults to the manifest's log directory.
        logs: Vec<PathBuf>,
    },
    /// Improvement Rate of a score series (JSON array or whitespace-separated numbers).
    Ir {
        #[command(flatten)]
        opts: IrOpts,
        /// Series file; stdin when absent or `-`.
        input: Option<PathBuf>,
    },
    /// Reference power-law curves for a sweep of IR values, as CSV.
    Curves(CurvesOpts),
    /// Serve the session protocol over TCP for teleoperation.
    Serve(ServeOpts),
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(o) => generate(o.fill(file.generate)),
        Command::Run(o) => run(o.fill(file.run), file.agent, file.session),
        Command::Evaluate { opts, logs } => evaluate(opts.fill(file.evaluate), file.session, &logs),
        Command::Replay { opts, logs } => replay(opts.fill(file.replay), file.session, &logs),
        Command::Ir { opts, input } => ir(opts.fill(file.ir), input.as_deref()),
        Command::Curves(o) => curves(o.fill(file.curves)),
        Command::Serve(o) => serve(o.fill(file.serve), file.session),
    }
}

fn session_config(mut base: SessionConfig, ir_segments: Option<usize>) -> SessionConfig {
    if let Some(n) = ir_segments {
        base.ir_segments = n;
    }
    base
}

fn load_store(path: Option<&Path>) -> anyhow::Result<EpisodeStore> {
    let path = path.context("no episodes given (--episodes, LONGACT_EPISODES or config)")?;
    let store = EpisodeStore::load(path).with_context(|| format!("loading episodes from {}", path.display()))?;
    if store.is_empty() {
        bail!("no episodes in {}", path.display());
    }
    Ok(store)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn generate(o: GenerateOpts) -> anyhow::Result<()> {
    let seed = o.seed.unwrap_or(0);
    let count = o.count.unwrap_or(50);
    let out = o.out.unwrap_or_else(|| PathBuf::from("episodes"));
    let only = match &o.scenario {
        Some(s) => Some(Scenario::from_slug(s).with_context(|| format!("unknown scenario `{s}`"))?),
        None => None,
    };
    let episodes = (0..count as u64)
        .map(|i| {
            let s = seed + i;
            let scenario = only.unwrap_or(Scenario::ALL[(i % 4) as usize]);
            generate_episode(&generate_layout(s), scenario, s).with_context(|| format!("seed {s}"))
        })
        .collect::<anyhow::Result<Vec<Episode>>>()?;
    let manifest = EpisodeStore::new(episodes).save(&out)?;
    println!(
        "wrote {} episodes to {} (mean goal count {:.2})",
        manifest.episodes.len(),
        out.display(),
        manifest.mean_goal_count
    );
    Ok(())
}

fn external_reasoner(command: &str) -> anyhow::Result<Box<dyn Reasoner>> {
    let mut words = command.split_whitespace().map(str::to_owned);
    let program = words.next().context("empty reasoner command")?;
    let args: Vec<String> = words.collect();
    let transport = ProcessTransport::spawn(&program, &args).with_context(|| format!("starting `{command}`"))?;
    Ok(Box::new(ExternalReasoner::new(transport, format!("external:{program}"))))
}

fn run(o: RunOpts, agent: AgentConfig, base: SessionConfig) -> anyhow::Result<()> {
    let store = load_store(o.episodes.as_deref())?;
    let episodes: Vec<Episode> = store.episodes().cloned().collect();
    let out = o.out.unwrap_or_else(|| PathBuf::from("run"));
    let parallelism =
        o.parallelism.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get));
    let config = RunConfig { agent, session: session_config(base, o.ir_segments), concise: o.concise.unwrap_or(false) };
    let name = o.reasoner.unwrap_or_else(|| "oracle".into());

    let (manifest, logs) = if name == "external" {
        let command = o.reasoner_command.context("--reasoner external needs --reasoner-command")?;
        // One process per episode; a failed spawn is recorded as that episode's error.
        let make = |_: &Episode| external_reasoner(&command).unwrap_or_else(|e| panic!("{e:#}"));
        run_batch(&episodes, &name, make, &config, parallelism)
    } else {
        let kind: ReasonerKind = name.parse().map_err(anyhow::Error::msg)?;
        run_batch(&episodes, kind.name(), |e| kind.build(e), &config, parallelism)
    };

    let log_dir = out.join(RUN_LOG_DIR);
    std::fs::create_dir_all(&log_dir)?;
    for (ep, log) in episodes.iter().zip(&logs) {
        if let Some(log) = log {
            let mut w = BufWriter::new(File::create(log_dir.join(format!("{}.jsonl", ep.id)))?);
            log.write_jsonl(&mut w)?;
            w.flush()?;
        }
    }
    write_json(&out.join(RUN_MANIFEST_FILE), &manifest)?;

    for e in manifest.episodes.iter().filter(|e| e.error.is_some()) {
        eprintln!("{}: {}", e.episode_id, e.error.as_deref().unwrap_or_default());
    }
    let a = &manifest.aggregates;
    println!(
        "{} episodes with {}: SR {:.3}, GC {:.3}, nav {:.1}, manip {:.1}, IR {}",
        a.episodes,
        manifest.reasoner,
        a.sr_rate,
        a.mean_gc,
        a.mean_nav_steps,
        a.mean_manip_steps,
        a.mean_ir.map_or("n/a".into(), |v| format!("{v:.4} over {} episodes", a.ir_episodes)),
    );
    Ok(())
}

/// Expands directories into their `.jsonl` files, sorted.
fn log_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut v: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            v.sort();
            files.extend(v);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no logs found");
    }
    Ok(files)
}

fn read_log(path: &Path) -> anyhow::Result<TrajectoryLog> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    TrajectoryLog::read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn check_digest(path: &Path, log: &TrajectoryLog, config: &SessionConfig) {
    if log.header.config_digest != config.digest() {
        log::warn!("{}: recorded under a different session config", path.display());
    }
}

#[derive(serde::Serialize)]
struct LogReport<'a> {
    log: String,
    episode_id: &'a str,
    driver: &'a str,
    report: &'a MetricsReport,
}

fn evaluate(o: EvaluateOpts, base: SessionConfig, inputs: &[PathBuf]) -> anyhow::Result<()> {
    let store = load_store(o.episodes.as_deref())?;
    let config = session_config(base, o.ir_segments);
    let mut rows = Vec::new();
    for path in log_files(inputs)? {
        let log = read_log(&path)?;
        check_digest(&path, &log, &config);
        let ep = store.get(&log.header.episode_id)?;
        let report = session::replay(ep, &log, &config).with_context(|| format!("evaluating {}", path.display()))?;
        rows.push((path, log.header, report));
    }

    if let Some(json) = &o.json {
        let reports: Vec<LogReport> = rows
            .iter()
            .map(|(p, h, r)| LogReport { log: p.display().to_string(), episode_id: &h.episode_id, driver: &h.driver, report: r })
            .collect();
        write_json(json, &reports)?;
    }

    let sink: Box<dyn Write> = match &o.csv {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["episode".to_owned(), "driver".into(), "gc_avg".into()];
    header.extend(TABLE_TAGS.iter().map(|t| format!("gc_{}", t.to_string().to_lowercase())));
    header.extend(["sr", "nav", "manip", "ir"].map(String::from));
    w.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
    for (_, h, r) in &rows {
        let mut rec = vec![h.episode_id.clone(), h.driver.clone(), fmt(Some(r.gc_avg))];
        rec.extend(TABLE_TAGS.iter().map(|t| fmt(r.gc_by_category.get(t).copied())));
        rec.extend([u8::from(r.sr).to_string(), r.nav_steps.to_string(), r.manip_steps.to_string(), fmt(r.ir)]);
        w.write_record(&rec)?;
    }
    // Means over the logs that have the column at all.
    let mean = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    let reports: Vec<&MetricsReport> = rows.iter().map(|(_, _, r)| r).collect();
    let mut rec = vec!["mean".to_owned(), String::new(), fmt(mean(reports.iter().map(|r| r.gc_avg).collect()))];
    rec.extend(TABLE_TAGS.iter().map(|t| fmt(mean(reports.iter().filter_map(|r| r.gc_by_category.get(t).copied()).collect()))));
    rec.extend([
        fmt(mean(reports.iter().map(|r| f64::from(u8::from(r.sr))).collect())),
        fmt(mean(reports.iter().map(|r| r.nav_steps as f64).collect())),
        fmt(mean(reports.iter().map(|r| r.manip_steps as f64).collect())),
        fmt(mean(reports.iter().filter_map(|r| r.ir).collect())),
    ]);
    w.write_record(&rec)?;
    w.flush()?;
    Ok(())
}

fn replay(o: ReplayOpts, base: SessionConfig, inputs: &[PathBuf]) -> anyhow::Result<()> {
    let store = load_store(o.episodes.as_deref())?;
    let mut config = session_config(base, o.ir_segments);
    let manifest: Option<RunManifest> = match &o.manifest {
        Some(p) => Some(serde_json::from_reader(BufReader::new(File::open(p)?)).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    if let Some(m) = &manifest {
        // The run's own session settings decide what its reports mean.
        config = m.config.session.clone();
    }
    let inputs = match (&o.manifest, inputs.is_empty()) {
        (Some(p), true) => vec![p.parent().unwrap_or(Path::new(".")).join(RUN_LOG_DIR)],
        (None, true) => bail!("no logs given"),
        _ => inputs.to_vec(),
    };
    let mut failures = 0usize;
    let files = log_files(&inputs)?;
    for path in &files {
        let outcome = (|| -> anyhow::Result<()> {
            let log = read_log(path)?;
            check_digest(path, &log, &config);
            let report = session::replay(store.get(&log.header.episode_id)?, &log, &config)?;
            if let Some(m) = &manifest {
                let expected = m
                    .episodes
                    .iter()
                    .find(|e| e.episode_id == log.header.episode_id)
                    .and_then(|e| e.report.as_ref())
                    .context("episode has no report in the manifest")?;
                if *expected != report {
                    bail!("replayed report differs from the manifest");
                }
            }
            Ok(())
        })();
        match outcome {
            Ok(()) => println!("ok {}", path.display()),
            Err(e) => {
                failures += 1;
                println!("FAIL {}: {e:#}", path.display());
            }
        }
    }
    if failures > 0 {
        bail!("{failures} of {} logs failed replay", files.len());
    }
    Ok(())
}

fn parse_series(text: &str) -> anyhow::Result<Vec<f64>> {
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("not a number: `{t}`")))
        .collect()
}

fn ir(o: IrOpts, input: Option<&Path>) -> anyhow::Result<()> {
    let mut text = String::new();
    match input.filter(|p| p.as_os_str() != "-") {
        Some(p) => text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            std::io::stdin().read_to_string(&mut text)?;
        }
    }
    let series = parse_series(&text)?;
    let n = o.n.unwrap_or(longact::metrics::DEFAULT_MAX_SEGMENTS);
    if o.levels.unwrap_or(false) {
        for l in segmentation_levels(&series, n)? {
            println!("k={} a_k={:.6e}", l.k, l.a_k);
        }
    }
    println!("{}", improvement_rate(&series, n)?);
    Ok(())
}

fn curves(o: CurvesOpts) -> anyhow::Result<()> {
    let t_max = o.t_max.unwrap_or(1500);
    let n = o.n.unwrap_or(longact::metrics::DEFAULT_MAX_SEGMENTS);
    let targets = o.targets.unwrap_or_else(|| (0..=8).map(|i| f64::from(i) * 0.25).collect());
    let points = o.points.unwrap_or(101).clamp(2, t_max + 1);
    let sink: Box<dyn Write> = match &o.out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["ir", "exponent", "t", "s"])?;
    for target in targets {
        let a = match_power_law_exponent(target, t_max, n).with_context(|| format!("IR {target}"))?;
        let curve = calibrated_power_law_series(a, t_max, n)?;
        for i in 0..points {
            let t = i * t_max / (points - 1);
            w.write_record([target.to_string(), format!("{a:.6}"), t.to_string(), format!("{:.6}", curve[t])])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn serve(o: ServeOpts, base: SessionConfig) -> anyhow::Result<()> {
    let store = Arc::new(load_store(o.episodes.as_deref())?);
    let bind = o.bind.unwrap_or_else(|| "127.0.0.1:7878".into());
    let logs = o.logs.unwrap_or_else(|| PathBuf::from("logs"));
    let handle = session::serve(bind.as_str(), Arc::clone(&store), base, Some(logs.clone()))?;
    println!("serving {} episodes on {}; logs in {}", store.len(), handle.local_addr(), logs.display());
    handle.join();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_formats() {
        assert_eq!(parse_series("[0, 1, 2.5]").unwrap(), vec![0.0, 1.0, 2.5]);
        assert_eq!(parse_series("0 1\n2.5,3").unwrap(), vec![0.0, 1.0, 2.5, 3.0]);
        assert!(parse_series("0 x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
