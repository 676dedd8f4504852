use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use mrl_core::analysis::{alpha_sweep, detect_plateau, ExperimentStats, SweepScenario};
use mrl_core::config::RunConfig;
use mrl_core::sim::{run_group_experiment, run_session_traced, ExperimentSpec, PhaseSpec};
use mrl_core::store::{read_log_file, replay_log, split_sessions, EventLog, EventPayload, JsonLinesSink};
use mrl_core::{CatalogKind, GroupAssignment, PhaseSchedule, SessionLogSummary};
use mrl_service::{SystemClock, TrainerService};

use crate::{Common, EXIT_REPLAY_MISMATCH};

const PLATEAU_TOLERANCE: f64 = 1e-6;

struct Setup {
    run: RunConfig,
    catalog: CatalogKind,
    seed: u64,
    out: PathBuf,
    timestamps: bool,
}

impl Setup {
    fn new(common: &Common) -> Result<Self> {
        let run = match &common.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let catalog = common.catalog.unwrap_or_else(|| run.catalog_or(CatalogKind::Robot4));
        let seed = common.seed.or(run.engine.seed).unwrap_or(0);
        let out = common
            .out
            .clone()
            .or_else(|| std::env::var_os("MRL_LOG_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("mrl-out"));
        Ok(Self { run, catalog, seed, out, timestamps: !common.no_timestamps })
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }

    fn timestamp(&self) -> u64 {
        if !self.timestamps {
            return 0;
        }
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out_dir()?.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn create_log(&self, name: &str) -> Result<(PathBuf, EventLog<JsonLinesSink<BufWriter<File>>>)> {
        let path = self.out_dir()?.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, EventLog::new(JsonLinesSink::new(BufWriter::new(file)))))
    }
}

pub fn run(common: &Common, group: Option<GroupAssignment>) -> Result<u8> {
    let setup = Setup::new(common)?;
    let group = group.or(setup.run.group).unwrap_or(GroupAssignment::Learned);
    let config = setup.run.engine_config(setup.catalog, Some(setup.seed))?;
    let profile = setup.run.novice_for(setup.catalog)?;
    let schedule = setup.run.schedule_for(setup.catalog);

    let (summary, trail) = run_session_traced(&profile, &schedule, group, &config)?;
    let (path, mut log) = setup.create_log("run.jsonl")?;
    log.append_all(&format!("{group}-{:016x}", setup.seed), setup.timestamp(), trail)?;

    println!("{}", describe(&summary, config.n));
    println!("log: {}", path.display());
    Ok(0)
}

fn describe(summary: &SessionLogSummary, n: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "group: {}", summary.group);
    for m in &summary.mistakes_per_phase {
        let kind = if m.reinforced { "reinforced" } else { "unreinforced" };
        let _ = writeln!(out, "  {:<20} {:>4} mistakes ({kind})", m.phase.to_string(), m.count);
    }
    let trajectory = summary.entropy_trajectory(n);
    let _ = writeln!(out, "interactions: {}", summary.records.len());
    let _ = writeln!(
        out,
        "entropy: {:.4} -> {:.4} bits",
        trajectory.first().copied().unwrap_or(f64::NAN),
        trajectory.last().copied().unwrap_or(f64::NAN)
    );
    let _ = writeln!(out, "total regret: {:.6}", summary.total_regret());
    if let Some(p) = summary.identified_preference {
        let _ = write!(out, "identified preference: {p}");
        if let Some(t) = summary.true_preference {
            let _ = write!(out, " (true {t})");
        }
    }
    out.trim_end().to_owned()
}

pub fn sweep(common: &Common, alphas: &[f64], seeds: usize) -> Result<u8> {
    let setup = Setup::new(common)?;
    let config = setup.run.engine_config(setup.catalog, Some(setup.seed))?;
    let n = config.n;
    let scenario = SweepScenario {
        profile: setup.run.novice_for(setup.catalog)?,
        schedule: setup.run.schedule_for(setup.catalog),
        config,
    };
    let threshold = 0.9 * (n as f64).log2();
    println!("{:>8} {:>8} {:>12} {:>10} {:>10}", "alpha", "points", "final (bits)", "< 0.9 max", "plateau");
    for (alpha, series) in alpha_sweep(alphas, &scenario, seeds)? {
        let path = setup.write(&format!("sweep-alpha-{alpha}.csv"), &series.to_csv())?;
        let show = |v: Option<u64>| v.map_or_else(|| "-".to_owned(), |t| t.to_string());
        println!(
            "{alpha:>8} {:>8} {:>12.4} {:>10} {:>10}  {}",
            series.len(),
            series.last().unwrap_or(f64::NAN),
            show(series.first_below(threshold)),
            show(detect_plateau(&series, PLATEAU_TOLERANCE)),
            path.display()
        );
    }
    Ok(0)
}

pub fn experiment(common: &Common, groups: &[GroupAssignment], subjects: usize) -> Result<u8> {
    let setup = Setup::new(common)?;
    let spec = ExperimentSpec {
        groups: groups.to_vec(),
        subjects,
        schedule: setup.run.schedule_for(setup.catalog),
        config: setup.run.engine_config(setup.catalog, Some(setup.seed))?,
        master_seed: setup.seed,
    };
    let population = setup.run.population_for(setup.catalog)?;
    let result = run_group_experiment(&spec, &population)?;

    let (log_path, mut log) = setup.create_log("experiment.jsonl")?;
    let timestamp = setup.timestamp();
    for subject in &result.subjects {
        log.append_all(&subject.session_id(), timestamp, subject.trail.iter().cloned())?;
    }
    let report = result.stats.render_report();
    let report_path = setup.write("report.txt", &report)?;
    print!("{report}");
    println!("\nreport: {}\nlog: {}", report_path.display(), log_path.display());
    Ok(0)
}

pub fn analyze(common: &Common, log: &Path) -> Result<u8> {
    let setup = Setup::new(common)?;
    let events = read_log_file(log).with_context(|| format!("reading {}", log.display()))?;
    let mut entropy_csv = String::from("session_id,t,entropy\n");
    let mut regret_csv = String::from("session_id,group,total_mistakes,total_regret\n");
    let mut sessions: Vec<SessionLogSummary> = Vec::new();
    for (id, events) in split_sessions(&events) {
        let n = match events.first().map(|e| &e.payload) {
            Some(EventPayload::SessionStarted { config, .. }) => config.n,
            _ => bail!("session {id} does not start with SessionStarted"),
        };
        let summary = mrl_core::store::replay_session(&events).with_context(|| format!("session {id}"))?;
        for (t, h) in summary.entropy_trajectory(n).iter().enumerate() {
            let _ = writeln!(entropy_csv, "{id},{t},{h}");
        }
        let _ = writeln!(regret_csv, "{id},{},{},{}", summary.group, summary.total_mistakes(), summary.total_regret());
        sessions.push(summary);
    }

    let groups: Vec<GroupAssignment> =
        GroupAssignment::ALL.into_iter().filter(|g| sessions.iter().any(|s| s.group == *g)).collect();
    let mut phases: Vec<PhaseSpec> = Vec::new();
    for m in sessions.iter().flat_map(|s| &s.mistakes_per_phase) {
        if !phases.iter().any(|p| p.label == m.phase) {
            phases.push(PhaseSpec { label: m.phase, steps: 1, reinforced: m.reinforced });
        }
    }
    let pairs: Vec<(GroupAssignment, &SessionLogSummary)> = sessions.iter().map(|s| (s.group, s)).collect();
    let stats_text = if pairs.iter().all(|(g, _)| pairs.iter().filter(|(h, _)| h == g).count() >= 2) {
        ExperimentStats::from_sessions(&groups, &PhaseSchedule { phases }, &pairs)?.render_report()
    } else {
        "Statistics need at least two sessions per group.\n".to_owned()
    };

    setup.write("entropy.csv", &entropy_csv)?;
    setup.write("regret.csv", &regret_csv)?;
    let stats_path = setup.write("stats.txt", &stats_text)?;
    print!("{stats_text}");
    println!("\n{} sessions analysed; outputs in {}", sessions.len(), stats_path.parent().unwrap_or(Path::new(".")).display());
    Ok(0)
}

pub fn replay(log: &Path) -> Result<u8> {
    let events = read_log_file(log).with_context(|| format!("reading {}", log.display()))?;
    if events.is_empty() {
        bail!("{} contains no events", log.display());
    }
    let mut failures = 0;
    let results = replay_log(&events);
    for (id, result) in &results {
        match result {
            Ok(summary) => println!("{id}: ok ({} interactions)", summary.records.len()),
            Err(e) => {
                failures += 1;
                println!("{id}: FAILED: {e}");
            }
        }
    }
    println!("{} of {} sessions replayed cleanly", results.len() - failures, results.len());
    Ok(if failures == 0 { 0 } else { EXIT_REPLAY_MISMATCH })
}

pub fn serve(common: &Common, port: u16) -> Result<u8> {
    let setup = Setup::new(common)?;
    let service = TrainerService::with_log_dir(setup.out_dir()?, Arc::new(SystemClock), setup.seed)?;
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(mrl_service::serve(Arc::new(service), addr, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(0)
}
