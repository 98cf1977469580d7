//! Command-line front end.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::Population;
use crate::gang::LogBase;
use crate::metrics::{EntropyNorm, EntropyScope};
use crate::model::{read_headers, read_trace, write_headers, write_trace, AccountName, Action, BlockHeader};
use crate::motif::Shape;
use crate::replay::SampleCadence;
use crate::report::{self, AnalysisParams, ClusterReport, GangsReport, MotifReport, Table};
use crate::synth::{generate_ledger, GenConfig, GroundTruth, PlantKind};
use crate::time::YearMonth;
use crate::Exec;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config or mismatched inputs (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Inputs that do not parse or replay (exit 3).
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "dpos-forensics", version, about = "Voting forensics for delegated proof-of-stake ledgers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ledger with planted anomalies.
    Generate {
        /// TOML generator config.
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Replay a trace and report rejected actions and sampled state.
    Replay(AnalyzeArgs),
    /// Entropy, stake concentration, proxy shares and turnover.
    Metrics(AnalyzeArgs),
    /// Voting-record similarity clusters.
    Cluster(AnalyzeArgs),
    /// Mutual voting motifs.
    Motifs(AnalyzeArgs),
    /// Near-clique scoring and community detection among candidates.
    Gangs(AnalyzeArgs),
    /// Every analysis plus a cross-method summary.
    All(AnalyzeArgs),
    /// Score reports against a generator's truth file.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "DPOSF_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogBaseArg {
    E,
    Ten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Restricted,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PopulationArg {
    LargeStakeholders,
    Proxies,
    DirectVoters,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// JSON-lines action trace.
    #[arg(long)]
    pub trace: PathBuf,
    /// JSON-lines block headers (needed for entropy and turnover).
    #[arg(long)]
    pub headers: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
    /// Similarity threshold for clustering.
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    pub theta: f64,
    /// Motif window in days.
    #[arg(long, default_value_t = 7.0, allow_negative_numbers = true)]
    pub window_days: f64,
    /// Fraction of voters counted as large stakeholders.
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub top_stake_pct: f64,
    /// Fraction of scored candidates flagged as near-clique anomalies.
    #[arg(long, default_value_t = 0.10, allow_negative_numbers = true)]
    pub outlier_pct: f64,
    /// Entropy scopes: positive integers or "all".
    #[arg(long, value_delimiter = ',', default_values_t = vec!["10".to_string(), "20".to_string(), "all".to_string()])]
    pub entropy_n: Vec<String>,
    /// Share normalization for top-n entropy.
    #[arg(long, value_enum, default_value = "restricted")]
    pub entropy_norm: NormArg,
    /// Seed for community detection.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Snapshot cadence: "monthly" or e.g. "7d".
    #[arg(long, default_value = "monthly")]
    pub snapshot_cadence: String,
    /// Logarithm base of the outlierness score.
    #[arg(long, value_enum, default_value = "e")]
    pub log_base: LogBaseArg,
    /// Require two different proxies in eight-shaped motifs.
    #[arg(long)]
    pub strict_distinct_proxies: bool,
    /// Populations to cluster.
    #[arg(long = "population", value_enum, value_delimiter = ',', default_values_t = vec![PopulationArg::LargeStakeholders, PopulationArg::Proxies])]
    pub populations: Vec<PopulationArg>,
    /// Run without data parallelism.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Directory holding cluster/motif/gang reports.
    #[arg(long)]
    pub reports: PathBuf,
    /// Truth file written by `generate`.
    #[arg(long)]
    pub truth: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

impl AnalyzeArgs {
    pub fn params(&self) -> Result<AnalysisParams, CliError> {
        let entropy_n = self
            .entropy_n
            .iter()
            .map(|s| s.parse::<EntropyScope>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::Usage)?;
        let snapshot_cadence = self.snapshot_cadence.parse::<SampleCadence>().map_err(CliError::Usage)?;
        let mut populations = Vec::new();
        for p in &self.populations {
            let p = match p {
                PopulationArg::LargeStakeholders => Population::LargeStakeholders,
                PopulationArg::Proxies => Population::Proxies,
                PopulationArg::DirectVoters => Population::DirectVoters,
            };
            if !populations.contains(&p) {
                populations.push(p);
            }
        }
        let params = AnalysisParams {
            theta: self.theta,
            window_days: self.window_days,
            top_stake_pct: self.top_stake_pct,
            outlier_pct: self.outlier_pct,
            entropy_n,
            entropy_norm: match self.entropy_norm {
                NormArg::Restricted => EntropyNorm::Restricted,
                NormArg::Global => EntropyNorm::Global,
            },
            seed: self.seed,
            snapshot_cadence,
            log_base: match self.log_base {
                LogBaseArg::E => LogBase::Natural,
                LogBaseArg::Ten => LogBase::Ten,
            },
            strict_distinct_proxies: self.strict_distinct_proxies,
            populations,
        };
        params.validate().map_err(CliError::Usage)?;
        Ok(params)
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Provenance embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<InputFile>,
    pub params: serde_json::Value,
}

impl RunManifest {
    pub fn input(&self, role: &str) -> Option<&InputFile> {
        self.inputs.iter().find(|i| i.role == role)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub manifest: RunManifest,
    pub report: T,
}

struct Run {
    command: &'static str,
    argv: Vec<String>,
    inputs: Vec<InputFile>,
}

impl Run {
    fn manifest(&self, params: &impl Serialize) -> RunManifest {
        RunManifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: self.command.into(),
            argv: self.argv.clone(),
            inputs: self.inputs.clone(),
            params: serde_json::to_value(params).expect("params serialize"),
        }
    }
}

fn read_input(role: &str, path: &Path) -> Result<(Vec<u8>, InputFile), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {role} {}: {e}", path.display())))?;
    let file = InputFile {
        role: role.into(),
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    Ok((bytes, file))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn write_report<T: Serialize>(dir: &Path, name: &str, manifest: &RunManifest, report: &T) -> Result<PathBuf, CliError> {
    write_json(dir, name, &Envelope { manifest: manifest.clone(), report })
}

fn write_tables(dir: &Path, tables: &[Table]) -> Result<(), CliError> {
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        t.write(BufWriter::new(file)).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn with_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out } => generate(&config, &out.out, argv),
        Command::Replay(a) => analyze(&a, Analysis::Replay, argv),
        Command::Metrics(a) => analyze(&a, Analysis::Metrics, argv),
        Command::Cluster(a) => analyze(&a, Analysis::Cluster, argv),
        Command::Motifs(a) => analyze(&a, Analysis::Motifs, argv),
        Command::Gangs(a) => analyze(&a, Analysis::Gangs, argv),
        Command::All(a) => analyze(&a, Analysis::All, argv),
        Command::Score(a) => score(&a, argv),
    }
}

fn generate(config: &Path, out: &Path, argv: Vec<String>) -> Result<(), CliError> {
    let (bytes, input) = read_input("config", config)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Usage(format!("{}: not UTF-8", config.display())))?;
    let cfg = GenConfig::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    let ledger = generate_ledger(&cfg).map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;

    create_dir(out)?;
    with_file(&out.join("trace.jsonl"), |w| write_trace(w, &ledger.trace))?;
    with_file(&out.join("headers.jsonl"), |w| write_headers(w, &ledger.headers))?;
    let run = Run { command: "generate", argv, inputs: vec![input] };
    write_report(out, "truth.json", &run.manifest(&cfg), &ledger.truth)?;
    println!(
        "wrote {} actions, {} headers, {} plants to {}",
        ledger.trace.len(),
        ledger.headers.len(),
        ledger.truth.plants.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Analysis {
    Replay,
    Metrics,
    Cluster,
    Motifs,
    Gangs,
    All,
}

impl Analysis {
    fn name(self) -> &'static str {
        match self {
            Analysis::Replay => "replay",
            Analysis::Metrics => "metrics",
            Analysis::Cluster => "cluster",
            Analysis::Motifs => "motifs",
            Analysis::Gangs => "gangs",
            Analysis::All => "all",
        }
    }

    fn includes(self, other: Analysis) -> bool {
        self == other || self == Analysis::All
    }
}

fn load_trace(path: &Path, exec: Exec) -> Result<(Vec<Action>, InputFile), CliError> {
    let (bytes, input) = read_input("trace", path)?;
    let trace = read_trace(BufReader::new(bytes.as_slice()), exec)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((trace, input))
}

fn load_headers(path: &Path) -> Result<(Vec<BlockHeader>, InputFile), CliError> {
    let (bytes, input) = read_input("headers", path)?;
    let headers =
        read_headers(BufReader::new(bytes.as_slice())).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((headers, input))
}

fn data_err(trace: &Path, e: report::ReportError) -> CliError {
    CliError::Data(format!("{}: {e}", trace.display()))
}

fn analyze(args: &AnalyzeArgs, what: Analysis, argv: Vec<String>) -> Result<(), CliError> {
    let params = args.params()?;
    let exec = args.exec();
    let (trace, trace_input) = load_trace(&args.trace, exec)?;
    let mut inputs = vec![trace_input];
    let headers = match &args.headers {
        Some(p) => {
            let (h, input) = load_headers(p)?;
            inputs.push(input);
            h
        }
        None => Vec::new(),
    };
    let run = Run { command: what.name(), argv, inputs };
    let manifest = run.manifest(&params);
    let out = &args.out.out;

    // Replay first so an inadmissible trace fails before anything is written.
    let replayed = report::replay_trace(&trace, params.snapshot_cadence).map_err(|e| data_err(&args.trace, e))?;
    let graph = if what.includes(Analysis::Motifs) || what.includes(Analysis::Gangs) {
        Some(report::voting_graph(&trace).map_err(|e| data_err(&args.trace, e))?)
    } else {
        None
    };
    create_dir(out)?;

    if what.includes(Analysis::Replay) {
        write_report(out, "replay.json", &manifest, &replayed.summary)?;
        write_tables(out, &report::replay_tables(&replayed.summary, &replayed.snapshots))?;
        println!(
            "replay: {} actions, {} rejected, state {}",
            replayed.summary.actions,
            replayed.summary.rejected.len(),
            replayed.summary.state_digest
        );
    }
    if what.includes(Analysis::Metrics) {
        let r = report::metrics_report(&headers, &replayed.snapshots, &params).map_err(|e| data_err(&args.trace, e))?;
        write_report(out, "metrics.json", &manifest, &r)?;
        write_tables(out, &report::metrics_tables(&r, &params))?;
        println!("metrics: {} months of production, {} samples", r.entropy.len(), r.participation.len());
    }
    let mut clusters: Option<ClusterReport> = None;
    if what.includes(Analysis::Cluster) {
        let creators = creators(&trace);
        let r = report::cluster_report(&replayed.snapshots, &creators, &params, exec)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        write_report(out, "clusters.json", &manifest, &r)?;
        write_tables(out, &report::cluster_tables(&r, &trace, &creators))?;
        for p in &r.populations {
            println!("cluster {}: {} voters, {} clusters", p.population.as_str(), p.voters, p.clusters.len());
        }
        clusters = Some(r);
    }
    let mut motifs: Option<MotifReport> = None;
    let mut gangs: Option<GangsReport> = None;
    if let Some((timeline, graph)) = &graph {
        if what.includes(Analysis::Motifs) {
            let r = report::motif_report(timeline, &params, exec);
            write_report(out, "motifs.json", &manifest, &r)?;
            write_tables(out, &report::motif_tables(&r))?;
            with_file(&out.join("motif_instances.jsonl"), |w| {
                for m in &r.instances {
                    writeln!(w, "{}", serde_json::to_string(m).expect("instance serializes"))?;
                }
                Ok(())
            })?;
            let totals: Vec<String> = r.totals.iter().map(|(s, n)| format!("{} {n}", s.as_str())).collect();
            println!("motifs: {}", totals.join(", "));
            motifs = Some(r);
        }
        if what.includes(Analysis::Gangs) {
            let r = report::gangs_report(graph, &params, exec).map_err(|e| data_err(&args.trace, e))?;
            write_report(out, "gangs.json", &manifest, &r)?;
            write_tables(out, &report::gang_tables(&r, timeline))?;
            println!("gangs: {} anomalies, {} communities", r.anomalies.len(), r.communities.len());
            gangs = Some(r);
        }
    }
    if let (Some(c), Some(m), Some(g)) = (&clusters, &motifs, &gangs) {
        let s = report::summary(c, m, g);
        write_report(out, "summary.json", &manifest, &s)?;
        write_tables(out, &report::summary_tables(&s))?;
    }
    Ok(())
}

fn creators(trace: &[Action]) -> BTreeMap<AccountName, Option<AccountName>> {
    let mut out = BTreeMap::new();
    for a in trace {
        if let Some(created) = a.created_account() {
            out.entry(created.clone()).or_insert_with(|| Some(a.actor.clone()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    /// `clusters`, `gangs` or `motifs`.
    pub target: String,
    pub kind: String,
    pub predicted: usize,
    pub truth: usize,
    pub matched: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreRow {
    fn new(target: &str, kind: &str, predicted: usize, truth: usize, matched: usize) -> Self {
        let precision = if predicted == 0 { 0.0 } else { matched as f64 / predicted as f64 };
        let recall = if truth == 0 { 0.0 } else { matched as f64 / truth as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        ScoreRow { target: target.into(), kind: kind.into(), predicted, truth, matched, precision, recall, f1 }
    }
}

type Pair = (AccountName, AccountName);

fn co_member_pairs<'a>(groups: impl IntoIterator<Item = &'a BTreeSet<AccountName>>) -> BTreeSet<Pair> {
    let mut out = BTreeSet::new();
    for g in groups {
        let v: Vec<&AccountName> = g.iter().collect();
        for (i, a) in v.iter().enumerate() {
            for b in &v[i + 1..] {
                out.insert(((*a).clone(), (*b).clone()));
            }
        }
    }
    out
}

fn pair_row(target: &str, kind: &str, predicted: &BTreeSet<Pair>, truth: &BTreeSet<Pair>) -> ScoreRow {
    ScoreRow::new(target, kind, predicted.len(), truth.len(), predicted.intersection(truth).count())
}

/// Pairwise scores for clusters and gangs, instance-level scores for motifs.
/// Gang pairs are attributed to a plant kind when either account belongs
/// to a plant of that kind.
pub fn score_reports(
    truth: &GroundTruth,
    clusters: Option<&ClusterReport>,
    motifs: Option<&MotifReport>,
    gangs: Option<&GangsReport>,
) -> Vec<ScoreRow> {
    let mut rows = Vec::new();
    let plants_of = |k: PlantKind| truth.plants.iter().filter(move |p| p.kind == k);

    if let Some(c) = clusters {
        let found = co_member_pairs(c.populations.iter().flat_map(|p| p.clusters.iter().map(|c| &c.members)));
        let planted = co_member_pairs(plants_of(PlantKind::SimilarCluster).map(|p| &p.members));
        rows.push(pair_row("clusters", PlantKind::SimilarCluster.as_str(), &found, &planted));
    }
    if let Some(g) = gangs {
        let found = co_member_pairs(g.communities.iter().map(|c| &c.members));
        let gang_kinds = [PlantKind::LinearGang, PlantKind::TriangularGang, PlantKind::EightGang, PlantKind::NearClique];
        for kind in gang_kinds {
            let members: BTreeSet<&AccountName> = plants_of(kind).flat_map(|p| p.members.iter()).collect();
            if members.is_empty() {
                continue;
            }
            let planted = co_member_pairs(plants_of(kind).map(|p| &p.members));
            let touching: BTreeSet<Pair> =
                found.iter().filter(|(a, b)| members.contains(a) || members.contains(b)).cloned().collect();
            rows.push(pair_row("gangs", kind.as_str(), &touching, &planted));
        }
        let all = co_member_pairs(truth.plants.iter().filter(|p| gang_kinds.contains(&p.kind)).map(|p| &p.members));
        rows.push(pair_row("gangs", "all", &found, &all));
    }
    if let Some(m) = motifs {
        for shape in Shape::ALL {
            let found: BTreeSet<(Vec<AccountName>, YearMonth)> =
                m.instances.iter().filter(|i| i.shape == shape).map(|i| (i.participants.clone(), i.month())).collect();
            let planted: BTreeSet<(Vec<AccountName>, YearMonth)> = truth
                .plants
                .iter()
                .flat_map(|p| p.motifs.iter())
                .filter(|e| e.shape == shape)
                .map(|e| (e.participants.clone(), e.month))
                .collect();
            let matched = found.intersection(&planted).count();
            rows.push(ScoreRow::new("motifs", shape.as_str(), found.len(), planted.len(), matched));
        }
    }
    rows
}

fn read_envelope<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<Envelope<T>>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Data(format!("{}: malformed report: {e}", path.display())))
}

fn check_digest(path: &Path, manifest: &RunManifest, expected: &str) -> Result<(), CliError> {
    let found = manifest.input("trace").map(|i| i.sha256.as_str()).unwrap_or("none");
    if found != expected {
        return Err(CliError::Usage(format!(
            "digest mismatch: {} was computed from trace {found}, truth describes trace {expected}",
            path.display()
        )));
    }
    Ok(())
}

fn score(args: &ScoreArgs, argv: Vec<String>) -> Result<(), CliError> {
    let (bytes, truth_input) = read_input("truth", &args.truth)?;
    let truth: Envelope<GroundTruth> = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Data(format!("{}: malformed truth file: {e}", args.truth.display())))?;
    let expected = truth.report.trace_digest.as_str();
    let dir = &args.reports;
    let clusters: Option<Envelope<ClusterReport>> = read_envelope(&dir.join("clusters.json"))?;
    let motifs: Option<Envelope<MotifReport>> = read_envelope(&dir.join("motifs.json"))?;
    let gangs: Option<Envelope<GangsReport>> = read_envelope(&dir.join("gangs.json"))?;

    let mut inputs = vec![truth_input];
    for (name, manifest) in [
        ("clusters.json", clusters.as_ref().map(|e| &e.manifest)),
        ("motifs.json", motifs.as_ref().map(|e| &e.manifest)),
        ("gangs.json", gangs.as_ref().map(|e| &e.manifest)),
    ] {
        if let Some(m) = manifest {
            let path = dir.join(name);
            check_digest(&path, m, expected)?;
            inputs.push(read_input("report", &path)?.1);
        }
    }
    if inputs.len() == 1 {
        return Err(CliError::Usage(format!("no cluster, motif or gang report in {}", dir.display())));
    }

    let rows = score_reports(
        &truth.report,
        clusters.as_ref().map(|e| &e.report),
        motifs.as_ref().map(|e| &e.report),
        gangs.as_ref().map(|e| &e.report),
    );
    let run = Run { command: "score", argv, inputs };
    let out = &args.out.out;
    create_dir(out)?;
    write_report(out, "score.json", &run.manifest(&serde_json::Value::Null), &rows)?;
    let mut table = Table {
        name: "score".into(),
        header: ["target", "kind", "predicted", "truth", "matched", "precision", "recall", "f1"]
            .map(String::from)
            .to_vec(),
        rows: Vec::new(),
    };
    for r in &rows {
        table.rows.push(vec![
            r.target.clone(),
            r.kind.clone(),
            r.predicted.to_string(),
            r.truth.to_string(),
            r.matched.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1.to_string(),
        ]);
        println!("{} {}: P={:.4} R={:.4} F1={:.4}", r.target, r.kind, r.precision, r.recall, r.f1);
    }
    write_tables(out, &[table])?;
    Ok(())
}
