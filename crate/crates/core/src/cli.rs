//! Command-line pipeline: `ingest`, `graph`, `match`, `select`, `simulate`
//! and `export`, each writing its artifact into the output directory.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::aas::{extract_simulation_descriptors, AdministrationShell, DecisionLevel};
use crate::adaption::{
    decision_log, select_configuration, simulate, system_of, AdaptError, Budget, Scenario,
    SelectionPolicy, SimulationSettings, Thresholds,
};
use crate::ingest::{
    build_hierarchy, check_unique_ids, fetch_shells, load_sequence, read_aasx, read_dir,
    unreferenced_shells, FetchConfig, HierarchyTree, IngestError, ProductionSequence,
};
use crate::kgraph::{
    build_graph, export_graph, import_graph, ExportFormat, GraphError, KnowledgeGraph,
};
use crate::matcher::{is_matched, match_ports, MatchError, RangeMode, UnitRegistry};

pub const ENDPOINT_ENV: &str = "TWIN_AAS_ENDPOINT";

#[derive(Debug, Parser)]
#[command(
    name = "ptx-twin",
    version,
    about = "Knowledge integration for Power-to-X digital twins"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse shells, build the asset hierarchy and write shells.json.
    Ingest(CommonArgs),
    /// Build the knowledge graph and write graph.json.
    Graph(CommonArgs),
    /// Match ports; writes graph.json and match_report.json.
    Match(CommonArgs),
    /// Select a model configuration; writes configuration.json.
    Select(CommonArgs),
    /// Run the closed adaption loop; writes decisions.ndjson and adapted_graph.json.
    Simulate(CommonArgs),
    /// Export the graph as Cypher statements (graph.cypher) or JSON.
    Export(CommonArgs),
}

#[derive(Debug, Clone, Args, Default)]
struct CommonArgs {
    /// Shell source: .aasx package, directory of shell JSON files or
    /// http(s) server URL. Defaults to $TWIN_AAS_ENDPOINT.
    #[arg(long)]
    source: Option<String>,
    /// Graph written by an earlier stage, instead of --source.
    #[arg(long, conflicts_with = "source")]
    graph: Option<PathBuf>,
    /// Production sequence JSON.
    #[arg(long)]
    sequence: Option<PathBuf>,
    /// Root asset id; defaults to the one shell no Bill of Material references.
    #[arg(long)]
    root: Option<String>,
    /// Unit registry extension file.
    #[arg(long)]
    units: Option<PathBuf>,
    #[arg(long, value_parser = parse_range_mode)]
    range_mode: Option<RangeMode>,
    #[arg(long, value_parser = parse_level)]
    level: Option<DecisionLevel>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    min_accuracy: Option<f64>,
    /// Model id to leave out of selection (repeatable).
    #[arg(long)]
    exclude: Vec<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    escalation: Option<f64>,
    /// Deviation window in seconds; overrides the scenario's windowSeconds.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Export format: statements (default) or json.
    #[arg(long)]
    format: Option<String>,
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range_mode(s: &str) -> Result<RangeMode, String> {
    s.parse()
}

fn parse_level(s: &str) -> Result<DecisionLevel, String> {
    s.parse()
}

/// Contents of a `--config` file. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub source: Option<String>,
    pub graph: Option<PathBuf>,
    pub sequence: Option<PathBuf>,
    pub root: Option<String>,
    pub units: Option<PathBuf>,
    pub range_mode: Option<RangeMode>,
    pub level: Option<DecisionLevel>,
    pub budget: Option<Budget>,
    #[serde(default)]
    pub exclude: Vec<String>,
    pub thresholds: Option<Thresholds>,
    pub window: Option<f64>,
    pub scenario: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Machine-readable failure, printed to stderr as one JSON object.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub path: Option<String>,
    pub exit_code: i32,
}

impl CliError {
    fn domain(code: &str, message: impl Into<String>, path: Option<String>) -> Self {
        CliError {
            code: code.into(),
            message: message.into(),
            path,
            exit_code: 1,
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: "UsageError".into(),
            message: message.into(),
            path: None,
            exit_code: 2,
        }
    }

    pub fn to_json(&self) -> String {
        let mut value = json!({"code": self.code, "message": self.message});
        if let Some(path) = &self.path {
            value["path"] = json!(path);
        }
        value.to_string()
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::domain(e.code(), e.to_string(), e.path())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::domain(e.code(), e.to_string(), None)
    }
}

impl From<MatchError> for CliError {
    fn from(e: MatchError) -> Self {
        CliError::domain(e.code(), e.to_string(), None)
    }
}

impl From<AdaptError> for CliError {
    fn from(e: AdaptError) -> Self {
        CliError::domain(e.code(), e.to_string(), e.path())
    }
}

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code. Errors are reported on stderr as JSON.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let message = e.render().to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first).to_json());
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(artifacts) => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for path in artifacts {
                let _ = writeln!(out, "{}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code
        }
    }
}

/// Effective settings after merging the config file under the flags.
struct Settings {
    args: CommonArgs,
    budget: Budget,
    thresholds: Thresholds,
    level: DecisionLevel,
    range_mode: RangeMode,
    out: PathBuf,
}

fn resolve(base: &Path, path: Option<PathBuf>) -> Option<PathBuf> {
    path.map(|p| if p.is_relative() { base.join(p) } else { p })
}

fn settings(mut args: CommonArgs) -> Result<Settings, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        let text = read_text(path)?;
        config = serde_json::from_str(&text).map_err(|e| {
            CliError::domain(
                "ConfigError",
                e.to_string(),
                Some(path.display().to_string()),
            )
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.graph = resolve(&base, config.graph);
        config.sequence = resolve(&base, config.sequence);
        config.units = resolve(&base, config.units);
        config.scenario = resolve(&base, config.scenario);
        config.out = resolve(&base, config.out);
        if let Some(source) = &config.source {
            if !source.starts_with("http://") && !source.starts_with("https://") {
                config.source = Some(base.join(source).display().to_string());
            }
        }
    }
    if args.source.is_none() && args.graph.is_none() {
        args.source = config.source;
        args.graph = config.graph;
    }
    if args.source.is_some() && args.graph.is_some() {
        return Err(CliError::usage(
            "give either a shell source or --graph, not both",
        ));
    }
    args.sequence = args.sequence.or(config.sequence);
    args.root = args.root.or(config.root);
    args.units = args.units.or(config.units);
    args.scenario = args.scenario.or(config.scenario);
    args.window = args.window.or(config.window);
    if args.exclude.is_empty() {
        args.exclude = config.exclude;
    }
    let default_budget = config.budget.unwrap_or_default();
    let budget = Budget {
        max_computing_time: args.max_time.unwrap_or(default_budget.max_computing_time),
        min_accuracy: args.min_accuracy.unwrap_or(default_budget.min_accuracy),
    };
    let default_thresholds = config.thresholds.unwrap_or_default();
    let thresholds = Thresholds {
        epsilon: args.epsilon.unwrap_or(default_thresholds.epsilon),
        escalation: args.escalation.unwrap_or(default_thresholds.escalation),
    };
    let level = args
        .level
        .or(config.level)
        .unwrap_or(DecisionLevel::Control);
    let range_mode = args.range_mode.or(config.range_mode).unwrap_or_default();
    let out = args
        .out
        .clone()
        .or(config.out)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Settings {
        args,
        budget,
        thresholds,
        level,
        range_mode,
        out,
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::domain("IoError", e.to_string(), Some(path.display().to_string())))
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let io = |e: std::io::Error, p: &Path| {
        CliError::domain("IoError", e.to_string(), Some(p.display().to_string()))
    };
    fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io(e, &path))?;
    Ok(path)
}

fn load_shells(args: &CommonArgs) -> Result<Vec<AdministrationShell>, CliError> {
    let source = match &args.source {
        Some(s) => s.clone(),
        None => std::env::var(ENDPOINT_ENV).map_err(|_| {
            CliError::usage(format!(
                "no shell source: pass --source, --graph or set {ENDPOINT_ENV}"
            ))
        })?,
    };
    let shells = if source.starts_with("http://") || source.starts_with("https://") {
        fetch_shells(&source, &FetchConfig::default())?.into_result()?
    } else {
        let path = Path::new(&source);
        if path.is_dir() {
            read_dir(path)?
        } else {
            let bytes = fs::read(path).map_err(|e| IngestError::Io {
                path: source.clone(),
                message: e.to_string(),
            })?;
            read_aasx(&bytes)?
        }
    };
    check_unique_ids(&shells)?;
    Ok(shells)
}

fn root_of(args: &CommonArgs, shells: &[AdministrationShell]) -> Result<String, CliError> {
    if let Some(root) = &args.root {
        return Ok(root.clone());
    }
    let candidates = unreferenced_shells(shells)?;
    match candidates.as_slice() {
        [root] => Ok(root.clone()),
        _ => Err(CliError::domain(
            "ValidationError",
            format!(
                "cannot infer the root asset; unreferenced shells: {candidates:?}; pass --root"
            ),
            None,
        )),
    }
}

fn load_sequence_file(args: &CommonArgs) -> Result<Option<ProductionSequence>, CliError> {
    args.sequence
        .as_ref()
        .map(|path| {
            let text = read_text(path)?;
            load_sequence(&text).map_err(|e| {
                CliError::domain(e.code(), e.to_string(), Some(path.display().to_string()))
            })
        })
        .transpose()
}

fn registry(args: &CommonArgs) -> Result<UnitRegistry, CliError> {
    let mut registry = UnitRegistry::builtin();
    if let Some(path) = &args.units {
        registry.merge_extensions(&read_text(path)?).map_err(|e| {
            CliError::domain(
                MatchError::from(e.clone()).code(),
                e.to_string(),
                Some(path.display().to_string()),
            )
        })?;
    }
    Ok(registry)
}

/// The unmatched or matched graph of the run plus its sequence.
fn load_graph(s: &Settings) -> Result<(KnowledgeGraph, ProductionSequence), CliError> {
    if let Some(path) = &s.args.graph {
        let graph = import_graph(&read_text(path)?).map_err(|e| {
            CliError::domain(e.code(), e.to_string(), Some(path.display().to_string()))
        })?;
        let sequence = match load_sequence_file(&s.args)? {
            Some(seq) => seq,
            None => {
                let (system_id, steps) = system_of(&graph)?;
                ProductionSequence::new(system_id, steps)?
            }
        };
        return Ok((graph, sequence));
    }
    let shells = load_shells(&s.args)?;
    let sequence = load_sequence_file(&s.args)?
        .ok_or_else(|| CliError::usage("--sequence is required with a shell source"))?;
    let root = root_of(&s.args, &shells)?;
    let tree = build_hierarchy(&shells, &root)?;
    Ok((build_graph(&shells, &tree, &sequence)?, sequence))
}

fn matched_graph(s: &Settings) -> Result<KnowledgeGraph, CliError> {
    let (graph, sequence) = load_graph(s)?;
    if is_matched(&graph, &sequence.system_id) {
        return Ok(graph);
    }
    Ok(match_ports(&graph, &sequence, &registry(&s.args)?, s.range_mode)?.0)
}

fn ingest_report(shells: &[AdministrationShell], tree: &HierarchyTree) -> Result<String, CliError> {
    let mut sorted: Vec<&AdministrationShell> = shells.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut entries = Vec::new();
    for shell in sorted {
        let models =
            extract_simulation_descriptors(shell).map_err(|source| IngestError::Shell {
                id: shell.id.clone(),
                source,
            })?;
        entries.push(json!({
            "id": shell.id,
            "idShort": shell.id_short,
            "assetKind": shell.asset_kind.as_str(),
            "submodels": shell.submodels.iter().map(|s| json!({"idShort": s.id_short, "kind": s.kind.as_str()})).collect::<Vec<_>>(),
            "models": models.iter().map(|m| m.model_id.clone()).collect::<Vec<_>>(),
            "inHierarchy": tree.contains(&shell.id),
        }));
    }
    let report = json!({
        "rootAssetId": tree.root_asset_id,
        "hierarchy": tree,
        "shells": entries,
    });
    Ok(serde_json::to_string_pretty(&report).expect("reports serialize") + "\n")
}

fn execute(command: Command) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Ingest(args) => {
            let s = settings(args)?;
            if s.args.graph.is_some() {
                return Err(CliError::usage(
                    "ingest reads shells; --graph is not accepted",
                ));
            }
            let shells = load_shells(&s.args)?;
            let root = root_of(&s.args, &shells)?;
            let tree = build_hierarchy(&shells, &root)?;
            let report = ingest_report(&shells, &tree)?;
            Ok(vec![write_artifact(&s.out, "shells.json", &report)?])
        }
        Command::Graph(args) => {
            let s = settings(args)?;
            let (graph, _) = load_graph(&s)?;
            Ok(vec![write_artifact(
                &s.out,
                "graph.json",
                &export_graph(&graph, ExportFormat::Json),
            )?])
        }
        Command::Match(args) => {
            let s = settings(args)?;
            let (graph, sequence) = load_graph(&s)?;
            let (matched, report) =
                match_ports(&graph, &sequence, &registry(&s.args)?, s.range_mode)?;
            Ok(vec![
                write_artifact(
                    &s.out,
                    "graph.json",
                    &export_graph(&matched, ExportFormat::Json),
                )?,
                write_artifact(&s.out, "match_report.json", &report.to_json())?,
            ])
        }
        Command::Select(args) => {
            let s = settings(args)?;
            let graph = matched_graph(&s)?;
            let exclude: BTreeSet<String> = s.args.exclude.iter().cloned().collect();
            let configuration = select_configuration(&graph, s.level, &s.budget, &exclude)?;
            Ok(vec![write_artifact(
                &s.out,
                "configuration.json",
                &configuration.to_json(),
            )?])
        }
        Command::Simulate(args) => {
            let s = settings(args)?;
            let path = s
                .args
                .scenario
                .clone()
                .ok_or_else(|| CliError::usage("simulate needs --scenario"))?;
            let mut scenario = Scenario::from_json(&read_text(&path)?).map_err(|e| {
                CliError::domain(e.code(), e.to_string(), Some(path.display().to_string()))
            })?;
            if let Some(window) = s.args.window {
                scenario.window_seconds = window;
            }
            let graph = matched_graph(&s)?;
            let settings = SimulationSettings {
                thresholds: s.thresholds,
                policy: SelectionPolicy {
                    level: s.level,
                    budget: s.budget,
                    exclude: s.args.exclude.iter().cloned().collect(),
                },
            };
            let (adapted, records) = simulate(&graph, &scenario, &settings)?;
            Ok(vec![
                write_artifact(&s.out, "decisions.ndjson", &decision_log(&records))?,
                write_artifact(
                    &s.out,
                    "adapted_graph.json",
                    &export_graph(&adapted, ExportFormat::Json),
                )?,
            ])
        }
        Command::Export(args) => {
            let s = settings(args)?;
            let format: ExportFormat = s
                .args
                .format
                .as_deref()
                .unwrap_or("statements")
                .parse()
                .map_err(CliError::usage)?;
            let (graph, _) = load_graph(&s)?;
            let name = match format {
                ExportFormat::Json => "graph.json",
                ExportFormat::Statements => "graph.cypher",
            };
            Ok(vec![write_artifact(
                &s.out,
                name,
                &export_graph(&graph, format),
            )?])
        }
    }
}

/// Parses one error line written by [`run`].
pub fn parse_error_json(line: &str) -> Option<(String, String, Option<String>)> {
    let v: Value = serde_json::from_str(line).ok()?;
    Some((
        v.get("code")?.as_str()?.to_string(),
        v.get("message")?.as_str()?.to_string(),
        v.get("path").and_then(Value::as_str).map(str::to_string),
    ))
}
