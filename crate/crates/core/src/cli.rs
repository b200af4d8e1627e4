//! Command-line front end: config resolution, subcommands and report
//! documents.
//!
//! Every machine-readable report embeds the resolved configuration, the
//! workload and topology documents, and the cycle-formula version, so it
//! can be re-scored later without the original inputs. Reports carry no
//! timestamps or host details and are byte-identical across runs with the
//! same configuration.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::accel::{builtin_designs, load_designs, AcceleratorDesign, DesignDoc, FORMULA_VERSION};
use crate::error::Error;
use crate::evaluator::{evaluate_with, LatencyReport, Mapping};
use crate::par::Executor;
use crate::report::{compare_cell, reduction_percent, render, set_lines, strategy_lines};
use crate::search::{run_baseline, run_oracle, run_outer_ga, GAConfig, OracleLimits};
use crate::sharding::DEFAULT_ELEM_BYTES;
use crate::topology::{build_f1_topology, builtin_topology, load_topology, SystemTopology, TopologyDoc};
use crate::workload::catalog::{model_card, MODEL_NAMES};
use crate::workload::{load_workload, Workload, WorkloadDoc};

/// Exit status for configuration and input errors.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for internal failures.
pub const EXIT_INTERNAL: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Config(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn internal(e: Error) -> CliError {
    CliError::Internal(anyhow::Error::new(e))
}

#[derive(Debug, Parser)]
#[command(name = "accmap", version, about = "Mapping search and latency simulation for multi-accelerator DNN inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the two-level search and report the best mapping.
    Map(RunArgs),
    /// Map with the fixed two-group baseline.
    Baseline(RunArgs),
    /// Search and baseline side by side for one or more models.
    Compare(RunArgs),
    /// Re-score a mapping saved by `map`, `baseline` or `oracle`.
    Evaluate(EvaluateArgs),
    /// Exhaustive optimum of a small instance, checked against the search.
    Oracle(RunArgs),
    /// Dump built-in models, designs and topologies.
    Catalog(CatalogArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in topology name (`f1`) or topology file.
    #[arg(long)]
    pub topology: Option<String>,
    /// Catalog model name; `compare` accepts several or `all`.
    #[arg(long, num_args = 1.., value_delimiter = ',', conflicts_with = "workload")]
    pub model: Vec<String>,
    /// Workload file.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// Design file (defaults to the three built-in designs).
    #[arg(long)]
    pub designs: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub outer_pop: Option<usize>,
    #[arg(long)]
    pub outer_gens: Option<usize>,
    #[arg(long)]
    pub inner_pop: Option<usize>,
    #[arg(long)]
    pub inner_gens: Option<usize>,
    #[arg(long)]
    pub elem_bytes: Option<u64>,
    /// Write the machine-readable report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the machine-readable report instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Evaluate GA populations on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Report file holding the mapping.
    #[arg(long)]
    pub mapping: PathBuf,
    /// Overlap SS ring steps with compute when re-scoring (sensitivity check).
    #[arg(long)]
    pub overlap_ss: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CatalogArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// GA fields a run configuration may override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaOverrides {
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub mutation_rate: Option<f64>,
    pub mutation_sigma: Option<f64>,
    pub crossover_rate: Option<f64>,
    pub elites: Option<usize>,
}

impl GaOverrides {
    fn apply(&self, mut cfg: GAConfig) -> GAConfig {
        if let Some(v) = self.population {
            cfg.population = v;
        }
        if let Some(v) = self.generations {
            cfg.generations = v;
        }
        if let Some(v) = self.mutation_rate {
            cfg.mutation_rate = v;
        }
        if let Some(v) = self.mutation_sigma {
            cfg.mutation_sigma = v;
        }
        if let Some(v) = self.crossover_rate {
            cfg.crossover_rate = v;
        }
        if let Some(v) = self.elites {
            cfg.elites = v;
        }
        cfg
    }
}

/// On-disk run configuration. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: Option<String>,
    pub model: Option<Vec<String>>,
    pub workload: Option<String>,
    pub designs: Option<String>,
    pub elem_bytes: Option<u64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub outer: GaOverrides,
    #[serde(default)]
    pub inner: GaOverrides,
    pub out: Option<String>,
}

/// Fully resolved configuration, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub topology: String,
    pub workload: String,
    pub designs: String,
    pub elem_bytes: u64,
    pub seed: u64,
    pub outer: GAConfig,
    pub inner: GAConfig,
    pub formula_version: String,
}

/// Inputs loaded from a resolved configuration.
pub struct Loaded {
    pub config: ResolvedConfig,
    pub topology: SystemTopology,
    pub workloads: Vec<Workload>,
    pub designs: Vec<AcceleratorDesign>,
    pub out: Option<PathBuf>,
    pub executor: Executor,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read `{}`: {e}", path.display())))
}

fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    match base {
        Some(dir) if Path::new(p).is_relative() => dir.join(p),
        _ => PathBuf::from(p),
    }
}

/// Merges config file and flags, then loads every input.
pub fn load(args: &RunArgs, allow_many_models: bool) -> CliResult<Loaded> {
    let (file, base) = match &args.config {
        Some(path) => {
            let text = read(path)?;
            let cfg: RunConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config `{}`: {e}", path.display())))?;
            (cfg, path.parent().map(Path::to_path_buf))
        }
        None => (RunConfig::default(), None),
    };
    let base = base.as_deref();

    let topo_src = args.topology.clone().or(file.topology.clone()).unwrap_or_else(|| "f1".into());
    let topology = match builtin_topology(&topo_src) {
        Some(t) => t,
        None => {
            let path = if args.topology.is_some() {
                PathBuf::from(&topo_src)
            } else {
                resolve(base, &topo_src)
            };
            load_topology(&read(&path)?)?
        }
    };

    let (workloads, workload_src) = if let Some(path) = &args.workload {
        (vec![load_workload(&read(path)?)?], path.display().to_string())
    } else if !args.model.is_empty() {
        models(&args.model, allow_many_models)?
    } else if let Some(p) = &file.workload {
        let path = resolve(base, p);
        (vec![load_workload(&read(&path)?)?], p.clone())
    } else if let Some(names) = &file.model {
        models(names, allow_many_models)?
    } else if allow_many_models {
        models(&["all".to_string()], true)?
    } else {
        return Err(CliError::Config("no workload given: pass --model NAME or --workload FILE".into()));
    };

    let (designs, designs_src) = match args.designs.as_ref().map(|p| (p.clone(), p.display().to_string())).or_else(|| {
        file.designs.as_ref().map(|p| (resolve(base, p), p.clone()))
    }) {
        Some((path, src)) => (load_designs(&read(&path)?)?, src),
        None => (builtin_designs(), "builtin".to_string()),
    };

    let seed = args.seed.or(file.seed).unwrap_or(GAConfig::DEFAULT_SEED);
    let mut outer = file.outer.apply(GAConfig::outer());
    let mut inner = file.inner.apply(GAConfig::inner());
    outer.population = args.outer_pop.unwrap_or(outer.population);
    outer.generations = args.outer_gens.unwrap_or(outer.generations);
    inner.population = args.inner_pop.unwrap_or(inner.population);
    inner.generations = args.inner_gens.unwrap_or(inner.generations);
    outer.seed = seed;
    inner.seed = seed;
    outer.validate()?;
    inner.validate()?;
    let elem_bytes = args.elem_bytes.or(file.elem_bytes).unwrap_or(DEFAULT_ELEM_BYTES);
    if elem_bytes == 0 {
        return Err(CliError::Config("elem_bytes must be at least 1".into()));
    }
    let out = args.out.clone().or_else(|| file.out.as_ref().map(|p| resolve(base, p)));

    Ok(Loaded {
        config: ResolvedConfig {
            topology: topo_src,
            workload: workload_src,
            designs: designs_src,
            elem_bytes,
            seed,
            outer,
            inner,
            formula_version: FORMULA_VERSION.to_string(),
        },
        topology,
        workloads,
        designs,
        out,
        executor: if args.sequential {
            Executor::Sequential
        } else {
            Executor::default()
        },
    })
}

fn models(names: &[String], allow_many: bool) -> CliResult<(Vec<Workload>, String)> {
    let names: Vec<String> = if names.iter().any(|n| n.eq_ignore_ascii_case("all")) {
        MODEL_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        names.to_vec()
    };
    if names.len() > 1 && !allow_many {
        return Err(CliError::Config("this command takes a single model".into()));
    }
    let workloads = names
        .iter()
        .map(|n| crate::workload::catalog::catalog(n))
        .collect::<crate::error::Result<Vec<_>>>()?;
    Ok((workloads, names.join(",")))
}

/// Search statistics attached to `map` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Best fitness per outer generation, ms.
    pub history_ms: Vec<f64>,
    pub outer_evaluations: usize,
    pub inner_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub oracle_ms: f64,
    pub search_ms: f64,
    pub search_matches: bool,
}

/// Report written by `map`, `baseline` and `oracle`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MappingDocument {
    pub command: String,
    pub config: ResolvedConfig,
    pub workload: WorkloadDoc,
    pub topology: TopologyDoc,
    pub mapping: Mapping,
    pub report: LatencyReport,
    pub sets: Vec<String>,
    pub strategies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
}

impl MappingDocument {
    fn new(command: &str, l: &Loaded, w: &Workload, mapping: Mapping, report: LatencyReport) -> Self {
        let mut config = l.config.clone();
        config.workload = if l.workloads.len() > 1 { w.name.clone() } else { config.workload };
        MappingDocument {
            command: command.into(),
            config,
            workload: w.to_document(),
            topology: l.topology.to_document(),
            sets: set_lines(&mapping),
            strategies: strategy_lines(&mapping),
            mapping,
            report,
            search: None,
            oracle: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub model: String,
    pub search_ms: f64,
    pub baseline_ms: f64,
    pub reduction_percent: f64,
    /// Table cell such as `0.748(-10.1%)`.
    pub cell: String,
    pub search_valid: bool,
    pub baseline_valid: bool,
    pub search_mapping: Vec<String>,
    pub baseline_mapping: Vec<String>,
    pub search_strategies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareDocument {
    pub command: String,
    pub config: ResolvedConfig,
    pub rows: Vec<CompareRow>,
    pub mean_reduction_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateDocument {
    pub command: String,
    pub source: String,
    pub overlap_ss: bool,
    pub recorded_ms: f64,
    pub total_ms: f64,
    pub matches: bool,
    pub report: LatencyReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelEntry {
    pub name: String,
    pub convs: usize,
    pub parameters: u64,
    pub macs: u64,
    pub conv_macs: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogDocument {
    pub command: String,
    pub formula_version: String,
    pub models: Vec<ModelEntry>,
    pub designs: Vec<DesignDoc>,
    pub topologies: Vec<(String, TopologyDoc)>,
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.into()))?;
    s.push('\n');
    Ok(s)
}

/// Writes the JSON report to `out` if given, then returns what to print.
fn emit(json: String, table: String, out: Option<&Path>, print_json: bool) -> CliResult<String> {
    if let Some(path) = out {
        fs::write(path, &json).map_err(|e| CliError::Config(format!("cannot write `{}`: {e}", path.display())))?;
    }
    Ok(if print_json { json } else { table })
}

fn single(l: &Loaded) -> &Workload {
    &l.workloads[0]
}

fn cmd_map(args: &RunArgs) -> CliResult<String> {
    let l = load(args, false)?;
    let w = single(&l);
    let out = run_outer_ga(w, &l.topology, &l.designs, &l.config.outer, &l.config.inner, l.config.elem_bytes, l.executor)
        .map_err(internal)?;
    let table = render(&format!("search mapping for {}", w.name), &out.mapping, &out.report);
    let mut doc = MappingDocument::new("map", &l, w, out.mapping, out.report);
    doc.search = Some(SearchStats {
        history_ms: out.history.iter().map(|s| s * 1e3).collect(),
        outer_evaluations: out.outer_evaluations,
        inner_runs: out.inner_runs,
    });
    emit(to_json(&doc)?, table, l.out.as_deref(), args.json)
}

fn cmd_baseline(args: &RunArgs) -> CliResult<String> {
    let l = load(args, false)?;
    let w = single(&l);
    let (mapping, report) = run_baseline(w, &l.topology, &l.designs, l.config.elem_bytes)?;
    let table = render(&format!("baseline mapping for {}", w.name), &mapping, &report);
    let doc = MappingDocument::new("baseline", &l, w, mapping, report);
    emit(to_json(&doc)?, table, l.out.as_deref(), args.json)
}

fn cmd_compare(args: &RunArgs) -> CliResult<String> {
    let l = load(args, true)?;
    let mut rows = Vec::new();
    for w in &l.workloads {
        let (base_map, base) = run_baseline(w, &l.topology, &l.designs, l.config.elem_bytes)?;
        let found = run_outer_ga(w, &l.topology, &l.designs, &l.config.outer, &l.config.inner, l.config.elem_bytes, l.executor)
            .map_err(internal)?;
        rows.push(CompareRow {
            model: w.name.clone(),
            search_ms: found.report.total_ms,
            baseline_ms: base.total_ms,
            reduction_percent: reduction_percent(found.report.total_ms, base.total_ms),
            cell: compare_cell(found.report.total_ms, base.total_ms),
            search_valid: found.report.valid,
            baseline_valid: base.valid,
            search_mapping: set_lines(&found.mapping),
            baseline_mapping: set_lines(&base_map),
            search_strategies: strategy_lines(&found.mapping),
        });
    }
    let mean = rows.iter().map(|r| r.reduction_percent).sum::<f64>() / rows.len().max(1) as f64;
    let mut table = format!("{:<10} {:>12} {:>20}  mapping\n", "model", "baseline_ms", "search_ms");
    for r in &rows {
        table.push_str(&format!(
            "{:<10} {:>12.3} {:>20}  {}\n",
            r.model,
            r.baseline_ms,
            r.cell,
            r.search_mapping.join("; ")
        ));
    }
    table.push_str(&format!("mean change: {mean:+.1}%\n"));
    let doc = CompareDocument {
        command: "compare".into(),
        config: l.config.clone(),
        rows,
        mean_reduction_percent: mean,
    };
    emit(to_json(&doc)?, table, l.out.as_deref(), args.json)
}

fn cmd_oracle(args: &RunArgs) -> CliResult<String> {
    let l = load(args, false)?;
    let w = single(&l);
    let (mapping, report) = run_oracle(w, &l.topology, &l.designs, &OracleLimits::default(), l.config.elem_bytes)?;
    let found = run_outer_ga(w, &l.topology, &l.designs, &l.config.outer, &l.config.inner, l.config.elem_bytes, l.executor)
        .map_err(internal)?;
    let matches = found.report.total_ms <= report.total_ms * 1.01;
    let mut table = render(&format!("exhaustive optimum for {}", w.name), &mapping, &report);
    table.push_str(&format!(
        "search: {:.6} ms\nGA matches oracle: {}\n",
        found.report.total_ms,
        if matches { "yes" } else { "no" }
    ));
    let mut doc = MappingDocument::new("oracle", &l, w, mapping, report);
    doc.oracle = Some(OracleCheck {
        oracle_ms: doc.report.total_ms,
        search_ms: found.report.total_ms,
        search_matches: matches,
    });
    emit(to_json(&doc)?, table, l.out.as_deref(), args.json)
}

fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<String> {
    let text = read(&args.mapping)?;
    let doc: MappingDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("`{}` is not a mapping report: {e}", args.mapping.display())))?;
    let workload = doc.workload.clone().into_workload()?;
    let topology = SystemTopology::from_document(doc.topology.clone())?;
    let report = evaluate_with(&doc.mapping, &workload, &topology, doc.config.elem_bytes, args.overlap_ss)?;
    let table = render(&format!("re-evaluated {}", workload.name), &doc.mapping, &report)
        + &format!("recorded: {:.6} ms, matches: {}\n", doc.report.total_ms, report.total_ms == doc.report.total_ms);
    let out = EvaluateDocument {
        command: "evaluate".into(),
        source: args.mapping.display().to_string(),
        overlap_ss: args.overlap_ss,
        recorded_ms: doc.report.total_ms,
        total_ms: report.total_ms,
        matches: report.total_ms == doc.report.total_ms,
        report,
    };
    emit(to_json(&out)?, table, args.out.as_deref(), args.json)
}

fn cmd_catalog(args: &CatalogArgs) -> CliResult<String> {
    let models = MODEL_NAMES
        .iter()
        .map(|n| {
            let card = model_card(n)?;
            Ok(ModelEntry {
                name: n.to_string(),
                convs: card.workload.len(),
                parameters: card.parameter_count(),
                macs: card.mac_count(),
                conv_macs: card.workload.total_macs(),
            })
        })
        .collect::<crate::error::Result<Vec<_>>>()?;
    let doc = CatalogDocument {
        command: "catalog".into(),
        formula_version: FORMULA_VERSION.into(),
        models,
        designs: builtin_designs().iter().map(DesignDoc::from_design).collect(),
        topologies: vec![("f1".into(), build_f1_topology().to_document())],
    };
    let json = to_json(&doc)?;
    emit(json.clone(), json, args.out.as_deref(), true)
}

/// Runs a parsed command and returns the text for stdout.
pub fn run(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Map(a) => cmd_map(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Catalog(a) => cmd_catalog(a),
    }
}

/// Parses arguments, runs, prints, and maps errors to exit codes.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
