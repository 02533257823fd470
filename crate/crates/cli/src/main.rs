use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use stepwise_core::bleu::evaluate_bleu;
use stepwise_core::llm::{
    BaselineInput, BaselineMode, CompletionBackend, DemoSet, Gateway, MockBackend, RemoteBackend,
};
use stepwise_core::scoring::{
    generate_saliency_training_data, read_gold_paths, write_samples, EnsembleConfig, EntailmentModel,
    HeuristicSaliency, OverlapEntailment, Provenance, RemoteEntailment, RemoteSaliency, SaliencyScorer, SampleLabel,
};
use stepwise_core::search::{
    best_first_search_table_logged, enumerate_all_paths, greedy_fuse_graph, SearchConfig, DEFAULT_BEAM_SIZE,
    DEFAULT_MAX_DEPTH,
};
use stepwise_core::{
    evaluate_traced, parse_graph, parse_path, parse_table, registry_default, serialize_path, typecheck_path, Error,
    Graph, Result, Table, TableFormat,
};

#[derive(Parser)]
#[command(name = "stepwise", version, about = "Typed reasoning-path search and data-to-text generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Tsv,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum BackendArg {
    Mock,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScorerArg {
    Heuristic,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Table,
    Graph,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Direct,
    Cot,
}

#[derive(clap::Args)]
struct TableArgs {
    /// Table file (.json, .csv or .tsv)
    #[arg(long)]
    table: PathBuf,
    /// Override the format implied by the file extension
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(clap::Args)]
struct SearchArgs {
    #[arg(long, default_value_t = DEFAULT_BEAM_SIZE)]
    beam: usize,
    #[arg(long = "num-paths", default_value_t = 1)]
    num_paths: usize,
    #[arg(long = "max-depth", default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: usize,
    #[arg(long, value_enum, default_value = "heuristic")]
    scorer: ScorerArg,
    /// Accepted for interface stability; every shipped scorer is deterministic
    #[arg(long)]
    seed: Option<u64>,
    /// Write one JSON record per search expansion to this file
    #[arg(long = "log-search")]
    log_search: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendArg,
    /// Demonstration file; defaults to the bundled demonstrations
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Use at most this many demonstrations per prompt
    #[arg(long = "num-demos")]
    num_demos: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a reasoning path on a table
    Exec {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long)]
        path: String,
        /// Also print every executed step
        #[arg(long)]
        trace: bool,
    },
    /// Print the output datatype of a reasoning path
    Typecheck {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long)]
        path: String,
    },
    /// Search for reasoning paths that evaluate to true
    Search {
        #[command(flatten)]
        table: TableArgs,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Generate summaries for a table or a graph
    Generate {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Weight of fluency in the graph scoring ensemble
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum, default_value = "mock")]
        nli: BackendArg,
    },
    /// Single-prompt baselines
    Baseline {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// List every true path up to a depth (small tables only)
    Enumerate {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long = "max-depth", default_value_t = 3)]
        max_depth: usize,
    },
    /// Build saliency training data from gold paths
    SaliencyData {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corpus BLEU-1/2/3 of hypotheses against references
    EvalBleu {
        #[arg(long)]
        hyps: PathBuf,
        #[arg(long)]
        refs: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_table(path: &Path, format: Option<FormatArg>) -> Result<Arc<Table>> {
    let format = match format {
        Some(FormatArg::Json) => TableFormat::Json,
        Some(FormatArg::Csv) => TableFormat::Csv,
        Some(FormatArg::Tsv) => TableFormat::Tsv,
        None => TableFormat::from_extension(&path.to_string_lossy())
            .ok_or_else(|| Error::InvalidInput(format!("cannot infer table format of {}", path.display())))?,
    };
    Ok(Arc::new(parse_table(&read(path)?, format)?))
}

fn load_graph(path: &Path) -> Result<Graph> {
    parse_graph(&read(path)?)
}

/// Missing task-specific inputs are usage errors (exit code 2).
fn required<'a>(arg: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    use clap::CommandFactory;
    match arg {
        Some(p) => Ok(p),
        None => Cli::command()
            .error(clap::error::ErrorKind::MissingRequiredArgument, format!("--{flag} is required for this task"))
            .exit(),
    }
}

fn gateway(args: &BackendArgs) -> Result<Gateway> {
    let mut demos = match &args.demos {
        Some(p) => DemoSet::from_json(&read(p)?)?,
        None => DemoSet::builtin(),
    };
    if let Some(k) = args.num_demos {
        demos = demos.truncated(k);
    }
    let backend: Box<dyn CompletionBackend> = match args.backend {
        BackendArg::Mock => Box::new(MockBackend),
        BackendArg::Remote => Box::new(RemoteBackend::from_env()?),
    };
    Ok(Gateway::new(backend, demos))
}

fn scorer(arg: ScorerArg) -> Result<Box<dyn SaliencyScorer>> {
    Ok(match arg {
        ScorerArg::Heuristic => Box::new(HeuristicSaliency::default()),
        ScorerArg::Remote => Box::new(RemoteSaliency::from_env()?),
    })
}

fn print_json<T: Serialize>(out: &mut impl Write, value: &T) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}

/// Run the search, writing the expansion log if requested.
fn run_search(t: &Arc<Table>, args: &SearchArgs) -> Result<stepwise_core::search::SearchOutcome> {
    let cfg = SearchConfig::new(args.beam, args.num_paths, args.max_depth)?;
    let reg = registry_default();
    let scorer = scorer(args.scorer)?;
    let mut log_file = match &args.log_search {
        Some(p) => Some(BufWriter::new(fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?)),
        None => None,
    };
    let mut log_error = None;
    let outcome = best_first_search_table_logged(t, &cfg, &reg, scorer.as_ref(), &mut |record| {
        if let Some(f) = log_file.as_mut() {
            if let Err(e) = print_json(f, &record) {
                log_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = log_error {
        return Err(e);
    }
    if let Some(mut f) = log_file {
        f.flush()?;
    }
    if outcome.paths.is_empty() {
        eprintln!("{}", serde_json::to_string(&outcome.stats).unwrap_or_default());
    }
    outcome.require_paths()
}

/// A hypothesis line: a JSON string, a JSON object with `text`, or plain text.
fn hypothesis(line: &str) -> String {
    match serde_json::from_str::<serde_json::Value>(line) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(serde_json::Value::Object(o)) => match o.get("text") {
            Some(serde_json::Value::String(s)) => s.clone(),
            _ => line.to_string(),
        },
        _ => line.to_string(),
    }
}

/// A reference line: a JSON array of strings, or a single plain reference.
fn references(line: &str) -> Vec<String> {
    match serde_json::from_str::<Vec<String>>(line) {
        Ok(v) => v,
        Err(_) => vec![hypothesis(line)],
    }
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let reg = registry_default();
    match cli.command {
        Command::Exec { table, path, trace } => {
            let t = load_table(&table.table, table.format)?;
            let p = parse_path(&path)?;
            typecheck_path(&p, &reg, &t)?;
            let (value, steps) = evaluate_traced(&t, &p, &reg)?;
            writeln!(out, "{value}")?;
            if trace {
                for s in steps {
                    print_json(&mut out, &s)?;
                }
            }
        }
        Command::Typecheck { table, path } => {
            let t = load_table(&table.table, table.format)?;
            let ty = typecheck_path(&parse_path(&path)?, &reg, &t)?;
            writeln!(out, "{ty}")?;
        }
        Command::Search { table, search } => {
            let t = load_table(&table.table, table.format)?;
            for p in run_search(&t, &search)?.paths {
                print_json(&mut out, &p)?;
            }
        }
        Command::Generate { task, table, format, graph, backend, search, alpha, nli } => {
            let gw = gateway(&backend)?;
            match task {
                TaskArg::Table => {
                    let t = load_table(required(&table, "table")?, format)?;
                    for p in run_search(&t, &search)?.paths {
                        let text = gw.surface_realize_path(&t, &p.path)?;
                        print_json(
                            &mut out,
                            &json!({"path": serialize_path(&p.path), "score": p.score, "text": text}),
                        )?;
                    }
                }
                TaskArg::Graph => {
                    let g = load_graph(required(&graph, "graph")?)?;
                    let cfg = match alpha {
                        Some(a) => EnsembleConfig::new(a)?,
                        None => EnsembleConfig::default(),
                    };
                    let nli: Box<dyn EntailmentModel> = match nli {
                        BackendArg::Mock => Box::new(OverlapEntailment),
                        BackendArg::Remote => Box::new(RemoteEntailment::from_env()?),
                    };
                    let outcome = greedy_fuse_graph(&g, &gw, nli.as_ref(), &cfg)?;
                    print_json(&mut out, &outcome)?;
                }
            }
        }
        Command::Baseline { mode, task, table, format, graph, backend } => {
            let gw = gateway(&backend)?;
            let mode = match mode {
                ModeArg::Direct => BaselineMode::Direct,
                ModeArg::Cot => BaselineMode::Cot,
            };
            let text = match task {
                TaskArg::Table => {
                    let t = load_table(required(&table, "table")?, format)?;
                    gw.baseline_generate(mode, BaselineInput::Table(&t))?
                }
                TaskArg::Graph => {
                    let g = load_graph(required(&graph, "graph")?)?;
                    gw.baseline_generate(mode, BaselineInput::Graph(&g))?
                }
            };
            print_json(&mut out, &json!({ "text": text }))?;
        }
        Command::Enumerate { table, max_depth } => {
            let t = load_table(&table.table, table.format)?;
            for p in enumerate_all_paths(&t, max_depth, &reg)? {
                writeln!(out, "{}", serialize_path(&p))?;
            }
        }
        Command::SaliencyData { gold, out: out_path } => {
            let gold = read_gold_paths(&read(&gold)?)?;
            let ds = generate_saliency_training_data(&gold, &reg);
            for s in &ds.skipped {
                eprintln!("{}", serde_json::to_string(&s.error.record()).unwrap_or_default());
            }
            fs::write(&out_path, write_samples(&ds.samples))
                .map_err(|e| Error::Io(format!("{}: {e}", out_path.display())))?;
            print_json(
                &mut out,
                &json!({
                    "gold_paths": gold.len(),
                    "skipped": ds.skipped.len(),
                    "samples": ds.samples.len(),
                    "correct": ds.count(SampleLabel::Correct),
                    "incorrect": ds.count(SampleLabel::Incorrect),
                    "module_swap": ds.count_provenance(Provenance::ModuleSwap),
                    "input_swap": ds.count_provenance(Provenance::InputSwap),
                }),
            )?;
        }
        Command::EvalBleu { hyps, refs } => {
            let hyps: Vec<String> = read(&hyps)?.lines().map(hypothesis).collect();
            let refs: Vec<Vec<String>> = read(&refs)?.lines().map(references).collect();
            print_json(&mut out, &evaluate_bleu(&hyps, &refs)?)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.record()).unwrap_or_else(|_| e.to_string()));
            if e.is_backend() {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
