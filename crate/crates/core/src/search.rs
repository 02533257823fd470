//! Best-first search over reasoning paths (tables), greedy pairwise fusion
//! (graphs), and a brute-force enumerator used as an oracle on small tables.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::data::{Graph, Table, Triple};
use crate::error::{Error, Result};
use crate::grammar::{column_operands, enumerate_steps, plausible_modules, productions, GrammarId};
use crate::llm::Gateway;
use crate::path::{serialize_path, typecheck_path, DataType, PathNode};
use crate::registry::{apply_module, evaluate_path, literal_value, ArgRole, ModuleRegistry, ModuleSpec, Op, Value};
use crate::scoring::{
    ensemble_score, fluency_score, semantic_consistency_score, EnsembleConfig, EntailmentModel, FusionState,
    SaliencyQuery, SaliencyScorer,
};

pub const DEFAULT_BEAM_SIZE: usize = 20;
pub const DEFAULT_MAX_DEPTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    beam_size: usize,
    num_paths: usize,
    max_depth: usize,
}

impl SearchConfig {
    /// Requires every field positive and `beam_size >= num_paths`.
    pub fn new(beam_size: usize, num_paths: usize, max_depth: usize) -> Result<Self> {
        if beam_size == 0 || num_paths == 0 || max_depth == 0 {
            return Err(Error::InvalidConfig("beam size, path count and depth must be positive".into()));
        }
        if beam_size < num_paths {
            return Err(Error::InvalidConfig(format!(
                "beam size {beam_size} is smaller than the number of paths {num_paths}"
            )));
        }
        Ok(SearchConfig { beam_size, num_paths, max_depth })
    }

    pub fn beam_size(&self) -> usize {
        self.beam_size
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { beam_size: DEFAULT_BEAM_SIZE, num_paths: 1, max_depth: DEFAULT_MAX_DEPTH }
    }
}

/// A frontier entry. `value` is the evaluation of `partial_path` on the root
/// table and `depth` its number of steps.
#[derive(Debug, Clone)]
pub struct BeamEntry {
    pub partial_path: PathNode,
    pub key: String,
    pub value: Value,
    pub score: f64,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPath {
    #[serde(serialize_with = "as_text")]
    pub path: PathNode,
    pub score: f64,
}

fn as_text<S: serde::Serializer>(p: &PathNode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&serialize_path(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `num_paths` completions were collected.
    Completed,
    /// No expandable entries remain.
    FrontierExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchStats {
    pub expansions: usize,
    pub candidates: usize,
    pub evaluation_errors: usize,
    pub false_completions: usize,
    pub pruned: usize,
    pub max_frontier: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub paths: Vec<ScoredPath>,
    pub stats: SearchStats,
}

impl SearchOutcome {
    /// `NoPathFound` when nothing evaluated to true.
    pub fn require_paths(self) -> Result<Self> {
        if self.paths.is_empty() {
            Err(Error::NoPathFound)
        } else {
            Ok(self)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Frontier,
    Completed,
    DeadEnd,
    False,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRecord {
    pub path: String,
    pub score: Option<f64>,
    pub status: CandidateStatus,
}

/// One record per expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionRecord {
    pub popped: String,
    pub popped_score: f64,
    pub candidates: Vec<CandidateRecord>,
    pub pruned: usize,
}

/// Higher score first, then smaller serialization.
fn rank(a_score: f64, a_key: &str, b_score: f64, b_key: &str) -> Ordering {
    b_score.partial_cmp(&a_score).unwrap_or(Ordering::Equal).then_with(|| a_key.cmp(b_key))
}

fn expandable(ty: DataType, reg: &ModuleRegistry) -> bool {
    let g = GrammarId::TableToText;
    productions(g, ty).into_iter().any(|to| !plausible_modules(g, ty, to, reg).is_empty())
}

/// Value of `step` applied to a state, without re-evaluating the prefix.
fn apply_step(spec: &ModuleSpec, input: &Value, operands: &[PathNode]) -> Result<Value> {
    let mut args = Vec::with_capacity(operands.len() + 1);
    args.push(input.clone());
    for (op, &ty) in operands.iter().zip(&spec.input_types[1..]) {
        match op {
            PathNode::Literal(text) => args.push(literal_value(text, ty)?),
            other => return Err(Error::InvalidInput(format!("operand `{other}` is not a literal"))),
        }
    }
    apply_module(spec, &args)
}

fn checked_score(scorer: &dyn SaliencyScorer, t: &Arc<Table>, p: &PathNode) -> Result<f64> {
    let s = scorer.score(SaliencyQuery { table: t, partial_path: p })?;
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::InvalidInput(format!("scorer returned {s} for `{p}`")))
    }
}

pub fn best_first_search_table(
    t: &Arc<Table>,
    cfg: &SearchConfig,
    reg: &ModuleRegistry,
    scorer: &dyn SaliencyScorer,
) -> Result<SearchOutcome> {
    best_first_search_table_logged(t, cfg, reg, scorer, &mut |_| {})
}

/// Best-first search that reports every expansion to `log`.
///
/// Only paths evaluating to `true` are returned; false completions and steps
/// that fail to evaluate are dropped. Completed paths never occupy frontier
/// slots, and the frontier is cut back to the beam size after each expansion.
pub fn best_first_search_table_logged(
    t: &Arc<Table>,
    cfg: &SearchConfig,
    reg: &ModuleRegistry,
    scorer: &dyn SaliencyScorer,
    log: &mut dyn FnMut(ExpansionRecord),
) -> Result<SearchOutcome> {
    if t.num_rows() == 0 {
        return Err(Error::EmptyInput("search needs a table with at least one row".into()));
    }
    let root = PathNode::AllRows;
    let mut frontier = vec![BeamEntry {
        key: serialize_path(&root),
        score: checked_score(scorer, t, &root)?,
        partial_path: root,
        value: Value::Table(Arc::clone(t)),
        depth: 0,
    }];
    let mut completed: BTreeMap<String, ScoredPath> = BTreeMap::new();
    let mut stats = SearchStats {
        expansions: 0,
        candidates: 0,
        evaluation_errors: 0,
        false_completions: 0,
        pruned: 0,
        max_frontier: 1,
        termination: Termination::FrontierExhausted,
    };

    while completed.len() < cfg.num_paths {
        let Some(best) =
            frontier.iter().enumerate().min_by(|(_, a), (_, b)| rank(a.score, &a.key, b.score, &b.key)).map(|(i, _)| i)
        else {
            break;
        };
        let entry = frontier.swap_remove(best);
        stats.expansions += 1;
        let mut record =
            ExpansionRecord { popped: entry.key.clone(), popped_score: entry.score, candidates: Vec::new(), pruned: 0 };

        for step in enumerate_steps(&entry.partial_path, &entry.value, t, reg) {
            stats.candidates += 1;
            let path = step.graft(&entry.partial_path);
            let key = serialize_path(&path);
            let depth = entry.depth + 1;
            let mut note = |score, status| record.candidates.push(CandidateRecord { path: key.clone(), score, status });
            let value = match apply_step(&step.module, &entry.value, &step.operands) {
                Ok(v) => v,
                Err(_) => {
                    stats.evaluation_errors += 1;
                    note(None, CandidateStatus::Error);
                    continue;
                }
            };
            match value {
                Value::Bool(false) => {
                    stats.false_completions += 1;
                    note(None, CandidateStatus::False);
                }
                Value::Bool(true) => {
                    let score = checked_score(scorer, t, &path)?;
                    note(Some(score), CandidateStatus::Completed);
                    let slot = completed.entry(key.clone()).or_insert(ScoredPath { path: path.clone(), score });
                    slot.score = slot.score.max(score);
                }
                value if depth < cfg.max_depth && expandable(value.data_type(), reg) => {
                    let score = checked_score(scorer, t, &path)?;
                    note(Some(score), CandidateStatus::Frontier);
                    match frontier.iter_mut().find(|e| e.key == key) {
                        Some(e) => e.score = e.score.max(score),
                        None => frontier.push(BeamEntry { partial_path: path, key: key.clone(), value, score, depth }),
                    }
                }
                _ => note(None, CandidateStatus::DeadEnd),
            }
        }

        stats.max_frontier = stats.max_frontier.max(frontier.len());
        frontier.sort_by(|a, b| rank(a.score, &a.key, b.score, &b.key));
        if frontier.len() > cfg.beam_size {
            record.pruned = frontier.len() - cfg.beam_size;
            stats.pruned += record.pruned;
            frontier.truncate(cfg.beam_size);
        }
        log(record);
    }

    if completed.len() >= cfg.num_paths {
        stats.termination = Termination::Completed;
    }
    let mut paths: Vec<(String, ScoredPath)> = completed.into_iter().collect();
    paths.sort_by(|(ka, a), (kb, b)| rank(a.score, ka, b.score, kb));
    paths.truncate(cfg.num_paths);
    Ok(SearchOutcome { paths: paths.into_iter().map(|(_, p)| p).collect(), stats })
}

/// Instance bounds for [`enumerate_all_paths`].
pub const ORACLE_MAX_ROWS: usize = 6;
pub const ORACLE_MAX_COLUMNS: usize = 4;
pub const ORACLE_MAX_DEPTH: usize = 4;

/// Every well-typed path of at most `max_depth` steps that evaluates to
/// `true`, sorted by serialization.
///
/// This enumerator does not share the search's control flow: it walks the
/// registry directly, tries every operand combination the operand rules
/// allow, and checks each result with the type-checker and a full
/// evaluation.
pub fn enumerate_all_paths(t: &Arc<Table>, max_depth: usize, reg: &ModuleRegistry) -> Result<Vec<PathNode>> {
    if t.num_rows() > ORACLE_MAX_ROWS || t.num_columns() > ORACLE_MAX_COLUMNS || max_depth > ORACLE_MAX_DEPTH {
        return Err(Error::InstanceTooLarge(format!(
            "{} rows, {} columns, depth {max_depth} (limits {ORACLE_MAX_ROWS}, {ORACLE_MAX_COLUMNS}, {ORACLE_MAX_DEPTH})",
            t.num_rows(),
            t.num_columns(),
        )));
    }
    let mut oracle = Oracle { t, reg, memo: HashMap::new() };
    let mut out = BTreeMap::new();
    for suffix in oracle.suffixes(&Value::Table(Arc::clone(t)), None, max_depth).iter() {
        let mut path = PathNode::AllRows;
        for (module, operands) in suffix {
            let mut args = vec![path];
            args.extend(operands.iter().cloned());
            path = PathNode::apply(module, args);
        }
        let valid = typecheck_path(&path, reg, t) == Ok(DataType::Bool)
            && matches!(evaluate_path(t, &path, reg), Ok(Value::Bool(true)));
        if valid {
            out.insert(serialize_path(&path), path);
        }
    }
    Ok(out.into_values().collect())
}

type Step = (String, Vec<PathNode>);
/// Value key, hopped column, remaining steps.
type MemoKey = (String, Option<String>, usize);

struct Oracle<'a> {
    t: &'a Arc<Table>,
    reg: &'a ModuleRegistry,
    memo: HashMap<MemoKey, Arc<Vec<Vec<Step>>>>,
}

/// A key that identifies a value up to row order.
fn value_key(v: &Value) -> String {
    match v {
        Value::Table(t) => format!("T{:?}", t.row_multiset()),
        Value::Row(r) => format!("R{:?}", r.cells()),
        Value::Num(n) => format!("N{n}"),
        Value::Str(s) => format!("S{s}"),
        Value::Bool(b) => format!("B{b}"),
    }
}

impl Oracle<'_> {
    fn literal_pool(&self, spec: &ModuleSpec, pos: usize, chosen: &[PathNode], hopped: Option<&str>) -> Vec<PathNode> {
        let header = self.t.header();
        let column_of = |name: &str| self.t.column_index(name);
        let pool: Vec<String> = match spec.roles[pos] {
            ArgRole::Column | ArgRole::NumericColumn | ArgRole::IgnoredColumn => header.to_vec(),
            ArgRole::Operand => match chosen.last() {
                Some(PathNode::Literal(c)) => column_of(c).map(|i| column_operands(self.t, i)).unwrap_or_default(),
                _ => Vec::new(),
            },
            ArgRole::Text if spec.op == Op::Eq => {
                hopped.and_then(column_of).map(|i| column_operands(self.t, i)).unwrap_or_default()
            }
            _ => Vec::new(),
        };
        pool.into_iter().map(PathNode::literal).collect()
    }

    fn operand_lists(&self, spec: &ModuleSpec, hopped: Option<&str>) -> Vec<Vec<PathNode>> {
        let mut lists = vec![Vec::new()];
        for pos in 1..spec.arity() {
            let mut next = Vec::new();
            for chosen in &lists {
                for lit in self.literal_pool(spec, pos, chosen, hopped) {
                    let mut l = chosen.clone();
                    l.push(lit);
                    next.push(l);
                }
            }
            lists = next;
        }
        lists
    }

    /// Step sequences that take `v` to `true` in at most `remaining` steps.
    fn suffixes(&mut self, v: &Value, hopped: Option<String>, remaining: usize) -> Arc<Vec<Vec<Step>>> {
        let key = (value_key(v), hopped.clone(), remaining);
        if let Some(hit) = self.memo.get(&key) {
            return Arc::clone(hit);
        }
        let mut out = Vec::new();
        if remaining > 0 {
            let specs: Vec<ModuleSpec> =
                self.reg.symbolic().filter(|m| m.input_types.first() == Some(&v.data_type())).cloned().collect();
            for spec in specs {
                for operands in self.operand_lists(&spec, hopped.as_deref()) {
                    let Ok(next) = apply_step(&spec, v, &operands) else { continue };
                    let step: Step = (spec.name.clone(), operands.clone());
                    match next {
                        Value::Bool(true) => out.push(vec![step]),
                        Value::Bool(false) => {}
                        other => {
                            let hop_col = match (spec.op, operands.first()) {
                                (Op::Hop, Some(PathNode::Literal(c))) => Some(c.clone()),
                                _ => None,
                            };
                            for tail in self.suffixes(&other, hop_col, remaining - 1).iter() {
                                let mut seq = vec![step.clone()];
                                seq.extend(tail.iter().cloned());
                                out.push(seq);
                            }
                        }
                    }
                }
            }
        }
        let out = Arc::new(out);
        self.memo.insert(key, Arc::clone(&out));
        out
    }
}

/// One committed step of graph summarization.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FusionStep {
    SurfaceRealization { triple: String, output: String },
    Fusion { first: String, second: String, output: String, score: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphOutcome {
    pub text: String,
    pub trace: Vec<FusionStep>,
    /// Fusion candidates generated, including those not chosen.
    pub fusion_candidates: usize,
    #[serde(skip)]
    pub covered: BTreeSet<Triple>,
}

/// Greedy summarization: realize every triple, then repeatedly fuse the
/// best-scoring pair of partial summaries until one remains.
///
/// States are kept sorted by their covered triples and pairs are tried in
/// index order, so ties go to the earliest pair and the result does not
/// depend on the input order of the triples.
pub fn greedy_fuse_graph(
    g: &Graph,
    gateway: &Gateway,
    nli: &dyn EntailmentModel,
    cfg: &EnsembleConfig,
) -> Result<GraphOutcome> {
    if g.is_empty() {
        return Err(Error::EmptyInput("graph has no triples".into()));
    }
    let mut trace = Vec::new();
    let mut realized: BTreeMap<Triple, String> = BTreeMap::new();
    let mut states = Vec::with_capacity(g.len());
    for triple in g.triples() {
        let text = gateway.surface_realize_triple(triple)?.text;
        trace.push(FusionStep::SurfaceRealization { triple: triple.to_string(), output: text.clone() });
        realized.insert(triple.clone(), text.clone());
        states.push(FusionState::new([triple.clone()].into(), text)?);
    }

    let mut cache: HashMap<(String, String), (String, f64)> = HashMap::new();
    let mut fusion_candidates = 0;
    while states.len() > 1 {
        let mut best: Option<(usize, usize, String, f64)> = None;
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                let pair = (states[i].text.clone(), states[j].text.clone());
                let (text, score) = match cache.get(&pair) {
                    Some(hit) => hit.clone(),
                    None => {
                        fusion_candidates += 1;
                        let fused = gateway.fuse_texts(&pair.0, &pair.1)?;
                        let covered: BTreeSet<&Triple> = states[i].covered.iter().chain(&states[j].covered).collect();
                        let premise: Vec<&str> = covered.iter().map(|t| realized[*t].as_str()).collect();
                        let sf = fluency_score(&fused.token_logprobs).unwrap_or(0.0);
                        let ssc = semantic_consistency_score(&premise, &fused.text, nli)?;
                        let scored = (fused.text, ensemble_score(sf, ssc, cfg));
                        cache.insert(pair, scored.clone());
                        scored
                    }
                };
                if best.as_ref().is_none_or(|b| score > b.3) {
                    best = Some((i, j, text, score));
                }
            }
        }
        let (i, j, text, score) = best.expect("at least one pair");
        let b = states.remove(j);
        let a = states.remove(i);
        trace.push(FusionStep::Fusion { first: a.text.clone(), second: b.text.clone(), output: text.clone(), score });
        let covered = a.covered.union(&b.covered).cloned().collect();
        states.push(FusionState::new(covered, text)?);
        states.sort_by(|x, y| x.covered.cmp(&y.covered));
    }
    let last = states.pop().expect("one state remains");
    Ok(GraphOutcome { text: last.text, trace, fusion_candidates, covered: last.covered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_graph, parse_table, TableFormat};
    use crate::registry::registry_default;
    use crate::scoring::{HeuristicSaliency, OverlapEntailment};

    fn csv(s: &str) -> Arc<Table> {
        Arc::new(parse_table(s, TableFormat::Csv).unwrap())
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::new(2, 3, 5).is_err());
        assert!(SearchConfig::new(0, 0, 5).is_err());
        let d = SearchConfig::default();
        assert_eq!((d.beam_size(), d.max_depth()), (20, 5));
    }

    #[test]
    fn search_returns_true_paths() {
        let t = csv("name,pts\nann,3\nbo,5\n");
        let reg = registry_default();
        let cfg = SearchConfig::new(20, 3, 3).unwrap();
        let out = best_first_search_table(&t, &cfg, &reg, &HeuristicSaliency::default()).unwrap();
        assert_eq!(out.paths.len(), 3);
        for p in &out.paths {
            assert_eq!(evaluate_path(&t, &p.path, &reg).unwrap(), Value::Bool(true));
        }
        assert!(out.paths.windows(2).all(|w| w[0].score >= w[1].score));
        assert_eq!(out.stats.termination, Termination::Completed);
    }

    #[test]
    fn log_has_one_record_per_expansion() {
        let t = csv("name,pts\nann,3\nbo,5\n");
        let reg = registry_default();
        let mut records = Vec::new();
        let out = best_first_search_table_logged(
            &t,
            &SearchConfig::new(4, 1, 3).unwrap(),
            &reg,
            &HeuristicSaliency::default(),
            &mut |r| records.push(r),
        )
        .unwrap();
        assert_eq!(records.len(), out.stats.expansions);
        assert_eq!(records[0].popped, "all_rows");
    }

    #[test]
    fn oracle_guard_and_basics() {
        let reg = registry_default();
        let big = csv("a\n1\n2\n3\n4\n5\n6\n7\n");
        assert!(matches!(enumerate_all_paths(&big, 2, &reg), Err(Error::InstanceTooLarge(_))));
        let one = csv("a\n1\n");
        let all = enumerate_all_paths(&one, 3, &reg).unwrap();
        let text: Vec<String> = all.iter().map(serialize_path).collect();
        assert!(text.contains(&"only { all_rows }".to_string()));
        let unique: BTreeSet<&String> = text.iter().collect();
        assert_eq!(unique.len(), text.len());
    }

    #[test]
    fn single_triple_graph() {
        let g = parse_graph("A.S._Gubbio_1910 | league | Serie_D").unwrap();
        let gw = Gateway::mock();
        let out = greedy_fuse_graph(&g, &gw, &OverlapEntailment, &EnsembleConfig::default()).unwrap();
        assert_eq!(out.text, "AS Gubbio 1910 plays in Serie D.");
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn fusion_reduces_state_count_by_one() {
        let g = parse_graph(
            "Italy | capital | Rome # Italy | leader | Pietro_Grasso # Serie_D | champions | S.S._Robur_Siena",
        )
        .unwrap();
        let gw = Gateway::mock();
        let out = greedy_fuse_graph(&g, &gw, &OverlapEntailment, &EnsembleConfig::default()).unwrap();
        let fusions = out.trace.iter().filter(|s| matches!(s, FusionStep::Fusion { .. })).count();
        assert_eq!(fusions, 2);
        assert_eq!(out.covered.len(), 3);
    }
}
