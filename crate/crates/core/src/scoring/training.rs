//! Training data for the saliency classifier, built from gold paths by
//! truncation (positives) and single-edit corruption (negatives).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Table, TableRecord};
use crate::error::{Error, Location, Result};
use crate::grammar::enumerate_steps;
use crate::path::{parse_path, serialize_path, typecheck_path, PathNode};
use crate::registry::{evaluate_path, ModuleRegistry, ModuleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleLabel {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Truncation,
    ModuleSwap,
    InputSwap,
}

#[derive(Debug, Clone)]
pub struct LabeledPathSample {
    pub table: Arc<Table>,
    /// Samples built from the same table share this id.
    pub table_id: usize,
    pub partial_path: PathNode,
    pub label: SampleLabel,
    pub provenance: Provenance,
}

/// A gold path in its on-disk text form; parsing happens during generation
/// so malformed paths are reported rather than aborting the run.
#[derive(Debug, Clone)]
pub struct GoldPath {
    pub table: Arc<Table>,
    pub path: String,
}

impl GoldPath {
    pub fn new(table: Arc<Table>, path: &PathNode) -> Self {
        GoldPath { table, path: serialize_path(path) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedGold {
    pub index: usize,
    pub error: Error,
}

#[derive(Debug, Clone, Default)]
pub struct SaliencyDataset {
    pub samples: Vec<LabeledPathSample>,
    pub skipped: Vec<SkippedGold>,
}

impl SaliencyDataset {
    pub fn count(&self, label: SampleLabel) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn count_provenance(&self, provenance: Provenance) -> usize {
        self.samples.iter().filter(|s| s.provenance == provenance).count()
    }
}

/// For each gold path with k steps: k correct prefixes in post-order, each
/// followed by its module swaps and then its input swaps. Gold paths that do
/// not parse or typecheck are skipped and reported.
pub fn generate_saliency_training_data(gold: &[GoldPath], reg: &ModuleRegistry) -> SaliencyDataset {
    let mut out = SaliencyDataset::default();
    for (index, g) in gold.iter().enumerate() {
        let checked = parse_path(&g.path).and_then(|p| {
            if !matches!(p, PathNode::Apply { .. }) {
                return Err(Error::InvalidInput("a gold path needs at least one module".into()));
            }
            typecheck_path(&p, reg, &g.table)?;
            Ok(p)
        });
        let path = match checked {
            Ok(p) => p,
            Err(e) => {
                let error = Error::InvalidGoldPath { path: g.path.clone(), reason: e.to_string() };
                out.skipped.push(SkippedGold { index, error });
                continue;
            }
        };
        out.samples.extend(samples_for(&g.table, index, &path, reg));
    }
    out
}

fn samples_for(table: &Arc<Table>, table_id: usize, gold: &PathNode, reg: &ModuleRegistry) -> Vec<LabeledPathSample> {
    let correct: Vec<&PathNode> = gold.apply_subtrees();
    let mut seen: BTreeSet<String> = correct.iter().map(|p| serialize_path(p)).collect();
    let sample = |p: PathNode, label, provenance| LabeledPathSample {
        table: Arc::clone(table),
        table_id,
        partial_path: p,
        label,
        provenance,
    };
    let mut out = Vec::new();
    for c in correct {
        out.push(sample(c.clone(), SampleLabel::Correct, Provenance::Truncation));
        let swaps = module_swaps(c, table, reg)
            .into_iter()
            .map(|p| (p, Provenance::ModuleSwap))
            .chain(input_swaps(c, table, reg).into_iter().map(|p| (p, Provenance::InputSwap)));
        for (p, provenance) in swaps {
            if seen.insert(serialize_path(&p)) {
                out.push(sample(p, SampleLabel::Incorrect, provenance));
            }
        }
    }
    out
}

/// Spelling for `candidate` that matches the style of `original` (alias or
/// canonical).
fn spelled_like(original: &str, candidate: &ModuleSpec, reg: &ModuleRegistry) -> String {
    if reg.is_alias(original) {
        if let Some(alias) = reg.alias_for(&candidate.name) {
            return alias.to_string();
        }
    }
    candidate.name.clone()
}

/// Replace the outermost module with every other symbolic module of the same
/// signature, keeping the arguments.
fn module_swaps(p: &PathNode, table: &Table, reg: &ModuleRegistry) -> Vec<PathNode> {
    let PathNode::Apply { module, args } = p else { return Vec::new() };
    let Ok(spec) = reg.lookup(module) else { return Vec::new() };
    reg.symbolic()
        .filter(|m| m.name != spec.name && m.same_signature(spec))
        .map(|m| PathNode::apply(&spelled_like(module, m, reg), args.clone()))
        .filter(|q| typecheck_path(q, reg, table).is_ok())
        .collect()
}

/// Replace exactly one non-input argument of the outermost module with
/// another operand the grammar would offer at that step.
fn input_swaps(p: &PathNode, table: &Arc<Table>, reg: &ModuleRegistry) -> Vec<PathNode> {
    let PathNode::Apply { module, args } = p else { return Vec::new() };
    let Ok(spec) = reg.lookup(module) else { return Vec::new() };
    let Some(input) = args.first() else { return Vec::new() };
    let Ok(value) = evaluate_path(table, input, reg) else { return Vec::new() };
    let original: Vec<String> = args[1..].iter().map(serialize_path).collect();
    enumerate_steps(input, &value, table, reg)
        .into_iter()
        .filter(|step| step.module.name == spec.name)
        .filter(|step| {
            let edits = step.operands.iter().zip(&original).filter(|(a, b)| serialize_path(a) != **b).count();
            edits == 1
        })
        .map(|step| {
            let mut all = vec![input.clone()];
            all.extend(step.operands);
            PathNode::apply(module, all)
        })
        .filter(|q| typecheck_path(q, reg, table).is_ok())
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    table: TableRecord,
    path: String,
    label: SampleLabel,
    provenance: Provenance,
}

/// One JSON record per line.
pub fn write_samples(samples: &[LabeledPathSample]) -> String {
    let mut out = String::new();
    for s in samples {
        let rec = SampleRecord {
            table: s.table.to_record(),
            path: serialize_path(&s.partial_path),
            label: s.label,
            provenance: s.provenance,
        };
        out.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn json_lines<T: for<'de> Deserialize<'de>>(text: &str) -> impl Iterator<Item = Result<(usize, T)>> + '_ {
    text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, line)| {
        serde_json::from_str::<T>(line)
            .map(|v| (i + 1, v))
            .map_err(|e| Error::malformed(Location::row(i + 1), e.to_string()))
    })
}

/// Tables are shared between records with equal content.
#[derive(Default)]
struct TableInterner {
    ids: BTreeMap<String, (usize, Arc<Table>)>,
}

impl TableInterner {
    fn intern(&mut self, record: TableRecord, line: usize) -> Result<(usize, Arc<Table>)> {
        let key = serde_json::to_string(&record).expect("records serialize");
        if let Some((id, t)) = self.ids.get(&key) {
            return Ok((*id, Arc::clone(t)));
        }
        let table = Table::from_record(record).map_err(|e| at_line(e, line))?;
        let entry = (self.ids.len(), Arc::new(table));
        self.ids.insert(key, entry.clone());
        Ok(entry)
    }
}

fn at_line(e: Error, line: usize) -> Error {
    match e {
        Error::MalformedInput { message, .. } => Error::malformed(Location::row(line), message),
        other => Error::malformed(Location::row(line), other.to_string()),
    }
}

/// Parse a file produced by [`write_samples`].
pub fn read_samples(text: &str) -> Result<Vec<LabeledPathSample>> {
    let mut tables = TableInterner::default();
    let mut out = Vec::new();
    for item in json_lines::<SampleRecord>(text) {
        let (line, rec) = item?;
        let (table_id, table) = tables.intern(rec.table, line)?;
        let partial_path = parse_path(&rec.path).map_err(|e| at_line(e, line))?;
        out.push(LabeledPathSample { table, table_id, partial_path, label: rec.label, provenance: rec.provenance });
    }
    Ok(out)
}

#[derive(Deserialize)]
struct GoldRecord {
    table: TableRecord,
    path: String,
}

/// Line-delimited `{"table": ..., "path": ...}` records.
pub fn read_gold_paths(text: &str) -> Result<Vec<GoldPath>> {
    let mut tables = TableInterner::default();
    let mut out = Vec::new();
    for item in json_lines::<GoldRecord>(text) {
        let (line, rec) = item?;
        let (_, table) = tables.intern(rec.table, line)?;
        out.push(GoldPath { table, path: rec.path });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_table, TableFormat};
    use crate::registry::registry_default;

    fn league() -> Arc<Table> {
        Arc::new(parse_table("player,points,wins\nann,10,3\nbo,7,1\ncy,12,4\n", TableFormat::Csv).unwrap())
    }

    fn paths(ds: &SaliencyDataset, label: SampleLabel) -> Vec<String> {
        ds.samples.iter().filter(|s| s.label == label).map(|s| serialize_path(&s.partial_path)).collect()
    }

    #[test]
    fn truncation_gives_one_prefix_per_step() {
        let reg = registry_default();
        let gold =
            [GoldPath { table: league(), path: "eq { hop { argmin { all_rows ; points } ; player } ; bo }".into() }];
        let ds = generate_saliency_training_data(&gold, &reg);
        assert!(ds.skipped.is_empty());
        assert_eq!(
            paths(&ds, SampleLabel::Correct),
            [
                "argmin { all_rows ; points }",
                "hop { argmin { all_rows ; points } ; player }",
                "eq { hop { argmin { all_rows ; points } ; player } ; bo }",
            ]
        );
        let wrong = paths(&ds, SampleLabel::Incorrect);
        assert!(wrong.contains(&"argmax { all_rows ; points }".to_string()));
        assert!(wrong.contains(&"argmin { all_rows ; wins }".to_string()));
        assert!(wrong.contains(&"eq { hop { argmin { all_rows ; points } ; player } ; ann }".to_string()));
    }

    #[test]
    fn input_swap_replaces_column() {
        let reg = registry_default();
        let gold = [GoldPath { table: league(), path: "avg { all_rows ; points }".into() }];
        let ds = generate_saliency_training_data(&gold, &reg);
        let swaps: Vec<String> = ds
            .samples
            .iter()
            .filter(|s| s.provenance == Provenance::InputSwap)
            .map(|s| serialize_path(&s.partial_path))
            .collect();
        assert_eq!(swaps, ["avg { all_rows ; wins }"]);
        let modules: Vec<String> = ds
            .samples
            .iter()
            .filter(|s| s.provenance == Provenance::ModuleSwap)
            .map(|s| serialize_path(&s.partial_path))
            .collect();
        assert_eq!(modules, ["max { all_rows ; points }", "min { all_rows ; points }", "sum { all_rows ; points }"]);
    }

    #[test]
    fn invalid_gold_is_skipped() {
        let reg = registry_default();
        let gold = [
            GoldPath { table: league(), path: "avg { all_rows ; player }".into() },
            GoldPath { table: league(), path: "avg { all_rows".into() },
            GoldPath { table: league(), path: "count { all_rows }".into() },
        ];
        let ds = generate_saliency_training_data(&gold, &reg);
        assert_eq!(ds.skipped.iter().map(|s| s.index).collect::<Vec<_>>(), [0, 1]);
        assert!(ds.skipped.iter().all(|s| s.error.kind() == "InvalidGoldPath"));
        assert_eq!(ds.count(SampleLabel::Correct), 1);
    }

    #[test]
    fn file_round_trip() {
        let reg = registry_default();
        let gold = [GoldPath { table: league(), path: "only { filter_eq { all_rows ; player ; ann } }".into() }];
        let ds = generate_saliency_training_data(&gold, &reg);
        let text = write_samples(&ds.samples);
        let back = read_samples(&text).unwrap();
        assert_eq!(back.len(), ds.samples.len());
        assert_eq!(write_samples(&back), text);
        assert!(back.iter().all(|s| s.table_id == 0));
        assert!(matches!(read_samples("{not json}\n"), Err(Error::MalformedInput { .. })));
    }

    #[test]
    fn gold_reader() {
        let line = r#"{"table":{"topic":"t","header":["a"],"rows":[["1"]]},"path":"count { all_rows }"}"#;
        let gold = read_gold_paths(&format!("{line}\n\n{line}\n")).unwrap();
        assert_eq!(gold.len(), 2);
        assert!(Arc::ptr_eq(&gold[0].table, &gold[1].table));
    }
}
