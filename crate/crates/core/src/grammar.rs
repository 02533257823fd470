//! Datatype production rules and next-step enumeration.

use std::collections::BTreeSet;

use crate::data::{fold, CellValue, ColumnType, Table};
use crate::path::{is_valid_literal, DataType, PathNode};
use crate::registry::{ArgRole, ModuleKind, ModuleRegistry, ModuleSpec, Op, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GrammarId {
    GraphToText,
    TableToText,
}

impl std::str::FromStr for GrammarId {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "graph" => Ok(GrammarId::GraphToText),
            "table" => Ok(GrammarId::TableToText),
            other => Err(crate::Error::InvalidInput(format!("unknown task `{other}`"))),
        }
    }
}

/// A rule with a tuple on the left-hand side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductionRule {
    pub from: Vec<DataType>,
    pub to: BTreeSet<DataType>,
}

/// Single-type rules: the datatypes reachable from `from` in one step.
pub fn productions(g: GrammarId, from: DataType) -> BTreeSet<DataType> {
    use DataType::*;
    let to: &[DataType] = match (g, from) {
        (GrammarId::TableToText, Table) => &[Table, Row, Number, Bool],
        (GrammarId::TableToText, Row) => &[String, Number],
        (GrammarId::TableToText, String) | (GrammarId::TableToText, Number) => &[Bool],
        (GrammarId::GraphToText, Triple) => &[String],
        _ => &[],
    };
    to.iter().copied().collect()
}

/// Every rule of a grammar, including the tuple rules.
pub fn rules(g: GrammarId) -> Vec<ProductionRule> {
    use DataType::*;
    let single = |from: DataType| ProductionRule { from: vec![from], to: productions(g, from) };
    match g {
        GrammarId::TableToText => vec![
            single(Table),
            single(Row),
            single(String),
            single(Number),
            ProductionRule { from: vec![Table, Path], to: [String].into() },
        ],
        GrammarId::GraphToText => {
            vec![single(Triple), ProductionRule { from: vec![String, String], to: [String].into() }]
        }
    }
}

fn module_in_grammar(g: GrammarId, m: &ModuleSpec) -> bool {
    match g {
        GrammarId::TableToText => m.kind == ModuleKind::Symbolic,
        GrammarId::GraphToText => matches!(m.op, Op::SurfaceRealizeTriple | Op::TextFusion),
    }
}

/// Modules whose first input is `from` and whose output is `to`, provided the
/// grammar has a rule `from -> to` (or a tuple rule starting with `from`).
pub fn plausible_modules(g: GrammarId, from: DataType, to: DataType, reg: &ModuleRegistry) -> Vec<&ModuleSpec> {
    let allowed = rules(g).iter().any(|r| r.from[0] == from && r.to.contains(&to));
    if !allowed {
        return Vec::new();
    }
    let mut out: Vec<&ModuleSpec> = reg
        .modules()
        .iter()
        .filter(|m| module_in_grammar(g, m))
        .filter(|m| m.input_types.first() == Some(&from) && m.output_type == to)
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

/// One concrete next step: the module plus every argument after the first,
/// which is the current partial path.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateStep {
    pub module: ModuleSpec,
    pub operands: Vec<PathNode>,
    pub produced_type: DataType,
}

impl CandidateStep {
    pub fn graft(&self, current: &PathNode) -> PathNode {
        let mut args = Vec::with_capacity(self.operands.len() + 1);
        args.push(current.clone());
        args.extend(self.operands.iter().cloned());
        PathNode::apply(&self.module.name, args)
    }
}

/// Distinct usable values of a column, sorted (numerically for numbers,
/// case-folded for text) so the result does not depend on row order. Case
/// variants collapse to the spelling that sorts first.
pub fn column_operands(t: &Table, column: usize) -> Vec<String> {
    match t.column_type(column) {
        ColumnType::Numeric => {
            let nums: BTreeSet<_> = t.column(column).filter_map(CellValue::as_number).collect();
            nums.into_iter().map(|n| n.to_string()).filter(|s| is_valid_literal(s)).collect()
        }
        ColumnType::Textual => {
            let mut by_key: std::collections::BTreeMap<String, String> = Default::default();
            for cell in t.column(column) {
                let s = cell.render();
                if !is_valid_literal(&s) {
                    continue;
                }
                by_key
                    .entry(fold(&s))
                    .and_modify(|cur| {
                        if s < *cur {
                            *cur = s.clone();
                        }
                    })
                    .or_insert(s);
            }
            by_key.into_values().collect()
        }
    }
}

/// Column named by the `hop` at the top of `p`, if any.
pub fn hopped_column(p: &PathNode, reg: &ModuleRegistry) -> Option<String> {
    let name = p.module_name()?;
    let spec = reg.lookup(name).ok()?;
    match (spec.op, p.args().get(1)) {
        (Op::Hop, Some(PathNode::Literal(c))) => Some(c.clone()),
        _ => None,
    }
}

/// The concrete operand lists for every argument after the first.
fn operand_choices(spec: &ModuleSpec, current: &PathNode, root: &Table, reg: &ModuleRegistry) -> Vec<Vec<PathNode>> {
    let cols = |numeric_only: bool| -> Vec<usize> {
        (0..root.num_columns()).filter(|&i| !numeric_only || root.column_type(i) == ColumnType::Numeric).collect()
    };
    let lit = |s: &str| PathNode::literal(s);
    let roles = &spec.roles[1..];
    match roles {
        [] => vec![vec![]],
        [ArgRole::Column] | [ArgRole::IgnoredColumn] => {
            cols(false).into_iter().map(|c| vec![lit(&root.header()[c])]).collect()
        }
        [ArgRole::NumericColumn] => cols(true).into_iter().map(|c| vec![lit(&root.header()[c])]).collect(),
        [col_role @ (ArgRole::Column | ArgRole::NumericColumn), ArgRole::Operand] => {
            let numeric_only = *col_role == ArgRole::NumericColumn;
            let mut out = Vec::new();
            for c in cols(numeric_only) {
                for v in column_operands(root, c) {
                    out.push(vec![lit(&root.header()[c]), lit(&v)]);
                }
            }
            out
        }
        [ArgRole::Text] if spec.op == Op::Eq => {
            let Some(col) = hopped_column(current, reg) else { return Vec::new() };
            let Some(c) = root.column_index(&col) else { return Vec::new() };
            column_operands(root, c).into_iter().map(|v| vec![lit(&v)]).collect()
        }
        _ => Vec::new(),
    }
}

/// Every admissible single-step extension of the state `(current, value)`.
///
/// Ordered by module name, then column index, then operand order.
pub fn enumerate_steps(current: &PathNode, value: &Value, root: &Table, reg: &ModuleRegistry) -> Vec<CandidateStep> {
    let g = GrammarId::TableToText;
    let from = value.data_type();
    let mut modules: Vec<&ModuleSpec> =
        productions(g, from).into_iter().flat_map(|to| plausible_modules(g, from, to, reg)).collect();
    modules.sort_by(|a, b| a.name.cmp(&b.name));
    let mut out = Vec::new();
    for spec in modules {
        for operands in operand_choices(spec, current, root, reg) {
            out.push(CandidateStep { module: spec.clone(), operands, produced_type: spec.output_type });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_table, TableFormat};
    use crate::registry::registry_default;
    use std::sync::Arc;

    fn names(v: &[&ModuleSpec]) -> Vec<String> {
        v.iter().map(|m| m.name.clone()).collect()
    }

    #[test]
    fn table_productions() {
        use DataType::*;
        assert_eq!(productions(GrammarId::TableToText, Table), [Table, Row, Number, Bool].into());
        assert_eq!(productions(GrammarId::TableToText, Row), [String, Number].into());
        assert_eq!(productions(GrammarId::GraphToText, Triple), [String].into());
        assert!(productions(GrammarId::TableToText, Bool).is_empty());
        assert!(productions(GrammarId::GraphToText, Table).is_empty());
    }

    #[test]
    fn plausible_module_sets() {
        let reg = registry_default();
        let g = GrammarId::TableToText;
        assert_eq!(
            names(&plausible_modules(g, DataType::Table, DataType::Number, &reg)),
            ["avg", "count", "max", "min", "sum"]
        );
        assert_eq!(names(&plausible_modules(g, DataType::Table, DataType::Row, &reg)), ["arg_max", "arg_min"]);
        assert!(plausible_modules(g, DataType::Number, DataType::Table, &reg).is_empty());
        assert_eq!(names(&plausible_modules(g, DataType::Row, DataType::String, &reg)), ["hop"]);
        assert_eq!(names(&plausible_modules(g, DataType::String, DataType::Bool, &reg)), ["eq"]);
        // the table->string tuple rule is realized by the neural module only
        assert!(plausible_modules(g, DataType::Table, DataType::String, &reg).is_empty());
        let gg = GrammarId::GraphToText;
        assert_eq!(
            names(&plausible_modules(gg, DataType::Triple, DataType::String, &reg)),
            ["surface_realization_triple"]
        );
        assert_eq!(names(&plausible_modules(gg, DataType::String, DataType::String, &reg)), ["text_fusion"]);
    }

    fn t1938() -> Arc<Table> {
        let json = r#"{"topic":"1938 U.S. Open (golf)","header":["place","player","country","score","to par","money"],"rows":[["1","ralph guldahl","united states","74 + 70 + 71 + 69 = 284","e","1000"],["10","gene sarazen","united states","74 + 74 + 75 + 73 = 296","+ 12","106"]]}"#;
        Arc::new(parse_table(json, TableFormat::Json).unwrap())
    }

    #[test]
    fn steps_from_table() {
        let t = t1938();
        let reg = registry_default();
        let steps = enumerate_steps(&PathNode::AllRows, &Value::Table(Arc::clone(&t)), &t, &reg);
        let rendered: Vec<String> = steps.iter().map(|s| s.graft(&PathNode::AllRows).to_string()).collect();
        assert!(rendered.contains(&"avg { all_rows ; money }".to_string()));
        assert!(!rendered.contains(&"avg { all_rows ; player }".to_string()));
        assert!(rendered.contains(&"filter_greater { all_rows ; money ; 106 }".to_string()));
        assert!(rendered.contains(&"count { all_rows }".to_string()));
        let first_names: Vec<&str> = steps.iter().map(|s| s.module.name.as_str()).collect();
        let mut sorted = first_names.clone();
        sorted.sort();
        assert_eq!(first_names, sorted);
    }

    #[test]
    fn steps_from_row_are_hops() {
        let t = t1938();
        let reg = registry_default();
        let row = crate::registry::exec_arg(crate::registry::Extremum::Min, &t, "money").unwrap();
        let cur = PathNode::apply("arg_min", vec![PathNode::AllRows, PathNode::literal("money")]);
        let steps = enumerate_steps(&cur, &Value::Row(row), &t, &reg);
        assert_eq!(steps.len(), t.num_columns());
        assert!(steps.iter().all(|s| s.module.name == "hop"));
    }

    #[test]
    fn steps_from_string_use_hopped_column() {
        let t = t1938();
        let reg = registry_default();
        let cur = crate::path::parse_path("hop { arg_min { all_rows ; money } ; player }").unwrap();
        let steps = enumerate_steps(&cur, &Value::Str("gene sarazen".into()), &t, &reg);
        let ops: Vec<String> = steps.iter().map(|s| s.operands[0].to_string()).collect();
        assert_eq!(ops, ["gene sarazen", "ralph guldahl"]);
    }

    #[test]
    fn terminal_states_have_no_steps() {
        let t = t1938();
        let reg = registry_default();
        assert!(enumerate_steps(&PathNode::AllRows, &Value::Bool(true), &t, &reg).is_empty());
    }

    #[test]
    fn operands_are_order_free() {
        let a = parse_table("c\nB\nb\na\n", TableFormat::Csv).unwrap();
        let b = parse_table("c\na\nb\nB\n", TableFormat::Csv).unwrap();
        assert_eq!(column_operands(&a, 0), ["a", "B"]);
        assert_eq!(column_operands(&a, 0), column_operands(&b, 0));
        let n = parse_table("n\n10\n9\n10.0\n", TableFormat::Csv).unwrap();
        assert_eq!(column_operands(&n, 0), ["9", "10"]);
    }
}
