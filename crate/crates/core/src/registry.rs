//! The module catalog and the symbolic evaluator.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::data::{fold, CellValue, ColumnType, RowRef, Table};
use crate::error::{Error, Result};
use crate::number::{normalize_numeric_cell, Number};
use crate::path::{serialize_path, DataType, PathNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleKind {
    Symbolic,
    Neural,
}

/// What an argument position means beyond its datatype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArgRole {
    /// The value flowing in from the previous step.
    Input,
    /// A column name, any type.
    Column,
    /// A column name that must be numeric.
    NumericColumn,
    /// A column name the module ignores (`filter_all`).
    IgnoredColumn,
    /// A value compared against a column's cells.
    Operand,
    /// A free string (`eq`'s right-hand side, neural text inputs).
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    NotEq,
    Greater,
    GreaterEq,
    Less,
    LessEq,
}

impl Relation {
    pub fn is_comparison(self) -> bool {
        !matches!(self, Relation::Eq | Relation::NotEq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregate {
    Max,
    Min,
    Avg,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Extremum {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Filter(Relation),
    FilterAll,
    Arg(Extremum),
    Aggregate(Aggregate),
    Count,
    All(Relation),
    Most(Relation),
    Only,
    Hop,
    Eq,
    SurfaceRealizeTriple,
    TextFusion,
    SurfaceRealizePath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSpec {
    pub name: String,
    pub kind: ModuleKind,
    pub input_types: Vec<DataType>,
    pub output_type: DataType,
    pub description: String,
    pub roles: Vec<ArgRole>,
    pub op: Op,
}

impl ModuleSpec {
    pub fn arity(&self) -> usize {
        self.input_types.len()
    }

    /// Same input and output datatypes.
    pub fn same_signature(&self, other: &ModuleSpec) -> bool {
        self.input_types == other.input_types && self.output_type == other.output_type
    }
}

#[derive(Debug, Clone)]
pub struct ModuleRegistry {
    modules: Vec<ModuleSpec>,
    index: BTreeMap<String, usize>,
    aliases: BTreeMap<String, String>,
}

impl Default for ModuleRegistry {
    fn default() -> Self {
        registry_default()
    }
}

impl ModuleRegistry {
    pub fn new(modules: Vec<ModuleSpec>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, m) in modules.iter().enumerate() {
            if index.insert(m.name.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate module `{}`", m.name)));
            }
        }
        Ok(ModuleRegistry { modules, index, aliases: BTreeMap::new() })
    }

    pub fn with_alias(mut self, alias: &str, target: &str) -> Self {
        self.aliases.insert(alias.to_string(), target.to_string());
        self
    }

    pub fn lookup(&self, name: &str) -> Result<&ModuleSpec> {
        let canonical = self.aliases.get(name).map(String::as_str).unwrap_or(name);
        self.index.get(canonical).map(|&i| &self.modules[i]).ok_or_else(|| Error::UnknownModule(name.to_string()))
    }

    /// Alternate spelling for a canonical module name, if there is one.
    pub fn alias_for(&self, canonical: &str) -> Option<&str> {
        self.aliases.iter().find(|(_, t)| t.as_str() == canonical).map(|(a, _)| a.as_str())
    }

    pub fn is_alias(&self, name: &str) -> bool {
        self.aliases.contains_key(name)
    }

    /// Modules in catalog order.
    pub fn modules(&self) -> &[ModuleSpec] {
        &self.modules
    }

    pub fn symbolic(&self) -> impl Iterator<Item = &ModuleSpec> {
        self.modules.iter().filter(|m| m.kind == ModuleKind::Symbolic)
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }
}

fn spec(
    name: &str,
    kind: ModuleKind,
    ins: &[(DataType, ArgRole)],
    out: DataType,
    op: Op,
    description: &str,
) -> ModuleSpec {
    ModuleSpec {
        name: name.to_string(),
        kind,
        input_types: ins.iter().map(|(t, _)| *t).collect(),
        output_type: out,
        description: description.to_string(),
        roles: ins.iter().map(|(_, r)| *r).collect(),
        op,
    }
}

/// The table-reasoning catalog (29 symbolic modules) plus the three neural
/// modules backed by the language-model gateway.
pub fn registry_default() -> ModuleRegistry {
    use ArgRole::*;
    use DataType as D;
    use ModuleKind::*;

    let table = (D::Table, Input);
    let col = (D::String, Column);
    let num_col = (D::String, NumericColumn);
    let text_val = (D::String, Operand);
    let num_val = (D::Number, Operand);

    let mut m = Vec::new();
    let filter_desc =
        "Returns a table with the rows where entry in the input column is equal or not equal to the input value.";
    m.push(spec("filter_eq", Symbolic, &[table, col, text_val], D::Table, Op::Filter(Relation::Eq), filter_desc));
    m.push(spec(
        "filter_not_eq",
        Symbolic,
        &[table, col, text_val],
        D::Table,
        Op::Filter(Relation::NotEq),
        filter_desc,
    ));
    let cmp_desc = "Returns a table with the rows where a numerical column is greater than or less than (or equal to) the input number.";
    for (name, rel) in [
        ("filter_greater", Relation::Greater),
        ("filter_greater_eq", Relation::GreaterEq),
        ("filter_lesser", Relation::Less),
        ("filter_lesser_eq", Relation::LessEq),
    ] {
        m.push(spec(name, Symbolic, &[table, num_col, num_val], D::Table, Op::Filter(rel), cmp_desc));
    }
    m.push(spec(
        "filter_all",
        Symbolic,
        &[table, (D::String, IgnoredColumn)],
        D::Table,
        Op::FilterAll,
        "Returns the whole table.",
    ));
    let arg_desc = "Returns the row with the maximum or minimum value for the input column.";
    m.push(spec("arg_max", Symbolic, &[table, num_col], D::Row, Op::Arg(Extremum::Max), arg_desc));
    m.push(spec("arg_min", Symbolic, &[table, num_col], D::Row, Op::Arg(Extremum::Min), arg_desc));
    let agg_desc = "Returns the maximum, minimum, average or sum of numbers in the input column.";
    for (name, agg) in
        [("max", Aggregate::Max), ("min", Aggregate::Min), ("avg", Aggregate::Avg), ("sum", Aggregate::Sum)]
    {
        m.push(spec(name, Symbolic, &[table, num_col], D::Number, Op::Aggregate(agg), agg_desc));
    }
    m.push(spec("count", Symbolic, &[table], D::Number, Op::Count, "Returns the number of rows in the table."));
    let all_desc = "Returns whether all entries in the input column satisfy the relation with the input value.";
    m.push(spec("all_eq", Symbolic, &[table, col, text_val], D::Bool, Op::All(Relation::Eq), all_desc));
    m.push(spec("all_not_eq", Symbolic, &[table, col, text_val], D::Bool, Op::All(Relation::NotEq), all_desc));
    for (name, rel) in [
        ("all_greater", Relation::Greater),
        ("all_less", Relation::Less),
        ("all_greater_eq", Relation::GreaterEq),
        ("all_less_eq", Relation::LessEq),
    ] {
        m.push(spec(name, Symbolic, &[table, num_col, num_val], D::Bool, Op::All(rel), all_desc));
    }
    let most_desc = "Returns whether most entries in the input column satisfy the relation with the input value.";
    m.push(spec("most_eq", Symbolic, &[table, col, text_val], D::Bool, Op::Most(Relation::Eq), most_desc));
    m.push(spec("most_not_eq", Symbolic, &[table, col, text_val], D::Bool, Op::Most(Relation::NotEq), most_desc));
    for (name, rel) in [
        ("most_greater", Relation::Greater),
        ("most_less", Relation::Less),
        ("most_greater_eq", Relation::GreaterEq),
        ("most_less_eq", Relation::LessEq),
    ] {
        m.push(spec(name, Symbolic, &[table, num_col, num_val], D::Bool, Op::Most(rel), most_desc));
    }
    m.push(spec("only", Symbolic, &[table], D::Bool, Op::Only, "Returns whether the table has exactly one row."));
    m.push(spec(
        "hop",
        Symbolic,
        &[(D::Row, Input), col],
        D::String,
        Op::Hop,
        "Returns the entry corresponding to the input column in the row.",
    ));
    m.push(spec(
        "eq",
        Symbolic,
        &[(D::String, Input), (D::String, Text)],
        D::Bool,
        Op::Eq,
        "Returns whether the two inputs are equal or not.",
    ));

    m.push(spec(
        "surface_realization_triple",
        Neural,
        &[(D::Triple, Input)],
        D::String,
        Op::SurfaceRealizeTriple,
        "Converts a triple into a short sentence.",
    ));
    m.push(spec(
        "text_fusion",
        Neural,
        &[(D::String, Input), (D::String, Text)],
        D::String,
        Op::TextFusion,
        "Combines two pieces of text into one.",
    ));
    m.push(spec(
        "surface_realization_path",
        Neural,
        &[table, (D::Path, Input)],
        D::String,
        Op::SurfaceRealizePath,
        "Converts a table and a reasoning path into a summary.",
    ));

    ModuleRegistry::new(m)
        .expect("module names are unique")
        .with_alias("argmax", "arg_max")
        .with_alias("argmin", "arg_min")
}

/// A runtime value; the variant always matches the path's checked type.
#[derive(Debug, Clone)]
pub enum Value {
    Table(Arc<Table>),
    Row(RowRef),
    Num(Number),
    Str(String),
    Bool(bool),
}

impl Value {
    pub fn data_type(&self) -> DataType {
        match self {
            Value::Table(_) => DataType::Table,
            Value::Row(_) => DataType::Row,
            Value::Num(_) => DataType::Number,
            Value::Str(_) => DataType::String,
            Value::Bool(_) => DataType::Bool,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_table(&self) -> Option<&Arc<Table>> {
        match self {
            Value::Table(t) => Some(t),
            _ => None,
        }
    }

    /// One-line description, used in execution traces.
    pub fn summary(&self) -> String {
        match self {
            Value::Table(t) => format!("table({} rows)", t.num_rows()),
            Value::Row(r) => {
                format!("row({})", r.cells().iter().map(CellValue::render).collect::<Vec<_>>().join(" # "))
            }
            other => other.to_string(),
        }
    }
}

impl PartialEq for Value {
    /// Tables compare as row multisets, rows by content.
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Table(a), Value::Table(b)) => a.header() == b.header() && a.row_multiset() == b.row_multiset(),
            (Value::Row(a), Value::Row(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Table(t) => f.write_str(&t.linearize()),
            Value::Row(r) => f.write_str(&r.cells().iter().map(CellValue::render).collect::<Vec<_>>().join(" # ")),
            Value::Num(n) => write!(f, "{n}"),
            Value::Str(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

fn resolve_column(t: &Table, col: &str) -> Result<usize> {
    t.column_index(col).ok_or_else(|| Error::UnknownColumn(col.to_string()))
}

fn resolve_numeric_column(t: &Table, col: &str) -> Result<usize> {
    let idx = resolve_column(t, col)?;
    if t.column_type(idx) != ColumnType::Numeric {
        return Err(Error::NonNumericColumn(t.header()[idx].clone()));
    }
    Ok(idx)
}

fn operand_number(operand: &CellValue) -> Result<Number> {
    match operand {
        CellValue::Num(n) => Ok(*n),
        CellValue::Text(s) => {
            normalize_numeric_cell(s).number().ok_or_else(|| Error::InvalidInput(format!("`{s}` is not a number")))
        }
    }
}

/// Cell equality: numeric for numeric columns, case-folded text otherwise.
fn cell_equals(cell: &CellValue, ty: ColumnType, operand: &CellValue) -> bool {
    match (ty, cell) {
        (ColumnType::Numeric, CellValue::Num(n)) => match operand {
            CellValue::Num(o) => n == o,
            CellValue::Text(s) => normalize_numeric_cell(s).number() == Some(*n),
        },
        _ => fold(&cell.render()) == fold(&operand.render()),
    }
}

/// Whether a non-empty cell satisfies `rel` against the operand. Comparison
/// relations expect the column and operand to be numeric already.
fn satisfies(cell: &CellValue, ty: ColumnType, rel: Relation, operand: &CellValue, num: Option<Number>) -> bool {
    match rel {
        Relation::Eq => cell_equals(cell, ty, operand),
        Relation::NotEq => !cell_equals(cell, ty, operand),
        _ => {
            let (Some(c), Some(o)) = (cell.as_number(), num) else {
                return false;
            };
            match rel {
                Relation::Greater => c > o,
                Relation::GreaterEq => c >= o,
                Relation::Less => c < o,
                Relation::LessEq => c <= o,
                Relation::Eq | Relation::NotEq => unreachable!(),
            }
        }
    }
}

/// Column index and (for comparisons) the numeric operand.
fn prepare(t: &Table, rel: Relation, col: &str, operand: &CellValue) -> Result<(usize, Option<Number>)> {
    if rel.is_comparison() {
        let idx = resolve_numeric_column(t, col)?;
        Ok((idx, Some(operand_number(operand)?)))
    } else {
        Ok((resolve_column(t, col)?, None))
    }
}

/// `filter_*`: `None` is `filter_all`, which ignores `col`.
pub fn exec_filter(rel: Option<Relation>, t: &Table, col: &str, operand: &CellValue) -> Result<Table> {
    let Some(rel) = rel else {
        return Ok(t.clone());
    };
    let (idx, num) = prepare(t, rel, col, operand)?;
    let ty = t.column_type(idx);
    let rows = t
        .rows()
        .iter()
        .filter(|row| {
            let cell = &row[idx];
            if cell.is_empty() {
                // Missing values only ever land in the complement.
                rel == Relation::NotEq
            } else {
                satisfies(cell, ty, rel, operand, num)
            }
        })
        .cloned()
        .collect();
    Ok(t.with_rows(rows))
}

/// Index of the extremal row. Ties go to the row whose content sorts first,
/// so the choice does not depend on row order.
fn extremal_row(t: &Table, idx: usize, which: Extremum) -> Option<usize> {
    let mut best: Option<(Number, usize)> = None;
    for (i, row) in t.rows().iter().enumerate() {
        let Some(n) = row[idx].as_number() else { continue };
        best = match best {
            None => Some((n, i)),
            Some((b, j)) => {
                let better = match which {
                    Extremum::Max => n > b,
                    Extremum::Min => n < b,
                };
                if better || (n == b && t.rows()[i] < t.rows()[j]) {
                    Some((n, i))
                } else {
                    Some((b, j))
                }
            }
        };
    }
    best.map(|(_, i)| i)
}

pub fn exec_arg(which: Extremum, t: &Arc<Table>, col: &str) -> Result<RowRef> {
    let idx = resolve_numeric_column(t, col)?;
    let name = match which {
        Extremum::Max => "arg_max",
        Extremum::Min => "arg_min",
    };
    extremal_row(t, idx, which)
        .map(|i| RowRef::new(Arc::clone(t), i))
        .ok_or_else(|| Error::EmptyTable(name.to_string()))
}

pub fn exec_aggregate(agg: Aggregate, t: &Table, col: &str) -> Result<Number> {
    let idx = resolve_numeric_column(t, col)?;
    let values: Vec<Number> = t.column(idx).filter_map(CellValue::as_number).collect();
    let name = match agg {
        Aggregate::Max => "max",
        Aggregate::Min => "min",
        Aggregate::Avg => "avg",
        Aggregate::Sum => "sum",
    };
    if values.is_empty() {
        return Err(Error::EmptyTable(name.to_string()));
    }
    Ok(match agg {
        Aggregate::Max => *values.iter().max().unwrap(),
        Aggregate::Min => *values.iter().min().unwrap(),
        Aggregate::Sum => values.into_iter().sum(),
        Aggregate::Avg => {
            let n = Number::from_i64(values.len() as i64);
            let total: Number = values.into_iter().sum();
            total.checked_div(n).expect("non-zero count")
        }
    })
}

pub fn exec_count(t: &Table) -> Number {
    Number::from_i64(t.num_rows() as i64)
}

/// `all_*` looks at non-empty cells only; `most_*` needs strictly more than
/// half of all rows to satisfy the relation.
pub fn exec_boolean(quantifier: Quantifier, rel: Relation, t: &Table, col: &str, operand: &CellValue) -> Result<bool> {
    let (idx, num) = prepare(t, rel, col, operand)?;
    let ty = t.column_type(idx);
    let name = quantifier.module_name(rel);
    match quantifier {
        Quantifier::All => {
            let mut cells = t.column(idx).filter(|c| !c.is_empty()).peekable();
            if cells.peek().is_none() {
                return Err(Error::EmptyTable(name));
            }
            Ok(cells.all(|c| satisfies(c, ty, rel, operand, num)))
        }
        Quantifier::Most => {
            if t.num_rows() == 0 {
                return Err(Error::EmptyTable(name));
            }
            let hits = t.column(idx).filter(|c| !c.is_empty() && satisfies(c, ty, rel, operand, num)).count();
            Ok(2 * hits > t.num_rows())
        }
    }
}

pub fn exec_only(t: &Table) -> bool {
    t.num_rows() == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    All,
    Most,
}

impl Quantifier {
    fn module_name(self, rel: Relation) -> String {
        let q = match self {
            Quantifier::All => "all",
            Quantifier::Most => "most",
        };
        let r = match rel {
            Relation::Eq => "eq",
            Relation::NotEq => "not_eq",
            Relation::Greater => "greater",
            Relation::GreaterEq => "greater_eq",
            Relation::Less => "less",
            Relation::LessEq => "less_eq",
        };
        format!("{q}_{r}")
    }
}

pub fn exec_hop(r: &RowRef, col: &str) -> Result<String> {
    r.cell(col).map(CellValue::render).ok_or_else(|| Error::UnknownColumn(col.to_string()))
}

/// Numeric equality (relative tolerance 1e-9) when both sides are numbers,
/// case-insensitive trimmed text equality otherwise.
pub fn exec_eq(a: &str, b: &str) -> bool {
    match (normalize_numeric_cell(a).number(), normalize_numeric_cell(b).number()) {
        (Some(x), Some(y)) => x.approx_eq(&y, 1e-9),
        _ => fold(a) == fold(b),
    }
}

/// Apply one symbolic module to already-evaluated arguments.
pub fn apply_module(spec: &ModuleSpec, args: &[Value]) -> Result<Value> {
    if args.len() != spec.arity() {
        return Err(Error::ArityMismatch { module: spec.name.clone(), expected: spec.arity(), found: args.len() });
    }
    for (i, (arg, &expected)) in args.iter().zip(&spec.input_types).enumerate() {
        if arg.data_type() != expected {
            return Err(Error::TypeMismatch {
                module: spec.name.clone(),
                position: i + 1,
                expected,
                found: arg.data_type(),
            });
        }
    }
    let table = || match &args[0] {
        Value::Table(t) => t,
        _ => unreachable!("checked above"),
    };
    let text = |i: usize| match &args[i] {
        Value::Str(s) => s.as_str(),
        _ => unreachable!("checked above"),
    };
    let operand = |i: usize| match &args[i] {
        Value::Num(n) => CellValue::Num(*n),
        Value::Str(s) => CellValue::Text(s.clone()),
        _ => unreachable!("checked above"),
    };
    Ok(match spec.op {
        Op::Filter(rel) => Value::Table(Arc::new(exec_filter(Some(rel), table(), text(1), &operand(2))?)),
        Op::FilterAll => Value::Table(Arc::clone(table())),
        Op::Arg(which) => Value::Row(exec_arg(which, table(), text(1))?),
        Op::Aggregate(agg) => Value::Num(exec_aggregate(agg, table(), text(1))?),
        Op::Count => Value::Num(exec_count(table())),
        Op::All(rel) => Value::Bool(exec_boolean(Quantifier::All, rel, table(), text(1), &operand(2))?),
        Op::Most(rel) => Value::Bool(exec_boolean(Quantifier::Most, rel, table(), text(1), &operand(2))?),
        Op::Only => Value::Bool(exec_only(table())),
        Op::Hop => match &args[0] {
            Value::Row(r) => Value::Str(exec_hop(r, text(1))?),
            _ => unreachable!("checked above"),
        },
        Op::Eq => Value::Bool(exec_eq(text(0), text(1))),
        Op::SurfaceRealizeTriple | Op::TextFusion | Op::SurfaceRealizePath => {
            return Err(Error::NotExecutable(spec.name.clone()))
        }
    })
}

/// A literal argument's value at a position of the given type.
pub fn literal_value(text: &str, expected: DataType) -> Result<Value> {
    match expected {
        DataType::Number => normalize_numeric_cell(text)
            .number()
            .map(Value::Num)
            .ok_or_else(|| Error::InvalidInput(format!("`{text}` is not a number"))),
        _ => Ok(Value::Str(text.to_string())),
    }
}

/// One executed step of a path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub module: String,
    pub inputs: Vec<String>,
    pub output: String,
}

/// Evaluate `p` bottom-up against the input table.
pub fn evaluate_path(t: &Arc<Table>, p: &PathNode, reg: &ModuleRegistry) -> Result<Value> {
    eval(t, p, reg, None, DataType::Table)
}

/// Like [`evaluate_path`], also returning the executed steps in order.
pub fn evaluate_traced(t: &Arc<Table>, p: &PathNode, reg: &ModuleRegistry) -> Result<(Value, Vec<TraceStep>)> {
    let mut trace = Vec::new();
    let v = eval(t, p, reg, Some(&mut trace), DataType::Table)?;
    Ok((v, trace))
}

fn eval(
    t: &Arc<Table>,
    p: &PathNode,
    reg: &ModuleRegistry,
    mut trace: Option<&mut Vec<TraceStep>>,
    expected: DataType,
) -> Result<Value> {
    match p {
        PathNode::AllRows => Ok(Value::Table(Arc::clone(t))),
        PathNode::Literal(text) => literal_value(text, expected),
        PathNode::Apply { module, args } => {
            let wrap = |e: Error| match e {
                e @ Error::Evaluation { .. } => e,
                e => Error::Evaluation { path: serialize_path(p), source: Box::new(e) },
            };
            let spec = reg.lookup(module).map_err(wrap)?;
            if args.len() != spec.arity() {
                return Err(wrap(Error::ArityMismatch {
                    module: module.clone(),
                    expected: spec.arity(),
                    found: args.len(),
                }));
            }
            let mut values = Vec::with_capacity(args.len());
            for (arg, &ty) in args.iter().zip(&spec.input_types) {
                values.push(eval(t, arg, reg, trace.as_deref_mut(), ty).map_err(wrap)?);
            }
            let out = apply_module(spec, &values).map_err(wrap)?;
            if let Some(trace) = trace {
                trace.push(TraceStep {
                    module: spec.name.clone(),
                    inputs: values.iter().map(Value::summary).collect(),
                    output: out.summary(),
                });
            }
            Ok(out)
        }
    }
}
