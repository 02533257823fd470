//! Tables and triple graphs: parsing, typing and linearization.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};
use crate::number::{normalize_numeric_cell, Number, Numeric};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellValue {
    Text(String),
    Num(Number),
}

impl CellValue {
    pub fn is_empty(&self) -> bool {
        matches!(self, CellValue::Text(s) if s.is_empty())
    }

    pub fn as_number(&self) -> Option<Number> {
        match self {
            CellValue::Num(n) => Some(*n),
            CellValue::Text(_) => None,
        }
    }

    /// Text form: trimmed text, or the canonical rendering of a number.
    pub fn render(&self) -> String {
        match self {
            CellValue::Text(s) => s.clone(),
            CellValue::Num(n) => n.to_string(),
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Text(s) => f.write_str(s),
            CellValue::Num(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Numeric,
    Textual,
}

/// Case-folded, trimmed key used for every string comparison.
pub fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Json,
    Csv,
    Tsv,
}

impl TableFormat {
    pub fn from_extension(path: &str) -> Option<TableFormat> {
        let ext = path.rsplit('.').next()?.to_ascii_lowercase();
        match ext.as_str() {
            "json" => Some(TableFormat::Json),
            "csv" => Some(TableFormat::Csv),
            "tsv" | "tab" => Some(TableFormat::Tsv),
            _ => None,
        }
    }
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(TableFormat::Json),
            "csv" => Ok(TableFormat::Csv),
            "tsv" => Ok(TableFormat::Tsv),
            other => Err(Error::InvalidInput(format!("unknown table format `{other}`"))),
        }
    }
}

/// On-disk record: cells are always strings, typing happens at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    #[serde(default)]
    pub topic: String,
    pub header: Vec<String>,
    #[serde(default)]
    pub rows: Vec<Vec<String>>,
}

/// A typed table. Row order is kept as read but carries no meaning: every
/// operation over a table treats it as a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    topic: String,
    header: Vec<String>,
    rows: Vec<Vec<CellValue>>,
    column_types: Vec<ColumnType>,
}

impl Table {
    /// Build a table from raw string cells, trimming and typing them.
    pub fn from_strings(topic: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Table> {
        let header: Vec<String> = header.into_iter().map(|h| h.trim().to_string()).collect();
        if header.is_empty() {
            return Err(Error::malformed(Location::row(0), "empty header"));
        }
        let mut seen = BTreeSet::new();
        for (i, name) in header.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::malformed(Location::cell(0, i + 1), "empty column name"));
            }
            if !seen.insert(fold(name)) {
                return Err(Error::malformed(Location::cell(0, i + 1), format!("duplicate column name `{name}`")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(Error::malformed(
                    Location::row(i + 1),
                    format!("expected {} cells, found {}", header.len(), row.len()),
                ));
            }
        }
        let raw: Vec<Vec<String>> =
            rows.into_iter().map(|r| r.into_iter().map(|c| c.trim().to_string()).collect()).collect();
        let column_types = infer_column_types_raw(header.len(), &raw);
        let rows = raw
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .zip(&column_types)
                    .map(|(cell, ty)| match ty {
                        ColumnType::Numeric if !cell.is_empty() => match normalize_numeric_cell(&cell) {
                            Numeric::Num(n) => CellValue::Num(n),
                            Numeric::NonNumeric => CellValue::Text(cell),
                        },
                        _ => CellValue::Text(cell),
                    })
                    .collect()
            })
            .collect();
        Ok(Table { topic: topic.trim().to_string(), header, rows, column_types })
    }

    pub fn from_record(record: TableRecord) -> Result<Table> {
        Table::from_strings(&record.topic, record.header, record.rows)
    }

    pub fn to_record(&self) -> TableRecord {
        TableRecord {
            topic: self.topic.clone(),
            header: self.header.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(CellValue::render).collect()).collect(),
        }
    }

    /// Same header and types, different rows. Rows must come from a table
    /// with this schema.
    pub fn with_rows(&self, rows: Vec<Vec<CellValue>>) -> Table {
        Table { topic: self.topic.clone(), header: self.header.clone(), rows, column_types: self.column_types.clone() }
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<CellValue>] {
        &self.rows
    }

    pub fn column_types(&self) -> &[ColumnType] {
        &self.column_types
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.header.len()
    }

    /// Case-insensitive, whitespace-trimmed column lookup.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        let key = fold(name);
        self.header.iter().position(|h| fold(h) == key)
    }

    pub fn column_type(&self, index: usize) -> ColumnType {
        self.column_types[index]
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &CellValue> + '_ {
        self.rows.iter().map(move |r| &r[index])
    }

    /// Rows rendered and sorted: the table's identity as a multiset of rows.
    pub fn row_multiset(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(CellValue::render).collect()).collect();
        rows.sort();
        rows
    }

    /// Header then rows; cells joined by ` # `, records by ` | `.
    pub fn linearize(&self) -> String {
        let mut parts = vec![self.header.join(" # ")];
        parts.extend(self.rows.iter().map(|r| linearize_row(r)));
        parts.join(" | ")
    }

    /// Rows only, in the layout used by the table prompts.
    pub fn linearize_content(&self) -> String {
        self.rows.iter().map(|r| linearize_row(r)).collect::<Vec<_>>().join(" | ")
    }
}

fn linearize_row(row: &[CellValue]) -> String {
    row.iter().map(CellValue::render).collect::<Vec<_>>().join(" # ")
}

/// A row of a table, sharing the table it came from.
#[derive(Debug, Clone)]
pub struct RowRef {
    table: Arc<Table>,
    index: usize,
}

impl RowRef {
    pub fn new(table: Arc<Table>, index: usize) -> Self {
        assert!(index < table.num_rows(), "row index out of range");
        RowRef { table, index }
    }

    pub fn table(&self) -> &Arc<Table> {
        &self.table
    }

    pub fn cells(&self) -> &[CellValue] {
        &self.table.rows()[self.index]
    }

    pub fn cell(&self, column: &str) -> Option<&CellValue> {
        self.table.column_index(column).map(|i| &self.cells()[i])
    }
}

impl PartialEq for RowRef {
    /// Rows compare by content.
    fn eq(&self, other: &Self) -> bool {
        self.cells() == other.cells()
    }
}

/// Parse a table in one of the supported on-disk formats.
pub fn parse_table(text: &str, format: TableFormat) -> Result<Table> {
    match format {
        TableFormat::Json => {
            let record: TableRecord =
                serde_json::from_str(text).map_err(|e| Error::malformed(Location::default(), e.to_string()))?;
            Table::from_record(record)
        }
        TableFormat::Csv => parse_delimited(text, b','),
        TableFormat::Tsv => parse_delimited(text, b'\t'),
    }
}

fn parse_delimited(text: &str, delimiter: u8) -> Result<Table> {
    let mut reader =
        csv::ReaderBuilder::new().delimiter(delimiter).has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        Some(rec) => {
            rec.map_err(|e| Error::malformed(Location::row(0), e.to_string()))?.iter().map(str::to_string).collect()
        }
        None => return Err(Error::malformed(Location::row(0), "empty header")),
    };
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(|e| Error::malformed(Location::row(i + 1), e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Table::from_strings("", header, rows)
}

/// Column typing over the cells of a parsed table.
pub fn infer_column_types(t: &Table) -> Vec<ColumnType> {
    let raw: Vec<Vec<String>> = t.rows().iter().map(|r| r.iter().map(CellValue::render).collect()).collect();
    infer_column_types_raw(t.num_columns(), &raw)
}

/// Numeric iff at least one cell is non-empty and every non-empty cell
/// normalizes to a number.
pub fn infer_column_type<'a>(cells: impl IntoIterator<Item = &'a str>) -> ColumnType {
    let mut any = false;
    for cell in cells {
        let cell = cell.trim();
        if cell.is_empty() {
            continue;
        }
        any = true;
        if normalize_numeric_cell(cell) == Numeric::NonNumeric {
            return ColumnType::Textual;
        }
    }
    if any {
        ColumnType::Numeric
    } else {
        ColumnType::Textual
    }
}

fn infer_column_types_raw(width: usize, rows: &[Vec<String>]) -> Vec<ColumnType> {
    (0..width).map(|c| infer_column_type(rows.iter().map(|r| r[c].as_str()))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: &str, relation: &str, object: &str) -> Result<Triple> {
        let (s, r, o) = (subject.trim(), relation.trim(), object.trim());
        if s.is_empty() || r.is_empty() || o.is_empty() {
            return Err(Error::InvalidInput(format!("triple fields must be non-empty: `{s} | {r} | {o}`")));
        }
        Ok(Triple { subject: s.to_string(), relation: r.to_string(), object: o.to_string() })
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | {} | {}", self.subject, self.relation, self.object)
    }
}

/// A set of triples. Iteration order is the sorted order of the triples, so
/// nothing downstream can observe the order they were written in.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    triples: BTreeSet<Triple>,
}

impl Graph {
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Graph {
        Graph { triples: triples.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }
}

/// Parse triples separated by ` # ` or line breaks, with fields separated by
/// ` | `.
pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut triples = BTreeSet::new();
    for (i, segment) in text.split(['#', '\n']).enumerate() {
        if segment.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = segment.split('|').collect();
        if fields.len() != 3 {
            return Err(Error::malformed(
                Location::row(i + 1),
                format!("triple needs 3 fields, found {}: `{}`", fields.len(), segment.trim()),
            ));
        }
        let triple = Triple::new(fields[0], fields[1], fields[2])
            .map_err(|e| Error::malformed(Location::row(i + 1), e.to_string()))?;
        triples.insert(triple);
    }
    Ok(Graph { triples })
}

pub fn serialize_graph(g: &Graph) -> String {
    g.triples().map(Triple::to_string).collect::<Vec<_>>().join(" # ")
}
