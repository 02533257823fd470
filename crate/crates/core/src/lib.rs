//! Step-wise data-to-text generation over typed reasoning paths.
//!
//! Tables and triple graphs are parsed into typed values ([`data`]). Symbolic
//! modules from the [`registry`] compose into reasoning paths ([`path`]),
//! whose next steps are constrained by datatype [`grammar`]s and ranked by
//! [`scoring`] functions during [`search`]. Neural modules are served by the
//! language-model gateway in [`llm`].

pub mod bleu;
pub mod data;
pub mod error;
pub mod grammar;
pub mod http;
pub mod llm;
pub mod number;
pub mod path;
pub mod registry;
pub mod scoring;
pub mod search;

pub use data::{
    parse_graph, parse_table, serialize_graph, CellValue, ColumnType, Graph, RowRef, Table, TableFormat, Triple,
};
pub use error::{Error, ErrorRecord, Location, Result};
pub use number::{normalize_numeric_cell, Number, Numeric};
pub use path::{parse_path, serialize_path, typecheck_path, DataType, PathNode};
pub use registry::{evaluate_path, evaluate_traced, registry_default, ModuleKind, ModuleRegistry, ModuleSpec, Value};
