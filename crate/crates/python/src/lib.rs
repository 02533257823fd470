//! Python bindings: tables, path evaluation, search, graph summarization with
//! the mock backend, prompt rendering and BLEU.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

use stepwise_core::bleu;
use stepwise_core::llm::{render_prompt as render, DemoSet, Gateway, Slots, TemplateId};
use stepwise_core::scoring::{EnsembleConfig, HeuristicSaliency, OverlapEntailment};
use stepwise_core::search::{
    best_first_search_table, enumerate_all_paths, greedy_fuse_graph, FusionStep, SearchConfig,
};
use stepwise_core::{
    evaluate_path, parse_graph, parse_path, parse_table, registry_default, serialize_path, typecheck_path, CellValue,
    Error, Table, TableFormat, Value,
};

create_exception!(stepwise, StepwiseError, PyException);

fn err(e: Error) -> PyErr {
    StepwiseError::new_err(format!("{}: {e}", e.kind()))
}

/// A typed table; immutable once built.
#[pyclass(name = "Table", module = "stepwise", frozen)]
struct PyTable {
    inner: Arc<Table>,
}

#[pymethods]
impl PyTable {
    /// Parse table text in `csv`, `tsv` or `json` format.
    #[staticmethod]
    #[pyo3(signature = (text, format = "csv"))]
    fn parse(text: &str, format: &str) -> PyResult<Self> {
        let format: TableFormat = format.parse().map_err(err)?;
        Ok(PyTable { inner: Arc::new(parse_table(text, format).map_err(err)?) })
    }

    #[getter]
    fn topic(&self) -> &str {
        self.inner.topic()
    }

    #[getter]
    fn header(&self) -> Vec<String> {
        self.inner.header().to_vec()
    }

    /// Rows as rendered cell strings.
    #[getter]
    fn rows(&self) -> Vec<Vec<String>> {
        self.inner.rows().iter().map(|r| r.iter().map(CellValue::render).collect()).collect()
    }

    #[getter]
    fn column_types(&self) -> Vec<String> {
        self.inner.column_types().iter().map(|t| format!("{t:?}").to_lowercase()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.num_rows()
    }

    fn linearize(&self) -> String {
        self.inner.linearize()
    }

    fn __repr__(&self) -> String {
        format!("Table({} rows x {} columns)", self.inner.num_rows(), self.inner.num_columns())
    }
}

fn to_python(py: Python<'_>, v: Value) -> PyResult<Py<PyAny>> {
    match v {
        Value::Table(t) => PyTable { inner: t }.into_py_any(py),
        Value::Row(r) => r.cells().iter().map(CellValue::render).collect::<Vec<_>>().into_py_any(py),
        Value::Num(n) => n.to_f64().into_py_any(py),
        Value::Str(s) => s.into_py_any(py),
        Value::Bool(b) => b.into_py_any(py),
    }
}

/// Canonical text of a path.
#[pyfunction]
fn canonical_path(path: &str) -> PyResult<String> {
    Ok(serialize_path(&parse_path(path).map_err(err)?))
}

/// Output datatype of `path` on `table`.
#[pyfunction]
fn typecheck(table: &PyTable, path: &str) -> PyResult<String> {
    let p = parse_path(path).map_err(err)?;
    Ok(typecheck_path(&p, &registry_default(), &table.inner).map_err(err)?.to_string())
}

/// Evaluate `path` on `table`. Numbers come back as floats, rows as lists
/// of cell strings and tables as `Table`.
#[pyfunction]
fn evaluate(py: Python<'_>, table: &PyTable, path: &str) -> PyResult<Py<PyAny>> {
    let reg = registry_default();
    let p = parse_path(path).map_err(err)?;
    typecheck_path(&p, &reg, &table.inner).map_err(err)?;
    to_python(py, evaluate_path(&table.inner, &p, &reg).map_err(err)?)
}

/// Best-first search with the heuristic saliency scorer; returns
/// `(path, score)` pairs, best first.
#[pyfunction]
#[pyo3(signature = (table, beam_size = 20, num_paths = 1, max_depth = 5))]
fn search(table: &PyTable, beam_size: usize, num_paths: usize, max_depth: usize) -> PyResult<Vec<(String, f64)>> {
    let cfg = SearchConfig::new(beam_size, num_paths, max_depth).map_err(err)?;
    let out =
        best_first_search_table(&table.inner, &cfg, &registry_default(), &HeuristicSaliency::default()).map_err(err)?;
    Ok(out.paths.iter().map(|p| (serialize_path(&p.path), p.score)).collect())
}

/// Every true path up to `max_depth` steps (small tables only).
#[pyfunction]
#[pyo3(signature = (table, max_depth = 2))]
fn enumerate_paths(table: &PyTable, max_depth: usize) -> PyResult<Vec<String>> {
    let paths = enumerate_all_paths(&table.inner, max_depth, &registry_default()).map_err(err)?;
    Ok(paths.iter().map(serialize_path).collect())
}

/// Verbalize a path with the offline mock backend.
#[pyfunction]
fn realize_path(table: &PyTable, path: &str) -> PyResult<String> {
    let p = parse_path(path).map_err(err)?;
    Gateway::mock().surface_realize_path(&table.inner, &p).map_err(err)
}

/// Summarize a triple graph (` # `- or newline-separated `s | r | o`) with
/// the mock backend. Returns `{"text", "trace", "calls"}`.
#[pyfunction]
#[pyo3(signature = (graph, alpha = 0.05))]
fn summarize_graph<'py>(py: Python<'py>, graph: &str, alpha: f64) -> PyResult<Bound<'py, PyDict>> {
    let g = parse_graph(graph).map_err(err)?;
    let cfg = EnsembleConfig::new(alpha).map_err(err)?;
    let gw = Gateway::mock();
    let out = greedy_fuse_graph(&g, &gw, &OverlapEntailment, &cfg).map_err(err)?;
    let trace = PyList::empty(py);
    for step in &out.trace {
        let d = PyDict::new(py);
        match step {
            FusionStep::SurfaceRealization { triple, output } => {
                d.set_item("kind", "surface_realization")?;
                d.set_item("triple", triple)?;
                d.set_item("output", output)?;
            }
            FusionStep::Fusion { first, second, output, score } => {
                d.set_item("kind", "fusion")?;
                d.set_item("first", first)?;
                d.set_item("second", second)?;
                d.set_item("output", output)?;
                d.set_item("score", score)?;
            }
        }
        trace.append(d)?;
    }
    let calls = PyDict::new(py);
    for (id, n) in gw.call_counts() {
        calls.set_item(id.as_str(), n)?;
    }
    let result = PyDict::new(py);
    result.set_item("text", out.text)?;
    result.set_item("trace", trace)?;
    result.set_item("calls", calls)?;
    Ok(result)
}

/// Render a prompt template with the built-in demonstrations.
#[pyfunction]
fn render_prompt(template: &str, slots: Slots) -> PyResult<String> {
    let id: TemplateId = template.parse().map_err(err)?;
    render(id, &slots, &DemoSet::builtin()).map_err(err)
}

/// Corpus BLEU-n; `refs[i]` holds the references of `hyps[i]`.
#[pyfunction]
#[pyo3(signature = (hyps, refs, n = 3))]
fn bleu_n(hyps: Vec<String>, refs: Vec<Vec<String>>, n: usize) -> PyResult<f64> {
    bleu::bleu_n(&hyps, &refs, n).map_err(err)
}

#[pymodule]
fn stepwise(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("StepwiseError", m.py().get_type::<StepwiseError>())?;
    m.add_class::<PyTable>()?;
    m.add_function(wrap_pyfunction!(canonical_path, m)?)?;
    m.add_function(wrap_pyfunction!(typecheck, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_paths, m)?)?;
    m.add_function(wrap_pyfunction!(realize_path, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_graph, m)?)?;
    m.add_function(wrap_pyfunction!(render_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(bleu_n, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_evaluates_the_fixture_path() {
        Python::initialize();
        Python::attach(|py| {
            let m = PyModule::new(py, "stepwise").unwrap();
            stepwise(&m).unwrap();
            let table = m.getattr("Table").unwrap().call_method1("parse", ("name,pts\nann,3\nbo,5\n",)).unwrap();
            let v = m.getattr("evaluate").unwrap().call1((&table, "all_greater_eq { all_rows ; pts ; 3 }")).unwrap();
            assert!(v.extract::<bool>().unwrap());
            let e = m.getattr("evaluate").unwrap().call1((&table, "nope { all_rows }")).unwrap_err();
            assert!(e.is_instance_of::<StepwiseError>(py));
        });
    }
}
