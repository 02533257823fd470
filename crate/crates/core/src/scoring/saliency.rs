use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{fold, Table};
use crate::error::Result;
use crate::http::{env_url, JsonClient};
use crate::path::{serialize_path, PathNode};
use crate::registry::{evaluate_path, ArgRole, ModuleRegistry, Op};

use super::probability;

/// A partial path asked about in the context of its input table.
#[derive(Debug, Clone, Copy)]
pub struct SaliencyQuery<'a> {
    pub table: &'a Arc<Table>,
    pub partial_path: &'a PathNode,
}

/// Probability that a partial path is a correct continuation, in [0, 1].
pub trait SaliencyScorer {
    fn score(&self, q: SaliencyQuery<'_>) -> Result<f64>;
}

/// Dataset-free saliency:
/// `0.5 * narrowing + 0.3 * diversity + 0.2 * depth_bonus`.
#[derive(Debug, Clone, Default)]
pub struct HeuristicSaliency {
    registry: ModuleRegistry,
}

impl HeuristicSaliency {
    pub fn new(registry: ModuleRegistry) -> Self {
        HeuristicSaliency { registry }
    }

    /// The filter application nearest the root, following table inputs.
    fn outermost_filter<'p>(&self, p: &'p PathNode) -> Option<&'p PathNode> {
        let mut node = p;
        while let PathNode::Apply { module, args } = node {
            let spec = self.registry.lookup(module).ok()?;
            if matches!(spec.op, Op::Filter(_) | Op::FilterAll) {
                return Some(node);
            }
            node = args.first()?;
        }
        None
    }

    fn narrowing(&self, t: &Arc<Table>, p: &PathNode) -> Result<f64> {
        let Some(filter) = self.outermost_filter(p) else {
            return Ok(0.25);
        };
        if t.num_rows() == 0 {
            return Ok(0.0);
        }
        let kept = match evaluate_path(t, filter, &self.registry)? {
            crate::registry::Value::Table(sub) => sub.num_rows(),
            _ => t.num_rows(),
        };
        Ok(1.0 - kept as f64 / t.num_rows() as f64)
    }

    /// Case-folded names of columns read by the path. Ignored columns do not
    /// count.
    fn columns_touched(&self, p: &PathNode, out: &mut BTreeSet<String>) {
        let PathNode::Apply { module, args } = p else { return };
        let roles = self.registry.lookup(module).map(|s| s.roles.clone()).unwrap_or_default();
        for (i, arg) in args.iter().enumerate() {
            match (arg, roles.get(i)) {
                (PathNode::Literal(c), Some(ArgRole::Column | ArgRole::NumericColumn)) => {
                    out.insert(fold(c));
                }
                _ => self.columns_touched(arg, out),
            }
        }
    }
}

impl SaliencyScorer for HeuristicSaliency {
    fn score(&self, q: SaliencyQuery<'_>) -> Result<f64> {
        let narrowing = self.narrowing(q.table, q.partial_path)?;
        let mut cols = BTreeSet::new();
        self.columns_touched(q.partial_path, &mut cols);
        let diversity = if q.table.num_columns() == 0 { 0.0 } else { cols.len() as f64 / q.table.num_columns() as f64 };
        let depth_bonus = q.partial_path.depth().min(3) as f64 / 3.0;
        Ok((0.5 * narrowing + 0.3 * diversity + 0.2 * depth_bonus).clamp(0.0, 1.0))
    }
}

#[derive(Serialize)]
struct SaliencyRequest<'a> {
    table_linearized: &'a str,
    path: &'a str,
}

#[derive(Deserialize)]
struct SaliencyResponse {
    p_correct: f64,
}

/// Trained classifier behind an HTTP endpoint.
#[derive(Debug, Clone)]
pub struct RemoteSaliency {
    client: JsonClient,
}

impl RemoteSaliency {
    pub fn new(client: JsonClient) -> Self {
        RemoteSaliency { client }
    }

    /// Endpoint from `ENGINE_SALIENCY_URL`.
    pub fn from_env() -> Result<Self> {
        Ok(RemoteSaliency::new(JsonClient::new(&env_url("ENGINE_SALIENCY_URL")?, None)))
    }
}

impl SaliencyScorer for RemoteSaliency {
    fn score(&self, q: SaliencyQuery<'_>) -> Result<f64> {
        let table = q.table.linearize();
        let path = serialize_path(q.partial_path);
        let resp: SaliencyResponse = self.client.post(&SaliencyRequest { table_linearized: &table, path: &path })?;
        probability(resp.p_correct)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_table, TableFormat};
    use crate::path::parse_path;

    fn score(t: &Arc<Table>, p: &str) -> f64 {
        let p = parse_path(p).unwrap();
        HeuristicSaliency::default().score(SaliencyQuery { table: t, partial_path: &p }).unwrap()
    }

    #[test]
    fn narrowing_filter_beats_full_table_filter() {
        let t = Arc::new(parse_table("name,pts\na,1\nb,2\nc,3\n", TableFormat::Csv).unwrap());
        let full = score(&t, "count { filter_greater_eq { all_rows ; pts ; 1 } }");
        let narrow = score(&t, "count { filter_greater_eq { all_rows ; pts ; 3 } }");
        assert!(full < narrow);
        // 0.5 * (1 - 1/3) + 0.3 * 1/2 + 0.2 * 2/3
        assert!((narrow - (0.5 * 2.0 / 3.0 + 0.15 + 0.2 * 2.0 / 3.0)).abs() < 1e-12);
        assert!((full - (0.15 + 0.2 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn filter_free_paths_get_fixed_narrowing() {
        let t = Arc::new(parse_table("name,pts\na,1\nb,2\n", TableFormat::Csv).unwrap());
        assert!((score(&t, "count { all_rows }") - (0.125 + 0.2 / 3.0)).abs() < 1e-12);
        let s = score(&t, "eq { hop { arg_max { all_rows ; pts } ; name } ; b }");
        assert!((s - (0.125 + 0.3 + 0.2)).abs() < 1e-12);
        assert_eq!(s, score(&t, "eq { hop { arg_max { all_rows ; pts } ; name } ; b }"));
    }

    #[test]
    fn ignored_column_is_not_touched() {
        let t = Arc::new(parse_table("name,pts\na,1\nb,2\n", TableFormat::Csv).unwrap());
        let s = score(&t, "filter_all { all_rows ; name }");
        assert!((s - 0.2 / 3.0).abs() < 1e-12);
    }
}
