//! Language-model gateway: prompt rendering, completion backends and the
//! neural modules built on them.

mod mock;
mod prompt;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::data::{serialize_graph, Graph, Table, Triple};
use crate::error::{Error, Result};
use crate::http::{env_url, JsonClient};
use crate::path::{serialize_path, PathNode};

pub use mock::{fuse as mock_fuse, humanize_relation, MockBackend, MOCK_TOKEN_LOGPROB};
pub use prompt::{render_prompt, Demo, DemoSet, PromptTemplate, Slots, TemplateId, SEPARATOR};

pub const MAX_TOKENS: u32 = 128;

/// Generated text with one log-probability per generated token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub token_logprobs: Vec<f64>,
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<CompletionResult>;

    fn name(&self) -> &str;
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: u32,
    logprobs: bool,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
    #[serde(default)]
    token_logprobs: Vec<f64>,
}

/// Greedy completion over HTTP.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    client: JsonClient,
}

impl RemoteBackend {
    pub fn new(client: JsonClient) -> Self {
        RemoteBackend { client }
    }

    /// Endpoint from `ENGINE_LLM_URL`, bearer token from `ENGINE_LLM_TOKEN`.
    pub fn from_env() -> Result<Self> {
        let token = std::env::var("ENGINE_LLM_TOKEN").ok().filter(|t| !t.is_empty());
        Ok(RemoteBackend::new(JsonClient::new(&env_url("ENGINE_LLM_URL")?, token)))
    }
}

impl CompletionBackend for RemoteBackend {
    fn complete(&self, prompt: &str) -> Result<CompletionResult> {
        let req = CompletionRequest { prompt, max_tokens: MAX_TOKENS, temperature: 0, logprobs: true };
        let resp: CompletionResponse = self.client.post(&req)?;
        if let Some(bad) = resp.token_logprobs.iter().find(|lp| lp.is_nan() || **lp > 0.0) {
            return Err(Error::BackendProtocol(format!("log-probability {bad} is not <= 0")));
        }
        Ok(CompletionResult { text: resp.text, token_logprobs: resp.token_logprobs })
    }

    fn name(&self) -> &str {
        "remote"
    }
}

/// Cut a completion at the first line break or separator. When text is cut,
/// the log-probabilities are truncated to the kept whitespace-token count.
pub fn apply_stop(result: CompletionResult) -> CompletionResult {
    let raw = result.text.trim_start();
    let mut end = raw.len();
    for stop in ["\n", SEPARATOR] {
        if let Some(i) = raw.find(stop) {
            end = end.min(i);
        }
    }
    let text = raw[..end].trim().to_string();
    let mut token_logprobs = result.token_logprobs;
    if end < raw.len() {
        token_logprobs.truncate(text.split_whitespace().count());
    }
    CompletionResult { text, token_logprobs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    Direct,
    Cot,
}

impl std::str::FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(BaselineMode::Direct),
            "cot" => Ok(BaselineMode::Cot),
            other => Err(Error::InvalidInput(format!("unknown baseline mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum BaselineInput<'a> {
    Graph(&'a Graph),
    Table(&'a Table),
}

/// Renders prompts, calls the backend and post-processes completions. Counts
/// calls per template.
pub struct Gateway {
    backend: Box<dyn CompletionBackend>,
    demos: DemoSet,
    calls: [AtomicUsize; 6],
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("backend", &self.backend.name()).finish_non_exhaustive()
    }
}

fn slots(pairs: &[(&str, String)]) -> Slots {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

impl Gateway {
    pub fn new(backend: Box<dyn CompletionBackend>, demos: DemoSet) -> Self {
        Gateway { backend, demos, calls: Default::default() }
    }

    /// Mock backend with the bundled demonstrations.
    pub fn mock() -> Self {
        Gateway::new(Box::new(MockBackend), DemoSet::builtin())
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn demos(&self) -> &DemoSet {
        &self.demos
    }

    pub fn calls(&self, id: TemplateId) -> usize {
        self.calls[id as usize].load(Ordering::Relaxed)
    }

    pub fn call_counts(&self) -> BTreeMap<TemplateId, usize> {
        TemplateId::ALL.into_iter().map(|id| (id, self.calls(id))).collect()
    }

    pub fn render(&self, id: TemplateId, slots: &Slots) -> Result<String> {
        render_prompt(id, slots, &self.demos)
    }

    /// Render, complete and stop-process one prompt. Never returns blank text.
    pub fn complete(&self, id: TemplateId, slots: &Slots) -> Result<CompletionResult> {
        let prompt = self.render(id, slots)?;
        self.calls[id as usize].fetch_add(1, Ordering::Relaxed);
        let out = apply_stop(self.backend.complete(&prompt)?);
        if out.text.is_empty() {
            return Err(Error::EmptyGeneration);
        }
        Ok(out)
    }

    pub fn surface_realize_triple(&self, t: &Triple) -> Result<CompletionResult> {
        self.complete(TemplateId::SrTriple, &slots(&[("triple", t.to_string())]))
    }

    pub fn fuse_texts(&self, first: &str, second: &str) -> Result<CompletionResult> {
        self.complete(TemplateId::Fusion, &slots(&[("sent1", first.to_string()), ("sent2", second.to_string())]))
    }

    /// The prompt carries the topic, header and path but not the table body.
    pub fn surface_realize_path(&self, t: &Table, p: &PathNode) -> Result<String> {
        let s = slots(&[
            ("table_topic", t.topic().to_string()),
            ("table_header", t.header().join(" # ")),
            ("reasoning_path", serialize_path(p)),
        ]);
        Ok(self.complete(TemplateId::SrPathLogicnlg, &s)?.text)
    }

    /// Few-shot baselines. Chain-of-thought output keeps only its last
    /// `#`-separated step.
    pub fn baseline_generate(&self, mode: BaselineMode, input: BaselineInput<'_>) -> Result<String> {
        let (id, s) = match (mode, input) {
            (BaselineMode::Direct, BaselineInput::Graph(g)) => {
                (TemplateId::DirectWebnlg, slots(&[("triples", serialize_graph(g))]))
            }
            (BaselineMode::Cot, BaselineInput::Graph(g)) => {
                (TemplateId::CotWebnlg, slots(&[("triples", serialize_graph(g))]))
            }
            (BaselineMode::Direct, BaselineInput::Table(t)) => (
                TemplateId::DirectLogicnlg,
                slots(&[
                    ("table_topic", t.topic().to_string()),
                    ("table_header", t.header().join(" # ")),
                    ("table_content", t.linearize_content()),
                ]),
            ),
            (BaselineMode::Cot, BaselineInput::Table(_)) => {
                return Err(Error::Unsupported("chain-of-thought prompting is defined for graphs only".into()))
            }
        };
        let text = self.complete(id, &s)?.text;
        match mode {
            BaselineMode::Direct => Ok(text),
            BaselineMode::Cot => last_cot_step(&text),
        }
    }
}

/// The final `#`-separated segment of a chain-of-thought completion.
pub fn last_cot_step(text: &str) -> Result<String> {
    let last = text.rsplit('#').next().unwrap_or("").trim();
    if last.is_empty() {
        Err(Error::EmptyGeneration)
    } else {
        Ok(last.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_graph;
    use crate::scoring::fluency_score;

    struct Canned(&'static str, Vec<f64>);

    impl CompletionBackend for Canned {
        fn complete(&self, _prompt: &str) -> Result<CompletionResult> {
            Ok(CompletionResult { text: self.0.to_string(), token_logprobs: self.1.clone() })
        }

        fn name(&self) -> &str {
            "canned"
        }
    }

    #[test]
    fn stop_rules() {
        let r = apply_stop(CompletionResult { text: " A b.\nC d".into(), token_logprobs: vec![-0.1; 4] });
        assert_eq!(r.text, "A b.");
        assert_eq!(r.token_logprobs.len(), 2);
        let r = apply_stop(CompletionResult { text: "x y ### z".into(), token_logprobs: vec![-0.1; 4] });
        assert_eq!(r.text, "x y");
        let r = apply_stop(CompletionResult { text: "x y".into(), token_logprobs: vec![-0.1; 3] });
        assert_eq!(r.token_logprobs.len(), 3);
    }

    #[test]
    fn cot_keeps_last_step() {
        assert_eq!(last_cot_step("A. # B. # final summary").unwrap(), "final summary");
        assert_eq!(last_cot_step("only").unwrap(), "only");
        assert_eq!(last_cot_step("a # "), Err(Error::EmptyGeneration));
    }

    #[test]
    fn mock_uses_matching_demonstration() {
        let gw = Gateway::mock();
        let t = Triple::new("A.S._Gubbio_1910", "league", "Serie_D").unwrap();
        let r = gw.surface_realize_triple(&t).unwrap();
        assert_eq!(r.text, "AS Gubbio 1910 plays in Serie D.");
        assert!((fluency_score(&r.token_logprobs).unwrap() - 0.9).abs() < 1e-12);
        let r = gw.fuse_texts("Rome is the capital of Italy.", "Pietro Grasso is the leader of Italy.").unwrap();
        assert_eq!(r.text, "Rome is the capital of Italy where Pietro Grasso is the leader.");
        assert_eq!(gw.calls(TemplateId::SrTriple), 1);
        assert_eq!(gw.calls(TemplateId::Fusion), 1);
    }

    #[test]
    fn mock_is_pure() {
        let gw = Gateway::mock();
        let t = Triple::new("Antwerp_International_Airport", "cityServed", "Antwerp").unwrap();
        let a = gw.surface_realize_triple(&t).unwrap();
        let b = gw.surface_realize_triple(&t).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.text, "Antwerp International Airport city served Antwerp.");
    }

    #[test]
    fn baselines() {
        let gw = Gateway::mock();
        let g = parse_graph("Antwerp | country | Belgium").unwrap();
        let direct = gw.baseline_generate(BaselineMode::Direct, BaselineInput::Graph(&g)).unwrap();
        let sr = gw.surface_realize_triple(g.triples().next().unwrap()).unwrap().text;
        assert_eq!(direct, sr);
        let g2 = parse_graph("Italy | capital | Rome # Italy | leader | Pietro_Grasso").unwrap();
        let cot = gw.baseline_generate(BaselineMode::Cot, BaselineInput::Graph(&g2)).unwrap();
        assert!(!cot.contains('#'));
        let empty = Gateway::new(Box::new(Canned("   \n", vec![])), DemoSet::default());
        assert_eq!(
            empty.baseline_generate(BaselineMode::Direct, BaselineInput::Graph(&g)),
            Err(Error::EmptyGeneration)
        );
        let t = crate::data::parse_table("a\n1\n", crate::data::TableFormat::Csv).unwrap();
        assert!(matches!(
            gw.baseline_generate(BaselineMode::Cot, BaselineInput::Table(&t)),
            Err(Error::Unsupported(_))
        ));
    }
}
