//! Value functions that rank candidate steps and texts.
//!
//! Graph summaries are scored by an ensemble of fluency (mean token
//! log-likelihood) and two-way entailment against the covered triples.
//! Partial table paths are scored by a saliency metric.

mod saliency;
mod training;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::Triple;
use crate::error::{Error, Result};
use crate::http::{env_url, JsonClient};

pub use saliency::{HeuristicSaliency, RemoteSaliency, SaliencyQuery, SaliencyScorer};
pub use training::{
    generate_saliency_training_data, read_gold_paths, read_samples, write_samples, GoldPath, LabeledPathSample,
    Provenance, SaliencyDataset, SampleLabel, SkippedGold,
};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    alpha: f64,
}

impl EnsembleConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(EnsembleConfig { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { alpha: DEFAULT_ALPHA }
    }
}

/// Geometric-mean token probability: `exp(mean(logprobs))`, in (0, 1].
pub fn fluency_score(token_logprobs: &[f64]) -> Result<f64> {
    if token_logprobs.is_empty() {
        return Err(Error::EmptyInput("no token log-probabilities".into()));
    }
    if let Some(bad) = token_logprobs.iter().find(|lp| !(lp.is_finite() || **lp == f64::NEG_INFINITY) || **lp > 0.0) {
        return Err(Error::InvalidInput(format!("log-probability {bad} is not <= 0")));
    }
    let mean = token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64;
    Ok(mean.exp())
}

/// Directional entailment probability `P(premise entails hypothesis)`.
pub trait EntailmentModel {
    fn entailment(&self, premise: &str, hypothesis: &str) -> Result<f64>;
}

/// Mean of the two entailment directions between the covered triples
/// (as the concatenation of their surface realizations) and `text`.
pub fn semantic_consistency_score<S: AsRef<str>>(
    realizations: &[S],
    text: &str,
    nli: &dyn EntailmentModel,
) -> Result<f64> {
    let premise = realizations.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(" ");
    let forward = nli.entailment(&premise, text)?;
    let backward = nli.entailment(text, &premise)?;
    Ok(0.5 * (forward + backward))
}

/// `alpha * fluency + (1 - alpha) * consistency`.
pub fn ensemble_score(fluency: f64, consistency: f64, cfg: &EnsembleConfig) -> f64 {
    cfg.alpha * fluency + (1.0 - cfg.alpha) * consistency
}

/// A partial graph summary: the triples it covers and its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionState {
    pub covered: BTreeSet<Triple>,
    pub text: String,
}

impl FusionState {
    pub fn new(covered: BTreeSet<Triple>, text: String) -> Result<Self> {
        if covered.is_empty() || text.trim().is_empty() {
            return Err(Error::InvalidInput("fusion state needs triples and text".into()));
        }
        Ok(FusionState { covered, text })
    }
}

/// Offline entailment stand-in: the share of the hypothesis' word types that
/// also occur in the premise.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverlapEntailment;

fn word_types(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric() && c != '.')
        .map(|w| w.trim_matches('.').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

impl EntailmentModel for OverlapEntailment {
    fn entailment(&self, premise: &str, hypothesis: &str) -> Result<f64> {
        let hyp = word_types(hypothesis);
        if hyp.is_empty() {
            return Ok(0.0);
        }
        let prem = word_types(premise);
        Ok(hyp.iter().filter(|w| prem.contains(*w)).count() as f64 / hyp.len() as f64)
    }
}

#[derive(Serialize)]
struct NliRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Deserialize)]
struct NliResponse {
    p_entail: f64,
}

/// NLI classifier behind an HTTP endpoint.
#[derive(Debug, Clone)]
pub struct RemoteEntailment {
    client: JsonClient,
}

impl RemoteEntailment {
    pub fn new(client: JsonClient) -> Self {
        RemoteEntailment { client }
    }

    /// Endpoint from `ENGINE_NLI_URL`.
    pub fn from_env() -> Result<Self> {
        Ok(RemoteEntailment::new(JsonClient::new(&env_url("ENGINE_NLI_URL")?, None)))
    }
}

impl EntailmentModel for RemoteEntailment {
    fn entailment(&self, premise: &str, hypothesis: &str) -> Result<f64> {
        let resp: NliResponse = self.client.post(&NliRequest { premise, hypothesis })?;
        probability(resp.p_entail)
    }
}

pub(crate) fn probability(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::BackendProtocol(format!("probability {p} outside [0, 1]")))
    }
}
