//! Corpus BLEU-n with clipped n-gram counts and a brevity penalty.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Lowercase, split punctuation from words, split on whitespace.
pub fn tokenize(s: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(s.len() * 2);
    for c in s.chars() {
        if c.is_ascii_punctuation() {
            spaced.push(' ');
            spaced.push(c);
            spaced.push(' ');
        } else {
            spaced.extend(c.to_lowercase());
        }
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
struct Stats {
    matches: Vec<usize>,
    totals: Vec<usize>,
    hyp_len: usize,
    ref_len: usize,
}

fn sentence_stats(hyp: &[String], refs: &[Vec<String>], max_n: usize) -> Stats {
    let mut st = Stats { matches: vec![0; max_n], totals: vec![0; max_n], hyp_len: hyp.len(), ref_len: 0 };
    for n in 1..=max_n {
        let counts = ngram_counts(hyp, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in refs {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        st.matches[n - 1] = counts.iter().map(|(g, c)| (*c).min(*max_ref.get(g).unwrap_or(&0))).sum();
        st.totals[n - 1] = hyp.len().saturating_sub(n - 1);
    }
    // closest reference length, shorter one on ties
    st.ref_len = refs.iter().map(Vec::len).min_by_key(|&l| ((l as i64 - hyp.len() as i64).abs(), l)).unwrap_or(0);
    st
}

fn score(st: &Stats, n: usize) -> f64 {
    if st.hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for k in 0..n {
        if st.matches[k] == 0 || st.totals[k] == 0 {
            return 0.0;
        }
        log_sum += (st.matches[k] as f64 / st.totals[k] as f64).ln();
    }
    let bp = if st.hyp_len >= st.ref_len { 1.0 } else { (1.0 - st.ref_len as f64 / st.hyp_len as f64).exp() };
    bp * (log_sum / n as f64).exp()
}

/// A tokenized hypothesis with its tokenized references.
type Tokenized = (Vec<String>, Vec<Vec<String>>);

fn prepare(hyps: &[String], refs: &[Vec<String>]) -> Result<Vec<Tokenized>> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch { hyps: hyps.len(), refs: refs.len() });
    }
    if hyps.is_empty() {
        return Err(Error::EmptyInput("no hypotheses".into()));
    }
    Ok(hyps.iter().zip(refs).map(|(h, rs)| (tokenize(h), rs.iter().map(|r| tokenize(r)).collect())).collect())
}

/// Corpus BLEU with uniform weights over 1..=n grams, in [0, 1].
pub fn bleu_n(hyps: &[String], refs: &[Vec<String>], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig("BLEU order must be positive".into()));
    }
    let data = prepare(hyps, refs)?;
    let mut total = Stats { matches: vec![0; n], totals: vec![0; n], hyp_len: 0, ref_len: 0 };
    for (h, rs) in &data {
        let st = sentence_stats(h, rs, n);
        for k in 0..n {
            total.matches[k] += st.matches[k];
            total.totals[k] += st.totals[k];
        }
        total.hyp_len += st.hyp_len;
        total.ref_len += st.ref_len;
    }
    Ok(score(&total, n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub bleu_1: f64,
    pub bleu_2: f64,
    pub bleu_3: f64,
    pub num_hypotheses: usize,
    /// Sentence-level BLEU-3 per hypothesis, in input order.
    pub per_hypothesis: Vec<f64>,
}

pub fn evaluate_bleu(hyps: &[String], refs: &[Vec<String>]) -> Result<EvalReport> {
    let data = prepare(hyps, refs)?;
    let per_hypothesis = data.iter().map(|(h, rs)| score(&sentence_stats(h, rs, 3), 3)).collect();
    Ok(EvalReport {
        bleu_1: bleu_n(hyps, refs, 1)?,
        bleu_2: bleu_n(hyps, refs, 2)?,
        bleu_3: bleu_n(hyps, refs, 3)?,
        num_hypotheses: hyps.len(),
        per_hypothesis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn identical_corpus_scores_one() {
        let hyps = s(&["the cat sat on the mat ."]);
        let refs = vec![s(&["The cat sat on the mat."])];
        for n in 1..=3 {
            assert!((bleu_n(&hyps, &refs, n).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clipping_and_brevity() {
        // "the the the" vs "the cat": clipped unigram match 1 of 3
        let hyps = s(&["the the the"]);
        let refs = vec![s(&["the cat"])];
        assert!((bleu_n(&hyps, &refs, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        // shorter hypothesis is penalized: exp(1 - 4/2)
        let hyps = s(&["a b"]);
        let refs = vec![s(&["a b c d"])];
        assert!((bleu_n(&hyps, &refs, 1).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn edge_cases() {
        assert_eq!(bleu_n(&s(&[""]), &[s(&["a"])], 1).unwrap(), 0.0);
        assert!(matches!(bleu_n(&s(&["a"]), &[], 1), Err(Error::LengthMismatch { .. })));
        assert_eq!(tokenize("Rome, Italy."), ["rome", ",", "italy", "."]);
    }

    #[test]
    fn closest_reference_length() {
        let hyps = s(&["a b c"]);
        let refs = vec![s(&["a b c d e f", "a b c x"])];
        let report = evaluate_bleu(&hyps, &refs).unwrap();
        // closest reference has 4 tokens
        assert!((report.bleu_1 - (1.0 - 4.0 / 3.0f64).exp()).abs() < 1e-12);
    }
}
