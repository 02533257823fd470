//! Deterministic offline completion backend. The output is a pure function of
//! the prompt.

use super::prompt::{Slots, TemplateId, SEPARATOR};
use super::{CompletionBackend, CompletionResult};
use crate::error::{Error, Result};
use crate::path::{parse_path, PathNode};

/// Log-probability assigned to every generated whitespace token.
pub const MOCK_TOKEN_LOGPROB: f64 = -0.105_360_515_657_826_3; // ln 0.9

#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl MockBackend {
    fn generate(&self, prompt: &str) -> Result<String> {
        let blocks: Vec<&str> = prompt.split(&format!("\n{SEPARATOR}\n")).collect();
        let id = blocks
            .first()
            .and_then(|line| TemplateId::from_instruction(line))
            .ok_or_else(|| Error::InvalidInput("mock backend: unrecognized prompt".into()))?;
        let template = id.template();
        let query = template.parse_block(blocks.last().expect("split yields a block"));
        for demo in &blocks[1..blocks.len() - 1] {
            let mut d = template.parse_block(demo);
            if let Some(target) = d.remove("target") {
                if d == query {
                    return Ok(target);
                }
            }
        }
        let slot = |name: &str| query.get(name).map(String::as_str).unwrap_or("");
        Ok(match id {
            TemplateId::SrTriple => realize_triple(slot("triple")),
            TemplateId::Fusion => fuse(slot("sent1"), slot("sent2")),
            TemplateId::DirectWebnlg => realize_triples(slot("triples")).join(" "),
            TemplateId::CotWebnlg => {
                let steps = realize_triples(slot("triples"));
                let fused = steps.iter().fold(String::new(), |acc, s| fuse(&acc, s));
                let mut parts = steps;
                parts.push(fused);
                parts.join(" # ")
            }
            TemplateId::SrPathLogicnlg => realize_path(slot("reasoning_path")),
            TemplateId::DirectLogicnlg => describe_table(&query),
        })
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, prompt: &str) -> Result<CompletionResult> {
        let text = self.generate(prompt)?;
        let n = text.split_whitespace().count();
        Ok(CompletionResult { text, token_logprobs: vec![MOCK_TOKEN_LOGPROB; n] })
    }

    fn name(&self) -> &str {
        "mock"
    }
}

fn humanize_entity(s: &str) -> String {
    s.replace('_', " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `runwayLength` and `runway_length` both become `runway length`.
pub fn humanize_relation(s: &str) -> String {
    let mut words = Vec::new();
    for part in s.split(|c: char| c == '_' || c.is_whitespace()).filter(|p| !p.is_empty()) {
        let mut cur = String::new();
        let chars: Vec<char> = part.chars().collect();
        for (i, &c) in chars.iter().enumerate() {
            let boundary = i > 0
                && c.is_uppercase()
                && (chars[i - 1].is_lowercase() || chars.get(i + 1).is_some_and(|n| n.is_lowercase()));
            if boundary && !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            cur.extend(c.to_lowercase());
        }
        if !cur.is_empty() {
            words.push(cur);
        }
    }
    words.join(" ")
}

fn end_sentence(s: &str) -> String {
    let s = s.trim();
    if s.is_empty() || s.ends_with(['.', '!', '?']) {
        s.to_string()
    } else {
        format!("{s}.")
    }
}

fn realize_triple(text: &str) -> String {
    let parts: Vec<&str> = text.split('|').map(str::trim).collect();
    match parts.as_slice() {
        [s, r, o] => end_sentence(&format!("{} {} {}", humanize_entity(s), humanize_relation(r), humanize_entity(o))),
        _ => end_sentence(&humanize_entity(text)),
    }
}

fn realize_triples(text: &str) -> Vec<String> {
    text.split('#').map(str::trim).filter(|t| !t.is_empty()).map(realize_triple).collect()
}

fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        cur.push(c);
        let at_end = matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace());
        if at_end {
            out.push(cur.trim().to_string());
            cur.clear();
        }
    }
    if !cur.trim().is_empty() {
        out.push(end_sentence(&cur));
    }
    out.retain(|s| !s.is_empty());
    out
}

/// `a` followed by the sentences of `b` that `a` does not already contain.
pub fn fuse(a: &str, b: &str) -> String {
    let mut out = sentences(a);
    for s in sentences(b) {
        if !out.iter().any(|o| o.eq_ignore_ascii_case(&s)) {
            out.push(s);
        }
    }
    out.join(" ")
}

fn describe_table(query: &Slots) -> String {
    let topic = query.get("table_topic").map(String::as_str).unwrap_or("").trim();
    let rows = query.get("table_content").map(|c| c.split(" | ").filter(|r| !r.trim().is_empty()).count()).unwrap_or(0);
    format!("The table about {topic} lists {rows} entries.")
}

fn realize_path(text: &str) -> String {
    let phrase = match parse_path(text) {
        Ok(p) => phrase(&p),
        Err(_) => text.trim().to_string(),
    };
    let mut chars = phrase.chars();
    let capitalized = match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    };
    end_sentence(&capitalized)
}

fn relation_phrase(rel: &str, v: &str) -> String {
    match rel {
        "eq" => v.to_string(),
        "not_eq" => format!("not {v}"),
        "greater" => format!("greater than {v}"),
        "greater_eq" => format!("at least {v}"),
        "less" | "lesser" => format!("less than {v}"),
        "less_eq" | "lesser_eq" => format!("at most {v}"),
        other => format!("{other} {v}"),
    }
}

/// Verbalization of a path through a fixed per-module phrase table.
fn phrase(p: &PathNode) -> String {
    let PathNode::Apply { module, args } = p else {
        return match p {
            PathNode::AllRows => "all rows".to_string(),
            other => other.to_string(),
        };
    };
    let a = |i: usize| args.get(i).map(phrase).unwrap_or_default();
    // quantifiers over the whole table stay short
    let scope = |i: usize| match args.get(i) {
        Some(PathNode::AllRows) | None => String::new(),
        Some(sub) => format!(" in {}", phrase(sub)),
    };
    let m = module.as_str();
    if let Some(rel) = m.strip_prefix("filter_") {
        if rel == "all" {
            return a(0);
        }
        return format!("{} where {} is {}", a(0), a(1), relation_phrase(rel, &a(2)));
    }
    if let Some(rel) = m.strip_prefix("all_") {
        return format!("all of the {} values{} are {}", a(1), scope(0), relation_phrase(rel, &a(2)));
    }
    if let Some(rel) = m.strip_prefix("most_") {
        return format!("most of the {} values{} are {}", a(1), scope(0), relation_phrase(rel, &a(2)));
    }
    match m {
        "arg_max" | "argmax" => format!("the row with the highest {} among {}", a(1), a(0)),
        "arg_min" | "argmin" => format!("the row with the lowest {} among {}", a(1), a(0)),
        "max" => format!("the highest {} among {}", a(1), a(0)),
        "min" => format!("the lowest {} among {}", a(1), a(0)),
        "avg" => format!("the average {} of {}", a(1), a(0)),
        "sum" => format!("the total {} of {}", a(1), a(0)),
        "count" => format!("the number of {}", a(0)),
        "only" => format!("there is only one row{}", scope(0)),
        "hop" => format!("the {} of {}", a(1), a(0)),
        "eq" => format!("{} is {}", a(0), a(1)),
        other => format!("{other} of {}", args.iter().map(phrase).collect::<Vec<_>>().join(" and ")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_are_humanized() {
        assert_eq!(humanize_relation("runwayLength"), "runway length");
        assert_eq!(humanize_relation("cityServed"), "city served");
        assert_eq!(humanize_relation("leader_name"), "leader name");
        assert_eq!(humanize_relation("ICAO_Location_Identifier"), "icao location identifier");
    }

    #[test]
    fn triple_realization() {
        assert_eq!(realize_triple("Italy | capital | Rome"), "Italy capital Rome.");
        assert_eq!(
            realize_triple("Antwerp_International_Airport | runwayLength | 600.0"),
            "Antwerp International Airport runway length 600.0."
        );
    }

    #[test]
    fn fusion_dedups_sentences() {
        assert_eq!(fuse("A b. C d.", "c d. E f"), "A b. C d. E f.");
        assert_eq!(fuse("", "Only one."), "Only one.");
        assert_eq!(fuse("Rome is in Italy.", "Rome is in Italy."), "Rome is in Italy.");
    }

    #[test]
    fn path_phrases() {
        assert_eq!(
            realize_path("most_greater_eq { all_rows ; to par ; 9 }"),
            "Most of the to par values are at least 9."
        );
        assert_eq!(
            realize_path("eq { hop { arg_min { all_rows ; money } ; player } ; gene sarazen }"),
            "The player of the row with the lowest money among all rows is gene sarazen."
        );
        assert_eq!(
            realize_path("only { filter_eq { all_rows ; country ; spain } }"),
            "There is only one row in all rows where country is spain."
        );
    }
}
