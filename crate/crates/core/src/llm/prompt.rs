//! Few-shot prompt templates.
//!
//! A rendered prompt is an instruction line followed by blocks separated by
//! `###` lines: one block per demonstration, then the query block, which ends
//! with the bare target label (`Sentence:`, `Output:`, ...).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const SEPARATOR: &str = "###";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateId {
    DirectWebnlg,
    CotWebnlg,
    SrTriple,
    Fusion,
    SrPathLogicnlg,
    DirectLogicnlg,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::DirectWebnlg,
        TemplateId::CotWebnlg,
        TemplateId::SrTriple,
        TemplateId::Fusion,
        TemplateId::SrPathLogicnlg,
        TemplateId::DirectLogicnlg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::DirectWebnlg => "direct_webnlg",
            TemplateId::CotWebnlg => "cot_webnlg",
            TemplateId::SrTriple => "sr_triple",
            TemplateId::Fusion => "fusion",
            TemplateId::SrPathLogicnlg => "sr_path_logicnlg",
            TemplateId::DirectLogicnlg => "direct_logicnlg",
        }
    }

    pub fn template(self) -> &'static PromptTemplate {
        &TEMPLATES[self as usize]
    }

    /// The template whose instruction line is `line`.
    pub fn from_instruction(line: &str) -> Option<TemplateId> {
        TemplateId::ALL.into_iter().find(|id| id.template().instruction == line.trim())
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown template `{s}`")))
    }
}

#[derive(Debug)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub instruction: &'static str,
    /// `(label, slot)` pairs, in line order.
    pub fields: &'static [(&'static str, &'static str)],
    pub target_label: &'static str,
}

const TABLE_SLOTS: [(&str, &str); 2] = [("Table Topic", "table_topic"), ("Table Header", "table_header")];

static TEMPLATES: [PromptTemplate; 6] = [
    PromptTemplate {
        id: TemplateId::DirectWebnlg,
        instruction: "Let's convert triples to sentences",
        fields: &[("Triples", "triples")],
        target_label: "Output",
    },
    PromptTemplate {
        id: TemplateId::CotWebnlg,
        instruction: "Let's convert triples to sentences step-by-step",
        fields: &[("Triples", "triples")],
        target_label: "Output",
    },
    PromptTemplate {
        id: TemplateId::SrTriple,
        instruction: "Let's convert a triple to a sentence",
        fields: &[("Triple", "triple")],
        target_label: "Sentence",
    },
    PromptTemplate {
        id: TemplateId::Fusion,
        instruction: "Let's combine two sentences",
        fields: &[("First Sentence", "sent1"), ("Second Sentence", "sent2")],
        target_label: "Combined Sentence",
    },
    PromptTemplate {
        id: TemplateId::SrPathLogicnlg,
        instruction: "Let's generate a logically entailed statement from the table for the reasoning path",
        fields: &[TABLE_SLOTS[0], TABLE_SLOTS[1], ("Reasoning Path", "reasoning_path")],
        target_label: "Generation",
    },
    PromptTemplate {
        id: TemplateId::DirectLogicnlg,
        instruction: "Let's generate a logically entailed statement from the table",
        fields: &[TABLE_SLOTS[0], TABLE_SLOTS[1], ("Table Content", "table_content")],
        target_label: "Generation",
    },
];

pub type Slots = BTreeMap<String, String>;

/// Slot values are kept on one line so the block layout survives.
fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl PromptTemplate {
    fn slot<'s>(&self, slots: &'s Slots, name: &str) -> Result<&'s str> {
        slots.get(name).map(String::as_str).ok_or_else(|| Error::MissingSlot(name.to_string()))
    }

    fn block(&self, slots: &Slots, target: Option<&str>) -> Result<String> {
        let mut lines = Vec::with_capacity(self.fields.len() + 1);
        for (label, name) in self.fields {
            lines.push(format!("{label}: {}", one_line(self.slot(slots, name)?)));
        }
        lines.push(match target {
            Some(t) => format!("{}: {}", self.target_label, one_line(t)),
            None => format!("{}:", self.target_label),
        });
        Ok(lines.join("\n"))
    }

    pub fn render(&self, slots: &Slots, demos: &[Demo]) -> Result<String> {
        let mut blocks = vec![self.instruction.to_string()];
        for d in demos {
            blocks.push(self.block(&d.slots, Some(&d.target))?);
        }
        blocks.push(self.block(slots, None)?);
        Ok(blocks.join(&format!("\n{SEPARATOR}\n")))
    }

    /// Field values of a block written by [`PromptTemplate::render`]; the
    /// target, if present, is stored under `"target"`.
    pub fn parse_block(&self, block: &str) -> Slots {
        let mut out = Slots::new();
        for line in block.lines() {
            let labelled = self
                .fields
                .iter()
                .map(|(label, name)| (*label, *name))
                .chain(std::iter::once((self.target_label, "target")));
            for (label, name) in labelled {
                if let Some(rest) = line.strip_prefix(label).and_then(|r| r.strip_prefix(':')) {
                    out.insert(name.to_string(), rest.trim().to_string());
                    break;
                }
            }
        }
        out.retain(|k, v| k != "target" || !v.is_empty());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Demo {
    pub target: String,
    #[serde(flatten)]
    pub slots: Slots,
}

/// Demonstrations per template.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemoSet {
    demos: BTreeMap<TemplateId, Vec<Demo>>,
}

const DEFAULT_DEMOS: &str = include_str!("../../assets/demos.json");

impl DemoSet {
    /// Parse a demo file: `{"<template id>": [{"<slot>": ..., "target": ...}]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<Demo>> = serde_json::from_str(text)
            .map_err(|e| Error::malformed(crate::error::Location::default(), format!("demo file: {e}")))?;
        let mut demos = BTreeMap::new();
        for (key, list) in raw {
            let id: TemplateId = key.parse()?;
            for d in &list {
                for (_, name) in id.template().fields {
                    if !d.slots.contains_key(*name) {
                        return Err(Error::MissingSlot(format!("{id} demonstration: {name}")));
                    }
                }
            }
            demos.insert(id, list);
        }
        Ok(DemoSet { demos })
    }

    /// The demonstrations shipped with the crate.
    pub fn builtin() -> Self {
        DemoSet::from_json(DEFAULT_DEMOS).expect("bundled demos are valid")
    }

    pub fn get(&self, id: TemplateId) -> &[Demo] {
        self.demos.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Keep at most `k` demonstrations per template.
    pub fn truncated(mut self, k: usize) -> Self {
        for list in self.demos.values_mut() {
            list.truncate(k);
        }
        self
    }
}

pub fn render_prompt(id: TemplateId, slots: &Slots, demos: &DemoSet) -> Result<String> {
    id.template().render(slots, demos.get(id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slots(pairs: &[(&str, &str)]) -> Slots {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn zero_shot_layout() {
        let p =
            render_prompt(TemplateId::SrTriple, &slots(&[("triple", "Italy | capital | Rome")]), &DemoSet::default())
                .unwrap();
        assert_eq!(p, "Let's convert a triple to a sentence\n###\nTriple: Italy | capital | Rome\nSentence:");
    }

    #[test]
    fn missing_slot() {
        let err = render_prompt(TemplateId::Fusion, &slots(&[("sent1", "a")]), &DemoSet::default()).unwrap_err();
        assert_eq!(err, Error::MissingSlot("sent2".into()));
    }

    #[test]
    fn builtin_demos_cover_every_template() {
        let demos = DemoSet::builtin();
        for id in TemplateId::ALL {
            assert!(!demos.get(id).is_empty(), "{id}");
        }
        assert_eq!(demos.get(TemplateId::SrTriple).len(), 5);
        assert_eq!(demos.clone().truncated(2).get(TemplateId::SrTriple).len(), 2);
    }

    #[test]
    fn blocks_parse_back() {
        let t = TemplateId::Fusion.template();
        let s = slots(&[("sent1", "A."), ("sent2", "B.")]);
        let block = t.block(&s, Some("A. B.")).unwrap();
        let mut expected = s.clone();
        expected.insert("target".into(), "A. B.".into());
        assert_eq!(t.parse_block(&block), expected);
        assert_eq!(t.parse_block(&t.block(&s, None).unwrap()), s);
    }

    #[test]
    fn instruction_lookup_is_exact() {
        assert_eq!(TemplateId::from_instruction("Let's convert triples to sentences"), Some(TemplateId::DirectWebnlg));
        assert_eq!(
            TemplateId::from_instruction("Let's convert triples to sentences step-by-step"),
            Some(TemplateId::CotWebnlg)
        );
        assert_eq!(TemplateId::from_instruction("hello"), None);
    }
}
