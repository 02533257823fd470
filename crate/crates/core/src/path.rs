//! Reasoning paths: the AST, its concrete syntax and the type-checker.
//!
//! Concrete syntax, as produced by [`serialize_path`]:
//!
//! ```text
//! eq { hop { arg_min { all_rows ; money } ; player } ; gene sarazen }
//! ```
//!
//! `all_rows` is reserved for the input table. Any other argument that is not
//! a nested call is a literal; literal words are joined by single spaces and
//! may not contain `{`, `}` or `;`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnType, Table};
use crate::error::{Error, Result};
use crate::number::normalize_numeric_cell;
use crate::registry::{ArgRole, ModuleRegistry};

pub const ALL_ROWS: &str = "all_rows";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Table,
    Row,
    Number,
    String,
    Bool,
    Triple,
    Path,
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Table => "table",
            DataType::Row => "row",
            DataType::Number => "number",
            DataType::String => "string",
            DataType::Bool => "bool",
            DataType::Triple => "triple",
            DataType::Path => "path",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathNode {
    Apply { module: String, args: Vec<PathNode> },
    Literal(String),
    AllRows,
}

impl PathNode {
    pub fn apply(module: &str, args: Vec<PathNode>) -> PathNode {
        PathNode::Apply { module: module.to_string(), args }
    }

    pub fn literal(text: impl Into<String>) -> PathNode {
        PathNode::Literal(text.into())
    }

    /// Number of `Apply` nodes.
    pub fn depth(&self) -> usize {
        match self {
            PathNode::Apply { args, .. } => 1 + args.iter().map(PathNode::depth).sum::<usize>(),
            _ => 0,
        }
    }

    pub fn module_name(&self) -> Option<&str> {
        match self {
            PathNode::Apply { module, .. } => Some(module),
            _ => None,
        }
    }

    pub fn args(&self) -> &[PathNode] {
        match self {
            PathNode::Apply { args, .. } => args,
            _ => &[],
        }
    }

    /// Every `Apply` subtree in post-order, ending with `self` if it is one.
    pub fn apply_subtrees(&self) -> Vec<&PathNode> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a PathNode, out: &mut Vec<&'a PathNode>) {
            if let PathNode::Apply { args, .. } = n {
                for a in args {
                    walk(a, out);
                }
                out.push(n);
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn is_subtree_of(&self, other: &PathNode) -> bool {
        self == other || other.args().iter().any(|a| self.is_subtree_of(a))
    }
}

impl fmt::Display for PathNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathNode::AllRows => f.write_str(ALL_ROWS),
            PathNode::Literal(s) => f.write_str(s),
            PathNode::Apply { module, args } => {
                write!(f, "{module} {{ ")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ; ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(" }")
            }
        }
    }
}

/// Canonical text form. `parse_path(&serialize_path(p)) == p` for every
/// well-formed `p`.
pub fn serialize_path(p: &PathNode) -> String {
    p.to_string()
}

/// Whether `s` can be written as a literal and read back unchanged.
pub fn is_valid_literal(s: &str) -> bool {
    !s.is_empty()
        && s != ALL_ROWS
        && !s.contains(['{', '}', ';'])
        && s.split(' ').all(|w| !w.is_empty() && !w.contains(char::is_whitespace))
}

pub fn parse_path(text: &str) -> Result<PathNode> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error("empty path"));
    }
    let node = p.path()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected input after path"));
    }
    Ok(node)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn is_delim(c: char) -> bool {
    matches!(c, '{' | '}' | ';')
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn word(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || is_delim(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    /// path := NAME '{' arg (';' arg)* '}'
    fn path(&mut self) -> Result<PathNode> {
        let start = self.pos;
        let name = self.word();
        if name.is_empty() {
            return Err(self.error("expected module name"));
        }
        self.skip_ws();
        if self.peek() != Some('{') {
            self.pos = start;
            return Err(self.error("expected `{` after module name"));
        }
        self.pos += 1;
        self.call_args(name)
    }

    fn call_args(&mut self, name: &str) -> Result<PathNode> {
        let mut args = Vec::new();
        loop {
            args.push(self.arg()?);
            self.skip_ws();
            match self.peek() {
                Some(';') => self.pos += 1,
                Some('}') => {
                    self.pos += 1;
                    return Ok(PathNode::apply(name, args));
                }
                Some(_) => return Err(self.error("expected `;` or `}`")),
                None => return Err(self.error("unbalanced braces: missing `}`")),
            }
        }
    }

    /// arg := path | 'all_rows' | literal word sequence
    fn arg(&mut self) -> Result<PathNode> {
        self.skip_ws();
        let start = self.pos;
        let mut words = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None | Some(';') | Some('}') => break,
                Some('{') => {
                    if words.len() != 1 {
                        return Err(self.error("expected a single module name before `{`"));
                    }
                    self.pos += 1;
                    let node = self.call_args(words[0])?;
                    return Ok(node);
                }
                Some(_) => words.push(self.word()),
            }
        }
        if words.is_empty() {
            self.pos = start;
            return Err(self.error("empty argument"));
        }
        let text = words.join(" ");
        if text == ALL_ROWS {
            Ok(PathNode::AllRows)
        } else {
            Ok(PathNode::Literal(text))
        }
    }
}

/// Type-check `p` against the registry, validating column literals against
/// `ctx`. Returns the output type of the whole path.
pub fn typecheck_path(p: &PathNode, reg: &ModuleRegistry, ctx: &Table) -> Result<DataType> {
    match p {
        PathNode::AllRows => Ok(DataType::Table),
        PathNode::Literal(_) => Ok(DataType::String),
        PathNode::Apply { module, args } => {
            let spec = reg.lookup(module)?;
            if args.len() != spec.input_types.len() {
                return Err(Error::ArityMismatch {
                    module: module.clone(),
                    expected: spec.input_types.len(),
                    found: args.len(),
                });
            }
            for (i, (arg, (&expected, &role))) in
                args.iter().zip(spec.input_types.iter().zip(spec.roles.iter())).enumerate()
            {
                let mismatch = |found| Error::TypeMismatch { module: module.clone(), position: i + 1, expected, found };
                match arg {
                    PathNode::Literal(text) => match expected {
                        DataType::String => check_column_literal(text, role, ctx)?,
                        DataType::Number => {
                            if normalize_numeric_cell(text).number().is_none() {
                                return Err(mismatch(DataType::String));
                            }
                        }
                        _ => return Err(mismatch(DataType::String)),
                    },
                    _ => {
                        let found = typecheck_path(arg, reg, ctx)?;
                        if found != expected {
                            return Err(mismatch(found));
                        }
                    }
                }
            }
            Ok(spec.output_type)
        }
    }
}

fn check_column_literal(text: &str, role: ArgRole, ctx: &Table) -> Result<()> {
    match role {
        ArgRole::Column | ArgRole::NumericColumn => {
            let idx = ctx.column_index(text).ok_or_else(|| Error::UnknownColumn(text.to_string()))?;
            if role == ArgRole::NumericColumn && ctx.column_type(idx) != ColumnType::Numeric {
                return Err(Error::NonNumericColumn(ctx.header()[idx].clone()));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(s: &str) -> PathNode {
        PathNode::literal(s)
    }

    #[test]
    fn parses_prompt_path() {
        let p = parse_path("most_greater_eq { all_rows ; to par ; 9 }").unwrap();
        assert_eq!(p, PathNode::apply("most_greater_eq", vec![PathNode::AllRows, lit("to par"), lit("9")]));
    }

    #[test]
    fn parses_nested_calls() {
        let p = parse_path("eq { hop { argmin { all_rows ; points } ; player } ; x }").unwrap();
        assert_eq!(p.depth(), 3);
        let expected = PathNode::apply(
            "eq",
            vec![
                PathNode::apply(
                    "hop",
                    vec![PathNode::apply("argmin", vec![PathNode::AllRows, lit("points")]), lit("player")],
                ),
                lit("x"),
            ],
        );
        assert_eq!(p, expected);
    }

    #[test]
    fn tolerates_spacing() {
        let p = parse_path("count{all_rows}").unwrap();
        assert_eq!(serialize_path(&p), "count { all_rows }");
        let p = parse_path("  filter_eq {all_rows;  player ;  gene   sarazen }  ").unwrap();
        assert_eq!(serialize_path(&p), "filter_eq { all_rows ; player ; gene sarazen }");
    }

    #[test]
    fn syntax_errors() {
        let err = |s: &str| match parse_path(s) {
            Err(Error::Syntax { offset, .. }) => offset,
            other => panic!("{s:?} gave {other:?}"),
        };
        assert_eq!(err("avg { }"), 6);
        assert_eq!(err(""), 0);
        assert_eq!(err("   "), 3);
        err("avg { all_rows ; x");
        err("avg { all_rows } }");
        err("avg all_rows");
        err("avg { all_rows ; ; x }");
        err("a b { all_rows }");
    }

    #[test]
    fn serializes_canonically() {
        let p = PathNode::apply("count", vec![PathNode::AllRows]);
        assert_eq!(serialize_path(&p), "count { all_rows }");
        let s = "most_greater_eq { all_rows ; to par ; 9 }";
        assert_eq!(serialize_path(&parse_path(s).unwrap()), s);
    }

    #[test]
    fn subtrees_in_post_order() {
        let p = parse_path("eq { hop { argmin { all_rows ; points } ; player } ; x }").unwrap();
        let subs: Vec<String> = p.apply_subtrees().into_iter().map(serialize_path).collect();
        assert_eq!(
            subs,
            vec![
                "argmin { all_rows ; points }",
                "hop { argmin { all_rows ; points } ; player }",
                "eq { hop { argmin { all_rows ; points } ; player } ; x }",
            ]
        );
    }

    #[test]
    fn literal_validity() {
        assert!(is_valid_literal("gene sarazen"));
        assert!(!is_valid_literal("a  b"));
        assert!(!is_valid_literal(" a"));
        assert!(!is_valid_literal("a;b"));
        assert!(!is_valid_literal("all_rows"));
        assert!(!is_valid_literal(""));
    }
}
