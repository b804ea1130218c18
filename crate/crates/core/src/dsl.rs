//! Built-in parser for the brace-structured source DSL.
//!
//! The DSL is what the synthetic repositories are written in and what the
//! migration editor manipulates. It is line-oriented: every declaration and
//! every body line sits on its own line, so element spans are line ranges
//! and edits splice lines without disturbing the rest of a file.
//!
//! ```text
//! class FastDatePrinter implements DatePrinter {
//!   @Override
//!   static method format(Calendar) -> string {
//!     calls FormatCache.getPatternForStyle
//!     line render the calendar
//!   }
//!   field cache {
//!     line value 42
//!   }
//! }
//! ```
//!
//! `calls X` and `expect X ...` body lines declare references to `X`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::model::{CodeElement, ElementKind};
use crate::tree::SourceTree;

pub const DSL_EXT: &str = ".dsl";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

/// An element with its 0-based line span in the parsed file. The span covers
/// the element's annotation lines through its closing brace.
#[derive(Debug, Clone)]
pub struct ParsedElement {
    pub element: CodeElement,
    pub start: usize,
    pub end: usize,
    /// First body line (0-based, within the file); `end` for empty bodies.
    pub body_start: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedFile {
    pub elements: Vec<ParsedElement>,
}

impl ParsedFile {
    pub fn find(&self, qualified_name: &str) -> Option<&ParsedElement> {
        self.elements
            .iter()
            .find(|p| p.element.qualified_name == qualified_name)
    }

    pub fn into_elements(self) -> Vec<CodeElement> {
        self.elements.into_iter().map(|p| p.element).collect()
    }
}

fn err(file: &str, line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        file: file.to_string(),
        line: line + 1,
        message: message.into(),
    }
}

/// Parses one DSL file, keeping line spans for every element.
pub fn parse_file(path: &str, content: &str) -> Result<ParsedFile, ParseError> {
    let lines: Vec<&str> = content.lines().collect();
    let mut out = ParsedFile::default();
    let mut i = 0usize;
    while i < lines.len() {
        let line = lines[i].trim();
        if line.is_empty() {
            i += 1;
            continue;
        }
        let type_start = i;
        let mut annotations = BTreeSet::new();
        while lines[i].trim().starts_with('@') {
            annotations.insert(lines[i].trim()[1..].to_string());
            i += 1;
            if i >= lines.len() {
                return Err(err(path, i - 1, "annotation at end of file"));
            }
        }
        let header = lines[i].trim();
        let (kind, rest) = if let Some(rest) = header.strip_prefix("class ") {
            (ElementKind::Class, rest)
        } else if let Some(rest) = header.strip_prefix("interface ") {
            (ElementKind::Interface, rest)
        } else {
            return Err(err(path, i, format!("expected type declaration, got `{header}`")));
        };
        let rest = rest
            .strip_suffix('{')
            .ok_or_else(|| err(path, i, "type header must end with `{`"))?
            .trim();
        let (name, implements) = match rest.split_once(" implements ") {
            Some((n, list)) => (
                n.trim(),
                list.split(',').map(|s| s.trim().to_string()).collect(),
            ),
            None => (rest, BTreeSet::new()),
        };
        if name.is_empty() || name.contains(' ') {
            return Err(err(path, i, format!("bad type name `{name}`")));
        }
        let mut type_elem = CodeElement::new(kind, name);
        type_elem.annotations = annotations;
        type_elem.implements = implements;
        type_elem.owner_file = path.to_string();
        let type_index = out.elements.len();
        out.elements.push(ParsedElement {
            element: type_elem,
            start: type_start,
            end: type_start, // patched once the closing brace is seen
            body_start: i + 1,
        });
        i += 1;

        // members until the type's closing brace
        loop {
            if i >= lines.len() {
                return Err(err(path, lines.len() - 1, format!("unclosed type `{name}`")));
            }
            let l = lines[i].trim();
            if l == "}" {
                out.elements[type_index].end = i;
                i += 1;
                break;
            }
            if l.is_empty() {
                i += 1;
                continue;
            }
            let member = parse_member(path, &lines, &mut i, name)?;
            out.elements.push(member);
        }
    }
    Ok(out)
}

fn parse_member(
    path: &str,
    lines: &[&str],
    i: &mut usize,
    owner: &str,
) -> Result<ParsedElement, ParseError> {
    let start = *i;
    let mut annotations = BTreeSet::new();
    while lines[*i].trim().starts_with('@') {
        annotations.insert(lines[*i].trim()[1..].to_string());
        *i += 1;
        if *i >= lines.len() {
            return Err(err(path, *i - 1, "annotation at end of file"));
        }
    }
    let mut header = lines[*i].trim();
    let mut modifiers = BTreeSet::new();
    while let Some(rest) = header.strip_prefix("static ") {
        modifiers.insert("static".to_string());
        header = rest.trim_start();
    }

    let element = if let Some(rest) = header.strip_prefix("method ") {
        let rest = rest
            .strip_suffix('{')
            .ok_or_else(|| err(path, *i, "method header must end with `{`"))?
            .trim();
        let open = rest
            .find('(')
            .ok_or_else(|| err(path, *i, "method header needs `(`"))?;
        let close = rest
            .rfind(')')
            .ok_or_else(|| err(path, *i, "method header needs `)`"))?;
        if close < open {
            return Err(err(path, *i, "mismatched parentheses"));
        }
        let name = rest[..open].trim();
        let params: Vec<String> = rest[open + 1..close]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(ToString::to_string)
            .collect();
        let tail = rest[close + 1..].trim();
        let return_type = match tail.strip_prefix("->") {
            Some(r) => Some(r.trim().to_string()),
            None if tail.is_empty() => None,
            None => return Err(err(path, *i, format!("unexpected `{tail}` after params"))),
        };
        let mut e = CodeElement::new(ElementKind::Method, format!("{owner}.{name}"));
        e.param_types = params;
        e.return_type = return_type;
        e
    } else if let Some(rest) = header.strip_prefix("field ") {
        let name = rest
            .strip_suffix('{')
            .ok_or_else(|| err(path, *i, "field header must end with `{`"))?
            .trim();
        if name.is_empty() || name.contains(' ') {
            return Err(err(path, *i, format!("bad field name `{name}`")));
        }
        CodeElement::new(ElementKind::Field, format!("{owner}.{name}"))
    } else {
        return Err(err(path, *i, format!("expected member declaration, got `{header}`")));
    };

    let mut e = element;
    e.annotations = annotations;
    e.modifiers = modifiers;
    e.owner_file = path.to_string();
    *i += 1;
    let body_start = *i;

    let mut body = String::new();
    loop {
        if *i >= lines.len() {
            return Err(err(path, lines.len() - 1, "unclosed member"));
        }
        let l = lines[*i].trim();
        if l == "}" {
            break;
        }
        if !body.is_empty() {
            body.push('\n');
        }
        body.push_str(l);
        if let Some(target) = l.strip_prefix("calls ") {
            e.references.insert(target.trim().to_string());
        } else if let Some(rest) = l.strip_prefix("expect ") {
            if let Some(target) = rest.split_whitespace().next() {
                e.references.insert(target.to_string());
            }
        }
        *i += 1;
    }
    e.body = body;
    let end = *i;
    *i += 1;
    Ok(ParsedElement {
        element: e,
        start,
        end,
        body_start,
    })
}

/// A pluggable source parser. The built-in [`DslParser`] handles `.dsl`
/// files; adapters for real languages supply element manifests instead.
pub trait ParserAdapter {
    fn recognizes(&self, path: &str) -> bool;
    fn parse(&self, path: &str, content: &str) -> Result<Vec<CodeElement>, ParseError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DslParser;

impl ParserAdapter for DslParser {
    fn recognizes(&self, path: &str) -> bool {
        path.ends_with(DSL_EXT)
    }

    fn parse(&self, path: &str, content: &str) -> Result<Vec<CodeElement>, ParseError> {
        parse_file(path, content).map(ParsedFile::into_elements)
    }
}

/// Parses every file the adapter recognizes; per-file failures are recorded
/// and do not abort the rest of the tree.
pub fn parse_revision(
    tree: &SourceTree,
    adapter: &dyn ParserAdapter,
) -> (Vec<CodeElement>, Vec<ParseError>) {
    let mut elements = Vec::new();
    let mut errors = Vec::new();
    for (path, content) in tree.iter() {
        if !adapter.recognizes(path) {
            continue;
        }
        match adapter.parse(path, content) {
            Ok(mut es) => elements.append(&mut es),
            Err(e) => errors.push(e),
        }
    }
    (elements, errors)
}

// ---------------------------------------------------------------------------
// Rendering and surgical edits
// ---------------------------------------------------------------------------

/// Canonical source lines of one member (annotations, header, body, brace).
pub fn render_member(e: &CodeElement) -> Vec<String> {
    let mut lines = Vec::new();
    for a in &e.annotations {
        lines.push(format!("  @{a}"));
    }
    let stat = if e.modifiers.contains("static") { "static " } else { "" };
    match e.kind {
        ElementKind::Method => {
            let params = e.param_types.join(", ");
            let ret = e
                .return_type
                .as_ref()
                .map(|r| format!(" -> {r}"))
                .unwrap_or_default();
            lines.push(format!("  {stat}method {}({params}){ret} {{", e.simple_name));
        }
        ElementKind::Field => lines.push(format!("  {stat}field {} {{", e.simple_name)),
        _ => panic!("render_member only renders methods and fields"),
    }
    for b in e.body.lines() {
        lines.push(format!("    {b}"));
    }
    lines.push("  }".to_string());
    lines
}

/// Canonical header + closing brace of a type with no members.
pub fn render_type(e: &CodeElement) -> Vec<String> {
    let mut lines = Vec::new();
    for a in &e.annotations {
        lines.push(format!("@{a}"));
    }
    let kw = match e.kind {
        ElementKind::Class => "class",
        ElementKind::Interface => "interface",
        _ => panic!("render_type only renders classes and interfaces"),
    };
    if e.implements.is_empty() {
        lines.push(format!("{kw} {} {{", e.simple_name));
    } else {
        let list = e
            .implements
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(", ");
        lines.push(format!("{kw} {} implements {list} {{", e.simple_name));
    }
    lines.push("}".to_string());
    lines
}

fn join(lines: &[String]) -> String {
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditError {
    Parse(ParseError),
    MissingElement(String),
}

impl fmt::Display for EditError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditError::Parse(e) => write!(f, "edit target failed to parse: {e}"),
            EditError::MissingElement(q) => write!(f, "element `{q}` not found"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EditError {}

/// Inserts a member into its owner type in `content`, creating the type
/// block if absent. Untouched lines are preserved byte for byte.
pub fn insert_member(path: &str, content: &str, member: &CodeElement) -> Result<String, EditError> {
    let owner = member
        .owner_type()
        .ok_or_else(|| EditError::MissingElement(member.qualified_name.clone()))?;
    let parsed = parse_file(path, content).map_err(EditError::Parse)?;
    let mut lines: Vec<String> = content.lines().map(ToString::to_string).collect();
    match parsed.find(owner) {
        Some(t) => {
            // insert just before the type's closing brace
            let at = t.end;
            for (k, l) in render_member(member).into_iter().enumerate() {
                lines.insert(at + k, l);
            }
        }
        None => {
            let mut block = Vec::new();
            block.push(format!("class {owner} {{"));
            block.extend(render_member(member));
            block.push("}".to_string());
            lines.extend(block);
        }
    }
    Ok(join(&lines))
}

/// Creates a fresh file holding just this type (for types in the migration
/// set whose owner file does not exist in the target tree).
pub fn render_new_file(type_or_member: &CodeElement) -> String {
    match type_or_member.kind {
        ElementKind::Class | ElementKind::Interface => join(&render_type(type_or_member)),
        _ => {
            let owner = type_or_member.owner_type().unwrap_or("Orphan");
            let mut lines = Vec::new();
            lines.push(format!("class {owner} {{"));
            lines.extend(render_member(type_or_member));
            lines.push("}".to_string());
            join(&lines)
        }
    }
}

/// Replaces the existing member with the same qualified name, splicing only
/// its line span.
pub fn replace_member(path: &str, content: &str, member: &CodeElement) -> Result<String, EditError> {
    let parsed = parse_file(path, content).map_err(EditError::Parse)?;
    let target = parsed
        .find(&member.qualified_name)
        .ok_or_else(|| EditError::MissingElement(member.qualified_name.clone()))?;
    let (start, end) = (target.start, target.end);
    let mut lines: Vec<String> = content.lines().map(ToString::to_string).collect();
    let rendered = match member.kind {
        ElementKind::Method | ElementKind::Field => render_member(member),
        _ => {
            // replacing a type rewrites only its annotation/header lines;
            // member lines inside the block are untouched
            let mut r = render_type(member);
            r.pop();
            lines.splice(start..target.body_start, r);
            return Ok(join(&lines));
        }
    };
    lines.splice(start..=end, rendered);
    Ok(join(&lines))
}
