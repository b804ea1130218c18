//! Element manifest wire format.
//!
//! Parser adapters for real languages run as external commands and hand the
//! element set back as a manifest plus a sidecar body store. The manifest is
//! line-oriented; records are grouped under `FILE <path>` sections:
//!
//! ```text
//! FILE src/main/Printer.dsl
//! METHOD Printer.format string Calendar,TimeZone <body-hash> Cache.pattern Override
//! FIELD Printer.cache - - <body-hash> - -
//! ```
//!
//! Field order per record: kind, qualified name, return type, param types,
//! body hash, references, annotations; `-` stands for empty. Tokens are
//! percent-escaped so arbitrary names round-trip byte-exactly. The body
//! store maps body hashes to body texts. Modifiers and implemented
//! interfaces ride in the annotations column with `mod:`/`impl:` prefixes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use sha2::{Digest, Sha256};

use crate::model::{CodeElement, ElementKind};

/// Content hash used to key the body store (truncated SHA-256, hex).
pub fn body_hash(body: &str) -> String {
    let digest = Sha256::digest(body.as_bytes());
    let mut out = String::with_capacity(32);
    for b in &digest[..16] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn escape(token: &str) -> String {
    if token.is_empty() {
        return "%e".to_string();
    }
    let mut out = String::with_capacity(token.len());
    for c in token.chars() {
        match c {
            '%' => out.push_str("%p"),
            ' ' => out.push_str("%s"),
            ',' => out.push_str("%c"),
            '\n' => out.push_str("%n"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(token: &str) -> Result<String, ManifestError> {
    if token == "%e" {
        return Ok(String::new());
    }
    let mut out = String::with_capacity(token.len());
    let mut chars = token.chars();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('p') => out.push('%'),
            Some('s') => out.push(' '),
            Some('c') => out.push(','),
            Some('n') => out.push('\n'),
            other => {
                return Err(ManifestError::new(format!(
                    "bad escape `%{}`",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestError {
    pub message: String,
}

impl ManifestError {
    fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "manifest error: {}", self.message)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ManifestError {}

fn list_column<'a, I: Iterator<Item = &'a str>>(items: I) -> String {
    let joined: Vec<String> = items.map(escape).collect();
    if joined.is_empty() {
        "-".to_string()
    } else {
        joined.join(",")
    }
}

fn parse_list(column: &str) -> Result<Vec<String>, ManifestError> {
    if column == "-" {
        return Ok(Vec::new());
    }
    column.split(',').map(unescape).collect()
}

/// Renders the element set as `(manifest, body store)` strings. Elements are
/// grouped by owner file and sorted, so equal element sets always render to
/// identical bytes.
pub fn encode(elements: &[CodeElement]) -> (String, String) {
    let mut by_file: BTreeMap<&str, Vec<&CodeElement>> = BTreeMap::new();
    for e in elements {
        by_file.entry(e.owner_file.as_str()).or_default().push(e);
    }
    let mut manifest = String::new();
    let mut bodies: BTreeMap<String, &str> = BTreeMap::new();
    for (file, mut es) in by_file {
        es.sort_by(|a, b| a.qualified_name.cmp(&b.qualified_name));
        manifest.push_str(&format!("FILE {}\n", escape(file)));
        for e in es {
            let hash = body_hash(&e.body);
            bodies.insert(hash.clone(), &e.body);
            let mut annos: Vec<String> = e.annotations.iter().cloned().collect();
            annos.extend(e.modifiers.iter().map(|m| format!("mod:{m}")));
            annos.extend(e.implements.iter().map(|i| format!("impl:{i}")));
            manifest.push_str(&format!(
                "{} {} {} {} {} {} {}\n",
                e.kind,
                escape(&e.qualified_name),
                e.return_type.as_deref().map(escape).unwrap_or_else(|| "-".into()),
                list_column(e.param_types.iter().map(String::as_str)),
                hash,
                list_column(e.references.iter().map(String::as_str)),
                list_column(annos.iter().map(String::as_str)),
            ));
        }
    }
    let mut store = String::new();
    for (hash, body) in bodies {
        store.push_str(&format!("BODY {hash} {}\n", body.len()));
        store.push_str(body);
        store.push('\n');
    }
    (manifest, store)
}

/// Parses a body store into hash → body.
pub fn decode_bodies(store: &str) -> Result<BTreeMap<String, String>, ManifestError> {
    let mut out = BTreeMap::new();
    let bytes = store.as_bytes();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let line_end = store[pos..]
            .find('\n')
            .map(|o| pos + o)
            .ok_or_else(|| ManifestError::new("truncated body header"))?;
        let header = &store[pos..line_end];
        let mut parts = header.split(' ');
        if parts.next() != Some("BODY") {
            return Err(ManifestError::new(format!("expected BODY, got `{header}`")));
        }
        let hash = parts
            .next()
            .ok_or_else(|| ManifestError::new("missing body hash"))?
            .to_string();
        let len: usize = parts
            .next()
            .and_then(|l| l.parse().ok())
            .ok_or_else(|| ManifestError::new("missing body length"))?;
        let body_start = line_end + 1;
        let body_end = body_start + len;
        if body_end > bytes.len() {
            return Err(ManifestError::new("body length overruns store"));
        }
        let body = store
            .get(body_start..body_end)
            .ok_or_else(|| ManifestError::new("body is not valid UTF-8 at boundary"))?;
        out.insert(hash, body.to_string());
        pos = body_end + 1; // trailing newline after each body
    }
    Ok(out)
}

/// Parses a manifest back into elements, resolving bodies from the store.
pub fn decode(manifest: &str, store: &str) -> Result<Vec<CodeElement>, ManifestError> {
    let bodies = decode_bodies(store)?;
    let mut out = Vec::new();
    let mut current_file = String::new();
    for (lineno, line) in manifest.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        if let Some(f) = line.strip_prefix("FILE ") {
            current_file = unescape(f.trim())?;
            continue;
        }
        let cols: Vec<&str> = line.split(' ').collect();
        if cols.len() != 7 {
            return Err(ManifestError::new(format!(
                "line {}: expected 7 columns, got {}",
                lineno + 1,
                cols.len()
            )));
        }
        let kind = match cols[0] {
            "CLASS" => ElementKind::Class,
            "INTERFACE" => ElementKind::Interface,
            "METHOD" => ElementKind::Method,
            "FIELD" => ElementKind::Field,
            other => return Err(ManifestError::new(format!("unknown kind `{other}`"))),
        };
        let mut e = CodeElement::new(kind, unescape(cols[1])?);
        e.owner_file = current_file.clone();
        e.return_type = if cols[2] == "-" {
            None
        } else {
            Some(unescape(cols[2])?)
        };
        e.param_types = parse_list(cols[3])?;
        e.body = bodies
            .get(cols[4])
            .cloned()
            .ok_or_else(|| ManifestError::new(format!("body `{}` missing from store", cols[4])))?;
        e.references = parse_list(cols[5])?.into_iter().collect();
        let mut annotations = BTreeSet::new();
        for a in parse_list(cols[6])? {
            if let Some(m) = a.strip_prefix("mod:") {
                e.modifiers.insert(m.to_string());
            } else if let Some(i) = a.strip_prefix("impl:") {
                e.implements.insert(i.to_string());
            } else {
                annotations.insert(a);
            }
        }
        e.annotations = annotations;
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_elements() -> Vec<CodeElement> {
        let mut class = CodeElement::new(ElementKind::Class, "Printer");
        class.owner_file = "src/Printer.dsl".into();
        class.implements.insert("Output".into());
        let mut m = CodeElement::new(ElementKind::Method, "Printer.format");
        m.owner_file = "src/Printer.dsl".into();
        m.param_types = alloc::vec!["Calendar".into(), "Time Zone".into()];
        m.return_type = Some("string".into());
        m.body = "calls Cache.pattern\nline render, with commas & 100%".into();
        m.references.insert("Cache.pattern".into());
        m.annotations.insert("Override".into());
        m.modifiers.insert("static".into());
        alloc::vec![class, m]
    }

    #[test]
    fn round_trips_bit_exactly() {
        let elements = sample_elements();
        let (manifest, store) = encode(&elements);
        let decoded = decode(&manifest, &store).unwrap();
        let mut sorted = elements.clone();
        sorted.sort_by(|a, b| a.qualified_name.cmp(&b.qualified_name));
        assert_eq!(decoded, sorted);
        // re-encoding the decoded set reproduces identical bytes
        let (manifest2, store2) = encode(&decoded);
        assert_eq!(manifest, manifest2);
        assert_eq!(store, store2);
    }

    #[test]
    fn missing_body_is_an_error() {
        let (manifest, _) = encode(&sample_elements());
        assert!(decode(&manifest, "").is_err());
    }
}
