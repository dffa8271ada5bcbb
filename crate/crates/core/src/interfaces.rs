//! Loader for ROS 2 `.msg` and `.srv` interface definitions.
//!
//! Qualified names come from the directory layout: `<pkg>/msg/Num.msg`
//! becomes `pkg::msg::Num`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;
use walkdir::WalkDir;

use crate::model::{Field, MessageTypeDef, ServiceTypeDef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterfaceError {
    #[error("{path}: cannot derive a qualified name; expected <pkg>/{kind}/<Name>.{kind}")]
    Layout { path: String, kind: &'static str },
    #[error("{path}:{line}: malformed field line `{text}`")]
    MalformedLine { path: String, line: usize, text: String },
    #[error("{path}:{line}: duplicate field `{name}`")]
    DuplicateField { path: String, line: usize, name: String },
    #[error("{path}: expected exactly one `---` separator, found {found}")]
    Separator { path: String, found: usize },
}

fn qualified_name(path: &Path, kind: &'static str) -> Result<String, InterfaceError> {
    let err = || InterfaceError::Layout {
        path: path.display().to_string(),
        kind,
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(err)?;
    let dir = path.parent().ok_or_else(err)?;
    if dir.file_name().and_then(|s| s.to_str()) != Some(kind) {
        return Err(err());
    }
    let pkg = dir
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|s| s.to_str())
        .ok_or_else(err)?;
    Ok(format!("{pkg}::{kind}::{stem}"))
}

fn is_type_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '/' | '[' | ']' | '<' | '='))
}

fn is_field_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses field lines, skipping comments, blank lines, and constants.
/// `first_line` is the 1-based line number of `lines[0]` in the file.
fn parse_fields(path: &Path, lines: &[&str], first_line: usize) -> Result<Vec<Field>, InterfaceError> {
    let mut fields = Vec::new();
    let mut names = BTreeSet::new();
    for (offset, raw) in lines.iter().enumerate() {
        let line_no = first_line + offset;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let malformed = || InterfaceError::MalformedLine {
            path: path.display().to_string(),
            line: line_no,
            text: raw.trim().to_string(),
        };
        let mut tokens = line.split_whitespace();
        let field_type = tokens.next().ok_or_else(malformed)?;
        let rest = tokens.collect::<Vec<_>>().join(" ");
        if rest.is_empty() || !is_type_token(field_type) {
            return Err(malformed());
        }
        // constants: `int32 FOO=1` or `int32 FOO = 1`
        let (name_part, is_constant) = match rest.find('=') {
            Some(i) => (rest[..i].trim(), true),
            None => (rest.split_whitespace().next().unwrap_or(""), false),
        };
        if !is_field_name(name_part) {
            return Err(malformed());
        }
        if is_constant {
            continue;
        }
        if !names.insert(name_part.to_string()) {
            return Err(InterfaceError::DuplicateField {
                path: path.display().to_string(),
                line: line_no,
                name: name_part.to_string(),
            });
        }
        fields.push(Field::new(field_type, name_part));
    }
    Ok(fields)
}

pub fn parse_msg(path: &Path, text: &str) -> Result<MessageTypeDef, InterfaceError> {
    let qualified_name = qualified_name(path, "msg")?;
    let lines: Vec<&str> = text.lines().collect();
    Ok(MessageTypeDef {
        qualified_name,
        fields: parse_fields(path, &lines, 1)?,
    })
}

pub fn parse_srv(path: &Path, text: &str) -> Result<ServiceTypeDef, InterfaceError> {
    let qualified_name = qualified_name(path, "srv")?;
    let lines: Vec<&str> = text.lines().collect();
    let separators: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.trim() == "---")
        .map(|(i, _)| i)
        .collect();
    if separators.len() != 1 {
        return Err(InterfaceError::Separator {
            path: path.display().to_string(),
            found: separators.len(),
        });
    }
    let split = separators[0];
    Ok(ServiceTypeDef {
        qualified_name,
        request_fields: parse_fields(path, &lines[..split], 1)?,
        response_fields: parse_fields(path, &lines[split + 1..], split + 2)?,
    })
}

/// Every interface definition found under a repository root.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InterfaceSet {
    pub messages: BTreeMap<String, MessageTypeDef>,
    pub services: BTreeMap<String, ServiceTypeDef>,
    pub warnings: Vec<String>,
}

/// Legend entry for an interface type referenced by a port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeEntry {
    Message(MessageTypeDef),
    Service(ServiceTypeDef),
    /// Referenced but not defined in the scanned repository.
    External(String),
}

impl TypeEntry {
    pub fn name(&self) -> &str {
        match self {
            TypeEntry::Message(m) => &m.qualified_name,
            TypeEntry::Service(s) => &s.qualified_name,
            TypeEntry::External(n) => n,
        }
    }
}

impl InterfaceSet {
    pub fn contains(&self, qualified_name: &str) -> bool {
        self.messages.contains_key(qualified_name) || self.services.contains_key(qualified_name)
    }

    pub fn entry(&self, qualified_name: &str) -> TypeEntry {
        if let Some(m) = self.messages.get(qualified_name) {
            TypeEntry::Message(m.clone())
        } else if let Some(s) = self.services.get(qualified_name) {
            TypeEntry::Service(s.clone())
        } else {
            TypeEntry::External(qualified_name.to_string())
        }
    }

    pub fn entries_for<'a>(&self, types: impl IntoIterator<Item = &'a str>) -> Vec<TypeEntry> {
        let names: BTreeSet<&str> = types.into_iter().collect();
        names.into_iter().map(|n| self.entry(n)).collect()
    }
}

/// Walks `root` for `*/msg/*.msg` and `*/srv/*.srv`. Parse failures become
/// warnings so one bad file never blocks the rest.
pub fn load_interfaces(root: &Path) -> InterfaceSet {
    let mut set = InterfaceSet::default();
    let mut files: Vec<_> = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    for path in files {
        let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
        let ext = path.extension().and_then(|e| e.to_str());
        if !matches!(ext, Some("msg") | Some("srv")) {
            continue;
        }
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                set.warnings.push(format!("{}: unreadable: {e}", rel.display()));
                continue;
            }
        };
        let result = match ext {
            Some("msg") => parse_msg(&rel, &text).map(|m| {
                set.messages.insert(m.qualified_name.clone(), m);
            }),
            _ => parse_srv(&rel, &text).map(|s| {
                set.services.insert(s.qualified_name.clone(), s);
            }),
        };
        if let Err(e) = result {
            set.warnings.push(e.to_string());
        }
    }
    set
}
