//! Launch and build configuration: parsing into [`LaunchSpec`]s and
//! resolution into [`ComposedClassifier`](crate::model::ComposedClassifier)
//! hierarchies.
//!
//! XML launch files are read with a real XML parser. Python launch files are
//! never executed; a fixed subset of launch constructs is recognized
//! syntactically and everything else is reported and skipped.

mod build;
mod python;
mod resolve;
mod xml;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub use build::{parse_build_config, BuildMap, ExecutableEntry, PackageIndex};
pub use resolve::{launch_stem, resolve_composition, ResolveOptions, Resolution};

/// One piece of a launch-time string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Lit(String),
    /// Value of a launch argument.
    Var(String),
    /// Share directory of a package.
    PkgShare(String),
    /// Directory of the launch file itself.
    ThisDir,
    /// Anything we do not evaluate. Carries a short description.
    Dynamic(String),
}

/// A string built from substitutions, resolved at composition time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Text(pub Vec<Segment>);

impl Text {
    pub fn lit(s: impl Into<String>) -> Text {
        Text(vec![Segment::Lit(s.into())])
    }

    pub fn dynamic(what: impl Into<String>) -> Text {
        Text(vec![Segment::Dynamic(what.into())])
    }

    pub fn concat(mut self, other: Text) -> Text {
        self.0.extend(other.0);
        self.merge_literals();
        self
    }

    fn merge_literals(&mut self) {
        let mut out: Vec<Segment> = Vec::with_capacity(self.0.len());
        for seg in self.0.drain(..) {
            match (out.last_mut(), seg) {
                (Some(Segment::Lit(prev)), Segment::Lit(s)) => prev.push_str(&s),
                (_, seg) => out.push(seg),
            }
        }
        self.0 = out;
    }

    /// Joins path pieces with `/`.
    pub fn join_path(parts: impl IntoIterator<Item = Text>) -> Text {
        let mut out = Text::default();
        for (i, part) in parts.into_iter().enumerate() {
            if i > 0 {
                out.0.push(Segment::Lit("/".into()));
            }
            out.0.extend(part.0);
        }
        out.merge_literals();
        out
    }

    pub fn as_literal(&self) -> Option<String> {
        let mut s = String::new();
        for seg in &self.0 {
            match seg {
                Segment::Lit(l) => s.push_str(l),
                _ => return None,
            }
        }
        Some(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub value: Text,
    /// `unless` rather than `if`.
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgDecl {
    pub name: String,
    pub default: Option<Text>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaunchAction {
    NodeInstantiation {
        package: Text,
        executable: Text,
        name: Option<Text>,
        namespace: Option<Text>,
        remappings: Vec<(Text, Text)>,
        condition: Option<Condition>,
        line: usize,
    },
    Include {
        target: Text,
        namespace: Option<Text>,
        /// Arguments passed to the included file.
        arguments: Vec<(String, Text)>,
        condition: Option<Condition>,
        line: usize,
    },
    NamespacePush {
        segment: Text,
        line: usize,
    },
    Group {
        children: Vec<LaunchAction>,
        /// Scoped groups restore the namespace stack on exit.
        scoped: bool,
        condition: Option<Condition>,
        line: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaunchSpec {
    /// Repository-relative, `/`-separated.
    pub path: String,
    pub arguments: Vec<ArgDecl>,
    pub actions: Vec<LaunchAction>,
    pub warnings: Vec<String>,
}

impl LaunchSpec {
    pub fn empty(path: impl Into<String>) -> Self {
        LaunchSpec {
            path: path.into(),
            arguments: Vec::new(),
            actions: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LaunchError {
    #[error("{path}: cannot read launch file: {message}")]
    Unreadable { path: String, message: String },
    #[error("{path}: not an XML or Python launch file")]
    UnknownFormat { path: String },
    #[error("{path}: malformed XML: {message}")]
    Xml { path: String, message: String },
    #[error("include cycle: {}", cycle.join(" -> "))]
    IncludeCycle { cycle: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaunchFormat {
    Xml,
    Python,
}

pub fn launch_format(path: &str) -> Option<LaunchFormat> {
    if path.ends_with(".xml") {
        Some(LaunchFormat::Xml)
    } else if path.ends_with(".py") {
        Some(LaunchFormat::Python)
    } else {
        None
    }
}

/// Parses one launch file. `path` is only used for labeling and to pick the
/// dialect.
pub fn parse_launch(path: &str, text: &str) -> Result<LaunchSpec, LaunchError> {
    match launch_format(path) {
        Some(LaunchFormat::Xml) => xml::parse(path, text),
        Some(LaunchFormat::Python) => Ok(python::parse(path, text)),
        None => Err(LaunchError::UnknownFormat { path: path.to_string() }),
    }
}

/// Repository-relative paths of every launch file: `*.launch.py`,
/// `*.launch.xml`, and any `.py`/`.xml` inside a `launch/` directory.
pub fn discover_launch_files(root: &Path) -> Vec<String> {
    let mut out: Vec<String> = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let rel = e.path().strip_prefix(root).ok()?;
            let parts: Vec<String> = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            if parts.iter().any(|p| matches!(p.as_str(), "build" | "install" | "log") || p.starts_with('.')) {
                return None;
            }
            let rel = parts.join("/");
            let name = parts.last()?;
            let in_launch_dir = parts.len() >= 2 && parts[parts.len() - 2] == "launch";
            let is_launch = name.ends_with(".launch.py")
                || name.ends_with(".launch.xml")
                || (in_launch_dir && launch_format(name).is_some());
            is_launch.then_some(rel)
        })
        .collect();
    out.sort();
    out
}

/// Reads and parses every file in `paths` (relative to `root`) in parallel.
pub fn load_launch_specs(root: &Path, paths: &[String]) -> Result<BTreeMap<String, LaunchSpec>, LaunchError> {
    use rayon::prelude::*;
    let parsed: Vec<Result<LaunchSpec, LaunchError>> = paths
        .par_iter()
        .map(|rel| {
            let text = std::fs::read_to_string(root.join(rel)).map_err(|e| LaunchError::Unreadable {
                path: rel.clone(),
                message: e.to_string(),
            })?;
            parse_launch(rel, &text)
        })
        .collect();
    let mut out = BTreeMap::new();
    for spec in parsed {
        let spec = spec?;
        out.insert(spec.path.clone(), spec);
    }
    Ok(out)
}

/// Parses `$(...)` substitutions in XML attribute values.
pub(crate) fn parse_substitutions(value: &str) -> Text {
    let mut out = Vec::new();
    let mut rest = value;
    while let Some(start) = rest.find("$(") {
        if start > 0 {
            out.push(Segment::Lit(rest[..start].to_string()));
        }
        let after = &rest[start + 2..];
        // substitutions can nest: $(var $(var x))
        let mut depth = 1;
        let mut end = None;
        let bytes = after.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'$' && bytes.get(i + 1) == Some(&b'(') {
                depth += 1;
                i += 2;
                continue;
            }
            if bytes[i] == b')' {
                depth -= 1;
                if depth == 0 {
                    end = Some(i);
                    break;
                }
            }
            i += 1;
        }
        let Some(end) = end else {
            out.push(Segment::Dynamic(format!("unterminated substitution in `{value}`")));
            rest = "";
            break;
        };
        let body = after[..end].trim();
        let mut words = body.split_whitespace();
        let kind = words.next().unwrap_or("");
        let args: Vec<&str> = words.collect();
        let seg = match (kind, args.as_slice()) {
            ("var", [name]) => Segment::Var(name.to_string()),
            ("find-pkg-share", [pkg]) => Segment::PkgShare(pkg.to_string()),
            ("dirname", []) => Segment::ThisDir,
            _ => Segment::Dynamic(format!("$({body})")),
        };
        out.push(seg);
        rest = &after[end + 1..];
    }
    if !rest.is_empty() {
        out.push(Segment::Lit(rest.to_string()));
    }
    let mut text = Text(out);
    text.merge_literals();
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_parsing() {
        let t = parse_substitutions("$(find-pkg-share skeleton)/launch/$(var which).launch.xml");
        assert_eq!(
            t.0,
            vec![
                Segment::PkgShare("skeleton".into()),
                Segment::Lit("/launch/".into()),
                Segment::Var("which".into()),
                Segment::Lit(".launch.xml".into()),
            ]
        );
        assert_eq!(parse_substitutions("plain").as_literal().as_deref(), Some("plain"));
        assert!(matches!(parse_substitutions("$(env HOME)").0[0], Segment::Dynamic(_)));
    }

    #[test]
    fn format_by_extension() {
        assert_eq!(launch_format("a/b.launch.py"), Some(LaunchFormat::Python));
        assert_eq!(launch_format("a/b.launch.xml"), Some(LaunchFormat::Xml));
        assert!(parse_launch("a.yaml", "").is_err());
    }

    #[test]
    fn path_join_merges_literals() {
        let t = Text::join_path([Text(vec![Segment::PkgShare("p".into())]), Text::lit("launch"), Text::lit("x.py")]);
        assert_eq!(t.0, vec![Segment::PkgShare("p".into()), Segment::Lit("/launch/x.py".into())]);
    }
}
