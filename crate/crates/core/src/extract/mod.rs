//! Rule-based extraction of node classes and their communication endpoints
//! from C++ sources and headers.
//!
//! The output is a [`NodeScan`], the JSON artifact handed to synthesis.
//! Extraction only looks at explicit syntax: class heads, base lists, and
//! the four rclcpp creation calls. Nothing is inferred from data flow, so
//! endpoints created through helper classes are reported but not attributed.

mod classes;
pub mod lexer;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::model::PortKind;

pub use classes::{detect_node_classes, extract_endpoints, resolve_chain, ChainResult, KnownClasses};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceLocation {
    pub file: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointRecord {
    pub kind: PortKind,
    pub declared_name: String,
    pub interface_type: String,
    #[serde(default)]
    pub handler: Option<String>,
    pub source_location: SourceLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeClassRecord {
    pub class_name: String,
    #[serde(default)]
    pub declared_node_name: Option<String>,
    pub files: Vec<String>,
    pub endpoints: Vec<EndpointRecord>,
    pub inheritance_chain: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeScan {
    pub repo_root: String,
    pub tool_version: String,
    pub nodes: Vec<NodeClassRecord>,
    pub warnings: Vec<String>,
}

impl NodeScan {
    pub fn node(&self, class_name: &str) -> Option<&NodeClassRecord> {
        self.nodes.iter().find(|n| n.class_name == class_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub max_inheritance_depth: usize,
    pub node_bases: Vec<String>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            include: vec!["**/*.{cpp,cc,cxx,hpp,hh,hxx,h}".into()],
            exclude: vec!["build/**".into(), "install/**".into(), "log/**".into(), "**/test/**".into()],
            max_inheritance_depth: 3,
            node_bases: vec!["rclcpp::Node".into()],
        }
    }
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("repository root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("invalid glob `{glob}`: {source}")]
    Glob {
        glob: String,
        #[source]
        source: globset::Error,
    },
    #[error("scan artifact is not valid at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("cannot serialize scan: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn glob_set(patterns: &[String]) -> Result<GlobSet, ScanError> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob = Glob::new(p).map_err(|source| ScanError::Glob {
            glob: p.clone(),
            source,
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|source| ScanError::Glob {
        glob: patterns.join(","),
        source,
    })
}

/// Lists files under `root` matching the include globs and none of the
/// exclude globs, as sorted `/`-separated relative paths.
pub fn select_files(root: &Path, include: &[String], exclude: &[String]) -> Result<Vec<String>, ScanError> {
    let include = glob_set(include)?;
    let exclude = glob_set(exclude)?;
    let mut out: Vec<String> = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let rel = e.path().strip_prefix(root).ok()?;
            let rel = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            (include.is_match(&rel) && !exclude.is_match(&rel)).then_some(rel)
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Scans a repository for node classes. Unreadable files are skipped with a
/// warning; the only fatal errors concern the root itself and the globs.
pub fn scan_repository(root: &Path, config: &ScanConfig) -> Result<NodeScan, ScanError> {
    if !root.is_dir() {
        return Err(ScanError::MissingRoot(root.to_path_buf()));
    }
    let files = select_files(root, &config.include, &config.exclude)?;
    let loaded: Vec<(String, Result<String, String>)> = files
        .par_iter()
        .map(|rel| {
            let text = std::fs::read(root.join(rel))
                .map_err(|e| e.to_string())
                .map(|bytes| String::from_utf8_lossy(&bytes).into_owned());
            (rel.clone(), text)
        })
        .collect();

    let mut warnings = Vec::new();
    let mut sources = Vec::new();
    for (rel, text) in loaded {
        match text {
            Ok(t) => sources.push((rel, t)),
            Err(e) => warnings.push(format!("{rel}: unreadable, skipped: {e}")),
        }
    }
    let (nodes, mut extraction_warnings) = classes::analyze_sources(&sources, config);
    warnings.append(&mut extraction_warnings);
    let warnings: Vec<String> = warnings.into_iter().collect::<BTreeSet<_>>().into_iter().collect();

    Ok(NodeScan {
        repo_root: root_label(root),
        tool_version: TOOL_VERSION.to_string(),
        nodes,
        warnings,
    })
}

/// Directory name of the root, so the artifact does not depend on where the
/// checkout lives.
fn root_label(root: &Path) -> String {
    root.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| ".".to_string())
}

/// Serializes with sorted keys and a trailing newline.
pub fn write_scan(scan: &NodeScan) -> Result<Vec<u8>, ScanError> {
    let value = serde_json::to_value(scan)?;
    let mut bytes = serde_json::to_vec_pretty(&value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn read_scan(bytes: &[u8]) -> Result<NodeScan, ScanError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| ScanError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Groups endpoint records by class name for lookups.
pub fn endpoints_by_class(scan: &NodeScan) -> BTreeMap<&str, &[EndpointRecord]> {
    scan.nodes
        .iter()
        .map(|n| (n.class_name.as_str(), n.endpoints.as_slice()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_nodes_key_is_named() {
        let err = read_scan(br#"{"repo_root": ".", "tool_version": "x", "warnings": []}"#).unwrap_err();
        assert!(err.to_string().contains("nodes"), "{err}");
    }

    #[test]
    fn nested_schema_error_carries_path() {
        let json = br#"{"repo_root": ".", "tool_version": "x", "warnings": [],
            "nodes": [{"class_name": "A", "files": ["a.cpp"], "inheritance_chain": [],
                       "endpoints": [{"kind": "Bogus", "declared_name": "t", "interface_type": "m",
                                      "source_location": {"file": "a.cpp", "line": 1}}]}]}"#;
        match read_scan(json).unwrap_err() {
            ScanError::Schema { path, .. } => assert_eq!(path, "nodes[0].endpoints[0].kind"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn keys_are_sorted() {
        let scan = NodeScan {
            repo_root: ".".into(),
            tool_version: "0".into(),
            nodes: vec![],
            warnings: vec![],
        };
        let text = String::from_utf8(write_scan(&scan).unwrap()).unwrap();
        let keys: Vec<_> = text.lines().skip(1).filter_map(|l| l.trim().split('"').nth(1)).collect();
        assert_eq!(keys, ["nodes", "repo_root", "tool_version", "warnings"]);
    }

    #[test]
    fn missing_root_is_fatal() {
        let err = scan_repository(Path::new("/definitely/not/here"), &ScanConfig::default()).unwrap_err();
        assert!(matches!(err, ScanError::MissingRoot(_)));
    }
}
