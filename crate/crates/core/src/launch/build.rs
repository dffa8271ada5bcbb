//! Package discovery and executable-to-class mapping from CMake files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::extract::lexer::{skip_balanced, tokenize, TokenKind};
use crate::extract::NodeScan;

/// Package name to repository-relative package directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageIndex {
    pub packages: BTreeMap<String, String>,
}

impl PackageIndex {
    /// Every directory holding a `package.xml` or a `CMakeLists.txt` with a
    /// `project()` call is a package.
    pub fn discover(root: &Path) -> (PackageIndex, Vec<String>) {
        let mut index = PackageIndex::default();
        let mut warnings = Vec::new();
        for entry in WalkDir::new(root).sort_by_file_name().into_iter().filter_map(Result::ok) {
            let name = entry.file_name().to_string_lossy();
            if !entry.file_type().is_file() || (name != "package.xml" && name != "CMakeLists.txt") {
                continue;
            }
            let dir = entry.path().parent().unwrap_or(root);
            let rel = relative(root, dir);
            if rel.split('/').any(|p| matches!(p, "build" | "install" | "log")) {
                continue;
            }
            let Ok(text) = std::fs::read_to_string(entry.path()) else {
                warnings.push(format!("{rel}/{name}: unreadable"));
                continue;
            };
            let pkg = if name == "package.xml" {
                roxmltree::Document::parse(&text).ok().and_then(|doc| {
                    doc.root_element()
                        .children()
                        .find(|n| n.has_tag_name("name"))
                        .and_then(|n| n.text())
                        .map(|s| s.trim().to_string())
                })
            } else {
                cmake_project(&text)
            };
            if let Some(pkg) = pkg {
                match index.packages.get(&pkg) {
                    Some(existing) if existing != &rel => {
                        warnings.push(format!("package {pkg} declared in both {existing} and {rel}; keeping {existing}"))
                    }
                    _ => {
                        index.packages.insert(pkg, rel);
                    }
                }
            }
        }
        (index, warnings)
    }
}

fn relative(root: &Path, p: &Path) -> String {
    p.strip_prefix(root)
        .unwrap_or(p)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutableEntry {
    pub package: String,
    /// Repository-relative source that defines the node.
    pub entry_source: String,
    pub class_name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildMap {
    /// Keyed by (package, executable).
    pub executables: BTreeMap<(String, String), ExecutableEntry>,
    pub warnings: Vec<String>,
}

impl BuildMap {
    pub fn get(&self, package: &str, executable: &str) -> Option<&ExecutableEntry> {
        self.executables.get(&(package.to_string(), executable.to_string()))
    }
}

/// A parsed CMake command: name and whitespace-separated arguments.
fn cmake_commands(text: &str) -> Vec<(String, Vec<String>)> {
    let mut out = Vec::new();
    let stripped: String = text
        .lines()
        .map(|l| {
            // `#` inside quotes is rare in target declarations
            match l.find('#') {
                Some(i) => &l[..i],
                None => l,
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let bytes = stripped.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_alphabetic() || bytes[i] == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let name = stripped[start..i].to_ascii_lowercase();
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            if bytes.get(j) != Some(&b'(') {
                continue;
            }
            let mut depth = 0;
            let mut k = j;
            while k < bytes.len() {
                match bytes[k] {
                    b'(' => depth += 1,
                    b')' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                k += 1;
            }
            let body = &stripped[j + 1..k.min(stripped.len())];
            let args = body
                .split_whitespace()
                .map(|a| a.trim_matches('"').to_string())
                .filter(|a| !a.is_empty())
                .collect();
            out.push((name, args));
            i = k + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn cmake_project(text: &str) -> Option<String> {
    cmake_commands(text)
        .into_iter()
        .find(|(n, _)| n == "project")
        .and_then(|(_, a)| a.into_iter().next())
}

const SOURCE_EXTENSIONS: [&str; 3] = [".cpp", ".cc", ".cxx"];

/// Known node classes mentioned inside the body of `main` in `text`.
fn classes_in_main(text: &str, known: &BTreeSet<String>) -> Option<BTreeSet<String>> {
    let tokens = tokenize(text);
    let at = (0..tokens.len().saturating_sub(1)).find(|&i| {
        tokens[i].is_ident("main") && tokens[i + 1].is("(") && (i == 0 || !tokens[i - 1].is("::"))
    })?;
    let close = skip_balanced(&tokens, at + 1);
    let open = (close..tokens.len()).find(|&i| tokens[i].is("{") || tokens[i].is(";"))?;
    if !tokens[open].is("{") {
        return None;
    }
    let end = skip_balanced(&tokens, open);
    Some(
        tokens[open..end]
            .iter()
            .filter(|t| t.kind == TokenKind::Ident && known.contains(&t.text))
            .map(|t| t.text.clone())
            .collect(),
    )
}

/// Scans every `CMakeLists.txt` under `root` for executable targets and maps
/// each to the node class its `main` instantiates.
pub fn parse_build_config(root: &Path, scan: &NodeScan) -> BuildMap {
    let mut map = BuildMap::default();
    let known: BTreeSet<String> = scan.nodes.iter().map(|n| n.class_name.clone()).collect();
    let mut files: Vec<_> = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.file_name() == "CMakeLists.txt")
        .map(|e| e.into_path())
        .collect();
    files.sort();

    for file in files {
        let dir = file.parent().unwrap_or(root).to_path_buf();
        let rel_dir = relative(root, &dir);
        if rel_dir.split('/').any(|p| matches!(p, "build" | "install" | "log")) {
            continue;
        }
        let Ok(text) = std::fs::read_to_string(&file) else {
            map.warnings.push(format!("{rel_dir}/CMakeLists.txt: unreadable"));
            continue;
        };
        let commands = cmake_commands(&text);
        let Some(package) = commands.iter().find(|(n, _)| n == "project").and_then(|(_, a)| a.first().cloned()) else {
            continue;
        };
        let subst = |s: &str| s.replace("${PROJECT_NAME}", &package);
        let join = |src: &str| {
            if rel_dir.is_empty() {
                src.to_string()
            } else {
                format!("{rel_dir}/{src}")
            }
        };

        for (name, args) in &commands {
            match name.as_str() {
                "add_executable" | "ament_auto_add_executable" => {
                    let Some(exe) = args.first().map(|a| subst(a)) else { continue };
                    let sources: Vec<String> = args[1..]
                        .iter()
                        .map(|a| subst(a))
                        .filter(|a| SOURCE_EXTENSIONS.iter().any(|ext| a.ends_with(ext)))
                        .collect();
                    let mut found: BTreeMap<String, String> = BTreeMap::new();
                    let mut saw_main = false;
                    for src in &sources {
                        let Ok(code) = std::fs::read_to_string(dir.join(src)) else {
                            map.warnings.push(format!("{package}/{exe}: source {src} unreadable"));
                            continue;
                        };
                        if let Some(classes) = classes_in_main(&code, &known) {
                            saw_main = true;
                            for c in classes {
                                found.entry(c).or_insert_with(|| join(src));
                            }
                        }
                    }
                    match found.len() {
                        1 => {
                            let (class_name, entry_source) = found.into_iter().next().unwrap();
                            insert(&mut map, &package, &exe, entry_source, class_name);
                        }
                        0 if !saw_main => map
                            .warnings
                            .push(format!("{package}/{exe}: no main function in its sources; excluded")),
                        0 => map
                            .warnings
                            .push(format!("{package}/{exe}: main instantiates no known node class; excluded")),
                        _ => map.warnings.push(format!(
                            "{package}/{exe}: main instantiates several node classes ({}); excluded",
                            found.keys().cloned().collect::<Vec<_>>().join(", ")
                        )),
                    }
                }
                "rclcpp_components_register_node" | "rclcpp_components_register_nodes" => {
                    let plugin = args.iter().position(|a| a == "PLUGIN").and_then(|i| args.get(i + 1));
                    let exe = args.iter().position(|a| a == "EXECUTABLE").and_then(|i| args.get(i + 1));
                    let (Some(plugin), Some(exe)) = (plugin, exe) else { continue };
                    let class = plugin.rsplit("::").next().unwrap_or(plugin).to_string();
                    match scan.node(&class) {
                        Some(record) => {
                            let source = record.files.first().cloned().unwrap_or_default();
                            insert(&mut map, &package, &subst(exe), source, class);
                        }
                        None => map.warnings.push(format!(
                            "{package}/{}: plugin {plugin} is not a scanned node class; excluded",
                            subst(exe)
                        )),
                    }
                }
                _ => {}
            }
        }
    }
    map
}

fn insert(map: &mut BuildMap, package: &str, exe: &str, entry_source: String, class_name: String) {
    let key = (package.to_string(), exe.to_string());
    if map.executables.contains_key(&key) {
        map.warnings.push(format!("{package}/{exe}: declared twice; keeping the first"));
        return;
    }
    map.executables.insert(
        key,
        ExecutableEntry {
            package: package.to_string(),
            entry_source,
            class_name,
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::NodeClassRecord;

    fn scan_with(classes: &[&str]) -> NodeScan {
        NodeScan {
            repo_root: ".".into(),
            tool_version: "test".into(),
            nodes: classes
                .iter()
                .map(|c| NodeClassRecord {
                    class_name: c.to_string(),
                    declared_node_name: None,
                    files: vec![format!("pkg/src/{c}.cpp")],
                    endpoints: vec![],
                    inheritance_chain: vec![c.to_string(), "rclcpp::Node".into()],
                })
                .collect(),
            warnings: vec![],
        }
    }

    fn write(dir: &Path, rel: &str, text: &str) {
        let p = dir.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, text).unwrap();
    }

    #[test]
    fn executables_map_to_classes() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        write(
            root,
            "pkg/CMakeLists.txt",
            "cmake_minimum_required(VERSION 3.8)\nproject(pkg)\n# add_executable(commented src/x.cpp)\nadd_executable(foo_exe src/foo.cpp)\nadd_executable(${PROJECT_NAME}_bar\n  src/bar.cpp)\nadd_executable(none src/none.cpp)\nadd_executable(both src/both.cpp)\n",
        );
        write(root, "pkg/src/foo.cpp", "class FooNode; int main(int argc, char **argv) { rclcpp::spin(std::make_shared<FooNode>()); }");
        write(root, "pkg/src/bar.cpp", "int main() { auto n = std::make_shared<BarNode>(); }");
        write(root, "pkg/src/none.cpp", "int main() { return 0; }");
        write(root, "pkg/src/both.cpp", "int main() { FooNode a; BarNode b; }");
        let map = parse_build_config(root, &scan_with(&["FooNode", "BarNode"]));
        assert_eq!(map.get("pkg", "foo_exe").unwrap().class_name, "FooNode");
        assert_eq!(map.get("pkg", "foo_exe").unwrap().entry_source, "pkg/src/foo.cpp");
        assert_eq!(map.get("pkg", "pkg_bar").unwrap().class_name, "BarNode");
        assert!(map.get("pkg", "none").is_none());
        assert!(map.get("pkg", "both").is_none());
        assert!(map.get("pkg", "commented").is_none());
        assert_eq!(map.executables.len(), 2);
        assert_eq!(map.warnings.len(), 2, "{:?}", map.warnings);
    }

    #[test]
    fn component_registration() {
        let tmp = tempfile::tempdir().unwrap();
        write(
            tmp.path(),
            "CMakeLists.txt",
            "project(comp)\nrclcpp_components_register_node(comp_lib PLUGIN \"comp::Worker\" EXECUTABLE worker)\n",
        );
        let map = parse_build_config(tmp.path(), &scan_with(&["Worker"]));
        assert_eq!(map.get("comp", "worker").unwrap().class_name, "Worker");
    }

    #[test]
    fn package_discovery() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "a/package.xml", "<package format=\"3\"><name> alpha </name></package>");
        write(tmp.path(), "b/CMakeLists.txt", "project(beta CXX)");
        let (index, warnings) = PackageIndex::discover(tmp.path());
        assert!(warnings.is_empty());
        assert_eq!(index.packages.get("alpha").map(String::as_str), Some("a"));
        assert_eq!(index.packages.get("beta").map(String::as_str), Some("b"));
    }
}
