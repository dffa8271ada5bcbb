use roxmltree::{Document, Node};

use super::{parse_substitutions, ArgDecl, Condition, LaunchAction, LaunchError, LaunchSpec, Text};

pub(super) fn parse(path: &str, text: &str) -> Result<LaunchSpec, LaunchError> {
    let doc = Document::parse(text).map_err(|e| LaunchError::Xml {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    let mut spec = LaunchSpec::empty(path);
    if root.tag_name().name() != "launch" {
        spec.warnings
            .push(format!("{path}: root element is <{}>, expected <launch>", root.tag_name().name()));
    }
    spec.actions = children(path, &doc, root, &mut spec.arguments, &mut spec.warnings);
    Ok(spec)
}

fn line_of(doc: &Document, node: Node) -> usize {
    doc.text_pos_at(node.range().start).row as usize
}

fn attr(node: Node, names: &[&str]) -> Option<Text> {
    names.iter().find_map(|n| node.attribute(*n)).map(parse_substitutions)
}

fn condition(node: Node) -> Option<Condition> {
    if let Some(v) = node.attribute("if") {
        return Some(Condition {
            value: parse_substitutions(v),
            negated: false,
        });
    }
    node.attribute("unless").map(|v| Condition {
        value: parse_substitutions(v),
        negated: true,
    })
}

fn children(
    path: &str,
    doc: &Document,
    parent: Node,
    args: &mut Vec<ArgDecl>,
    warnings: &mut Vec<String>,
) -> Vec<LaunchAction> {
    let mut out = Vec::new();
    for node in parent.children().filter(|n| n.is_element()) {
        let line = line_of(doc, node);
        match node.tag_name().name() {
            "arg" | "let" => {
                let Some(name) = node.attribute("name") else {
                    warnings.push(format!("{path}:{line}: <{}> without name", node.tag_name().name()));
                    continue;
                };
                let default = if node.tag_name().name() == "let" {
                    attr(node, &["value"])
                } else {
                    attr(node, &["default"])
                };
                args.push(ArgDecl {
                    name: name.to_string(),
                    default,
                });
            }
            "node" => {
                let (Some(package), Some(executable)) = (attr(node, &["pkg", "package"]), attr(node, &["exec", "executable"]))
                else {
                    warnings.push(format!("{path}:{line}: <node> without pkg/exec; skipped"));
                    continue;
                };
                let mut remappings = Vec::new();
                for child in node.children().filter(|n| n.is_element()) {
                    match child.tag_name().name() {
                        "remap" => match (child.attribute("from"), child.attribute("to")) {
                            (Some(f), Some(t)) => remappings.push((parse_substitutions(f), parse_substitutions(t))),
                            _ => warnings.push(format!("{path}:{}: <remap> needs from and to", line_of(doc, child))),
                        },
                        "param" | "env" => {}
                        other => warnings.push(format!(
                            "{path}:{}: unsupported <{other}> inside <node>; skipped",
                            line_of(doc, child)
                        )),
                    }
                }
                out.push(LaunchAction::NodeInstantiation {
                    package,
                    executable,
                    name: attr(node, &["name"]),
                    namespace: attr(node, &["namespace", "ns"]),
                    remappings,
                    condition: condition(node),
                    line,
                });
            }
            "include" => {
                let Some(target) = attr(node, &["file"]) else {
                    warnings.push(format!("{path}:{line}: <include> without file; skipped"));
                    continue;
                };
                let arguments = node
                    .children()
                    .filter(|n| n.is_element() && n.tag_name().name() == "arg")
                    .filter_map(|a| Some((a.attribute("name")?.to_string(), parse_substitutions(a.attribute("value")?))))
                    .collect();
                out.push(LaunchAction::Include {
                    target,
                    namespace: attr(node, &["namespace", "ns"]),
                    arguments,
                    condition: condition(node),
                    line,
                });
            }
            "group" => {
                let mut inner = Vec::new();
                if let Some(ns) = attr(node, &["ns", "namespace"]) {
                    inner.push(LaunchAction::NamespacePush { segment: ns, line });
                }
                inner.extend(children(path, doc, node, args, warnings));
                let scoped = node.attribute("scoped").map(|s| s != "false").unwrap_or(true);
                out.push(LaunchAction::Group {
                    children: inner,
                    scoped,
                    condition: condition(node),
                    line,
                });
            }
            "push-ros-namespace" | "push_ros_namespace" => match attr(node, &["namespace", "ns"]) {
                Some(segment) => out.push(LaunchAction::NamespacePush { segment, line }),
                None => warnings.push(format!("{path}:{line}: <push-ros-namespace> without namespace; skipped")),
            },
            other => warnings.push(format!("{path}:{line}: unsupported construct <{other}>; skipped")),
        }
    }
    out
}
