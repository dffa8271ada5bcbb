use std::collections::{BTreeMap, BTreeSet};

use super::{Header, Issue, Meta, ParsedDiagram, PumlError, KNOWN_STEREOTYPES, SERVICE_STEREOTYPE, TOPIC_STEREOTYPE};
use crate::interfaces::TypeEntry;
use crate::model::{
    split_namespace, AtomicClassifier, ClassifierKind, ComposedClassifier, Endpoint, ExternalPort, Field,
    MessageTypeDef, Model, NamespaceScope, NodePart, PartPort, Port, PortKind, ServiceBinding, ServiceTypeDef,
    TopicBinding, ATOMIC_STEREOTYPE, COMPOSED_STEREOTYPE, NAMESPACE_STEREOTYPE, PART_STEREOTYPE,
};

const ELEMENT_KEYWORDS: [&str; 14] = [
    "component",
    "rectangle",
    "package",
    "frame",
    "node",
    "folder",
    "cloud",
    "queue",
    "interface",
    "portin",
    "portout",
    "port",
    "collections",
    "database",
];

const IGNORED_PREFIXES: [&str; 12] = [
    "left to right direction",
    "top to bottom direction",
    "hide ",
    "show ",
    "title ",
    "caption ",
    "scale ",
    "allowmixing",
    "set separator",
    "!",
    "skinparam ",
    "footer ",
];

#[derive(Debug, Clone)]
struct Element {
    label: String,
    alias: String,
    stereotypes: Vec<String>,
    line: usize,
    parent: Option<usize>,
    children: Vec<usize>,
}

#[derive(Debug, Default)]
struct Doc {
    elements: Vec<Element>,
    links: Vec<(String, String, usize)>,
    notes: Vec<(String, String)>,
    meta: Meta,
    header: Header,
    legend: Vec<TypeEntry>,
}

struct Ctx {
    strict: bool,
    issues: Vec<Issue>,
}

impl Ctx {
    fn stereotype(&mut self, line: usize, s: &str) -> Result<(), PumlError> {
        if KNOWN_STEREOTYPES.contains(&s) {
            return Ok(());
        }
        if self.strict {
            return Err(PumlError::new(line, format!("unknown stereotype <<{s}>>")));
        }
        self.issues.push(Issue::UnknownStereotype {
            line,
            stereotype: s.to_string(),
        });
        Ok(())
    }

    fn malformed(&mut self, line: usize, label: &str, expected: &'static str) -> Result<(), PumlError> {
        if self.strict {
            return Err(PumlError::new(line, format!("label `{label}` does not match `{expected}`")));
        }
        self.issues.push(Issue::MalformedLabel {
            line,
            label: label.to_string(),
            expected,
        });
        Ok(())
    }
}

/// Splits on whitespace, keeping double-quoted runs (with `\"` escapes)
/// together. Quotes are removed.
fn split_quoted(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut chars = s.chars().peekable();
    let mut has = false;
    while let Some(c) = chars.next() {
        match c {
            '\\' if in_quotes => {
                if let Some(n) = chars.next() {
                    cur.push(n);
                }
            }
            '"' => {
                in_quotes = !in_quotes;
                has = true;
            }
            c if c.is_whitespace() && !in_quotes => {
                if has || !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                    has = false;
                }
            }
            c => cur.push(c),
        }
    }
    if has || !cur.is_empty() {
        out.push(cur);
    }
    out
}

struct ElementHead {
    label: String,
    alias: String,
    stereotypes: Vec<String>,
    opens: bool,
}

fn parse_element_head(rest: &str, line: usize) -> Result<ElementHead, PumlError> {
    let mut s = rest.trim();
    let opens = s.ends_with('{');
    if opens {
        s = s[..s.len() - 1].trim_end();
    }
    let mut stereotypes = Vec::new();
    let mut label = None;
    let mut words: Vec<String> = Vec::new();
    let mut i = 0;
    let chars: Vec<char> = s.chars().collect();
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '"' {
            let mut j = i + 1;
            let mut text = String::new();
            while j < chars.len() && chars[j] != '"' {
                text.push(chars[j]);
                j += 1;
            }
            if j >= chars.len() {
                return Err(PumlError::new(line, "unterminated quoted label"));
            }
            if label.is_none() {
                label = Some(text);
            } else {
                words.push(text);
            }
            i = j + 1;
        } else if c == '[' && label.is_none() {
            let end = chars[i..].iter().position(|&c| c == ']').map(|p| i + p);
            let Some(end) = end else {
                return Err(PumlError::new(line, "unterminated [label]"));
            };
            label = Some(chars[i + 1..end].iter().collect());
            i = end + 1;
        } else if c == '<' && chars.get(i + 1) == Some(&'<') {
            let mut j = i + 2;
            while j + 1 < chars.len() && !(chars[j] == '>' && chars[j + 1] == '>') {
                j += 1;
            }
            if j + 1 >= chars.len() {
                return Err(PumlError::new(line, "unterminated stereotype"));
            }
            stereotypes.push(chars[i + 2..j].iter().collect::<String>().trim().to_string());
            i = j + 2;
        } else if c == '#' {
            // color or line style
            while i < chars.len() && !chars[i].is_whitespace() {
                i += 1;
            }
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '<' && chars[i] != '"' && chars[i] != '#' {
                i += 1;
            }
            words.push(chars[start..i].iter().collect());
        }
    }
    // forms: "Label" as Alias | Alias as "Label" | Alias | "Label"
    let (label, alias) = match (label, words.as_slice()) {
        (Some(l), [as_kw, alias]) if as_kw == "as" => (l, alias.clone()),
        (Some(l), [alias, as_kw]) if as_kw == "as" => (l, alias.clone()),
        (Some(l), []) => (l.clone(), l),
        (None, [name]) => (name.clone(), name.clone()),
        (None, [name, as_kw, alias]) if as_kw == "as" => (name.clone(), alias.clone()),
        _ => return Err(PumlError::new(line, format!("cannot read element declaration `{rest}`"))),
    };
    Ok(ElementHead {
        label,
        alias,
        stereotypes,
        opens,
    })
}

fn is_arrow(tok: &str) -> bool {
    let body = tok.trim_start_matches('<').trim_end_matches('>');
    (tok.contains('-') || tok.contains("..")) && !body.is_empty() && body.starts_with(['-', '.']) && body.ends_with(['-', '.'])
}

/// Returns (from, to) for a link statement.
fn parse_link(stmt: &str) -> Option<(String, String)> {
    let stmt = match stmt.find(" : ").or_else(|| stmt.rfind(':').filter(|&i| !stmt[..i].ends_with(':')).filter(|_| !stmt.contains("::"))) {
        Some(i) => stmt[..i].trim(),
        None => stmt.trim(),
    };
    let toks = split_quoted(stmt);
    let (left, arrow, right) = match toks.as_slice() {
        [l, a, r] if is_arrow(a) => (l.clone(), a.clone(), r.clone()),
        [one] => {
            let pos = ["-->", "->", "..>", "<--", "<-", "--", ".."].iter().find_map(|a| one.find(a).map(|p| (p, *a)))?;
            let (p, a) = pos;
            (one[..p].to_string(), a.to_string(), one[p + a.len()..].to_string())
        }
        _ => return None,
    };
    if left.is_empty() || right.is_empty() {
        return None;
    }
    if arrow.starts_with('<') && !arrow.ends_with('>') {
        Some((right, left))
    } else {
        Some((left, right))
    }
}

fn parse_meta_line(body: &str, line: usize, meta: &mut Meta) -> Result<(), PumlError> {
    let toks = split_quoted(body);
    let Some((alias, pairs)) = toks.split_first() else {
        return Err(PumlError::new(line, "empty metadata line"));
    };
    let entry = meta.entry(alias.clone()).or_default();
    for pair in pairs {
        let Some((k, v)) = pair.split_once('=') else {
            return Err(PumlError::new(line, format!("metadata `{pair}` is not key=value")));
        };
        entry.insert(k.to_string(), v.to_string());
    }
    Ok(())
}

fn parse_legend(lines: &[&str]) -> Vec<TypeEntry> {
    let mut out = Vec::new();
    let mut current: Option<TypeEntry> = None;
    let mut response = false;
    for raw in lines {
        let l = raw.trim();
        let words: Vec<&str> = l.split_whitespace().collect();
        match words.as_slice() {
            ["MessageType", name] | ["ServiceType", name] | ["ExternalType", name] => {
                if let Some(t) = current.take() {
                    out.push(t);
                }
                response = false;
                current = Some(match words[0] {
                    "MessageType" => TypeEntry::Message(MessageTypeDef {
                        qualified_name: name.to_string(),
                        fields: vec![],
                    }),
                    "ServiceType" => TypeEntry::Service(ServiceTypeDef {
                        qualified_name: name.to_string(),
                        request_fields: vec![],
                        response_fields: vec![],
                    }),
                    _ => TypeEntry::External(name.to_string()),
                });
            }
            ["---"] => response = true,
            [ty, name] => match current.as_mut() {
                Some(TypeEntry::Message(m)) => m.fields.push(Field::new(*ty, *name)),
                Some(TypeEntry::Service(s)) if response => s.response_fields.push(Field::new(*ty, *name)),
                Some(TypeEntry::Service(s)) => s.request_fields.push(Field::new(*ty, *name)),
                _ => {}
            },
            _ => {}
        }
    }
    if let Some(t) = current {
        out.push(t);
    }
    out
}

fn read_doc(text: &str, ctx: &mut Ctx) -> Result<Doc, PumlError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut doc = Doc::default();
    let mut stack: Vec<usize> = Vec::new();
    let mut started = false;
    let mut ended = false;
    let mut i = 0;
    let block = |lines: &[&str], from: usize, ends: &[&str]| -> Option<usize> {
        (from + 1..lines.len()).find(|&j| {
            let t = lines[j].trim().to_ascii_lowercase();
            ends.iter().any(|e| t == *e)
        })
    };
    while i < lines.len() {
        let line_no = i + 1;
        let l = lines[i].trim();
        i += 1;
        if l.is_empty() || ended {
            continue;
        }
        if l.starts_with("@startuml") {
            started = true;
            continue;
        }
        if l.starts_with("@enduml") {
            ended = true;
            continue;
        }
        if !started {
            return Err(PumlError::new(line_no, "content before @startuml"));
        }
        if let Some(body) = l.strip_prefix("'@") {
            if let Some(body) = body.strip_prefix(' ') {
                parse_meta_line(body, line_no, &mut doc.meta)?;
            } else {
                let (k, v) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
                doc.header.lines.push((k.to_string(), v.trim().to_string()));
            }
            continue;
        }
        if l.starts_with('\'') {
            continue;
        }
        if let Some(rest) = l.strip_prefix("/'") {
            if !rest.contains("'/") {
                let end = (i..lines.len()).find(|&j| lines[j].contains("'/"));
                match end {
                    Some(e) => i = e + 1,
                    None => return Err(PumlError::new(line_no, "unterminated block comment")),
                }
            }
            continue;
        }
        let lower = l.to_ascii_lowercase();
        if lower == "legend" || lower.starts_with("legend ") {
            let Some(end) = block(&lines, i - 1, &["endlegend", "end legend"]) else {
                return Err(PumlError::new(line_no, "legend block is not closed"));
            };
            doc.legend.extend(parse_legend(&lines[i..end]));
            i = end + 1;
            continue;
        }
        if lower.starts_with("skinparam") && l.ends_with('{') || lower == "<style>" {
            let ends: &[&str] = if lower == "<style>" { &["</style>"] } else { &["}"] };
            let Some(end) = block(&lines, i - 1, ends) else {
                return Err(PumlError::new(line_no, "block is not closed"));
            };
            i = end + 1;
            continue;
        }
        if lower == "header" || lower == "footer" {
            let Some(end) = block(&lines, i - 1, &[&format!("end{lower}"), &format!("end {lower}")]) else {
                return Err(PumlError::new(line_no, format!("{lower} block is not closed")));
            };
            i = end + 1;
            continue;
        }
        if IGNORED_PREFIXES.iter().any(|p| lower.starts_with(p)) || lower.starts_with("header ") {
            continue;
        }
        if lower.starts_with("note ") || lower == "note" {
            let single = l.contains(':');
            let target = l
                .split_whitespace()
                .collect::<Vec<_>>()
                .windows(2)
                .find(|w| w[0] == "of")
                .map(|w| w[1].trim_end_matches(':').to_string());
            if single {
                let (_, text) = l.split_once(':').unwrap();
                if let Some(t) = target {
                    doc.notes.push((t, text.trim().to_string()));
                }
            } else {
                let Some(end) = block(&lines, i - 1, &["end note", "endnote"]) else {
                    return Err(PumlError::new(line_no, "note is not closed"));
                };
                if let Some(t) = target {
                    let text = lines[i..end].iter().map(|s| s.trim()).collect::<Vec<_>>().join(" ");
                    doc.notes.push((t, text.trim().to_string()));
                }
                i = end + 1;
            }
            continue;
        }
        if l == "}" {
            if stack.pop().is_none() {
                return Err(PumlError::new(line_no, "unmatched `}`"));
            }
            continue;
        }
        let keyword = l.split_whitespace().next().unwrap_or("");
        if ELEMENT_KEYWORDS.contains(&keyword) && !l[keyword.len()..].trim_start().starts_with(['-', '.']) {
            let head = parse_element_head(&l[keyword.len()..], line_no)?;
            for s in &head.stereotypes {
                ctx.stereotype(line_no, s)?;
            }
            let idx = doc.elements.len();
            let parent = stack.last().copied();
            doc.elements.push(Element {
                label: head.label.split_whitespace().collect::<Vec<_>>().join(" "),
                alias: head.alias,
                stereotypes: head.stereotypes,
                line: line_no,
                parent,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                doc.elements[p].children.push(idx);
            }
            if head.opens {
                stack.push(idx);
            }
            continue;
        }
        if let Some((from, to)) = parse_link(l) {
            doc.links.push((from, to, line_no));
            continue;
        }
        if ctx.strict {
            return Err(PumlError::new(line_no, format!("unrecognized statement `{l}`")));
        }
    }
    if !started {
        return Err(PumlError::new(1, "missing @startuml"));
    }
    if let Some(open) = stack.last() {
        let e = &doc.elements[*open];
        return Err(PumlError::new(e.line, format!("block `{}` opened here is not closed", e.alias)));
    }
    if !ended {
        return Err(PumlError::new(lines.len().max(1), "missing @enduml"));
    }
    Ok(doc)
}

fn port_kind(el: &Element) -> Option<PortKind> {
    el.stereotypes.iter().find_map(|s| PortKind::parse(s))
}

fn has(el: &Element, st: &str) -> bool {
    el.stereotypes.iter().any(|s| s == st)
}

fn split_port_label(label: &str) -> Option<(String, String)> {
    let (id, ty) = label.split_once(" / ").or_else(|| label.split_once('/').filter(|(a, _)| !a.contains(':')))?;
    let (id, ty) = (id.trim(), ty.trim());
    (!id.is_empty() && !ty.is_empty() && !id.contains(char::is_whitespace)).then(|| (id.to_string(), ty.to_string()))
}

/// Parses a diagram. Unknown stereotypes and malformed labels are errors.
pub fn parse_puml(text: &str) -> Result<ParsedDiagram, PumlError> {
    parse_with(text, true)
}

/// Like [`parse_puml`] but records unknown stereotypes and malformed labels
/// as issues instead of failing.
pub fn parse_puml_lenient(text: &str) -> Result<ParsedDiagram, PumlError> {
    parse_with(text, false)
}

fn parse_with(text: &str, strict: bool) -> Result<ParsedDiagram, PumlError> {
    let mut ctx = Ctx {
        strict,
        issues: Vec::new(),
    };
    let doc = read_doc(text, &mut ctx)?;
    let roots: Vec<usize> = (0..doc.elements.len())
        .filter(|&i| {
            let e = &doc.elements[i];
            e.parent.is_none() && (has(e, ATOMIC_STEREOTYPE) || has(e, COMPOSED_STEREOTYPE))
        })
        .collect();
    let root = match roots.as_slice() {
        [r] => *r,
        [] => return Err(PumlError::new(1, "no classifier component found")),
        [_, second, ..] => {
            return Err(PumlError::new(
                doc.elements[*second].line,
                "more than one classifier component in one diagram",
            ))
        }
    };
    let model = if has(&doc.elements[root], ATOMIC_STEREOTYPE) {
        Model::Atomic(build_atomic(&doc, root, &mut ctx)?)
    } else {
        Model::Composed(build_composed(&doc, root, &mut ctx)?)
    };
    Ok(ParsedDiagram {
        model,
        types: doc.legend,
        header: doc.header,
        issues: ctx.issues,
    })
}

fn build_atomic(doc: &Doc, root: usize, ctx: &mut Ctx) -> Result<AtomicClassifier, PumlError> {
    let el = &doc.elements[root];
    let mut c = AtomicClassifier::new(el.label.clone());
    c.source_refs = doc.header.get("source").map(str::to_string).collect();
    let notes: BTreeMap<&str, &str> = doc.notes.iter().map(|(t, n)| (t.as_str(), n.as_str())).collect();
    for &child in &el.children {
        let p = &doc.elements[child];
        let Some(kind) = port_kind(p) else { continue };
        let Some((identifier, interface_type)) = split_port_label(&p.label) else {
            ctx.malformed(p.line, &p.label, "identifier / type")?;
            continue;
        };
        let meta = doc.meta.get(&p.alias);
        c.ports.push(Port {
            identifier,
            kind,
            interface_type,
            declared_name: meta.and_then(|m| m.get("name")).cloned().unwrap_or_default(),
            handler: notes.get(p.alias.as_str()).map(|s| s.to_string()),
        });
    }
    Ok(c)
}

enum Role {
    PartPort { part: String, key: String },
    Topic(usize),
    Service(usize),
    External(usize),
}

fn build_composed(doc: &Doc, root: usize, ctx: &mut Ctx) -> Result<ComposedClassifier, PumlError> {
    let el = &doc.elements[root];
    let mut c = ComposedClassifier::new(
        el.label.clone(),
        doc.meta.get(&el.alias).and_then(|m| m.get("launch")).cloned().unwrap_or_default(),
    );
    let mut roles: BTreeMap<String, Role> = BTreeMap::new();
    let mut labels: BTreeMap<String, String> = BTreeMap::new();
    let mut externals: Vec<(usize, PortKind, String, String)> = Vec::new();

    struct Walk<'a> {
        doc: &'a Doc,
        c: ComposedClassifier,
        roles: BTreeMap<String, Role>,
    }

    fn visit(w: &mut Walk, idx: usize, path: &[String], ctx: &mut Ctx) -> Result<Option<NamespaceScope>, PumlError> {
        let doc = w.doc;
        let el = &doc.elements[idx];
        let meta = doc.meta.get(&el.alias);
        if has(el, NAMESPACE_STEREOTYPE) {
            let mut scope = NamespaceScope::new(el.label.clone());
            let mut inner = path.to_vec();
            inner.push(el.label.clone());
            for &child in &el.children {
                let before = (w.c.parts.len(), w.c.topics.len(), w.c.services.len());
                if let Some(ns) = visit(w, child, &inner, ctx)? {
                    scope.children.push(ns);
                    continue;
                }
                let ce = &doc.elements[child];
                if w.c.parts.len() > before.0 && has(ce, PART_STEREOTYPE) {
                    scope.members.parts.push(w.c.parts.last().unwrap().part_name.clone());
                }
                if w.c.topics.len() > before.1 {
                    scope.members.topics.push(w.c.topics.last().unwrap().runtime_name.clone());
                }
                if w.c.services.len() > before.2 {
                    scope.members.services.push(w.c.services.last().unwrap().runtime_name.clone());
                }
            }
            return Ok(Some(scope));
        }
        if has(el, PART_STEREOTYPE) {
            let Some((name, ty)) = el.label.split_once(':').map(|(a, b)| (a.trim().to_string(), b.trim().to_string())) else {
                ctx.malformed(el.line, &el.label, "name : Type")?;
                return Ok(None);
            };
            if name.is_empty() || ty.is_empty() {
                ctx.malformed(el.line, &el.label, "name : Type")?;
                return Ok(None);
            }
            let effective_namespace = match meta.and_then(|m| m.get("namespace")) {
                Some(ns) => split_namespace(ns).0,
                None => path.to_vec(),
            };
            let remappings = meta
                .map(|m| {
                    m.iter()
                        .filter_map(|(k, v)| k.strip_prefix("remap.").map(|f| (f.to_string(), v.clone())))
                        .collect()
                })
                .unwrap_or_default();
            let mut ports = Vec::new();
            for &child in &el.children {
                let p = &doc.elements[child];
                let Some(kind) = port_kind(p) else { continue };
                let Some((key, ty)) = split_port_label(&p.label) else {
                    ctx.malformed(p.line, &p.label, "key / type")?;
                    continue;
                };
                let pm = doc.meta.get(&p.alias);
                let get = |k: &str| pm.and_then(|m| m.get(k)).cloned();
                let runtime = get("runtime").unwrap_or_default();
                ports.push(PartPort {
                    key: key.clone(),
                    port: Port {
                        identifier: key.rsplit('.').next().unwrap_or(&key).to_string(),
                        kind,
                        interface_type: ty,
                        declared_name: get("name").unwrap_or_default(),
                        handler: get("handler"),
                    },
                    display_name: get("display").unwrap_or_default(),
                    scoped: get("scoped").map(|s| s == "true").unwrap_or(!runtime.is_empty() && !runtime.starts_with('/')),
                    runtime_name: runtime,
                });
                w.roles.insert(
                    p.alias.clone(),
                    Role::PartPort {
                        part: name.clone(),
                        key,
                    },
                );
            }
            let classifier_kind = if has(el, COMPOSED_STEREOTYPE) {
                ClassifierKind::Composed
            } else {
                ClassifierKind::Atomic
            };
            w.c.parts.push(NodePart {
                part_name: name,
                classifier_ref: ty,
                classifier_kind,
                stereotype: PART_STEREOTYPE.to_string(),
                effective_namespace,
                remappings,
                ports,
            });
            return Ok(None);
        }
        let binding_runtime = |label: &str| match meta.and_then(|m| m.get("runtime")) {
            Some(r) => r.clone(),
            None if label.starts_with('/') => label.to_string(),
            None if path.is_empty() => format!("/{label}"),
            None => format!("/{}/{label}", path.join("/")),
        };
        if has(el, TOPIC_STEREOTYPE) {
            w.roles.insert(el.alias.clone(), Role::Topic(w.c.topics.len()));
            w.c.topics.push(TopicBinding {
                display_name: el.label.clone(),
                runtime_name: binding_runtime(&el.label),
                message_type: meta.and_then(|m| m.get("type")).cloned().unwrap_or_default(),
                endpoints: Vec::new(),
            });
            return Ok(None);
        }
        if has(el, SERVICE_STEREOTYPE) {
            w.roles.insert(el.alias.clone(), Role::Service(w.c.services.len()));
            w.c.services.push(ServiceBinding {
                display_name: el.label.clone(),
                runtime_name: binding_runtime(&el.label),
                service_type: meta.and_then(|m| m.get("type")).cloned().unwrap_or_default(),
                endpoints: Vec::new(),
            });
            return Ok(None);
        }
        Ok(None)
    }

    let mut walk = Walk {
        doc,
        c: std::mem::replace(&mut c, ComposedClassifier::new("", "")),
        roles: BTreeMap::new(),
    };
    for &child in &el.children {
        let ce = &doc.elements[child];
        if let Some(kind) = port_kind(ce) {
            if !has(ce, PART_STEREOTYPE) {
                let Some((key, ty)) = split_port_label(&ce.label) else {
                    ctx.malformed(ce.line, &ce.label, "part.key / type")?;
                    continue;
                };
                walk.roles.insert(ce.alias.clone(), Role::External(externals.len()));
                externals.push((child, kind, key, ty));
                continue;
            }
        }
        if let Some(ns) = visit(&mut walk, child, &[], ctx)? {
            walk.c.namespaces.push(ns);
        }
    }
    c = walk.c;
    roles.append(&mut walk.roles);

    for e in &doc.elements {
        labels.entry(e.label.clone()).or_insert_with(|| e.alias.clone());
    }
    let role_of = |name: &str| roles.get(name).or_else(|| labels.get(name).and_then(|a| roles.get(a)));

    let mut ext_links: BTreeMap<usize, (String, String)> = BTreeMap::new();
    for (from, to, _) in &doc.links {
        let (Some(a), Some(b)) = (role_of(from), role_of(to)) else { continue };
        let (port, other) = match (a, b) {
            (Role::PartPort { .. }, _) => (a, b),
            (_, Role::PartPort { .. }) => (b, a),
            _ => continue,
        };
        let Role::PartPort { part, key } = port else { continue };
        let endpoint = Endpoint::new(part, key);
        match other {
            Role::Topic(t) => {
                if !c.topics[*t].endpoints.contains(&endpoint) {
                    c.topics[*t].endpoints.push(endpoint);
                }
            }
            Role::Service(s) => {
                if !c.services[*s].endpoints.contains(&endpoint) {
                    c.services[*s].endpoints.push(endpoint);
                }
            }
            Role::External(x) => {
                ext_links.insert(*x, (part.clone(), key.clone()));
            }
            Role::PartPort { .. } => {}
        }
    }

    // fill binding details that hand-written diagrams leave out
    for t in &mut c.topics {
        if t.message_type.is_empty() {
            let types: BTreeSet<String> = t
                .endpoints
                .iter()
                .filter_map(|e| c.parts.iter().find(|p| p.part_name == e.part)?.port(&e.port))
                .map(|p| p.port.interface_type.clone())
                .collect();
            t.message_type = types.into_iter().next().unwrap_or_default();
        }
    }
    for s in &mut c.services {
        if s.service_type.is_empty() {
            let types: BTreeSet<String> = s
                .endpoints
                .iter()
                .filter_map(|e| c.parts.iter().find(|p| p.part_name == e.part)?.port(&e.port))
                .map(|p| p.port.interface_type.clone())
                .collect();
            s.service_type = types.into_iter().next().unwrap_or_default();
        }
    }

    for (x, (_, kind, key, ty)) in externals.iter().enumerate() {
        let (part, inner_key) = match ext_links.get(&x) {
            Some(pk) => pk.clone(),
            None => match key.split_once('.') {
                Some((p, k)) => (p.to_string(), k.to_string()),
                None => {
                    ctx.malformed(doc.elements[externals[x].0].line, key, "part.key / type")?;
                    continue;
                }
            },
        };
        let port = c
            .part(&part)
            .and_then(|p| p.port(&inner_key))
            .cloned()
            .unwrap_or_else(|| PartPort {
                key: inner_key.clone(),
                port: Port {
                    identifier: inner_key.rsplit('.').next().unwrap_or(&inner_key).to_string(),
                    kind: *kind,
                    interface_type: ty.clone(),
                    declared_name: String::new(),
                    handler: None,
                },
                display_name: String::new(),
                runtime_name: String::new(),
                scoped: false,
            });
        c.external_ports.push(ExternalPort { part, port });
    }
    Ok(c)
}
