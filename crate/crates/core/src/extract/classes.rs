use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::lexer::{qualified_name, skip_balanced, split_args, tokenize, Token, TokenKind};
use super::{EndpointRecord, NodeClassRecord, ScanConfig, SourceLocation};
use crate::model::{PortKind, DYNAMIC_NAME};

const CREATE_CALLS: [(&str, PortKind); 4] = [
    ("create_publisher", PortKind::Publisher),
    ("create_subscription", PortKind::Subscriber),
    ("create_service", PortKind::ServiceProvided),
    ("create_client", PortKind::ServiceRequired),
];

pub const UNRESOLVED_TYPE: &str = "<unresolved>";
pub const LAMBDA_HANDLER: &str = "<lambda>";

/// Direct base classes of every class seen in the scanned sources.
pub type KnownClasses = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone)]
struct ClassDef {
    name: String,
    bases: Vec<String>,
    line: usize,
    /// Token range of the body, braces excluded.
    body: (usize, usize),
}

#[derive(Debug, Clone)]
struct MemberDef {
    class: String,
    range: (usize, usize),
}

#[derive(Debug)]
struct FileAnalysis {
    path: String,
    tokens: Vec<Token>,
    classes: Vec<ClassDef>,
    members: Vec<MemberDef>,
    aliases: BTreeMap<String, String>,
    rclcpp_in_scope: bool,
}

impl FileAnalysis {
    fn new(path: &str, text: &str) -> Self {
        let tokens = tokenize(text);
        let classes = find_classes(&tokens);
        let members = find_member_defs(&tokens);
        let aliases = find_aliases(&tokens);
        let rclcpp_in_scope = tokens.windows(3).any(|w| {
            w[0].is_ident("namespace") && w[1].is_ident("rclcpp") && w[2].is(";")
        }) || tokens
            .windows(4)
            .any(|w| w[0].is_ident("using") && w[1].is_ident("rclcpp") && w[2].is("::") && w[3].is_ident("Node"));
        FileAnalysis {
            path: path.to_string(),
            tokens,
            classes,
            members,
            aliases,
            rclcpp_in_scope,
        }
    }

    fn normalize_base(&self, base: &str) -> String {
        if base == "Node" && self.rclcpp_in_scope {
            "rclcpp::Node".to_string()
        } else {
            base.to_string()
        }
    }
}

fn find_classes(tokens: &[Token]) -> Vec<ClassDef> {
    let mut out = Vec::new();
    for i in 0..tokens.len() {
        let t = &tokens[i];
        if !(t.is_ident("class") || t.is_ident("struct")) {
            continue;
        }
        if i > 0 && tokens[i - 1].is_ident("enum") {
            continue;
        }
        let mut j = i + 1;
        let mut name = None;
        while j < tokens.len() {
            let tj = &tokens[j];
            if tj.kind == TokenKind::Ident {
                if tj.text != "final" {
                    name = Some(tj.text.clone());
                }
                j += 1;
            } else if tj.is("[") {
                // attributes
                j = skip_balanced(tokens, j);
            } else if tj.is("::") {
                j += 1;
            } else {
                break;
            }
        }
        let (Some(name), Some(stop)) = (name, tokens.get(j)) else {
            continue;
        };
        let mut bases = Vec::new();
        let mut k = j;
        if stop.is(":") {
            k += 1;
            let mut current: Vec<Token> = Vec::new();
            while k < tokens.len() && !tokens[k].is("{") && !tokens[k].is(";") {
                let tk = &tokens[k];
                if tk.is("<") {
                    let end = skip_balanced(tokens, k);
                    current.extend_from_slice(&tokens[k..end]);
                    k = end;
                    continue;
                }
                if tk.is(",") {
                    bases.push(base_name(&current));
                    current.clear();
                } else {
                    current.push(tk.clone());
                }
                k += 1;
            }
            if !current.is_empty() {
                bases.push(base_name(&current));
            }
        }
        if k >= tokens.len() || !tokens[k].is("{") {
            continue;
        }
        let end = skip_balanced(tokens, k);
        out.push(ClassDef {
            name,
            bases: bases.into_iter().filter(|b| !b.is_empty()).collect(),
            line: t.line,
            body: (k + 1, end.saturating_sub(1)),
        });
    }
    out
}

fn base_name(tokens: &[Token]) -> String {
    let filtered: Vec<Token> = tokens
        .iter()
        .filter(|t| !matches!(t.text.as_str(), "public" | "protected" | "private" | "virtual"))
        .cloned()
        .collect();
    qualified_name(&filtered)
}

/// Finds out-of-line member function definitions `Class::method(...) {..}`,
/// including constructor initializer lists.
fn find_member_defs(tokens: &[Token]) -> Vec<MemberDef> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + 3 < tokens.len() {
        if !(tokens[i].kind == TokenKind::Ident && tokens[i + 1].is("::")) {
            i += 1;
            continue;
        }
        let mut name_at = i + 2;
        if tokens[name_at].is("~") {
            name_at += 1;
        }
        let paren = name_at + 1;
        if tokens.get(name_at).map(|t| t.kind != TokenKind::Ident).unwrap_or(true)
            || !tokens.get(paren).map(|t| t.is("(")).unwrap_or(false)
        {
            i += 1;
            continue;
        }
        let mut k = skip_balanced(tokens, paren);
        while k < tokens.len()
            && tokens[k].kind == TokenKind::Ident
            && matches!(tokens[k].text.as_str(), "const" | "override" | "noexcept" | "final")
        {
            k += 1;
        }
        let Some(next) = tokens.get(k) else { break };
        let body_open = if next.is("{") {
            Some(k)
        } else if next.is(":") {
            // constructor initializer list
            let mut m = k + 1;
            let mut found = None;
            while m < tokens.len() {
                let tm = &tokens[m];
                if tm.is(";") {
                    break;
                }
                if tm.is("(") {
                    m = skip_balanced(tokens, m);
                    continue;
                }
                if tm.is("{") {
                    let prev = &tokens[m - 1];
                    if prev.kind == TokenKind::Ident || prev.is(">") {
                        m = skip_balanced(tokens, m);
                        continue;
                    }
                    found = Some(m);
                    break;
                }
                m += 1;
            }
            found
        } else {
            None
        };
        match body_open {
            Some(open) => {
                let end = skip_balanced(tokens, open);
                out.push(MemberDef {
                    class: tokens[i].text.clone(),
                    range: (i, end),
                });
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

fn find_aliases(tokens: &[Token]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for i in 0..tokens.len() {
        if !tokens[i].is_ident("using") {
            continue;
        }
        let end = (i..tokens.len()).find(|&k| tokens[k].is(";")).unwrap_or(tokens.len());
        let stmt = &tokens[i + 1..end];
        if stmt.first().map(|t| t.is_ident("namespace")).unwrap_or(true) {
            continue;
        }
        if stmt.len() >= 3 && stmt[0].kind == TokenKind::Ident && stmt[1].is("=") {
            out.insert(stmt[0].text.clone(), normalize_type(&qualified_or_raw(&stmt[2..])));
        } else if let Some(last) = stmt.last() {
            if last.kind == TokenKind::Ident && stmt.len() > 1 {
                out.insert(last.text.clone(), normalize_type(&qualified_name(stmt)));
            }
        }
    }
    out
}

fn qualified_or_raw(tokens: &[Token]) -> String {
    tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Ident || t.is("::"))
        .map(|t| t.text.as_str())
        .collect::<String>()
        .trim_start_matches("::")
        .to_string()
}

/// Normalizes to `pkg::kind::Name` when the type sits in an interface
/// namespace.
fn normalize_type(raw: &str) -> String {
    let segments: Vec<&str> = raw.trim_start_matches("::").split("::").filter(|s| !s.is_empty()).collect();
    if segments.len() > 3 && matches!(segments[1], "msg" | "srv") {
        return format!("{}::{}::{}", segments[0], segments[1], segments[segments.len() - 1]);
    }
    segments.join("::")
}

/// Outcome of walking a class's inheritance chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainResult {
    /// Class, intermediate bases, node base.
    Node(Vec<String>),
    TooDeep(Vec<String>),
    Unresolved { base: String },
    NotNode,
}

fn last_segment(name: &str) -> &str {
    name.rsplit("::").next().unwrap_or(name)
}

/// Resolves the chain from `class` to one of `node_bases`, allowing at most
/// `max_depth` inheritance edges.
pub fn resolve_chain(class: &str, known: &KnownClasses, node_bases: &[String], max_depth: usize) -> ChainResult {
    fn walk(
        class: &str,
        known: &KnownClasses,
        node_bases: &[String],
        max_depth: usize,
        chain: &mut Vec<String>,
        visiting: &mut BTreeSet<String>,
    ) -> ChainResult {
        let Some(bases) = known.get(class) else {
            return ChainResult::Unresolved { base: class.to_string() };
        };
        if !visiting.insert(class.to_string()) {
            return ChainResult::NotNode;
        }
        chain.push(class.to_string());
        let mut fallback = ChainResult::NotNode;
        for base in bases {
            if node_bases.iter().any(|b| b == base) {
                let mut full = chain.clone();
                full.push(base.clone());
                if full.len() - 1 > max_depth {
                    fallback = ChainResult::TooDeep(full);
                    continue;
                }
                chain.pop();
                return ChainResult::Node(full);
            }
            if base.starts_with("std::") {
                continue;
            }
            let short = last_segment(base);
            if !known.contains_key(short) {
                if matches!(fallback, ChainResult::NotNode) {
                    fallback = ChainResult::Unresolved { base: base.clone() };
                }
                continue;
            }
            match walk(short, known, node_bases, max_depth, chain, visiting) {
                ChainResult::Node(full) => {
                    if full.len() - 1 > max_depth {
                        fallback = ChainResult::TooDeep(full);
                        continue;
                    }
                    chain.pop();
                    return ChainResult::Node(full);
                }
                ChainResult::TooDeep(full) => fallback = ChainResult::TooDeep(full),
                ChainResult::Unresolved { base } => {
                    if matches!(fallback, ChainResult::NotNode) {
                        fallback = ChainResult::Unresolved { base }
                    }
                }
                ChainResult::NotNode => {}
            }
        }
        chain.pop();
        fallback
    }
    // The depth limit is applied to the complete chain, so walk unbounded
    // and check at the end.
    let result = walk(class, known, node_bases, usize::MAX, &mut Vec::new(), &mut BTreeSet::new());
    match result {
        ChainResult::Node(full) if full.len() - 1 > max_depth => ChainResult::TooDeep(full),
        other => other,
    }
}

fn handler_name(tokens: &[Token]) -> String {
    let Some(first) = tokens.first() else {
        return LAMBDA_HANDLER.to_string();
    };
    if first.is("[") {
        return LAMBDA_HANDLER.to_string();
    }
    if let Some(amp) = tokens.iter().position(|t| t.is("&")) {
        let tail: Vec<Token> = tokens[amp + 1..]
            .iter()
            .take_while(|t| t.kind == TokenKind::Ident || t.is("::"))
            .cloned()
            .collect();
        let name = qualified_name(&tail);
        if !name.is_empty() {
            return last_segment(&name).to_string();
        }
    }
    tokens
        .iter()
        .rev()
        .find(|t| t.kind == TokenKind::Ident && t.text != "this")
        .map(|t| t.text.clone())
        .unwrap_or_else(|| LAMBDA_HANDLER.to_string())
}

fn first_template_arg(tokens: &[Token], open: usize, close: usize) -> Vec<Token> {
    let mut depth = 0;
    let mut out = Vec::new();
    for t in &tokens[open + 1..close] {
        if t.is("<") {
            depth += 1;
        } else if t.is(">") {
            depth -= 1;
        } else if t.is(",") && depth == 0 {
            break;
        }
        out.push(t.clone());
    }
    out
}

/// Extracts the endpoints created by rclcpp calls in `tokens[range]`.
/// Returns the endpoints plus warnings for names that are not literals.
fn endpoints_in(
    file: &str,
    tokens: &[Token],
    range: (usize, usize),
    aliases: &BTreeMap<String, String>,
) -> (Vec<EndpointRecord>, Vec<String>) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let (start, end) = range;
    for i in start..end.min(tokens.len()) {
        let t = &tokens[i];
        if t.kind != TokenKind::Ident {
            continue;
        }
        let Some(&(call, kind)) = CREATE_CALLS.iter().find(|(name, _)| *name == t.text) else {
            continue;
        };
        // free-function form rclcpp::create_publisher(node, ...) takes the
        // node as an extra leading argument
        let shift = usize::from(i >= 2 && tokens[i - 1].is("::") && tokens[i - 2].is_ident("rclcpp"));
        let mut j = i + 1;
        let mut interface_type = UNRESOLVED_TYPE.to_string();
        if tokens.get(j).map(|t| t.is("<")).unwrap_or(false) {
            let close = skip_balanced(tokens, j);
            if close > j + 1 {
                let arg = first_template_arg(tokens, j, close - 1);
                let name = qualified_or_raw(&arg);
                let resolved = aliases.get(&name).cloned().unwrap_or(name);
                interface_type = normalize_type(&resolved);
                j = close;
            }
        }
        if !tokens.get(j).map(|t| t.is("(")).unwrap_or(false) {
            continue;
        }
        let close = skip_balanced(tokens, j);
        let args = split_args(tokens, j + 1, close.saturating_sub(1));
        let location = SourceLocation {
            file: file.to_string(),
            line: t.line,
        };
        if interface_type == UNRESOLVED_TYPE || interface_type.is_empty() {
            interface_type = UNRESOLVED_TYPE.to_string();
            warnings.push(format!("{file}:{}: {call} without explicit interface type", t.line));
        }
        let declared_name = match args.get(shift) {
            Some(&(a, b)) if b > a && tokens[a..b].iter().all(|t| t.kind == TokenKind::Str) => {
                tokens[a..b].iter().map(|t| t.text.as_str()).collect::<String>()
            }
            _ => {
                warnings.push(format!("{file}:{}: {call} with non-literal name", t.line));
                DYNAMIC_NAME.to_string()
            }
        };
        let handler_index = match kind {
            PortKind::Subscriber => Some(2 + shift),
            PortKind::ServiceProvided => Some(1 + shift),
            _ => None,
        };
        let handler = handler_index.map(|idx| match args.get(idx) {
            Some(&(a, b)) => handler_name(&tokens[a..b]),
            None => LAMBDA_HANDLER.to_string(),
        });
        out.push(EndpointRecord {
            kind,
            declared_name,
            interface_type,
            handler,
            source_location: location,
        });
    }
    (out, warnings)
}

/// Extracts endpoints from a class body given as source text.
pub fn extract_endpoints(file: &str, class_body: &str) -> (Vec<EndpointRecord>, Vec<String>) {
    let tokens = tokenize(class_body);
    let aliases = find_aliases(&tokens);
    endpoints_in(file, &tokens, (0, tokens.len()), &aliases)
}

/// Single-file entry point: detects node classes in `text`, resolving bases
/// through `known` (which should include classes from every scanned file).
pub fn detect_node_classes(
    file: &str,
    text: &str,
    known: &KnownClasses,
    config: &ScanConfig,
) -> (Vec<NodeClassRecord>, Vec<String>) {
    let analysis = FileAnalysis::new(file, text);
    let mut merged = known.clone();
    for c in &analysis.classes {
        merged
            .entry(c.name.clone())
            .or_insert_with(|| c.bases.iter().map(|b| analysis.normalize_base(b)).collect());
    }
    fold(&[analysis], &merged, config)
}

pub(super) fn analyze_sources(sources: &[(String, String)], config: &ScanConfig) -> (Vec<NodeClassRecord>, Vec<String>) {
    let analyses: Vec<FileAnalysis> = sources
        .par_iter()
        .map(|(path, text)| FileAnalysis::new(path, text))
        .collect();
    let mut known = KnownClasses::new();
    for a in &analyses {
        for c in &a.classes {
            known
                .entry(c.name.clone())
                .or_insert_with(|| c.bases.iter().map(|b| a.normalize_base(b)).collect());
        }
    }
    fold(&analyses, &known, config)
}

fn fold(
    analyses: &[FileAnalysis],
    known: &KnownClasses,
    config: &ScanConfig,
) -> (Vec<NodeClassRecord>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut node_chains: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut reported = BTreeSet::new();

    for a in analyses {
        for c in &a.classes {
            if c.bases.is_empty() || node_chains.contains_key(&c.name) {
                continue;
            }
            match resolve_chain(&c.name, known, &config.node_bases, config.max_inheritance_depth) {
                ChainResult::Node(chain) => {
                    node_chains.insert(c.name.clone(), chain);
                }
                ChainResult::TooDeep(chain) => {
                    if reported.insert(c.name.clone()) {
                        warnings.push(format!(
                            "{}:{}: class {} reaches {} through {} levels, above the limit of {}; excluded",
                            a.path,
                            c.line,
                            c.name,
                            chain.last().map(String::as_str).unwrap_or("?"),
                            chain.len() - 1,
                            config.max_inheritance_depth
                        ));
                    }
                }
                ChainResult::Unresolved { base } => {
                    if reported.insert(c.name.clone()) {
                        warnings.push(format!(
                            "{}:{}: class {} has unresolvable base {}; excluded",
                            a.path, c.line, c.name, base
                        ));
                    }
                }
                ChainResult::NotNode => {}
            }
        }
    }

    let mut records = Vec::new();
    for a in analyses {
        for c in &a.classes {
            let Some(chain) = node_chains.get(&c.name) else {
                continue;
            };
            let mut files = BTreeSet::from([a.path.clone()]);
            let mut regions: Vec<(&FileAnalysis, (usize, usize))> = vec![(a, c.body)];
            for other in analyses {
                for m in other.members.iter().filter(|m| m.class == c.name) {
                    files.insert(other.path.clone());
                    regions.push((other, m.range));
                }
            }
            let direct_bases: Vec<&str> = c.bases.iter().map(|b| last_segment(b)).collect();
            let mut declared_node_name = None;
            let mut endpoints = Vec::new();
            for (file, range) in &regions {
                let (found, mut w) = endpoints_in(&file.path, &file.tokens, *range, &file.aliases);
                endpoints.extend(found);
                warnings.append(&mut w);
                if declared_node_name.is_none() {
                    declared_node_name = base_constructor_name(&file.tokens, *range, &direct_bases);
                }
            }
            endpoints.sort_by(|x, y| x.source_location.cmp(&y.source_location).then(x.kind.cmp(&y.kind)));
            endpoints.dedup();
            records.push((
                (a.path.clone(), c.line),
                NodeClassRecord {
                    class_name: c.name.clone(),
                    declared_node_name,
                    files: files.into_iter().collect(),
                    endpoints,
                    inheritance_chain: chain.clone(),
                },
            ));
        }
    }

    // creation calls inside classes that are not nodes are not attributed
    for a in analyses {
        let non_node = a
            .classes
            .iter()
            .filter(|c| !node_chains.contains_key(&c.name))
            .map(|c| (c.name.clone(), c.body))
            .chain(
                a.members
                    .iter()
                    .filter(|m| known.contains_key(&m.class) && !node_chains.contains_key(&m.class))
                    .map(|m| (m.class.clone(), m.range)),
            );
        for (name, range) in non_node {
            let (found, _) = endpoints_in(&a.path, &a.tokens, range, &a.aliases);
            let why = if reported.contains(&name) { "an excluded class" } else { "a helper class, not a node" };
            for e in found {
                warnings.push(format!(
                    "{}:{}: endpoint \"{}\" is created inside {}, {}; not attributed",
                    e.source_location.file, e.source_location.line, e.declared_name, name, why
                ));
            }
        }
    }

    records.sort_by(|x, y| x.0.cmp(&y.0));
    (records.into_iter().map(|(_, r)| r).collect(), warnings)
}

/// First string literal passed to a direct base constructor, e.g. the
/// `"foo_node"` in `: Node("foo_node")`.
fn base_constructor_name(tokens: &[Token], range: (usize, usize), bases: &[&str]) -> Option<String> {
    let (start, end) = range;
    (start..end.min(tokens.len()).saturating_sub(2)).find_map(|i| {
        let t = &tokens[i];
        (t.kind == TokenKind::Ident
            && bases.contains(&t.text.as_str())
            && tokens[i + 1].is("(")
            && tokens[i + 2].kind == TokenKind::Str)
            .then(|| tokens[i + 2].text.clone())
    })
}
