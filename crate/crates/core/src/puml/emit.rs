use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{SERVICE_STEREOTYPE, TOPIC_STEREOTYPE};
use crate::interfaces::TypeEntry;
use crate::model::{
    AtomicClassifier, ClassifierKind, ComposedClassifier, Endpoint, Model, NamespaceScope, Port, PortKind,
    COMPOSED_STEREOTYPE,
};

pub(crate) fn sanitize_alias(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if !out.starts_with(|c: char| c.is_ascii_alphabetic()) {
        out.insert_str(0, "c_");
    }
    out
}

/// Quotes a metadata value when it contains whitespace or quotes.
pub(crate) fn meta_value(v: &str) -> String {
    if !v.is_empty() && !v.chars().any(|c| c.is_whitespace() || c == '"' || c == '\\') {
        return v.to_string();
    }
    let mut out = String::from("\"");
    for c in v.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn label(s: &str) -> String {
    s.replace('"', "'")
}

fn port_keyword(kind: PortKind) -> &'static str {
    match kind {
        PortKind::Publisher | PortKind::ServiceRequired => "portout",
        PortKind::Subscriber | PortKind::ServiceProvided => "portin",
    }
}

fn meta_line(out: &mut String, alias: &str, pairs: &[(&str, String)]) {
    if pairs.is_empty() {
        return;
    }
    let _ = write!(out, "'@ {alias}");
    for (k, v) in pairs {
        let _ = write!(out, " {k}={}", meta_value(v));
    }
    out.push('\n');
}

fn legend(out: &mut String, types: &[TypeEntry]) {
    if types.is_empty() {
        return;
    }
    let mut sorted: Vec<&TypeEntry> = types.iter().collect();
    sorted.sort_by(|a, b| a.name().cmp(b.name()));
    sorted.dedup_by(|a, b| a.name() == b.name());
    out.push_str("legend\n");
    for t in sorted {
        match t {
            TypeEntry::Message(m) => {
                let _ = writeln!(out, "MessageType {}", m.qualified_name);
                for f in &m.fields {
                    let _ = writeln!(out, "  {} {}", f.field_type, f.name);
                }
            }
            TypeEntry::Service(s) => {
                let _ = writeln!(out, "ServiceType {}", s.qualified_name);
                for f in &s.request_fields {
                    let _ = writeln!(out, "  {} {}", f.field_type, f.name);
                }
                out.push_str("  ---\n");
                for f in &s.response_fields {
                    let _ = writeln!(out, "  {} {}", f.field_type, f.name);
                }
            }
            TypeEntry::External(name) => {
                let _ = writeln!(out, "ExternalType {name}");
            }
        }
    }
    out.push_str("endlegend\n");
}

/// Component diagram for one node class, with a legend describing the
/// interface types in `types`.
pub fn emit_atomic(c: &AtomicClassifier, types: &[TypeEntry]) -> String {
    let c = c.normalized();
    let alias = sanitize_alias(&c.name);
    let mut out = String::from("@startuml\n");
    for src in &c.source_refs {
        let _ = writeln!(out, "'@source {src}");
    }
    let _ = writeln!(out, "component \"{}\" as {alias} <<{}>> {{", label(&c.name), c.stereotype);
    let port_alias = |p: &Port| format!("{alias}_{}", sanitize_alias(&p.identifier));
    for p in &c.ports {
        let _ = writeln!(
            out,
            "  {} \"{}\" as {} <<{}>>",
            port_keyword(p.kind),
            label(&p.label()),
            port_alias(p),
            p.kind
        );
    }
    out.push_str("}\n");
    for p in &c.ports {
        if let Some(h) = &p.handler {
            let _ = writeln!(out, "note right of {} : {}", port_alias(p), h);
        }
    }
    for p in &c.ports {
        if !p.declared_name.is_empty() {
            meta_line(&mut out, &port_alias(p), &[("name", p.declared_name.clone())]);
        }
    }
    legend(&mut out, types);
    out.push_str("@enduml\n");
    out
}

struct ComposedAliases {
    parts: BTreeMap<String, String>,
    ports: BTreeMap<Endpoint, String>,
    topics: BTreeMap<String, String>,
    services: BTreeMap<String, String>,
}

/// Component diagram for a launch-level classifier. Parts typed by composed
/// classifiers are shown with their boundary ports only.
pub fn emit_composed(c: &ComposedClassifier) -> String {
    let c = c.normalized();
    let root = sanitize_alias(&c.name);
    let mut aliases = ComposedAliases {
        parts: BTreeMap::new(),
        ports: BTreeMap::new(),
        topics: BTreeMap::new(),
        services: BTreeMap::new(),
    };
    for (i, part) in c.parts.iter().enumerate() {
        let pa = format!("part_{}", i + 1);
        for (j, port) in part.ports.iter().enumerate() {
            aliases
                .ports
                .insert(Endpoint::new(&part.part_name, &port.key), format!("{pa}_{}", j + 1));
        }
        aliases.parts.insert(part.part_name.clone(), pa);
    }
    for (i, t) in c.topics.iter().enumerate() {
        aliases.topics.insert(t.runtime_name.clone(), format!("topic_{}", i + 1));
    }
    for (i, s) in c.services.iter().enumerate() {
        aliases.services.insert(s.runtime_name.clone(), format!("service_{}", i + 1));
    }

    let mut placed_parts = std::collections::BTreeSet::new();
    let mut placed_topics = std::collections::BTreeSet::new();
    let mut placed_services = std::collections::BTreeSet::new();
    let mut prefix = Vec::new();
    for ns in &c.namespaces {
        ns.walk(&mut prefix, &mut |_, scope| {
            placed_parts.extend(scope.members.parts.iter().cloned());
            placed_topics.extend(scope.members.topics.iter().cloned());
            placed_services.extend(scope.members.services.iter().cloned());
        });
    }

    let mut out = String::from("@startuml\n");
    let _ = writeln!(out, "component \"{}\" as {root} <<{}>> {{", label(&c.name), c.stereotype);
    for part in c.parts.iter().filter(|p| !placed_parts.contains(&p.part_name)) {
        emit_part(&mut out, &c, part, &aliases, 1);
    }
    let mut ns_counter = 0;
    for ns in &c.namespaces {
        emit_scope(&mut out, &c, ns, &aliases, &mut ns_counter, 1);
    }
    for t in c.topics.iter().filter(|t| !placed_topics.contains(&t.runtime_name)) {
        let _ = writeln!(
            out,
            "  queue \"{}\" as {} <<{TOPIC_STEREOTYPE}>>",
            label(&t.display_name),
            aliases.topics[&t.runtime_name]
        );
    }
    for s in c.services.iter().filter(|s| !placed_services.contains(&s.runtime_name)) {
        let _ = writeln!(
            out,
            "  interface \"{}\" as {} <<{SERVICE_STEREOTYPE}>>",
            label(&s.display_name),
            aliases.services[&s.runtime_name]
        );
    }
    for (i, ext) in c.external_ports.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {} \"{} / {}\" as ext_{} <<{}>>",
            port_keyword(ext.port.port.kind),
            label(&ext.key()),
            label(&ext.port.port.interface_type),
            i + 1,
            ext.port.port.kind
        );
    }
    out.push_str("}\n");

    for t in &c.topics {
        let ta = &aliases.topics[&t.runtime_name];
        for e in &t.endpoints {
            let Some(pa) = aliases.ports.get(e) else { continue };
            let kind = c.part(&e.part).and_then(|p| p.port(&e.port)).map(|p| p.port.kind);
            if kind == Some(PortKind::Subscriber) {
                let _ = writeln!(out, "{ta} --> {pa}");
            } else {
                let _ = writeln!(out, "{pa} --> {ta}");
            }
        }
    }
    for s in &c.services {
        let sa = &aliases.services[&s.runtime_name];
        for e in &s.endpoints {
            let Some(pa) = aliases.ports.get(e) else { continue };
            let kind = c.part(&e.part).and_then(|p| p.port(&e.port)).map(|p| p.port.kind);
            if kind == Some(PortKind::ServiceProvided) {
                let _ = writeln!(out, "{sa} --> {pa}");
            } else {
                let _ = writeln!(out, "{pa} --> {sa}");
            }
        }
    }
    for (i, ext) in c.external_ports.iter().enumerate() {
        let Some(pa) = aliases.ports.get(&Endpoint::new(&ext.part, &ext.port.key)) else { continue };
        match ext.port.port.kind {
            PortKind::Publisher | PortKind::ServiceRequired => {
                let _ = writeln!(out, "{pa} --> ext_{}", i + 1);
            }
            _ => {
                let _ = writeln!(out, "ext_{} --> {pa}", i + 1);
            }
        }
    }

    meta_line(&mut out, &root, &[("launch", c.launch_ref.clone())]);
    for part in &c.parts {
        let pa = &aliases.parts[&part.part_name];
        let mut pairs = vec![("namespace", format!("/{}", part.effective_namespace.join("/")))];
        let remap_keys: Vec<String> = part.remappings.keys().map(|k| format!("remap.{k}")).collect();
        for (k, (_, v)) in remap_keys.iter().zip(&part.remappings) {
            pairs.push((k.as_str(), v.clone()));
        }
        meta_line(&mut out, pa, &pairs);
        for port in &part.ports {
            let alias = &aliases.ports[&Endpoint::new(&part.part_name, &port.key)];
            let mut pairs = vec![
                ("name", port.port.declared_name.clone()),
                ("display", port.display_name.clone()),
                ("runtime", port.runtime_name.clone()),
                ("scoped", port.scoped.to_string()),
            ];
            if let Some(h) = &port.port.handler {
                pairs.push(("handler", h.clone()));
            }
            meta_line(&mut out, alias, &pairs);
        }
    }
    for t in &c.topics {
        meta_line(
            &mut out,
            &aliases.topics[&t.runtime_name],
            &[("runtime", t.runtime_name.clone()), ("type", t.message_type.clone())],
        );
    }
    for s in &c.services {
        meta_line(
            &mut out,
            &aliases.services[&s.runtime_name],
            &[("runtime", s.runtime_name.clone()), ("type", s.service_type.clone())],
        );
    }
    out.push_str("@enduml\n");
    out
}

fn emit_part(out: &mut String, _c: &ComposedClassifier, part: &crate::model::NodePart, aliases: &ComposedAliases, depth: usize) {
    let indent = "  ".repeat(depth);
    let extra = if part.classifier_kind == ClassifierKind::Composed {
        format!(" <<{COMPOSED_STEREOTYPE}>>")
    } else {
        String::new()
    };
    let pa = &aliases.parts[&part.part_name];
    let head = format!("{indent}component \"{}\" as {pa} <<{}>>{extra}", label(&part.label()), part.stereotype);
    if part.ports.is_empty() {
        let _ = writeln!(out, "{head}");
        return;
    }
    let _ = writeln!(out, "{head} {{");
    for port in &part.ports {
        let alias = &aliases.ports[&Endpoint::new(&part.part_name, &port.key)];
        let _ = writeln!(
            out,
            "{indent}  {} \"{} / {}\" as {alias} <<{}>>",
            port_keyword(port.port.kind),
            label(&port.key),
            label(&port.port.interface_type),
            port.port.kind
        );
    }
    let _ = writeln!(out, "{indent}}}");
}

fn emit_scope(
    out: &mut String,
    c: &ComposedClassifier,
    ns: &NamespaceScope,
    aliases: &ComposedAliases,
    counter: &mut usize,
    depth: usize,
) {
    *counter += 1;
    let indent = "  ".repeat(depth);
    let _ = writeln!(
        out,
        "{indent}rectangle \"{}\" as ns_{} <<{}>> #line.dashed {{",
        label(&ns.name),
        counter,
        ns.stereotype
    );
    for name in &ns.members.parts {
        if let Some(part) = c.part(name) {
            emit_part(out, c, part, aliases, depth + 1);
        }
    }
    for child in &ns.children {
        emit_scope(out, c, child, aliases, counter, depth + 1);
    }
    for runtime in &ns.members.topics {
        if let (Some(t), Some(alias)) = (c.topics.iter().find(|t| &t.runtime_name == runtime), aliases.topics.get(runtime)) {
            let _ = writeln!(out, "{indent}  queue \"{}\" as {alias} <<{TOPIC_STEREOTYPE}>>", label(&t.display_name));
        }
    }
    for runtime in &ns.members.services {
        if let (Some(s), Some(alias)) = (c.services.iter().find(|s| &s.runtime_name == runtime), aliases.services.get(runtime)) {
            let _ = writeln!(out, "{indent}  interface \"{}\" as {alias} <<{SERVICE_STEREOTYPE}>>", label(&s.display_name));
        }
    }
    let _ = writeln!(out, "{indent}}}");
}

pub fn emit_model(m: &Model, types: &[TypeEntry]) -> String {
    match m {
        Model::Atomic(a) => emit_atomic(a, types),
        Model::Composed(c) => emit_composed(c),
    }
}

/// Inserts `'@key value` header lines right after `@startuml`.
pub fn with_header(text: &str, lines: &[(String, String)]) -> String {
    let mut header = String::new();
    for (k, v) in lines {
        let _ = writeln!(header, "'@{k} {v}");
    }
    match text.find('\n') {
        Some(i) if text.starts_with("@startuml") => format!("{}{}{}", &text[..=i], header, &text[i + 1..]),
        _ => format!("{header}{text}"),
    }
}
