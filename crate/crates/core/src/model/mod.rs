//! Structural metamodel for ROS 2 architectures.
//!
//! Code-level node classes become [`AtomicClassifier`]s. Launch files become
//! [`ComposedClassifier`]s whose [`NodePart`]s instantiate other classifiers,
//! wired together by [`TopicBinding`]s and [`ServiceBinding`]s and scoped by
//! nested [`NamespaceScope`]s.
//!
//! All types are plain values. Nothing here performs I/O.

mod names;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use names::{prefix_runtime, resolve_runtime_name, split_namespace, NameError, ResolvedName};
pub use validate::{conforms, validate_model, ClassifierRegistry, ResolutionError, Violation};

pub const ATOMIC_STEREOTYPE: &str = "AtomicRosNodeClassifier";
pub const COMPOSED_STEREOTYPE: &str = "ComposedRosNodeClassifier";
pub const PART_STEREOTYPE: &str = "RosNodePart";
pub const NAMESPACE_STEREOTYPE: &str = "Namespace";

/// Sentinel used for names that are computed at runtime and cannot be
/// recovered from literals.
pub const DYNAMIC_NAME: &str = "<dynamic>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PortKind {
    Publisher,
    Subscriber,
    ServiceProvided,
    ServiceRequired,
}

impl PortKind {
    pub const ALL: [PortKind; 4] = [
        PortKind::Publisher,
        PortKind::Subscriber,
        PortKind::ServiceProvided,
        PortKind::ServiceRequired,
    ];

    pub fn is_topic(self) -> bool {
        matches!(self, PortKind::Publisher | PortKind::Subscriber)
    }

    pub fn is_service(self) -> bool {
        !self.is_topic()
    }

    /// Subscribers and provided services carry the name of the function that
    /// handles incoming data.
    pub fn has_handler(self) -> bool {
        matches!(self, PortKind::Subscriber | PortKind::ServiceProvided)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PortKind::Publisher => "Publisher",
            PortKind::Subscriber => "Subscriber",
            PortKind::ServiceProvided => "ServiceProvided",
            PortKind::ServiceRequired => "ServiceRequired",
        }
    }

    pub fn parse(s: &str) -> Option<PortKind> {
        PortKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for PortKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Port {
    pub identifier: String,
    pub kind: PortKind,
    /// Message type for topic ports, service type for service ports.
    pub interface_type: String,
    /// Topic or service name as written in source.
    pub declared_name: String,
    pub handler: Option<String>,
}

impl Port {
    /// Diagram label, `identifier / type`.
    pub fn label(&self) -> String {
        format!("{} / {}", self.identifier, self.interface_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Field {
    pub field_type: String,
    pub name: String,
}

impl Field {
    pub fn new(field_type: impl Into<String>, name: impl Into<String>) -> Self {
        Field {
            field_type: field_type.into(),
            name: name.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTypeDef {
    pub qualified_name: String,
    pub fields: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceTypeDef {
    pub qualified_name: String,
    pub request_fields: Vec<Field>,
    pub response_fields: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicClassifier {
    pub name: String,
    pub stereotype: String,
    pub ports: Vec<Port>,
    pub source_refs: Vec<String>,
}

impl AtomicClassifier {
    pub fn new(name: impl Into<String>) -> Self {
        AtomicClassifier {
            name: name.into(),
            stereotype: ATOMIC_STEREOTYPE.to_string(),
            ports: Vec::new(),
            source_refs: Vec::new(),
        }
    }

    pub fn port(&self, identifier: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.identifier == identifier)
    }

    /// Copy with ports and source refs in canonical order, used for
    /// order-insensitive structural comparison.
    pub fn normalized(&self) -> AtomicClassifier {
        let mut out = self.clone();
        out.ports.sort_by(|a, b| natural_cmp(&a.identifier, &b.identifier));
        out.source_refs.sort();
        out.source_refs.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    Atomic,
    Composed,
}

/// A port as seen on a part: the classifier's port plus the names it
/// resolves to in the enclosing launch context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartPort {
    /// Unique within the part. Equal to the port identifier for atomic
    /// parts; for composed parts it is `<inner part>.<inner key>`.
    pub key: String,
    pub port: Port,
    /// Post-remap, pre-prefix name.
    pub display_name: String,
    /// Fully resolved name relative to the root of the enclosing classifier.
    pub runtime_name: String,
    /// False when the name is absolute and exempt from namespace prefixing.
    pub scoped: bool,
}

impl PartPort {
    pub fn is_dynamic(&self) -> bool {
        self.display_name == DYNAMIC_NAME || self.port.declared_name == DYNAMIC_NAME
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePart {
    pub part_name: String,
    pub classifier_ref: String,
    pub classifier_kind: ClassifierKind,
    pub stereotype: String,
    pub effective_namespace: Vec<String>,
    pub remappings: BTreeMap<String, String>,
    pub ports: Vec<PartPort>,
}

impl NodePart {
    pub fn port(&self, key: &str) -> Option<&PartPort> {
        self.ports.iter().find(|p| p.key == key)
    }

    /// UML-style `Name : typeName` label.
    pub fn label(&self) -> String {
        format!("{} : {}", self.part_name, self.classifier_ref)
    }
}

/// Reference from a binding to one port of one part.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub part: String,
    pub port: String,
}

impl Endpoint {
    pub fn new(part: impl Into<String>, port: impl Into<String>) -> Self {
        Endpoint {
            part: part.into(),
            port: port.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicBinding {
    pub display_name: String,
    pub runtime_name: String,
    pub message_type: String,
    pub endpoints: Vec<Endpoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceBinding {
    pub display_name: String,
    pub runtime_name: String,
    pub service_type: String,
    pub endpoints: Vec<Endpoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeMembers {
    pub parts: Vec<String>,
    /// Runtime names of the topic bindings placed in this scope.
    pub topics: Vec<String>,
    /// Runtime names of the service bindings placed in this scope.
    pub services: Vec<String>,
}

impl ScopeMembers {
    pub fn is_empty(&self) -> bool {
        self.parts.is_empty() && self.topics.is_empty() && self.services.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamespaceScope {
    pub name: String,
    pub stereotype: String,
    pub members: ScopeMembers,
    pub children: Vec<NamespaceScope>,
}

impl NamespaceScope {
    pub fn new(name: impl Into<String>) -> Self {
        NamespaceScope {
            name: name.into(),
            stereotype: NAMESPACE_STEREOTYPE.to_string(),
            members: ScopeMembers::default(),
            children: Vec::new(),
        }
    }

    /// Visits this scope and all descendants depth-first, passing the full
    /// path of each scope.
    pub fn walk<'a>(&'a self, prefix: &mut Vec<String>, f: &mut dyn FnMut(&[String], &'a NamespaceScope)) {
        prefix.push(self.name.clone());
        f(prefix, self);
        for child in &self.children {
            child.walk(prefix, f);
        }
        prefix.pop();
    }

    fn normalize(&mut self) {
        self.members.parts.sort();
        self.members.topics.sort();
        self.members.services.sort();
        for child in &mut self.children {
            child.normalize();
        }
        self.children.sort_by(|a, b| a.name.cmp(&b.name));
    }
}

/// Unconnected internal port promoted to the boundary of a composed
/// classifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExternalPort {
    pub part: String,
    pub port: PartPort,
}

impl ExternalPort {
    /// Key under which a part typed by the enclosing classifier exposes
    /// this port.
    pub fn key(&self) -> String {
        format!("{}.{}", self.part, self.port.key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedClassifier {
    pub name: String,
    pub stereotype: String,
    pub parts: Vec<NodePart>,
    pub namespaces: Vec<NamespaceScope>,
    pub topics: Vec<TopicBinding>,
    pub services: Vec<ServiceBinding>,
    pub external_ports: Vec<ExternalPort>,
    pub launch_ref: String,
}

impl ComposedClassifier {
    pub fn new(name: impl Into<String>, launch_ref: impl Into<String>) -> Self {
        ComposedClassifier {
            name: name.into(),
            stereotype: COMPOSED_STEREOTYPE.to_string(),
            parts: Vec::new(),
            namespaces: Vec::new(),
            topics: Vec::new(),
            services: Vec::new(),
            external_ports: Vec::new(),
            launch_ref: launch_ref.into(),
        }
    }

    pub fn part(&self, name: &str) -> Option<&NodePart> {
        self.parts.iter().find(|p| p.part_name == name)
    }

    /// Copy with every list in canonical order.
    pub fn normalized(&self) -> ComposedClassifier {
        let mut out = self.clone();
        for part in &mut out.parts {
            part.ports.sort_by(|a, b| natural_cmp(&a.key, &b.key));
        }
        out.parts.sort_by(|a, b| a.part_name.cmp(&b.part_name));
        for ns in &mut out.namespaces {
            ns.normalize();
        }
        out.namespaces.sort_by(|a, b| a.name.cmp(&b.name));
        for t in &mut out.topics {
            t.endpoints.sort();
        }
        out.topics.sort_by(|a, b| a.runtime_name.cmp(&b.runtime_name));
        for s in &mut out.services {
            s.endpoints.sort();
        }
        out.services.sort_by(|a, b| a.runtime_name.cmp(&b.runtime_name));
        out.external_ports
            .sort_by(|a, b| natural_cmp(&a.key(), &b.key()));
        out
    }

    /// Full path of the scope each part belongs to, keyed by part name.
    pub fn part_scopes(&self) -> BTreeMap<String, Vec<String>> {
        let mut out = BTreeMap::new();
        let mut prefix = Vec::new();
        for ns in &self.namespaces {
            ns.walk(&mut prefix, &mut |path, scope| {
                for part in &scope.members.parts {
                    out.insert(part.clone(), path.to_vec());
                }
            });
        }
        out
    }

    /// Every (part, port) pair attached to some binding.
    pub fn bound_endpoints(&self) -> std::collections::BTreeSet<Endpoint> {
        self.topics
            .iter()
            .flat_map(|t| t.endpoints.iter())
            .chain(self.services.iter().flat_map(|s| s.endpoints.iter()))
            .cloned()
            .collect()
    }
}

/// Either level of model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Model {
    Atomic(AtomicClassifier),
    Composed(ComposedClassifier),
}

impl Model {
    pub fn name(&self) -> &str {
        match self {
            Model::Atomic(c) => &c.name,
            Model::Composed(c) => &c.name,
        }
    }
}

/// Recomputes `external_ports` as exactly the part ports that no binding
/// references.
pub fn promote_external_ports(mut composed: ComposedClassifier) -> ComposedClassifier {
    let bound = composed.bound_endpoints();
    let mut external = Vec::new();
    for part in &composed.parts {
        for port in &part.ports {
            let endpoint = Endpoint::new(&part.part_name, &port.key);
            if !bound.contains(&endpoint) {
                external.push(ExternalPort {
                    part: part.part_name.clone(),
                    port: port.clone(),
                });
            }
        }
    }
    composed.external_ports = external;
    composed
}

/// Orders `p2` before `p10`: alphabetic prefix first, then the numeric
/// suffix by value.
pub fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    fn split(s: &str) -> (&str, Option<u64>, &str) {
        let digits_at = s.find(|c: char| c.is_ascii_digit());
        match digits_at {
            Some(i) => {
                let rest = &s[i..];
                let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
                (&s[..i], rest[..end].parse().ok(), &rest[end..])
            }
            None => (s, None, ""),
        }
    }
    let (pa, na, ra) = split(a);
    let (pb, nb, rb) = split(b);
    pa.cmp(pb)
        .then(na.cmp(&nb))
        .then_with(|| natural_cmp_tail(ra, rb))
        .then_with(|| a.cmp(b))
}

fn natural_cmp_tail(a: &str, b: &str) -> std::cmp::Ordering {
    if a.is_empty() || b.is_empty() {
        a.cmp(b)
    } else {
        natural_cmp(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn port(id: &str, kind: PortKind) -> Port {
        Port {
            identifier: id.into(),
            kind,
            interface_type: "skeleton::msg::Num".into(),
            declared_name: "number".into(),
            handler: kind.has_handler().then(|| "cb".to_string()),
        }
    }

    fn part_port(id: &str, kind: PortKind, runtime: &str) -> PartPort {
        PartPort {
            key: id.into(),
            port: port(id, kind),
            display_name: runtime.trim_start_matches('/').into(),
            runtime_name: runtime.into(),
            scoped: true,
        }
    }

    fn part(name: &str, ports: Vec<PartPort>) -> NodePart {
        NodePart {
            part_name: name.into(),
            classifier_ref: "FooNode".into(),
            classifier_kind: ClassifierKind::Atomic,
            stereotype: PART_STEREOTYPE.into(),
            effective_namespace: vec![],
            remappings: BTreeMap::new(),
            ports,
        }
    }

    #[test]
    fn port_label_format() {
        assert_eq!(port("p1", PortKind::Publisher).label(), "p1 / skeleton::msg::Num");
    }

    #[test]
    fn natural_order_of_identifiers() {
        let mut ids = vec!["p10", "s1", "p2", "p1"];
        ids.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(ids, ["p1", "p2", "p10", "s1"]);
    }

    #[test]
    fn unconnected_publisher_is_promoted() {
        let mut c = ComposedClassifier::new("x", "x.launch.py");
        c.parts.push(part("foo", vec![part_port("p1", PortKind::Publisher, "/a")]));
        let c = promote_external_ports(c);
        assert_eq!(c.external_ports.len(), 1);
        assert_eq!(c.external_ports[0].port.key, "p1");
        assert_eq!(c.external_ports[0].port.port.label(), "p1 / skeleton::msg::Num");
    }

    #[test]
    fn fully_connected_has_no_external_ports() {
        let mut c = ComposedClassifier::new("x", "x.launch.py");
        c.parts.push(part("foo", vec![part_port("p1", PortKind::Publisher, "/a")]));
        c.parts.push(part("bar", vec![part_port("p1", PortKind::Subscriber, "/a")]));
        c.topics.push(TopicBinding {
            display_name: "a".into(),
            runtime_name: "/a".into(),
            message_type: "skeleton::msg::Num".into(),
            endpoints: vec![Endpoint::new("foo", "p1"), Endpoint::new("bar", "p1")],
        });
        let c = promote_external_ports(c);
        assert!(c.external_ports.is_empty());
    }

    #[test]
    fn promotion_is_transitive_per_level() {
        // inner level: one part with an unconnected publisher q1
        let mut inner = ComposedClassifier::new("inner", "inner.launch.py");
        inner.parts.push(part("foo", vec![part_port("q1", PortKind::Publisher, "/q")]));
        let inner = promote_external_ports(inner);
        assert_eq!(inner.external_ports.len(), 1);

        // outer level: a part typed by `inner`, exposing the promoted port
        let ports = inner
            .external_ports
            .iter()
            .map(|e| PartPort {
                key: e.key(),
                ..e.port.clone()
            })
            .collect();
        let mut sub = part("inner_1", ports);
        sub.classifier_ref = "inner".into();
        sub.classifier_kind = ClassifierKind::Composed;
        let mut outer = ComposedClassifier::new("outer", "outer.launch.py");
        outer.parts.push(sub);
        let outer = promote_external_ports(outer);
        assert_eq!(outer.external_ports.len(), 1);
        assert_eq!(outer.external_ports[0].port.port.identifier, "q1");
        assert_eq!(outer.external_ports[0].key(), "inner_1.foo.q1");
    }

    #[test]
    fn promotion_is_idempotent_on_mixed_model() {
        let mut c = ComposedClassifier::new("x", "x.launch.py");
        c.parts.push(part(
            "foo",
            vec![
                part_port("p1", PortKind::Publisher, "/a"),
                part_port("p2", PortKind::Publisher, "/b"),
            ],
        ));
        c.parts.push(part("bar", vec![part_port("p1", PortKind::Subscriber, "/a")]));
        c.topics.push(TopicBinding {
            display_name: "a".into(),
            runtime_name: "/a".into(),
            message_type: "skeleton::msg::Num".into(),
            endpoints: vec![Endpoint::new("foo", "p1"), Endpoint::new("bar", "p1")],
        });
        let once = promote_external_ports(c);
        let twice = promote_external_ports(once.clone());
        assert_eq!(once, twice);
        assert_eq!(once.external_ports.len(), 1);
    }
}
