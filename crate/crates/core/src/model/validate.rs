use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::*;

/// Classifiers a part may be typed by, keyed by name.
#[derive(Debug, Clone, Default)]
pub struct ClassifierRegistry {
    pub atomic: BTreeMap<String, AtomicClassifier>,
    pub composed: BTreeMap<String, ComposedClassifier>,
}

impl ClassifierRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_atomic(mut self, classifiers: impl IntoIterator<Item = AtomicClassifier>) -> Self {
        for c in classifiers {
            self.atomic.insert(c.name.clone(), c);
        }
        self
    }

    pub fn insert_composed(&mut self, c: ComposedClassifier) {
        self.composed.insert(c.name.clone(), c);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("part `{part}` references unknown classifier `{classifier}`")]
pub struct ResolutionError {
    pub part: String,
    pub classifier: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    StereotypeMismatch { element: String, expected: String, found: String },
    DuplicatePortIdentifier { owner: String, identifier: String },
    HandlerMismatch { owner: String, port: String },
    DuplicatePartName { part: String },
    TopicTypeConflict { topic: String, types: Vec<String> },
    TopicEndpointKind { topic: String, part: String, port: String },
    ServiceProviderCardinality { service: String, providers: usize },
    ServiceTypeConflict { service: String, types: Vec<String> },
    ServiceEndpointKind { service: String, part: String, port: String },
    DanglingEndpoint { binding: String, part: String, port: String },
    UnresolvedClassifier { part: String, classifier: String },
    NonConformingPart { part: String, classifier: String },
    ScopeMismatch { part: String, scope: String, namespace: String },
    DuplicateScopeMember { member: String },
    ExternalPortMismatch { part: String, port: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            StereotypeMismatch { element, expected, found } => {
                write!(f, "{element}: stereotype `{found}`, expected `{expected}`")
            }
            DuplicatePortIdentifier { owner, identifier } => {
                write!(f, "{owner}: duplicate port identifier `{identifier}`")
            }
            HandlerMismatch { owner, port } => {
                write!(f, "{owner}: port `{port}` handler does not match its kind")
            }
            DuplicatePartName { part } => write!(f, "duplicate part name `{part}`"),
            TopicTypeConflict { topic, types } => {
                write!(f, "topic `{topic}` carries several message types: {}", types.join(", "))
            }
            TopicEndpointKind { topic, part, port } => {
                write!(f, "topic `{topic}` attaches non-topic port {part}.{port}")
            }
            ServiceProviderCardinality { service, providers } => {
                write!(f, "service `{service}` has {providers} providers, expected exactly one")
            }
            ServiceTypeConflict { service, types } => {
                write!(f, "service `{service}` carries several service types: {}", types.join(", "))
            }
            ServiceEndpointKind { service, part, port } => {
                write!(f, "service `{service}` attaches non-service port {part}.{port}")
            }
            DanglingEndpoint { binding, part, port } => {
                write!(f, "binding `{binding}` references missing port {part}.{port}")
            }
            UnresolvedClassifier { part, classifier } => {
                write!(f, "part `{part}` is typed by unknown classifier `{classifier}`")
            }
            NonConformingPart { part, classifier } => {
                write!(f, "part `{part}` does not conform to `{classifier}`")
            }
            ScopeMismatch { part, scope, namespace } => {
                write!(f, "part `{part}` sits in scope `{scope}` but resolves to namespace `{namespace}`")
            }
            DuplicateScopeMember { member } => {
                write!(f, "`{member}` is listed in more than one namespace scope")
            }
            ExternalPortMismatch { part, port } => {
                write!(f, "port {part}.{port} is external iff unbound is violated")
            }
        }
    }
}

type Signature = BTreeSet<(String, PortKind, String)>;

fn classifier_signature(part: &NodePart, registry: &ClassifierRegistry) -> Result<Signature, ResolutionError> {
    let missing = || ResolutionError {
        part: part.part_name.clone(),
        classifier: part.classifier_ref.clone(),
    };
    match part.classifier_kind {
        ClassifierKind::Atomic => {
            let c = registry.atomic.get(&part.classifier_ref).ok_or_else(missing)?;
            Ok(c.ports
                .iter()
                .map(|p| (p.identifier.clone(), p.kind, p.interface_type.clone()))
                .collect())
        }
        ClassifierKind::Composed => {
            let c = registry.composed.get(&part.classifier_ref).ok_or_else(missing)?;
            Ok(c.external_ports
                .iter()
                .map(|e| (e.key(), e.port.port.kind, e.port.port.interface_type.clone()))
                .collect())
        }
    }
}

/// True iff the part exposes exactly the classifier's ports: same
/// identifiers, kinds and interface types.
pub fn conforms(part: &NodePart, registry: &ClassifierRegistry) -> Result<bool, ResolutionError> {
    let expected = classifier_signature(part, registry)?;
    let actual: Signature = part
        .ports
        .iter()
        .map(|p| (p.key.clone(), p.port.kind, p.port.interface_type.clone()))
        .collect();
    let identifiers_preserved = match part.classifier_kind {
        ClassifierKind::Atomic => part.ports.iter().all(|p| p.key == p.port.identifier),
        ClassifierKind::Composed => true,
    };
    Ok(actual.len() == part.ports.len() && actual == expected && identifiers_preserved)
}

/// Collects every breached structural invariant. Conformance of parts is
/// only checked when a registry is supplied.
pub fn validate_model(model: &Model, registry: Option<&ClassifierRegistry>) -> Vec<Violation> {
    let mut out = match model {
        Model::Atomic(c) => validate_atomic(c),
        Model::Composed(c) => validate_composed(c, registry),
    };
    out.sort();
    out.dedup();
    out
}

fn check_ports<'a>(owner: &str, ports: impl Iterator<Item = (&'a str, &'a Port)>, out: &mut Vec<Violation>) {
    let mut seen = BTreeSet::new();
    for (id, port) in ports {
        if !seen.insert(id) {
            out.push(Violation::DuplicatePortIdentifier {
                owner: owner.to_string(),
                identifier: id.to_string(),
            });
        }
        if port.kind.has_handler() != port.handler.is_some() {
            out.push(Violation::HandlerMismatch {
                owner: owner.to_string(),
                port: id.to_string(),
            });
        }
    }
}

fn validate_atomic(c: &AtomicClassifier) -> Vec<Violation> {
    let mut out = Vec::new();
    if c.stereotype != ATOMIC_STEREOTYPE {
        out.push(Violation::StereotypeMismatch {
            element: c.name.clone(),
            expected: ATOMIC_STEREOTYPE.into(),
            found: c.stereotype.clone(),
        });
    }
    check_ports(&c.name, c.ports.iter().map(|p| (p.identifier.as_str(), p)), &mut out);
    out
}

fn validate_composed(c: &ComposedClassifier, registry: Option<&ClassifierRegistry>) -> Vec<Violation> {
    let mut out = Vec::new();
    if c.stereotype != COMPOSED_STEREOTYPE {
        out.push(Violation::StereotypeMismatch {
            element: c.name.clone(),
            expected: COMPOSED_STEREOTYPE.into(),
            found: c.stereotype.clone(),
        });
    }

    let mut names = BTreeSet::new();
    for part in &c.parts {
        if !names.insert(part.part_name.as_str()) {
            out.push(Violation::DuplicatePartName {
                part: part.part_name.clone(),
            });
        }
        if part.stereotype != PART_STEREOTYPE {
            out.push(Violation::StereotypeMismatch {
                element: part.part_name.clone(),
                expected: PART_STEREOTYPE.into(),
                found: part.stereotype.clone(),
            });
        }
        check_ports(
            &part.part_name,
            part.ports.iter().map(|p| (p.key.as_str(), &p.port)),
            &mut out,
        );
        if let Some(registry) = registry {
            match conforms(part, registry) {
                Ok(true) => {}
                Ok(false) => out.push(Violation::NonConformingPart {
                    part: part.part_name.clone(),
                    classifier: part.classifier_ref.clone(),
                }),
                Err(e) => out.push(Violation::UnresolvedClassifier {
                    part: e.part,
                    classifier: e.classifier,
                }),
            }
        }
    }

    let lookup = |e: &Endpoint| c.part(&e.part).and_then(|p| p.port(&e.port));

    for topic in &c.topics {
        let mut types = BTreeSet::new();
        for e in &topic.endpoints {
            match lookup(e) {
                None => out.push(Violation::DanglingEndpoint {
                    binding: topic.runtime_name.clone(),
                    part: e.part.clone(),
                    port: e.port.clone(),
                }),
                Some(p) if !p.port.kind.is_topic() => out.push(Violation::TopicEndpointKind {
                    topic: topic.runtime_name.clone(),
                    part: e.part.clone(),
                    port: e.port.clone(),
                }),
                Some(p) => {
                    types.insert(p.port.interface_type.clone());
                }
            }
        }
        types.insert(topic.message_type.clone());
        if types.len() > 1 {
            out.push(Violation::TopicTypeConflict {
                topic: topic.runtime_name.clone(),
                types: types.into_iter().collect(),
            });
        }
    }

    for service in &c.services {
        let mut types = BTreeSet::new();
        let mut providers = 0;
        for e in &service.endpoints {
            match lookup(e) {
                None => out.push(Violation::DanglingEndpoint {
                    binding: service.runtime_name.clone(),
                    part: e.part.clone(),
                    port: e.port.clone(),
                }),
                Some(p) if !p.port.kind.is_service() => out.push(Violation::ServiceEndpointKind {
                    service: service.runtime_name.clone(),
                    part: e.part.clone(),
                    port: e.port.clone(),
                }),
                Some(p) => {
                    if p.port.kind == PortKind::ServiceProvided {
                        providers += 1;
                    }
                    types.insert(p.port.interface_type.clone());
                }
            }
        }
        if providers != 1 {
            out.push(Violation::ServiceProviderCardinality {
                service: service.runtime_name.clone(),
                providers,
            });
        }
        types.insert(service.service_type.clone());
        if types.len() > 1 {
            out.push(Violation::ServiceTypeConflict {
                service: service.runtime_name.clone(),
                types: types.into_iter().collect(),
            });
        }
    }

    // scope membership must agree with each part's resolved namespace
    let mut members = BTreeSet::new();
    let mut prefix = Vec::new();
    for ns in &c.namespaces {
        ns.walk(&mut prefix, &mut |path, scope| {
            if scope.stereotype != NAMESPACE_STEREOTYPE {
                out.push(Violation::StereotypeMismatch {
                    element: format!("/{}", path.join("/")),
                    expected: NAMESPACE_STEREOTYPE.into(),
                    found: scope.stereotype.clone(),
                });
            }
            let all = scope
                .members
                .parts
                .iter()
                .map(|p| format!("part:{p}"))
                .chain(scope.members.topics.iter().map(|t| format!("topic:{t}")))
                .chain(scope.members.services.iter().map(|s| format!("service:{s}")));
            for m in all {
                if !members.insert(m.clone()) {
                    out.push(Violation::DuplicateScopeMember { member: m });
                }
            }
        });
    }
    let scopes = c.part_scopes();
    for part in &c.parts {
        let scope = scopes.get(&part.part_name).cloned().unwrap_or_default();
        if scope != part.effective_namespace {
            out.push(Violation::ScopeMismatch {
                part: part.part_name.clone(),
                scope: format!("/{}", scope.join("/")),
                namespace: format!("/{}", part.effective_namespace.join("/")),
            });
        }
    }

    let bound = c.bound_endpoints();
    let external: BTreeSet<Endpoint> = c
        .external_ports
        .iter()
        .map(|e| Endpoint::new(&e.part, &e.port.key))
        .collect();
    for part in &c.parts {
        for port in &part.ports {
            let e = Endpoint::new(&part.part_name, &port.key);
            if bound.contains(&e) == external.contains(&e) {
                out.push(Violation::ExternalPortMismatch {
                    part: e.part,
                    port: e.port,
                });
            }
        }
    }
    for e in external.difference(&c.parts.iter().flat_map(|p| p.ports.iter().map(|q| Endpoint::new(&p.part_name, &q.key))).collect()) {
        out.push(Violation::ExternalPortMismatch {
            part: e.part.clone(),
            port: e.port.clone(),
        });
    }
    out
}
