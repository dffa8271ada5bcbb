use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::extract::NodeScan;
use crate::interfaces::InterfaceSet;
use crate::model::{
    validate_model, ComposedClassifier, Model, PortKind, Violation, ATOMIC_STEREOTYPE, COMPOSED_STEREOTYPE,
    DYNAMIC_NAME, NAMESPACE_STEREOTYPE, PART_STEREOTYPE,
};
use crate::puml::{parse_puml_lenient, Issue, SERVICE_STEREOTYPE, TOPIC_STEREOTYPE};

pub const CONTRACT_VERSION: u32 = 1;

/// Admissible element types and label rules for synthesized diagrams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlueprintContract {
    pub version: u32,
    pub stereotypes: Vec<String>,
    pub port_kinds: Vec<String>,
    /// Human-readable label patterns, also quoted in prompts.
    pub label_formats: Vec<(String, String)>,
    /// Every classifier, part, namespace, topic and type name must occur in
    /// the scan, interface or launch inputs.
    pub traceability: bool,
}

impl BlueprintContract {
    pub fn v1() -> Self {
        let stereotypes = [
            ATOMIC_STEREOTYPE,
            COMPOSED_STEREOTYPE,
            PART_STEREOTYPE,
            NAMESPACE_STEREOTYPE,
            TOPIC_STEREOTYPE,
            SERVICE_STEREOTYPE,
        ]
        .into_iter()
        .chain(PortKind::ALL.iter().map(|k| k.as_str()))
        .map(str::to_string)
        .collect();
        BlueprintContract {
            version: CONTRACT_VERSION,
            stereotypes,
            port_kinds: PortKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
            label_formats: vec![
                ("atomic topic port".into(), "p<n> / <package>::msg::<Type>".into()),
                ("atomic service port".into(), "s<n> / <package>::srv::<Type>".into()),
                ("part".into(), "<part name> : <classifier name>".into()),
                ("part port".into(), "<port key> / <type>".into()),
                ("external port".into(), "<part name>.<port key> / <type>".into()),
            ],
            traceability: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let c: BlueprintContract = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if c.version != CONTRACT_VERSION {
            return Err(format!("unsupported contract version {}", c.version));
        }
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("contract serializes")
    }
}

/// Names that synthesized diagrams may use.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceIndex {
    pub classes: BTreeSet<String>,
    pub types: BTreeSet<String>,
    pub handlers: BTreeSet<String>,
    pub composed: BTreeSet<String>,
    pub parts: BTreeSet<String>,
    pub namespaces: BTreeSet<String>,
    pub channels: BTreeSet<String>,
}

impl TraceIndex {
    /// `launch` holds the classifiers resolved from the launch inputs.
    pub fn new(scan: &NodeScan, interfaces: &InterfaceSet, launch: &[ComposedClassifier]) -> Self {
        let mut t = TraceIndex::default();
        for n in &scan.nodes {
            t.classes.insert(n.class_name.clone());
            for e in &n.endpoints {
                t.types.insert(e.interface_type.clone());
                t.channels.insert(e.declared_name.clone());
                t.handlers.extend(e.handler.clone());
            }
        }
        t.types.extend(interfaces.messages.keys().cloned());
        t.types.extend(interfaces.services.keys().cloned());
        for c in launch {
            t.composed.insert(c.name.clone());
            for p in &c.parts {
                t.parts.insert(p.part_name.clone());
                t.channels.extend(p.remappings.values().cloned());
                t.namespaces.extend(p.effective_namespace.iter().cloned());
                for port in &p.ports {
                    t.channels.insert(port.display_name.clone());
                    t.channels.insert(port.runtime_name.clone());
                }
            }
            for b in &c.topics {
                t.channels.insert(b.display_name.clone());
                t.channels.insert(b.runtime_name.clone());
            }
            for b in &c.services {
                t.channels.insert(b.display_name.clone());
                t.channels.insert(b.runtime_name.clone());
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContractViolation {
    Unparseable { message: String },
    InadmissibleStereotype { stereotype: String, line: Option<usize> },
    MalformedLabel { label: String, expected: String, line: usize },
    PortIdentifier { owner: String, identifier: String },
    Untraceable { element: String, name: String },
    Structural { violation: Violation },
}

impl fmt::Display for ContractViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContractViolation::Unparseable { message } => write!(f, "not parseable: {message}"),
            ContractViolation::InadmissibleStereotype { stereotype, line } => match line {
                Some(l) => write!(f, "line {l}: stereotype <<{stereotype}>> is not admissible"),
                None => write!(f, "stereotype <<{stereotype}>> is not admissible"),
            },
            ContractViolation::MalformedLabel { label, expected, line } => {
                write!(f, "line {line}: label `{label}` does not follow `{expected}`")
            }
            ContractViolation::PortIdentifier { owner, identifier } => {
                write!(f, "{owner}: port identifier `{identifier}` does not follow p<n>/s<n>")
            }
            ContractViolation::Untraceable { element, name } => {
                write!(f, "{element} `{name}` does not occur in the inputs")
            }
            ContractViolation::Structural { violation } => write!(f, "{violation}"),
        }
    }
}

fn identifier_ok(kind: PortKind, id: &str) -> bool {
    let prefix = if kind.is_topic() { 'p' } else { 's' };
    id.strip_prefix(prefix)
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) && !n.starts_with('0'))
}

fn port_kinds(model: &Model) -> BTreeSet<PortKind> {
    match model {
        Model::Atomic(c) => c.ports.iter().map(|p| p.kind).collect(),
        Model::Composed(c) => c.parts.iter().flat_map(|p| p.ports.iter().map(|q| q.port.kind)).collect(),
    }
}

/// Checks a diagram against the contract. An empty result means the text
/// may be accepted.
pub fn validate_llm_output(text: &str, contract: &BlueprintContract, trace: &TraceIndex) -> Vec<ContractViolation> {
    let parsed = match parse_puml_lenient(text) {
        Ok(p) => p,
        Err(e) => {
            return vec![ContractViolation::Unparseable { message: e.to_string() }];
        }
    };
    let mut out = Vec::new();
    for issue in &parsed.issues {
        out.push(match issue {
            Issue::UnknownStereotype { line, stereotype } => ContractViolation::InadmissibleStereotype {
                stereotype: stereotype.clone(),
                line: Some(*line),
            },
            Issue::MalformedLabel { line, label, expected } => ContractViolation::MalformedLabel {
                label: label.clone(),
                expected: expected.to_string(),
                line: *line,
            },
        });
    }
    let mut stereotypes: Vec<&str> = Vec::new();
    let mut untraceable = |element: &str, name: &str, known: &BTreeSet<String>| {
        if contract.traceability && !known.contains(name) {
            out.push(ContractViolation::Untraceable {
                element: element.to_string(),
                name: name.to_string(),
            });
        }
    };
    match &parsed.model {
        Model::Atomic(c) => {
            stereotypes.push(&c.stereotype);
            untraceable("classifier", &c.name, &trace.classes);
            for p in &c.ports {
                untraceable("type", &p.interface_type, &trace.types);
                if let Some(h) = &p.handler {
                    untraceable("handler", h, &trace.handlers);
                }
            }
        }
        Model::Composed(c) => {
            stereotypes.push(&c.stereotype);
            untraceable("composed classifier", &c.name, &trace.composed);
            let classifiers: BTreeSet<String> = trace.classes.union(&trace.composed).cloned().collect();
            for p in &c.parts {
                stereotypes.push(&p.stereotype);
                untraceable("part", &p.part_name, &trace.parts);
                untraceable("part type", &p.classifier_ref, &classifiers);
                for port in &p.ports {
                    untraceable("type", &port.port.interface_type, &trace.types);
                }
            }
            for ns in &c.namespaces {
                ns.walk(&mut Vec::new(), &mut |_, scope| {
                    stereotypes.push(&scope.stereotype);
                    untraceable("namespace", &scope.name, &trace.namespaces);
                });
            }
            for t in &c.topics {
                if t.display_name != DYNAMIC_NAME {
                    untraceable("topic", &t.display_name, &trace.channels);
                }
            }
            for s in &c.services {
                if s.display_name != DYNAMIC_NAME {
                    untraceable("service", &s.display_name, &trace.channels);
                }
            }
        }
    }
    for s in stereotypes {
        if !contract.stereotypes.iter().any(|a| a == s) {
            out.push(ContractViolation::InadmissibleStereotype {
                stereotype: s.to_string(),
                line: None,
            });
        }
    }
    if let Model::Atomic(c) = &parsed.model {
        for p in &c.ports {
            if !identifier_ok(p.kind, &p.identifier) {
                out.push(ContractViolation::PortIdentifier {
                    owner: c.name.clone(),
                    identifier: p.identifier.clone(),
                });
            }
        }
    }
    for k in port_kinds(&parsed.model) {
        if !contract.port_kinds.iter().any(|a| a == k.as_str()) {
            out.push(ContractViolation::InadmissibleStereotype {
                stereotype: k.as_str().to_string(),
                line: None,
            });
        }
    }
    out.extend(
        validate_model(&parsed.model, None)
            .into_iter()
            .map(|violation| ContractViolation::Structural { violation }),
    );
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{EndpointRecord, NodeClassRecord, SourceLocation};
    use crate::model::{AtomicClassifier, Port};
    use crate::puml::emit_atomic;

    fn fixture() -> (NodeScan, AtomicClassifier) {
        let scan = NodeScan {
            repo_root: ".".into(),
            tool_version: "0".into(),
            nodes: vec![NodeClassRecord {
                class_name: "FooNode".into(),
                declared_node_name: None,
                files: vec!["src/foo.cpp".into()],
                endpoints: vec![EndpointRecord {
                    kind: PortKind::Subscriber,
                    declared_name: "/counting".into(),
                    interface_type: "skeleton::msg::Num".into(),
                    handler: Some("counting_callback".into()),
                    source_location: SourceLocation {
                        file: "src/foo.cpp".into(),
                        line: 3,
                    },
                }],
                inheritance_chain: vec![],
            }],
            warnings: vec![],
        };
        let mut c = AtomicClassifier::new("FooNode");
        c.ports.push(Port {
            identifier: "p1".into(),
            kind: PortKind::Subscriber,
            interface_type: "skeleton::msg::Num".into(),
            declared_name: "/counting".into(),
            handler: Some("counting_callback".into()),
        });
        (scan, c)
    }

    #[test]
    fn emitted_output_is_clean() {
        let (scan, c) = fixture();
        let trace = TraceIndex::new(&scan, &InterfaceSet::default(), &[]);
        let text = emit_atomic(&c, &[]);
        assert_eq!(validate_llm_output(&text, &BlueprintContract::v1(), &trace), []);
    }

    #[test]
    fn foreign_stereotype_and_untraceable_name() {
        let (scan, c) = fixture();
        let trace = TraceIndex::new(&scan, &InterfaceSet::default(), &[]);
        let text = emit_atomic(&c, &[]).replace("<<Subscriber>>", "<<Subscriber>> <<Microservice>>");
        let v = validate_llm_output(&text, &BlueprintContract::v1(), &trace);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(&v[0], ContractViolation::InadmissibleStereotype { stereotype, .. } if stereotype == "Microservice"));

        let text = emit_atomic(&c, &[]).replace("\"FooNode\"", "\"GhostNode\"");
        let v = validate_llm_output(&text, &BlueprintContract::v1(), &trace);
        assert_eq!(
            v,
            [ContractViolation::Untraceable {
                element: "classifier".into(),
                name: "GhostNode".into()
            }]
        );
    }

    #[test]
    fn garbage_and_identifiers() {
        let (scan, c) = fixture();
        let trace = TraceIndex::new(&scan, &InterfaceSet::default(), &[]);
        let v = validate_llm_output("Sure! Here is your diagram.", &BlueprintContract::v1(), &trace);
        assert!(matches!(v[0], ContractViolation::Unparseable { .. }));
        let text = emit_atomic(&c, &[]).replace("\"p1 /", "\"sub_1 /");
        let v = validate_llm_output(&text, &BlueprintContract::v1(), &trace);
        assert!(v.iter().any(|x| matches!(x, ContractViolation::PortIdentifier { .. })), "{v:?}");
    }

    #[test]
    fn contract_json_is_versioned() {
        let c = BlueprintContract::v1();
        assert_eq!(BlueprintContract::from_json(&c.to_json()).unwrap(), c);
        let bumped = c.to_json().replace("\"version\": 1", "\"version\": 9");
        assert!(BlueprintContract::from_json(&bumped).is_err());
    }
}
