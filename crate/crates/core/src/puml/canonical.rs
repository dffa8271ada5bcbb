use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::model::{
    AtomicClassifier, ClassifierKind, ComposedClassifier, Model, PortKind, COMPOSED_STEREOTYPE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Atomic,
    Composed,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Atomic => "atomic",
            Level::Composed => "composed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementClass {
    ClassifierName,
    ClassifierStereotype,
    MessageType,
    Callback,
    ServiceType,
    ServiceFunction,
    ComposedName,
    ComposedStereotype,
    NamespaceName,
    NamespaceStereotype,
    RemappedTopic,
    PartName,
    PartStereotype,
    PartType,
    Connection,
}

impl ElementClass {
    pub const ALL: [ElementClass; 15] = [
        ElementClass::ClassifierName,
        ElementClass::ClassifierStereotype,
        ElementClass::MessageType,
        ElementClass::Callback,
        ElementClass::ServiceType,
        ElementClass::ServiceFunction,
        ElementClass::ComposedName,
        ElementClass::ComposedStereotype,
        ElementClass::NamespaceName,
        ElementClass::NamespaceStereotype,
        ElementClass::RemappedTopic,
        ElementClass::PartName,
        ElementClass::PartStereotype,
        ElementClass::PartType,
        ElementClass::Connection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ElementClass::ClassifierName => "classifier_name",
            ElementClass::ClassifierStereotype => "classifier_stereotype",
            ElementClass::MessageType => "message_type",
            ElementClass::Callback => "callback",
            ElementClass::ServiceType => "service_type",
            ElementClass::ServiceFunction => "service_function",
            ElementClass::ComposedName => "composed_name",
            ElementClass::ComposedStereotype => "composed_stereotype",
            ElementClass::NamespaceName => "namespace_name",
            ElementClass::NamespaceStereotype => "namespace_stereotype",
            ElementClass::RemappedTopic => "remapped_topic",
            ElementClass::PartName => "part_name",
            ElementClass::PartStereotype => "part_stereotype",
            ElementClass::PartType => "part_type",
            ElementClass::Connection => "connection",
        }
    }

    pub fn parse(s: &str) -> Option<ElementClass> {
        ElementClass::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// One scored fact about a model, e.g. `part_type|part=foo|type=FooNode`.
///
/// Ordering and equality follow the encoded form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalElement {
    encoded: String,
    class: ElementClass,
}

fn normalize_value(v: &str) -> String {
    v.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn escape(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    for c in v.chars() {
        if c == '\\' || c == '|' {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

impl CanonicalElement {
    pub fn new<'a>(class: ElementClass, attrs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let attrs: BTreeMap<&str, String> = attrs.into_iter().map(|(k, v)| (k, normalize_value(v))).collect();
        let mut encoded = class.as_str().to_string();
        for (k, v) in attrs {
            encoded.push('|');
            encoded.push_str(k);
            encoded.push('=');
            encoded.push_str(&escape(&v));
        }
        CanonicalElement { encoded, class }
    }

    pub fn class(&self) -> ElementClass {
        self.class
    }

    pub fn as_str(&self) -> &str {
        &self.encoded
    }

    /// Inverse of the encoding. `None` for unknown classes or broken fields.
    pub fn decode(s: &str) -> Option<(ElementClass, BTreeMap<String, String>)> {
        let mut fields = Vec::new();
        let mut cur = String::new();
        let mut chars = s.chars();
        while let Some(c) = chars.next() {
            match c {
                '\\' => cur.push(chars.next()?),
                '|' => fields.push(std::mem::take(&mut cur)),
                c => cur.push(c),
            }
        }
        fields.push(cur);
        let class = ElementClass::parse(&fields[0])?;
        let mut attrs = BTreeMap::new();
        for f in &fields[1..] {
            let (k, v) = f.split_once('=')?;
            attrs.insert(k.to_string(), v.to_string());
        }
        Some((class, attrs))
    }
}

impl fmt::Display for CanonicalElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encoded)
    }
}

impl Serialize for CanonicalElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.encoded)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalOptions {
    /// Adds one `connection` element per publisher/subscriber pair on a topic.
    pub connectivity: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalElementSet {
    pub level: Level,
    pub model_id: String,
    pub elements: BTreeSet<CanonicalElement>,
}

impl CanonicalElementSet {
    pub fn empty(level: Level, model_id: impl Into<String>) -> Self {
        CanonicalElementSet {
            level,
            model_id: model_id.into(),
            elements: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn of_class(&self, class: ElementClass) -> impl Iterator<Item = &CanonicalElement> {
        self.elements.iter().filter(move |e| e.class == class)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("canonical sets serialize")
    }
}

pub fn canonicalize(model: &Model) -> CanonicalElementSet {
    canonicalize_with(model, &CanonicalOptions::default())
}

pub fn canonicalize_with(model: &Model, options: &CanonicalOptions) -> CanonicalElementSet {
    match model {
        Model::Atomic(c) => atomic(c),
        Model::Composed(c) => composed(c, options),
    }
}

fn atomic(c: &AtomicClassifier) -> CanonicalElementSet {
    let mut set = CanonicalElementSet::empty(Level::Atomic, normalize_value(&c.name));
    let mut add = |class, attrs: &[(&str, &str)]| {
        set.elements.insert(CanonicalElement::new(class, attrs.iter().copied()));
    };
    add(ElementClass::ClassifierName, &[("name", &c.name)]);
    add(ElementClass::ClassifierStereotype, &[("stereotype", &c.stereotype)]);
    for p in &c.ports {
        let ty = p.interface_type.as_str();
        if p.kind.is_topic() {
            add(ElementClass::MessageType, &[("type", ty)]);
        } else {
            add(ElementClass::ServiceType, &[("type", ty)]);
        }
        if let Some(h) = &p.handler {
            match p.kind {
                PortKind::Subscriber => add(ElementClass::Callback, &[("name", h)]),
                PortKind::ServiceProvided => add(ElementClass::ServiceFunction, &[("name", h)]),
                _ => {}
            }
        }
    }
    set
}

fn composed(c: &ComposedClassifier, options: &CanonicalOptions) -> CanonicalElementSet {
    let mut set = CanonicalElementSet::empty(Level::Composed, normalize_value(&c.name));
    let mut add = |class, attrs: &[(&str, &str)]| {
        set.elements.insert(CanonicalElement::new(class, attrs.iter().copied()));
    };
    add(ElementClass::ComposedName, &[("name", &c.name)]);
    add(ElementClass::ComposedStereotype, &[("stereotype", &c.stereotype)]);
    for ns in &c.namespaces {
        ns.walk(&mut Vec::new(), &mut |_, scope| {
            add(ElementClass::NamespaceName, &[("name", &scope.name)]);
            add(
                ElementClass::NamespaceStereotype,
                &[("name", &scope.name), ("stereotype", &scope.stereotype)],
            );
        });
    }
    for t in &c.topics {
        add(ElementClass::RemappedTopic, &[("name", &t.display_name)]);
    }
    for p in &c.parts {
        let name = p.part_name.as_str();
        add(ElementClass::PartName, &[("name", name)]);
        add(ElementClass::PartStereotype, &[("part", name), ("stereotype", &p.stereotype)]);
        if p.classifier_kind == ClassifierKind::Composed {
            add(ElementClass::PartStereotype, &[("part", name), ("stereotype", COMPOSED_STEREOTYPE)]);
        }
        add(ElementClass::PartType, &[("part", name), ("type", &p.classifier_ref)]);
    }
    if options.connectivity {
        for t in &c.topics {
            let by_kind = |kind: PortKind| -> Vec<&str> {
                t.endpoints
                    .iter()
                    .filter(|e| c.part(&e.part).and_then(|p| p.port(&e.port)).map(|p| p.port.kind) == Some(kind))
                    .map(|e| e.part.as_str())
                    .collect()
            };
            for publisher in by_kind(PortKind::Publisher) {
                for subscriber in by_kind(PortKind::Subscriber) {
                    add(
                        ElementClass::Connection,
                        &[("topic", &t.display_name), ("publisher", publisher), ("subscriber", subscriber)],
                    );
                }
            }
        }
    }
    set
}
