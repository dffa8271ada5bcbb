//! Assembly of component-level and system-level models.
//!
//! The deterministic builders are always available. [`llm_synthesize`]
//! asks a chat-completion endpoint for the same diagrams and accepts an
//! answer only if it passes [`validate_llm_output`]; otherwise the
//! deterministic diagram is used.

mod contract;
mod llm;

use std::collections::{BTreeMap, BTreeSet};

use crate::extract::NodeScan;
use crate::interfaces::{InterfaceSet, TypeEntry};
use crate::launch::{resolve_composition, BuildMap, LaunchError, LaunchSpec, PackageIndex, ResolveOptions, Resolution};
use crate::model::{AtomicClassifier, Port};

pub use contract::{validate_llm_output, BlueprintContract, ContractViolation, TraceIndex, CONTRACT_VERSION};
pub use llm::{
    extract_puml, llm_synthesize, Attempt, ChatMessage, ChatRequest, HttpChatClient, LlmClient, LlmError,
    LlmSettings, Provenance, ReplayClient, SynthesisOutcome, SynthesisTarget, Transcript, FEW_SHOT_COMPONENT,
    FEW_SHOT_SYSTEM,
};

/// An atomic classifier together with the legend entries for its port types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentModel {
    pub classifier: AtomicClassifier,
    pub types: Vec<TypeEntry>,
}

/// One classifier per scanned node class, in scan order. Topic ports are
/// numbered `p1..` and service ports `s1..`, each in declaration order.
pub fn build_component_models(scan: &NodeScan, interfaces: &InterfaceSet) -> Vec<ComponentModel> {
    scan.nodes
        .iter()
        .map(|record| {
            let mut c = AtomicClassifier::new(&record.class_name);
            let (mut topics, mut services) = (0, 0);
            for e in &record.endpoints {
                let identifier = if e.kind.is_topic() {
                    topics += 1;
                    format!("p{topics}")
                } else {
                    services += 1;
                    format!("s{services}")
                };
                c.ports.push(Port {
                    identifier,
                    kind: e.kind,
                    interface_type: e.interface_type.clone(),
                    declared_name: e.declared_name.clone(),
                    handler: if e.kind.has_handler() { e.handler.clone() } else { None },
                });
            }
            let mut refs: BTreeSet<String> = record.files.iter().cloned().collect();
            refs.extend(record.endpoints.iter().map(|e| e.source_location.file.clone()));
            c.source_refs = refs.into_iter().collect();
            let types = interfaces.entries_for(c.ports.iter().map(|p| p.interface_type.as_str()));
            ComponentModel { classifier: c, types }
        })
        .collect()
}

/// Resolves every launch spec into a composed classifier, ordered by launch
/// path. Empty when there are no specs.
pub fn build_system_model(
    scan: &NodeScan,
    launch_specs: &BTreeMap<String, LaunchSpec>,
    build_map: &BuildMap,
    packages: &PackageIndex,
    components: &[ComponentModel],
    options: &ResolveOptions,
) -> Result<Resolution, LaunchError> {
    let classifiers: BTreeMap<String, AtomicClassifier> = components
        .iter()
        .map(|m| (m.classifier.name.clone(), m.classifier.clone()))
        .collect();
    let node_names: BTreeMap<String, String> = scan
        .nodes
        .iter()
        .filter_map(|n| Some((n.class_name.clone(), n.declared_node_name.clone()?)))
        .collect();
    resolve_composition(launch_specs, &classifiers, &node_names, build_map, packages, options)
}
