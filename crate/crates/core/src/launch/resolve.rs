use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::build::{BuildMap, PackageIndex};
use super::{Condition, LaunchAction, LaunchError, LaunchSpec, Segment, Text};
use crate::model::{
    promote_external_ports, resolve_runtime_name, split_namespace, AtomicClassifier, ClassifierKind, ComposedClassifier,
    Endpoint, NamespaceScope, NodePart, PartPort, ScopeMembers, ServiceBinding, TopicBinding, Violation, DYNAMIC_NAME,
    PART_STEREOTYPE, PortKind,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolveOptions {
    /// Launch argument overrides, applied to every file.
    pub launch_args: BTreeMap<String, String>,
    /// Name of a part created by an include. `{stem}` is the included
    /// file's stem, `{index}` the 1-based ordinal among includes of the same
    /// file within one parent.
    pub part_name_template: String,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        ResolveOptions {
            launch_args: BTreeMap::new(),
            part_name_template: "{stem}_{index}".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Resolution {
    /// One per launch file, ordered by launch path.
    pub classifiers: Vec<ComposedClassifier>,
    /// Conflicting groups that were left unbound, tagged with the
    /// classifier they occurred in.
    pub violations: Vec<(String, Violation)>,
    pub warnings: Vec<String>,
}

/// `Compose_example.launch.py` -> `Compose_example`.
pub fn launch_stem(path: &str) -> String {
    let name = path.rsplit('/').next().unwrap_or(path);
    for suffix in [".launch.py", ".launch.xml", ".py", ".xml"] {
        if let Some(stem) = name.strip_suffix(suffix) {
            return stem.to_string();
        }
    }
    name.to_string()
}

struct Inputs<'a> {
    specs: &'a BTreeMap<String, LaunchSpec>,
    components: &'a BTreeMap<String, AtomicClassifier>,
    node_names: &'a BTreeMap<String, String>,
    build: &'a BuildMap,
    packages: &'a PackageIndex,
    options: &'a ResolveOptions,
}

struct Resolver<'a> {
    inputs: Inputs<'a>,
    names: BTreeMap<String, String>,
    memo: BTreeMap<String, ComposedClassifier>,
    in_progress: Vec<String>,
    violations: Vec<(String, Violation)>,
    warnings: Vec<String>,
}

/// Resolves every spec in `specs` into a composed classifier.
///
/// `components` maps class names to their atomic classifiers and
/// `node_names` maps class names to the node name passed to the base
/// constructor, used when a launch action gives no explicit name.
pub fn resolve_composition(
    specs: &BTreeMap<String, LaunchSpec>,
    components: &BTreeMap<String, AtomicClassifier>,
    node_names: &BTreeMap<String, String>,
    build: &BuildMap,
    packages: &PackageIndex,
    options: &ResolveOptions,
) -> Result<Resolution, LaunchError> {
    let mut names = BTreeMap::new();
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    let mut warnings = Vec::new();
    for path in specs.keys() {
        let stem = launch_stem(path);
        let n = used.entry(stem.clone()).or_insert(0);
        *n += 1;
        let name = if *n == 1 {
            stem.clone()
        } else {
            warnings.push(format!("{path}: launch stem {stem} already used; classifier named {stem}_{n}"));
            format!("{stem}_{n}")
        };
        names.insert(path.clone(), name);
    }
    let mut r = Resolver {
        inputs: Inputs {
            specs,
            components,
            node_names,
            build,
            packages,
            options,
        },
        names,
        memo: BTreeMap::new(),
        in_progress: Vec::new(),
        violations: Vec::new(),
        warnings,
    };
    for spec in specs.values() {
        r.warnings.extend(spec.warnings.iter().cloned());
    }
    for path in specs.keys() {
        r.resolve(path)?;
    }
    let classifiers = specs.keys().map(|p| r.memo[p].clone()).collect();
    let mut warnings = r.warnings;
    let mut seen = BTreeSet::new();
    warnings.retain(|w| seen.insert(w.clone()));
    Ok(Resolution {
        classifiers,
        violations: r.violations,
        warnings,
    })
}

/// Per-file evaluation state.
struct Scope {
    args: BTreeMap<String, String>,
    this_dir: String,
}

enum Resolved {
    Value(String),
    Unknown(String),
}

fn normalize_path(p: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    for seg in p.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                out.pop();
            }
            s => out.push(s),
        }
    }
    out.join("/")
}

impl<'a> Resolver<'a> {
    fn text(&self, t: &Text, scope: &Scope) -> Resolved {
        let mut s = String::new();
        for seg in &t.0 {
            match seg {
                Segment::Lit(l) => s.push_str(l),
                Segment::Var(v) => match scope.args.get(v) {
                    Some(val) => s.push_str(val),
                    None => return Resolved::Unknown(format!("launch argument `{v}` has no value")),
                },
                Segment::PkgShare(pkg) => {
                    if !self.inputs.packages.packages.contains_key(pkg) {
                        return Resolved::Unknown(format!("package `{pkg}` not found in repository"));
                    }
                    // placeholder, mapped onto the package directory by
                    // include_target
                    s.push_str(&format!("//pkg:{pkg}//"));
                }
                Segment::ThisDir => s.push_str(&scope.this_dir),
                Segment::Dynamic(what) => return Resolved::Unknown(format!("cannot evaluate {what}")),
            }
        }
        Resolved::Value(s)
    }

    /// Resolves a text that must not contain package paths.
    fn plain(&self, t: &Text, scope: &Scope) -> Result<String, String> {
        match self.text(t, scope) {
            Resolved::Value(v) if !v.contains("//pkg:") => Ok(v),
            Resolved::Value(v) => Err(format!("unexpected package path in `{v}`")),
            Resolved::Unknown(why) => Err(why),
        }
    }

    fn condition_holds(&mut self, c: &Option<Condition>, scope: &Scope, path: &str, line: usize) -> bool {
        let Some(c) = c else { return true };
        let value = match self.plain(&c.value, scope) {
            Ok(v) => v,
            Err(why) => {
                self.warnings.push(format!("{path}:{line}: condition not evaluable ({why}); action skipped"));
                return false;
            }
        };
        let truth = match value.trim().to_ascii_lowercase().as_str() {
            "true" | "1" => true,
            "false" | "0" => false,
            other => {
                self.warnings
                    .push(format!("{path}:{line}: condition value `{other}` is not boolean; action skipped"));
                return false;
            }
        };
        truth != c.negated
    }

    /// Maps an include target to a known launch spec path.
    fn include_target(&mut self, t: &Text, scope: &Scope, path: &str, line: usize) -> Option<String> {
        let raw = match self.text(t, scope) {
            Resolved::Value(v) => v,
            Resolved::Unknown(why) => {
                self.warnings.push(format!("{path}:{line}: include target not resolvable ({why}); skipped"));
                return None;
            }
        };
        let specs = self.inputs.specs;
        if let Some(rest) = raw.strip_prefix("//pkg:") {
            let (pkg, tail) = rest.split_once("//").unwrap_or((rest, ""));
            let dir = self.inputs.packages.packages[pkg].clone();
            let candidate = normalize_path(&format!("{dir}/{tail}"));
            if specs.contains_key(&candidate) {
                return Some(candidate);
            }
            // installed share layouts may not mirror the source tree
            let file_name = tail.rsplit('/').next().unwrap_or(tail);
            let prefix = if dir.is_empty() { String::new() } else { format!("{dir}/") };
            let hits: Vec<&String> = specs
                .keys()
                .filter(|k| k.starts_with(&prefix) && k.rsplit('/').next() == Some(file_name))
                .collect();
            if hits.len() == 1 {
                return Some(hits[0].clone());
            }
            self.warnings
                .push(format!("{path}:{line}: include target {pkg}/{tail} not found; skipped"));
            return None;
        }
        let candidate = normalize_path(&raw);
        if specs.contains_key(&candidate) {
            Some(candidate)
        } else {
            self.warnings.push(format!("{path}:{line}: include target {raw} not found; skipped"));
            None
        }
    }

    fn resolve(&mut self, path: &str) -> Result<ComposedClassifier, LaunchError> {
        if let Some(done) = self.memo.get(path) {
            return Ok(done.clone());
        }
        if let Some(at) = self.in_progress.iter().position(|p| p == path) {
            let mut cycle = self.in_progress[at..].to_vec();
            cycle.push(path.to_string());
            return Err(LaunchError::IncludeCycle { cycle });
        }
        self.in_progress.push(path.to_string());
        let spec = &self.inputs.specs[path];

        let mut scope = Scope {
            args: self.inputs.options.launch_args.clone(),
            this_dir: path.rsplit_once('/').map(|(d, _)| d.to_string()).unwrap_or_default(),
        };
        for arg in &spec.arguments {
            if scope.args.contains_key(&arg.name) {
                continue;
            }
            if let Some(default) = &arg.default {
                if let Ok(v) = self.plain(default, &scope) {
                    scope.args.insert(arg.name.clone(), v);
                }
            }
        }

        let mut builder = PartsBuilder::default();
        let mut stack = Vec::new();
        let actions = spec.actions.clone();
        self.actions(path, &actions, &scope, &mut stack, &mut builder)?;

        let name = self.names[path].clone();
        let mut composed = ComposedClassifier::new(&name, path);
        composed.parts = builder.parts;
        bind(&mut composed, &mut self.violations);
        place_scopes(&mut composed);
        let composed = promote_external_ports(composed).normalized();

        self.in_progress.pop();
        self.memo.insert(path.to_string(), composed.clone());
        Ok(composed)
    }

    fn actions(
        &mut self,
        path: &str,
        actions: &[LaunchAction],
        scope: &Scope,
        stack: &mut Vec<String>,
        builder: &mut PartsBuilder,
    ) -> Result<(), LaunchError> {
        for action in actions {
            match action {
                LaunchAction::NamespacePush { segment, line } => match self.plain(segment, scope) {
                    Ok(ns) => {
                        let (segs, absolute) = split_namespace(&ns);
                        if absolute {
                            stack.clear();
                        }
                        stack.extend(segs);
                    }
                    Err(why) => {
                        // every later name in this group would be wrong;
                        // drop the rest of the group instead
                        self.warnings.push(format!(
                            "{path}:{line}: namespace not evaluable ({why}); remaining actions in this group skipped"
                        ));
                        return Ok(());
                    }
                },
                LaunchAction::Group {
                    children,
                    scoped,
                    condition,
                    line,
                } => {
                    if !self.condition_holds(condition, scope, path, *line) {
                        continue;
                    }
                    if *scoped {
                        let mut inner = stack.clone();
                        self.actions(path, children, scope, &mut inner, builder)?;
                    } else {
                        self.actions(path, children, scope, stack, builder)?;
                    }
                }
                LaunchAction::NodeInstantiation {
                    package,
                    executable,
                    name,
                    namespace,
                    remappings,
                    condition,
                    line,
                } => {
                    if !self.condition_holds(condition, scope, path, *line) {
                        continue;
                    }
                    if let Err(why) = self.node(path, *line, scope, stack, builder, package, executable, name, namespace, remappings) {
                        self.warnings.push(format!("{path}:{line}: node skipped: {why}"));
                    }
                }
                LaunchAction::Include {
                    target,
                    namespace,
                    arguments,
                    condition,
                    line,
                } => {
                    if !self.condition_holds(condition, scope, path, *line) {
                        continue;
                    }
                    let Some(target_path) = self.include_target(target, scope, path, *line) else {
                        continue;
                    };
                    if !arguments.is_empty() {
                        self.warnings.push(format!(
                            "{path}:{line}: arguments passed to {target_path} are not propagated; its defaults apply"
                        ));
                    }
                    let mut effective = stack.clone();
                    if let Some(ns) = namespace {
                        match self.plain(ns, scope) {
                            Ok(ns) => {
                                let (segs, absolute) = split_namespace(&ns);
                                if absolute {
                                    effective.clear();
                                }
                                effective.extend(segs);
                            }
                            Err(why) => {
                                self.warnings.push(format!("{path}:{line}: include namespace not evaluable ({why}); skipped"));
                                continue;
                            }
                        }
                    }
                    let inner = self.resolve(&target_path)?;
                    let index = {
                        let n = builder.include_counts.entry(target_path.clone()).or_insert(0);
                        *n += 1;
                        *n
                    };
                    let part_name = self
                        .inputs
                        .options
                        .part_name_template
                        .replace("{stem}", &launch_stem(&target_path))
                        .replace("{index}", &index.to_string());
                    let part_name = builder.unique_name(part_name, path, *line, &mut self.warnings);
                    let ports = inner
                        .external_ports
                        .iter()
                        .map(|ext| {
                            let inner_port = &ext.port;
                            let (display_name, runtime_name, scoped) = if inner_port.runtime_name == DYNAMIC_NAME {
                                (inner_port.display_name.clone(), DYNAMIC_NAME.to_string(), false)
                            } else if inner_port.scoped {
                                let relative = inner_port.runtime_name.trim_start_matches('/');
                                match resolve_runtime_name(relative, &effective, &BTreeMap::new()) {
                                    Ok(r) => (r.display_name, r.runtime_name, r.in_scope),
                                    Err(_) => (inner_port.display_name.clone(), DYNAMIC_NAME.to_string(), false),
                                }
                            } else {
                                (inner_port.runtime_name.clone(), inner_port.runtime_name.clone(), false)
                            };
                            PartPort {
                                key: ext.key(),
                                port: inner_port.port.clone(),
                                display_name,
                                runtime_name,
                                scoped,
                            }
                        })
                        .collect();
                    builder.parts.push(NodePart {
                        part_name,
                        classifier_ref: inner.name.clone(),
                        classifier_kind: ClassifierKind::Composed,
                        stereotype: PART_STEREOTYPE.to_string(),
                        effective_namespace: effective,
                        remappings: BTreeMap::new(),
                        ports,
                    });
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn node(
        &mut self,
        path: &str,
        line: usize,
        scope: &Scope,
        stack: &[String],
        builder: &mut PartsBuilder,
        package: &Text,
        executable: &Text,
        name: &Option<Text>,
        namespace: &Option<Text>,
        remappings: &[(Text, Text)],
    ) -> Result<(), String> {
        let package = self.plain(package, scope)?;
        let executable = self.plain(executable, scope)?;
        let entry = self
            .inputs
            .build
            .get(&package, &executable)
            .ok_or_else(|| format!("no node class known for executable {package}/{executable}"))?;
        let class = self
            .inputs
            .components
            .get(&entry.class_name)
            .ok_or_else(|| format!("class {} has no component model", entry.class_name))?;
        let part_name = match name {
            Some(n) => self.plain(n, scope)?,
            None => self
                .inputs
                .node_names
                .get(&class.name)
                .cloned()
                .unwrap_or_else(|| executable.clone()),
        };
        let mut effective = stack.to_vec();
        if let Some(ns) = namespace {
            let ns = self.plain(ns, scope)?;
            let (segs, absolute) = split_namespace(&ns);
            if absolute {
                effective.clear();
            }
            effective.extend(segs);
        }
        let mut remaps = BTreeMap::new();
        for (from, to) in remappings {
            let from = match self.plain(from, scope) {
                Ok(f) => f,
                Err(why) => {
                    self.warnings.push(format!("{path}:{line}: remap source not evaluable ({why}); ignored"));
                    continue;
                }
            };
            let to = self.plain(to, scope).unwrap_or_else(|_| DYNAMIC_NAME.to_string());
            remaps.insert(from, to);
        }
        let part_name = builder.unique_name(part_name, path, line, &mut self.warnings);

        let mut used = BTreeSet::new();
        let mut ports = Vec::new();
        for port in &class.ports {
            let declared = match port.declared_name.strip_prefix("~/") {
                Some(rest) => format!("{part_name}/{rest}"),
                None => port.declared_name.clone(),
            };
            let (display_name, runtime_name, scoped) = if declared == DYNAMIC_NAME {
                (DYNAMIC_NAME.to_string(), DYNAMIC_NAME.to_string(), false)
            } else if remaps.get(&port.declared_name).or(remaps.get(&declared)).map(String::as_str) == Some(DYNAMIC_NAME) {
                used.insert(port.declared_name.clone());
                (DYNAMIC_NAME.to_string(), DYNAMIC_NAME.to_string(), false)
            } else {
                let mut local = BTreeMap::new();
                if let Some(to) = remaps.get(&port.declared_name).or(remaps.get(&declared)) {
                    used.insert(port.declared_name.clone());
                    used.insert(declared.clone());
                    local.insert(declared.clone(), to.clone());
                }
                match resolve_runtime_name(&declared, &effective, &local) {
                    Ok(r) => (r.display_name, r.runtime_name, r.in_scope),
                    Err(e) => {
                        self.warnings
                            .push(format!("{path}:{line}: port {} of {part_name}: {e}; left unbound", port.identifier));
                        (declared.clone(), DYNAMIC_NAME.to_string(), false)
                    }
                }
            };
            ports.push(PartPort {
                key: port.identifier.clone(),
                port: port.clone(),
                display_name,
                runtime_name,
                scoped,
            });
        }
        for from in remaps.keys().filter(|f| !used.contains(*f)) {
            self.warnings
                .push(format!("{path}:{line}: remap from `{from}` matches no port of {part_name}"));
        }
        builder.parts.push(NodePart {
            part_name,
            classifier_ref: class.name.clone(),
            classifier_kind: ClassifierKind::Atomic,
            stereotype: PART_STEREOTYPE.to_string(),
            effective_namespace: effective,
            remappings: remaps,
            ports,
        });
        Ok(())
    }
}

#[derive(Default)]
struct PartsBuilder {
    parts: Vec<NodePart>,
    include_counts: BTreeMap<String, usize>,
}

impl PartsBuilder {
    fn unique_name(&self, name: String, path: &str, line: usize, warnings: &mut Vec<String>) -> String {
        let taken = |n: &str| self.parts.iter().any(|p| p.part_name == n);
        if !taken(&name) {
            return name;
        }
        let mut i = 2;
        loop {
            let candidate = format!("{name}_{i}");
            if !taken(&candidate) {
                warnings.push(format!("{path}:{line}: part name {name} already used; renamed to {candidate}"));
                return candidate;
            }
            i += 1;
        }
    }
}

struct Candidate<'p> {
    part: &'p str,
    port: &'p PartPort,
}

/// Groups ports by runtime name. A group becomes a binding when it spans at
/// least two parts and is consistent; inconsistent groups are recorded and
/// left unbound.
fn bind(c: &mut ComposedClassifier, violations: &mut Vec<(String, Violation)>) {
    let mut topics: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();
    let mut services: BTreeMap<String, Vec<Candidate>> = BTreeMap::new();
    for part in &c.parts {
        for port in &part.ports {
            if port.runtime_name == DYNAMIC_NAME || port.is_dynamic() {
                continue;
            }
            let target = if port.port.kind.is_topic() { &mut topics } else { &mut services };
            target.entry(port.runtime_name.clone()).or_default().push(Candidate {
                part: &part.part_name,
                port,
            });
        }
    }
    let spans = |g: &[Candidate]| g.iter().map(|x| x.part).collect::<BTreeSet<_>>().len() >= 2;
    let endpoints = |g: &[Candidate]| {
        let mut e: Vec<Endpoint> = g.iter().map(|x| Endpoint::new(x.part, &x.port.key)).collect();
        e.sort();
        e
    };
    let display = |g: &[Candidate]| g.iter().map(|x| x.port.display_name.clone()).min().unwrap_or_default();
    let types = |g: &[Candidate]| g.iter().map(|x| x.port.port.interface_type.clone()).collect::<BTreeSet<_>>();

    let mut topic_bindings = Vec::new();
    for (runtime, group) in &topics {
        if !spans(group) {
            continue;
        }
        let t = types(group);
        if t.len() > 1 {
            violations.push((
                c.name.clone(),
                Violation::TopicTypeConflict {
                    topic: runtime.clone(),
                    types: t.into_iter().collect(),
                },
            ));
            continue;
        }
        topic_bindings.push(TopicBinding {
            display_name: display(group),
            runtime_name: runtime.clone(),
            message_type: t.into_iter().next().unwrap_or_default(),
            endpoints: endpoints(group),
        });
    }
    let mut service_bindings = Vec::new();
    for (runtime, group) in &services {
        if !spans(group) {
            continue;
        }
        let t = types(group);
        if t.len() > 1 {
            violations.push((
                c.name.clone(),
                Violation::ServiceTypeConflict {
                    service: runtime.clone(),
                    types: t.into_iter().collect(),
                },
            ));
            continue;
        }
        let providers = group.iter().filter(|x| x.port.port.kind == PortKind::ServiceProvided).count();
        if providers != 1 {
            // several servers is an error; no server means the provider
            // lives outside this classifier
            if providers > 1 {
                violations.push((
                    c.name.clone(),
                    Violation::ServiceProviderCardinality {
                        service: runtime.clone(),
                        providers,
                    },
                ));
            }
            continue;
        }
        service_bindings.push(ServiceBinding {
            display_name: display(group),
            runtime_name: runtime.clone(),
            service_type: t.into_iter().next().unwrap_or_default(),
            endpoints: endpoints(group),
        });
    }
    c.topics = topic_bindings;
    c.services = service_bindings;
}

/// Builds the namespace tree from part namespaces and places each binding
/// in the deepest scope its runtime name falls under.
fn place_scopes(c: &mut ComposedClassifier) {
    let mut scopes: BTreeMap<Vec<String>, ScopeMembers> = BTreeMap::new();
    for part in &c.parts {
        let ns = &part.effective_namespace;
        for depth in 1..=ns.len() {
            scopes.entry(ns[..depth].to_vec()).or_default();
        }
        if !ns.is_empty() {
            scopes.get_mut(ns).unwrap().parts.push(part.part_name.clone());
        }
    }
    let scoped_endpoint = |endpoints: &[Endpoint]| {
        endpoints.iter().any(|e| {
            c.part(&e.part)
                .and_then(|p| p.port(&e.port))
                .map(|p| p.scoped)
                .unwrap_or(false)
        })
    };
    let home = |runtime: &str| -> Option<Vec<String>> {
        let segs: Vec<String> = runtime.trim_start_matches('/').split('/').map(str::to_string).collect();
        let ns = &segs[..segs.len().saturating_sub(1)];
        (1..=ns.len()).rev().map(|d| ns[..d].to_vec()).find(|p| scopes.contains_key(p))
    };
    let mut topic_homes = Vec::new();
    for t in &c.topics {
        if scoped_endpoint(&t.endpoints) {
            if let Some(h) = home(&t.runtime_name) {
                topic_homes.push((h, t.runtime_name.clone()));
            }
        }
    }
    let mut service_homes = Vec::new();
    for s in &c.services {
        if scoped_endpoint(&s.endpoints) {
            if let Some(h) = home(&s.runtime_name) {
                service_homes.push((h, s.runtime_name.clone()));
            }
        }
    }
    for (h, t) in topic_homes {
        scopes.get_mut(&h).unwrap().topics.push(t);
    }
    for (h, s) in service_homes {
        scopes.get_mut(&h).unwrap().services.push(s);
    }

    fn build(prefix: &[String], scopes: &BTreeMap<Vec<String>, ScopeMembers>) -> Vec<NamespaceScope> {
        scopes
            .iter()
            .filter(|(k, _)| k.len() == prefix.len() + 1 && k.starts_with(prefix))
            .map(|(k, members)| {
                let mut ns = NamespaceScope::new(k.last().unwrap().clone());
                ns.members = members.clone();
                ns.children = build(k, scopes);
                ns
            })
            .collect()
    }
    c.namespaces = build(&[], &scopes);
}
