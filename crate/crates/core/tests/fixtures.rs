use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rosarch_core::extract::{scan_repository, write_scan, NodeScan, ScanConfig};
use rosarch_core::interfaces::load_interfaces;
use rosarch_core::launch::{load_launch_specs, discover_launch_files, parse_build_config, PackageIndex, ResolveOptions};
use rosarch_core::model::{ComposedClassifier, PortKind};
use rosarch_core::synthesis::{build_component_models, build_system_model};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn scan(name: &str, config: &ScanConfig) -> NodeScan {
    scan_repository(&fixture(name), config).unwrap()
}

fn resolve(root: &Path, options: &ResolveOptions) -> Vec<ComposedClassifier> {
    let scan = scan_repository(root, &ScanConfig::default()).unwrap();
    let interfaces = load_interfaces(root);
    let components = build_component_models(&scan, &interfaces);
    let specs = load_launch_specs(root, &discover_launch_files(root)).unwrap();
    let (packages, _) = PackageIndex::discover(root);
    let build = parse_build_config(root, &scan);
    build_system_model(&scan, &specs, &build, &packages, &components, options)
        .unwrap()
        .classifiers
}

#[test]
fn synthetic_scan_finds_six_classes() {
    let s = scan("synthetic_example", &ScanConfig::default());
    let names: BTreeSet<&str> = s.nodes.iter().map(|n| n.class_name.as_str()).collect();
    assert_eq!(
        names,
        BTreeSet::from(["AdderServer", "BarNode", "CounterNode", "FooNode", "MonitorNode", "StatusNode"])
    );
    assert!(s.warnings.is_empty(), "{:?}", s.warnings);

    let foo = s.node("FooNode").unwrap();
    assert_eq!(foo.declared_node_name.as_deref(), Some("foo_node"));
    assert_eq!(foo.files, ["skeleton/include/skeleton/foo_node.hpp", "skeleton/src/foo_node.cpp"]);
    let got: Vec<(PortKind, &str, Option<&str>)> = foo
        .endpoints
        .iter()
        .map(|e| (e.kind, e.declared_name.as_str(), e.handler.as_deref()))
        .collect();
    assert_eq!(
        got,
        [
            (PortKind::Publisher, "number", None),
            (PortKind::Publisher, "debug_number", None),
            (PortKind::Subscriber, "/counting", Some("counting_callback")),
        ]
    );
}

/// Ground truth written down from reading the fixture sources.
#[test]
fn synthetic_scan_is_sound_and_complete() {
    let truth: BTreeMap<&str, Vec<(PortKind, &str, &str)>> = BTreeMap::from([
        ("AdderServer", vec![(PortKind::ServiceProvided, "add_two_ints", "skeleton::srv::AddTwoInts")]),
        (
            "BarNode",
            vec![
                (PortKind::Subscriber, "bit_number", "skeleton::msg::Num"),
                (PortKind::ServiceProvided, "reset", "skeleton::srv::Reset"),
            ],
        ),
        (
            "CounterNode",
            vec![
                (PortKind::Publisher, "/counting", "skeleton::msg::Num"),
                (PortKind::ServiceRequired, "reset", "skeleton::srv::Reset"),
            ],
        ),
        (
            "FooNode",
            vec![
                (PortKind::Publisher, "debug_number", "skeleton::msg::Num"),
                (PortKind::Publisher, "number", "skeleton::msg::Num"),
                (PortKind::Subscriber, "/counting", "skeleton::msg::Num"),
            ],
        ),
        (
            "MonitorNode",
            vec![
                (PortKind::Subscriber, "status", "skeleton::msg::Status"),
                (PortKind::ServiceRequired, "add_two_ints", "skeleton::srv::AddTwoInts"),
            ],
        ),
        ("StatusNode", vec![(PortKind::Publisher, "status", "skeleton::msg::Status")]),
    ]);
    let s = scan("synthetic_example", &ScanConfig::default());
    let root = fixture("synthetic_example");
    for n in &s.nodes {
        let mut got: Vec<(PortKind, &str, &str)> = n
            .endpoints
            .iter()
            .map(|e| (e.kind, e.declared_name.as_str(), e.interface_type.as_str()))
            .collect();
        got.sort();
        let mut want = truth[n.class_name.as_str()].clone();
        want.sort();
        assert_eq!(got, want, "{}", n.class_name);
        for e in &n.endpoints {
            let text = std::fs::read_to_string(root.join(&e.source_location.file)).unwrap();
            let line = text.lines().nth(e.source_location.line - 1).unwrap();
            assert!(line.contains("create_"), "{}:{} {line}", e.source_location.file, e.source_location.line);
        }
    }
}

#[test]
fn synthetic_scan_matches_golden() {
    let s = scan("synthetic_example", &ScanConfig::default());
    let golden = std::fs::read(fixture("golden/synthetic_example.scan.json")).unwrap();
    assert_eq!(String::from_utf8(write_scan(&s).unwrap()).unwrap(), String::from_utf8(golden).unwrap());
}

#[test]
fn every_port_type_has_a_definition() {
    let root = fixture("synthetic_example");
    let s = scan("synthetic_example", &ScanConfig::default());
    let interfaces = load_interfaces(&root);
    assert!(interfaces.warnings.is_empty(), "{:?}", interfaces.warnings);
    assert_eq!(interfaces.messages["skeleton::msg::Num"].fields.len(), 1);
    let add = &interfaces.services["skeleton::srv::AddTwoInts"];
    assert_eq!((add.request_fields.len(), add.response_fields.len()), (2, 1));
    for n in &s.nodes {
        for e in &n.endpoints {
            assert!(interfaces.contains(&e.interface_type), "{}", e.interface_type);
        }
    }
}

#[test]
fn executables_map_to_classes() {
    let root = fixture("synthetic_example");
    let s = scan("synthetic_example", &ScanConfig::default());
    let build = parse_build_config(&root, &s);
    assert!(build.warnings.is_empty(), "{:?}", build.warnings);
    let got: Vec<(&str, &str)> = build
        .executables
        .iter()
        .map(|((_, exe), e)| (exe.as_str(), e.class_name.as_str()))
        .collect();
    assert_eq!(
        got,
        [
            ("adder_server", "AdderServer"),
            ("bar_node", "BarNode"),
            ("counter_node", "CounterNode"),
            ("foo_node", "FooNode"),
            ("monitor_node", "MonitorNode"),
            ("status_node", "StatusNode"),
        ]
    );
}

fn atomic_refs(all: &[ComposedClassifier], name: &str, out: &mut BTreeSet<String>) {
    let c = all.iter().find(|c| c.name == name).unwrap();
    for p in &c.parts {
        if all.iter().any(|o| o.name == p.classifier_ref) {
            atomic_refs(all, &p.classifier_ref, out);
        } else {
            out.insert(p.classifier_ref.clone());
        }
    }
}

#[test]
fn launch_files_instantiate_three_classes() {
    let all = resolve(&fixture("synthetic_example"), &ResolveOptions::default());
    let names: Vec<&str> = all.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["Compose_example", "counter", "system"]);
    let mut used = BTreeSet::new();
    for c in &all {
        atomic_refs(&all, &c.name, &mut used);
    }
    assert_eq!(used, BTreeSet::from(["BarNode".into(), "CounterNode".into(), "FooNode".into()]));
}

#[test]
fn compose_example_scoping_and_remaps() {
    let all = resolve(&fixture("synthetic_example"), &ResolveOptions::default());
    let c = all.iter().find(|c| c.name == "Compose_example").unwrap();
    let parts: BTreeSet<&str> = c.parts.iter().map(|p| p.part_name.as_str()).collect();
    assert_eq!(parts, BTreeSet::from(["bar", "counter_1", "foo"]));

    let foo = c.parts.iter().find(|p| p.part_name == "foo").unwrap();
    assert_eq!(foo.effective_namespace, ["red"]);
    let number = foo.ports.iter().find(|p| p.port.declared_name == "number").unwrap();
    // remapped first, then prefixed with the namespace
    assert_eq!((number.display_name.as_str(), number.runtime_name.as_str()), ("bit_number", "/red/bit_number"));
    let counting = foo.ports.iter().find(|p| p.port.declared_name == "/counting").unwrap();
    assert_eq!(counting.runtime_name, "/counting");
    assert!(!counting.scoped);

    let topics: BTreeMap<&str, &str> = c
        .topics
        .iter()
        .map(|t| (t.display_name.as_str(), t.runtime_name.as_str()))
        .collect();
    assert_eq!(topics, BTreeMap::from([("/counting", "/counting"), ("bit_number", "/red/bit_number")]));
    let services: Vec<(&str, usize)> = c.services.iter().map(|s| (s.runtime_name.as_str(), s.endpoints.len())).collect();
    assert_eq!(services, [("/reset", 2)]);
    assert_eq!(c.namespaces.len(), 1);
    assert_eq!(c.namespaces[0].name, "red");
}

#[test]
fn false_condition_drops_the_monitor() {
    let root = fixture("synthetic_example");
    let system = |options: &ResolveOptions| {
        let all = resolve(&root, options);
        all.into_iter().find(|c| c.name == "system").unwrap()
    };
    let c = system(&ResolveOptions::default());
    let parts: Vec<&str> = c.parts.iter().map(|p| p.part_name.as_str()).collect();
    assert_eq!(parts, ["Compose_example_1"]);
    assert_eq!(c.parts[0].effective_namespace, ["robot1"]);

    let mut options = ResolveOptions::default();
    options.launch_args.insert("use_monitor".into(), "true".into());
    let c = system(&options);
    let mut parts: Vec<&str> = c.parts.iter().map(|p| p.part_name.as_str()).collect();
    parts.sort();
    assert_eq!(parts, ["Compose_example_1", "monitor"]);
}

#[test]
fn degraded_constructs_are_reported() {
    let s = scan("degraded_example", &ScanConfig::default());
    let names: BTreeSet<&str> = s.nodes.iter().map(|n| n.class_name.as_str()).collect();
    assert_eq!(names, BTreeSet::from(["ComponentBase", "LocalizerNode", "ManagedNode", "PlannerCore"]));
    assert!(s.warnings.iter().any(|w| w.contains("PlannerNode") && w.contains("above the limit of 3")));
    assert!(s.warnings.iter().any(|w| w.contains("DebugPublisher") && w.contains("helper class")));
    let localizer = s.node("LocalizerNode").unwrap();
    assert_eq!(localizer.endpoints.len(), 2);

    let deeper = scan(
        "degraded_example",
        &ScanConfig {
            max_inheritance_depth: 4,
            ..ScanConfig::default()
        },
    );
    let planner = deeper.node("PlannerNode").unwrap();
    assert_eq!(
        planner.inheritance_chain,
        ["PlannerNode", "PlannerCore", "ComponentBase", "ManagedNode", "rclcpp::Node"]
    );
    assert_eq!(planner.endpoints.len(), 2);
}
