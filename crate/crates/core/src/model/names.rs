use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("empty name")]
    Empty,
    #[error("name `{0}` contains an empty segment")]
    EmptySegment(String),
    #[error("namespace segment `{0}` contains '/'")]
    SegmentWithSlash(String),
    #[error("private name `{0}` cannot be resolved without a node context")]
    Private(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedName {
    /// Post-remap, pre-prefix name; this is what diagrams label.
    pub display_name: String,
    pub runtime_name: String,
    /// False when the post-remap name is absolute.
    pub in_scope: bool,
}

fn check_name(name: &str) -> Result<(), NameError> {
    if name.is_empty() {
        return Err(NameError::Empty);
    }
    if name.starts_with('~') {
        return Err(NameError::Private(name.to_string()));
    }
    let body = name.strip_prefix('/').unwrap_or(name);
    if body.is_empty() || body.split('/').any(str::is_empty) {
        return Err(NameError::EmptySegment(name.to_string()));
    }
    Ok(())
}

/// Applies remapping (keyed by the declared name), then namespace
/// prefixing. Absolute names pass through unprefixed.
pub fn resolve_runtime_name(
    declared: &str,
    namespace_stack: &[String],
    remappings: &BTreeMap<String, String>,
) -> Result<ResolvedName, NameError> {
    check_name(declared)?;
    for segment in namespace_stack {
        if segment.contains('/') {
            return Err(NameError::SegmentWithSlash(segment.clone()));
        }
        if segment.is_empty() {
            return Err(NameError::EmptySegment(namespace_stack.join("/")));
        }
    }
    let display = remappings
        .get(declared)
        .cloned()
        .unwrap_or_else(|| declared.to_string());
    check_name(&display)?;

    if display.starts_with('/') {
        return Ok(ResolvedName {
            runtime_name: display.clone(),
            display_name: display,
            in_scope: false,
        });
    }
    let mut runtime = String::new();
    for segment in namespace_stack {
        runtime.push('/');
        runtime.push_str(segment);
    }
    runtime.push('/');
    runtime.push_str(&display);
    Ok(ResolvedName {
        display_name: display,
        runtime_name: runtime,
        in_scope: true,
    })
}

/// Splits a namespace string into single segments. Returns the segments and
/// whether the namespace was given as absolute.
pub fn split_namespace(ns: &str) -> (Vec<String>, bool) {
    let absolute = ns.starts_with('/');
    let segments = ns
        .split('/')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    (segments, absolute)
}

/// Prefixes an already-resolved, in-scope runtime name with an outer
/// namespace stack.
pub fn prefix_runtime(stack: &[String], runtime: &str) -> String {
    if stack.is_empty() {
        return runtime.to_string();
    }
    format!("/{}{}", stack.join("/"), runtime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stack(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn remap_then_prefix() {
        let remaps = BTreeMap::from([("number".to_string(), "bit_number".to_string())]);
        let r = resolve_runtime_name("number", &stack(&["red"]), &remaps).unwrap();
        assert_eq!(r.display_name, "bit_number");
        assert_eq!(r.runtime_name, "/red/bit_number");
        assert!(r.in_scope);
    }

    #[test]
    fn absolute_names_stay_outside_scope() {
        let r = resolve_runtime_name("/counting", &stack(&["red"]), &BTreeMap::new()).unwrap();
        assert_eq!(r.display_name, "/counting");
        assert_eq!(r.runtime_name, "/counting");
        assert!(!r.in_scope);
    }

    #[test]
    fn empty_stack() {
        let r = resolve_runtime_name("x", &[], &BTreeMap::new()).unwrap();
        assert_eq!((r.display_name.as_str(), r.runtime_name.as_str(), r.in_scope), ("x", "/x", true));
    }

    #[test]
    fn remap_to_absolute_leaves_scope() {
        let remaps = BTreeMap::from([("reset".to_string(), "/reset".to_string())]);
        let r = resolve_runtime_name("reset", &stack(&["red"]), &remaps).unwrap();
        assert_eq!(r.runtime_name, "/reset");
        assert!(!r.in_scope);
    }

    #[test]
    fn malformed_names_are_rejected() {
        let none = BTreeMap::new();
        assert_eq!(resolve_runtime_name("", &[], &none), Err(NameError::Empty));
        assert!(matches!(resolve_runtime_name("a//b", &[], &none), Err(NameError::EmptySegment(_))));
        assert!(matches!(resolve_runtime_name("/", &[], &none), Err(NameError::EmptySegment(_))));
        assert!(matches!(resolve_runtime_name("~/x", &[], &none), Err(NameError::Private(_))));
        assert!(matches!(
            resolve_runtime_name("x", &stack(&["a/b"]), &none),
            Err(NameError::SegmentWithSlash(_))
        ));
    }

    #[test]
    fn namespace_split() {
        assert_eq!(split_namespace("a/b"), (stack(&["a", "b"]), false));
        assert_eq!(split_namespace("/robot1"), (stack(&["robot1"]), true));
        assert_eq!(split_namespace(""), (vec![], false));
    }

    fn segment() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,6}"
    }

    fn name() -> impl Strategy<Value = String> {
        (proptest::bool::ANY, proptest::collection::vec(segment(), 1..4))
            .prop_map(|(abs, segs)| format!("{}{}", if abs { "/" } else { "" }, segs.join("/")))
    }

    proptest! {
        #[test]
        fn resolution_is_idempotent(
            declared in name(),
            ns in proptest::collection::vec(segment(), 0..4),
            target in name(),
        ) {
            // remap keys are relative, as written in launch files
            let key = declared.trim_start_matches('/').to_string();
            let remaps = BTreeMap::from([(key, target)]);
            let first = resolve_runtime_name(&declared, &ns, &remaps).unwrap();
            let second = resolve_runtime_name(&first.runtime_name, &ns, &remaps).unwrap();
            prop_assert_eq!(&second.runtime_name, &first.runtime_name);
            prop_assert!(!second.in_scope);
        }

        #[test]
        fn pushing_a_segment_prefixes_only_scoped_names(
            declared in name(),
            ns in proptest::collection::vec(segment(), 0..4),
            outer in segment(),
        ) {
            let none = BTreeMap::new();
            let inner = resolve_runtime_name(&declared, &ns, &none).unwrap();
            let mut pushed = vec![outer.clone()];
            pushed.extend(ns.iter().cloned());
            let outer_r = resolve_runtime_name(&declared, &pushed, &none).unwrap();
            if inner.in_scope {
                prop_assert_eq!(outer_r.runtime_name, prefix_runtime(&[outer], &inner.runtime_name));
            } else {
                prop_assert_eq!(outer_r.runtime_name, inner.runtime_name);
            }
        }
    }
}
