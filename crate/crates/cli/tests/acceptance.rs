//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when a criterion fails that is not listed in `UNATTAINABLE`,
//! or when a listed one starts passing.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rosarch_core::eval::{compare, format_decimal, macro_average, score, to_f64, Counts, EvalReport, Rational, Scores};
use rosarch_core::model::{ClassifierKind, ComposedClassifier, Model};
use rosarch_core::pipeline::{run_evaluate, run_recover, JobConfig, Mode, RecoverOutcome};
use rosarch_core::puml::{
    canonicalize, emit_model, parse_puml, CanonicalElement, CanonicalElementSet,
    ElementClass, Level,
};
use rosarch_core::synthesis::ReplayClient;

type Check = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn job(repo: &Path, out: &Path, launch: bool) -> JobConfig {
    let mut c = JobConfig {
        repo_root: repo.to_path_buf(),
        output_dir: out.to_path_buf(),
        ..JobConfig::default()
    };
    c.launch.enabled = launch;
    c
}

fn recover(config: &JobConfig) -> Result<RecoverOutcome, String> {
    run_recover(config, None).map_err(|e| e.to_string())
}

fn evaluate(gen: &Path, reference: &Path, out: &Path, missing_as_empty: bool) -> Result<EvalReport, String> {
    let mut c = JobConfig::default();
    c.report.missing_as_empty = missing_as_empty;
    run_evaluate(gen, reference, out, &c).map_err(|e| e.to_string())
}

fn one() -> Rational {
    Rational::from_integer(1)
}

fn perfect(s: &Scores) -> bool {
    s.precision == one() && s.recall == one() && s.f1 == one()
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

fn ac1() -> Check {
    let out = tmp();
    let start = Instant::now();
    let outcome = recover(&job(&fixture("synthetic_example"), out.path(), false))?;
    let report = evaluate(
        &out.path().join("component"),
        &fixture("synthetic_example/reference/component"),
        out.path(),
        false,
    )?;
    let elapsed = start.elapsed();
    ensure(outcome.components.len() == 6 && outcome.systems.is_empty(), || {
        format!("{} component / {} system diagrams", outcome.components.len(), outcome.systems.len())
    })?;
    ensure(report.models.len() == 6, || format!("{} models scored", report.models.len()))?;
    let classes = &report.class_averages[&Level::Atomic];
    let wanted = [
        "callback",
        "classifier_name",
        "classifier_stereotype",
        "message_type",
        "service_function",
        "service_type",
    ];
    for class in wanted {
        let s = classes.get(class).ok_or_else(|| format!("class {class} never scored"))?;
        ensure(perfect(s), || format!("{class}: {:?}", s))?;
    }
    for m in &report.models {
        ensure(perfect(&m.scores), || format!("{}: {:?}", m.key, m.counts))?;
    }
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("6 models, 6 element classes at exactly 1 in {} ms", elapsed.as_millis()))
}

fn composed(path: &Path) -> Result<ComposedClassifier, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    match parse_puml(&text).map_err(|e| e.to_string())?.model {
        Model::Composed(c) => Ok(c),
        Model::Atomic(_) => Err(format!("{}: not composed", path.display())),
    }
}

fn ac2() -> Check {
    let out = tmp();
    let outcome = recover(&job(&fixture("synthetic_example"), out.path(), true))?;
    ensure(outcome.systems.len() == 3, || format!("{} system diagrams", outcome.systems.len()))?;
    let mut all = BTreeMap::new();
    for rel in &outcome.systems {
        let c = composed(&out.path().join(rel))?;
        all.insert(c.name.clone(), c);
    }
    fn atomic_types(all: &BTreeMap<String, ComposedClassifier>, name: &str, acc: &mut BTreeSet<String>) {
        for p in &all[name].parts {
            match p.classifier_kind {
                ClassifierKind::Composed => atomic_types(all, &p.classifier_ref, acc),
                ClassifierKind::Atomic => {
                    acc.insert(p.classifier_ref.clone());
                }
            }
        }
    }
    let mut covered = BTreeSet::new();
    for name in all.keys() {
        atomic_types(&all, name, &mut covered);
    }
    let want: BTreeSet<String> = ["BarNode", "CounterNode", "FooNode"].map(String::from).into();
    ensure(covered == want, || format!("instantiated classes {covered:?}"))?;

    let c = all.get("Compose_example").ok_or("no Compose_example classifier")?;
    let foo = c.part("foo").ok_or("no foo part")?;
    ensure(foo.effective_namespace == ["red"], || format!("foo namespace {:?}", foo.effective_namespace))?;
    let number = foo.port("p1").ok_or("foo has no p1")?;
    ensure(
        number.display_name == "bit_number" && number.runtime_name == "/red/bit_number",
        || format!("remapped port {} -> {}", number.display_name, number.runtime_name),
    )?;
    let counting = foo.ports.iter().find(|p| p.port.declared_name == "/counting").ok_or("no /counting port")?;
    ensure(counting.runtime_name == "/counting", || format!("absolute name became {}", counting.runtime_name))?;
    let bar = c.part("bar").ok_or("no bar part")?;
    let reset = bar.ports.iter().find(|p| p.port.declared_name == "reset").ok_or("bar has no reset")?;
    ensure(reset.runtime_name == "/reset", || format!("absolute remap target became {}", reset.runtime_name))?;
    let topics: BTreeSet<&str> = c.topics.iter().map(|t| t.display_name.as_str()).collect();
    ensure(topics == BTreeSet::from(["/counting", "bit_number"]), || format!("topics {topics:?}"))?;
    let system = &all["system"];
    ensure(
        system.parts.len() == 1 && system.parts[0].effective_namespace == ["robot1"],
        || "system should hold one part in robot1".into(),
    )?;

    let report = evaluate(
        &out.path().join("system"),
        &fixture("synthetic_example/reference/system"),
        out.path(),
        false,
    )?;
    let avg = report.averages.get(&Level::Composed).ok_or("no composed average")?;
    ensure(perfect(avg), || format!("composed average {avg:?}"))?;
    for m in &report.models {
        ensure(perfect(&m.scores), || format!("{}: {:?}", m.key, m.counts))?;
    }
    Ok("3 composed classifiers cover BarNode, CounterNode, FooNode; remap then prefix; composed scores exactly 1".into())
}

fn pooled(report: &EvalReport, level: Level) -> Counts {
    report.pooled.get(&level).map(|p| p.counts).unwrap_or_default()
}

fn copy_tree(from: &Path, to: &Path) {
    for entry in walk(from) {
        let rel = entry.strip_prefix(from).unwrap();
        let dest = to.join(rel);
        std::fs::create_dir_all(dest.parent().unwrap()).unwrap();
        std::fs::copy(&entry, &dest).unwrap();
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// A deletion applied to one file of a fixture copy.
#[derive(Debug, Clone)]
enum Mutation {
    DeleteFile(PathBuf),
    /// Removes the byte range from the file.
    Cut(PathBuf, usize, usize),
}

fn matching_paren(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0;
    for (i, c) in text[open..].char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Deletions that only take facts away: whole files, endpoint statements,
/// remapping lists, namespace pushes and node actions.
fn mutations(root: &Path) -> Vec<Mutation> {
    let mut out = Vec::new();
    for path in walk(root) {
        let rel = path.strip_prefix(root).unwrap().to_path_buf();
        if rel.starts_with("reference") {
            continue;
        }
        out.push(Mutation::DeleteFile(rel.clone()));
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        let name = rel.to_string_lossy().to_string();
        if name.ends_with(".cpp") || name.ends_with(".hpp") {
            for call in ["create_publisher<", "create_subscription<", "create_service<", "create_client<"] {
                for (at, _) in text.match_indices(call) {
                    let start = text[..at].rfind('\n').map_or(0, |i| i + 1);
                    let end = text[at..].find(';').map(|i| at + i + 1).unwrap();
                    out.push(Mutation::Cut(rel.clone(), start, end));
                }
            }
        }
        if name.ends_with(".py") {
            for (at, _) in text.match_indices("remappings=") {
                let open = at + "remappings=".len();
                let close = matching_paren(&text, open).unwrap();
                let start = text[..at].trim_end().len();
                out.push(Mutation::Cut(rel.clone(), start - 1, close + 1));
            }
            for (at, _) in text.match_indices("PushRosNamespace(") {
                let close = matching_paren(&text, at + "PushRosNamespace".len()).unwrap();
                let end = if text[close + 1..].starts_with(',') { close + 2 } else { close + 1 };
                out.push(Mutation::Cut(rel.clone(), at, end));
            }
            for (at, _) in text.match_indices("Node(") {
                if text[..at].ends_with(|c: char| c.is_alphanumeric() || c == '_') || text[..at].trim_end().ends_with("import") {
                    continue;
                }
                let close = matching_paren(&text, at + "Node".len()).unwrap();
                let end = if text[close + 1..].starts_with(',') { close + 2 } else { close + 1 };
                out.push(Mutation::Cut(rel.clone(), at, end));
            }
        }
        if name.ends_with(".xml") && name.contains("launch") {
            for (at, _) in text.match_indices("<node ") {
                let end = text[at..].find("/>").map(|i| at + i + 2).unwrap();
                out.push(Mutation::Cut(rel.clone(), at, end));
            }
        }
    }
    out
}

fn apply(root: &Path, ms: &[&Mutation]) {
    // cuts on one file are applied back to front so offsets stay valid
    let mut cuts: BTreeMap<PathBuf, Vec<(usize, usize)>> = BTreeMap::new();
    let mut deleted = BTreeSet::new();
    for m in ms {
        match m {
            Mutation::DeleteFile(p) => {
                deleted.insert(p.clone());
            }
            Mutation::Cut(p, a, b) => cuts.entry(p.clone()).or_default().push((*a, *b)),
        }
    }
    for (p, mut ranges) in cuts {
        if deleted.contains(&p) {
            continue;
        }
        ranges.sort();
        ranges.dedup();
        let mut text = std::fs::read_to_string(root.join(&p)).unwrap();
        let mut last_start = usize::MAX;
        for (a, b) in ranges.into_iter().rev() {
            if b > last_start {
                continue;
            }
            text.replace_range(a..b, "");
            last_start = a;
        }
        std::fs::write(root.join(&p), text).unwrap();
    }
    for p in deleted {
        std::fs::remove_file(root.join(p)).unwrap();
    }
}

/// Pooled fp per level after recovering `repo` and scoring against its
/// references. Missing models count as empty.
fn fp_after(repo: &Path, reference: &Path) -> Result<(u64, u64), String> {
    let out = tmp();
    let config = job(repo, out.path(), true);
    match run_recover(&config, None) {
        Ok(_) => {}
        Err(rosarch_core::pipeline::PipelineError::NoOutputs) => return Ok((0, 0)),
        Err(e) => return Err(e.to_string()),
    }
    let report = evaluate(out.path(), reference, out.path(), true)?;
    Ok((pooled(&report, Level::Atomic).fp, pooled(&report, Level::Composed).fp))
}

fn ac3() -> Check {
    let degraded = fixture("degraded_example");
    let out = tmp();
    let outcome = recover(&job(&degraded, out.path(), true))?;
    let deep = outcome.warnings.iter().any(|w| w.contains("PlannerNode") && w.contains("above the limit"));
    let wrapped = outcome.warnings.iter().any(|w| w.contains("DebugPublisher"));
    ensure(deep && wrapped, || format!("missing degradation warnings: {:?}", outcome.warnings))?;
    let report = evaluate(out.path(), &degraded.join("reference"), out.path(), true)?;
    let mut detail = Vec::new();
    for level in [Level::Atomic, Level::Composed] {
        let p = report.pooled.get(&level).ok_or("level not scored")?;
        ensure(p.counts.fp == 0 && p.scores.precision == one(), || format!("{} fp = {}", level.as_str(), p.counts.fp))?;
        ensure(p.scores.recall < one(), || format!("{} recall not lowered", level.as_str()))?;
        detail.push(format!("{} R = {}", level.as_str(), format_decimal(p.scores.recall, 2)));
    }
    for m in report.models.iter().filter(|m| m.generated.is_some()) {
        ensure(m.scores.precision == one(), || format!("{} precision {:?}", m.key, m.scores.precision))?;
    }

    let mut tried = 0;
    for name in ["synthetic_example", "degraded_example"] {
        let root = fixture(name);
        let reference = root.join("reference");
        let base = fp_after(&root, &reference)?;
        let all = mutations(&root);
        let mut rng = StdRng::seed_from_u64(7);
        let mut sets: Vec<Vec<&Mutation>> = all.iter().map(|m| vec![m]).collect();
        for _ in 0..40 {
            let k = rng.gen_range(2..=4);
            sets.push(all.choose_multiple(&mut rng, k).collect());
        }
        for set in sets {
            let copy = tmp();
            copy_tree(&root, copy.path());
            apply(copy.path(), &set);
            let after = fp_after(copy.path(), &reference)?;
            ensure(after.0 <= base.0 && after.1 <= base.1, || {
                format!("{name}: fp rose from {base:?} to {after:?} after {set:?}")
            })?;
            tried += 1;
        }
    }
    Ok(format!("warnings emitted, P = 1, {}; fp never rose over {tried} deletion sets", detail.join(", ")))
}

fn f1_of(p: f64, r: f64) -> f64 {
    let q = |x: f64| Rational::new((x * 100.0).round() as u64, 100);
    to_f64(Scores::from_pr(q(p), q(r)).f1)
}

fn mean_of(values: &[f64]) -> f64 {
    let q = |x: f64| Rational::new((x * 100.0).round() as u64, 100);
    let scores: Vec<Scores> = values.iter().map(|&v| Scores::from_pr(q(v), q(v))).collect();
    to_f64(macro_average(&scores).unwrap().precision)
}

fn ac4() -> Check {
    let checks: Vec<(&str, f64, f64)> = vec![
        ("case II atomic F1", f1_of(1.0, 1.0), 1.0),
        ("case II atomic avg", mean_of(&[1.0, 1.0, 1.0]), 1.0),
        ("case II composed F1 #1", f1_of(1.0, 0.80), 0.89),
        ("case II composed F1 #2", f1_of(0.60, 0.43), 0.50),
        ("case II composed F1 #3", f1_of(1.0, 1.0), 1.0),
        ("case II composed P avg", mean_of(&[1.0, 0.60, 1.0]), 0.88),
        ("case II composed R avg", mean_of(&[0.80, 0.43, 1.0]), 0.75),
        ("case II composed F1 avg", mean_of(&[0.89, 0.50, 1.0]), 0.81),
        ("case III atomic F1 #1", f1_of(0.80, 0.57), 0.67),
        ("case III atomic F1 #2", f1_of(0.75, 0.67), 0.71),
        ("case III atomic F1 #3", f1_of(0.80, 0.40), 0.53),
        ("case III atomic P avg", mean_of(&[0.80, 0.75, 0.80]), 0.78),
        ("case III atomic R avg", mean_of(&[0.57, 0.67, 0.40]), 0.55),
        ("case III atomic F1 avg", mean_of(&[0.67, 0.71, 0.53]), 0.64),
        ("case III composed F1 #1", f1_of(1.0, 0.20), 0.33),
        ("case III composed F1 #2", f1_of(1.0, 0.49), 0.65),
        ("case III composed P avg", mean_of(&[1.0, 1.0]), 1.0),
        ("case III composed R avg", mean_of(&[0.20, 0.49]), 0.35),
        // printed as 0.40; the entries and the prose give 0.49
        ("case III composed F1 avg", mean_of(&[0.33, 0.65]), 0.49),
    ];
    let misses: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 0.01 + 1e-9)
        .map(|(what, got, want)| format!("{what}: {got:.4} vs printed {want:.2}"))
        .collect();
    ensure(misses.is_empty(), || {
        format!("{} of {} values off by more than 0.01: {}", misses.len(), checks.len(), misses.join("; "))
    })?;
    Ok(format!("{} values within 0.01", checks.len()))
}

/// Splits diagram text into top-level statements. Brace blocks, legends and
/// multi-line notes stay whole; their inner statements are split the same
/// way so they can be shuffled too.
#[derive(Debug, Clone)]
enum Stmt {
    Line(String),
    Block { open: String, body: Vec<Stmt>, close: String },
    Verbatim(Vec<String>),
}

fn split(lines: &[&str], i: &mut usize) -> Vec<Stmt> {
    let mut out = Vec::new();
    while *i < lines.len() {
        let line = lines[*i];
        let t = line.trim();
        if t == "}" {
            return out;
        }
        *i += 1;
        if t.ends_with('{') {
            let body = split(lines, i);
            let close = lines.get(*i).copied().unwrap_or("}").to_string();
            *i += 1;
            out.push(Stmt::Block {
                open: line.to_string(),
                body,
                close,
            });
        } else if t == "legend" || t.starts_with("legend ") || (t.starts_with("note ") && !t.contains(':')) {
            let end = if t.starts_with("legend") { "endlegend" } else { "end note" };
            let mut v = vec![line.to_string()];
            while *i < lines.len() {
                v.push(lines[*i].to_string());
                *i += 1;
                if v.last().unwrap().trim() == end {
                    break;
                }
            }
            out.push(Stmt::Verbatim(v));
        } else {
            out.push(Stmt::Line(line.to_string()));
        }
    }
    out
}

fn shuffle(stmts: &mut [Stmt], rng: &mut StdRng) {
    stmts.shuffle(rng);
    for s in stmts.iter_mut() {
        if let Stmt::Block { body, .. } = s {
            shuffle(body, rng);
        }
    }
}

fn join(stmts: &[Stmt], out: &mut String) {
    for s in stmts {
        match s {
            Stmt::Line(l) => {
                out.push_str(l);
                out.push('\n');
            }
            Stmt::Verbatim(v) => {
                for l in v {
                    out.push_str(l);
                    out.push('\n');
                }
            }
            Stmt::Block { open, body, close } => {
                out.push_str(open);
                out.push('\n');
                join(body, out);
                out.push_str(close);
                out.push('\n');
            }
        }
    }
}

fn permuted(text: &str, rng: &mut StdRng) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| l.trim() == "@startuml").unwrap();
    let end = lines.iter().rposition(|l| l.trim() == "@enduml").unwrap();
    let inner = &lines[start + 1..end];
    let mut i = 0;
    let mut stmts = split(inner, &mut i);
    shuffle(&mut stmts, rng);
    let mut out = String::from("@startuml\n");
    join(&stmts, &mut out);
    out.push_str("@enduml\n");
    out
}

fn puml_files(dir: &Path) -> Vec<PathBuf> {
    walk(dir).into_iter().filter(|p| p.extension().is_some_and(|x| x == "puml")).collect()
}

fn ac5() -> Check {
    let start = Instant::now();
    let mut texts = Vec::new();
    for name in ["synthetic_example", "degraded_example"] {
        let out = tmp();
        recover(&job(&fixture(name), out.path(), true))?;
        texts.extend(puml_files(out.path()).into_iter().map(|p| std::fs::read_to_string(p).unwrap()));
        texts.extend(puml_files(&fixture(name).join("reference")).into_iter().map(|p| std::fs::read_to_string(p).unwrap()));
    }
    let mut rng = StdRng::seed_from_u64(2024);
    let mut permutations = 0;
    for text in &texts {
        let parsed = parse_puml(text).map_err(|e| e.to_string())?;
        let m = &parsed.model;
        let expected = canonicalize(m);
        let emitted = emit_model(m, &parsed.types);
        let back = parse_puml(&emitted).map_err(|e| format!("{}: {e}", m.name()))?;
        ensure(canonicalize(&back.model) == expected, || format!("{}: round trip changed the canonical set", m.name()))?;
        for _ in 0..1000 {
            let shuffled = permuted(&emitted, &mut rng);
            let p = parse_puml(&shuffled).map_err(|e| format!("{}: {e}\n{shuffled}", m.name()))?;
            ensure(canonicalize(&p.model) == expected, || format!("{}: permutation changed the set\n{shuffled}", m.name()))?;
            permutations += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{} models round-trip; {permutations} permutations invariant in {} ms", texts.len(), elapsed.as_millis()))
}

fn random_set(rng: &mut StdRng) -> (CanonicalElementSet, Vec<String>) {
    let classes = [ElementClass::PartName, ElementClass::PartType, ElementClass::RemappedTopic];
    let mut set = CanonicalElementSet::empty(Level::Composed, "m");
    let mut plain = Vec::new();
    for _ in 0..rng.gen_range(0..20) {
        let c = rng.gen_range(0..classes.len());
        let v = rng.gen_range(0..10);
        set.elements.insert(CanonicalElement::new(classes[c], [("name", format!("n{v}").as_str())]));
        plain.push(format!("{c}/{v}"));
    }
    (set, plain)
}

fn ac6() -> Check {
    let mut rng = StdRng::seed_from_u64(99);
    let n = 10_000;
    for i in 0..n {
        let (a, pa) = random_set(&mut rng);
        let (b, pb) = random_set(&mut rng);
        let ab = compare(&a, &b).map_err(|e| e.to_string())?;
        // brute force over the raw draws
        let ua: BTreeSet<&String> = pa.iter().collect();
        let ub: BTreeSet<&String> = pb.iter().collect();
        let tp = ua.iter().filter(|x| ub.contains(*x)).count() as u64;
        let oracle = Counts { tp, fp: ua.len() as u64 - tp, fn_: ub.len() as u64 - tp };
        ensure(ab == oracle, || format!("instance {i}: {ab:?} vs oracle {oracle:?}"))?;
        let s = score(ab);
        if tp + oracle.fp + oracle.fn_ > 0 {
            ensure(s.f1 == Rational::new(2 * tp, 2 * tp + oracle.fp + oracle.fn_), || format!("instance {i}: F1"))?;
        }
        let aa = compare(&a, &a).unwrap();
        ensure(aa.fp == 0 && aa.fn_ == 0 && perfect(&score(aa)), || format!("instance {i}: not reflexive"))?;
        let ba = score(compare(&b, &a).unwrap());
        ensure(s.precision == ba.recall && s.recall == ba.precision && s.f1 == ba.f1, || {
            format!("instance {i}: swap asymmetry")
        })?;
        if let Some(extra) = b.elements.iter().next() {
            let mut more = a.clone();
            more.elements.insert(extra.clone());
            let m = compare(&more, &b).unwrap();
            ensure(m.tp >= ab.tp && m.fp == ab.fp && m.fn_ <= ab.fn_, || format!("instance {i}: not monotone"))?;
            ensure(score(m).recall >= s.recall, || format!("instance {i}: recall fell"))?;
        }
    }
    Ok(format!("{n} random instances"))
}

fn provenance(text: &str) -> Option<&str> {
    text.lines().find_map(|l| l.strip_prefix("'@provenance "))
}

fn ac7() -> Check {
    let root = fixture("synthetic_example");
    let out = tmp();
    let det = recover(&job(&root, out.path(), true))?;
    ensure(det.violations.is_empty(), || format!("deterministic violations {:?}", det.violations))?;

    let out = tmp();
    let mut config = job(&root, out.path(), true);
    config.mode = Mode::Llm;
    let client = ReplayClient::from_dir(&root.join("transcripts/valid"))?;
    let replay = run_recover(&config, Some(&client)).map_err(|e| e.to_string())?;
    ensure(replay.violations.is_empty() && replay.fallbacks.is_empty(), || {
        format!("replay: violations {:?}, fallbacks {:?}", replay.violations, replay.fallbacks)
    })?;
    for p in puml_files(out.path()) {
        let text = std::fs::read_to_string(&p).unwrap();
        ensure(provenance(&text) == Some("llm"), || format!("{}: provenance {:?}", p.display(), provenance(&text)))?;
    }

    let out = tmp();
    let o = Command::new(env!("CARGO_BIN_EXE_rosarch"))
        .arg("recover")
        .arg(&root)
        .args(["--mode", "llm", "--replay"])
        .arg(root.join("transcripts/mutated"))
        .arg("-o")
        .arg(out.path())
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.code() == Some(0), || format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))?;
    let files = puml_files(out.path());
    ensure(files.len() == 9, || format!("{} diagrams", files.len()))?;
    let compose = std::fs::read_to_string(out.path().join("system/Compose_example.puml")).unwrap();
    ensure(provenance(&compose) == Some("deterministic-fallback"), || "mutated response was accepted".into())?;
    let transcript = std::fs::read_to_string(out.path().join("transcripts/composed_Compose_example.json")).unwrap();
    ensure(transcript.contains("GhostPlanner"), || "rejection not recorded in the transcript".into())?;
    let log = std::fs::read_to_string(out.path().join("recover.log")).unwrap();
    ensure(!log.contains("contract violation"), || format!("written diagrams violate the contract: {log}"))?;
    Ok("9 replayed diagrams accepted; GhostPlanner response rejected, fallback used, exit 0".into())
}

fn full_run(out: &Path) -> Result<(), String> {
    let root = fixture("synthetic_example");
    let bin = env!("CARGO_BIN_EXE_rosarch");
    for args in [
        vec!["scan".into(), root.display().to_string()],
        vec!["recover".into(), root.display().to_string()],
    ] {
        let o = Command::new(bin).args(&args).arg("-o").arg(out).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    }
    let o = Command::new(bin)
        .arg("evaluate")
        .arg(out)
        .arg(root.join("reference"))
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())
}

fn ac8() -> Check {
    let (a, b) = (tmp(), tmp());
    full_run(a.path())?;
    full_run(b.path())?;
    let pick = |root: &Path| -> BTreeMap<PathBuf, Vec<u8>> {
        walk(root)
            .into_iter()
            .filter(|p| {
                p.extension().is_some_and(|x| x == "puml")
                    || p.file_name().is_some_and(|n| n == "scan.json" || n == "report.json")
            })
            .map(|p| (p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()))
            .collect()
    };
    let (x, y) = (pick(a.path()), pick(b.path()));
    ensure(x.len() == 11, || format!("{} artifacts", x.len()))?;
    ensure(x.keys().eq(y.keys()), || "different artifact sets".into())?;
    for (k, v) in &x {
        ensure(&y[k] == v, || format!("{} differs between runs", k.display()))?;
    }
    Ok(format!("{} artifacts byte-identical", x.len()))
}

/// Criteria that cannot pass as stated, with the reason printed next to FAIL.
const UNATTAINABLE: [(&str, &str); 1] = [(
    "AC4",
    "the two printed averages above are outside +-0.01 of any mean their own two-decimal entries allow",
)];

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
    ];
    let mut failed = 0;
    let known: BTreeMap<&str, &str> = UNATTAINABLE.into_iter().collect();
    for (id, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match (result, known.get(id)) {
            (Ok(detail), None) => println!("{id} PASS  {detail}"),
            (Ok(detail), Some(_)) => {
                failed += 1;
                println!("{id} PASS  {detail} (listed as unattainable; update the list)");
            }
            (Err(why), Some(reason)) => println!("{id} FAIL  {why} [unattainable: {reason}]"),
            (Err(why), None) => {
                failed += 1;
                println!("{id} FAIL  {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
