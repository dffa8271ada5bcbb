//! End-to-end job: scan, recover and evaluate, with the job directory
//! layout
//!
//! ```text
//! <out>/scan.json
//! <out>/component/<Class>.puml
//! <out>/system/<launch stem>.puml
//! <out>/transcripts/*.json
//! <out>/report.json, <out>/report.md
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{evaluate_job, render_markdown, EvalError, EvalOptions, EvalReport, Pairing, PairingPolicy};
use crate::extract::{scan_repository, write_scan, NodeScan, ScanConfig, ScanError};
use crate::interfaces::{load_interfaces, InterfaceSet};
use crate::launch::{
    discover_launch_files, parse_build_config, parse_launch, LaunchError, LaunchSpec, PackageIndex, ResolveOptions,
};
use crate::model::ComposedClassifier;
use crate::puml::{emit_atomic, emit_composed, with_header, Level};
use crate::synthesis::{
    build_component_models, build_system_model, llm_synthesize, validate_llm_output, BlueprintContract,
    ComponentModel, LlmClient, LlmSettings, Provenance, SynthesisTarget, TraceIndex,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Deterministic,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaunchSettings {
    pub enabled: bool,
    /// Launch files that get a system diagram. Empty means all.
    pub roots: Vec<String>,
    #[serde(flatten)]
    pub resolve: ResolveOptions,
}

impl Default for LaunchSettings {
    fn default() -> Self {
        LaunchSettings {
            enabled: true,
            roots: Vec::new(),
            resolve: ResolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportSettings {
    pub connectivity: bool,
    pub missing_as_empty: bool,
    /// Generated key -> reference key.
    pub pairs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct JobConfig {
    pub repo_root: PathBuf,
    pub output_dir: PathBuf,
    pub mode: Mode,
    pub scan: ScanConfig,
    pub launch: LaunchSettings,
    pub llm: LlmSettings,
    pub report: ReportSettings,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            repo_root: PathBuf::from("."),
            output_dir: PathBuf::from("rosarch-out"),
            mode: Mode::Deterministic,
            scan: ScanConfig::default(),
            launch: LaunchSettings::default(),
            llm: LlmSettings::default(),
            report: ReportSettings::default(),
        }
    }
}

impl JobConfig {
    pub fn pairing(&self) -> Pairing {
        Pairing {
            explicit: self.report.pairs.clone(),
            policy: if self.report.missing_as_empty {
                PairingPolicy::MissingAsEmpty
            } else {
                PairingPolicy::Strict
            },
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            connectivity: self.report.connectivity,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Launch(#[from] LaunchError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("llm mode needs an endpoint or a replay directory")]
    LlmNotConfigured,
    #[error("recovery produced no models")]
    NoOutputs,
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn warnings_log(warnings: &[String]) -> String {
    let mut s = String::new();
    for w in warnings {
        let _ = writeln!(s, "{w}");
    }
    s
}

/// Scans the repository and writes `scan.json` and `scan.log`.
pub fn run_scan(config: &JobConfig) -> Result<NodeScan, PipelineError> {
    let scan = scan_repository(&config.repo_root, &config.scan)?;
    write_file(&config.output_dir.join("scan.json"), &write_scan(&scan)?)?;
    write_file(&config.output_dir.join("scan.log"), warnings_log(&scan.warnings).as_bytes())?;
    Ok(scan)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoverOutcome {
    /// Paths relative to the output directory.
    pub components: Vec<String>,
    pub systems: Vec<String>,
    pub warnings: Vec<String>,
    /// Contract violations of written diagrams; empty in a healthy run.
    pub violations: Vec<String>,
    pub fallbacks: Vec<String>,
}

fn file_stem_for(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') { c } else { '_' })
        .collect()
}

fn digest_line(root: &Path, rel: &str) -> (String, String) {
    let value = match std::fs::read(root.join(rel)) {
        Ok(bytes) => format!("{rel} sha256:{}", hex::encode(Sha256::digest(&bytes))),
        Err(_) => format!("{rel} sha256:unavailable"),
    };
    ("input".to_string(), value)
}

struct Draft {
    target: SynthesisTarget,
    file: String,
    deterministic: String,
    header: Vec<(String, String)>,
    artifacts: String,
}

fn component_artifacts(scan: &NodeScan, m: &ComponentModel) -> String {
    let record = scan.node(&m.classifier.name);
    let mut s = String::from("Node class record:\n");
    s.push_str(&serde_json::to_string_pretty(&record).unwrap_or_default());
    s.push_str("\n\nInterface types:\n");
    for t in &m.types {
        let _ = writeln!(s, "- {}", t.name());
    }
    s
}

fn system_artifacts(root: &Path, c: &ComposedClassifier, components: &BTreeMap<String, String>) -> String {
    let mut s = format!("Launch file {}:\n", c.launch_ref);
    s.push_str(&std::fs::read_to_string(root.join(&c.launch_ref)).unwrap_or_default());
    s.push_str("\n\nComponent diagrams of the launched node classes:\n");
    let used: BTreeSet<&str> = c.parts.iter().map(|p| p.classifier_ref.as_str()).collect();
    for name in used {
        if let Some(text) = components.get(name) {
            s.push_str(text);
        }
    }
    s
}

fn load_specs(root: &Path, warnings: &mut Vec<String>) -> BTreeMap<String, LaunchSpec> {
    let paths = discover_launch_files(root);
    let parsed: Vec<(String, Result<LaunchSpec, String>)> = paths
        .par_iter()
        .map(|rel| {
            let spec = std::fs::read_to_string(root.join(rel))
                .map_err(|e| e.to_string())
                .and_then(|text| parse_launch(rel, &text).map_err(|e| e.to_string()));
            (rel.clone(), spec)
        })
        .collect();
    let mut out = BTreeMap::new();
    for (rel, spec) in parsed {
        match spec {
            Ok(s) => {
                out.insert(rel, s);
            }
            Err(e) => warnings.push(format!("{e}; launch file skipped")),
        }
    }
    out
}

fn clear_diagrams(dir: &Path) -> Result<(), PipelineError> {
    let Ok(entries) = std::fs::read_dir(dir) else { return Ok(()) };
    for e in entries.filter_map(Result::ok) {
        let p = e.path();
        if p.extension().is_some_and(|x| x == "puml" || x == "png") {
            std::fs::remove_file(&p).map_err(|err| io_err(&p, err))?;
        }
    }
    Ok(())
}

/// Builds every diagram and writes it below the output directory. In llm
/// mode `client` answers the synthesis requests.
pub fn run_recover(config: &JobConfig, client: Option<&dyn LlmClient>) -> Result<RecoverOutcome, PipelineError> {
    if config.mode == Mode::Llm && client.is_none() {
        return Err(PipelineError::LlmNotConfigured);
    }
    let root = &config.repo_root;
    let out = &config.output_dir;
    let scan = run_scan(config)?;
    let interfaces: InterfaceSet = load_interfaces(root);
    let mut warnings: Vec<String> = scan.warnings.clone();
    warnings.extend(interfaces.warnings.iter().cloned());
    let components = build_component_models(&scan, &interfaces);

    let resolved: Vec<ComposedClassifier> = if config.launch.enabled {
        let specs = load_specs(root, &mut warnings);
        let (packages, package_warnings) = PackageIndex::discover(root);
        warnings.extend(package_warnings);
        let build = parse_build_config(root, &scan);
        warnings.extend(build.warnings.iter().cloned());
        let resolution = build_system_model(&scan, &specs, &build, &packages, &components, &config.launch.resolve)?;
        warnings.extend(resolution.warnings.iter().cloned());
        for (classifier, v) in &resolution.violations {
            warnings.push(format!("{classifier}: {v}; left unbound"));
        }
        resolution
            .classifiers
            .into_iter()
            .filter(|c| config.launch.roots.is_empty() || config.launch.roots.contains(&c.launch_ref))
            .collect()
    } else {
        Vec::new()
    };

    let contract = BlueprintContract::v1();
    let trace = TraceIndex::new(&scan, &interfaces, &resolved);
    let component_drafts: Vec<Draft> = components
        .iter()
        .map(|m| {
            let header = m.classifier.source_refs.iter().map(|r| digest_line(root, r)).collect();
            Draft {
                target: SynthesisTarget {
                    level: Level::Atomic,
                    name: m.classifier.name.clone(),
                },
                file: format!("component/{}.puml", file_stem_for(&m.classifier.name)),
                deterministic: emit_atomic(&m.classifier, &m.types),
                header,
                artifacts: component_artifacts(&scan, m),
            }
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.llm.max_concurrency.max(1))
        .build()
        .map_err(|e| PipelineError::Io {
            path: "thread pool".into(),
            message: e.to_string(),
        })?;
    let synthesize = |drafts: &[Draft]| -> Vec<(String, Provenance, Vec<String>, Option<String>)> {
        match (config.mode, client) {
            (Mode::Llm, Some(client)) => pool.install(|| {
                drafts
                    .par_iter()
                    .map(|d| {
                        let o = llm_synthesize(client, &config.llm, &contract, &trace, &d.target, &d.artifacts, &d.deterministic);
                        let transcript = serde_json::to_string_pretty(&o.transcript).expect("transcript serializes");
                        (o.text, o.provenance, o.warnings, Some(transcript))
                    })
                    .collect()
            }),
            _ => drafts
                .iter()
                .map(|d| {
                    let text = with_header(
                        &d.deterministic,
                        &[("provenance".into(), Provenance::Deterministic.as_str().into())],
                    );
                    (text, Provenance::Deterministic, Vec::new(), None)
                })
                .collect(),
        }
    };

    let mut outcome = RecoverOutcome::default();
    let component_results = synthesize(&component_drafts);
    // system requests quote the accepted component diagrams
    let accepted: BTreeMap<String, String> = component_drafts
        .iter()
        .zip(&component_results)
        .map(|(d, r)| (d.target.name.clone(), r.0.clone()))
        .collect();
    let system_drafts: Vec<Draft> = resolved
        .iter()
        .map(|c| Draft {
            target: SynthesisTarget {
                level: Level::Composed,
                name: c.name.clone(),
            },
            file: format!("system/{}.puml", file_stem_for(&c.name)),
            deterministic: emit_composed(c),
            header: vec![digest_line(root, &c.launch_ref)],
            artifacts: system_artifacts(root, c, &accepted),
        })
        .collect();
    let system_results = synthesize(&system_drafts);

    clear_diagrams(&out.join("component"))?;
    clear_diagrams(&out.join("system"))?;
    for (draft, (text, provenance, w, transcript)) in component_drafts
        .iter()
        .zip(component_results)
        .chain(system_drafts.iter().zip(system_results))
    {
        warnings.extend(w);
        if provenance == Provenance::DeterministicFallback {
            outcome.fallbacks.push(draft.target.name.clone());
        }
        let text = with_header(&text, &draft.header);
        let level = draft.target.level.as_str();
        for v in validate_llm_output(&text, &contract, &trace) {
            outcome.violations.push(format!("{}: {v}", draft.file));
        }
        if let Some(t) = transcript {
            let name = format!("transcripts/{level}_{}.json", file_stem_for(&draft.target.name));
            write_file(&out.join(name), t.as_bytes())?;
        }
        write_file(&out.join(&draft.file), text.as_bytes())?;
        match draft.target.level {
            Level::Atomic => outcome.components.push(draft.file.clone()),
            Level::Composed => outcome.systems.push(draft.file.clone()),
        }
    }
    warnings.extend(outcome.violations.iter().map(|v| format!("contract violation: {v}")));
    let mut seen = BTreeSet::new();
    warnings.retain(|w| seen.insert(w.clone()));
    write_file(&out.join("recover.log"), warnings_log(&warnings).as_bytes())?;
    outcome.warnings = warnings;
    if outcome.components.is_empty() && outcome.systems.is_empty() {
        return Err(PipelineError::NoOutputs);
    }
    Ok(outcome)
}

/// Scores `gen_dir` against `ref_dir`; writes `report.json` and `report.md`
/// into `out_dir`.
pub fn run_evaluate(gen_dir: &Path, ref_dir: &Path, out_dir: &Path, config: &JobConfig) -> Result<EvalReport, PipelineError> {
    let report = evaluate_job(gen_dir, ref_dir, &config.pairing(), &config.eval_options())?;
    write_file(&out_dir.join("report.json"), report.to_json().as_bytes())?;
    write_file(&out_dir.join("report.md"), render_markdown(&report).as_bytes())?;
    Ok(report)
}
