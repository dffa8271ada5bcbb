use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use super::{compare, compare_by_class, format_decimal, macro_average, score, scored_classes, Counts, Scores};
use crate::puml::{canonicalize_with, parse_puml, CanonicalElementSet, CanonicalOptions, Level};

pub const CONVENTIONS: &str = "both sets empty: P = R = F1 = 1; generated set empty: P = 0; reference set empty: R = 0; F1 = 0 when P + R = 0";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingPolicy {
    /// Every model on either side needs a partner.
    #[default]
    Strict,
    /// A model without partner is scored against an empty set.
    MissingAsEmpty,
}

/// Generated models pair with references by relative path without the
/// `.puml` extension, unless `explicit` maps a generated key to another
/// reference key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pairing {
    pub explicit: BTreeMap<String, String>,
    pub policy: PairingPolicy,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Also score `connection` elements.
    pub connectivity: bool,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{key}: {source}")]
    Level {
        key: String,
        #[source]
        source: super::LevelMismatch,
    },
    #[error("unpaired models; generated only: [{}], reference only: [{}]", generated_only.join(", "), reference_only.join(", "))]
    Unpaired {
        generated_only: Vec<String>,
        reference_only: Vec<String>,
    },
    #[error("{0}: no models found")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassReport {
    pub counts: Counts,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelReport {
    pub key: String,
    pub level: Level,
    pub generated: Option<String>,
    pub reference: Option<String>,
    pub counts: Counts,
    pub scores: Scores,
    /// Classes present on at least one side.
    pub classes: BTreeMap<String, ClassReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub side: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalReport {
    pub conventions: String,
    pub connectivity: bool,
    pub policy: PairingPolicy,
    pub models: Vec<ModelReport>,
    pub averages: BTreeMap<Level, Scores>,
    /// Counts summed over all models of a level, scored once.
    pub pooled: BTreeMap<Level, ClassReport>,
    /// Per level and class, the mean over models in which the class occurs.
    pub class_averages: BTreeMap<Level, BTreeMap<String, Scores>>,
    pub inputs: Vec<InputDigest>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn model(&self, key: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.key == key)
    }
}

/// One scored pair. A missing side counts as the empty set.
#[derive(Debug, Clone)]
pub struct ModelPair {
    pub key: String,
    pub generated: Option<(String, CanonicalElementSet)>,
    pub reference: Option<(String, CanonicalElementSet)>,
}

pub fn evaluate_pairs(pairs: Vec<ModelPair>, options: &EvalOptions, policy: PairingPolicy) -> Result<EvalReport, EvalError> {
    let mut models = Vec::new();
    for pair in pairs {
        let level = match (&pair.generated, &pair.reference) {
            (Some((_, g)), _) => g.level,
            (None, Some((_, r))) => r.level,
            (None, None) => continue,
        };
        let empty = CanonicalElementSet::empty(level, pair.key.clone());
        let gen = pair.generated.as_ref().map(|(_, s)| s).unwrap_or(&empty);
        let reference = pair.reference.as_ref().map(|(_, s)| s).unwrap_or(&empty);
        let counts = compare(gen, reference).map_err(|source| EvalError::Level {
            key: pair.key.clone(),
            source,
        })?;
        let classes = compare_by_class(gen, reference)
            .expect("levels already checked")
            .into_iter()
            .map(|(class, counts)| {
                (
                    class.as_str().to_string(),
                    ClassReport {
                        counts,
                        scores: score(counts),
                    },
                )
            })
            .collect();
        models.push(ModelReport {
            key: pair.key,
            level,
            generated: pair.generated.map(|(p, _)| p),
            reference: pair.reference.map(|(p, _)| p),
            counts,
            scores: score(counts),
            classes,
        });
    }
    let mut averages = BTreeMap::new();
    let mut class_averages = BTreeMap::new();
    let mut pooled = BTreeMap::new();
    for level in [Level::Atomic, Level::Composed] {
        let of_level: Vec<&ModelReport> = models.iter().filter(|m| m.level == level).collect();
        let scores: Vec<Scores> = of_level.iter().map(|m| m.scores).collect();
        let Some(avg) = macro_average(&scores) else { continue };
        averages.insert(level, avg);
        let counts = of_level.iter().fold(Counts::default(), |a, m| Counts {
            tp: a.tp + m.counts.tp,
            fp: a.fp + m.counts.fp,
            fn_: a.fn_ + m.counts.fn_,
        });
        pooled.insert(
            level,
            ClassReport {
                counts,
                scores: score(counts),
            },
        );
        let mut per_class = BTreeMap::new();
        for class in scored_classes(level, options.connectivity) {
            let v: Vec<Scores> = of_level
                .iter()
                .filter_map(|m| m.classes.get(class.as_str()).map(|c| c.scores))
                .collect();
            if let Some(avg) = macro_average(&v) {
                per_class.insert(class.as_str().to_string(), avg);
            }
        }
        class_averages.insert(level, per_class);
    }
    Ok(EvalReport {
        conventions: CONVENTIONS.to_string(),
        connectivity: options.connectivity,
        policy,
        models,
        averages,
        pooled,
        class_averages,
        inputs: Vec::new(),
    })
}

fn list_models(dir: &Path) -> Result<BTreeMap<String, String>, EvalError> {
    if !dir.is_dir() {
        return Err(EvalError::Io {
            path: dir.display().to_string(),
            message: "not a directory".into(),
        });
    }
    let mut out = BTreeMap::new();
    for entry in WalkDir::new(dir).sort_by_file_name().into_iter().filter_map(Result::ok) {
        if !entry.file_type().is_file() || entry.path().extension().is_none_or(|e| e != "puml") {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
        let rel: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let rel = rel.join("/");
        let key = rel.strip_suffix(".puml").unwrap_or(&rel).to_string();
        out.insert(key, rel);
    }
    Ok(out)
}

fn load(dir: &Path, rel: &str, side: &str, options: &CanonicalOptions, digests: &mut Vec<InputDigest>) -> Result<CanonicalElementSet, EvalError> {
    let path = dir.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    digests.push(InputDigest {
        side: side.to_string(),
        path: rel.to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    });
    let text = String::from_utf8_lossy(&bytes);
    let parsed = parse_puml(&text).map_err(|e| EvalError::Parse {
        path: format!("{side}/{rel}"),
        message: e.to_string(),
    })?;
    Ok(canonicalize_with(&parsed.model, options))
}

/// Scores every pair of diagrams under `gen_dir` and `ref_dir`.
pub fn evaluate_job(gen_dir: &Path, ref_dir: &Path, pairing: &Pairing, options: &EvalOptions) -> Result<EvalReport, EvalError> {
    let generated = list_models(gen_dir)?;
    let references = list_models(ref_dir)?;
    if generated.is_empty() {
        return Err(EvalError::Empty(gen_dir.display().to_string()));
    }
    if references.is_empty() {
        return Err(EvalError::Empty(ref_dir.display().to_string()));
    }
    let partner = |key: &String| pairing.explicit.get(key).cloned().unwrap_or_else(|| key.clone());
    let claimed: BTreeSet<String> = generated.keys().map(partner).filter(|r| references.contains_key(r)).collect();
    let generated_only: Vec<String> = generated.keys().filter(|k| !references.contains_key(&partner(k))).cloned().collect();
    let reference_only: Vec<String> = references.keys().filter(|k| !claimed.contains(*k)).cloned().collect();
    if pairing.policy == PairingPolicy::Strict && (!generated_only.is_empty() || !reference_only.is_empty()) {
        return Err(EvalError::Unpaired {
            generated_only,
            reference_only,
        });
    }
    let canon = CanonicalOptions {
        connectivity: options.connectivity,
    };
    let mut digests = Vec::new();
    let mut pairs = Vec::new();
    for (key, rel) in &generated {
        let gen = load(gen_dir, rel, "generated", &canon, &mut digests)?;
        let ref_key = partner(key);
        let reference = match references.get(&ref_key) {
            Some(r) => Some((r.clone(), load(ref_dir, r, "reference", &canon, &mut digests)?)),
            None => None,
        };
        pairs.push(ModelPair {
            key: key.clone(),
            generated: Some((rel.clone(), gen)),
            reference,
        });
    }
    for key in &reference_only {
        let rel = &references[key];
        pairs.push(ModelPair {
            key: key.clone(),
            generated: None,
            reference: Some((rel.clone(), load(ref_dir, rel, "reference", &canon, &mut digests)?)),
        });
    }
    pairs.sort_by(|a, b| a.key.cmp(&b.key));
    digests.sort_by(|a, b| (&a.side, &a.path).cmp(&(&b.side, &b.path)));
    let mut report = evaluate_pairs(pairs, options, pairing.policy)?;
    report.inputs = digests;
    Ok(report)
}

fn vector(values: &[Scores], f: fn(&Scores) -> super::Rational) -> String {
    let items: Vec<String> = values.iter().map(|s| format_decimal(f(s), 2)).collect();
    format!("[{}]", items.join(", "))
}

/// Tables per level: one row per model, then one row per element class
/// with the per-model vector and its mean.
pub fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::from("# Evaluation report\n\n");
    let _ = writeln!(out, "Empty-set conventions: {}.\n", report.conventions);
    let _ = writeln!(
        out,
        "Connectivity elements: {}. Pairing: {}.\n",
        if report.connectivity { "scored" } else { "not scored" },
        match report.policy {
            PairingPolicy::Strict => "strict",
            PairingPolicy::MissingAsEmpty => "missing models scored as empty",
        }
    );
    for (level, avg) in &report.averages {
        let models: Vec<&ModelReport> = report.models.iter().filter(|m| m.level == *level).collect();
        let _ = writeln!(out, "## {} models\n", level.as_str());
        out.push_str("| model | P | R | F1 | tp | fp | fn |\n|---|---|---|---|---|---|---|\n");
        for m in &models {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} |",
                m.key,
                format_decimal(m.scores.precision, 2),
                format_decimal(m.scores.recall, 2),
                format_decimal(m.scores.f1, 2),
                m.counts.tp,
                m.counts.fp,
                m.counts.fn_
            );
        }
        let _ = writeln!(
            out,
            "| avg | {} | {} | {} | | | |\n",
            format_decimal(avg.precision, 2),
            format_decimal(avg.recall, 2),
            format_decimal(avg.f1, 2)
        );
        if let Some(p) = report.pooled.get(level) {
            let _ = writeln!(
                out,
                "Pooled over all elements: P = {}, R = {}, F1 = {} (tp {}, fp {}, fn {}).\n",
                format_decimal(p.scores.precision, 2),
                format_decimal(p.scores.recall, 2),
                format_decimal(p.scores.f1, 2),
                p.counts.tp,
                p.counts.fp,
                p.counts.fn_
            );
        }
        let _ = writeln!(out, "### {} element classes\n", level.as_str());
        out.push_str("| class | P | R | F1 |\n|---|---|---|---|\n");
        for (class, avg) in &report.class_averages[level] {
            let v: Vec<Scores> = models.iter().filter_map(|m| m.classes.get(class).map(|c| c.scores)).collect();
            let _ = writeln!(
                out,
                "| {class} | {} avg = {} | {} avg = {} | {} avg = {} |",
                vector(&v, |s| s.precision),
                format_decimal(avg.precision, 2),
                vector(&v, |s| s.recall),
                format_decimal(avg.recall, 2),
                vector(&v, |s| s.f1),
                format_decimal(avg.f1, 2)
            );
        }
        out.push('\n');
    }
    if !report.inputs.is_empty() {
        out.push_str("## Inputs\n\n| side | path | sha256 |\n|---|---|---|\n");
        for d in &report.inputs {
            let _ = writeln!(out, "| {} | {} | `{}` |", d.side, d.path, d.sha256);
        }
    }
    out
}
