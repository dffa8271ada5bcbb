//! Set-based comparison of generated and reference models.
//!
//! All arithmetic is exact; values are only rounded when a report is
//! formatted.

mod job;

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::puml::{CanonicalElementSet, ElementClass, Level};

pub use job::{
    evaluate_job, evaluate_pairs, render_markdown, ClassReport, EvalOptions, EvalReport, InputDigest, ModelPair,
    EvalError, ModelReport, Pairing, PairingPolicy, CONVENTIONS,
};

pub type Rational = Ratio<u64>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Precision, recall and F1 as exact fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scores {
    pub precision: Rational,
    pub recall: Rational,
    pub f1: Rational,
}

impl Scores {
    pub fn perfect() -> Self {
        let one = Rational::from_integer(1);
        Scores {
            precision: one,
            recall: one,
            f1: one,
        }
    }

    /// F1 from given precision and recall; 0 when both are 0.
    pub fn from_pr(precision: Rational, recall: Rational) -> Self {
        let sum = precision + recall;
        let f1 = if sum == Rational::from_integer(0) {
            sum
        } else {
            Rational::from_integer(2) * precision * recall / sum
        };
        Scores { precision, recall, f1 }
    }
}

/// Serializes as `{"exact": "n/d", "value": f64}` per metric.
struct Exact(Rational);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Exact", 2)?;
        st.serialize_field("exact", &format!("{}/{}", self.0.numer(), self.0.denom()))?;
        st.serialize_field("value", &((to_f64(self.0) * 1e6).round() / 1e6))?;
        st.end()
    }
}

impl Serialize for Scores {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Scores", 3)?;
        st.serialize_field("precision", &Exact(self.precision))?;
        st.serialize_field("recall", &Exact(self.recall))?;
        st.serialize_field("f1", &Exact(self.f1))?;
        st.end()
    }
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Rounds half up to `places` decimals, e.g. `0.8667` -> `"0.87"`.
pub fn format_decimal(r: Rational, places: u32) -> String {
    let scale = 10u64.pow(places);
    let (n, d) = (*r.numer() as u128, *r.denom() as u128);
    let scaled = (2 * n * scale as u128 + d) / (2 * d);
    let int = scaled / scale as u128;
    let frac = scaled % scale as u128;
    format!("{int}.{frac:0width$}", width = places as usize)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot compare a {generated} model with a {reference} model")]
pub struct LevelMismatch {
    pub generated: &'static str,
    pub reference: &'static str,
}

fn check_levels(generated: &CanonicalElementSet, reference: &CanonicalElementSet) -> Result<(), LevelMismatch> {
    if generated.level != reference.level {
        return Err(LevelMismatch {
            generated: generated.level.as_str(),
            reference: reference.level.as_str(),
        });
    }
    Ok(())
}

pub fn compare(generated: &CanonicalElementSet, reference: &CanonicalElementSet) -> Result<Counts, LevelMismatch> {
    check_levels(generated, reference)?;
    let tp = generated.elements.intersection(&reference.elements).count() as u64;
    Ok(Counts {
        tp,
        fp: generated.len() as u64 - tp,
        fn_: reference.len() as u64 - tp,
    })
}

/// Counts per element class, for every class present on either side.
pub fn compare_by_class(
    generated: &CanonicalElementSet,
    reference: &CanonicalElementSet,
) -> Result<BTreeMap<ElementClass, Counts>, LevelMismatch> {
    check_levels(generated, reference)?;
    let mut out: BTreeMap<ElementClass, Counts> = BTreeMap::new();
    for e in &generated.elements {
        let c = out.entry(e.class()).or_default();
        if reference.elements.contains(e) {
            c.tp += 1;
        } else {
            c.fp += 1;
        }
    }
    for e in reference.elements.difference(&generated.elements) {
        out.entry(e.class()).or_default().fn_ += 1;
    }
    Ok(out)
}

/// P = tp/(tp+fp), R = tp/(tp+fn). Both sets empty scores 1 throughout;
/// an empty side otherwise scores 0 for the undefined ratio.
pub fn score(c: Counts) -> Scores {
    let generated = c.tp + c.fp;
    let reference = c.tp + c.fn_;
    if generated == 0 && reference == 0 {
        return Scores::perfect();
    }
    let ratio = |n: u64, d: u64| if d == 0 { Rational::from_integer(0) } else { Rational::new(n, d) };
    Scores::from_pr(ratio(c.tp, generated), ratio(c.tp, reference))
}

/// Component-wise arithmetic mean. `None` for an empty list.
pub fn macro_average(scores: &[Scores]) -> Option<Scores> {
    if scores.is_empty() {
        return None;
    }
    let n = Rational::from_integer(scores.len() as u64);
    let sum = |f: fn(&Scores) -> Rational| scores.iter().map(f).fold(Rational::from_integer(0), |a, b| a + b) / n;
    Some(Scores {
        precision: sum(|s| s.precision),
        recall: sum(|s| s.recall),
        f1: sum(|s| s.f1),
    })
}

/// Classes scored at each level, in report order.
pub fn scored_classes(level: Level, connectivity: bool) -> Vec<ElementClass> {
    use ElementClass::*;
    match level {
        Level::Atomic => vec![ClassifierName, ClassifierStereotype, MessageType, Callback, ServiceType, ServiceFunction],
        Level::Composed => {
            let mut v = vec![
                ComposedName,
                ComposedStereotype,
                NamespaceName,
                NamespaceStereotype,
                RemappedTopic,
                PartName,
                PartStereotype,
                PartType,
            ];
            if connectivity {
                v.push(Connection);
            }
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puml::CanonicalElement;

    fn r(n: u64, d: u64) -> Rational {
        Rational::new(n, d)
    }

    fn set(level: Level, names: &[&str]) -> CanonicalElementSet {
        let mut s = CanonicalElementSet::empty(level, "m");
        for n in names {
            s.elements.insert(CanonicalElement::new(ElementClass::PartName, [("name", *n)]));
        }
        s
    }

    #[test]
    fn identical_and_subset() {
        let a = set(Level::Composed, &["a", "b", "c", "d", "e", "f", "g"]);
        assert_eq!(compare(&a, &a).unwrap(), Counts { tp: 7, fp: 0, fn_: 0 });
        let gen = set(Level::Composed, &["a", "b", "c", "d", "e"]);
        assert_eq!(compare(&gen, &a).unwrap(), Counts { tp: 5, fp: 0, fn_: 2 });
    }

    #[test]
    fn level_mismatch() {
        assert!(compare(&set(Level::Atomic, &[]), &set(Level::Composed, &[])).is_err());
    }

    #[test]
    fn empty_conventions() {
        assert_eq!(score(Counts::default()), Scores::perfect());
        let s = score(Counts { tp: 0, fp: 0, fn_: 3 });
        assert_eq!((s.precision, s.recall, s.f1), (r(0, 1), r(0, 1), r(0, 1)));
        let s = score(Counts { tp: 0, fp: 2, fn_: 0 });
        assert_eq!((s.precision, s.recall), (r(0, 1), r(0, 1)));
    }

    #[test]
    fn f1_is_harmonic_mean() {
        let s = score(Counts { tp: 3, fp: 1, fn_: 3 });
        assert_eq!(s.precision, r(3, 4));
        assert_eq!(s.recall, r(1, 2));
        assert_eq!(s.f1, r(3, 5));
    }

    #[test]
    fn rounding() {
        assert_eq!(format_decimal(r(13, 15), 2), "0.87");
        assert_eq!(format_decimal(r(1, 1), 2), "1.00");
        assert_eq!(format_decimal(r(1, 200), 2), "0.01");
        assert_eq!(format_decimal(r(0, 1), 2), "0.00");
    }

    #[test]
    fn single_average_is_identity() {
        let s = score(Counts { tp: 2, fp: 1, fn_: 5 });
        assert_eq!(macro_average(&[s]), Some(s));
        assert_eq!(macro_average(&[]), None);
    }
}
