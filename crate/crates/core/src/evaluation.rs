//! Detection and resolution metrics, annotator agreement and the category
//! breakdown.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, SentenceKey};
use crate::error::{Error, Result};
use crate::factors::FactorCatalog;

/// Confusion counts. The field `fn_` is the false-negative count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl DetectionOutcome {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Tallies `(predicted, actual)` pairs.
    pub fn tally(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut out = DetectionOutcome::default();
        for (predicted, actual) in pairs {
            match (predicted, actual) {
                (true, true) => out.tp += 1,
                (true, false) => out.fp += 1,
                (false, false) => out.tn += 1,
                (false, true) => out.fn_ += 1,
            }
        }
        out
    }
}

/// `None` marks an undefined metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn detection_metrics(outcome: &DetectionOutcome) -> DetectionMetrics {
    let precision = ratio(outcome.tp, outcome.tp + outcome.fp);
    let recall = ratio(outcome.tp, outcome.tp + outcome.fn_);
    let accuracy = ratio(outcome.tp + outcome.tn, outcome.total());
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    DetectionMetrics {
        precision,
        recall,
        accuracy,
        f1,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionOutcome {
    pub n_evaluated: usize,
    pub n_correct_top1: usize,
    pub n_correct_topk: BTreeMap<usize, usize>,
}

impl ResolutionOutcome {
    pub fn accuracy(&self, k: usize) -> Option<f64> {
        ratio(*self.n_correct_topk.get(&k)?, self.n_evaluated)
    }
}

/// Whether any of the first `k` predicted categories is in `truth`.
pub fn correct_at(ranked: &[String], truth: &BTreeSet<String>, k: usize) -> bool {
    ranked.iter().take(k).any(|c| truth.contains(c))
}

/// Set-membership resolution accuracy at each `k` (1 is always included).
/// `predictions[i]` is a ranked category list for the sentence whose true
/// category set is `truth[i]`.
pub fn resolution_eval(
    predictions: &[Vec<String>],
    truth: &[BTreeSet<String>],
    ks: &[usize],
) -> Result<ResolutionOutcome> {
    if predictions.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} ground-truth sets",
            predictions.len(),
            truth.len()
        )));
    }
    let ks: BTreeSet<usize> = ks.iter().copied().chain([1]).collect();
    if ks.contains(&0) {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut out = ResolutionOutcome {
        n_evaluated: truth.len(),
        n_correct_top1: 0,
        n_correct_topk: ks.iter().map(|&k| (k, 0)).collect(),
    };
    for (i, (ranked, t)) in predictions.iter().zip(truth).enumerate() {
        if t.is_empty() {
            return Err(Error::InvalidInput(format!(
                "sentence {i} has no ground-truth categories"
            )));
        }
        for (&k, n) in out.n_correct_topk.iter_mut() {
            if correct_at(ranked, t, k) {
                *n += 1;
            }
        }
    }
    out.n_correct_top1 = out.n_correct_topk[&1];
    Ok(out)
}

/// Fleiss' kappa for an items x categories count table. `Ok(None)` when
/// expected agreement is 1 and kappa is undefined.
pub fn fleiss_kappa(table: &[Vec<usize>]) -> Result<Option<f64>> {
    let first = table
        .first()
        .ok_or_else(|| Error::InvalidInput("no rated items".into()))?;
    let n_cat = first.len();
    if n_cat < 2 {
        return Err(Error::InvalidInput(
            "at least two categories are required".into(),
        ));
    }
    let raters: usize = first.iter().sum();
    if raters < 2 {
        return Err(Error::InvalidInput(
            "at least two raters per item are required".into(),
        ));
    }
    for (i, row) in table.iter().enumerate() {
        if row.len() != n_cat {
            return Err(Error::InvalidInput(format!(
                "item {i} has {} categories, expected {n_cat}",
                row.len()
            )));
        }
        let r: usize = row.iter().sum();
        if r != raters {
            return Err(Error::InvalidInput(format!(
                "item {i} has {r} ratings, expected {raters}"
            )));
        }
    }
    let n_items = table.len() as f64;
    let r = raters as f64;
    let p_bar = table
        .iter()
        .map(|row| {
            let sq: usize = row.iter().map(|&n| n * n).sum();
            (sq - raters) as f64 / (r * (r - 1.0))
        })
        .sum::<f64>()
        / n_items;
    let p_e: f64 = (0..n_cat)
        .map(|j| {
            let p = table.iter().map(|row| row[j]).sum::<usize>() as f64 / (n_items * r);
            p * p
        })
        .sum();
    if p_e >= 1.0 {
        return Ok(None);
    }
    Ok(Some((p_bar - p_e) / (1.0 - p_e)))
}

/// Turns per-item rater labels into a count table. Categories are sorted.
pub fn ratings_to_table(ratings: &[Vec<String>]) -> (Vec<String>, Vec<Vec<usize>>) {
    let categories: Vec<String> = ratings
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let table = ratings
        .iter()
        .map(|item| {
            let mut row = vec![0; categories.len()];
            for label in item {
                row[index[label.as_str()]] += 1;
            }
            row
        })
        .collect();
    (categories, table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: String,
    pub count: usize,
    /// Share of all positive labels; `None` when there are none.
    pub share: Option<f64>,
}

/// Positive sentence counts per category, in catalog order. A sentence
/// with several labels counts once for each.
pub fn category_breakdown(comments: &[Comment], catalog: &FactorCatalog) -> Vec<CategoryCount> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in comments.iter().flat_map(|c| &c.sentences) {
        for label in s.labels.iter().flatten() {
            *counts.entry(label.as_str()).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    catalog
        .categories()
        .iter()
        .map(|c| {
            let count = counts.get(c.id.as_str()).copied().unwrap_or(0);
            CategoryCount {
                category: c.id.clone(),
                count,
                share: ratio(count, total),
            }
        })
        .collect()
}

pub fn write_breakdown(rows: &[CategoryCount], mut out: impl Write) -> std::io::Result<()> {
    for r in rows {
        writeln!(out, "{}\t{}\t{}", r.category, r.count, fmt_metric(r.share))?;
    }
    Ok(())
}

/// One evaluated sentence: its score, its predicted category ranking and
/// its true categories (empty for an explicit negative).
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSentence {
    pub key: SentenceKey,
    pub max_score: f64,
    pub ranked_categories: Vec<String>,
    pub truth: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionColumn {
    pub k: usize,
    /// Joint detection and resolution counts: a true positive must be
    /// detected and resolved correctly at `k`. A detected sentence that is
    /// not such a hit is a false positive; a positive sentence that is not
    /// a hit is a false negative, so one sentence can be both.
    pub joint: DetectionOutcome,
    pub metrics: DetectionMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub threshold: f64,
    pub n_sentences: usize,
    pub detection: DetectionOutcome,
    pub detection_metrics: DetectionMetrics,
    pub resolution: ResolutionOutcome,
    pub resolution_columns: Vec<ResolutionColumn>,
}

/// Detection over every sentence; resolution (`ks`, plus 1) over the
/// positive ones.
pub fn evaluate(
    sentences: &[ScoredSentence],
    threshold: f64,
    ks: &[usize],
) -> Result<EvaluationReport> {
    let detected = |s: &ScoredSentence| s.max_score >= threshold;
    let detection =
        DetectionOutcome::tally(sentences.iter().map(|s| (detected(s), !s.truth.is_empty())));

    let positives: Vec<&ScoredSentence> =
        sentences.iter().filter(|s| !s.truth.is_empty()).collect();
    let predictions: Vec<Vec<String>> = positives
        .iter()
        .map(|s| s.ranked_categories.clone())
        .collect();
    let truth: Vec<BTreeSet<String>> = positives.iter().map(|s| s.truth.clone()).collect();
    let resolution = resolution_eval(&predictions, &truth, ks)?;

    let resolution_columns = resolution
        .n_correct_topk
        .keys()
        .map(|&k| {
            let mut joint = DetectionOutcome::default();
            for s in sentences {
                let positive = !s.truth.is_empty();
                let hit = positive && detected(s) && correct_at(&s.ranked_categories, &s.truth, k);
                if hit {
                    joint.tp += 1;
                } else {
                    if detected(s) {
                        joint.fp += 1;
                    }
                    if positive {
                        joint.fn_ += 1;
                    }
                }
                if !positive && !detected(s) {
                    joint.tn += 1;
                }
            }
            let mut metrics = detection_metrics(&joint);
            metrics.accuracy = resolution.accuracy(k);
            ResolutionColumn { k, joint, metrics }
        })
        .collect();

    Ok(EvaluationReport {
        threshold,
        n_sentences: sentences.len(),
        detection,
        detection_metrics: detection_metrics(&detection),
        resolution,
        resolution_columns,
    })
}

type MetricGetter = fn(&DetectionMetrics) -> Option<f64>;

pub fn fmt_metric(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_owned(), |v| format!("{v:.6}"))
}

impl EvaluationReport {
    fn columns(&self) -> Vec<(String, DetectionMetrics)> {
        let mut cols = vec![("detection".to_owned(), self.detection_metrics)];
        for c in &self.resolution_columns {
            let name = if c.k == 1 {
                "resolution".to_owned()
            } else {
                format!("resolution_top{}", c.k)
            };
            cols.push((name, c.metrics));
        }
        cols
    }

    /// Rows Precision, Recall, Accuracy, F1; one column per task.
    pub fn write_table(&self, mut out: impl Write) -> std::io::Result<()> {
        let cols = self.columns();
        let headers: Vec<String> = cols
            .iter()
            .map(|(name, _)| match name.strip_prefix("resolution_top") {
                Some(k) => format!("Resolution + top {k}"),
                None if name == "detection" => "Detection".to_owned(),
                None => "Resolution".to_owned(),
            })
            .collect();
        let rows: [(&str, MetricGetter); 4] = [
            ("Precision", |m| m.precision),
            ("Recall", |m| m.recall),
            ("Accuracy", |m| m.accuracy),
            ("F1", |m| m.f1),
        ];
        let pct = |x: Option<f64>| {
            x.map_or_else(|| "undefined".to_owned(), |v| format!("{:.2}", 100.0 * v))
        };
        let widths: Vec<usize> = headers.iter().map(|h| h.len().max(9)).collect();
        write!(out, "{:<10}", "")?;
        for (h, w) in headers.iter().zip(&widths) {
            write!(out, "  {h:>w$}")?;
        }
        writeln!(out)?;
        for (label, get) in rows {
            write!(out, "{label:<10}")?;
            for ((_, m), w) in cols.iter().zip(&widths) {
                write!(out, "  {:>w$}", pct(get(m)))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// `column.metric<TAB>value` lines plus raw counts.
    pub fn write_kv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "threshold\t{:.9}", self.threshold)?;
        writeln!(out, "n_sentences\t{}", self.n_sentences)?;
        writeln!(
            out,
            "n_resolution_evaluated\t{}",
            self.resolution.n_evaluated
        )?;
        let d = &self.detection;
        writeln!(
            out,
            "detection.tp\t{}\ndetection.fp\t{}\ndetection.tn\t{}\ndetection.fn\t{}",
            d.tp, d.fp, d.tn, d.fn_
        )?;
        for (name, m) in self.columns() {
            writeln!(out, "{name}.precision\t{}", fmt_metric(m.precision))?;
            writeln!(out, "{name}.recall\t{}", fmt_metric(m.recall))?;
            writeln!(out, "{name}.accuracy\t{}", fmt_metric(m.accuracy))?;
            writeln!(out, "{name}.f1\t{}", fmt_metric(m.f1))?;
        }
        Ok(())
    }
}
