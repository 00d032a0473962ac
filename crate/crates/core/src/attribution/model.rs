use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorCatalog;

use super::{pair_features, sigmoid, AttentionWeighting, TrainingConfig};

/// Where a trained model came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub training: Option<TrainingConfig>,
    /// Input name to sha-256 hex digest.
    pub data_hashes: BTreeMap<String, String>,
    pub selected_epoch: Option<usize>,
    pub selection_f1: Option<f64>,
}

/// `A(d, f) = sigmoid(W . [E(d) : E(f)] + B)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionModel {
    pub dim: usize,
    /// Length `2 * dim`: the `E(d)` half followed by the `E(f)` half.
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Set by threshold tuning; required by [`AttributionModel::predict`].
    pub detection_threshold: Option<f64>,
    #[serde(default)]
    pub attention: AttentionWeighting,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub detected: bool,
    /// Every catalog factor, highest score first, ties by factor id.
    pub ranked: Vec<(String, f64)>,
}

impl Prediction {
    pub fn top_factor(&self) -> Option<&str> {
        self.ranked.first().map(|(id, _)| id.as_str())
    }

    /// Categories in order of their best-ranked factor, each listed once with
    /// that factor's score.
    pub fn ranked_categories(&self, catalog: &FactorCatalog) -> Vec<(String, f64)> {
        rank_categories(&self.ranked, catalog)
    }
}

pub fn rank_factors(mut scores: Vec<(String, f64)>) -> Vec<(String, f64)> {
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scores
}

pub fn rank_categories(ranked: &[(String, f64)], catalog: &FactorCatalog) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for (fid, score) in ranked {
        if let Some(cat) = catalog.category_of(fid) {
            if !out.iter().any(|(c, _)| c == cat) {
                out.push((cat.to_owned(), *score));
            }
        }
    }
    out
}

impl AttributionModel {
    pub fn zeros(dim: usize) -> Self {
        AttributionModel {
            dim,
            weights: vec![0.0; 2 * dim],
            bias: 0.0,
            detection_threshold: None,
            attention: AttentionWeighting::Cosine,
            provenance: Provenance::default(),
        }
    }

    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() || !weights.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "weight vector length must be 2 * dim, got {}",
                weights.len()
            )));
        }
        Ok(AttributionModel {
            dim: weights.len() / 2,
            weights,
            bias,
            ..Self::zeros(0)
        })
    }

    /// `W . x + B` for a pair representation `x`.
    pub fn logit(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: features.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias)
    }

    /// Attribution probability for one sentence/factor pair. Dropout is
    /// never applied here.
    pub fn score(&self, sentence_vectors: &[Vec<f64>], factor_rep: &[f64]) -> Result<f64> {
        if factor_rep.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: factor_rep.len(),
            });
        }
        let x = pair_features(sentence_vectors, factor_rep, self.attention)?;
        Ok(sigmoid(self.logit(&x)?))
    }

    /// Scores every catalog factor for one sentence, ranked.
    pub fn rank_factors(
        &self,
        sentence_vectors: &[Vec<f64>],
        catalog: &FactorCatalog,
        factor_reps: &BTreeMap<String, Vec<f64>>,
    ) -> Result<Vec<(String, f64)>> {
        let scores = catalog
            .factors()
            .iter()
            .map(|f| {
                let rep = factor_reps.get(&f.id).ok_or_else(|| {
                    Error::InvalidInput(format!("no representation for factor {}", f.id))
                })?;
                Ok((f.id.clone(), self.score(sentence_vectors, rep)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(rank_factors(scores))
    }

    pub fn predict(
        &self,
        sentence_vectors: &[Vec<f64>],
        catalog: &FactorCatalog,
        factor_reps: &BTreeMap<String, Vec<f64>>,
    ) -> Result<Prediction> {
        let threshold = self
            .detection_threshold
            .ok_or_else(|| Error::InvalidInput("model has no tuned detection threshold".into()))?;
        let ranked = self.rank_factors(sentence_vectors, catalog, factor_reps)?;
        let detected = ranked.first().is_some_and(|(_, s)| *s >= threshold);
        Ok(Prediction { detected, ranked })
    }

    /// Writes `manifest.json` and `weights.txt` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = ModelManifest {
            dim: self.dim,
            detection_threshold: self.detection_threshold,
            attention: self.attention,
            provenance: self.provenance.clone(),
        };
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;

        let mut text = String::from("W");
        for w in &self.weights {
            write!(text, " {w:e}").expect("string write");
        }
        writeln!(text, "\nB {:e}", self.bias).expect("string write");
        let path = dir.join("weights.txt");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: ModelManifest = serde_json::from_str(&text)?;

        let path = dir.join("weights.txt");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let bad = |m: String| Error::InvalidInput(format!("{}: {m}", path.display()));
        let mut weights = None;
        let mut bias = None;
        for line in text.lines() {
            let mut fields = line.split_whitespace();
            let values = |fields: std::str::SplitWhitespace| {
                fields
                    .map(|x| {
                        x.parse::<f64>()
                            .map_err(|_| bad(format!("bad number {x:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            };
            match fields.next() {
                Some("W") => weights = Some(values(fields)?),
                Some("B") => bias = values(fields)?.first().copied(),
                Some(other) => return Err(bad(format!("unexpected row {other:?}"))),
                None => {}
            }
        }
        let weights = weights.ok_or_else(|| bad("missing W row".into()))?;
        let bias = bias.ok_or_else(|| bad("missing B row".into()))?;
        if weights.len() != 2 * manifest.dim {
            return Err(Error::DimensionMismatch {
                expected: 2 * manifest.dim,
                actual: weights.len(),
            });
        }
        Ok(AttributionModel {
            dim: manifest.dim,
            weights,
            bias,
            detection_threshold: manifest.detection_threshold,
            attention: manifest.attention,
            provenance: manifest.provenance,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    dim: usize,
    detection_threshold: Option<f64>,
    attention: AttentionWeighting,
    provenance: Provenance,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> FactorCatalog {
        FactorCatalog::parse(
            "CATEGORY\tx\tX\nCATEGORY\ty\tY\nFACTOR\ta\tp\tx\nFACTOR\tb\tq\ty\nFACTOR\tc\tr\tx\n",
        )
        .unwrap()
    }

    #[test]
    fn score_examples() {
        let zero = AttributionModel::zeros(2);
        assert_eq!(zero.score(&[vec![3.0, -1.0]], &[0.2, 0.9]).unwrap(), 0.5);

        // alpha = 1, so E(d) = (2, 0) and the logit is 2
        let m = AttributionModel::new(vec![1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        let s = m.score(&[vec![2.0, 0.0]], &[2.0, 0.0]).unwrap();
        assert!((s - 0.880_797_077_977_882_3).abs() < 1e-12);

        let mut big = AttributionModel::zeros(2);
        big.bias = 50.0;
        assert!(big.score(&[vec![1.0, 0.0]], &[1.0, 0.0]).unwrap() > 1.0 - 1e-12);
        assert!(m.score(&[vec![1.0, 0.0, 0.0]], &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn predict_requires_threshold_and_ranks() {
        let cat = catalog();
        let mut m = AttributionModel::zeros(2);
        let reps: BTreeMap<_, _> = [
            ("a".to_string(), vec![1.0, 0.0]),
            ("b".to_string(), vec![1.0, 0.0]),
            ("c".to_string(), vec![0.0, 1.0]),
        ]
        .into_iter()
        .collect();
        assert!(m.predict(&[vec![1.0, 0.0]], &cat, &reps).is_err());

        m.detection_threshold = Some(0.9);
        m.weights = vec![0.0, 0.0, 0.0, 1.0];
        let p = m.predict(&[vec![1.0, 0.0]], &cat, &reps).unwrap();
        assert!(!p.detected);
        // c scores highest; a and b tie and are ordered by id
        let ids: Vec<_> = p.ranked.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert!(p.ranked.windows(2).all(|w| w[0].1 >= w[1].1));
        let cats: Vec<_> = p.ranked_categories(&cat).into_iter().map(|c| c.0).collect();
        assert_eq!(cats, ["x", "y"]);

        m.detection_threshold = Some(0.5);
        assert!(m.predict(&[vec![1.0, 0.0]], &cat, &reps).unwrap().detected);
    }

    #[test]
    fn save_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut m =
            AttributionModel::new(vec![0.1, -1.0 / 3.0, 1e-300, 7.25], -0.123456789).unwrap();
        m.detection_threshold = Some(2.0 / 3.0);
        m.provenance
            .data_hashes
            .insert("corpus".into(), "abc".into());
        m.save(dir.path()).unwrap();
        assert_eq!(AttributionModel::load(dir.path()).unwrap(), m);
    }
}
