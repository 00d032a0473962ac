//! The attribution-factor catalog: factor phrases grouped into broad
//! categories.
//!
//! Catalog files are tab-separated:
//!
//! ```text
//! CATEGORY<TAB>id<TAB>display name
//! FACTOR<TAB>id<TAB>phrase<TAB>category_id
//! ```
//!
//! Categories must be declared before their members and every factor
//! belongs to exactly one category. Blank lines and `#` comments are ignored.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use crate::corpus::tokenize;
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};

/// The bundled catalog file.
pub const BUNDLED_CATALOG: &str = include_str!("../data/catalog.tsv");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Factor {
    pub id: String,
    pub phrase: Vec<String>,
    pub category: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BroadCategory {
    pub id: String,
    pub display_name: String,
    pub member_factor_ids: BTreeSet<String>,
}

#[derive(Clone, Debug)]
pub struct FactorCatalog {
    categories: Vec<BroadCategory>,
    factors: Vec<Factor>,
    category_index: HashMap<String, usize>,
    factor_index: HashMap<String, usize>,
}

impl FactorCatalog {
    pub fn parse(content: &str) -> Result<Self> {
        let mut catalog = FactorCatalog {
            categories: Vec::new(),
            factors: Vec::new(),
            category_index: HashMap::new(),
            factor_index: HashMap::new(),
        };
        for (i, raw) in content.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Catalog { line, message };
            let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
            match fields[..] {
                ["CATEGORY", id, name] => {
                    if catalog.category_index.contains_key(id) {
                        return Err(err(format!("category {id} declared twice")));
                    }
                    catalog
                        .category_index
                        .insert(id.to_owned(), catalog.categories.len());
                    catalog.categories.push(BroadCategory {
                        id: id.to_owned(),
                        display_name: name.to_owned(),
                        member_factor_ids: BTreeSet::new(),
                    });
                }
                ["FACTOR", id, phrase, category] => {
                    let Some(&ci) = catalog.category_index.get(category) else {
                        return Err(err(format!(
                            "factor {id} assigned to unknown category {category}"
                        )));
                    };
                    if let Some(&fi) = catalog.factor_index.get(id) {
                        let previous = &catalog.factors[fi].category;
                        return Err(err(if previous == category {
                            format!("factor {id} declared twice")
                        } else {
                            format!(
                                "factor {id} assigned to multiple categories ({previous}, {category})"
                            )
                        }));
                    }
                    let phrase = tokenize(phrase);
                    if phrase.is_empty() {
                        return Err(err(format!("factor {id} has an empty phrase")));
                    }
                    catalog
                        .factor_index
                        .insert(id.to_owned(), catalog.factors.len());
                    catalog.categories[ci]
                        .member_factor_ids
                        .insert(id.to_owned());
                    catalog.factors.push(Factor {
                        id: id.to_owned(),
                        phrase,
                        category: category.to_owned(),
                    });
                }
                _ => return Err(err(format!("unrecognized row {raw:?}"))),
            }
        }
        Ok(catalog)
    }

    /// The catalog shipped with the crate: 20 broad categories.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CATALOG).expect("bundled catalog is well formed")
    }

    pub fn categories(&self) -> &[BroadCategory] {
        &self.categories
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, id: &str) -> Option<&Factor> {
        self.factor_index.get(id).map(|&i| &self.factors[i])
    }

    pub fn category(&self, id: &str) -> Option<&BroadCategory> {
        self.category_index.get(id).map(|&i| &self.categories[i])
    }

    pub fn category_of(&self, factor_id: &str) -> Option<&str> {
        self.factor(factor_id).map(|f| f.category.as_str())
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<FactorCatalog> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FactorCatalog::parse(&content)
}

/// Unweighted mean of the in-vocabulary phrase token vectors. Stopwords are
/// kept inside factor phrases.
pub fn factor_embedding(factor: &Factor, store: &EmbeddingStore) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; store.dim()];
    let mut n = 0usize;
    for v in factor.phrase.iter().filter_map(|t| store.get(t)) {
        for (acc, x) in sum.iter_mut().zip(v) {
            *acc += x;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::FactorOutOfVocabulary(factor.id.clone()));
    }
    sum.iter_mut().for_each(|x| *x /= n as f64);
    Ok(sum)
}
