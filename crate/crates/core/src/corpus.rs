//! Comment corpus: ingestion, sentence splitting, tokenization and
//! sentence-level annotation labels.
//!
//! A comment dump is either a JSON array of records or one JSON record per
//! line. Each record carries `id`, `video_id`, `author_id` and `text`.
//! Sentences are the unit of annotation, pruning and classification.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorCatalog;

/// Default minimum share of function words for [`english_heuristic_filter`].
pub const DEFAULT_ENGLISH_MIN_RATIO: f64 = 0.15;

const FUNCTION_WORDS: &str = include_str!("../data/function_words.txt");

/// Identifies a sentence across the pipeline.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceKey {
    pub comment_id: String,
    pub sentence_index: usize,
}

impl SentenceKey {
    pub fn new(comment_id: impl Into<String>, sentence_index: usize) -> Self {
        SentenceKey {
            comment_id: comment_id.into(),
            sentence_index,
        }
    }
}

impl std::fmt::Display for SentenceKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.comment_id, self.sentence_index)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    /// `None` while the sentence is unlabeled. `Some(empty)` marks an explicit
    /// negative; otherwise the set of broad-category ids it was labeled with.
    pub labels: Option<BTreeSet<String>>,
}

impl Sentence {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Sentence {
            index,
            text,
            tokens,
            labels: None,
        }
    }

    pub fn is_annotated(&self) -> bool {
        self.labels.is_some()
    }

    pub fn is_positive(&self) -> bool {
        self.labels.as_ref().is_some_and(|l| !l.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub video_id: String,
    pub author_id: String,
    pub raw_text: String,
    pub sentences: Vec<Sentence>,
}

impl Comment {
    pub fn new(
        id: impl Into<String>,
        video_id: impl Into<String>,
        author_id: impl Into<String>,
        raw_text: impl Into<String>,
    ) -> Self {
        let raw_text = raw_text.into();
        let sentences = sentence_split(&raw_text)
            .into_iter()
            .enumerate()
            .map(|(i, s)| Sentence::new(i, s))
            .collect();
        Comment {
            id: id.into(),
            video_id: video_id.into(),
            author_id: author_id.into(),
            raw_text,
            sentences,
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(String::as_str))
    }

    pub fn sentence_key(&self, index: usize) -> SentenceKey {
        SentenceKey::new(self.id.clone(), index)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_comments: usize,
    pub n_sentences: usize,
    pub n_labeled_positive_sentences: usize,
    /// Number of sentences containing each token.
    pub document_frequency: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn df(&self, token: &str) -> usize {
        self.document_frequency.get(token).copied().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpFormat {
    JsonArray,
    JsonLines,
}

impl DumpFormat {
    /// A dump whose first non-blank character is `[` is a JSON array.
    pub fn detect(content: &str) -> Self {
        match content.trim_start().chars().next() {
            Some('[') => DumpFormat::JsonArray,
            _ => DumpFormat::JsonLines,
        }
    }
}

#[derive(Deserialize)]
struct Record {
    id: String,
    #[serde(default)]
    video_id: String,
    #[serde(default)]
    author_id: String,
    text: String,
}

pub fn ingest(path: impl AsRef<Path>, format: DumpFormat) -> Result<Vec<Comment>> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dump(&content, format)
}

/// Reads a dump, detecting the format from its first character.
pub fn ingest_auto(path: impl AsRef<Path>) -> Result<Vec<Comment>> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dump(&content, DumpFormat::detect(&content))
}

pub fn parse_dump(content: &str, format: DumpFormat) -> Result<Vec<Comment>> {
    let values: Vec<serde_json::Value> = match format {
        _ if content.trim().is_empty() => Vec::new(),
        DumpFormat::JsonArray => serde_json::from_str(content)
            .map_err(|e| Error::InvalidInput(format!("comment dump is not a JSON array: {e}")))?,
        DumpFormat::JsonLines => content
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(index, line)| {
                serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                    index,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?,
    };

    let mut seen = HashSet::new();
    let mut comments = Vec::with_capacity(values.len());
    for (index, value) in values.into_iter().enumerate() {
        let record: Record = serde_json::from_value(value).map_err(|e| Error::MalformedRecord {
            index,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        comments.push(Comment::new(
            record.id,
            record.video_id,
            record.author_id,
            record.text,
        ));
    }
    Ok(comments)
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '\n')
}

/// Splits on `.`, `!`, `?` and newline. Runs of terminators act as one, and
/// blank segments are dropped. Segments are whitespace-trimmed.
pub fn sentence_split(raw_text: &str) -> Vec<String> {
    raw_text
        .split(is_terminator)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn function_words() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| parse_word_list(FUNCTION_WORDS))
}

/// One word per line; blank lines and `#` comments are skipped.
pub(crate) fn parse_word_list(content: &str) -> HashSet<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Share of a comment's tokens found in the function-word list. Comments
/// without tokens score 0.
pub fn function_word_ratio(comment: &Comment) -> f64 {
    let words = function_words();
    let (hits, total) = comment.tokens().fold((0usize, 0usize), |(h, t), tok| {
        (h + usize::from(words.contains(tok)), t + 1)
    });
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Crude English detector: keeps comments whose function-word ratio is at
/// least `min_ratio`.
pub fn english_heuristic_filter(comments: &[Comment], min_ratio: f64) -> Vec<Comment> {
    comments
        .iter()
        .filter(|c| function_word_ratio(c) >= min_ratio)
        .cloned()
        .collect()
}

pub fn compute_stats(comments: &[Comment]) -> CorpusStats {
    let mut stats = CorpusStats {
        n_comments: comments.len(),
        ..CorpusStats::default()
    };
    for sentence in comments.iter().flat_map(|c| &c.sentences) {
        stats.n_sentences += 1;
        if sentence.is_positive() {
            stats.n_labeled_positive_sentences += 1;
        }
        let distinct: BTreeSet<&str> = sentence.tokens.iter().map(String::as_str).collect();
        for token in distinct {
            *stats
                .document_frequency
                .entry(token.to_owned())
                .or_insert(0) += 1;
        }
    }
    stats
}

/// Marker used in label files for an explicitly negative sentence.
pub const NO_ATTRIBUTION: &str = "NONE";

pub fn load_annotations(
    comments: &[Comment],
    path: impl AsRef<Path>,
    catalog: &FactorCatalog,
) -> Result<Vec<Comment>> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(comments, &content, catalog)
}

/// Attaches labels from a tab-separated label file. Rows are
/// `comment_id<TAB>sentence_index<TAB>category_id|NONE`; row numbers in
/// errors are 1-based line numbers.
pub fn parse_annotations(
    comments: &[Comment],
    content: &str,
    catalog: &FactorCatalog,
) -> Result<Vec<Comment>> {
    let mut annotated = comments.to_vec();
    let mut negatives: HashSet<(usize, usize)> = HashSet::new();
    let by_id: HashMap<&str, usize> = comments
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.as_str(), i))
        .collect();

    for (line_no, line) in content.lines().enumerate() {
        let row = line_no + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Annotation { row, message };
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [comment_id, index, category] = fields[..] else {
            return Err(err(format!(
                "expected 3 tab-separated fields, got {}",
                fields.len()
            )));
        };
        let &ci = by_id
            .get(comment_id)
            .ok_or_else(|| err(format!("unknown comment_id {comment_id}")))?;
        let index: usize = index
            .parse()
            .map_err(|_| err(format!("bad sentence_index {index}")))?;
        let comment = &mut annotated[ci];
        let n = comment.sentences.len();
        let sentence = comment.sentences.get_mut(index).ok_or_else(|| {
            err(format!(
                "sentence_index {index} out of range for {comment_id} ({n} sentences)"
            ))
        })?;

        let labels = sentence.labels.get_or_insert_with(BTreeSet::new);
        if category == NO_ATTRIBUTION {
            if !labels.is_empty() {
                return Err(err(format!(
                    "{comment_id}#{index} is marked {NO_ATTRIBUTION} but has labels"
                )));
            }
            negatives.insert((ci, index));
        } else {
            if catalog.category(category).is_none() {
                return Err(err(format!("unknown category_id {category}")));
            }
            if negatives.contains(&(ci, index)) {
                return Err(err(format!(
                    "{comment_id}#{index} is labeled after being marked {NO_ATTRIBUTION}"
                )));
            }
            labels.insert(category.to_owned());
        }
    }

    Ok(annotated)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> FactorCatalog {
        FactorCatalog::bundled()
    }

    #[test]
    fn split_examples() {
        assert_eq!(
            sentence_split("save water. plant trees"),
            ["save water", "plant trees"]
        );
        assert!(sentence_split("").is_empty());
        assert_eq!(
            sentence_split("no rain!!\nno water"),
            ["no rain", "no water"]
        );
        assert!(sentence_split(" ...\n\n?! ").is_empty());
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Save Water"), ["save", "water"]);
        assert_eq!(tokenize("plz make vdo!"), ["plz", "make", "vdo"]);
        assert_eq!(tokenize("9-kids"), ["9", "kids"]);
        assert!(tokenize("  -- ").is_empty());
    }

    #[test]
    fn ingest_both_formats() {
        let lines = r#"{"id":"c1","video_id":"v","author_id":"a","text":"Save water. Plant trees!"}
{"id":"c2","text":"no rain"}
"#;
        let comments = parse_dump(lines, DumpFormat::detect(lines)).unwrap();
        assert_eq!(comments.len(), 2);
        assert_eq!(comments[0].id, "c1");
        assert_eq!(comments[0].sentences.len(), 2);
        assert_eq!(comments[1].author_id, "");

        let array = r#"[{"id":"x","text":"a"},{"id":"y","text":"b"}]"#;
        assert_eq!(DumpFormat::detect(array), DumpFormat::JsonArray);
        let ids: Vec<_> = parse_dump(array, DumpFormat::JsonArray)
            .unwrap()
            .into_iter()
            .map(|c| c.id)
            .collect();
        assert_eq!(ids, ["x", "y"]);

        assert!(parse_dump("", DumpFormat::JsonArray).unwrap().is_empty());
        assert!(parse_dump("\n", DumpFormat::JsonLines).unwrap().is_empty());
    }

    #[test]
    fn ingest_errors() {
        let dup = "{\"id\":\"c1\",\"text\":\"a\"}\n{\"id\":\"c1\",\"text\":\"b\"}";
        let e = parse_dump(dup, DumpFormat::JsonLines).unwrap_err();
        assert_eq!(e.to_string(), "duplicate id: c1");

        let missing = r#"[{"id":"c1","text":"a"},{"id":"c2"}]"#;
        match parse_dump(missing, DumpFormat::JsonArray).unwrap_err() {
            Error::MalformedRecord { index, .. } => assert_eq!(index, 1),
            e => panic!("unexpected {e}"),
        }
        match parse_dump(
            "{\"id\":\"a\",\"text\":\"x\"}\nnot json",
            DumpFormat::JsonLines,
        )
        .unwrap_err()
        {
            Error::MalformedRecord { index, .. } => assert_eq!(index, 1),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn english_filter_thresholds() {
        let comments = vec![
            Comment::new("a", "", "", "the of and"),
            Comment::new("b", "", "", "the water"),
            Comment::new("c", "", "", "bohot buri condition"),
        ];
        assert_eq!(english_heuristic_filter(&comments, 0.0).len(), 3);
        let strict: Vec<_> = english_heuristic_filter(&comments, 1.0)
            .into_iter()
            .map(|c| c.id)
            .collect();
        assert_eq!(strict, ["a"]);
    }

    #[test]
    fn stats_counts_sentence_presence() {
        let c = Comment::new("c", "", "", "water here. water there");
        let s = compute_stats(&[c]);
        assert_eq!(s.df("water"), 2);
        assert_eq!(s.n_sentences, 2);

        let c = Comment::new("d", "", "", "tree tree. tree. sky");
        assert_eq!(compute_stats(&[c]).df("tree"), 2);

        let empty = compute_stats(&[]);
        assert_eq!(empty, CorpusStats::default());
    }

    #[test]
    fn annotations_attach() {
        let comments = vec![Comment::new("c1", "", "", "too many people. no trees")];
        let out = parse_annotations(
            &comments,
            "# header\nc1\t0\toverpopulation\nc1\t0\tdeforestation\nc1\t1\tNONE\n",
            &catalog(),
        )
        .unwrap();
        let labels = out[0].sentences[0].labels.as_ref().unwrap();
        assert_eq!(labels.len(), 2);
        assert!(labels.contains("overpopulation"));
        assert_eq!(out[0].sentences[1].labels, Some(BTreeSet::new()));
        assert_eq!(compute_stats(&out).n_labeled_positive_sentences, 1);
        // the input corpus is untouched
        assert!(comments[0].sentences[0].labels.is_none());
    }

    #[test]
    fn annotation_errors_name_the_row() {
        let comments = vec![Comment::new("c1", "", "", "a. b")];
        let cat = catalog();
        let cases = [
            "c1\t9\toverpopulation",
            "zz\t0\toverpopulation",
            "c1\t0\tnot_a_category",
            "c1\t0",
            "c1\tx\tNONE",
        ];
        for case in cases {
            let text = format!("# comment\n{case}\n");
            match parse_annotations(&comments, &text, &cat).unwrap_err() {
                Error::Annotation { row, .. } => assert_eq!(row, 2, "{case}"),
                e => panic!("unexpected {e}"),
            }
        }
        let conflict = "c1\t0\toverpopulation\nc1\t0\tNONE\n";
        assert!(parse_annotations(&comments, conflict, &cat).is_err());
        let conflict = "c1\t0\tNONE\nc1\t0\toverpopulation\n";
        assert!(parse_annotations(&comments, conflict, &cat).is_err());
    }
}
