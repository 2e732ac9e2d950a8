//! Corpus ingestion: JSONL documents carved into named bags of sparse counts,
//! vocabulary pruning, and TF-IDF weights.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse per-bag counts: (token index, count), sorted by token index.
pub type SparseCounts = Vec<(u32, u32)>;

#[derive(Debug, Clone)]
pub struct Vocabulary {
    pub bag_name: String,
    /// Token strings in index order (descending total frequency, ties lexicographic).
    pub tokens: Vec<String>,
    pub token_index: HashMap<String, usize>,
    pub doc_freq: Vec<u32>,
    pub total_freq: Vec<u64>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn from_tokens(bag_name: &str, tokens: Vec<String>) -> Vocabulary {
        let token_index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let n = tokens.len();
        Vocabulary {
            bag_name: bag_name.to_string(),
            tokens,
            token_index,
            doc_freq: vec![0; n],
            total_freq: vec![0; n],
        }
    }

    /// Recount doc/total frequencies from the given documents (bag `bag_idx`).
    fn recount(&mut self, documents: &[Document], bag_idx: usize) {
        self.doc_freq = vec![0; self.tokens.len()];
        self.total_freq = vec![0; self.tokens.len()];
        for doc in documents {
            for &(j, c) in &doc.bags[bag_idx] {
                self.doc_freq[j as usize] += 1;
                self.total_freq[j as usize] += c as u64;
            }
        }
    }

    /// Write as a vocabulary file: `#J=<count>` header, then one token per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut out = format!("#J={}\n", self.tokens.len());
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        f.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path, bag_name: &str) -> Result<Vocabulary> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty vocabulary file".into(),
        })?;
        let j: usize = header
            .strip_prefix("#J=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("expected #J=<count> header, got {header:?}"),
            })?;
        let tokens: Vec<String> = lines.map(|l| l.to_string()).collect();
        if tokens.len() != j {
            return Err(Error::Parse {
                line: tokens.len() + 1,
                msg: format!("header says J={j} but file has {} tokens", tokens.len()),
            });
        }
        Ok(Vocabulary::from_tokens(bag_name, tokens))
    }
}

#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    /// Parallel to the corpus bag order.
    pub bags: Vec<SparseCounts>,
    pub label: Option<String>,
}

impl Document {
    /// Total word count L over all bags.
    pub fn total_count(&self) -> u64 {
        self.bags
            .iter()
            .flat_map(|b| b.iter())
            .map(|&(_, c)| c as u64)
            .sum()
    }
}

/// A document as it appears on disk, token strings not yet indexed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub bags: BTreeMap<String, BTreeMap<String, i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl RawDocument {
    pub fn parse(line: &str, line_no: usize) -> Result<RawDocument> {
        let raw: RawDocument = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        for (bag, counts) in &raw.bags {
            for (tok, &c) in counts {
                if c <= 0 {
                    return Err(Error::Validation(format!(
                        "document {:?}, bag {bag:?}, token {tok:?}: count {c} must be positive",
                        raw.id
                    )));
                }
                if c > u32::MAX as i64 {
                    return Err(Error::Validation(format!(
                        "document {:?}, bag {bag:?}, token {tok:?}: count {c} too large",
                        raw.id
                    )));
                }
            }
        }
        Ok(raw)
    }
}

#[derive(Debug, Clone)]
pub struct PruneConfig {
    pub min_total: u64,
    pub min_docs: u32,
    pub stopwords: HashSet<String>,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig { min_total: 4, min_docs: 3, stopwords: HashSet::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub bag_names: Vec<String>,
    pub vocabularies: Vec<Vocabulary>,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn n_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn bag_index(&self, name: &str) -> Option<usize> {
        self.bag_names.iter().position(|b| b == name)
    }

    /// Load a training corpus: vocabularies are built from the data itself,
    /// pruned per `prune`; document counts are restricted to retained tokens.
    pub fn load(path: &Path, bag_names: &[String], prune: &PruneConfig) -> Result<Corpus> {
        let raw = read_raw_documents(path)?;
        Corpus::from_raw(&raw, bag_names, prune)
    }

    pub fn from_raw(
        raw: &[RawDocument],
        bag_names: &[String],
        prune: &PruneConfig,
    ) -> Result<Corpus> {
        if prune.min_total < 1 || prune.min_docs < 1 {
            return Err(Error::Validation(
                "min_total and min_docs must be at least 1".into(),
            ));
        }
        check_bag_names(raw, bag_names)?;
        let vocabularies: Vec<Vocabulary> = bag_names
            .iter()
            .map(|bag| build_vocabulary(raw, bag, prune))
            .collect::<Result<_>>()?;
        let mut corpus = index_documents(raw, bag_names, &vocabularies)?;
        for (b, vocab) in corpus.vocabularies.iter_mut().enumerate() {
            vocab.recount(&corpus.documents, b);
        }
        Ok(corpus)
    }

    /// Load a corpus against fixed vocabularies (e.g. a trained model's).
    /// Out-of-vocabulary tokens are dropped with a warning on stderr;
    /// doc/total frequencies are recounted from the loaded documents.
    pub fn load_with_vocabularies(path: &Path, vocabs: Vec<Vocabulary>) -> Result<Corpus> {
        let raw = read_raw_documents(path)?;
        Corpus::from_raw_with_vocabularies(&raw, vocabs)
    }

    pub fn from_raw_with_vocabularies(
        raw: &[RawDocument],
        vocabs: Vec<Vocabulary>,
    ) -> Result<Corpus> {
        let bag_names: Vec<String> = vocabs.iter().map(|v| v.bag_name.clone()).collect();
        check_bag_names(raw, &bag_names)?;
        let mut corpus = index_documents(raw, &bag_names, &vocabs)?;
        let dropped: u64 = {
            let total_raw: u64 = raw
                .iter()
                .flat_map(|d| d.bags.values())
                .flat_map(|b| b.values())
                .map(|&c| c as u64)
                .sum();
            let total_kept: u64 = corpus.documents.iter().map(|d| d.total_count()).sum();
            total_raw - total_kept
        };
        if dropped > 0 {
            eprintln!("warning: dropped {dropped} out-of-vocabulary word occurrences");
        }
        for (b, vocab) in corpus.vocabularies.iter_mut().enumerate() {
            vocab.recount(&corpus.documents, b);
        }
        Ok(corpus)
    }

    /// Serialize back to JSONL with original token strings (retained tokens only).
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for doc in &self.documents {
            let raw = self.document_to_raw(doc);
            out.push_str(&serde_json::to_string(&raw).expect("document serializes"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn document_to_raw(&self, doc: &Document) -> RawDocument {
        let mut bags = BTreeMap::new();
        for (b, counts) in doc.bags.iter().enumerate() {
            if counts.is_empty() {
                continue;
            }
            let vocab = &self.vocabularies[b];
            let m: BTreeMap<String, i64> = counts
                .iter()
                .map(|&(j, c)| (vocab.tokens[j as usize].clone(), c as i64))
                .collect();
            bags.insert(self.bag_names[b].clone(), m);
        }
        RawDocument { id: doc.id.clone(), bags, label: doc.label.clone() }
    }
}

fn read_raw_documents(path: &Path) -> Result<Vec<RawDocument>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(f);
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(RawDocument::parse(&line, i + 1)?);
    }
    Ok(docs)
}

fn check_bag_names(raw: &[RawDocument], bag_names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for name in bag_names {
        if !seen.insert(name.as_str()) {
            return Err(Error::Schema(format!("duplicate bag name {name:?}")));
        }
    }
    for doc in raw {
        for bag in doc.bags.keys() {
            if !seen.contains(bag.as_str()) {
                return Err(Error::Schema(format!(
                    "document {:?} has bag {bag:?} not among declared bags {bag_names:?}",
                    doc.id
                )));
            }
        }
    }
    Ok(())
}

/// Union of bag names appearing anywhere in the file, sorted.
pub fn discover_bags(path: &Path) -> Result<Vec<String>> {
    let raw = read_raw_documents(path)?;
    let mut names: Vec<String> = raw
        .iter()
        .flat_map(|d| d.bags.keys().cloned())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    names.sort();
    Ok(names)
}

/// Build one bag's pruned vocabulary. A token survives iff its corpus
/// frequency is at least `min_total`, it appears in at least `min_docs`
/// documents, and it is not a stopword. Indices go to the most frequent
/// tokens first, ties broken lexicographically.
pub fn build_vocabulary(
    raw_docs: &[RawDocument],
    bag: &str,
    prune: &PruneConfig,
) -> Result<Vocabulary> {
    let mut total: HashMap<&str, u64> = HashMap::new();
    let mut dfreq: HashMap<&str, u32> = HashMap::new();
    for doc in raw_docs {
        if let Some(counts) = doc.bags.get(bag) {
            for (tok, &c) in counts {
                *total.entry(tok.as_str()).or_insert(0) += c as u64;
                *dfreq.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut retained: Vec<(&str, u64)> = total
        .iter()
        .filter(|(tok, &tf)| {
            tf >= prune.min_total
                && dfreq[**tok] >= prune.min_docs
                && !prune.stopwords.contains(**tok)
        })
        .map(|(&tok, &tf)| (tok, tf))
        .collect();
    if retained.is_empty() {
        return Err(Error::EmptyVocabulary { bag: bag.to_string() });
    }
    retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let tokens: Vec<String> = retained.iter().map(|(t, _)| t.to_string()).collect();
    let mut vocab = Vocabulary::from_tokens(bag, tokens);
    for (i, (tok, tf)) in retained.iter().enumerate() {
        vocab.total_freq[i] = *tf;
        vocab.doc_freq[i] = dfreq[*tok];
    }
    Ok(vocab)
}

fn index_documents(
    raw: &[RawDocument],
    bag_names: &[String],
    vocabs: &[Vocabulary],
) -> Result<Corpus> {
    let mut ids = HashSet::new();
    let mut documents = Vec::with_capacity(raw.len());
    for doc in raw {
        if !ids.insert(doc.id.clone()) {
            return Err(Error::Validation(format!("duplicate document id {:?}", doc.id)));
        }
        let mut bags = Vec::with_capacity(bag_names.len());
        for (b, name) in bag_names.iter().enumerate() {
            let mut counts: SparseCounts = Vec::new();
            if let Some(raw_counts) = doc.bags.get(name) {
                for (tok, &c) in raw_counts {
                    if let Some(&j) = vocabs[b].token_index.get(tok) {
                        counts.push((j as u32, c as u32));
                    }
                }
            }
            counts.sort_unstable_by_key(|&(j, _)| j);
            bags.push(counts);
        }
        documents.push(Document { id: doc.id.clone(), bags, label: doc.label.clone() });
    }
    Ok(Corpus {
        bag_names: bag_names.to_vec(),
        vocabularies: vocabs.to_vec(),
        documents,
    })
}

/// Per-document sparse TF-IDF weights for one bag:
/// weight(i,j) = count(i,j) * ln(I / doc_freq[j]). No smoothing, no
/// normalization — cosine normalization happens at scoring time.
pub fn tfidf_weights(corpus: &Corpus, bag_idx: usize) -> Vec<Vec<(u32, f64)>> {
    let i_docs = corpus.documents.len() as f64;
    let vocab = &corpus.vocabularies[bag_idx];
    corpus
        .documents
        .iter()
        .map(|doc| {
            doc.bags[bag_idx]
                .iter()
                .map(|&(j, c)| {
                    let idf = (i_docs / vocab.doc_freq[j as usize] as f64).ln();
                    (j, c as f64 * idf)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn no_prune() -> PruneConfig {
        PruneConfig { min_total: 1, min_docs: 1, stopwords: HashSet::new() }
    }

    #[test]
    fn parses_basic_document() {
        let f = write_jsonl(&[r#"{"id":"d1","bags":{"body":{"cat":2,"dog":1}}}"#]);
        let corpus =
            Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap();
        assert_eq!(corpus.documents.len(), 1);
        assert_eq!(corpus.documents[0].id, "d1");
        assert_eq!(corpus.documents[0].total_count(), 3);
    }

    #[test]
    fn rejects_undeclared_bag() {
        let f = write_jsonl(&[r#"{"id":"d1","bags":{"title":{"x":1}}}"#]);
        let err = Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "got {err:?}");
    }

    #[test]
    fn accepts_empty_document() {
        let f = write_jsonl(&[
            r#"{"id":"d1","bags":{"body":{"cat":1}}}"#,
            r#"{"id":"d2","bags":{"body":{}}}"#,
        ]);
        let corpus = Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap();
        assert_eq!(corpus.documents[1].total_count(), 0);
    }

    #[test]
    fn rejects_zero_and_negative_counts() {
        for bad in [r#"{"id":"d","bags":{"body":{"x":0}}}"#, r#"{"id":"d","bags":{"body":{"x":-2}}}"#] {
            let f = write_jsonl(&[bad]);
            let err = Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap_err();
            assert!(matches!(err, Error::Validation(_)), "got {err:?}");
        }
    }

    #[test]
    fn parse_error_reports_line_number() {
        let f = write_jsonl(&[r#"{"id":"d1","bags":{"body":{"x":1}}}"#, "{not json"]);
        let err = Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_ids() {
        let f = write_jsonl(&[
            r#"{"id":"d1","bags":{"body":{"x":1}}}"#,
            r#"{"id":"d1","bags":{"body":{"y":1}}}"#,
        ]);
        let err = Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn pruning_boundary_cases() {
        // "the" is a stopword; "kept" has 4 occurrences in 3 docs (boundary:
        // retained under the 4/3 defaults); "rare" has 10 occurrences in 2
        // docs (pruned by min_docs).
        let f = write_jsonl(&[
            r#"{"id":"a","bags":{"body":{"the":9,"kept":2,"rare":5,"pad1":4}}}"#,
            r#"{"id":"b","bags":{"body":{"the":9,"kept":1,"rare":5,"pad1":4}}}"#,
            r#"{"id":"c","bags":{"body":{"the":9,"kept":1,"pad1":4}}}"#,
        ]);
        let prune = PruneConfig {
            min_total: 4,
            min_docs: 3,
            stopwords: ["the".to_string()].into_iter().collect(),
        };
        let corpus = Corpus::load(f.path(), &["body".to_string()], &prune).unwrap();
        let vocab = &corpus.vocabularies[0];
        assert!(vocab.token_index.contains_key("kept"));
        assert!(vocab.token_index.contains_key("pad1"));
        assert!(!vocab.token_index.contains_key("the"), "stopword must be excluded");
        assert!(!vocab.token_index.contains_key("rare"), "min_docs must prune");
    }

    #[test]
    fn index_order_is_frequency_then_lexicographic() {
        let f = write_jsonl(&[
            r#"{"id":"a","bags":{"body":{"bb":3,"aa":2,"cc":2,"dd":5}}}"#,
        ]);
        let corpus = Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap();
        let vocab = &corpus.vocabularies[0];
        assert_eq!(vocab.tokens, vec!["dd", "bb", "aa", "cc"]);
        // contiguity: token_index inverts tokens exactly
        for (i, t) in vocab.tokens.iter().enumerate() {
            assert_eq!(vocab.token_index[t], i);
        }
    }

    #[test]
    fn pruned_tokens_dropped_from_documents_silently() {
        let f = write_jsonl(&[
            r#"{"id":"a","bags":{"body":{"keep":3,"once":1}}}"#,
            r#"{"id":"b","bags":{"body":{"keep":2}}}"#,
        ]);
        let prune = PruneConfig { min_total: 2, min_docs: 2, stopwords: HashSet::new() };
        let corpus = Corpus::load(f.path(), &["body".to_string()], &prune).unwrap();
        assert_eq!(corpus.documents[0].total_count(), 3);
        assert_eq!(corpus.vocabularies[0].len(), 1);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let f = write_jsonl(&[r#"{"id":"a","bags":{"body":{"x":1}}}"#]);
        let prune = PruneConfig { min_total: 5, min_docs: 1, stopwords: HashSet::new() };
        let err = Corpus::load(f.path(), &["body".to_string()], &prune).unwrap_err();
        assert!(matches!(err, Error::EmptyVocabulary { .. }));
    }

    #[test]
    fn recounted_frequencies_respect_invariants() {
        let f = write_jsonl(&[
            r#"{"id":"a","bags":{"body":{"x":3,"y":1}}}"#,
            r#"{"id":"b","bags":{"body":{"x":2}}}"#,
        ]);
        let corpus = Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap();
        let vocab = &corpus.vocabularies[0];
        for j in 0..vocab.len() {
            assert!(vocab.doc_freq[j] >= 1);
            assert!(vocab.total_freq[j] >= vocab.doc_freq[j] as u64);
        }
        let jx = vocab.token_index["x"];
        assert_eq!(vocab.total_freq[jx], 5);
        assert_eq!(vocab.doc_freq[jx], 2);
    }

    #[test]
    fn tfidf_matches_formula() {
        // 10 docs; "common" in all ten (idf 0), "half" in five.
        let mut lines = Vec::new();
        for i in 0..10 {
            let half = if i < 5 { r#","half":2"# } else { "" };
            lines.push(format!(r#"{{"id":"d{i}","bags":{{"body":{{"common":1{half}}}}}}}"#));
        }
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_jsonl(&refs);
        let corpus = Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap();
        let weights = tfidf_weights(&corpus, 0);
        let vocab = &corpus.vocabularies[0];
        let j_common = vocab.token_index["common"] as u32;
        let j_half = vocab.token_index["half"] as u32;
        let w0: HashMap<u32, f64> = weights[0].iter().cloned().collect();
        assert_eq!(w0[&j_common], 0.0, "token in every document has idf 0");
        let expect = 2.0 * 2.0f64.ln();
        assert!((w0[&j_half] - expect).abs() < 1e-12, "{} vs {expect}", w0[&j_half]);
    }

    #[test]
    fn empty_document_has_empty_weights() {
        let f = write_jsonl(&[
            r#"{"id":"a","bags":{"body":{"x":1}}}"#,
            r#"{"id":"b","bags":{}}"#,
        ]);
        let corpus = Corpus::load(f.path(), &["body".to_string()], &no_prune()).unwrap();
        let weights = tfidf_weights(&corpus, 0);
        assert!(weights[1].is_empty());
    }

    #[test]
    fn round_trip_preserves_retained_counts() {
        let f = write_jsonl(&[
            r#"{"id":"a","bags":{"body":{"x":3,"y":1},"title":{"x":1}},"label":"pos"}"#,
            r#"{"id":"b","bags":{"body":{"x":2,"z":1}}}"#,
        ]);
        let bags = vec!["body".to_string(), "title".to_string()];
        let corpus = Corpus::load(f.path(), &bags, &no_prune()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        corpus.write(out.path()).unwrap();
        let again = Corpus::load(out.path(), &bags, &no_prune()).unwrap();
        assert_eq!(corpus.documents.len(), again.documents.len());
        for (d1, d2) in corpus.documents.iter().zip(&again.documents) {
            assert_eq!(d1.id, d2.id);
            assert_eq!(d1.label, d2.label);
            assert_eq!(d1.bags, d2.bags);
        }
    }

    #[test]
    fn load_with_fixed_vocabulary_drops_oov() {
        let vocab = Vocabulary::from_tokens("body", vec!["x".into(), "y".into()]);
        let f = write_jsonl(&[r#"{"id":"a","bags":{"body":{"x":2,"novel":7}}}"#]);
        let corpus = Corpus::load_with_vocabularies(f.path(), vec![vocab]).unwrap();
        assert_eq!(corpus.documents[0].total_count(), 2);
        assert_eq!(corpus.vocabularies[0].doc_freq, vec![1, 0]);
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let vocab = Vocabulary::from_tokens("body", vec!["dd".into(), "bb".into(), "aa".into()]);
        let f = tempfile::NamedTempFile::new().unwrap();
        vocab.save(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert!(text.starts_with("#J=3\n"));
        let again = Vocabulary::load(f.path(), "body").unwrap();
        assert_eq!(again.tokens, vocab.tokens);
        assert_eq!(again.token_index, vocab.token_index);
    }

    #[test]
    fn discover_bags_unions_and_sorts() {
        let f = write_jsonl(&[
            r#"{"id":"a","bags":{"verbs":{"run":1}}}"#,
            r#"{"id":"b","bags":{"nouns":{"dog":1},"verbs":{"sit":1}}}"#,
        ]);
        assert_eq!(discover_bags(f.path()).unwrap(), vec!["nouns", "verbs"]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_corpus_lines() -> impl Strategy<Value = Vec<RawDocument>> {
            // up to 8 docs over a tiny closed token set
            proptest::collection::vec(
                proptest::collection::btree_map(
                    proptest::sample::select(vec!["a", "b", "c", "d", "e"]),
                    1i64..6,
                    0..5,
                ),
                1..8,
            )
            .prop_map(|docs| {
                docs.into_iter()
                    .enumerate()
                    .map(|(i, counts)| RawDocument {
                        id: format!("d{i}"),
                        bags: [(
                            "body".to_string(),
                            counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                        )]
                        .into_iter()
                        .collect(),
                        label: None,
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn pruning_is_monotone(raw in arb_corpus_lines(), mt in 1u64..5, md in 1u32..4) {
                let base = PruneConfig { min_total: mt, min_docs: md, stopwords: HashSet::new() };
                let tighter = PruneConfig { min_total: mt + 1, min_docs: md + 1, stopwords: HashSet::new() };
                let v1 = build_vocabulary(&raw, "body", &base);
                let v2 = build_vocabulary(&raw, "body", &tighter);
                if let Ok(v2) = v2 {
                    let v1 = v1.expect("looser pruning cannot fail if tighter succeeded");
                    for t in &v2.tokens {
                        prop_assert!(v1.token_index.contains_key(t),
                            "token {t} appeared only under tighter pruning");
                    }
                }
                if let Ok(v1) = build_vocabulary(&raw, "body", &base) {
                    // contiguity invariant
                    for (i, t) in v1.tokens.iter().enumerate() {
                        prop_assert_eq!(v1.token_index[t], i);
                    }
                }
            }
        }
    }
}
