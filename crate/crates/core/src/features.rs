//! Feature construction from fitted documents: component-generated word
//! counts, TF-IDF matrices, SVMlight export, and pairwise component
//! correlation summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::corpus::{tfidf_weights, Corpus};
use crate::error::{Error, Result};
use crate::infer::PosteriorSummary;
use crate::model::ComponentModel;

/// Below this expected word count a component is treated as absent from the
/// document.
pub const COMPONENT_COUNT_THRESHOLD: f64 = 0.01;

/// Expected number of component-generated words, m_mean * L, sparsified by
/// zeroing entries under [`COMPONENT_COUNT_THRESHOLD`].
pub fn component_word_counts(summary: &PosteriorSummary, l: u64) -> Vec<f64> {
    summary
        .m_mean
        .iter()
        .map(|&m| {
            let count = m * l as f64;
            if count < COMPONENT_COUNT_THRESHOLD {
                0.0
            } else {
                count
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    Words,
    Components,
    WordsAndComponents,
}

#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    /// Words (per bag, vocabulary order) then components.
    pub feature_names: Vec<String>,
    /// Sparse rows: (feature index, weight), ascending by index, zeros omitted.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<Option<String>>,
}

/// Assemble per-document features: word TF-IDF weights and/or TF-IDF
/// transformed component word counts. A component's document frequency is
/// the number of documents where its post-threshold count is nonzero;
/// component feature indices follow all word indices.
pub fn build_feature_matrix(
    corpus: &Corpus,
    model: &ComponentModel,
    summaries: &[PosteriorSummary],
    mode: FeatureMode,
) -> Result<FeatureMatrix> {
    let n_docs = corpus.documents.len();
    let with_components = mode != FeatureMode::Words;
    if with_components {
        if summaries.len() != n_docs {
            return Err(Error::Dimension(format!(
                "{} summaries for {} documents",
                summaries.len(),
                n_docs
            )));
        }
        for s in summaries {
            if s.m_mean.len() != model.k {
                return Err(Error::Dimension(format!(
                    "summary for {:?} has {} components, model has {}",
                    s.id,
                    s.m_mean.len(),
                    model.k
                )));
            }
        }
    }

    let mut feature_names = Vec::new();
    let mut word_offsets = Vec::with_capacity(corpus.vocabularies.len());
    if mode != FeatureMode::Components {
        for vocab in &corpus.vocabularies {
            word_offsets.push(feature_names.len());
            for t in &vocab.tokens {
                feature_names.push(format!("{}:{}", vocab.bag_name, t));
            }
        }
    }
    let component_offset = feature_names.len();
    if with_components {
        for k in 0..model.k {
            feature_names.push(format!("component_{k}"));
        }
    }

    // component counts and document frequencies (post-threshold presence)
    let (counts, comp_df) = if with_components {
        let counts: Vec<Vec<f64>> = corpus
            .documents
            .iter()
            .zip(summaries)
            .map(|(doc, s)| component_word_counts(s, doc.total_count()))
            .collect();
        let mut df = vec![0usize; model.k];
        for row in &counts {
            for (k, &c) in row.iter().enumerate() {
                if c > 0.0 {
                    df[k] += 1;
                }
            }
        }
        (counts, df)
    } else {
        (Vec::new(), Vec::new())
    };

    let word_weights: Vec<Vec<Vec<(u32, f64)>>> = if mode != FeatureMode::Components {
        (0..corpus.vocabularies.len()).map(|b| tfidf_weights(corpus, b)).collect()
    } else {
        Vec::new()
    };

    let mut rows = Vec::with_capacity(n_docs);
    for (i, _doc) in corpus.documents.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        if mode != FeatureMode::Components {
            for (b, &offset) in word_offsets.iter().enumerate() {
                for &(j, w) in &word_weights[b][i] {
                    if w != 0.0 {
                        row.push((offset + j as usize, w));
                    }
                }
            }
        }
        if with_components {
            for (k, &c) in counts[i].iter().enumerate() {
                if c > 0.0 {
                    let idf = ((n_docs as f64) / comp_df[k] as f64).ln();
                    let w = c * idf;
                    if w != 0.0 {
                        row.push((component_offset + k, w));
                    }
                }
            }
        }
        row.sort_unstable_by_key(|&(idx, _)| idx);
        for &(_, w) in &row {
            if !w.is_finite() {
                return Err(Error::non_finite("feature weight"));
            }
        }
        rows.push(row);
    }

    let labels = corpus.documents.iter().map(|d| d.label.clone()).collect();
    Ok(FeatureMatrix { feature_names, rows, labels })
}

/// Write SVMlight lines: `<label> <index>:<value> ...` with 1-based indices
/// ascending and shortest round-trip decimals. Labels are mapped to 1..C in
/// lexicographic order; the mapping goes to `<path>.labels`.
pub fn export_svmlight(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut classes: Vec<&str> = Vec::new();
    for (i, label) in matrix.labels.iter().enumerate() {
        match label {
            Some(l) => classes.push(l),
            None => {
                return Err(Error::Validation(format!(
                    "row {i} has no label; SVMlight export needs one per row"
                )))
            }
        }
    }
    classes.sort_unstable();
    classes.dedup();
    let class_ids: BTreeMap<&str, usize> =
        classes.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();

    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let file = File::create(path).map_err(ioerr)?;
    let mut out = BufWriter::new(file);
    for (i, row) in matrix.rows.iter().enumerate() {
        let label = matrix.labels[i].as_deref().expect("checked above");
        write!(out, "{}", class_ids[label]).map_err(ioerr)?;
        let mut sorted = row.clone();
        sorted.sort_unstable_by_key(|&(idx, _)| idx);
        for (idx, w) in sorted {
            if !w.is_finite() {
                return Err(Error::non_finite(format!("feature {idx} in row {i}")));
            }
            if w != 0.0 {
                write!(out, " {}:{}", idx + 1, w).map_err(ioerr)?;
            }
        }
        writeln!(out).map_err(ioerr)?;
    }
    out.flush().map_err(ioerr)?;

    let sidecar_path = format!("{}.labels", path.display());
    let sidecar = File::create(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
    let mut out = BufWriter::new(sidecar);
    for (&c, &id) in &class_ids {
        writeln!(out, "{id}\t{c}").map_err(|e| Error::io(&sidecar_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&sidecar_path, e))?;
    Ok(())
}

/// Pearson correlation, clamped to [-1, 1] against rounding spill.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Type-7 quantile (linear interpolation) of ascending-sorted values.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationBucket {
    pub group: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n_pairs: usize,
}

/// Pearson correlation for every unordered component pair, summarized as
/// five-number summaries. With per-component group tags, pairs are bucketed
/// by tag pair (e.g. T-T, B-B, T-B); without, everything lands in "all".
/// Zero-variance components are excluded and returned separately.
pub fn component_correlations(
    scores: &[Vec<f64>],
    groups: Option<&[String]>,
) -> Result<(Vec<CorrelationBucket>, Vec<usize>)> {
    let i_total = scores.len();
    if i_total < 3 {
        return Err(Error::Validation(format!(
            "need at least 3 documents for correlations, have {i_total}"
        )));
    }
    let k = scores[0].len();
    if scores.iter().any(|r| r.len() != k) {
        return Err(Error::Dimension("ragged score matrix".into()));
    }
    if let Some(g) = groups {
        if g.len() != k {
            return Err(Error::Dimension(format!(
                "{} group tags for {k} components",
                g.len()
            )));
        }
    }

    let columns: Vec<Vec<f64>> =
        (0..k).map(|kk| scores.iter().map(|r| r[kk]).collect()).collect();
    let excluded: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, col)| {
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            col.iter().all(|&v| v == mean)
        })
        .map(|(i, _)| i)
        .collect();

    let mut buckets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for a in 0..k {
        if excluded.contains(&a) {
            continue;
        }
        for b in (a + 1)..k {
            if excluded.contains(&b) {
                continue;
            }
            let name = match groups {
                None => "all".to_string(),
                Some(g) => {
                    let (x, y) = (&g[a], &g[b]);
                    // descending join gives the conventional T-T, T-B, B-B names
                    if x >= y {
                        format!("{x}-{y}")
                    } else {
                        format!("{y}-{x}")
                    }
                }
            };
            buckets.entry(name).or_default().push(pearson(&columns[a], &columns[b]));
        }
    }

    let summaries = buckets
        .into_iter()
        .map(|(group, mut vals)| {
            vals.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite correlations"));
            CorrelationBucket {
                group,
                min: vals[0],
                q1: quantile_type7(&vals, 0.25),
                median: quantile_type7(&vals, 0.5),
                q3: quantile_type7(&vals, 0.75),
                max: vals[vals.len() - 1],
                n_pairs: vals.len(),
            }
        })
        .collect();
    Ok((summaries, excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, InitOptions, Variant};
    use crate::testutil::tiny_corpus;
    use proptest::prelude::*;

    fn summary(id: &str, m_mean: Vec<f64>) -> PosteriorSummary {
        let k = m_mean.len();
        PosteriorSummary {
            id: id.into(),
            m_mean,
            m_std: vec![0.0; k],
            dirichlet_fit: vec![1.0; k],
            n_samples: 2,
        }
    }

    #[test]
    fn counts_scale_threshold_and_zero() {
        let s = summary("d", vec![0.25, 0.75]);
        assert_eq!(component_word_counts(&s, 100), vec![25.0, 75.0]);
        let s = summary("d", vec![0.0005, 0.9995]);
        assert_eq!(component_word_counts(&s, 10)[0], 0.0);
        let s = summary("d", vec![0.5, 0.5]);
        assert_eq!(component_word_counts(&s, 0), vec![0.0, 0.0]);
    }

    #[test]
    fn words_mode_reproduces_tfidf_weights() {
        let corpus = tiny_corpus(
            &[
                r#"{"id":"a","bags":{"body":{"x":2,"y":1},"title":{"t":1}}}"#,
                r#"{"id":"b","bags":{"body":{"x":1},"title":{"u":2}}}"#,
            ],
            &["body", "title"],
        );
        let model =
            init_model(&corpus, 2, Variant::Dirichlet, None, &InitOptions::default(), 1).unwrap();
        let matrix = build_feature_matrix(&corpus, &model, &[], FeatureMode::Words).unwrap();
        let j_body = corpus.vocabularies[0].len();
        let weights: Vec<_> = (0..2).map(|b| tfidf_weights(&corpus, b)).collect();
        for (i, row) in matrix.rows.iter().enumerate() {
            let mut expect: Vec<(usize, f64)> = Vec::new();
            for (b, offset) in [(0usize, 0usize), (1, j_body)] {
                for &(j, w) in &weights[b][i] {
                    if w != 0.0 {
                        expect.push((offset + j as usize, w));
                    }
                }
            }
            expect.sort_unstable_by_key(|&(idx, _)| idx);
            assert_eq!(row, &expect);
        }
        assert_eq!(
            matrix.feature_names.len(),
            corpus.vocabularies.iter().map(|v| v.len()).sum::<usize>()
        );
    }

    #[test]
    fn ubiquitous_component_gets_zero_weight_and_width_checks_out() {
        let corpus = tiny_corpus(
            &[
                r#"{"id":"a","bags":{"body":{"x":4}}}"#,
                r#"{"id":"b","bags":{"body":{"y":4}}}"#,
            ],
            &["body"],
        );
        let model =
            init_model(&corpus, 2, Variant::Dirichlet, None, &InitOptions::default(), 1).unwrap();
        // component 0 present everywhere -> idf 0; component 1 only in doc b
        let summaries = vec![
            summary("a", vec![1.0, 0.0]),
            summary("b", vec![0.5, 0.5]),
        ];
        let matrix =
            build_feature_matrix(&corpus, &model, &summaries, FeatureMode::WordsAndComponents)
                .unwrap();
        let j_total: usize = corpus.vocabularies.iter().map(|v| v.len()).sum();
        assert_eq!(matrix.feature_names.len(), j_total + 2);
        let comp0 = j_total;
        let comp1 = j_total + 1;
        for row in &matrix.rows {
            assert!(row.iter().all(|&(idx, _)| idx != comp0));
        }
        // doc b: component 1 count 2.0, df 1, idf ln(2)
        let w = matrix.rows[1].iter().find(|&&(idx, _)| idx == comp1).unwrap().1;
        assert!((w - 2.0 * 2.0f64.ln()).abs() < 1e-12);
        // components-only mode drops the word block
        let only =
            build_feature_matrix(&corpus, &model, &summaries, FeatureMode::Components).unwrap();
        assert_eq!(only.feature_names.len(), 2);
        assert!(only.rows[1].iter().any(|&(idx, _)| idx == 1));
    }

    #[test]
    fn mismatched_summaries_are_an_error() {
        let corpus = tiny_corpus(&[r#"{"id":"a","bags":{"body":{"x":1}}}"#], &["body"]);
        let model =
            init_model(&corpus, 2, Variant::Dirichlet, None, &InitOptions::default(), 1).unwrap();
        assert!(build_feature_matrix(&corpus, &model, &[], FeatureMode::Components).is_err());
    }

    #[test]
    fn svmlight_line_format_matches_the_contract() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.svml");
        let matrix = FeatureMatrix {
            feature_names: (0..8).map(|i| format!("f{i}")).collect(),
            rows: vec![
                vec![(6, 1.25), (2, 0.5)], // unordered on purpose
                vec![],
                vec![(0, 0.0), (3, 2.0)], // zero weight omitted
            ],
            labels: vec![Some("a".into()), Some("a".into()), Some("b".into())],
        };
        export_svmlight(&matrix, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "1 3:0.5 7:1.25\n1\n2 4:2\n");
        let sidecar = std::fs::read_to_string(format!("{}.labels", path.display())).unwrap();
        assert_eq!(sidecar, "1\ta\n2\tb\n");
    }

    #[test]
    fn svmlight_rejects_missing_labels_and_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.svml");
        let mut matrix = FeatureMatrix {
            feature_names: vec!["f".into()],
            rows: vec![vec![(0, 1.0)]],
            labels: vec![None],
        };
        assert!(export_svmlight(&matrix, &path).is_err());
        matrix.labels = vec![Some("a".into())];
        matrix.rows[0][0].1 = f64::NAN;
        assert!(export_svmlight(&matrix, &path).is_err());
    }

    proptest! {
        #[test]
        fn svmlight_round_trips_exactly(
            rows in proptest::collection::vec(
                proptest::collection::btree_map(0usize..40, -1e9f64..1e9, 0..12),
                1..8,
            )
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.svml");
            let matrix = FeatureMatrix {
                feature_names: (0..40).map(|i| format!("f{i}")).collect(),
                rows: rows.iter().map(|r| r.iter().map(|(&i, &v)| (i, v)).collect()).collect(),
                labels: vec![Some("c".into()); rows.len()],
            };
            export_svmlight(&matrix, &path).unwrap();
            let text = std::fs::read_to_string(&path).unwrap();
            for (line, row) in text.lines().zip(&rows) {
                let mut fields = line.split(' ');
                prop_assert_eq!(fields.next().unwrap(), "1");
                let parsed: Vec<(usize, f64)> = fields
                    .map(|f| {
                        let (i, v) = f.split_once(':').unwrap();
                        (i.parse::<usize>().unwrap() - 1, v.parse::<f64>().unwrap())
                    })
                    .collect();
                let expect: Vec<(usize, f64)> =
                    row.iter().filter(|&(_, &v)| v != 0.0).map(|(&i, &v)| (i, v)).collect();
                prop_assert_eq!(parsed, expect); // exact: shortest round-trip decimals
            }
        }
    }

    #[test]
    fn pearson_identities() {
        let x = vec![1.0, 2.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let z = vec![2.0, 4.0, 8.0, 14.0]; // 2x
        assert_eq!(pearson(&x, &x), 1.0);
        assert_eq!(pearson(&x, &y), -1.0);
        assert_eq!(pearson(&x, &z), 1.0);
        let w = vec![3.0, 1.0, 5.0, 2.0];
        assert_eq!(pearson(&x, &w), pearson(&w, &x));
        assert!(pearson(&x, &w).abs() <= 1.0);
    }

    #[test]
    fn quantiles_are_type_seven() {
        let vals = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile_type7(&vals, 0.25) - 1.75).abs() < 1e-12);
        assert!((quantile_type7(&vals, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile_type7(&vals, 0.75) - 3.25).abs() < 1e-12);
        assert_eq!(quantile_type7(&[5.0], 0.25), 5.0);
        let odd = [1.0, 2.0, 10.0];
        assert_eq!(quantile_type7(&odd, 0.5), 2.0);
    }

    #[test]
    fn pair_counts_match_the_choose_two_formula() {
        use crate::rng::substream;
        use rand::Rng as _;
        let mut rng = substream(1, 90, 0, 0);
        for (k, expect) in [(150usize, 11175usize), (200, 19900)] {
            let scores: Vec<Vec<f64>> =
                (0..5).map(|_| (0..k).map(|_| rng.random::<f64>()).collect()).collect();
            let (buckets, excluded) = component_correlations(&scores, None).unwrap();
            assert!(excluded.is_empty());
            assert_eq!(buckets.len(), 1);
            assert_eq!(buckets[0].group, "all");
            assert_eq!(buckets[0].n_pairs, expect);
            assert!(buckets[0].min <= buckets[0].q1 && buckets[0].q1 <= buckets[0].median);
            assert!(buckets[0].median <= buckets[0].q3 && buckets[0].q3 <= buckets[0].max);
            assert!(buckets[0].min >= -1.0 && buckets[0].max <= 1.0);
        }
    }

    #[test]
    fn groups_bucket_pairs_and_zero_variance_is_excluded() {
        // columns: 0,1 tagged T; 2 tagged B; 3 constant (excluded)
        let scores = vec![
            vec![1.0, 2.0, 5.0, 7.0],
            vec![2.0, 1.0, 4.0, 7.0],
            vec![3.0, 5.0, 9.0, 7.0],
            vec![4.0, 4.0, 1.0, 7.0],
        ];
        let groups: Vec<String> = ["T", "T", "B", "B"].iter().map(|s| s.to_string()).collect();
        let (buckets, excluded) = component_correlations(&scores, Some(&groups)).unwrap();
        assert_eq!(excluded, vec![3]);
        let names: Vec<&str> = buckets.iter().map(|b| b.group.as_str()).collect();
        assert_eq!(names, vec!["T-B", "T-T"]); // B-B empty after exclusion
        assert_eq!(buckets.iter().map(|b| b.n_pairs).collect::<Vec<_>>(), vec![2, 1]);
        let tt = &buckets[1];
        let expect = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 5.0, 4.0]);
        assert_eq!((tt.min, tt.median, tt.max), (expect, expect, expect));
    }

    #[test]
    fn too_few_documents_is_an_error() {
        let scores = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(component_correlations(&scores, None).is_err());
    }
}
