//! JSON-lines corpus files and cross-validation splits.
//!
//! One object per line: `{"utt": "...", "embeddings": [[..], ..], "labels": [..]}`.
//! Labels are optional (decode inputs) and may use arbitrary integer ids;
//! they are canonicalised on load.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingSequence, LabelSequence};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::train::Utterance;

pub const CORPUS_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry<S> {
    pub utt: String,
    pub embeddings: EmbeddingSequence<S>,
    pub labels: Option<LabelSequence>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct Record<S> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format_version: Option<u32>,
    utt: String,
    embeddings: Vec<Vec<S>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct LabelRecord {
    utt: String,
    labels: Vec<usize>,
}

impl<S: Scalar> CorpusEntry<S> {
    pub fn labelled(utt: &Utterance<S>) -> Self {
        CorpusEntry {
            utt: utt.id.clone(),
            embeddings: utt.embeddings.clone(),
            labels: Some(utt.labels.clone()),
        }
    }

    pub fn into_utterance(self) -> Result<Utterance<S>> {
        let labels = self
            .labels
            .ok_or_else(|| Error::InvalidParameter(format!("utterance {} has no labels", self.utt)))?;
        Utterance::new(self.utt, self.embeddings, labels)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_corpus<S: Scalar>(text: &str, path: &str) -> Result<Vec<CorpusEntry<S>>> {
    let mut out: Vec<CorpusEntry<S>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: n + 1,
            message,
        };
        let record: Record<S> = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if let Some(v) = record.format_version {
            if v != CORPUS_FORMAT_VERSION {
                return Err(err(format!("unsupported corpus format version {v}")));
            }
        }
        let embeddings = EmbeddingSequence::from_rows(record.embeddings).map_err(|e| err(e.to_string()))?;
        if let Some(first) = out.first() {
            if first.embeddings.dim() != embeddings.dim() {
                return Err(err(format!(
                    "embedding dimension {} differs from {} on earlier lines",
                    embeddings.dim(),
                    first.embeddings.dim()
                )));
            }
        }
        let labels = match record.labels {
            Some(raw) => {
                if raw.len() != embeddings.len() {
                    return Err(err(format!("{} labels for {} embeddings", raw.len(), embeddings.len())));
                }
                Some(LabelSequence::canonicalize(&raw).map_err(|e| err(e.to_string()))?)
            }
            None => None,
        };
        out.push(CorpusEntry {
            utt: record.utt,
            embeddings,
            labels,
        });
    }
    Ok(out)
}

pub fn write_corpus<'a, S: Scalar>(entries: impl IntoIterator<Item = &'a CorpusEntry<S>>) -> String {
    let mut out = String::new();
    for e in entries {
        let record = Record {
            format_version: None,
            utt: e.utt.clone(),
            embeddings: e.embeddings.to_rows(),
            labels: e.labels.as_ref().map(|l| l.as_slice().iter().map(|&v| v as i64).collect()),
        };
        out.push_str(&serde_json::to_string(&record).expect("corpus records serialise"));
        out.push('\n');
    }
    out
}

pub fn load_corpus<S: Scalar>(path: &Path) -> Result<Vec<CorpusEntry<S>>> {
    parse_corpus(&read_text(path)?, &path.display().to_string())
}

/// Decoder output lines `{"utt": .., "labels": [..]}`.
pub fn write_labels<'a>(results: impl IntoIterator<Item = (&'a str, &'a LabelSequence)>) -> String {
    let mut out = String::new();
    for (utt, labels) in results {
        let record = LabelRecord {
            utt: utt.to_owned(),
            labels: labels.as_slice().to_vec(),
        };
        out.push_str(&serde_json::to_string(&record).expect("label records serialise"));
        out.push('\n');
    }
    out
}

pub fn parse_labels(text: &str, path: &str) -> Result<Vec<(String, LabelSequence)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let err = |message: String| Error::Parse {
                path: path.to_owned(),
                line: n + 1,
                message,
            };
            let r: LabelRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            let labels = LabelSequence::new(r.labels).map_err(|e| err(e.to_string()))?;
            Ok((r.utt, labels))
        })
        .collect()
}

/// One cross-validation fold, as corpus indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
}

/// Seeded partition into `k` near-equal evaluation folds.
pub fn kfold_split<T>(corpus: &[T], k: usize, seed: u64) -> Result<Vec<Fold>> {
    let n = corpus.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds corpus size {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut eval = order[start..start + size].to_vec();
        eval.sort_unstable();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + size..]).copied().collect();
        train.sort_unstable();
        folds.push(Fold { train, eval });
        start += size;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_canonicalises() {
        let text = "{\"utt\":\"a\",\"embeddings\":[[0.5,1.0],[2.0,-1.0]],\"labels\":[7,3]}\n\n{\"utt\":\"b\",\"embeddings\":[[0.0,0.0]]}\n";
        let c = parse_corpus::<f64>(text, "c.jsonl").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].labels.as_ref().unwrap().as_slice(), &[1, 2]);
        assert!(c[1].labels.is_none());
    }

    #[test]
    fn errors_name_file_and_line() {
        let text = "{\"utt\":\"a\",\"embeddings\":[[0.5,1.0]]}\n{\"utt\":\"b\",\"embeddings\":[[0.5]]}\n";
        let e = parse_corpus::<f64>(text, "c.jsonl").unwrap_err().to_string();
        assert!(e.starts_with("c.jsonl:2: "), "{e}");
        let e = parse_corpus::<f64>("{not json}\n", "d.jsonl").unwrap_err().to_string();
        assert!(e.starts_with("d.jsonl:1: "), "{e}");
        let e = parse_corpus::<f64>("{\"utt\":\"a\",\"embeddings\":[[1.0]],\"labels\":[1,2]}\n", "e.jsonl").unwrap_err();
        assert!(e.to_string().starts_with("e.jsonl:1: "));
        let e = parse_corpus::<f64>("{\"format_version\":9,\"utt\":\"a\",\"embeddings\":[[1.0]]}\n", "f.jsonl").unwrap_err();
        assert!(e.to_string().contains("version"));
    }

    #[test]
    fn kfold_examples() {
        let corpus: Vec<usize> = (0..10).collect();
        let folds = kfold_split(&corpus, 5, 42).unwrap();
        assert!(folds.iter().all(|f| f.eval.len() == 2 && f.train.len() == 8));
        assert_eq!(folds, kfold_split(&corpus, 5, 42).unwrap());
        assert!(kfold_split(&corpus, 11, 0).is_err());
        assert!(kfold_split(&corpus, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn kfold_partitions(n in 2usize..40, k in 2usize..8, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let corpus = vec![(); n];
            let folds = kfold_split(&corpus, k, seed).unwrap();
            let mut seen = vec![0; n];
            for f in &folds {
                prop_assert!(f.eval.len() == n / k || f.eval.len() == n / k + 1);
                for &i in &f.eval { seen[i] += 1; }
                prop_assert_eq!(f.train.len() + f.eval.len(), n);
                prop_assert!(f.train.iter().all(|i| !f.eval.contains(i)));
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn corpus_round_trips_exactly(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..6), seed in any::<u64>()) {
            let labels: Vec<usize> = (0..rows.len()).map(|i| 1 + ((seed >> i) as usize % (i + 1)).min(i)).collect();
            let labels = LabelSequence::canonicalize(&labels).unwrap();
            let entry = CorpusEntry { utt: "u".into(), embeddings: EmbeddingSequence::from_rows(rows).unwrap(), labels: Some(labels) };
            let parsed = parse_corpus::<f64>(&write_corpus([&entry]), "p").unwrap();
            prop_assert_eq!(parsed, vec![entry]);
        }
    }
}
