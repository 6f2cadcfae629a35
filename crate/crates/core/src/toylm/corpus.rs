//! Tokenisation, a seeded synthetic text source, and batch sampling.

use std::collections::{HashMap, HashSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensorio::FrequencyTable;
use crate::toylm::model::Batch;

pub const BYTE_VOCAB: usize = 256;
pub const UNK: &str = "<unk>";

/// An input sequence and its next-token targets.
pub type Window = (Vec<usize>, Vec<usize>);

/// A tokenised corpus and the labels of its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub ids: Vec<usize>,
    pub labels: Vec<String>,
}

/// Printable ASCII except space maps to itself; everything else to `<0xHH>`.
pub fn byte_label(b: u8) -> String {
    if b.is_ascii_graphic() {
        (b as char).to_string()
    } else {
        format!("<0x{b:02X}>")
    }
}

impl Corpus {
    /// One token per byte, `V = 256`.
    pub fn from_bytes(text: &[u8]) -> Self {
        Self {
            ids: text.iter().map(|&b| b as usize).collect(),
            labels: (0..=255u8).map(byte_label).collect(),
        }
    }

    /// Whitespace-separated words. The `max_vocab - 1` most frequent words
    /// (ties broken alphabetically) get ids from 1; the rest map to `<unk>`
    /// at id 0.
    pub fn from_words(text: &str, max_vocab: usize) -> Result<Self> {
        if max_vocab < 2 {
            return Err(Error::InvalidArgument("word vocabulary needs at least 2 entries".into()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for w in text.split_whitespace() {
            *counts.entry(w).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|(w, _)| *w != UNK).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_vocab - 1);
        let mut labels = vec![UNK.to_owned()];
        labels.extend(ranked.iter().map(|(w, _)| w.to_string()));
        let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let ids = text
            .split_whitespace()
            .map(|w| index.get(w).copied().unwrap_or(0))
            .collect();
        Ok(Self { ids, labels })
    }

    pub fn vocab(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn frequencies(&self) -> FrequencyTable {
        FrequencyTable::from_token_ids(&self.ids, self.vocab()).expect("ids come from this vocabulary")
    }

    /// Cuts the corpus into consecutive windows of `seq + 1` tokens (inputs
    /// plus shifted targets) and returns them as ready-made sequences.
    pub fn windows(&self, seq: usize) -> Vec<Window> {
        if self.ids.len() < seq + 1 {
            return Vec::new();
        }
        (0..(self.ids.len() - 1) / seq)
            .map(|w| w * seq)
            .filter(|&s| s + seq < self.ids.len())
            .map(|s| (self.ids[s..s + seq].to_vec(), self.ids[s + 1..s + seq + 1].to_vec()))
            .collect()
    }
}

/// Packs a list of equal-length sequences into one batch.
pub fn batch_from_windows(windows: &[Window]) -> Batch {
    let seq = windows.first().map_or(0, |w| w.0.len());
    let mut inputs = Vec::with_capacity(windows.len() * seq);
    let mut targets = Vec::with_capacity(windows.len() * seq);
    for (x, y) in windows {
        inputs.extend_from_slice(x);
        targets.extend_from_slice(y);
    }
    Batch {
        inputs,
        targets,
        batch: windows.len(),
        seq,
    }
}

/// Draws random contiguous windows from a token stream.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self, ids: &[usize], batch: usize, seq: usize) -> Result<Batch> {
        if ids.len() < seq + 1 {
            return Err(Error::InvalidArgument(format!(
                "corpus of {} tokens is shorter than one window of {}",
                ids.len(),
                seq + 1
            )));
        }
        let max_start = ids.len() - seq - 1;
        let mut inputs = Vec::with_capacity(batch * seq);
        let mut targets = Vec::with_capacity(batch * seq);
        for _ in 0..batch {
            let s = self.rng.random_range(0..=max_start);
            inputs.extend_from_slice(&ids[s..s + seq]);
            targets.extend_from_slice(&ids[s + 1..s + seq + 1]);
        }
        Ok(Batch {
            inputs,
            targets,
            batch,
            seq,
        })
    }
}

/// Seeded English-like text with Zipfian word frequencies and sticky word
/// bigrams, for runs that should not depend on an external corpus.
pub fn synthetic_text(seed: u64, len: usize) -> String {
    const CONSONANTS: &[u8] = b"bcdfghklmnprstvwz";
    const VOWELS: &[u8] = b"aeiou";
    const LEXICON: usize = 300;
    const SUCCESSORS: usize = 3;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut words: Vec<String> = Vec::with_capacity(LEXICON);
    while words.len() < LEXICON {
        let syllables = rng.random_range(1..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
            w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
        }
        if rng.random_bool(0.3) {
            w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        }
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    let zipf: Vec<f64> = (0..LEXICON).map(|i| 1.0 / ((i + 1) as f64).powf(1.1)).collect();
    let unigram = WeightedIndex::new(&zipf).expect("positive weights");
    let successors: Vec<Vec<usize>> = (0..LEXICON)
        .map(|_| (0..SUCCESSORS).map(|_| unigram.sample(&mut rng)).collect())
        .collect();

    let mut out = String::with_capacity(len + 64);
    let mut prev = unigram.sample(&mut rng);
    let mut sentences_in_par = 0;
    while out.len() < len {
        let n_words = rng.random_range(4..=12);
        for k in 0..n_words {
            let w = if rng.random_bool(0.6) {
                successors[prev][rng.random_range(0..SUCCESSORS)]
            } else {
                unigram.sample(&mut rng)
            };
            prev = w;
            if k == 0 {
                let mut cs = words[w].chars();
                let first = cs.next().expect("non-empty word").to_ascii_uppercase();
                out.push(first);
                out.extend(cs);
            } else if rng.random_bool(0.02) {
                out.push_str(&rng.random_range(1..2000u32).to_string());
                out.push(' ');
                out.push_str(&words[w]);
            } else {
                out.push_str(&words[w]);
            }
            if k + 1 < n_words {
                out.push_str(if rng.random_bool(0.08) { ", " } else { " " });
            }
        }
        out.push('.');
        sentences_in_par += 1;
        if sentences_in_par >= 4 && rng.random_bool(0.4) {
            out.push('\n');
            sentences_in_par = 0;
        } else {
            out.push(' ');
        }
    }
    out.truncate(len);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_labels_are_unique() {
        let c = Corpus::from_bytes(b"hi there");
        let set: HashSet<&String> = c.labels.iter().collect();
        assert_eq!(set.len(), 256);
        assert_eq!(c.labels[b'a' as usize], "a");
        assert_eq!(c.labels[b' ' as usize], "<0x20>");
        assert_eq!(c.ids[0], b'h' as usize);
    }

    #[test]
    fn word_vocab_ranks_by_frequency() {
        let c = Corpus::from_words("b a a c a b d", 3).unwrap();
        assert_eq!(c.labels, ["<unk>", "a", "b"]);
        assert_eq!(c.ids, [2, 1, 1, 0, 1, 2, 0]);
    }

    #[test]
    fn synthetic_text_is_seeded() {
        let a = synthetic_text(1, 5000);
        assert_eq!(a.len(), 5000);
        assert_eq!(a, synthetic_text(1, 5000));
        assert_ne!(a, synthetic_text(2, 5000));
        assert!(a.is_ascii());
    }

    #[test]
    fn sampler_windows_are_shifted_by_one() {
        let ids: Vec<usize> = (0..100).collect();
        let b = BatchSampler::new(0).sample(&ids, 4, 8).unwrap();
        for i in 0..b.positions() {
            assert_eq!(b.targets[i], b.inputs[i] + 1);
        }
        assert!(BatchSampler::new(0).sample(&ids[..5], 1, 8).is_err());
    }

    #[test]
    fn windows_cover_prefix() {
        let c = Corpus { ids: (0..10).collect(), labels: (0..10).map(|i| i.to_string()).collect() };
        let w = c.windows(3);
        assert_eq!(w.len(), 3);
        assert_eq!(w[2], (vec![6, 7, 8], vec![7, 8, 9]));
    }
}
