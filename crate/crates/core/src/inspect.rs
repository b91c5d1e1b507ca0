//! Ranks n-grams by first-layer feature-detector activation.
//!
//! A detector is one row of one first-layer filter. For every window of the
//! corpus that lies fully inside a sentence (margin windows would compare
//! zero-padded responses), the raw convolution response of the detector is
//! recorded; the top N distinct n-grams per detector are reported. Bias and
//! tanh are left out: both are monotone per row, so the ranking is the same
//! and raw responses compare linearly.

use alloc::vec::Vec;

use crate::network::{ModelLayout, Network, ParameterStore};
use crate::{invalid_arg, Result};

/// One ranked n-gram: its word ids and the detector's response.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramHit {
    pub words: Vec<usize>,
    pub activation: f64,
}

/// Top n-grams for one feature detector (map index, filter row).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorReport {
    pub map: usize,
    pub row: usize,
    pub top: Vec<NgramHit>,
}

// Bounded top-N set, deduplicating by exact word-id sequence (a duplicate
// keeps its maximum activation). Total order: higher activation first, then
// lexicographically smaller ids, so truncation and ties are deterministic.
struct TopSet {
    cap: usize,
    entries: Vec<(f64, Vec<usize>)>,
}

impl TopSet {
    fn new(cap: usize) -> TopSet {
        TopSet {
            cap,
            entries: Vec::with_capacity(cap),
        }
    }

    fn better(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> bool {
        match a.0.total_cmp(&b.0) {
            core::cmp::Ordering::Greater => true,
            core::cmp::Ordering::Less => false,
            core::cmp::Ordering::Equal => a.1 < b.1,
        }
    }

    fn offer(&mut self, activation: f64, gram: &[usize]) {
        if let Some(entry) = self.entries.iter_mut().find(|e| e.1 == gram) {
            if activation > entry.0 {
                entry.0 = activation;
            }
            return;
        }
        if self.entries.len() < self.cap {
            self.entries.push((activation, gram.to_vec()));
            return;
        }
        let candidate = (activation, gram.to_vec());
        let worst = self
            .entries
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                if Self::better(a, b) {
                    core::cmp::Ordering::Greater
                } else {
                    core::cmp::Ordering::Less
                }
            })
            .map(|(i, _)| i)
            .expect("cap >= 1");
        if Self::better(&candidate, &self.entries[worst]) {
            self.entries[worst] = candidate;
        }
    }

    fn into_sorted(mut self) -> Vec<NgramHit> {
        self.entries.sort_by(|a, b| {
            if Self::better(a, b) {
                core::cmp::Ordering::Less
            } else {
                core::cmp::Ordering::Greater
            }
        });
        self.entries
            .into_iter()
            .map(|(activation, words)| NgramHit { words, activation })
            .collect()
    }
}

/// Ranks, for every first-layer detector, the `top_n` distinct n-grams of
/// the corpus by raw convolution response. The gram size is the first-layer
/// filter width; sentences shorter than it contribute nothing.
pub fn top_ngrams(
    net: &Network,
    store: &ParameterStore,
    sentences: &[Vec<usize>],
    top_n: usize,
) -> Result<Vec<DetectorReport>> {
    if top_n == 0 {
        return Err(invalid_arg!("top_n must be >= 1"));
    }
    let layout = net.layout();
    if store.params().len() != layout.param_count {
        return Err(invalid_arg!(
            "parameter store does not match the network layout"
        ));
    }
    // First-layer filters, one per output map, each connected to the single
    // input map (the sentence matrix).
    let filter_indices: Vec<usize> = match &layout.model {
        ModelLayout::Dcnn { conv } => conv[0].filters.iter().map(|row| row[0]).collect(),
        ModelLayout::MaxTdnn { filter } => alloc::vec![*filter],
        ModelLayout::Nbow => {
            return Err(invalid_arg!("NBoW has no convolution filters to inspect"))
        }
    };
    let table = &store.get(layout.embed).value;
    let rows = net.spec().embed_dim;
    let width = net.spec().layers[0].width;

    let mut sets: Vec<TopSet> = (0..filter_indices.len() * rows)
        .map(|_| TopSet::new(top_n))
        .collect();
    for sentence in sentences {
        if sentence.len() < width {
            continue;
        }
        for &w in sentence {
            if w >= table.rows() {
                return Err(invalid_arg!("word id {w} outside vocabulary"));
            }
        }
        for start in 0..=sentence.len() - width {
            let gram = &sentence[start..start + width];
            for (j, &fidx) in filter_indices.iter().enumerate() {
                let weights = &store.get(fidx).value;
                for r in 0..rows {
                    let taps = weights.row(r);
                    let mut act = 0.0;
                    for (t, &w) in gram.iter().enumerate() {
                        act += taps[t] * table.get(w, r);
                    }
                    sets[j * rows + r].offer(act, gram);
                }
            }
        }
    }
    let mut reports = Vec::with_capacity(sets.len());
    for (i, set) in sets.into_iter().enumerate() {
        reports.push(DetectorReport {
            map: i / rows,
            row: i % rows,
            top: set.into_sorted(),
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::{conv_rows, ConvKind, FilterMat};
    use crate::network::{embed, ConvLayerSpec, ModelKind, NetworkSpec};
    use crate::numerics::{Mat, Rng};
    use alloc::vec;

    fn small_net(maps: usize, width: usize) -> Network {
        Network::new(NetworkSpec::dcnn(
            4,
            vec![ConvLayerSpec { width, maps, fold: false }],
            2,
            2,
            0.0,
        ))
        .unwrap()
    }

    fn rand_sentences(rng: &mut Rng, vocab: usize, n: usize, len: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|_| (0..len).map(|_| 2 + rng.below(vocab - 2)).collect())
            .collect()
    }

    #[test]
    fn report_count_is_maps_times_rows() {
        let net = small_net(3, 2);
        let mut rng = Rng::new(1);
        let store = net.init_params(10, &mut rng).unwrap();
        let sentences = rand_sentences(&mut rng, 10, 4, 6);
        let reports = top_ngrams(&net, &store, &sentences, 5).unwrap();
        assert_eq!(reports.len(), 3 * 4);
        assert_eq!((reports[0].map, reports[0].row), (0, 0));
        assert_eq!((reports[4].map, reports[4].row), (1, 0));
    }

    #[test]
    fn single_window_sentence_is_the_only_candidate() {
        let net = small_net(2, 3);
        let mut rng = Rng::new(2);
        let store = net.init_params(9, &mut rng).unwrap();
        let sentences = vec![vec![4, 7, 2]];
        let reports = top_ngrams(&net, &store, &sentences, 5).unwrap();
        for report in &reports {
            assert_eq!(report.top.len(), 1);
            assert_eq!(report.top[0].words, vec![4, 7, 2]);
        }
    }

    #[test]
    fn sentences_shorter_than_the_filter_are_skipped() {
        let net = small_net(2, 3);
        let mut rng = Rng::new(3);
        let store = net.init_params(9, &mut rng).unwrap();
        let reports = top_ngrams(&net, &store, &[vec![4, 7]], 5).unwrap();
        assert!(reports.iter().all(|r| r.top.is_empty()));
    }

    #[test]
    fn constructed_center_filter_prefers_the_marked_token() {
        // Embedding of token X dominates every row; a filter whose center
        // tap carries E[X] (zeros elsewhere) responds most to windows with X
        // in the middle.
        let net = small_net(1, 3);
        let mut rng = Rng::new(4);
        let mut store = net.init_params(12, &mut rng).unwrap();
        let x = 5usize;
        {
            let table = &mut store.get_mut(net.layout().embed).value;
            for w in 0..12 {
                for d in 0..4 {
                    table.set(w, d, rng.uniform(-0.5, 0.5));
                }
            }
            for d in 0..4 {
                table.set(x, d, 10.0);
            }
        }
        {
            let table = store.get(net.layout().embed).value.clone();
            let crate::network::ModelLayout::Dcnn { conv } = &net.layout().model else {
                panic!("expected a DCNN layout");
            };
            let weights = &mut store.get_mut(conv[0].filters[0][0]).value;
            weights.fill(0.0);
            for d in 0..4 {
                weights.set(d, 1, table.get(x, d));
            }
        }
        let mut sentences = rand_sentences(&mut rng, 12, 6, 7);
        for (i, s) in sentences.iter_mut().enumerate() {
            s[2 + i % 3] = x;
        }
        let reports = top_ngrams(&net, &store, &sentences, 3).unwrap();
        for report in &reports {
            assert_eq!(report.top[0].words[1], x, "detector row {}", report.row);
        }
    }

    #[test]
    fn activations_match_a_conv_rows_recomputation() {
        let net = small_net(2, 3);
        let mut rng = Rng::new(5);
        let store = net.init_params(15, &mut rng).unwrap();
        let sentences = rand_sentences(&mut rng, 15, 8, 9);
        let reports = top_ngrams(&net, &store, &sentences, 4).unwrap();
        let crate::network::ModelLayout::Dcnn { conv } = &net.layout().model else {
            panic!("expected a DCNN layout");
        };
        let table = &store.get(net.layout().embed).value;
        for report in &reports {
            for hit in &report.top {
                let gram = embed(&hit.words, table).unwrap();
                let weights = FilterMat::new(&store.get(conv[0].filters[report.map][0]).value).unwrap();
                let response = conv_rows(&gram, &weights, ConvKind::Narrow).unwrap();
                assert!((response.get(report.row, 0) - hit.activation).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn smaller_top_lists_are_prefixes_of_larger_ones() {
        let net = small_net(2, 2);
        let mut rng = Rng::new(6);
        let store = net.init_params(10, &mut rng).unwrap();
        let sentences = rand_sentences(&mut rng, 10, 10, 8);
        let four = top_ngrams(&net, &store, &sentences, 4).unwrap();
        let five = top_ngrams(&net, &store, &sentences, 5).unwrap();
        for (a, b) in four.iter().zip(&five) {
            assert_eq!(a.top.as_slice(), &b.top[..a.top.len()]);
        }
    }

    #[test]
    fn duplicate_windows_collapse_to_one_entry() {
        let net = small_net(1, 2);
        let mut rng = Rng::new(7);
        let store = net.init_params(8, &mut rng).unwrap();
        // The same sentence twice: every window occurs twice.
        let sentences = vec![vec![3, 4, 5], vec![3, 4, 5]];
        let reports = top_ngrams(&net, &store, &sentences, 5).unwrap();
        for report in &reports {
            assert_eq!(report.top.len(), 2); // windows [3,4] and [4,5]
            assert_ne!(report.top[0].words, report.top[1].words);
        }
    }

    #[test]
    fn deterministic_given_store_and_corpus() {
        let net = small_net(2, 3);
        let mut rng = Rng::new(8);
        let store = net.init_params(12, &mut rng).unwrap();
        let sentences = rand_sentences(&mut rng, 12, 6, 7);
        let a = top_ngrams(&net, &store, &sentences, 5).unwrap();
        let b = top_ngrams(&net, &store, &sentences, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nbow_and_bad_arguments_are_rejected() {
        let nbow = Network::new(NetworkSpec::nbow(4, 2)).unwrap();
        let store = nbow.init_params(6, &mut Rng::new(0)).unwrap();
        assert!(top_ngrams(&nbow, &store, &[vec![2, 3]], 5).is_err());

        let net = small_net(1, 2);
        let store = net.init_params(6, &mut Rng::new(0)).unwrap();
        assert!(top_ngrams(&net, &store, &[vec![2, 3]], 0).is_err());
        assert!(top_ngrams(&net, &store, &[vec![2, 9]], 5).is_err());
        assert_eq!(net.spec().kind, ModelKind::Dcnn);
    }
}
