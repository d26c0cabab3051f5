//! Property tests for invariants that should hold on any input.

use b3sum_core::checkpoint::{decode_checkpoint, encode_checkpoint};
use b3sum_core::classifier::{ClassifierDims, ClassifierParams};
use b3sum_core::corpus::{split, synth_generate, SplitSizes, SynthConfig, VocabMode, Vocabulary};
use b3sum_core::eval::{pairwise_align, rouge_l, rouge_n, PATTERNS};
use b3sum_core::grad::{Buf, ParamStore, Tape, Tensor, ADAGRAD_INIT_ACC};
use b3sum_core::pipeline::auto_label_corpus;
use proptest::prelude::*;

fn tokens(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..=max)
        .prop_map(|v| v.into_iter().map(str::to_string).collect())
}

fn summary() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(tokens(6), 3)
}

proptest! {
    #[test]
    fn rouge_n_swaps_precision_and_recall(s in tokens(12), r in tokens(12), n in 1usize..=3) {
        let a = rouge_n(&s, &r, n);
        let b = rouge_n(&r, &s, n);
        prop_assert_eq!(a.precision, b.recall);
        prop_assert_eq!(a.recall, b.precision);
        prop_assert!((a.f1 - b.f1).abs() < 1e-15);
        for v in [a.precision, a.recall, a.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn rouge_l_is_symmetric_and_bounded(s in tokens(12), r in tokens(12)) {
        let a = rouge_l(&s, &r);
        let b = rouge_l(&r, &s);
        prop_assert_eq!(a.precision, b.recall);
        prop_assert!((a.f1 - b.f1).abs() < 1e-15);
        // an LCS is never longer than a clipped unigram match
        prop_assert!(a.f1 <= rouge_n(&s, &r, 1).f1 + 1e-15);
    }

    #[test]
    fn rouge_of_self_is_one(s in tokens(12).prop_filter("non-empty", |s| !s.is_empty())) {
        prop_assert_eq!(rouge_l(&s, &s).f1, 1.0);
        prop_assert_eq!(rouge_n(&s, &s, 1).f1, 1.0);
    }

    #[test]
    fn alignment_beats_every_bijection(sys in summary(), ora in summary()) {
        let best = pairwise_align(&sys, &ora).unwrap();
        for perm in PATTERNS {
            let mean = (0..3).map(|k| rouge_l(&sys[k], &ora[perm[k] - 1]).f1).sum::<f64>() / 3.0;
            prop_assert!(best.mean() >= mean);
            // a tied optimum never precedes the chosen pattern
            if mean == best.mean() {
                prop_assert!(perm >= best.perm);
            }
        }
        let mut digits = best.perm;
        digits.sort();
        prop_assert_eq!(digits, [1, 2, 3]);
    }

    #[test]
    fn softmax_rows_sum_to_one(data in prop::collection::vec(-30.0f64..30.0, 1..24), cols in 1usize..6) {
        let cols = cols.min(data.len());
        let rows = data.len() / cols;
        let data = data[..rows * cols].to_vec();
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.input_buf(Buf { rows, cols, data });
        let y = tape.softmax(x).unwrap();
        for row in tape.value(y).data.chunks(cols) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn checkpoint_round_trip(values in prop::collection::vec(prop::collection::vec(any::<f32>(), 1..10), 1..5), hash in any::<[u8; 32]>()) {
        let mut store = ParamStore::new();
        for (i, v) in values.iter().enumerate() {
            store.add(format!("p{i}.w"), Tensor::new(vec![v.len()], v.clone()).unwrap()).unwrap();
        }
        let bytes = encode_checkpoint(&store, &hash);
        let (back, h) = decode_checkpoint(&bytes).unwrap();
        prop_assert_eq!(h, hash);
        prop_assert_eq!(encode_checkpoint(&back, &h), bytes);
    }

    #[test]
    fn clipping_bounds_the_global_norm(grads in prop::collection::vec(-50.0f32..50.0, 1..20), max_norm in 0.1f64..10.0) {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::zeros(&[grads.len()])).unwrap();
        store.get_mut(id).grad.data_mut().copy_from_slice(&grads);
        let before = store.grad_norm();
        let factor = store.clip_global_norm(max_norm);
        prop_assert!(store.grad_norm() <= max_norm * (1.0 + 1e-6));
        prop_assert!(factor <= 1.0);
        if before <= max_norm {
            prop_assert_eq!(factor, 1.0);
        }
    }

    #[test]
    fn adagrad_accumulators_never_shrink(steps in prop::collection::vec(prop::collection::vec(-5.0f32..5.0, 4), 1..8)) {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::zeros(&[4])).unwrap();
        let mut prev = vec![ADAGRAD_INIT_ACC; 4];
        for g in steps {
            store.get_mut(id).grad.data_mut().copy_from_slice(&g);
            store.adagrad_step(0.15);
            let acc = store.get(id).adagrad_acc.data().to_vec();
            for (a, p) in acc.iter().zip(&prev) {
                prop_assert!(a >= p);
            }
            prop_assert!(store.get(id).grad.data().iter().all(|&g| g == 0.0));
            prev = acc;
        }
    }

    #[test]
    fn vocabulary_ids_round_trip(seed in any::<u64>(), min_count in 1usize..4) {
        let pairs = synth_generate(&SynthConfig { seed, n: 15, oov_rate: 0.3, structure_mix: 0.5 });
        let vocab = Vocabulary::build(&pairs, VocabMode::MinCount(min_count)).unwrap();
        let specials = Vocabulary::specials_only();
        prop_assert_eq!(&vocab.tokens()[..specials.len()], specials.tokens());
        for (i, t) in vocab.tokens().iter().enumerate() {
            prop_assert_eq!(vocab.get(t), Some(i));
            prop_assert_eq!(vocab.token(i), Some(t.as_str()));
        }
    }

    #[test]
    fn split_is_a_partition(n in 3usize..60, seed in any::<u64>()) {
        let pairs = synth_generate(&SynthConfig { seed, n, oov_rate: 0.1, structure_mix: 0.5 });
        let sizes = SplitSizes::reference_proportions(n);
        prop_assert_eq!(sizes.total(), n);
        let s = split(&pairs, sizes, seed).unwrap();
        let mut ids: Vec<_> = s.train.iter().chain(&s.dev).chain(&s.test).map(|p| p.id.clone()).collect();
        ids.sort();
        let mut all: Vec<_> = pairs.iter().map(|p| p.id.clone()).collect();
        all.sort();
        prop_assert_eq!(ids, all);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn auto_label_partitions_and_respects_tau(seed in any::<u64>(), tau in 0.5f64..1.0) {
        let pairs = synth_generate(&SynthConfig { seed, n: 20, oov_rate: 0.1, structure_mix: 0.5 });
        let vocab = Vocabulary::build(&pairs, VocabMode::MinCount(1)).unwrap();
        let cls = ClassifierParams::new(ClassifierDims { vocab_size: vocab.len(), emb_dim: 4, hidden_dim: 4 }, seed).unwrap();
        let out = auto_label_corpus(&cls, &vocab, &pairs, tau).unwrap();
        let c = out.counts();
        prop_assert_eq!(c.parallel + c.sequence + c.unlabeled, pairs.len());
        for label in [b3sum_core::corpus::StructureType::Parallel, b3sum_core::corpus::StructureType::Sequence] {
            for p in out.subset(label) {
                prop_assert_eq!(p.label.map(|l| l.binary()), Some(label));
                let ids = vocab.ids(&p.summary_with_boundaries());
                let r = cls.classify(&ids).unwrap();
                prop_assert!(r.p_parallel.max(r.p_sequence) >= tau);
            }
        }
        // below-threshold pairs keep their original label
        for p in &out.rest {
            prop_assert!(pairs.iter().any(|q| q == p));
        }
    }
}
