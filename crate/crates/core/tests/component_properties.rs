//! Property tests for the sketch, change detector, text pipeline,
//! evaluator and learners, each against a brute-force oracle.

use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use sentistream::changedetect::{AdaptiveWindow, MAX_BUCKETS_PER_ROW};
use sentistream::cli::SyntheticSpec;
use sentistream::eval::SlidingWindowEvaluator;
use sentistream::instance::{Label, SparseInstance};
use sentistream::learners::{HoeffdingTree, NaiveBayes, OnlineLearner, TreeParams};
use sentistream::sketch::SpaceSaving;
use sentistream::textpipe::{
    label_by_emoticons, reduce_features, AdmitAll, Document, PipelineConfig, TextPipeline, Vocabulary,
};
use sentistream::vht::{VerticalTree, VhtParams};

fn label() -> impl Strategy<Value = Label> {
    (0usize..3).prop_map(Label::from_index)
}

fn binary_label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Negative), Just(Label::Positive)]
}

fn instance() -> impl Strategy<Value = SparseInstance> {
    (proptest::collection::vec(0u32..30, 0..8), binary_label())
        .prop_map(|(attrs, l)| SparseInstance::presence(attrs, Some(l)))
}

proptest! {
    #[test]
    fn space_saving_invariants(stream in proptest::collection::vec(0u16..60, 1..400), k in 1usize..20) {
        let mut sketch = SpaceSaving::new(k);
        let mut exact: HashMap<u16, u64> = HashMap::new();
        for (i, &x) in stream.iter().enumerate() {
            sketch.offer(x);
            *exact.entry(x).or_default() += 1;
            let n = i as u64 + 1;
            let mut sum = 0;
            for e in sketch.iter() {
                sum += e.count;
                let truth = exact[e.item];
                prop_assert!(e.count - e.error <= truth && truth <= e.count);
                prop_assert!(e.error <= n / k as u64);
            }
            prop_assert_eq!(sum, n);
            let monitored: HashSet<u16> = sketch.iter().map(|e| *e.item).collect();
            for (item, &c) in &exact {
                if !monitored.contains(item) {
                    prop_assert!(c <= sketch.min_count());
                }
            }
        }
        let top = sketch.top(k);
        prop_assert!(top.windows(2).all(|w| w[0].count >= w[1].count));
        let filter = sketch.top_filter(k / 2);
        let members: HashSet<u16> = sketch.top(k / 2).into_iter().map(|e| e.item).collect();
        for e in sketch.iter() {
            prop_assert_eq!(sketch.in_top(e.item, &filter), members.contains(e.item));
        }
    }

    #[test]
    fn adaptive_window_structure(bits in proptest::collection::vec(any::<bool>(), 1..3000)) {
        let mut adwin = AdaptiveWindow::new(0.002).unwrap();
        for (i, &b) in bits.iter().enumerate() {
            adwin.update(f64::from(u8::from(b))).unwrap();
            prop_assert!(adwin.width() <= i as u64 + 1);
            prop_assert!(adwin.row_lengths().iter().all(|&r| r <= MAX_BUCKETS_PER_ROW));
            let m = adwin.mean().unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
        }
    }

    #[test]
    fn idf_incremental_matches_batch(docs in proptest::collection::vec(
        proptest::collection::vec(0u8..25, 1..10), 1..60)
    ) {
        let docs: Vec<Vec<String>> = docs
            .into_iter()
            .map(|d| d.into_iter().map(|t| format!("w{t}")).collect())
            .collect();
        let mut vocab = Vocabulary::new();
        for n in 1..=docs.len() {
            vocab.vectorize(&docs[n - 1]).unwrap();
            let mut df: HashMap<&str, u64> = HashMap::new();
            for d in &docs[..n] {
                for t in d.iter().map(String::as_str).collect::<HashSet<_>>() {
                    *df.entry(t).or_default() += 1;
                }
            }
            for (t, c) in df {
                let batch = (n as f64 / c as f64).ln();
                prop_assert!((vocab.idf(vocab.id(t).unwrap()) - batch).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn reduce_is_idempotent(text in "[ a-z@:/.]{0,60}") {
        let once = reduce_features(&text);
        prop_assert_eq!(reduce_features(&once), once.clone());
        prop_assert_eq!(once.split_whitespace().count(), text.split_whitespace().count());
    }

    #[test]
    fn emoticon_stripping_is_complete(words in proptest::collection::vec(
        prop_oneof!["[a-z]{1,6}", Just(":)".to_string()), Just(":(".to_string()), Just(":D".to_string())], 0..12)
    ) {
        let text = words.join(" ");
        let (label, stripped) = label_by_emoticons(&text);
        let pos = words.iter().any(|w| w == ":)" || w == ":D");
        let neg = words.iter().any(|w| w == ":(");
        let expected = match (pos, neg) {
            (true, false) => Some(Label::Positive),
            (false, true) => Some(Label::Negative),
            _ => None,
        };
        prop_assert_eq!(label, expected);
        let (again, rest) = label_by_emoticons(&stripped);
        prop_assert_eq!(again, None);
        prop_assert_eq!(rest, stripped.clone());
        let plain: Vec<&String> = words.iter().filter(|w| w.chars().all(|c| c.is_ascii_lowercase())).collect();
        prop_assert_eq!(stripped.split_whitespace().count(), plain.len());
    }

    #[test]
    fn window_metrics_match_brute_force(
        pairs in proptest::collection::vec((label(), label()), 1..300),
        window in 1usize..80,
    ) {
        let mut ev = SlidingWindowEvaluator::new(window);
        for &(p, a) in &pairs {
            ev.record(p, a);
        }
        let recent = &pairs[pairs.len().saturating_sub(window)..];
        let n = recent.len() as f64;
        let agree = recent.iter().filter(|(p, a)| p == a).count() as f64 / n;
        let pe: f64 = Label::ALL
            .iter()
            .map(|&c| {
                let a = recent.iter().filter(|x| x.1 == c).count() as f64 / n;
                let p = recent.iter().filter(|x| x.0 == c).count() as f64 / n;
                a * p
            })
            .sum();
        let m = ev.metrics();
        prop_assert_eq!(m.instances_in_window, recent.len() as u64);
        prop_assert!((m.accuracy.unwrap() - agree).abs() <= 1e-12);
        match m.kappa {
            Some(k) => prop_assert!((k - (agree - pe) / (1.0 - pe)).abs() <= 1e-12),
            None => prop_assert!(pe >= 1.0 - 1e-12),
        }
    }

    #[test]
    fn naive_bayes_is_order_independent(data in proptest::collection::vec(instance(), 1..40), query in instance()) {
        let mut forward = NaiveBayes::new(1.0);
        let mut backward = NaiveBayes::new(1.0);
        for x in &data {
            forward.train(x).unwrap();
        }
        for x in data.iter().rev() {
            backward.train(x).unwrap();
        }
        let (a, b) = (forward.scores(&query).unwrap(), backward.scores(&query).unwrap());
        for c in 0..3 {
            prop_assert!(a[c] == b[c] || (a[c] - b[c]).abs() <= 1e-9);
        }
        for l in Label::ALL {
            for attr in 0..30 {
                prop_assert!((forward.mass(l, attr) - backward.mass(l, attr)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn vertical_tree_matches_sequential(data in proptest::collection::vec(instance(), 1..400), p in 1usize..5) {
        let params = TreeParams { grace_period: 10, ..TreeParams::default() };
        let mut ht = HoeffdingTree::new(params);
        let mut vht = VerticalTree::new(VhtParams::new(params, p));
        for x in &data {
            prop_assert_eq!(vht.process(x).unwrap(), ht.predict(x));
            ht.train(x).unwrap();
        }
        prop_assert_eq!(vht.shape(), ht.shape());
    }
}

#[test]
fn hapax_tokens_are_not_selected_after_warm_up() {
    let config = PipelineConfig {
        sketch_capacity: 500,
        top_k: 200,
        vocabulary_cap: None,
    };
    let mut pipeline = TextPipeline::with_filter(config, Box::new(AdmitAll));
    let spec: SyntheticSpec = "instances=10000".parse().unwrap();
    let mut exact: HashMap<String, u64> = HashMap::new();
    for d in spec.generate(4) {
        for t in d.text.split_whitespace() {
            *exact.entry(t.to_string()).or_default() += 1;
        }
        pipeline.process(&d);
    }
    let doc = Document {
        id: "probe".into(),
        text: "qxzyhapax wordoncejk".into(),
        ..Document::default()
    };
    let x = pipeline.process(&doc).expect("two tokens survive");
    assert!(x.instance.is_empty(), "{:?}", x.instance);
    // The reported head is made of genuinely frequent tokens.
    let mut truth: Vec<(&String, &u64)> = exact.iter().collect();
    truth.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let true_top: HashSet<&str> = truth.iter().take(20).map(|t| t.0.as_str()).collect();
    let hits = pipeline
        .top_tokens(20)
        .iter()
        .filter(|(t, _, _)| true_top.contains(t.as_str()))
        .count();
    assert!(hits >= 18, "{hits}");
}

#[test]
fn state_is_flat_once_the_vocabulary_is_full() {
    let config = PipelineConfig {
        sketch_capacity: 400,
        top_k: 400,
        vocabulary_cap: Some(300),
    };
    let mut pipeline = TextPipeline::with_filter(config, Box::new(AdmitAll));
    let mut nb = NaiveBayes::new(1.0);
    let spec: SyntheticSpec = "instances=30000,vocab=600".parse().unwrap();
    let mut sizes = Vec::new();
    for (i, d) in spec.generate(6).enumerate() {
        if let Some(p) = pipeline.process(&d) {
            nb.train(&p.instance.with_label(d.label)).unwrap();
        }
        if (i + 1) % 3000 == 0 {
            sizes.push(pipeline.state_bytes() + nb.state_bytes());
        }
    }
    assert!(sizes.windows(2).all(|w| w[0] == w[1]), "{sizes:?}");
}

#[test]
fn every_learner_answers_after_one_instance() {
    let x = SparseInstance::presence(vec![4], Some(Label::Positive));
    let mut learners: Vec<Box<dyn OnlineLearner>> = vec![
        Box::new(NaiveBayes::new(1.0)),
        Box::new(HoeffdingTree::new(TreeParams::default())),
        Box::new(VerticalTree::new(VhtParams::new(TreeParams::default(), 2))),
    ];
    for l in &mut learners {
        l.train(&x).unwrap();
        assert_eq!(l.predict(&x), Label::Positive, "{}", l.name());
    }
}
