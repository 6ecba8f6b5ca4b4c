mod common;

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;

use uniwalk::eval::{mae, rmse};
use uniwalk::graph::{LinkKind, WalkKind};
use uniwalk::ingest::{EntityId, EntityIndex, RatingRecord, SocialEdge};
use uniwalk::model::{TrainedModel, TrainingEdges};
use uniwalk::trainer::{train, Hyperparams, TrainingSet};
use uniwalk::{build_unified_graph, kfold_split, similarity, CoocCounts};

/// Ratings on a small id space, deduplicated by (user, item).
fn arb_ratings() -> impl Strategy<Value = Vec<RatingRecord>> {
    prop::collection::vec((0u8..8, 0u8..8, 0u8..8), 1..40).prop_map(|raw| {
        let mut seen = BTreeSet::new();
        raw.into_iter()
            .filter(|&(u, i, _)| seen.insert((u, i)))
            .map(|(u, i, r)| RatingRecord::new(format!("u{u}"), format!("i{i}"), 0.5 + f64::from(r) * 0.5))
            .collect()
    })
}

fn arb_social() -> impl Strategy<Value = Vec<SocialEdge>> {
    prop::collection::vec((0u8..10, 0u8..10), 0..15).prop_map(|raw| {
        let mut seen = BTreeSet::new();
        raw.into_iter()
            .filter_map(|(a, b)| SocialEdge::new(format!("u{a}"), format!("u{b}")))
            .filter(|e| seen.insert((e.a.clone(), e.b.clone())))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rmse_is_at_least_mae(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..60)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (r, m) = (rmse(&p, &t).unwrap(), mae(&p, &t).unwrap());
        prop_assert!(r + 1e-12 >= m, "rmse {} < mae {}", r, m);
    }

    #[test]
    fn folds_partition_the_ratings(n in 5usize..200, k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let items = vec![(); n];
        let split = kfold_split(&items, k, seed).unwrap();
        let mut seen = vec![0usize; n];
        for f in 0..k {
            let test = split.test_indices(f);
            let train = split.train_indices(f);
            prop_assert_eq!(test.len() + train.len(), n);
            let t: BTreeSet<_> = test.iter().collect();
            prop_assert!(train.iter().all(|i| !t.contains(i)));
            test.iter().for_each(|&i| seen[i] += 1);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes = split.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(pairs in prop::collection::vec((0u32..12, 0u32..12), 0..80)) {
        let pairs: Vec<(EntityId, EntityId)> = pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (EntityId(a), EntityId(b)))
            .collect();
        let mut counts = CoocCounts::new();
        pairs.iter().for_each(|&(a, b)| counts.add(a, b));
        let (joint, single) = common::brute_force_counts(&pairs);
        for v in 0..12 {
            for w in 0..12 {
                if v == w {
                    continue;
                }
                let (v, w) = (EntityId(v), EntityId(w));
                let s = similarity(&counts, v, w).unwrap();
                prop_assert_eq!(s.to_bits(), similarity(&counts, w, v).unwrap().to_bits());
                prop_assert!((0.0..=1.0).contains(&s));
                let key = if v <= w { (v, w) } else { (w, v) };
                let want = joint.get(&key).map_or(0.0, |&n| n as f64 / (single[&v] as f64 * single[&w] as f64));
                prop_assert_eq!(s, want);
            }
        }
    }

    #[test]
    fn unified_graph_is_symmetric(ratings in arb_ratings(), social in arb_social(), c in 0.1f64..10.0) {
        let index = EntityIndex::from_data(&ratings, &social);
        let g = build_unified_graph(&ratings, &social, c, &index).unwrap();
        let mut score = 0;
        for v in g.nodes() {
            for e in g.neighbors(v) {
                let back = g.neighbors(e.to).iter().find(|x| x.to == v);
                prop_assert!(back.is_some_and(|b| b.weight == e.weight && b.link == e.link));
                if e.link == LinkKind::Score {
                    score += 1;
                    prop_assert_ne!(g.kind(v), g.kind(e.to));
                } else {
                    prop_assert_eq!(e.weight, c);
                }
            }
        }
        prop_assert_eq!(score, 2 * ratings.len());
        for r in &ratings {
            let (u, i) = (index.user(&r.user).unwrap(), index.item(&r.item).unwrap());
            prop_assert_eq!(g.rating(u, i), Some(r.value));
            prop_assert_eq!(g.rating(i, u), Some(r.value));
        }
    }

    #[test]
    fn transition_rows_are_distributions(ratings in arb_ratings(), social in arb_social()) {
        let index = EntityIndex::from_data(&ratings, &social);
        let g = build_unified_graph(&ratings, &social, 5.0, &index).unwrap();
        for kind in [WalkKind::Positive, WalkKind::Negative, WalkKind::Unweighted] {
            let table = g.transition_table(kind);
            for v in g.nodes() {
                let p = table.probabilities(v);
                prop_assert_eq!(p.len(), g.degree(v));
                if !p.is_empty() {
                    prop_assert!(p.iter().all(|&x| x >= 0.0));
                    prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trained_models_round_trip(ratings in arb_ratings(), social in arb_social(), seed in any::<u64>()) {
        let hp = Hyperparams {
            dim: 3,
            walk_length: 6,
            window: 2,
            walks_per_node: 2,
            iterations: 2,
            seed,
            ..Hyperparams::filmtrust()
        };
        let set = TrainingSet::build(&ratings, &social, hp.c).unwrap();
        let out = train(&set, &hp, None).unwrap();
        let model = TrainedModel {
            edges: TrainingEdges::from_graph(&set.graph),
            index: set.index,
            params: out.params,
            cooc: out.cooc,
            stats: set.stats,
        };
        let bytes = model.to_bytes().unwrap();
        let back = TrainedModel::read_from(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        // the stored edges give back the training data
        let (r, s) = back.edges.records(&back.index);
        let key = |x: &RatingRecord| ((x.user.clone(), x.item.clone()), x.value);
        let want: HashMap<_, _> = ratings.iter().map(key).collect();
        let got: HashMap<_, _> = r.iter().map(key).collect();
        prop_assert_eq!(got, want);
        prop_assert_eq!(s.len(), social.len());
    }
}
