mod common;

use std::collections::{HashMap, HashSet};

use uniwalk::eval::train_uniwalk;
use uniwalk::recommender::{Explainer, Thresholds};
use uniwalk::report::ExplanationReport;
use uniwalk::trainer::Hyperparams;
use uniwalk::TrainedModel;

struct Trained {
    model: TrainedModel,
    ratings: HashMap<(String, String), f64>,
    friends: HashSet<(String, String)>,
}

fn trained() -> Trained {
    let data = common::synthetic_small(21);
    let hp = Hyperparams {
        iterations: 4,
        walks_per_node: 4,
        validation_fraction: 0.0,
        seed: 5,
        ..Hyperparams::filmtrust()
    };
    let (model, _) = train_uniwalk(&data.ratings, &data.social, &hp, 0).unwrap();
    let ratings = data.ratings.iter().map(|r| ((r.user.clone(), r.item.clone()), r.value)).collect();
    let friends = data
        .social
        .iter()
        .flat_map(|e| [(e.a.clone(), e.b.clone()), (e.b.clone(), e.a.clone())])
        .collect();
    Trained { model, ratings, friends }
}

fn rating(t: &Trained, u: &str, i: &str) -> Option<f64> {
    t.ratings.get(&(u.to_owned(), i.to_owned())).copied()
}

fn descending(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] >= w[1])
}

/// Every claim in the report checked against the raw training data.
fn check_report(t: &Trained, r: &ExplanationReport, n: usize, k: usize, th: Thresholds) {
    let u = r.target_user.as_str();
    assert!(r.recommended_items.len() <= n);
    let recommended: HashSet<&str> = r.recommended_items.iter().map(|x| x.item.as_str()).collect();
    assert_eq!(recommended.len(), r.recommended_items.len());
    for x in &r.recommended_items {
        assert!(rating(t, u, &x.item).is_none(), "recommended an item {u} already rated");
        assert!((t.model.stats.min_r..=t.model.stats.max_r).contains(&x.predicted_rating));
    }
    assert!(descending(&r.recommended_items.iter().map(|x| x.predicted_rating).collect::<Vec<_>>()));

    assert!(r.reason_similar_users.len() <= k);
    assert!(descending(&r.reason_similar_users.iter().map(|x| x.sim).collect::<Vec<_>>()));
    for s in &r.reason_similar_users {
        assert_ne!(s.user, u);
        assert!(s.sim > 0.0 && s.sim <= 1.0);
        assert_eq!(s.is_friend, t.friends.contains(&(u.to_owned(), s.user.clone())));
        assert!(!s.their_ratings.is_empty(), "similar user rated no recommended item");
        for ir in &s.their_ratings {
            assert!(recommended.contains(ir.item.as_str()));
            assert_eq!(rating(t, &s.user, &ir.item), Some(ir.rating));
        }
    }

    assert_eq!(r.meta_user_explanations.len(), r.reason_similar_users.len());
    for m in &r.meta_user_explanations {
        for f in &m.common_friends {
            assert!(t.friends.contains(&(u.to_owned(), f.clone())) && t.friends.contains(&(m.user.clone(), f.clone())));
        }
        for c in &m.common_favorites {
            assert_eq!(rating(t, u, &c.item), Some(c.target_rating));
            assert_eq!(rating(t, &m.user, &c.item), Some(c.other_rating));
            assert!(c.target_rating >= th.high && c.other_rating >= th.high);
        }
        for c in &m.common_dislikes {
            assert_eq!(rating(t, u, &c.item), Some(c.target_rating));
            assert_eq!(rating(t, &m.user, &c.item), Some(c.other_rating));
            assert!(c.target_rating < th.low && c.other_rating < th.low);
        }
    }

    assert_eq!(r.reason_similar_items.len(), r.recommended_items.len());
    for s in &r.reason_similar_items {
        assert!(recommended.contains(s.recommended_item.as_str()));
        assert!(s.similar_items.len() <= k);
        assert!(descending(&s.similar_items.iter().map(|x| x.sim).collect::<Vec<_>>()));
        for j in &s.similar_items {
            assert!(j.sim > 0.0 && j.sim <= 1.0);
            assert_eq!(rating(t, u, &j.item), Some(j.target_rating));
        }
    }
    for m in &r.meta_item_explanations {
        for a in &m.common_admirers {
            assert_eq!(rating(t, &a.user, &m.recommended_item), Some(a.recommended_rating));
            assert_eq!(rating(t, &a.user, &m.similar_item), Some(a.similar_rating));
            assert!(a.recommended_rating >= th.high && a.similar_rating >= th.high);
        }
    }
}

#[test]
fn reports_are_grounded_in_the_training_data() {
    let t = trained();
    let ex = Explainer::new(&t.model).unwrap();
    let th = Thresholds::midpoint(t.model.stats.min_r, t.model.stats.max_r);
    let mut explained = 0;
    for user in ["1", "2", "3", "10", "40", "77"] {
        for (n, k) in [(1, 1), (5, 3), (20, 10)] {
            let report = ex.build_report(user, n, k, th).unwrap();
            check_report(&t, &report, n, k, th);
            explained += report.reason_similar_users.len();
            assert_eq!(ExplanationReport::from_json(&report.to_json()).unwrap(), report);
        }
    }
    assert!(explained > 0, "no similar users in any report");
}

#[test]
fn custom_thresholds_are_respected() {
    let t = trained();
    let ex = Explainer::new(&t.model).unwrap();
    let th = Thresholds { high: 3.5, low: 1.5 };
    for user in ["4", "5", "6"] {
        check_report(&t, &ex.build_report(user, 10, 5, th).unwrap(), 10, 5, th);
    }
}

#[test]
fn cold_user_gets_recommendations_only() {
    let t = trained();
    let ex = Explainer::new(&t.model).unwrap();
    let th = Thresholds::midpoint(t.model.stats.min_r, t.model.stats.max_r);
    let r = ex.build_report("never-seen", 5, 3, th).unwrap();
    assert!(r.cold_user);
    assert_eq!(r.recommended_items.len(), 5);
    assert!(r.reason_similar_users.is_empty() && r.reason_similar_items.is_empty());
    assert!(r.meta_user_explanations.is_empty() && r.meta_item_explanations.is_empty());
}

#[test]
fn bounds_are_arguments() {
    let t = trained();
    let ex = Explainer::new(&t.model).unwrap();
    let th = Thresholds::midpoint(t.model.stats.min_r, t.model.stats.max_r);
    assert_eq!(ex.build_report("1", 0, 3, th).unwrap_err().exit_code(), 2);
    assert_eq!(ex.build_report("1", 3, 0, th).unwrap_err().exit_code(), 2);
}
