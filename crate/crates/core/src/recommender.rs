//! Rating prediction, top-N recommendation and two-reason explanations.
//!
//! A recommendation for user `u` is explained by users similar to `u` who
//! rated the recommended items, and by items `u` rated that are similar to
//! the recommended ones. Similarity is walk co-occurrence over similar pairs:
//! `sim(v, w) = #(v, w) / (#v · #w)`. Meta-explanations list the shared
//! friends and shared likes/dislikes behind a similar user, and the common
//! admirers behind a similar item.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::UnifiedGraph;
use crate::ingest::{EntityId, EntityKind};
use crate::model::TrainedModel;
use crate::pairs::CoocCounts;
use crate::report::{
    Admirer, ExplanationReport, ItemMeta, ItemRating, RecommendedItem, SharedRating, SimilarItem, SimilarItemsFor,
    SimilarUser, UserMeta, SCHEMA_VERSION,
};

/// Predict `u`'s rating of `i` by external ids; unknown entities fall back toward μ.
pub fn predict(model: &TrainedModel, user: &str, item: &str, clamp: bool) -> f64 {
    let raw = model.params.predict_partial(model.index.user(user), model.index.item(item));
    if clamp {
        model.stats.clamp(raw)
    } else {
        raw
    }
}

/// `#(v,w) / (#v · #w)`, 0 when the pair never co-occurred.
pub fn similarity(counts: &CoocCounts, v: EntityId, w: EntityId) -> Result<f64> {
    if v == w {
        return Err(Error::arg("similarity of an entity with itself"));
    }
    let joint = counts.pair(v, w);
    if joint == 0 {
        return Ok(0.0);
    }
    Ok(joint as f64 / (counts.total(v) as f64 * counts.total(w) as f64))
}

/// Thresholds for "liked" and "disliked" ratings in meta-explanations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Ratings at or above this are favorites.
    pub high: f64,
    /// Ratings strictly below this are dislikes.
    pub low: f64,
}

impl Thresholds {
    /// Both thresholds at the midpoint of the rating scale.
    pub fn midpoint(min_r: f64, max_r: f64) -> Self {
        let mid = (min_r + max_r) / 2.0;
        Self { high: mid, low: mid }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendations {
    pub items: Vec<(EntityId, f64)>,
    /// The user had no training profile; ranking is driven by item biases.
    pub cold_user: bool,
}

/// Entities with their similarity, most similar first.
pub type Ranked = Vec<(EntityId, f64)>;

/// Trained model joined with the training ratings and social edges it was built from.
pub struct Explainer<'a> {
    pub model: &'a TrainedModel,
    pub graph: UnifiedGraph,
    pub clamp: bool,
}

impl<'a> Explainer<'a> {
    /// Rebuild the training graph stored with the model.
    pub fn new(model: &'a TrainedModel) -> Result<Self> {
        // c only weights walks; explanations read ratings and friendships
        let graph = model.graph(1.0)?;
        Ok(Self { model, graph, clamp: true })
    }

    pub fn from_graph(model: &'a TrainedModel, graph: UnifiedGraph) -> Self {
        Self { model, graph, clamp: true }
    }

    fn shown(&self, raw: f64) -> f64 {
        if self.clamp {
            self.model.stats.clamp(raw)
        } else {
            raw
        }
    }

    fn items(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.model
            .index
            .entries()
            .filter(|(_, _, k)| *k == EntityKind::Item)
            .map(|(v, _, _)| v)
    }

    /// Unrated items by descending raw prediction, ties by ascending id.
    /// Returned ratings are clamped when `self.clamp` is set.
    pub fn recommend_top_n(&self, user: Option<EntityId>, n: usize) -> Result<Recommendations> {
        if n < 1 {
            return Err(Error::arg("n must be at least 1"));
        }
        let params = &self.model.params;
        let mut scored: Vec<(EntityId, f64)> = match user {
            Some(u) => {
                let rated: BTreeSet<EntityId> = self.graph.ratings_of(u).map(|(i, _)| i).collect();
                self.items()
                    .filter(|i| !rated.contains(i))
                    .map(|i| (i, params.predict_raw(u, i)))
                    .collect()
            }
            None => self.items().map(|i| (i, params.predict_partial(None, Some(i)))).collect(),
        };
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(n);
        for s in &mut scored {
            s.1 = self.shown(s.1);
        }
        Ok(Recommendations {
            items: scored,
            cold_user: user.is_none(),
        })
    }

    /// Users other than `u` who rated a recommended item, ranked by similarity to `u`.
    pub fn explain_similar_users(&self, u: EntityId, recommended: &[EntityId], k: usize) -> Result<Vec<(EntityId, f64)>> {
        if k < 1 {
            return Err(Error::arg("k must be at least 1"));
        }
        let candidates: BTreeSet<EntityId> = recommended
            .iter()
            .flat_map(|&i| self.graph.ratings_of(i).map(|(v, _)| v))
            .filter(|&v| v != u)
            .collect();
        rank_by_similarity(&self.model.cooc, u, candidates, k)
    }

    /// For each recommended item, items rated by `u` ranked by similarity to it.
    pub fn explain_similar_items(
        &self,
        u: EntityId,
        recommended: &[EntityId],
        k: usize,
    ) -> Result<Vec<(EntityId, Ranked)>> {
        if k < 1 {
            return Err(Error::arg("k must be at least 1"));
        }
        recommended
            .iter()
            .map(|&i| {
                let candidates: BTreeSet<EntityId> =
                    self.graph.ratings_of(u).map(|(j, _)| j).filter(|&j| j != i).collect();
                Ok((i, rank_by_similarity(&self.model.cooc, i, candidates, k)?))
            })
            .collect()
    }

    pub fn meta_explain_user_pair(&self, u: EntityId, v: EntityId, t: Thresholds) -> Result<UserPairMeta> {
        meta_explain_user_pair(&self.graph, u, v, t)
    }

    pub fn meta_explain_item_pair(&self, i: EntityId, j: EntityId, high: f64) -> Result<Vec<(EntityId, f64, f64)>> {
        meta_explain_item_pair(&self.graph, i, j, high)
    }

    /// Compose recommendations, both reasons and both meta-explanations.
    pub fn build_report(&self, user: &str, n: usize, k: usize, t: Thresholds) -> Result<ExplanationReport> {
        let index = &self.model.index;
        let name = |v: EntityId| index.external(v).to_owned();
        let u = index.user(user);
        let recs = self.recommend_top_n(u, n)?;
        let recommended: Vec<EntityId> = recs.items.iter().map(|(i, _)| *i).collect();
        let mut report = ExplanationReport {
            schema_version: SCHEMA_VERSION,
            target_user: user.to_owned(),
            cold_user: recs.cold_user,
            recommended_items: recs
                .items
                .iter()
                .map(|&(i, r)| RecommendedItem { item: name(i), predicted_rating: r })
                .collect(),
            reason_similar_users: Vec::new(),
            reason_similar_items: Vec::new(),
            meta_user_explanations: Vec::new(),
            meta_item_explanations: Vec::new(),
        };
        let Some(u) = u else {
            return Ok(report);
        };

        for (v, sim) in self.explain_similar_users(u, &recommended, k)? {
            let their_ratings = recommended
                .iter()
                .filter_map(|&i| self.graph.rating(v, i).map(|r| ItemRating { item: name(i), rating: r }))
                .collect();
            report.reason_similar_users.push(SimilarUser {
                user: name(v),
                sim,
                is_friend: self.graph.are_friends(u, v),
                their_ratings,
            });
            let meta = self.meta_explain_user_pair(u, v, t)?;
            let shared = |xs: Vec<(EntityId, f64, f64)>| {
                xs.into_iter()
                    .map(|(i, ru, rv)| SharedRating { item: name(i), target_rating: ru, other_rating: rv })
                    .collect()
            };
            report.meta_user_explanations.push(UserMeta {
                user: name(v),
                common_friends: meta.common_friends.into_iter().map(name).collect(),
                common_favorites: shared(meta.common_favorites),
                common_dislikes: shared(meta.common_dislikes),
            });
        }

        for (i, similar) in self.explain_similar_items(u, &recommended, k)? {
            let mut items = Vec::new();
            for (j, sim) in similar {
                let target_rating = self.graph.rating(u, j).expect("candidate was rated by the target");
                items.push(SimilarItem { item: name(j), sim, target_rating });
                let admirers = self
                    .meta_explain_item_pair(i, j, t.high)?
                    .into_iter()
                    .map(|(w, ri, rj)| Admirer { user: name(w), recommended_rating: ri, similar_rating: rj })
                    .collect();
                report.meta_item_explanations.push(ItemMeta {
                    recommended_item: name(i),
                    similar_item: name(j),
                    common_admirers: admirers,
                });
            }
            report.reason_similar_items.push(SimilarItemsFor { recommended_item: name(i), similar_items: items });
        }
        Ok(report)
    }
}

fn rank_by_similarity(
    counts: &CoocCounts,
    anchor: EntityId,
    candidates: impl IntoIterator<Item = EntityId>,
    k: usize,
) -> Result<Vec<(EntityId, f64)>> {
    let mut scored = Vec::new();
    for c in candidates {
        let s = similarity(counts, anchor, c)?;
        if s > 0.0 {
            scored.push((c, s));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Why two users look alike.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserPairMeta {
    pub common_friends: Vec<EntityId>,
    /// `(item, u's rating, v's rating)`
    pub common_favorites: Vec<(EntityId, f64, f64)>,
    pub common_dislikes: Vec<(EntityId, f64, f64)>,
}

pub fn meta_explain_user_pair(graph: &UnifiedGraph, u: EntityId, v: EntityId, t: Thresholds) -> Result<UserPairMeta> {
    if u == v {
        return Err(Error::arg("meta-explanation of a user with themself"));
    }
    let friends_v: BTreeSet<EntityId> = graph.friends_of(v).collect();
    let common_friends = graph.friends_of(u).filter(|f| friends_v.contains(f)).collect();
    let mut meta = UserPairMeta { common_friends, ..Default::default() };
    for (i, ru) in graph.ratings_of(u) {
        if let Some(rv) = graph.rating(v, i) {
            if ru >= t.high && rv >= t.high {
                meta.common_favorites.push((i, ru, rv));
            } else if ru < t.low && rv < t.low {
                meta.common_dislikes.push((i, ru, rv));
            }
        }
    }
    Ok(meta)
}

/// Users who rated both items at or above `high`: `(user, rating of i, rating of j)`.
pub fn meta_explain_item_pair(graph: &UnifiedGraph, i: EntityId, j: EntityId, high: f64) -> Result<Vec<(EntityId, f64, f64)>> {
    if i == j {
        return Err(Error::arg("meta-explanation of an item with itself"));
    }
    Ok(graph
        .ratings_of(i)
        .filter_map(|(w, ri)| graph.rating(w, j).map(|rj| (w, ri, rj)))
        .filter(|&(_, ri, rj)| ri >= high && rj >= high)
        .collect())
}
