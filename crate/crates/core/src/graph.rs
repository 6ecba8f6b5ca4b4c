//! The unified user/item graph and its per-walk-kind transition tables.
//!
//! Each rating becomes a user–item score edge weighted by the rating, each
//! friendship a user–user social edge weighted by `c`. Adjacency lists are
//! sorted by neighbor id so rating lookups are a binary search.

use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{EntityId, EntityIndex, EntityKind, RatingRecord, SocialEdge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    Score,
    Social,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: EntityId,
    pub weight: f64,
    pub link: LinkKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WalkKind {
    Positive,
    Negative,
    Unweighted,
}

impl WalkKind {
    /// Training order within one iteration.
    pub const ALL: [WalkKind; 3] = [WalkKind::Positive, WalkKind::Negative, WalkKind::Unweighted];

    pub fn as_str(self) -> &'static str {
        match self {
            WalkKind::Positive => "positive",
            WalkKind::Negative => "negative",
            WalkKind::Unweighted => "unweighted",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for WalkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for WalkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" | "+" => Ok(WalkKind::Positive),
            "negative" | "-" => Ok(WalkKind::Negative),
            "unweighted" | "0" => Ok(WalkKind::Unweighted),
            _ => Err(Error::arg(format!("unknown walk kind {s:?}"))),
        }
    }
}

/// Weighted undirected graph over users and items.
#[derive(Debug)]
pub struct UnifiedGraph {
    adjacency: Vec<Vec<Edge>>,
    kinds: Vec<EntityKind>,
    min_r: f64,
    max_r: f64,
    c: f64,
    tables: [OnceLock<TransitionTable>; 3],
}

impl UnifiedGraph {
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn count_links(&self, link: LinkKind) -> usize {
        self.adjacency
            .iter()
            .flatten()
            .filter(|e| e.link == link)
            .count()
            / 2
    }

    pub fn neighbors(&self, v: EntityId) -> &[Edge] {
        &self.adjacency[v.index()]
    }

    pub fn degree(&self, v: EntityId) -> usize {
        self.adjacency[v.index()].len()
    }

    pub fn kind(&self, v: EntityId) -> EntityKind {
        self.kinds[v.index()]
    }

    pub fn kinds(&self) -> &[EntityKind] {
        &self.kinds
    }

    pub fn min_r(&self) -> f64 {
        self.min_r
    }

    pub fn max_r(&self) -> f64 {
        self.max_r
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn nodes(&self) -> impl Iterator<Item = EntityId> {
        (0..self.adjacency.len() as u32).map(EntityId)
    }

    fn find(&self, v: EntityId, w: EntityId) -> Option<&Edge> {
        let (from, to) = if self.degree(v) <= self.degree(w) { (v, w) } else { (w, v) };
        let list = &self.adjacency[from.index()];
        list.binary_search_by_key(&to, |e| e.to).ok().map(|k| &list[k])
    }

    /// Observed rating between a user and an item, in either argument order.
    #[inline]
    pub fn rating(&self, v: EntityId, w: EntityId) -> Option<f64> {
        if v.index() >= self.adjacency.len() || w.index() >= self.adjacency.len() {
            return None;
        }
        match self.find(v, w) {
            Some(e) if e.link == LinkKind::Score => Some(e.weight),
            _ => None,
        }
    }

    pub fn are_friends(&self, v: EntityId, w: EntityId) -> bool {
        matches!(self.find(v, w), Some(e) if e.link == LinkKind::Social)
    }

    /// Items rated by user `u` (or users who rated item `u`) with the rating.
    pub fn ratings_of(&self, v: EntityId) -> impl Iterator<Item = (EntityId, f64)> + '_ {
        self.adjacency[v.index()]
            .iter()
            .filter(|e| e.link == LinkKind::Score)
            .map(|e| (e.to, e.weight))
    }

    pub fn friends_of(&self, v: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.adjacency[v.index()]
            .iter()
            .filter(|e| e.link == LinkKind::Social)
            .map(|e| e.to)
    }

    /// Transition table for `kind`, built on first use.
    pub fn transition_table(&self, kind: WalkKind) -> &TransitionTable {
        self.tables[kind.slot()].get_or_init(|| TransitionTable::build(self, kind))
    }

    /// Unnormalized transition weight of `edge` under `kind`.
    pub fn walk_weight(&self, edge: &Edge, kind: WalkKind) -> f64 {
        match (kind, edge.link) {
            (WalkKind::Unweighted, _) => 1.0,
            (WalkKind::Positive, _) | (WalkKind::Negative, LinkKind::Social) => edge.weight,
            (WalkKind::Negative, LinkKind::Score) => self.min_r + self.max_r - edge.weight,
        }
    }
}

/// Build the unified graph. `index` must cover every rating and social
/// endpoint, and every indexed entity must end up with at least one edge.
pub fn build_unified_graph(
    ratings: &[RatingRecord],
    social: &[SocialEdge],
    c: f64,
    index: &EntityIndex,
) -> Result<UnifiedGraph> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::arg(format!("social edge weight c must be positive, got {c}")));
    }
    let n = index.len();
    let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); n];
    let mut min_r = f64::INFINITY;
    let mut max_r = f64::NEG_INFINITY;
    let lookup = |kind: EntityKind, id: &str| {
        index.get(kind, id).ok_or_else(|| Error::UnknownEntity {
            kind: kind.as_str(),
            id: id.to_owned(),
        })
    };
    for r in ratings {
        if !(r.value >= 0.0 && r.value.is_finite()) {
            return Err(Error::arg(format!(
                "rating {} of {:?} on {:?} cannot weight an edge",
                r.value, r.user, r.item
            )));
        }
        let u = lookup(EntityKind::User, &r.user)?;
        let i = lookup(EntityKind::Item, &r.item)?;
        min_r = min_r.min(r.value);
        max_r = max_r.max(r.value);
        adjacency[u.index()].push(Edge { to: i, weight: r.value, link: LinkKind::Score });
        adjacency[i.index()].push(Edge { to: u, weight: r.value, link: LinkKind::Score });
    }
    for e in social {
        let a = lookup(EntityKind::User, &e.a)?;
        let b = lookup(EntityKind::User, &e.b)?;
        adjacency[a.index()].push(Edge { to: b, weight: c, link: LinkKind::Social });
        adjacency[b.index()].push(Edge { to: a, weight: c, link: LinkKind::Social });
    }
    for (v, list) in adjacency.iter_mut().enumerate() {
        if list.is_empty() {
            return Err(Error::IsolatedEntity(index.external(EntityId(v as u32)).to_owned()));
        }
        list.sort_by_key(|e| e.to);
        if list.windows(2).any(|w| w[0].to == w[1].to) {
            return Err(Error::arg(format!(
                "parallel edges at entity {:?}",
                index.external(EntityId(v as u32))
            )));
        }
    }
    if ratings.is_empty() {
        min_r = 0.0;
        max_r = 0.0;
    }
    Ok(UnifiedGraph {
        adjacency,
        kinds: index.entries().map(|(_, _, k)| k).collect(),
        min_r,
        max_r,
        c,
        tables: Default::default(),
    })
}

/// Per-node cumulative transition distribution in CSR layout.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    kind: WalkKind,
    offsets: Vec<usize>,
    cumulative: Vec<f64>,
}

impl TransitionTable {
    fn build(graph: &UnifiedGraph, kind: WalkKind) -> Self {
        let mut offsets = Vec::with_capacity(graph.node_count() + 1);
        let mut cumulative = Vec::with_capacity(graph.adjacency.iter().map(Vec::len).sum());
        offsets.push(0);
        for list in &graph.adjacency {
            let weights: Vec<f64> = list.iter().map(|e| graph.walk_weight(e, kind).max(0.0)).collect();
            let total = neumaier_sum(weights.iter().copied());
            if total > 0.0 && total.is_finite() {
                let mut running = NeumaierSum::default();
                for w in &weights {
                    running.add(*w);
                    cumulative.push(running.value() / total);
                }
            } else {
                // no usable weight: uniform over neighbors
                let deg = list.len() as f64;
                cumulative.extend((1..=list.len()).map(|k| k as f64 / deg));
            }
            if let Some(last) = cumulative.last_mut() {
                *last = 1.0;
            }
            offsets.push(cumulative.len());
        }
        Self { kind, offsets, cumulative }
    }

    pub fn kind(&self) -> WalkKind {
        self.kind
    }

    /// Transition probabilities of `v`, aligned with `graph.neighbors(v)`.
    pub fn probabilities(&self, v: EntityId) -> Vec<f64> {
        let cum = &self.cumulative[self.offsets[v.index()]..self.offsets[v.index() + 1]];
        let mut prev = 0.0;
        cum.iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                p
            })
            .collect()
    }

    /// Position in `v`'s adjacency list of the next step for a uniform draw `u` in `[0, 1)`.
    #[inline]
    pub fn choose(&self, v: EntityId, u: f64) -> usize {
        let cum = &self.cumulative[self.offsets[v.index()]..self.offsets[v.index() + 1]];
        if cum.len() <= 1 {
            return 0;
        }
        cum.partition_point(|&c| c <= u).min(cum.len() - 1)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, graph: &UnifiedGraph, v: EntityId, rng: &mut R) -> EntityId {
        let k = self.choose(v, rng.gen::<f64>());
        graph.neighbors(v)[k].to
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn neumaier_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut s = NeumaierSum::default();
    xs.for_each(|x| s.add(x));
    s.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(ratings: &[(&str, &str, f64)], social: &[(&str, &str)], c: f64) -> (EntityIndex, UnifiedGraph) {
        let ratings: Vec<_> = ratings.iter().map(|&(u, i, r)| RatingRecord::new(u, i, r)).collect();
        let social: Vec<_> = social.iter().filter_map(|&(a, b)| SocialEdge::new(a, b)).collect();
        let index = EntityIndex::from_data(&ratings, &social);
        let graph = build_unified_graph(&ratings, &social, c, &index).unwrap();
        (index, graph)
    }

    #[test]
    fn single_rating_and_friend() {
        let (idx, g) = fixture(&[("u1", "i1", 4.0)], &[("u1", "u2")], 5.0);
        assert_eq!(g.node_count(), 3);
        let u1 = idx.user("u1").unwrap();
        let i1 = idx.item("i1").unwrap();
        let u2 = idx.user("u2").unwrap();
        assert_eq!(g.rating(u1, i1), Some(4.0));
        assert_eq!(g.rating(i1, u1), Some(4.0));
        assert_eq!(g.rating(u1, u2), None);
        assert!(g.are_friends(u2, u1));
        assert_eq!(g.count_links(LinkKind::Score), 1);
        assert_eq!(g.count_links(LinkKind::Social), 1);
        let social = g.neighbors(u2)[0];
        assert_eq!((social.to, social.weight, social.link), (u1, 5.0, LinkKind::Social));
    }

    #[test]
    fn ratings_only_is_bipartite() {
        let (_, g) = fixture(&[("u1", "i1", 1.0), ("u2", "i1", 3.0)], &[], 5.0);
        assert_eq!(g.count_links(LinkKind::Social), 0);
        for v in g.nodes() {
            for e in g.neighbors(v) {
                assert_ne!(g.kind(v), g.kind(e.to));
            }
        }
    }

    #[test]
    fn rejects_bad_c_and_unknown_ids() {
        let r = vec![RatingRecord::new("u", "i", 1.0)];
        let idx = EntityIndex::from_data(&r, &[]);
        assert!(matches!(build_unified_graph(&r, &[], 0.0, &idx), Err(Error::Argument(_))));
        assert!(build_unified_graph(&r, &[], -1.0, &idx).is_err());
        let stray = vec![SocialEdge::new("u", "zz").unwrap()];
        assert!(matches!(
            build_unified_graph(&r, &stray, 1.0, &idx),
            Err(Error::UnknownEntity { .. })
        ));
        let mut bigger = idx.clone();
        bigger.insert(EntityKind::Item, "orphan");
        assert!(matches!(build_unified_graph(&r, &[], 1.0, &bigger), Err(Error::IsolatedEntity(_))));
    }

    fn star() -> (EntityIndex, UnifiedGraph, EntityId) {
        // item v rated 1 by w1 and 3 by w2; an extra rating keeps maxR at 5
        let (idx, g) = fixture(&[("w1", "v", 1.0), ("w2", "v", 3.0), ("w2", "x", 5.0)], &[], 5.0);
        let v = idx.item("v").unwrap();
        (idx, g, v)
    }

    #[test]
    fn transition_probabilities_by_kind() {
        let (idx, g, v) = star();
        let w1 = idx.user("w1").unwrap();
        let order: Vec<_> = g.neighbors(v).iter().map(|e| e.to).collect();
        let p_w1 = |kind| {
            let p = g.transition_table(kind).probabilities(v);
            let k = order.iter().position(|&x| x == w1).unwrap();
            (p[k], p[1 - k])
        };
        let (a, b) = p_w1(WalkKind::Positive);
        assert!((a - 0.25).abs() < 1e-12 && (b - 0.75).abs() < 1e-12);
        let (a, b) = p_w1(WalkKind::Negative);
        assert!((a - 0.625).abs() < 1e-12 && (b - 0.375).abs() < 1e-12);
        let (a, b) = p_w1(WalkKind::Unweighted);
        assert!((a - 0.5).abs() < 1e-12 && (b - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_walk_keeps_social_weight() {
        let (idx, g) = fixture(&[("u", "i", 2.0), ("v", "i", 4.0)], &[("u", "v")], 3.0);
        let u = idx.user("u").unwrap();
        let p = g.transition_table(WalkKind::Negative).probabilities(u);
        let weights: Vec<f64> = g.neighbors(u).iter().map(|e| g.walk_weight(e, WalkKind::Negative)).collect();
        // score complement 2+4-2 = 4, social stays 3
        let mut sorted = weights.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, vec![3.0, 4.0]);
        for (p, w) in p.iter().zip(&weights) {
            assert!((p - w / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_negative_node_falls_back_to_uniform() {
        // minR = 0, so a rating equal to maxR has zero complement weight
        let (idx, g) = fixture(&[("u", "a", 4.0), ("u", "b", 4.0), ("z", "a", 0.0)], &[], 1.0);
        let u = idx.user("u").unwrap();
        let p = g.transition_table(WalkKind::Negative).probabilities(u);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn choose_covers_boundaries() {
        let (_, g, v) = star();
        let t = g.transition_table(WalkKind::Positive);
        assert_eq!(t.choose(v, 0.0), 0);
        assert_eq!(t.choose(v, 0.999_999), 1);
    }
}
