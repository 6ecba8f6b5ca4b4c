//! Window pairs over walks and their assignment to the rating, similar and
//! dissimilar pair sets, plus co-occurrence counts over the similar set.

use std::collections::HashMap;

use rustc_hash::FxHashMap;

use crate::graph::{UnifiedGraph, WalkKind};
use crate::ingest::{EntityId, EntityKind};
use crate::walker::Walk;

/// Which loss term a pair feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairSet {
    /// Observed rating between the two entities.
    R,
    /// Similar entities.
    Plus,
    /// Dissimilar user and item.
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifiedPair {
    pub a: EntityId,
    pub b: EntityId,
    pub set: PairSet,
    /// Present iff `set == PairSet::R`.
    pub rating: Option<f64>,
}

impl ClassifiedPair {
    pub fn rated(a: EntityId, b: EntityId, rating: f64) -> Self {
        Self { a, b, set: PairSet::R, rating: Some(rating) }
    }

    pub fn plus(a: EntityId, b: EntityId) -> Self {
        Self { a, b, set: PairSet::Plus, rating: None }
    }

    pub fn minus(a: EntityId, b: EntityId) -> Self {
        Self { a, b, set: PairSet::Minus, rating: None }
    }
}

/// What pair classification needs to know about entities.
pub trait PairContext {
    fn rating(&self, a: EntityId, b: EntityId) -> Option<f64>;
    fn kind(&self, v: EntityId) -> EntityKind;
}

impl PairContext for UnifiedGraph {
    #[inline]
    fn rating(&self, a: EntityId, b: EntityId) -> Option<f64> {
        UnifiedGraph::rating(self, a, b)
    }

    #[inline]
    fn kind(&self, v: EntityId) -> EntityKind {
        UnifiedGraph::kind(self, v)
    }
}

/// Classify a (target, neighbor) pair sampled by a walk of `kind`.
/// Returns `None` for discarded pairs and for self pairs.
#[inline]
pub fn classify<C: PairContext + ?Sized>(kind: WalkKind, a: EntityId, b: EntityId, ctx: &C) -> Option<ClassifiedPair> {
    if a == b {
        return None;
    }
    if let Some(r) = ctx.rating(a, b) {
        return Some(ClassifiedPair::rated(a, b, r));
    }
    match kind {
        WalkKind::Unweighted => None,
        WalkKind::Positive => Some(ClassifiedPair::plus(a, b)),
        WalkKind::Negative => {
            if ctx.kind(a) == ctx.kind(b) {
                Some(ClassifiedPair::plus(a, b))
            } else {
                Some(ClassifiedPair::minus(a, b))
            }
        }
    }
}

/// Position pairs `(t, j)` of a sliding window of radius `s` over `len` nodes,
/// target-major then neighbor ascending.
pub fn window_positions(len: usize, s: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len).flat_map(move |t| {
        let lo = t.saturating_sub(s);
        let hi = (t + s).min(len.saturating_sub(1));
        (lo..=hi).filter(move |&j| j != t).map(move |j| (t, j))
    })
}

/// Call `f` on every classified pair of `walk` with window radius `s`.
#[inline]
pub fn visit_pairs<C, F>(walk: &Walk, s: usize, ctx: &C, mut f: F)
where
    C: PairContext + ?Sized,
    F: FnMut(ClassifiedPair),
{
    let nodes = &walk.nodes;
    for (t, j) in window_positions(nodes.len(), s) {
        if let Some(p) = classify(walk.kind, nodes[t], nodes[j], ctx) {
            f(p);
        }
    }
}

/// All classified pairs of `walk`.
pub fn extract_pairs<C: PairContext + ?Sized>(walk: &Walk, s: usize, ctx: &C) -> Vec<ClassifiedPair> {
    let mut out = Vec::new();
    visit_pairs(walk, s, ctx, |p| out.push(p));
    out
}

/// Co-occurrence counts over similar pairs, keyed by unordered entity pair.
#[derive(Debug, Clone, Default)]
pub struct CoocCounts {
    pair_count: FxHashMap<(u32, u32), u64>,
    /// Indexed by entity id; may be shorter than the entity count.
    entity_total: Vec<u64>,
}

impl PartialEq for CoocCounts {
    fn eq(&self, other: &Self) -> bool {
        let n = self.entity_total.len().max(other.entity_total.len());
        self.pair_count == other.pair_count
            && (0..n).all(|v| self.total(EntityId(v as u32)) == other.total(EntityId(v as u32)))
    }
}

impl Eq for CoocCounts {}

#[inline]
fn key(v: EntityId, w: EntityId) -> (u32, u32) {
    if v.0 <= w.0 {
        (v.0, w.0)
    } else {
        (w.0, v.0)
    }
}

impl CoocCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one similar pair.
    #[inline]
    pub fn add(&mut self, v: EntityId, w: EntityId) {
        self.add_count(v, w, 1);
    }

    fn add_count(&mut self, v: EntityId, w: EntityId, n: u64) {
        *self.pair_count.entry(key(v, w)).or_insert(0) += n;
        let top = v.0.max(w.0) as usize;
        if top >= self.entity_total.len() {
            self.entity_total.resize(top + 1, 0);
        }
        self.entity_total[v.index()] += n;
        self.entity_total[w.index()] += n;
    }

    /// Fold the similar pairs of `pairs` into the counts.
    pub fn accumulate<I: IntoIterator<Item = ClassifiedPair>>(&mut self, pairs: I) {
        for p in pairs {
            if p.set == PairSet::Plus {
                self.add(p.a, p.b);
            }
        }
    }

    pub fn merge(&mut self, other: &CoocCounts) {
        for (&(v, w), &n) in &other.pair_count {
            self.add_count(EntityId(v), EntityId(w), n);
        }
    }

    /// Number of times the unordered pair appeared.
    pub fn pair(&self, v: EntityId, w: EntityId) -> u64 {
        self.pair_count.get(&key(v, w)).copied().unwrap_or(0)
    }

    /// Number of similar pairs containing `v`.
    pub fn total(&self, v: EntityId) -> u64 {
        self.entity_total.get(v.index()).copied().unwrap_or(0)
    }

    pub fn distinct_pairs(&self) -> usize {
        self.pair_count.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_count.is_empty()
    }

    /// `(v, w, count)` with `v <= w`, sorted.
    pub fn sorted_pairs(&self) -> Vec<(EntityId, EntityId, u64)> {
        let mut out: Vec<_> = self
            .pair_count
            .iter()
            .map(|(&(v, w), &n)| (EntityId(v), EntityId(w), n))
            .collect();
        out.sort_unstable_by_key(|&(v, w, _)| (v, w));
        out
    }

    /// Rebuild counts from unordered pair counts; totals are derived.
    pub fn from_pair_counts<I: IntoIterator<Item = (EntityId, EntityId, u64)>>(pairs: I) -> Self {
        let mut c = Self::new();
        for (v, w, n) in pairs {
            if n > 0 {
                c.add_count(v, w, n);
            }
        }
        c
    }

    /// Entities sharing at least one similar pair with `v`, with the pair count.
    pub fn partners(&self, v: EntityId) -> HashMap<EntityId, u64> {
        self.pair_count
            .iter()
            .filter_map(|(&(a, b), &n)| {
                if a == v.0 {
                    Some((EntityId(b), n))
                } else if b == v.0 {
                    Some((EntityId(a), n))
                } else {
                    None
                }
            })
            .collect()
    }
}
