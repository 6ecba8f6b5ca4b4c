//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use uniwalk::eval::Dataset;
use uniwalk::graph::{build_unified_graph, UnifiedGraph, WalkKind};
use uniwalk::ingest::{EntityId, EntityIndex, EntityKind, RatingRecord, SocialEdge};
use uniwalk::pairs::{ClassifiedPair, PairSet};
use uniwalk::synthetic::{generate, SynthConfig};
use uniwalk::walker::Walk;

pub fn ratings(triples: &[(&str, &str, f64)]) -> Vec<RatingRecord> {
    triples.iter().map(|&(u, i, r)| RatingRecord::new(u, i, r)).collect()
}

pub fn social(pairs: &[(&str, &str)]) -> Vec<SocialEdge> {
    pairs.iter().filter_map(|&(a, b)| SocialEdge::new(a, b)).collect()
}

/// Small graph fixture: raw data, index and graph.
pub struct Fixture {
    pub ratings: Vec<RatingRecord>,
    pub social: Vec<SocialEdge>,
    pub c: f64,
    pub index: EntityIndex,
    pub graph: UnifiedGraph,
}

impl Fixture {
    pub fn new(r: &[(&str, &str, f64)], s: &[(&str, &str)], c: f64) -> Self {
        let ratings = ratings(r);
        let social = social(s);
        let index = EntityIndex::from_data(&ratings, &social);
        let graph = build_unified_graph(&ratings, &social, c, &index).unwrap();
        Self { ratings, social, c, index, graph }
    }

    /// Observed rating of the (user, item) pair behind two entity ids, by external id.
    pub fn raw_rating(&self, a: EntityId, b: EntityId) -> Option<f64> {
        let (ka, kb) = (self.index.kind(a), self.index.kind(b));
        let (u, i) = match (ka, kb) {
            (EntityKind::User, EntityKind::Item) => (a, b),
            (EntityKind::Item, EntityKind::User) => (b, a),
            _ => return None,
        };
        let (u, i) = (self.index.external(u), self.index.external(i));
        self.ratings.iter().find(|r| r.user == u && r.item == i).map(|r| r.value)
    }

    pub fn are_friends(&self, a: EntityId, b: EntityId) -> bool {
        if self.index.kind(a) != EntityKind::User || self.index.kind(b) != EntityKind::User {
            return false;
        }
        let (x, y) = (self.index.external(a), self.index.external(b));
        self.social.iter().any(|e| (e.a == x && e.b == y) || (e.a == y && e.b == x))
    }

    /// Edge weight of `a`–`b` under `kind`, straight from the definitions.
    pub fn oracle_weight(&self, a: EntityId, b: EntityId, kind: WalkKind) -> Option<f64> {
        let (min_r, max_r) = self.ratings.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.value), hi.max(r.value))
        });
        if let Some(r) = self.raw_rating(a, b) {
            return Some(match kind {
                WalkKind::Positive => r,
                WalkKind::Negative => min_r + max_r - r,
                WalkKind::Unweighted => 1.0,
            });
        }
        self.are_friends(a, b).then_some(match kind {
            WalkKind::Unweighted => 1.0,
            _ => self.c,
        })
    }

    /// Transition probabilities of `v` aligned with its adjacency list.
    pub fn oracle_probabilities(&self, v: EntityId, kind: WalkKind) -> Vec<f64> {
        let ws: Vec<f64> = self
            .graph
            .neighbors(v)
            .iter()
            .map(|e| self.oracle_weight(v, e.to, kind).expect("neighbor has an edge"))
            .collect();
        let total: f64 = ws.iter().sum();
        if total > 0.0 {
            ws.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / ws.len() as f64; ws.len()]
        }
    }

    /// Pair multiset of `walk` derived directly from the window and class rules.
    pub fn oracle_pairs(&self, walk: &Walk, s: usize) -> Vec<ClassifiedPair> {
        let n = walk.nodes.len() as isize;
        let mut out = Vec::new();
        for t in 0..n {
            for j in (t - s as isize)..=(t + s as isize) {
                if j < 0 || j >= n || j == t {
                    continue;
                }
                let (a, b) = (walk.nodes[t as usize], walk.nodes[j as usize]);
                if a == b {
                    continue;
                }
                if let Some(r) = self.raw_rating(a, b) {
                    out.push(ClassifiedPair { a, b, set: PairSet::R, rating: Some(r) });
                    continue;
                }
                let same_kind = self.index.kind(a) == self.index.kind(b);
                let set = match walk.kind {
                    WalkKind::Unweighted => continue,
                    WalkKind::Positive => PairSet::Plus,
                    WalkKind::Negative if same_kind => PairSet::Plus,
                    WalkKind::Negative => PairSet::Minus,
                };
                out.push(ClassifiedPair { a, b, set, rating: None });
            }
        }
        out
    }

    /// Every walk with 1..=max_len nodes.
    pub fn all_walks(&self, max_len: usize) -> Vec<Vec<EntityId>> {
        let mut out: Vec<Vec<EntityId>> = self.graph.nodes().map(|v| vec![v]).collect();
        let mut frontier = out.clone();
        for _ in 1..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                let last = *w.last().unwrap();
                for e in self.graph.neighbors(last) {
                    let mut ext = w.clone();
                    ext.push(e.to);
                    next.push(ext);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }
}

/// Eight nodes: four users, four items, three friendships, ratings spanning the scale.
pub fn walk_fixture() -> Fixture {
    Fixture::new(
        &[
            ("u1", "i1", 4.0),
            ("u1", "i2", 1.0),
            ("u1", "i3", 2.5),
            ("u2", "i1", 0.5),
            ("u2", "i4", 3.0),
            ("u3", "i2", 4.0),
            ("u3", "i3", 1.5),
            ("u4", "i4", 2.0),
            ("u4", "i1", 3.5),
        ],
        &[("u1", "u2"), ("u2", "u3"), ("u1", "u4")],
        2.0,
    )
}

/// Six nodes: three users, three items, two friendships.
pub fn six_node_fixture() -> Fixture {
    Fixture::new(
        &[
            ("u1", "i1", 4.0),
            ("u1", "i2", 1.0),
            ("u2", "i2", 3.0),
            ("u2", "i3", 0.5),
            ("u3", "i3", 2.0),
        ],
        &[("u1", "u2"), ("u2", "u3")],
        5.0,
    )
}

/// Seeded FilmTrust-shaped data (about 35k ratings).
pub fn synthetic_filmtrust() -> Dataset {
    let d = generate(&SynthConfig::default()).unwrap();
    Dataset { ratings: d.ratings, social: d.social }
}

/// Seeded data small enough for repeated training.
pub fn synthetic_small(seed: u64) -> Dataset {
    let d = generate(&SynthConfig {
        users: 80,
        items: 100,
        communities: 4,
        ratings_per_user: 10.0,
        friends_per_user: 3.0,
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    Dataset { ratings: d.ratings, social: d.social }
}

pub fn filmtrust_dir() -> PathBuf {
    std::env::var_os("UNIWALK_FILMTRUST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/filmtrust")))
}

/// FilmTrust `ratings.txt` and `trust.txt`, or why they could not be loaded.
pub fn load_filmtrust() -> Result<Dataset, String> {
    let dir = filmtrust_dir();
    let ratings = dir.join("ratings.txt");
    let trust = dir.join("trust.txt");
    if !ratings.is_file() {
        return Err(format!("FilmTrust ratings not found at {}", ratings.display()));
    }
    let trust = trust.is_file().then_some(trust);
    let (r, s) = uniwalk::cli::read_dataset(&ratings, trust.as_deref(), uniwalk::Delimiter::Whitespace)
        .map_err(|e| format!("cannot load FilmTrust: {e}"))?;
    Ok(Dataset { ratings: r, social: s })
}

/// Count of each unordered pair in `pairs`, and of each entity's appearances.
pub fn brute_force_counts(pairs: &[(EntityId, EntityId)]) -> (HashMap<(EntityId, EntityId), u64>, HashMap<EntityId, u64>) {
    let mut joint = HashMap::new();
    let mut single = HashMap::new();
    for &(a, b) in pairs {
        let k = if a <= b { (a, b) } else { (b, a) };
        *joint.entry(k).or_insert(0) += 1;
        *single.entry(a).or_insert(0) += 1;
        *single.entry(b).or_insert(0) += 1;
    }
    (joint, single)
}
