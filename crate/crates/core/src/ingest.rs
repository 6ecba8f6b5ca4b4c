//! Rating and trust file parsing, entity indexing and fold assignment.
//!
//! Ratings are `user item rating` lines; trust files are `userA userB [weight]`
//! lines. Ids are opaque strings. Blank lines and lines starting with `#` are
//! skipped, CRLF line endings are accepted.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field separator for input files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Delimiter {
    /// Any run of spaces and tabs.
    #[default]
    Whitespace,
    Char(char),
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Whitespace => line.split([' ', '\t']).filter(|f| !f.is_empty()).collect(),
            Delimiter::Char(c) => line.split(*c).map(str::trim).collect(),
        }
    }

    fn join_char(&self) -> char {
        match self {
            Delimiter::Whitespace => ' ',
            Delimiter::Char(c) => *c,
        }
    }
}

impl std::str::FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" | "whitespace" | "ws" => Ok(Delimiter::Whitespace),
            "tab" | "\\t" => Ok(Delimiter::Char('\t')),
            "comma" => Ok(Delimiter::Char(',')),
            _ => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(Delimiter::Char(c)),
                    _ => Err(Error::arg(format!("delimiter must be a single character, got {s:?}"))),
                }
            }
        }
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delimiter::Whitespace => f.write_str("whitespace"),
            Delimiter::Char('\t') => f.write_str("tab"),
            Delimiter::Char(c) => write!(f, "{c}"),
        }
    }
}

/// One observed rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub user: String,
    pub item: String,
    pub value: f64,
}

impl RatingRecord {
    pub fn new(user: impl Into<String>, item: impl Into<String>, value: f64) -> Self {
        Self {
            user: user.into(),
            item: item.into(),
            value,
        }
    }
}

/// Undirected friendship, stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SocialEdge {
    pub a: String,
    pub b: String,
}

impl SocialEdge {
    /// Canonical edge, or `None` for a self-loop.
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Option<Self> {
        let (a, b) = (a.into(), b.into());
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Self { a, b }),
            std::cmp::Ordering::Greater => Some(Self { a: b, b: a }),
            std::cmp::Ordering::Equal => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    User,
    Item,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::User => "user",
            EntityKind::Item => "item",
        }
    }
}

/// Dense id shared by users and items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bijection between `(kind, external id)` and dense [`EntityId`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityIndex {
    forward: HashMap<(EntityKind, String), EntityId>,
    reverse: Vec<(String, EntityKind)>,
}

impl EntityIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index every entity that has at least one rating or social edge.
    ///
    /// Ids are assigned in order of first appearance: ratings (user before
    /// item on each line), then users that only occur in the social edges.
    pub fn from_data(ratings: &[RatingRecord], social: &[SocialEdge]) -> Self {
        let mut index = Self::new();
        for r in ratings {
            index.insert(EntityKind::User, &r.user);
            index.insert(EntityKind::Item, &r.item);
        }
        for e in social {
            index.insert(EntityKind::User, &e.a);
            index.insert(EntityKind::User, &e.b);
        }
        index
    }

    /// Returns the existing id or assigns the next one.
    pub fn insert(&mut self, kind: EntityKind, id: &str) -> EntityId {
        if let Some(&e) = self.forward.get(&(kind, id.to_owned())) {
            return e;
        }
        let e = EntityId(self.reverse.len() as u32);
        self.forward.insert((kind, id.to_owned()), e);
        self.reverse.push((id.to_owned(), kind));
        e
    }

    pub fn get(&self, kind: EntityKind, id: &str) -> Option<EntityId> {
        self.forward.get(&(kind, id.to_owned())).copied()
    }

    pub fn user(&self, id: &str) -> Option<EntityId> {
        self.get(EntityKind::User, id)
    }

    pub fn item(&self, id: &str) -> Option<EntityId> {
        self.get(EntityKind::Item, id)
    }

    pub fn external(&self, e: EntityId) -> &str {
        &self.reverse[e.index()].0
    }

    pub fn kind(&self, e: EntityId) -> EntityKind {
        self.reverse[e.index()].1
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.reverse.len() as u32).map(EntityId)
    }

    pub fn entries(&self) -> impl Iterator<Item = (EntityId, &str, EntityKind)> + '_ {
        self.reverse
            .iter()
            .enumerate()
            .map(|(i, (s, k))| (EntityId(i as u32), s.as_str(), *k))
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.reverse.iter().filter(|(_, k)| *k == kind).count()
    }
}

/// Summary statistics of a rating set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub min_r: f64,
    pub max_r: f64,
    pub mu: f64,
    pub count_ratings: usize,
    pub count_users: usize,
    pub count_items: usize,
    pub count_social_edges: usize,
}

impl DatasetStats {
    /// Statistics over `ratings`; an empty slice yields zeros.
    pub fn from_ratings(ratings: &[RatingRecord], count_social_edges: usize) -> Self {
        if ratings.is_empty() {
            return Self {
                min_r: 0.0,
                max_r: 0.0,
                mu: 0.0,
                count_ratings: 0,
                count_users: 0,
                count_items: 0,
                count_social_edges,
            };
        }
        let mut min_r = f64::INFINITY;
        let mut max_r = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut users = HashSet::new();
        let mut items = HashSet::new();
        for r in ratings {
            min_r = min_r.min(r.value);
            max_r = max_r.max(r.value);
            sum += r.value;
            users.insert(r.user.as_str());
            items.insert(r.item.as_str());
        }
        // mean of values inside [min, max] can drift past the bounds by an ulp
        let mu = (sum / ratings.len() as f64).clamp(min_r, max_r);
        Self {
            min_r,
            max_r,
            mu,
            count_ratings: ratings.len(),
            count_users: users.len(),
            count_items: items.len(),
            count_social_edges,
        }
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min_r, self.max_r)
    }
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(n, line)| match line {
        Err(e) => Some(Err(Error::Stream(e))),
        Ok(line) => {
            let trimmed = line.trim_end_matches('\r').trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                None
            } else {
                Some(Ok((n + 1, trimmed.to_owned())))
            }
        }
    })
}

/// Parse a ratings stream.
pub fn parse_ratings<R: BufRead>(
    reader: R,
    delimiter: Delimiter,
) -> Result<(Vec<RatingRecord>, DatasetStats)> {
    let mut records = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for line in content_lines(reader) {
        let (n, line) = line?;
        let fields = delimiter.split(&line);
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: n,
                message: format!("expected user, item and rating, got {} field(s)", fields.len()),
            });
        }
        let value: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: n,
            message: format!("rating {:?} is not a number", fields[2]),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: n,
                message: format!("rating {:?} is not finite", fields[2]),
            });
        }
        let (user, item) = (fields[0].to_owned(), fields[1].to_owned());
        if !seen.insert((user.clone(), item.clone())) {
            return Err(Error::DuplicateRating { line: n, user, item });
        }
        records.push(RatingRecord { user, item, value });
    }
    let stats = DatasetStats::from_ratings(&records, 0);
    Ok((records, stats))
}

/// Deduplicated undirected social edges plus the number of dropped self-loops.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrustParse {
    pub edges: Vec<SocialEdge>,
    pub self_loops: usize,
}

/// Parse a trust stream. Direction and any weight column are discarded.
pub fn parse_trust<R: BufRead>(reader: R, delimiter: Delimiter) -> Result<TrustParse> {
    let mut out = TrustParse::default();
    let mut seen = HashSet::new();
    for line in content_lines(reader) {
        let (n, line) = line?;
        let fields = delimiter.split(&line);
        if fields.len() < 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                line: n,
                message: "expected two user ids".to_owned(),
            });
        }
        match SocialEdge::new(fields[0], fields[1]) {
            None => out.self_loops += 1,
            Some(edge) => {
                if seen.insert(edge.clone()) {
                    out.edges.push(edge);
                }
            }
        }
    }
    Ok(out)
}

/// Write ratings in the input format.
pub fn write_ratings<W: Write>(mut w: W, ratings: &[RatingRecord], delimiter: Delimiter) -> std::io::Result<()> {
    let sep = delimiter.join_char();
    for r in ratings {
        writeln!(w, "{}{sep}{}{sep}{}", r.user, r.item, r.value)?;
    }
    Ok(())
}

/// Assignment of each rating index to a cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_count: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded permutation of the rating indices dealt round-robin into `k` folds.
pub fn kfold_split<T>(ratings: &[T], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::arg(format!("fold count must be at least 2, got {k}")));
    }
    if ratings.len() < k {
        return Err(Error::arg(format!(
            "{} rating(s) cannot be split into {k} folds",
            ratings.len()
        )));
    }
    let mut order: Vec<usize> = (0..ratings.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; ratings.len()];
    for (pos, idx) in order.into_iter().enumerate() {
        assignment[idx] = pos % k;
    }
    Ok(FoldSplit {
        fold_count: k,
        assignment,
        seed,
    })
}
