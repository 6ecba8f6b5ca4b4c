//! Trained model bundle and its binary file format.
//!
//! All integers and floats are little-endian; floats are IEEE-754 binary64
//! written bit-exact.
//!
//! ```text
//! header   magic "UNIWALK\0" (8 bytes)
//!          format version         u32   (currently 1)
//!          dim                    u32
//!          mu, min_r, max_r       f64 × 3
//!          entity count           u64
//!          rating, user, item and social edge counts   u64 × 4
//! entities per entity: kind u8 (0 user, 1 item), id length u32, UTF-8 id, bias f64
//! latent   entity count × dim f64, row per entity in id order
//! ratings  count u64, then per rating: user u32, item u32, value f64
//! social   count u64, then per edge: a u32, b u32 (a < b)
//! cooc     pair count u64, then per pair: v u32, w u32 (v <= w), count u64
//! ```
//!
//! Files end right after the last pair; trailing bytes are rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{build_unified_graph, LinkKind, UnifiedGraph};
use crate::ingest::{DatasetStats, EntityId, EntityIndex, EntityKind, RatingRecord, SocialEdge};
use crate::pairs::CoocCounts;
use crate::trainer::ModelParams;

pub const MAGIC: &[u8; 8] = b"UNIWALK\0";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to predict and explain after training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub index: EntityIndex,
    pub params: ModelParams,
    pub cooc: CoocCounts,
    pub stats: DatasetStats,
    /// The graph the model was trained on.
    pub edges: TrainingEdges,
}

/// Rating and friendship edges by internal id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingEdges {
    /// `(user, item, rating)` in user order.
    pub ratings: Vec<(EntityId, EntityId, f64)>,
    /// `(a, b)` with `a < b`.
    pub social: Vec<(EntityId, EntityId)>,
}

impl TrainingEdges {
    pub fn from_graph(graph: &UnifiedGraph) -> Self {
        let mut out = Self::default();
        for v in graph.nodes() {
            for e in graph.neighbors(v) {
                match e.link {
                    LinkKind::Score if graph.kind(v) == EntityKind::User => out.ratings.push((v, e.to, e.weight)),
                    LinkKind::Social if v < e.to => out.social.push((v, e.to)),
                    _ => {}
                }
            }
        }
        out
    }

    /// External-id records over `index`.
    pub fn records(&self, index: &EntityIndex) -> (Vec<RatingRecord>, Vec<SocialEdge>) {
        let ratings = self
            .ratings
            .iter()
            .map(|&(u, i, r)| RatingRecord::new(index.external(u), index.external(i), r))
            .collect();
        let social = self
            .social
            .iter()
            .filter_map(|&(a, b)| SocialEdge::new(index.external(a), index.external(b)))
            .collect();
        (ratings, social)
    }
}

impl TrainedModel {
    /// Rebuild the training graph with social weight `c`.
    pub fn graph(&self, c: f64) -> Result<UnifiedGraph> {
        let (ratings, social) = self.edges.records(&self.index);
        build_unified_graph(&ratings, &social, c, &self.index)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        if self.params.entity_count() != self.index.len() {
            return Err(Error::Format(format!(
                "{} parameter rows for {} entities",
                self.params.entity_count(),
                self.index.len()
            )));
        }
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.params.dim as u32).to_le_bytes())?;
        for x in [self.params.mu, self.stats.min_r, self.stats.max_r] {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&(self.index.len() as u64).to_le_bytes())?;
        for n in [
            self.stats.count_ratings,
            self.stats.count_users,
            self.stats.count_items,
            self.stats.count_social_edges,
        ] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for (v, id, kind) in self.index.entries() {
            w.write_all(&[match kind {
                EntityKind::User => 0u8,
                EntityKind::Item => 1u8,
            }])?;
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            w.write_all(&self.params.bias[v.index()].to_le_bytes())?;
        }
        for x in &self.params.latent {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&(self.edges.ratings.len() as u64).to_le_bytes())?;
        for &(u, i, r) in &self.edges.ratings {
            w.write_all(&u.0.to_le_bytes())?;
            w.write_all(&i.0.to_le_bytes())?;
            w.write_all(&r.to_le_bytes())?;
        }
        w.write_all(&(self.edges.social.len() as u64).to_le_bytes())?;
        for &(a, b) in &self.edges.social {
            w.write_all(&a.0.to_le_bytes())?;
            w.write_all(&b.0.to_le_bytes())?;
        }
        let pairs = self.cooc.sorted_pairs();
        w.write_all(&(pairs.len() as u64).to_le_bytes())?;
        for (v, u, n) in pairs {
            w.write_all(&v.0.to_le_bytes())?;
            w.write_all(&u.0.to_le_bytes())?;
            w.write_all(&n.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader(BufReader::new(r));
        let mut magic = [0u8; 8];
        r.bytes(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let dim = r.u32()? as usize;
        let mu = r.f64()?;
        let min_r = r.f64()?;
        let max_r = r.f64()?;
        let n = r.len()?;
        let stats = DatasetStats {
            min_r,
            max_r,
            mu,
            count_ratings: r.len()?,
            count_users: r.len()?,
            count_items: r.len()?,
            count_social_edges: r.len()?,
        };
        let mut index = EntityIndex::new();
        let mut bias = Vec::with_capacity(n.min(1 << 24));
        for k in 0..n {
            let kind = match r.u8()? {
                0 => EntityKind::User,
                1 => EntityKind::Item,
                other => return Err(Error::Format(format!("entity {k}: bad kind tag {other}"))),
            };
            let len = r.u32()? as usize;
            let mut id = vec![0u8; len];
            r.bytes(&mut id)?;
            let id = String::from_utf8(id).map_err(|_| Error::Format(format!("entity {k}: id is not UTF-8")))?;
            if index.insert(kind, &id) != EntityId(k as u32) {
                return Err(Error::Format(format!("entity {k}: duplicate {} id {id:?}", kind.as_str())));
            }
            bias.push(r.f64()?);
        }
        let mut latent = Vec::with_capacity((n * dim).min(1 << 26));
        for _ in 0..n * dim {
            latent.push(r.f64()?);
        }
        let mut edges = TrainingEdges::default();
        let entity = |v: u32, kind: EntityKind, what: &str| {
            if (v as usize) < n && index.kind(EntityId(v)) == kind {
                Ok(EntityId(v))
            } else {
                Err(Error::Format(format!("{what} edge refers to bad entity {v}")))
            }
        };
        let count = r.len()?;
        edges.ratings.reserve(count.min(1 << 24));
        for _ in 0..count {
            let u = entity(r.u32()?, EntityKind::User, "rating")?;
            let i = entity(r.u32()?, EntityKind::Item, "rating")?;
            edges.ratings.push((u, i, r.f64()?));
        }
        let count = r.len()?;
        edges.social.reserve(count.min(1 << 24));
        for _ in 0..count {
            let a = entity(r.u32()?, EntityKind::User, "social")?;
            let b = entity(r.u32()?, EntityKind::User, "social")?;
            if a >= b {
                return Err(Error::Format(format!("social edge ({}, {}) is not ordered", a.0, b.0)));
            }
            edges.social.push((a, b));
        }
        let pairs = r.len()?;
        let mut triples = Vec::with_capacity(pairs.min(1 << 24));
        for _ in 0..pairs {
            let v = r.u32()?;
            let w = r.u32()?;
            let count = r.u64()?;
            if v as usize >= n || w as usize >= n || v > w || count == 0 {
                return Err(Error::Format(format!("bad co-occurrence entry ({v}, {w}, {count})")));
            }
            triples.push((EntityId(v), EntityId(w), count));
        }
        let mut rest = [0u8; 1];
        if r.0.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after co-occurrence section".into()));
        }
        Ok(Self {
            index,
            params: ModelParams { mu, dim, bias, latent },
            cooc: CoocCounts::from_pair_counts(triples),
            stats,
            edges,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file).map_err(|e| match e {
            Error::Stream(source) => Error::io(path, source),
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn bytes(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("truncated model file".into()),
            _ => Error::Stream(e),
        })
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.bytes(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("length overflows".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
}
