//! Fixed-length random walks over the unified graph.
//!
//! Every walk gets its own generator seeded from `(seed, kind, start, repetition)`,
//! so the produced stream does not depend on how the work is scheduled.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{TransitionTable, UnifiedGraph, WalkKind};
use crate::ingest::{EntityId, EntityIndex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub kind: WalkKind,
    pub nodes: Vec<EntityId>,
}

/// Walk `len` nodes (including `start`) following `table`.
pub fn sample_walk<R: rand::Rng + ?Sized>(
    graph: &UnifiedGraph,
    table: &TransitionTable,
    start: EntityId,
    len: usize,
    rng: &mut R,
) -> Result<Walk> {
    if len < 2 {
        return Err(Error::arg(format!("walk length must be at least 2, got {len}")));
    }
    if graph.degree(start) == 0 {
        return Err(Error::arg(format!("walk start {} has no neighbors", start.0)));
    }
    let mut nodes = Vec::with_capacity(len);
    let mut current = start;
    nodes.push(current);
    for _ in 1..len {
        current = table.sample(graph, current, rng);
        nodes.push(current);
    }
    Ok(Walk {
        kind: table.kind(),
        nodes,
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic mix of a list of words into one seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5851_F42D_4C95_7F2D, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seed of the walk started at `node` for the given repetition.
pub fn walk_seed(seed: u64, kind: WalkKind, node: EntityId, repetition: usize) -> u64 {
    let domain = match kind {
        WalkKind::Positive => 0x706f_7369,
        WalkKind::Negative => 0x6e65_6761,
        WalkKind::Unweighted => 0x756e_7767,
    };
    mix_seed(&[seed, domain, u64::from(node.0), repetition as u64])
}

/// Walks of one kind from every node, in node-major, repetition-minor order.
///
/// Walks are produced in parallel chunks but yielded in the fixed order.
pub struct WalkStream<'g> {
    graph: &'g UnifiedGraph,
    table: &'g TransitionTable,
    kind: WalkKind,
    walks_per_node: usize,
    len: usize,
    seed: u64,
    next_node: usize,
    chunk: std::vec::IntoIter<Walk>,
}

const CHUNK_NODES: usize = 2048;

impl<'g> WalkStream<'g> {
    fn fill(&mut self) -> bool {
        let n = self.graph.node_count();
        if self.next_node >= n {
            return false;
        }
        let end = (self.next_node + CHUNK_NODES).min(n);
        let (graph, table, kind, reps, len, seed) =
            (self.graph, self.table, self.kind, self.walks_per_node, self.len, self.seed);
        let walks: Vec<Walk> = (self.next_node..end)
            .into_par_iter()
            .flat_map_iter(|v| {
                let v = EntityId(v as u32);
                (0..reps).filter(move |_| graph.degree(v) > 0).map(move |rep| {
                    let mut rng = ChaCha8Rng::seed_from_u64(walk_seed(seed, kind, v, rep));
                    sample_walk(graph, table, v, len, &mut rng).expect("length and degree checked")
                })
            })
            .collect();
        self.next_node = end;
        self.chunk = walks.into_iter();
        true
    }
}

impl Iterator for WalkStream<'_> {
    type Item = Walk;

    fn next(&mut self) -> Option<Walk> {
        loop {
            if let Some(w) = self.chunk.next() {
                return Some(w);
            }
            if !self.fill() {
                return None;
            }
        }
    }
}

/// `walks_per_node` walks of length `len` from every node with degree ≥ 1.
pub fn generate_walks(
    graph: &UnifiedGraph,
    kind: WalkKind,
    walks_per_node: usize,
    len: usize,
    seed: u64,
) -> Result<WalkStream<'_>> {
    if walks_per_node < 1 {
        return Err(Error::arg("walks per node must be at least 1"));
    }
    if len < 2 {
        return Err(Error::arg(format!("walk length must be at least 2, got {len}")));
    }
    Ok(WalkStream {
        graph,
        table: graph.transition_table(kind),
        kind,
        walks_per_node,
        len,
        seed,
        next_node: 0,
        chunk: Vec::new().into_iter(),
    })
}

/// Debug dump: `kind id id id ...` per line.
pub fn write_walks<W: Write>(mut w: W, walks: impl IntoIterator<Item = Walk>, index: &EntityIndex) -> std::io::Result<()> {
    for walk in walks {
        write!(w, "{}", walk.kind)?;
        for v in &walk.nodes {
            write!(w, " {}:{}", index.kind(*v).as_str(), index.external(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
