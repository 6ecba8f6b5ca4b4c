//! Seeded rating and trust data with FilmTrust-like shape.
//!
//! Users fall into communities. A user's taste vector is the community
//! center plus noise, and most friendships stay inside a community, so the
//! social graph carries real signal about ratings. Ratings are snapped to a
//! half-star grid. User and item ids are both plain integers starting at 1.

use std::collections::HashSet;
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::ingest::{RatingRecord, SocialEdge};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub communities: usize,
    /// Latent dimension of the generating model.
    pub dim: usize,
    pub ratings_per_user: f64,
    pub friends_per_user: f64,
    /// Probability that a friendship stays inside the community.
    pub homophily: f64,
    /// Standard deviation of the rating noise.
    pub noise: f64,
    pub min_rating: f64,
    pub max_rating: f64,
    pub step: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 1500,
            items: 2000,
            communities: 12,
            dim: 5,
            ratings_per_user: 23.0,
            friends_per_user: 2.5,
            homophily: 0.85,
            noise: 0.45,
            min_rating: 0.5,
            max_rating: 4.0,
            step: 0.5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthData {
    pub ratings: Vec<RatingRecord>,
    pub social: Vec<SocialEdge>,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, sd).expect("finite sd");
    (0..n).map(|_| normal.sample(rng)).collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    if cfg.users < 2 || cfg.items < 2 || cfg.communities < 1 || cfg.dim < 1 {
        return Err(Error::arg("synthetic data needs at least 2 users, 2 items, 1 community and dim 1"));
    }
    if !(cfg.step > 0.0 && cfg.min_rating < cfg.max_rating && cfg.noise >= 0.0) {
        return Err(Error::arg("invalid synthetic rating scale or noise"));
    }
    if !(0.0..=1.0).contains(&cfg.homophily) || cfg.ratings_per_user < 1.0 || cfg.friends_per_user < 0.0 {
        return Err(Error::arg("invalid synthetic density or homophily"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;
    let factor_sd = 1.0 / (d as f64).sqrt();
    let centers: Vec<Vec<f64>> = (0..cfg.communities).map(|_| gaussian_vec(&mut rng, d, factor_sd)).collect();
    let community: Vec<usize> = (0..cfg.users).map(|_| rng.gen_range(0..cfg.communities)).collect();
    let users: Vec<Vec<f64>> = community
        .iter()
        .map(|&c| {
            let jitter = gaussian_vec(&mut rng, d, 0.35 * factor_sd);
            centers[c].iter().zip(jitter).map(|(a, b)| a + b).collect()
        })
        .collect();
    let items: Vec<Vec<f64>> = (0..cfg.items).map(|_| gaussian_vec(&mut rng, d, factor_sd)).collect();
    let user_bias = gaussian_vec(&mut rng, cfg.users, 0.3);
    let item_bias = gaussian_vec(&mut rng, cfg.items, 0.3);
    let mid = 0.5 * (cfg.min_rating + cfg.max_rating) + 0.3;
    let spread = 0.5 * (cfg.max_rating - cfg.min_rating);

    // Zipf-like popularity
    let popularity = WeightedIndex::new((0..cfg.items).map(|k| 1.0 / (k as f64 + 10.0).powf(0.9))).expect("positive weights");
    let noise = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("finite noise");
    let mut ratings = Vec::new();
    for u in 0..cfg.users {
        let target = {
            let x: f64 = rng.gen_range(0.0f64..1.0);
            ((-(1.0 - x).ln()) * cfg.ratings_per_user).round().max(2.0) as usize
        }
        .min(cfg.items);
        let mut seen = HashSet::with_capacity(target);
        while seen.len() < target {
            let i = popularity.sample(&mut rng);
            if !seen.insert(i) {
                continue;
            }
            let affinity: f64 = users[u].iter().zip(&items[i]).map(|(a, b)| a * b).sum();
            let raw = mid + user_bias[u] + item_bias[i] + spread * affinity + noise.sample(&mut rng);
            let snapped = (raw / cfg.step).round() * cfg.step;
            ratings.push(RatingRecord::new((u + 1).to_string(), (i + 1).to_string(), snapped.clamp(cfg.min_rating, cfg.max_rating)));
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cfg.communities];
    for (u, &c) in community.iter().enumerate() {
        members[c].push(u);
    }
    let want = (cfg.users as f64 * cfg.friends_per_user / 2.0).round() as usize;
    let mut edges = HashSet::new();
    let mut attempts = 0;
    while edges.len() < want && attempts < want * 20 {
        attempts += 1;
        let a = rng.gen_range(0..cfg.users);
        let b = if rng.gen_bool(cfg.homophily) {
            let group = &members[community[a]];
            group[rng.gen_range(0..group.len())]
        } else {
            rng.gen_range(0..cfg.users)
        };
        if let Some(e) = SocialEdge::new((a + 1).to_string(), (b + 1).to_string()) {
            edges.insert(e);
        }
    }
    let mut social: Vec<SocialEdge> = edges.into_iter().collect();
    social.sort();
    Ok(SynthData { ratings, social })
}

/// Trust lines `a b 1`, one per undirected edge.
pub fn write_trust<W: Write>(mut w: W, social: &[SocialEdge]) -> std::io::Result<()> {
    for e in social {
        writeln!(w, "{} {} 1", e.a, e.b)?;
    }
    Ok(())
}
