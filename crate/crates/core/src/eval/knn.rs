//! User-based and item-based neighborhood baselines.
//!
//! Similarity is cosine over zero-filled rating vectors; only co-rated
//! entries contribute to the dot product. A prediction is the plain mean of
//! the `k` most similar neighbors' ratings (fewer when fewer exist), or the
//! global mean when nobody qualifies.

use std::collections::HashMap;

use crate::ingest::RatingRecord;

#[derive(Debug, Clone)]
pub struct KnnModel {
    mu: f64,
    users: HashMap<String, usize>,
    items: HashMap<String, usize>,
    /// Sorted by item.
    by_user: Vec<Vec<(usize, f64)>>,
    /// Sorted by user.
    by_item: Vec<Vec<(usize, f64)>>,
    user_norm: Vec<f64>,
    item_norm: Vec<f64>,
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

fn norm(v: &[(usize, f64)]) -> f64 {
    v.iter().map(|(_, r)| r * r).sum::<f64>().sqrt()
}

fn cosine(a: &[(usize, f64)], na: f64, b: &[(usize, f64)], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        sparse_dot(a, b) / (na * nb)
    }
}

/// Prefix means of neighbor ratings ordered by similarity, one per `k`.
fn top_k_means(mut scored: Vec<(f64, usize, f64)>, ks: &[usize], fallback: f64) -> Vec<f64> {
    if scored.is_empty() {
        return vec![fallback; ks.len()];
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut prefix = Vec::with_capacity(scored.len() + 1);
    prefix.push(0.0);
    for (_, _, r) in &scored {
        prefix.push(prefix.last().unwrap() + r);
    }
    ks.iter()
        .map(|&k| {
            let m = k.max(1).min(scored.len());
            prefix[m] / m as f64
        })
        .collect()
}

impl KnnModel {
    pub fn new(ratings: &[RatingRecord]) -> Self {
        let mut users = HashMap::new();
        let mut items = HashMap::new();
        let mut by_user: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut by_item: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut sum = 0.0;
        for r in ratings {
            let n = users.len();
            let u = *users.entry(r.user.clone()).or_insert(n);
            let n = items.len();
            let i = *items.entry(r.item.clone()).or_insert(n);
            if u == by_user.len() {
                by_user.push(Vec::new());
            }
            if i == by_item.len() {
                by_item.push(Vec::new());
            }
            by_user[u].push((i, r.value));
            by_item[i].push((u, r.value));
            sum += r.value;
        }
        by_user.iter_mut().for_each(|v| v.sort_by_key(|x| x.0));
        by_item.iter_mut().for_each(|v| v.sort_by_key(|x| x.0));
        let user_norm = by_user.iter().map(|v| norm(v)).collect();
        let item_norm = by_item.iter().map(|v| norm(v)).collect();
        Self {
            mu: if ratings.is_empty() { 0.0 } else { sum / ratings.len() as f64 },
            users,
            items,
            by_user,
            by_item,
            user_norm,
            item_norm,
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// User-based predictions for several neighborhood sizes at once.
    pub fn ucf_many(&self, user: &str, item: &str, ks: &[usize]) -> Vec<f64> {
        let Some(&i) = self.items.get(item) else {
            return vec![self.mu; ks.len()];
        };
        let u = self.users.get(user).copied();
        let scored = self.by_item[i]
            .iter()
            .filter(|&&(v, _)| Some(v) != u)
            .map(|&(v, r)| {
                let sim = u.map_or(0.0, |u| {
                    cosine(&self.by_user[u], self.user_norm[u], &self.by_user[v], self.user_norm[v])
                });
                (sim, v, r)
            })
            .collect();
        top_k_means(scored, ks, self.mu)
    }

    /// Item-based predictions for several neighborhood sizes at once.
    pub fn icf_many(&self, user: &str, item: &str, ks: &[usize]) -> Vec<f64> {
        let Some(&u) = self.users.get(user) else {
            return vec![self.mu; ks.len()];
        };
        let i = self.items.get(item).copied();
        let scored = self.by_user[u]
            .iter()
            .filter(|&&(j, _)| Some(j) != i)
            .map(|&(j, r)| {
                let sim = i.map_or(0.0, |i| {
                    cosine(&self.by_item[i], self.item_norm[i], &self.by_item[j], self.item_norm[j])
                });
                (sim, j, r)
            })
            .collect();
        top_k_means(scored, ks, self.mu)
    }

    pub fn ucf(&self, user: &str, item: &str, k: usize) -> f64 {
        self.ucf_many(user, item, &[k])[0]
    }

    pub fn icf(&self, user: &str, item: &str, k: usize) -> f64 {
        self.icf_many(user, item, &[k])[0]
    }
}

/// Mean rating of `item` among the `k` users most cosine-similar to `user`.
pub fn ucf_predict(ratings: &[RatingRecord], user: &str, item: &str, k: usize) -> f64 {
    KnnModel::new(ratings).ucf(user, item, k)
}

/// Mean of `user`'s ratings on the `k` items most cosine-similar to `item`.
pub fn icf_predict(ratings: &[RatingRecord], user: &str, item: &str, k: usize) -> f64 {
    KnnModel::new(ratings).icf(user, item, k)
}
