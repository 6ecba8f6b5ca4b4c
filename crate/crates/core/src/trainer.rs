//! Bias and latent-vector learning from walk-sampled pairs.
//!
//! Objective over the sampled pair multisets:
//!
//! ```text
//! L = Σ_R ½(r_ui − r̂_ui)² + λ_b/2 ‖b‖² + λ_z/2 ‖Z‖²_F + α Σ_+ (−z_v·z_w) + β Σ_− z_v·z_w
//! r̂_ui = μ + b_u + b_i + z_u·z_i
//! ```
//!
//! Pairs are consumed one at a time in walk order; every pair triggers a
//! momentum step (`v ← γv − ηg; θ ← θ + v`) on the parameters it touches,
//! with the regularizer applied to those parameters only.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_unified_graph, UnifiedGraph, WalkKind};
use crate::ingest::{DatasetStats, EntityId, EntityIndex, RatingRecord, SocialEdge};
use crate::pairs::{visit_pairs, ClassifiedPair, CoocCounts, PairSet};
use crate::walker::{generate_walks, mix_seed, Walk};

/// Which training iterations feed the co-occurrence counts kept with the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoocScope {
    /// Every iteration that ran.
    #[default]
    All,
    /// Only the iteration whose parameters are returned.
    Last,
}

impl std::str::FromStr for CoocScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CoocScope::All),
            "last" => Ok(CoocScope::Last),
            _ => Err(Error::arg(format!("cooc scope must be all or last, got {s:?}"))),
        }
    }
}

impl std::fmt::Display for CoocScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoocScope::All => "all",
            CoocScope::Last => "last",
        })
    }
}

/// Update scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Sequential updates in stream order; bit-reproducible.
    #[default]
    Reference,
    /// Lock-free parallel updates over walks; not reproducible.
    Performance,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(TrainMode::Reference),
            "performance" => Ok(TrainMode::Performance),
            _ => Err(Error::arg(format!("mode must be reference or performance, got {s:?}"))),
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainMode::Reference => "reference",
            TrainMode::Performance => "performance",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Weight of social edges.
    pub c: f64,
    /// Walk length, start node included.
    pub walk_length: usize,
    /// Window radius.
    pub window: usize,
    /// Weight of the similar-pair term.
    pub alpha: f64,
    /// Weight of the dissimilar-pair term.
    pub beta: f64,
    pub dim: usize,
    pub lambda_b: f64,
    pub lambda_z: f64,
    /// Learning rate.
    pub eta: f64,
    /// Momentum.
    pub gamma: f64,
    pub walks_per_node: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Per-block Euclidean bound on gradients.
    pub grad_clip: f64,
    pub clamp_predictions: bool,
    /// Non-improving validation iterations tolerated before stopping.
    pub patience: usize,
    /// Share of the training ratings held out for early stopping.
    pub validation_fraction: f64,
    pub cooc_scope: CoocScope,
    pub mode: TrainMode,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self::filmtrust()
    }
}

impl Hyperparams {
    /// Settings for FilmTrust-like data (0.5–4 star scale, sparse trust).
    pub fn filmtrust() -> Self {
        Self {
            c: 5.0,
            walk_length: 30,
            window: 7,
            alpha: 0.05,
            beta: 0.005,
            dim: 25,
            lambda_b: 0.1,
            lambda_z: 0.1,
            eta: 0.01,
            gamma: 0.2,
            walks_per_node: 10,
            iterations: 10,
            seed: 0,
            grad_clip: 5.0,
            clamp_predictions: true,
            patience: 3,
            validation_fraction: 0.1,
            cooc_scope: CoocScope::All,
            mode: TrainMode::Reference,
        }
    }

    pub fn epinions() -> Self {
        Self {
            c: 6.0,
            walk_length: 50,
            alpha: 0.001,
            beta: 0.0007,
            lambda_b: 0.08,
            lambda_z: 1.3,
            eta: 0.003,
            gamma: 0.6,
            ..Self::filmtrust()
        }
    }

    pub fn flixster() -> Self {
        Self {
            c: 5.0,
            walk_length: 50,
            alpha: 0.001,
            beta: 0.001,
            lambda_b: 0.2,
            lambda_z: 0.2,
            eta: 0.005,
            gamma: 0.6,
            ..Self::filmtrust()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::arg(what.to_owned())) };
        check(self.c > 0.0 && self.c.is_finite(), "c must be positive")?;
        check(self.walk_length >= 2, "walk length must be at least 2")?;
        check(self.window >= 1, "window must be at least 1")?;
        check(self.alpha >= 0.0 && self.alpha.is_finite(), "alpha must be non-negative")?;
        check(self.beta >= 0.0 && self.beta.is_finite(), "beta must be non-negative")?;
        check(self.dim >= 1, "dim must be at least 1")?;
        check(self.lambda_b >= 0.0 && self.lambda_b.is_finite(), "lambda_b must be non-negative")?;
        check(self.lambda_z >= 0.0 && self.lambda_z.is_finite(), "lambda_z must be non-negative")?;
        check(self.eta > 0.0 && self.eta.is_finite(), "eta must be positive")?;
        check((0.0..1.0).contains(&self.gamma), "gamma must lie in [0, 1)")?;
        check(self.walks_per_node >= 1, "walks per node must be at least 1")?;
        check(self.grad_clip > 0.0, "gradient clip must be positive")?;
        check(
            (0.0..1.0).contains(&self.validation_fraction),
            "validation fraction must lie in [0, 1)",
        )
    }
}

/// Global mean, per-entity biases and latent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub dim: usize,
    pub bias: Vec<f64>,
    /// Row-major `entities × dim`.
    pub latent: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(entities: usize, dim: usize, mu: f64) -> Self {
        Self {
            mu,
            dim,
            bias: vec![0.0; entities],
            latent: vec![0.0; entities * dim],
        }
    }

    pub fn entity_count(&self) -> usize {
        self.bias.len()
    }

    #[inline]
    pub fn z(&self, v: EntityId) -> &[f64] {
        &self.latent[v.index() * self.dim..(v.index() + 1) * self.dim]
    }

    #[inline]
    pub fn z_mut(&mut self, v: EntityId) -> &mut [f64] {
        let d = self.dim;
        &mut self.latent[v.index() * d..(v.index() + 1) * d]
    }

    /// `μ + b_u + b_i + z_u·z_i`, unclamped.
    #[inline]
    pub fn predict_raw(&self, u: EntityId, i: EntityId) -> f64 {
        self.mu + self.bias[u.index()] + self.bias[i.index()] + dot(self.z(u), self.z(i))
    }

    /// Prediction where an unknown entity contributes no bias and a zero vector.
    pub fn predict_partial(&self, u: Option<EntityId>, i: Option<EntityId>) -> f64 {
        match (u, i) {
            (Some(u), Some(i)) => self.predict_raw(u, i),
            (Some(v), None) | (None, Some(v)) => self.mu + self.bias[v.index()],
            (None, None) => self.mu,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mu.is_finite() && self.bias.iter().chain(&self.latent).all(|x| x.is_finite())
    }

    pub fn latent_norm(&self) -> f64 {
        self.latent.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero biases; latent coordinates uniform in `±0.5/√d`.
pub fn init_model(index: &EntityIndex, dim: usize, mu: f64, seed: u64) -> Result<ModelParams> {
    if dim < 1 {
        return Err(Error::arg("dim must be at least 1"));
    }
    let mut params = ModelParams::zeros(index.len(), dim, mu);
    let scale = 0.5 / (dim as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x696e_6974]));
    for x in &mut params.latent {
        *x = rng.gen_range(-scale..=scale);
    }
    Ok(params)
}

/// Momentum buffers, one per learnable scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub bias_velocity: Vec<f64>,
    pub latent_velocity: Vec<f64>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            bias_velocity: vec![0.0; params.bias.len()],
            latent_velocity: vec![0.0; params.latent.len()],
        }
    }
}

/// Gradient of one pair's loss contribution with respect to the parameters it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub a: EntityId,
    pub b: EntityId,
    /// `(∂b_a, ∂b_b)` for rating pairs.
    pub bias: Option<(f64, f64)>,
    pub za: Vec<f64>,
    pub zb: Vec<f64>,
    /// `r̂ − r` for rating pairs.
    pub residual: Option<f64>,
}

impl PairGradient {
    fn empty(dim: usize) -> Self {
        Self {
            a: EntityId(0),
            b: EntityId(0),
            bias: None,
            za: vec![0.0; dim],
            zb: vec![0.0; dim],
            residual: None,
        }
    }
}

fn clip_vec(g: &mut [f64], max_norm: f64) {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

/// Gradient from the current values of the two endpoints.
#[allow(clippy::too_many_arguments)]
fn gradient_from(
    pair: &ClassifiedPair,
    mu: f64,
    ba: f64,
    bb: f64,
    za: &[f64],
    zb: &[f64],
    hp: &Hyperparams,
    out: &mut PairGradient,
) {
    out.a = pair.a;
    out.b = pair.b;
    let (wa, wb) = match pair.set {
        PairSet::R => {
            let r = pair.rating.expect("rating pair carries its rating");
            let e = mu + ba + bb + dot(za, zb) - r;
            let clip = hp.grad_clip;
            out.bias = Some((
                (e + hp.lambda_b * ba).clamp(-clip, clip),
                (e + hp.lambda_b * bb).clamp(-clip, clip),
            ));
            out.residual = Some(e);
            (e, e)
        }
        PairSet::Plus => {
            out.bias = None;
            out.residual = None;
            (-hp.alpha, -hp.alpha)
        }
        PairSet::Minus => {
            out.bias = None;
            out.residual = None;
            (hp.beta, hp.beta)
        }
    };
    for k in 0..za.len() {
        out.za[k] = wa * zb[k] + hp.lambda_z * za[k];
        out.zb[k] = wb * za[k] + hp.lambda_z * zb[k];
    }
    clip_vec(&mut out.za, hp.grad_clip);
    clip_vec(&mut out.zb, hp.grad_clip);
}

/// Gradient of `pair`'s term plus the regularizer on the touched parameters,
/// clipped per block to `hp.grad_clip`.
pub fn pair_gradient(model: &ModelParams, pair: &ClassifiedPair, hp: &Hyperparams) -> PairGradient {
    let mut out = PairGradient::empty(model.dim);
    gradient_from(
        pair,
        model.mu,
        model.bias[pair.a.index()],
        model.bias[pair.b.index()],
        model.z(pair.a),
        model.z(pair.b),
        hp,
        &mut out,
    );
    out
}

/// Parameter update produced a non-finite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFinite;

/// Momentum step on the parameters named by `grad`.
pub fn apply_update(
    model: &mut ModelParams,
    state: &mut OptimizerState,
    grad: &PairGradient,
    eta: f64,
    gamma: f64,
) -> Result<(), NonFinite> {
    let mut store = PlainStore { params: model, state };
    store_update(&mut store, grad, eta, gamma)
}

/// Access to parameters and their momentum buffers.
trait ParamStore {
    fn bias(&self, v: usize) -> f64;
    fn read_row(&self, v: usize, out: &mut [f64]);
    /// Momentum step on `b_v`; false when the result is not finite.
    fn step_bias(&mut self, v: usize, g: f64, eta: f64, gamma: f64) -> bool;
    /// Momentum step on `z_v`; false when any coordinate is not finite.
    fn step_row(&mut self, v: usize, g: &[f64], eta: f64, gamma: f64) -> bool;
}

struct PlainStore<'a> {
    params: &'a mut ModelParams,
    state: &'a mut OptimizerState,
}

#[inline]
fn momentum(theta: &mut f64, velocity: &mut f64, g: f64, eta: f64, gamma: f64) -> bool {
    *velocity = gamma * *velocity - eta * g;
    *theta += *velocity;
    theta.is_finite()
}

impl ParamStore for PlainStore<'_> {
    #[inline]
    fn bias(&self, v: usize) -> f64 {
        self.params.bias[v]
    }

    #[inline]
    fn read_row(&self, v: usize, out: &mut [f64]) {
        out.copy_from_slice(self.params.z(EntityId(v as u32)));
    }

    #[inline]
    fn step_bias(&mut self, v: usize, g: f64, eta: f64, gamma: f64) -> bool {
        momentum(&mut self.params.bias[v], &mut self.state.bias_velocity[v], g, eta, gamma)
    }

    #[inline]
    fn step_row(&mut self, v: usize, g: &[f64], eta: f64, gamma: f64) -> bool {
        let d = g.len();
        let theta = &mut self.params.latent[v * d..(v + 1) * d];
        let vel = &mut self.state.latent_velocity[v * d..(v + 1) * d];
        let mut finite = true;
        for ((t, u), &gk) in theta.iter_mut().zip(vel.iter_mut()).zip(g) {
            finite &= momentum(t, u, gk, eta, gamma);
        }
        finite
    }
}

/// f64 bits in relaxed atomics; concurrent writers may overwrite each other.
struct SharedParams {
    bias: Vec<AtomicU64>,
    bias_velocity: Vec<AtomicU64>,
    latent: Vec<AtomicU64>,
    latent_velocity: Vec<AtomicU64>,
}

fn to_atomic(xs: &[f64]) -> Vec<AtomicU64> {
    xs.iter().map(|x| AtomicU64::new(x.to_bits())).collect()
}

fn from_atomic(xs: &[AtomicU64]) -> Vec<f64> {
    xs.iter().map(|x| f64::from_bits(x.load(Ordering::Relaxed))).collect()
}

impl SharedParams {
    fn new(params: &ModelParams, state: &OptimizerState) -> Self {
        Self {
            bias: to_atomic(&params.bias),
            bias_velocity: to_atomic(&state.bias_velocity),
            latent: to_atomic(&params.latent),
            latent_velocity: to_atomic(&state.latent_velocity),
        }
    }

    fn write_back(&self, params: &mut ModelParams, state: &mut OptimizerState) {
        params.bias = from_atomic(&self.bias);
        params.latent = from_atomic(&self.latent);
        state.bias_velocity = from_atomic(&self.bias_velocity);
        state.latent_velocity = from_atomic(&self.latent_velocity);
    }
}

#[inline]
fn load(x: &AtomicU64) -> f64 {
    f64::from_bits(x.load(Ordering::Relaxed))
}

#[inline]
fn atomic_momentum(theta: &AtomicU64, velocity: &AtomicU64, g: f64, eta: f64, gamma: f64) -> bool {
    let (mut t, mut u) = (load(theta), load(velocity));
    let finite = momentum(&mut t, &mut u, g, eta, gamma);
    velocity.store(u.to_bits(), Ordering::Relaxed);
    theta.store(t.to_bits(), Ordering::Relaxed);
    finite
}

impl ParamStore for &SharedParams {
    #[inline]
    fn bias(&self, v: usize) -> f64 {
        load(&self.bias[v])
    }

    #[inline]
    fn read_row(&self, v: usize, out: &mut [f64]) {
        let d = out.len();
        for (o, x) in out.iter_mut().zip(&self.latent[v * d..(v + 1) * d]) {
            *o = load(x);
        }
    }

    #[inline]
    fn step_bias(&mut self, v: usize, g: f64, eta: f64, gamma: f64) -> bool {
        atomic_momentum(&self.bias[v], &self.bias_velocity[v], g, eta, gamma)
    }

    #[inline]
    fn step_row(&mut self, v: usize, g: &[f64], eta: f64, gamma: f64) -> bool {
        let d = g.len();
        let theta = &self.latent[v * d..(v + 1) * d];
        let vel = &self.latent_velocity[v * d..(v + 1) * d];
        let mut finite = true;
        for ((t, u), &gk) in theta.iter().zip(vel).zip(g) {
            finite &= atomic_momentum(t, u, gk, eta, gamma);
        }
        finite
    }
}

fn store_update<S: ParamStore>(s: &mut S, grad: &PairGradient, eta: f64, gamma: f64) -> Result<(), NonFinite> {
    let mut finite = true;
    if let Some((ga, gb)) = grad.bias {
        finite &= s.step_bias(grad.a.index(), ga, eta, gamma);
        finite &= s.step_bias(grad.b.index(), gb, eta, gamma);
    }
    finite &= s.step_row(grad.a.index(), &grad.za, eta, gamma);
    finite &= s.step_row(grad.b.index(), &grad.zb, eta, gamma);
    if finite {
        Ok(())
    } else {
        Err(NonFinite)
    }
}

/// Scratch buffers for one pair step.
struct Scratch {
    za: Vec<f64>,
    zb: Vec<f64>,
    grad: PairGradient,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            za: vec![0.0; dim],
            zb: vec![0.0; dim],
            grad: PairGradient::empty(dim),
        }
    }
}

/// Gradient at the store's current values followed by the momentum step.
fn step<S: ParamStore>(
    s: &mut S,
    pair: &ClassifiedPair,
    mu: f64,
    hp: &Hyperparams,
    scratch: &mut Scratch,
) -> Result<Option<f64>, NonFinite> {
    let (a, b) = (pair.a.index(), pair.b.index());
    s.read_row(a, &mut scratch.za);
    s.read_row(b, &mut scratch.zb);
    gradient_from(pair, mu, s.bias(a), s.bias(b), &scratch.za, &scratch.zb, hp, &mut scratch.grad);
    store_update(s, &scratch.grad, hp.eta, hp.gamma)?;
    Ok(scratch.grad.residual)
}

/// Objective value over an explicit pair snapshot.
pub fn loss_value(model: &ModelParams, pairs: &[ClassifiedPair], hp: &Hyperparams) -> f64 {
    let mut supervised = 0.0;
    let mut positive = 0.0;
    let mut negative = 0.0;
    for p in pairs {
        let ip = dot(model.z(p.a), model.z(p.b));
        match p.set {
            PairSet::R => {
                let r = p.rating.expect("rating pair carries its rating");
                let e = r - model.predict_raw(p.a, p.b);
                supervised += 0.5 * e * e;
            }
            PairSet::Plus => positive -= ip,
            PairSet::Minus => negative += ip,
        }
    }
    let b2: f64 = model.bias.iter().map(|x| x * x).sum();
    let z2: f64 = model.latent.iter().map(|x| x * x).sum();
    supervised + 0.5 * hp.lambda_b * b2 + 0.5 * hp.lambda_z * z2 + hp.alpha * positive + hp.beta * negative
}

/// Entity index, unified graph and rating statistics of one training set.
#[derive(Debug)]
pub struct TrainingSet {
    pub index: EntityIndex,
    pub graph: UnifiedGraph,
    pub stats: DatasetStats,
}

impl TrainingSet {
    pub fn build(ratings: &[RatingRecord], social: &[SocialEdge], c: f64) -> Result<Self> {
        if ratings.is_empty() {
            return Err(Error::arg("no training ratings"));
        }
        let index = EntityIndex::from_data(ratings, social);
        let graph = build_unified_graph(ratings, social, c, &index)?;
        let stats = DatasetStats::from_ratings(ratings, social.len());
        Ok(Self { index, graph, stats })
    }

    /// Resolve held-out ratings against this set's index.
    pub fn resolve(&self, ratings: &[RatingRecord]) -> Vec<ResolvedRating> {
        ratings
            .iter()
            .map(|r| ResolvedRating {
                user: self.index.user(&r.user),
                item: self.index.item(&r.item),
                value: r.value,
            })
            .collect()
    }
}

/// A rating whose entities may be unknown to the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedRating {
    pub user: Option<EntityId>,
    pub item: Option<EntityId>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 0 is the initialized model.
    pub iteration: usize,
    /// RMS of the residuals of the rating pairs consumed during the iteration.
    pub supervised_rmse: Option<f64>,
    /// RMSE over all training ratings after the iteration.
    pub train_rmse: f64,
    pub validation_rmse: Option<f64>,
    pub rating_pairs: u64,
    pub similar_pairs: u64,
    pub dissimilar_pairs: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub iterations: Vec<IterationRecord>,
    /// Iteration whose parameters were returned.
    pub best_iteration: usize,
    pub stopped_early: bool,
}

impl TrainingTrace {
    pub fn validation_rmse(&self, iteration: usize) -> Option<f64> {
        self.iterations
            .iter()
            .find(|r| r.iteration == iteration)
            .and_then(|r| r.validation_rmse)
    }

    /// Tab-separated trace file.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("iteration\tsupervised_rmse\ttrain_rmse\tvalidation_rmse\trating_pairs\tsimilar_pairs\tdissimilar_pairs\tseconds\n");
        let opt = |x: Option<f64>| x.map_or_else(|| "-".to_owned(), |v| format!("{v:.6}"));
        for r in &self.iterations {
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{}\t{}\t{}\t{}\t{:.3}\n",
                r.iteration,
                opt(r.supervised_rmse),
                r.train_rmse,
                opt(r.validation_rmse),
                r.rating_pairs,
                r.similar_pairs,
                r.dissimilar_pairs,
                r.seconds
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub cooc: CoocCounts,
    pub trace: TrainingTrace,
}

fn rmse_on(params: &ModelParams, ratings: impl Iterator<Item = ResolvedRating>, clamp: Option<(f64, f64)>) -> f64 {
    let (mut se, mut n) = (0.0, 0usize);
    for r in ratings {
        let mut p = params.predict_partial(r.user, r.item);
        if let Some((lo, hi)) = clamp {
            p = p.clamp(lo, hi);
        }
        se += (p - r.value).powi(2);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (se / n as f64).sqrt()
    }
}

fn training_ratings(graph: &UnifiedGraph) -> impl Iterator<Item = ResolvedRating> + '_ {
    graph
        .nodes()
        .filter(|&v| graph.kind(v) == crate::ingest::EntityKind::User)
        .flat_map(move |u| {
            graph.ratings_of(u).map(move |(i, r)| ResolvedRating {
                user: Some(u),
                item: Some(i),
                value: r,
            })
        })
}

#[derive(Default)]
struct IterationTally {
    rating_pairs: u64,
    similar_pairs: u64,
    dissimilar_pairs: u64,
    squared_residual: f64,
}

impl IterationTally {
    fn count(&mut self, pair: &ClassifiedPair, residual: Option<f64>) {
        match pair.set {
            PairSet::R => {
                self.rating_pairs += 1;
                if let Some(e) = residual {
                    self.squared_residual += e * e;
                }
            }
            PairSet::Plus => self.similar_pairs += 1,
            PairSet::Minus => self.dissimilar_pairs += 1,
        }
    }

    fn merge(&mut self, other: IterationTally) {
        self.rating_pairs += other.rating_pairs;
        self.similar_pairs += other.similar_pairs;
        self.dissimilar_pairs += other.dissimilar_pairs;
        self.squared_residual += other.squared_residual;
    }
}

/// Learn parameters on `set`, optionally early-stopping on `validation`.
pub fn train(set: &TrainingSet, hp: &Hyperparams, validation: Option<&[ResolvedRating]>) -> Result<TrainOutput> {
    hp.validate()?;
    let graph = &set.graph;
    if graph.node_count() == 0 {
        return Err(Error::arg("training graph is empty"));
    }
    let mu = set.stats.mu;
    let clamp = hp.clamp_predictions.then_some((set.stats.min_r, set.stats.max_r));
    let mut params = init_model(&set.index, hp.dim, mu, hp.seed)?;
    let mut state = OptimizerState::new(&params);
    let mut cooc = CoocCounts::new();
    let mut trace = TrainingTrace::default();

    let evaluate = |params: &ModelParams| {
        let train = rmse_on(params, training_ratings(graph), clamp);
        let val = validation.filter(|v| !v.is_empty()).map(|v| rmse_on(params, v.iter().copied(), clamp));
        (train, val)
    };
    let (train0, val0) = evaluate(&params);
    trace.iterations.push(IterationRecord {
        iteration: 0,
        supervised_rmse: None,
        train_rmse: train0,
        validation_rmse: val0,
        rating_pairs: 0,
        similar_pairs: 0,
        dissimilar_pairs: 0,
        seconds: 0.0,
    });
    let mut best: Option<(f64, usize, ModelParams, CoocCounts)> = None;
    let mut stale = 0;

    for iteration in 1..=hp.iterations {
        let started = Instant::now();
        let mut iter_cooc = CoocCounts::new();
        let mut tally = IterationTally::default();
        let iter_seed = mix_seed(&[hp.seed, iteration as u64]);
        for kind in WalkKind::ALL {
            let walks = generate_walks(graph, kind, hp.walks_per_node, hp.walk_length, iter_seed)?;
            match hp.mode {
                TrainMode::Reference => {
                    run_sequential(graph, walks, hp, mu, &mut params, &mut state, &mut iter_cooc, &mut tally)
                        .map_err(|pair| Error::Divergence { iteration, walk: kind.as_str(), pair })?
                }
                TrainMode::Performance => {
                    run_shared(graph, walks, hp, mu, &mut params, &mut state, &mut iter_cooc, &mut tally)
                        .map_err(|pair| Error::Divergence { iteration, walk: kind.as_str(), pair })?
                }
            }
        }
        let (train_rmse, validation_rmse) = evaluate(&params);
        trace.iterations.push(IterationRecord {
            iteration,
            supervised_rmse: (tally.rating_pairs > 0)
                .then(|| (tally.squared_residual / tally.rating_pairs as f64).sqrt()),
            train_rmse,
            validation_rmse,
            rating_pairs: tally.rating_pairs,
            similar_pairs: tally.similar_pairs,
            dissimilar_pairs: tally.dissimilar_pairs,
            seconds: started.elapsed().as_secs_f64(),
        });
        match hp.cooc_scope {
            CoocScope::All => cooc.merge(&iter_cooc),
            CoocScope::Last => cooc = iter_cooc.clone(),
        }

        if let Some(val) = validation_rmse {
            let improved = best.as_ref().is_none_or(|(b, ..)| val < *b);
            if improved {
                best = Some((val, iteration, params.clone(), iter_cooc));
                stale = 0;
            } else {
                stale += 1;
                if stale >= hp.patience.max(1) {
                    trace.stopped_early = iteration < hp.iterations;
                    break;
                }
            }
        }
    }

    let last_iteration = trace.iterations.last().map_or(0, |r| r.iteration);
    match best {
        Some((_, it, best_params, best_cooc)) => {
            trace.best_iteration = it;
            if hp.cooc_scope == CoocScope::Last {
                cooc = best_cooc;
            }
            Ok(TrainOutput { params: best_params, cooc, trace })
        }
        None => {
            trace.best_iteration = last_iteration;
            Ok(TrainOutput { params, cooc, trace })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_sequential(
    graph: &UnifiedGraph,
    walks: impl Iterator<Item = Walk>,
    hp: &Hyperparams,
    mu: f64,
    params: &mut ModelParams,
    state: &mut OptimizerState,
    cooc: &mut CoocCounts,
    tally: &mut IterationTally,
) -> Result<(), u64> {
    let mut scratch = Scratch::new(hp.dim);
    let mut buf = Vec::new();
    let mut ordinal = 0u64;
    let mut store = PlainStore { params, state };
    for walk in walks {
        buf.clear();
        visit_pairs(&walk, hp.window, graph, |p| buf.push(p));
        for pair in &buf {
            if pair.set == PairSet::Plus {
                cooc.add(pair.a, pair.b);
            }
            let residual = step(&mut store, pair, mu, hp, &mut scratch).map_err(|_| ordinal)?;
            tally.count(pair, residual);
            ordinal += 1;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_shared(
    graph: &UnifiedGraph,
    walks: impl Iterator<Item = Walk>,
    hp: &Hyperparams,
    mu: f64,
    params: &mut ModelParams,
    state: &mut OptimizerState,
    cooc: &mut CoocCounts,
    tally: &mut IterationTally,
) -> Result<(), u64> {
    let shared = SharedParams::new(params, state);
    let walks: Vec<Walk> = walks.collect();
    let results: Vec<Result<(CoocCounts, IterationTally), u64>> = walks
        .par_chunks(256)
        .enumerate()
        .map(|(chunk_no, chunk)| {
            let mut s = &shared;
            let mut scratch = Scratch::new(hp.dim);
            let mut local_cooc = CoocCounts::new();
            let mut local = IterationTally::default();
            let mut buf = Vec::new();
            let mut ordinal = (chunk_no as u64) << 32;
            for walk in chunk {
                buf.clear();
                visit_pairs(walk, hp.window, graph, |p| buf.push(p));
                for pair in &buf {
                    if pair.set == PairSet::Plus {
                        local_cooc.add(pair.a, pair.b);
                    }
                    let residual = step(&mut s, pair, mu, hp, &mut scratch).map_err(|_| ordinal)?;
                    local.count(pair, residual);
                    ordinal += 1;
                }
            }
            Ok((local_cooc, local))
        })
        .collect();
    shared.write_back(params, state);
    for r in results {
        let (c, t) = r?;
        cooc.merge(&c);
        tally.merge(t);
    }
    Ok(())
}
