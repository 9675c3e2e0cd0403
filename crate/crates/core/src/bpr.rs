//! Pairwise matrix-factorization recommender (BPR) trained with Adam, plus
//! candidate scoring, checkpoints and external score ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::{IdIndex, InteractionLog};
use crate::error::{Error, Result};
use crate::ranking::{by_score_then_id, RankedList};
use crate::seed;

/// User and item latent factors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
    num_users: usize,
    num_items: usize,
    dim: usize,
    seed: u64,
}

impl FactorModel {
    pub fn from_parts(
        user_factors: Vec<f64>,
        item_factors: Vec<f64>,
        num_users: usize,
        num_items: usize,
        dim: usize,
    ) -> Result<Self> {
        if user_factors.len() != num_users * dim || item_factors.len() != num_items * dim {
            return Err(Error::invalid("factor matrix sizes do not match dimensions"));
        }
        Ok(Self {
            user_factors,
            item_factors,
            num_users,
            num_items,
            dim,
            seed: 0,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn user(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item(&self, i: usize) -> &[f64] {
        &self.item_factors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn user_factors(&self) -> &[f64] {
        &self.user_factors
    }

    pub fn item_factors(&self) -> &[f64] {
        &self.item_factors
    }

    #[inline]
    pub fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.user(user), self.item(item))
    }

    pub fn is_finite(&self) -> bool {
        self.user_factors.iter().chain(&self.item_factors).all(|x| x.is_finite())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factors drawn uniformly from `[0, 1]`.
pub fn init_model(num_users: usize, num_items: usize, dim: usize, seed: u64) -> Result<FactorModel> {
    if num_users == 0 || num_items == 0 || dim == 0 {
        return Err(Error::invalid("model needs ≥1 user, item and dimension"));
    }
    let mut rng = seed::rng(seed::derive(seed, "init"));
    let user_factors = (0..num_users * dim).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let item_factors = (0..num_items * dim).map(|_| rng.gen_range(0.0..=1.0)).collect();
    Ok(FactorModel {
        user_factors,
        item_factors,
        num_users,
        num_items,
        dim,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub user: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub triplets_per_positive: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            epochs: 20,
            batch_size: 1024,
            triplets_per_positive: 10,
            learning_rate: 0.001,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.epochs == 0 || self.batch_size == 0 || self.triplets_per_positive == 0 {
            return Err(Error::invalid("training counts must be > 0"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// `per_positive` triplets for every observed (user, item) pair, each with a
/// negative drawn uniformly from the items the user has not interacted with.
/// Users who interacted with every item are skipped.
pub fn sample_triplets(train: &InteractionLog, per_positive: usize, seed: u64) -> Vec<Triplet> {
    let mut rng = seed::rng(seed);
    let n_items = train.num_items();
    let mut out = Vec::with_capacity(train.len() * per_positive);
    let mut saturated = 0usize;
    for (user, profile) in train.profiles().iter().enumerate() {
        if profile.is_empty() {
            continue;
        }
        if profile.len() >= n_items {
            saturated += 1;
            continue;
        }
        let n_neg = n_items - profile.len();
        for &positive in profile {
            for _ in 0..per_positive {
                // r-th unobserved item: skip over the sorted profile
                let mut negative = rng.gen_range(0..n_neg);
                for &seen in profile {
                    if seen <= negative {
                        negative += 1;
                    } else {
                        break;
                    }
                }
                out.push(Triplet { user, positive, negative });
            }
        }
    }
    if saturated > 0 {
        warn!("{saturated} user(s) interacted with every item; no triplets sampled for them");
    }
    out
}

#[inline]
fn log_sigmoid(x: f64) -> f64 {
    // ln σ(x) = −ln(1 + e^{−x}), stable for large |x|
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood `−mean ln σ(x_ui − x_uj)` over `triplets`.
pub fn bpr_loss(model: &FactorModel, triplets: &[Triplet]) -> f64 {
    if triplets.is_empty() {
        return 0.0;
    }
    let total: f64 = triplets
        .iter()
        .map(|t| -log_sigmoid(model.score(t.user, t.positive) - model.score(t.user, t.negative)))
        .sum();
    total / triplets.len() as f64
}

/// Gradient of [`bpr_loss`] with respect to the user and item factors.
pub fn bpr_gradient(model: &FactorModel, triplets: &[Triplet]) -> (Vec<f64>, Vec<f64>) {
    let mut gu = vec![0.0; model.user_factors.len()];
    let mut gi = vec![0.0; model.item_factors.len()];
    accumulate_gradient(model, triplets, &mut gu, &mut gi);
    (gu, gi)
}

fn accumulate_gradient(model: &FactorModel, triplets: &[Triplet], gu: &mut [f64], gi: &mut [f64]) {
    let d = model.dim;
    let scale = 1.0 / triplets.len() as f64;
    for t in triplets {
        let wu = model.user(t.user);
        let xp = model.item(t.positive);
        let xn = model.item(t.negative);
        let diff = dot(wu, xp) - dot(wu, xn);
        // d/d diff of −ln σ(diff) = −(1 − σ(diff))
        let g = -(1.0 - sigmoid(diff)) * scale;
        let (u0, p0, n0) = (t.user * d, t.positive * d, t.negative * d);
        for f in 0..d {
            gu[u0 + f] += g * (xp[f] - xn[f]);
            gi[p0 + f] += g * wu[f];
            gi[n0 + f] -= g * wu[f];
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            lr,
        }
    }

    /// One dense update of `params` (the concatenation of both factor matrices).
    fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step);
        let step_size = self.lr / bc1;
        let mut offset = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            let m = &mut self.m[offset..offset + p.len()];
            let v = &mut self.v[offset..offset + p.len()];
            for j in 0..p.len() {
                m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
                v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                p[j] -= step_size * m[j] / ((v[j] / bc2).sqrt() + ADAM_EPSILON);
            }
            offset += p.len();
        }
    }
}

/// Result of [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: FactorModel,
    /// BPR loss on a fixed monitoring triplet set, measured after each epoch.
    pub epoch_loss: Vec<f64>,
    /// Mean mini-batch loss seen during each epoch.
    pub running_loss: Vec<f64>,
}

/// Train with Adam on freshly sampled triplets every epoch.
pub fn train(model: FactorModel, train: &InteractionLog, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if model.num_users != train.num_users() || model.num_items != train.num_items() {
        return Err(Error::invalid(format!(
            "model is {}×{} but the log has {} users and {} items",
            model.num_users,
            model.num_items,
            train.num_users(),
            train.num_items()
        )));
    }
    let mut model = model;
    let monitor = sample_triplets(train, 1, seed::derive(config.seed, "monitor"));
    let mut adam = Adam::new(model.user_factors.len() + model.item_factors.len(), config.learning_rate);
    let mut gu = vec![0.0; model.user_factors.len()];
    let mut gi = vec![0.0; model.item_factors.len()];
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    let mut running_loss = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let epoch_seed = seed::derive_indexed(config.seed, "epoch", epoch as u64);
        let mut triplets = sample_triplets(train, config.triplets_per_positive, epoch_seed);
        if triplets.is_empty() {
            return Err(Error::invalid("no training triplets could be sampled"));
        }
        triplets.shuffle(&mut seed::rng(seed::derive(epoch_seed, "shuffle")));
        let mut running = 0.0;
        for (batch_idx, batch) in triplets.chunks(config.batch_size).enumerate() {
            running += bpr_loss(&model, batch) * batch.len() as f64;
            gu.iter_mut().for_each(|g| *g = 0.0);
            gi.iter_mut().for_each(|g| *g = 0.0);
            accumulate_gradient(&model, batch, &mut gu, &mut gi);
            if config.learning_rate > 0.0 {
                let FactorModel {
                    user_factors,
                    item_factors,
                    ..
                } = &mut model;
                adam.update(&mut [user_factors, item_factors], &[&gu, &gi]);
            }
            if !model.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
        }
        running_loss.push(running / triplets.len() as f64);
        epoch_loss.push(bpr_loss(&model, &monitor));
    }
    Ok(TrainOutcome {
        model,
        epoch_loss,
        running_loss,
    })
}

/// The `pool_size` best-scoring items not in `exclude`: score descending,
/// ties by ascending item id.
pub fn score_candidates(
    model: &FactorModel,
    user: usize,
    exclude: &HashSet<usize>,
    pool_size: usize,
) -> Result<RankedList> {
    if user >= model.num_users {
        return Err(Error::invalid(format!("user {user} out of range")));
    }
    let mut scored: Vec<(usize, f64)> = (0..model.num_items)
        .filter(|i| !exclude.contains(i))
        .map(|i| (i, model.score(user, i)))
        .collect();
    if scored.len() < pool_size {
        debug!(
            "user {user}: only {} eligible items for a pool of {pool_size}",
            scored.len()
        );
    }
    if scored.len() > pool_size {
        scored.select_nth_unstable_by(pool_size, by_score_then_id);
        scored.truncate(pool_size);
    }
    scored.sort_by(by_score_then_id);
    RankedList::new(scored)
}

/// Pairwise AUC of `model` for one user: the fraction of (relevant,
/// irrelevant) pairs ordered correctly, counting ties as half. Items in
/// `exclude` take part in neither side.
pub fn user_auc(
    model: &FactorModel,
    user: usize,
    relevant: &HashSet<usize>,
    exclude: &HashSet<usize>,
) -> Option<f64> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..model.num_items {
        if exclude.contains(&i) {
            continue;
        }
        let s = model.score(user, i);
        if relevant.contains(&i) { pos.push(s) } else { neg.push(s) }
    }
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut correct = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                correct += 1.0;
            } else if p == n {
                correct += 0.5;
            }
        }
    }
    Some(correct / (pos.len() * neg.len()) as f64)
}

/// Load `user_id,item_id,score` rows into per-user candidate lists, mapping
/// original ids through `users` and `items`.
pub fn load_external_scores(
    path: impl AsRef<Path>,
    users: &IdIndex,
    items: &IdIndex,
) -> Result<BTreeMap<usize, RankedList>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if headers != ["user_id", "item_id", "score"] {
        return Err(Error::parse(path, 1, "expected header `user_id,item_id,score`"));
    }
    let mut per_user: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::parse(path, line, format!("expected 3 fields, got {}", record.len())));
        }
        let (u, i, s) = (record[0].trim(), record[1].trim(), record[2].trim());
        let score: f64 = s
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| Error::parse(path, line, format!("score `{s}` is not a number")))?;
        let user = users
            .get(u)
            .ok_or_else(|| Error::parse(path, line, format!("unknown user {u:?}")))?;
        let item = items
            .get(i)
            .ok_or_else(|| Error::parse(path, line, format!("unknown item {i:?}")))?;
        if !seen.insert((user, item)) {
            return Err(Error::parse(path, line, "duplicate score"));
        }
        per_user.entry(user).or_default().push((item, score));
    }
    per_user
        .into_iter()
        .map(|(u, entries)| Ok((u, RankedList::from_scores(entries)?)))
        .collect()
}

/// Write candidate lists as `user_id,item_id,score`, scores in shortest
/// round-trip form so reloading is lossless.
pub fn write_scores(
    path: impl AsRef<Path>,
    lists: &BTreeMap<usize, RankedList>,
    users: &IdIndex,
    items: &IdIndex,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = csv::Writer::from_writer(BufWriter::new(file));
    out.write_record(["user_id", "item_id", "score"])?;
    for (&u, list) in lists {
        for &(i, s) in list.entries() {
            out.write_record([users.original(u), items.original(i), &format!("{s:?}")])?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

const CHECKPOINT_MAGIC: &[u8; 6] = b"EXPRB1";

/// Binary checkpoint: `EXPRB1`, then little-endian u64 num_users, num_items,
/// dim, seed, followed by the user and item factor matrices as row-major f64.
pub fn save_checkpoint(path: impl AsRef<Path>, model: &FactorModel) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    out.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    for v in [model.num_users as u64, model.num_items as u64, model.dim as u64, model.seed] {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for x in model.user_factors.iter().chain(&model.item_factors) {
        out.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<FactorModel> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut input = BufReader::new(File::open(path).map_err(io)?);
    let mut magic = [0u8; 6];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected EXPRB1",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut word = [0u8; 8];
    let mut header = [0u64; 4];
    for h in &mut header {
        input
            .read_exact(&mut word)
            .map_err(|_| Error::Checkpoint("truncated header".into()))?;
        *h = u64::from_le_bytes(word);
    }
    let [num_users, num_items, dim, seed] = header.map(|v| v as usize);
    let total = (num_users + num_items)
        .checked_mul(dim)
        .ok_or_else(|| Error::Checkpoint("dimensions overflow".into()))?;
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        input
            .read_exact(&mut word)
            .map_err(|_| Error::Checkpoint("truncated factor data".into()))?;
        values.push(f64::from_le_bytes(word));
    }
    if input.read(&mut word).map_err(io)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after factor data".into()));
    }
    let item_factors = values.split_off(num_users * dim);
    let mut model = FactorModel::from_parts(values, item_factors, num_users, num_items, dim)?;
    model.seed = seed as u64;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Interaction;

    fn log(pairs: &[(usize, usize)], users: usize, items: usize) -> InteractionLog {
        let xs = pairs
            .iter()
            .enumerate()
            .map(|(t, &(user, item))| Interaction { user, item, timestamp: t as i64 })
            .collect();
        InteractionLog::new(xs, users, items).unwrap()
    }

    #[test]
    fn init_shapes_and_range() {
        let m = init_model(2, 3, 16, 1).unwrap();
        assert_eq!(m.user_factors().len(), 32);
        assert_eq!(m.item_factors().len(), 48);
        assert!(m.user_factors().iter().chain(m.item_factors()).all(|x| (0.0..=1.0).contains(x)));
        assert_eq!(m, init_model(2, 3, 16, 1).unwrap());
        assert!(init_model(2, 3, 0, 1).is_err());
        assert!(init_model(0, 3, 4, 1).is_err());
    }

    #[test]
    fn triplet_counts_and_negatives() {
        let l = log(&[(0, 0), (0, 2), (0, 4), (1, 1)], 2, 6);
        let ts = sample_triplets(&l, 10, 3);
        assert_eq!(ts.iter().filter(|t| t.user == 0).count(), 30);
        for t in &ts {
            assert!(l.profile(t.user).contains(&t.positive));
            assert!(!l.profile(t.user).contains(&t.negative));
        }
        assert_eq!(ts, sample_triplets(&l, 10, 3));
    }

    #[test]
    fn forced_negative() {
        let l = log(&[(0, 1)], 1, 2);
        assert!(sample_triplets(&l, 10, 9).iter().all(|t| t.negative == 0));
    }

    #[test]
    fn saturated_user_skipped() {
        let l = log(&[(0, 0), (0, 1), (1, 0)], 2, 2);
        let ts = sample_triplets(&l, 2, 1);
        assert!(ts.iter().all(|t| t.user == 1));
        assert_eq!(ts.len(), 2);
    }

    #[test]
    fn negatives_cover_unobserved_uniformly() {
        let l = log(&[(0, 1), (0, 3)], 1, 5);
        let ts = sample_triplets(&l, 3000, 5);
        let mut counts = [0usize; 5];
        for t in &ts {
            counts[t.negative] += 1;
        }
        assert_eq!(counts[1] + counts[3], 0);
        for c in [counts[0], counts[2], counts[4]] {
            assert!((c as f64 / 6000.0 - 1.0 / 3.0).abs() < 0.03, "{counts:?}");
        }
    }

    #[test]
    fn scoring_order() {
        let m = FactorModel::from_parts(vec![1.0, 0.0], vec![2.0, 0.0, 1.0, 0.0, 0.0, 5.0], 1, 3, 2).unwrap();
        let l = score_candidates(&m, 0, &HashSet::new(), 3).unwrap();
        assert_eq!(l.entries(), &[(0, 2.0), (1, 1.0), (2, 0.0)]);
        let only = score_candidates(&m, 0, &[0, 1].into_iter().collect(), 3).unwrap();
        assert_eq!(only.items().collect::<Vec<_>>(), vec![2]);
        let tie = FactorModel::from_parts(vec![1.0], vec![0.5, 0.5, 0.1], 1, 3, 1).unwrap();
        let l = score_candidates(&tie, 0, &HashSet::new(), 2).unwrap();
        assert_eq!(l.items().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn zero_learning_rate_keeps_loss_constant() {
        let l = log(&[(0, 0), (0, 1), (1, 2), (1, 3), (2, 0)], 3, 5);
        let cfg = TrainConfig {
            dim: 4,
            epochs: 4,
            batch_size: 3,
            triplets_per_positive: 2,
            learning_rate: 0.0,
            seed: 1,
        };
        let out = train(init_model(3, 5, 4, 1).unwrap(), &l, &cfg).unwrap();
        assert_eq!(out.epoch_loss.len(), 4);
        for w in out.epoch_loss.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let l = log(&[(0, 0), (0, 1), (1, 2), (1, 3), (2, 0)], 3, 5);
        let cfg = TrainConfig { dim: 4, epochs: 3, batch_size: 2, seed: 5, ..TrainConfig::default() };
        let a = train(init_model(3, 5, 4, 5).unwrap(), &l, &cfg).unwrap();
        let b = train(init_model(3, 5, 4, 5).unwrap(), &l, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch() {
        let l = log(&[(0, 0)], 1, 2);
        assert!(train(init_model(2, 2, 4, 1).unwrap(), &l, &TrainConfig::default()).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = init_model(3, 4, 5, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.bin");
        save_checkpoint(&p, &m).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), m);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..6], b"EXPRB1");
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_checkpoint(&p).is_err());
        std::fs::write(&p, b"NOPE00").unwrap();
        assert!(matches!(load_checkpoint(&p), Err(Error::Checkpoint(_))));
    }

    fn score_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "user_id,item_id,score\n{body}").unwrap();
        f
    }

    #[test]
    fn external_scores() {
        let users = IdIndex::identity(2);
        let items = IdIndex::identity(3);
        let f = score_file("0,1,0.1\n0,2,0.9\n");
        let lists = load_external_scores(f.path(), &users, &items).unwrap();
        assert_eq!(lists[&0].entries(), &[(2, 0.9), (1, 0.1)]);

        let f = score_file("0,1,high\n");
        let err = load_external_scores(f.path(), &users, &items).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");

        let f = score_file("0,1,0.1\n0,1,0.2\n");
        let err = load_external_scores(f.path(), &users, &items).unwrap_err().to_string();
        assert!(err.contains("duplicate score"), "{err}");
    }

    #[test]
    fn scores_round_trip() {
        let users = IdIndex::identity(2);
        let items = IdIndex::identity(4);
        let mut lists = BTreeMap::new();
        lists.insert(0, RankedList::from_scores(vec![(3, 0.1 + 0.2), (1, -1.0 / 3.0)]).unwrap());
        lists.insert(1, RankedList::from_scores(vec![(0, 1e-300)]).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.csv");
        write_scores(&p, &lists, &users, &items).unwrap();
        assert_eq!(load_external_scores(&p, &users, &items).unwrap(), lists);
    }
}
