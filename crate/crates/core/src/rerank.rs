//! Maximum-marginal-relevance re-ranking towards a target group exposure.
//!
//! For a user with candidate pool `C` and target `p`, the re-ranker builds a
//! top-k list greedily. At step `j` the unused candidate `c` maximizing
//!
//! ```text
//! λ · Σ_{i ∈ S ∪ {c}} s_i  −  (1 − λ) · H²(p, q(S ∪ {c}))
//! ```
//!
//! is appended, where `s` are min-max normalized scores and `q` is the
//! position-discounted exposure of the extended prefix (the `j`-th pick takes
//! position `j`). Using `H² = 1 − Σ_a √(p_a q_a)`, the step only needs the
//! Bhattacharyya coefficient of each group's hypothetical extension.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use crate::dataset::ItemCatalog;
use crate::error::{Error, Result};
use crate::eval::ndcg_at_k;
use crate::exposure::{achieved_exposure, hellinger, position_weight, ExposureDistribution};
use crate::ranking::{by_score_then_id, RankedList};

/// Lower end of the normalized score range; keeps every relevance strictly positive.
pub const SCORE_FLOOR: f64 = 1e-6;

/// Largest pool and prefix the exhaustive oracle accepts.
pub const ORACLE_MAX_POOL: usize = 8;
pub const ORACLE_MAX_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankConfig {
    pub lambda: f64,
    pub k: usize,
    pub pool_size: usize,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            k: 10,
            pool_size: 100,
        }
    }
}

impl RerankConfig {
    pub fn new(lambda: f64, k: usize, pool_size: usize) -> Result<Self> {
        let config = Self { lambda, k, pool_size };
        config.validate()?;
        Ok(config)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if self.k == 0 {
            return Err(Error::invalid("k must be ≥ 1"));
        }
        if self.k > self.pool_size {
            return Err(Error::invalid(format!(
                "k ({}) must not exceed pool size ({})",
                self.k, self.pool_size
            )));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must be in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// Min-max rescale scores into `[SCORE_FLOOR, 1]`, keeping the order.
/// Constant scores map to 1.
pub fn normalize_scores(list: &RankedList) -> Result<RankedList> {
    if list.is_empty() {
        return Err(Error::EmptyList);
    }
    let (lo, hi) = list
        .scores()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    let range = hi - lo;
    let entries = list
        .entries()
        .iter()
        .map(|&(item, s)| {
            let v = if range > 0.0 {
                SCORE_FLOOR + (1.0 - SCORE_FLOOR) * (s - lo) / range
            } else {
                1.0
            };
            (item, v)
        })
        .collect();
    Ok(RankedList::from_vec_unchecked(entries))
}

/// Objective of an ordered selection whose scores are already normalized:
/// `λ Σ s − (1 − λ) H²(target, q)`, with `q` the exposure of the whole selection.
pub fn objective_value(
    selection: &RankedList,
    target: &ExposureDistribution,
    lambda: f64,
    catalog: &ItemCatalog,
) -> Result<f64> {
    check_lambda(lambda)?;
    let q = achieved_exposure(selection, catalog, selection.len())?;
    let h = hellinger(target, &q)?;
    let relevance: f64 = selection.scores().sum();
    Ok(lambda * relevance - (1.0 - lambda) * h * h)
}

/// The candidate pool actually re-ranked: the `pool_size` best candidates by
/// score, returned raw and normalized (same order).
pub fn candidate_pool(candidates: &RankedList, pool_size: usize) -> Result<(RankedList, RankedList)> {
    let mut entries = candidates.entries().to_vec();
    entries.sort_by(by_score_then_id);
    entries.truncate(pool_size);
    let raw = RankedList::from_vec_unchecked(entries);
    let normalized = normalize_scores(&raw)?;
    Ok((raw, normalized))
}

/// Objective value of `ranking` (raw scores) measured on the normalized pool
/// built from `candidates`.
pub fn ranking_objective(
    ranking: &RankedList,
    candidates: &RankedList,
    target: &ExposureDistribution,
    config: &RerankConfig,
    catalog: &ItemCatalog,
) -> Result<f64> {
    let (_, normalized) = candidate_pool(candidates, config.pool_size)?;
    let entries = ranking
        .items()
        .map(|item| {
            normalized
                .entries()
                .iter()
                .find(|&&(i, _)| i == item)
                .copied()
                .ok_or_else(|| Error::invalid(format!("item {item} is not in the candidate pool")))
        })
        .collect::<Result<Vec<_>>>()?;
    objective_value(&RankedList::new(entries)?, target, config.lambda, catalog)
}

fn check_target(target: &ExposureDistribution, catalog: &ItemCatalog) -> Result<()> {
    if target.labels() != catalog.attributes() {
        return Err(Error::DomainMismatch {
            left: target.labels().to_vec(),
            right: catalog.attributes().to_vec(),
        });
    }
    Ok(())
}

/// Greedy re-ranking of one user's candidates. Scores are normalized over
/// the pool internally; the returned list carries the original scores.
///
/// Ties in the step objective go to the higher original score, then the
/// lower item id.
pub fn rerank_greedy(
    candidates: &RankedList,
    target: &ExposureDistribution,
    config: &RerankConfig,
    catalog: &ItemCatalog,
) -> Result<RankedList> {
    config.validate()?;
    check_target(target, catalog)?;
    let (raw, normalized) = candidate_pool(candidates, config.pool_size)?;
    let n = raw.len();
    if n < config.k {
        warn!("candidate pool has {n} items, fewer than k = {}; re-ranking the whole pool", config.k);
    }
    let k = config.k.min(n);
    let lambda = config.lambda;
    let groups = catalog.num_groups();
    let p = target.masses();

    let raw_entries = raw.entries();
    let norm_scores: Vec<f64> = normalized.scores().collect();
    let cand_group: Vec<usize> = raw.items().map(|i| catalog.group_of(i)).collect();

    let mut used = vec![false; n];
    let mut group_weight = vec![0.0; groups];
    let mut total_weight = 0.0;
    let mut out = Vec::with_capacity(k);
    let mut ext_bc = vec![0.0; groups];

    for position in 1..=k {
        let w = position_weight(position);
        let denom = total_weight + w;
        // Bhattacharyya coefficient of the prefix extended by an item of group g
        for (g, slot) in ext_bc.iter_mut().enumerate() {
            *slot = (0..groups)
                .map(|a| {
                    let mass = if a == g { group_weight[a] + w } else { group_weight[a] };
                    (p[a] * mass / denom).sqrt()
                })
                .sum();
        }
        let mut best: Option<(usize, f64)> = None;
        for c in 0..n {
            if used[c] {
                continue;
            }
            let gain = lambda * norm_scores[c] + (1.0 - lambda) * ext_bc[cand_group[c]];
            let better = match best {
                None => true,
                Some((b, best_gain)) => {
                    gain > best_gain
                        || (gain == best_gain
                            && by_score_then_id(&raw_entries[c], &raw_entries[b]).is_lt())
                }
            };
            if better {
                best = Some((c, gain));
            }
        }
        let (c, _) = best.expect("pool has unused candidates");
        used[c] = true;
        group_weight[cand_group[c]] += w;
        total_weight = denom;
        out.push(raw_entries[c]);
    }
    Ok(RankedList::from_vec_unchecked(out))
}

/// Exhaustive search over all ordered `k`-prefixes of the pool. Returns an
/// optimal ranking (original scores) and its objective on normalized scores.
pub fn brute_force_optimum(
    candidates: &RankedList,
    target: &ExposureDistribution,
    config: &RerankConfig,
    catalog: &ItemCatalog,
) -> Result<(RankedList, f64)> {
    config.validate()?;
    check_target(target, catalog)?;
    let (raw, normalized) = candidate_pool(candidates, config.pool_size)?;
    let n = raw.len();
    let k = config.k.min(n);
    if n > ORACLE_MAX_POOL || k > ORACLE_MAX_K {
        return Err(Error::OracleBound { pool: n, k });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut prefix = Vec::with_capacity(k);
    let mut used = vec![false; n];
    enumerate(n, k, &mut prefix, &mut used, &mut |perm| {
        let sel = RankedList::from_vec_unchecked(perm.iter().map(|&c| normalized.entries()[c]).collect());
        let value = objective_value(&sel, target, config.lambda, catalog)?;
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((perm.to_vec(), value));
        }
        Ok(())
    })?;
    let (perm, value) = best.expect("at least one prefix");
    let ranking = RankedList::from_vec_unchecked(perm.iter().map(|&c| raw.entries()[c]).collect());
    Ok((ranking, value))
}

fn enumerate(
    n: usize,
    k: usize,
    prefix: &mut Vec<usize>,
    used: &mut [bool],
    visit: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if prefix.len() == k {
        return visit(prefix);
    }
    for c in 0..n {
        if used[c] {
            continue;
        }
        used[c] = true;
        prefix.push(c);
        enumerate(n, k, prefix, used, visit)?;
        prefix.pop();
        used[c] = false;
    }
    Ok(())
}

/// How to pick λ among the grid values that meet the NDCG budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CalibrationMode {
    /// Smallest feasible λ: the strongest exposure correction within budget.
    #[default]
    MinFeasible,
    /// Largest feasible λ. Since λ = 1 always meets the budget, this returns 1.
    MaxLambda,
}

impl FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "min-feasible" => Ok(CalibrationMode::MinFeasible),
            "max-lambda" => Ok(CalibrationMode::MaxLambda),
            other => Err(Error::invalid(format!(
                "unknown calibration mode {other:?} (expected min-feasible|max-lambda)"
            ))),
        }
    }
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibrationMode::MinFeasible => "min-feasible",
            CalibrationMode::MaxLambda => "max-lambda",
        })
    }
}

/// One validation user for λ calibration.
#[derive(Debug, Clone)]
pub struct CalibrationCase {
    pub candidates: RankedList,
    pub target: ExposureDistribution,
    pub relevant: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub lambda: f64,
    /// `(λ, mean NDCG)` for every grid point, ascending in λ.
    pub grid: Vec<(f64, f64)>,
    /// NDCG threshold `(1 − budget) · NDCG(λ = 1)`.
    pub threshold: f64,
    /// False when only λ = 1 met the budget.
    pub corrected: bool,
}

/// The λ grid `0, step, 2·step, …, 1`.
pub fn lambda_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("grid step must be in (0, 1], got {step}")));
    }
    let n = (1.0 / step).round() as usize;
    if ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("grid step {step} does not divide 1")));
    }
    Ok((0..=n).map(|i| if i == n { 1.0 } else { i as f64 / n as f64 }).collect())
}

/// Mean NDCG@k over `cases` after re-ranking with `config`.
pub fn mean_ndcg(cases: &[CalibrationCase], config: &RerankConfig, catalog: &ItemCatalog) -> Result<f64> {
    let per_user: Vec<f64> = cases
        .par_iter()
        .map(|c| {
            let ranked = rerank_greedy(&c.candidates, &c.target, config, catalog)?;
            ndcg_at_k(&ranked, &c.relevant, config.k)
        })
        .collect::<Result<_>>()?;
    Ok(per_user.iter().sum::<f64>() / per_user.len() as f64)
}

/// Grid-search λ so that mean NDCG stays within `budget` of the unmodified
/// ranking (`λ = 1`).
pub fn calibrate_lambda(
    cases: &[CalibrationCase],
    config: &RerankConfig,
    catalog: &ItemCatalog,
    budget: f64,
    step: f64,
    mode: CalibrationMode,
) -> Result<Calibration> {
    if !(budget > 0.0 && budget < 1.0) {
        return Err(Error::invalid(format!("budget must be in (0, 1), got {budget}")));
    }
    if cases.is_empty() {
        return Err(Error::invalid("calibration needs at least one validation user"));
    }
    if cases.iter().any(|c| c.relevant.is_empty()) {
        return Err(Error::invalid("validation users must have test items"));
    }
    let grid = lambda_grid(step)?
        .into_iter()
        .map(|lambda| Ok((lambda, mean_ndcg(cases, &config.with_lambda(lambda), catalog)?)))
        .collect::<Result<Vec<_>>>()?;
    let baseline = grid.last().expect("grid ends at 1").1;
    let threshold = (1.0 - budget) * baseline;
    let feasible = grid.iter().filter(|(_, ndcg)| *ndcg >= threshold);
    let chosen = match mode {
        CalibrationMode::MinFeasible => feasible.map(|g| g.0).next(),
        CalibrationMode::MaxLambda => feasible.map(|g| g.0).next_back(),
    }
    .unwrap_or(1.0);
    let corrected = grid.iter().any(|&(l, ndcg)| l < 1.0 && ndcg >= threshold);
    if !corrected {
        warn!("no λ < 1 keeps NDCG within a {budget} budget; using λ = 1");
    }
    Ok(Calibration {
        lambda: chosen,
        grid,
        threshold,
        corrected,
    })
}
