//! End-to-end pipeline: ingest → split → train → score → re-rank → evaluate.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use crate::bpr::{self, FactorModel, TrainOutcome};
use crate::config::{CalibrationSettings, DataSource, ExperimentConfig};
use crate::dataset::{self, IdIndex, InteractionLog, ItemCatalog, SplitPair};
use crate::error::{Error, Result, StageContext};
use crate::eval::{self, MetricsReport, Popularity, ReportInput, SummaryRow};
use crate::exposure::{target_distribution, ExposureDistribution, Policy, PolicyKind};
use crate::ranking::RankedList;
use crate::rerank::{self, Calibration, CalibrationCase, RerankConfig};
use crate::seed;

/// Load the dataset named by `source`.
pub fn load_data(source: &DataSource) -> Result<(InteractionLog, ItemCatalog)> {
    match source {
        DataSource::Files { interactions, items } => {
            let log = dataset::load_interactions(interactions)?;
            let catalog = dataset::load_item_metadata(items, &log)?;
            Ok((log, catalog))
        }
        DataSource::Synth(params) => dataset::synthesize_dataset(params),
    }
}

/// The attribute value with the smallest catalog share (first in sort order on ties).
pub fn default_minority(catalog: &ItemCatalog) -> String {
    let sizes = catalog.group_sizes();
    let (idx, _) = sizes
        .iter()
        .enumerate()
        .min_by_key(|&(i, &s)| (s, i))
        .expect("catalog has groups");
    catalog.attributes()[idx].clone()
}

/// Test items per user, for users with at least one.
pub fn relevance(test: &InteractionLog) -> BTreeMap<usize, BTreeSet<usize>> {
    test.profiles()
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_empty())
        .map(|(u, p)| (u, p.iter().copied().collect()))
        .collect()
}

/// Candidate pools for `users`, excluding each user's training items.
pub fn score_users(
    model: &FactorModel,
    train: &InteractionLog,
    users: &[usize],
    pool_size: usize,
) -> Result<BTreeMap<usize, RankedList>> {
    let lists: BTreeMap<usize, RankedList> = users
        .par_iter()
        .map(|&u| {
            let exclude: HashSet<usize> = train.profile(u).iter().copied().collect();
            Ok((u, bpr::score_candidates(model, u, &exclude, pool_size)?))
        })
        .collect::<Result<_>>()?;
    let short = lists.values().filter(|l| l.len() < pool_size).count();
    if short > 0 {
        warn!("{short} user(s) have fewer than {pool_size} unseen items; their candidate pools are smaller");
    }
    Ok(lists)
}

/// Target exposure per user under `policy`.
pub fn policy_targets(
    policy: &Policy,
    users: impl IntoIterator<Item = usize>,
    train: &InteractionLog,
    catalog: &ItemCatalog,
) -> Result<BTreeMap<usize, ExposureDistribution>> {
    if !policy.is_personal() {
        let shared = target_distribution(policy, None, catalog)?;
        return Ok(users.into_iter().map(|u| (u, shared.clone())).collect());
    }
    users
        .into_iter()
        .map(|u| Ok((u, target_distribution(policy, Some(train.profile(u)), catalog)?)))
        .collect()
}

/// Build a [`Policy`] from its kind using the training log's group shares.
pub fn build_policy(
    kind: PolicyKind,
    train: &InteractionLog,
    catalog: &ItemCatalog,
    custom: &BTreeMap<String, f64>,
) -> Result<Policy> {
    let shares = dataset::group_shares(catalog, train)?;
    Policy::from_kind(kind, Some(&shares), Some(custom))
}

/// Re-rank every user's candidates towards their target.
pub fn rerank_users(
    candidates: &BTreeMap<usize, RankedList>,
    targets: &BTreeMap<usize, ExposureDistribution>,
    config: &RerankConfig,
    catalog: &ItemCatalog,
) -> Result<BTreeMap<usize, RankedList>> {
    let users: Vec<(&usize, &RankedList)> = candidates.iter().collect();
    users
        .par_iter()
        .map(|&(&u, list)| {
            let target = targets
                .get(&u)
                .ok_or_else(|| Error::invalid(format!("no target for user {u}")))?;
            Ok((u, rerank::rerank_greedy(list, target, config, catalog)?))
        })
        .collect()
}

/// The unmodified top-k of every candidate list.
pub fn baseline_rankings(candidates: &BTreeMap<usize, RankedList>, k: usize) -> BTreeMap<usize, RankedList> {
    candidates.iter().map(|(&u, l)| (u, l.truncated(k))).collect()
}

pub fn calibration_cases(
    candidates: &BTreeMap<usize, RankedList>,
    targets: &BTreeMap<usize, ExposureDistribution>,
    relevant: &BTreeMap<usize, BTreeSet<usize>>,
) -> Vec<CalibrationCase> {
    candidates
        .iter()
        .filter_map(|(u, list)| {
            let rel = relevant.get(u).filter(|r| !r.is_empty())?;
            Some(CalibrationCase {
                candidates: list.clone(),
                target: targets.get(u)?.clone(),
                relevant: rel.clone(),
            })
        })
        .collect()
}

pub fn calibrate(
    candidates: &BTreeMap<usize, RankedList>,
    targets: &BTreeMap<usize, ExposureDistribution>,
    relevant: &BTreeMap<usize, BTreeSet<usize>>,
    config: &RerankConfig,
    catalog: &ItemCatalog,
    settings: &CalibrationSettings,
) -> Result<Calibration> {
    let cases = calibration_cases(candidates, targets, relevant);
    rerank::calibrate_lambda(&cases, config, catalog, settings.budget, settings.step, settings.mode)
}

/// Rankings as `user_id,rank,item_id,score`.
pub fn write_rankings(
    path: impl AsRef<Path>,
    rankings: &BTreeMap<usize, RankedList>,
    users: &IdIndex,
    items: &IdIndex,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = csv::Writer::from_writer(BufWriter::new(file));
    out.write_record(["user_id", "rank", "item_id", "score"])?;
    for (&u, list) in rankings {
        for (p, &(i, s)) in list.entries().iter().enumerate() {
            out.write_record([users.original(u), &(p + 1).to_string(), items.original(i), &format!("{s:?}")])?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Read a rankings file written by [`write_rankings`].
pub fn load_rankings(path: impl AsRef<Path>, users: &IdIndex, items: &IdIndex) -> Result<BTreeMap<usize, RankedList>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if headers != ["user_id", "rank", "item_id", "score"] {
        return Err(Error::parse(path, 1, "expected header `user_id,rank,item_id,score`"));
    }
    let mut rows: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::parse(path, line, what.to_owned());
        if record.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let user = users.get(record[0].trim()).ok_or_else(|| bad("unknown user"))?;
        let rank: usize = record[1].trim().parse().map_err(|_| bad("rank is not an integer"))?;
        let item = items.get(record[2].trim()).ok_or_else(|| bad("unknown item"))?;
        let score: f64 = record[3].trim().parse().map_err(|_| bad("score is not a number"))?;
        rows.entry(user).or_default().push((rank, item, score));
    }
    rows.into_iter()
        .map(|(u, mut r)| {
            r.sort_by_key(|&(rank, _, _)| rank);
            let ranks_ok = r.iter().enumerate().all(|(p, &(rank, _, _))| rank == p + 1);
            if !ranks_ok {
                return Err(Error::parse(path, 0, format!("ranks of user {} are not 1..n", users.original(u))));
            }
            Ok((u, RankedList::new(r.into_iter().map(|(_, i, s)| (i, s)).collect())?))
        })
        .collect()
}

/// Split, train and score: the shared front half of the pipeline.
pub struct Prepared {
    pub log: InteractionLog,
    pub catalog: ItemCatalog,
    pub split: SplitPair,
    pub training: TrainOutcome,
    pub relevant: BTreeMap<usize, BTreeSet<usize>>,
    pub candidates: BTreeMap<usize, RankedList>,
    pub minority: String,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let (log, catalog) = load_data(&config.data).stage("ingest")?;
    let minority = match &config.minority {
        Some(m) => {
            catalog.attribute_index(m).stage("ingest")?;
            m.clone()
        }
        None => default_minority(&catalog),
    };
    let split = dataset::temporal_split(&log, config.holdout).stage("split")?;
    info!(
        "split: {} train / {} test interactions",
        split.train.len(),
        split.test.len()
    );
    let model = bpr::init_model(
        log.num_users(),
        log.num_items(),
        config.train.dim,
        seed::derive(config.seed, "model"),
    )
    .stage("train")?;
    let training = bpr::train(model, &split.train, &config.train).stage("train")?;
    info!("train: final epoch loss {:.5}", training.epoch_loss.last().copied().unwrap_or(f64::NAN));
    let relevant = relevance(&split.test);
    let users: Vec<usize> = relevant.keys().copied().collect();
    let candidates =
        score_users(&training.model, &split.train, &users, config.rerank.pool_size).stage("score")?;
    Ok(Prepared {
        log,
        catalog,
        split,
        training,
        relevant,
        candidates,
        minority,
    })
}

#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub policy: PolicyKind,
    pub lambda: f64,
    pub calibration: Option<Calibration>,
    pub rankings: BTreeMap<usize, RankedList>,
    pub report: MetricsReport,
    /// Mean Hellinger distance of the unmodified rankings to this policy's targets.
    pub baseline_hellinger: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub epoch_loss: Vec<f64>,
    pub baseline_rankings: BTreeMap<usize, RankedList>,
    pub baseline: MetricsReport,
    pub runs: Vec<PolicyRun>,
}

impl ExperimentOutcome {
    pub fn summary_rows(&self) -> Vec<SummaryRow<'_>> {
        let mut rows = vec![SummaryRow {
            approach: "base".into(),
            policy: "-".into(),
            lambda: 1.0,
            report: &self.baseline,
        }];
        rows.extend(self.runs.iter().map(|r| SummaryRow {
            approach: "rerank".into(),
            policy: r.policy.to_string(),
            lambda: r.lambda,
            report: &r.report,
        }));
        rows
    }
}

/// Run the configured pipeline and write its artifacts to `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let prepared = prepare(config)?;
    let outcome = evaluate_policies(config, &prepared)?;
    write_outputs(config, &prepared, &outcome).stage("output")?;
    Ok(outcome)
}

fn evaluate_policies(config: &ExperimentConfig, prepared: &Prepared) -> Result<ExperimentOutcome> {
    let Prepared {
        split,
        catalog,
        relevant,
        candidates,
        minority,
        ..
    } = prepared;
    let popularity = Popularity::from_log(&split.train);
    let k = config.rerank.k;
    let baseline_rankings = baseline_rankings(candidates, k);
    let report_for = |rankings: &BTreeMap<usize, RankedList>, targets: Option<&BTreeMap<usize, ExposureDistribution>>| {
        eval::build_report(&ReportInput {
            rankings,
            relevant,
            targets,
            catalog,
            popularity: &popularity,
            minority,
            k,
        })
    };
    let baseline = report_for(&baseline_rankings, None).stage("evaluate")?;

    let mut runs = Vec::new();
    for &kind in &config.policies {
        let policy = build_policy(kind, &split.train, catalog, &config.custom_targets).stage("rerank")?;
        let targets = policy_targets(&policy, candidates.keys().copied(), &split.train, catalog).stage("rerank")?;
        let (lambda, calibration) = match config.lambda {
            Some(l) => (l, None),
            None => {
                let cal = calibrate(candidates, &targets, relevant, &config.rerank, catalog, &config.calibration)
                    .stage("calibrate")?;
                info!("calibrate {kind}: λ = {}", cal.lambda);
                (cal.lambda, Some(cal))
            }
        };
        let rerank_config = config.rerank.with_lambda(lambda);
        let rankings = rerank_users(candidates, &targets, &rerank_config, catalog).stage("rerank")?;
        let report = report_for(&rankings, Some(&targets)).stage("evaluate")?;
        let baseline_hellinger = report_for(&baseline_rankings, Some(&targets))
            .stage("evaluate")?
            .aggregate
            .hellinger
            .expect("targets supplied");
        runs.push(PolicyRun {
            policy: kind,
            lambda,
            calibration,
            rankings,
            report,
            baseline_hellinger,
        });
    }
    Ok(ExperimentOutcome {
        epoch_loss: prepared.training.epoch_loss.clone(),
        baseline_rankings,
        baseline,
        runs,
    })
}

fn write_outputs(config: &ExperimentConfig, prepared: &Prepared, outcome: &ExperimentOutcome) -> Result<()> {
    let out = &config.out;
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(out)?;
    let users = prepared.log.user_ids();
    let items = prepared.log.item_ids();

    bpr::save_checkpoint(out.join("model.bin"), &prepared.training.model)?;
    bpr::write_scores(out.join("scores.csv"), &prepared.candidates, users, items)?;

    let loss_path = out.join("loss.csv");
    let mut loss = String::from("epoch,loss\n");
    for (e, l) in outcome.epoch_loss.iter().enumerate() {
        loss.push_str(&format!("{},{l:.8}\n", e + 1));
    }
    fs::write(&loss_path, loss).map_err(|e| Error::io(&loss_path, e))?;

    let base_dir = out.join("baseline");
    mkdir(&base_dir)?;
    write_rankings(base_dir.join("rankings.csv"), &outcome.baseline_rankings, users, items)?;
    eval::write_report_csv(base_dir.join("report.csv"), &outcome.baseline, users)?;

    for run in &outcome.runs {
        let dir = out.join(run.policy.name());
        mkdir(&dir)?;
        write_rankings(dir.join("rankings.csv"), &run.rankings, users, items)?;
        eval::write_report_csv(dir.join("report.csv"), &run.report, users)?;
        if let Some(cal) = &run.calibration {
            let path = dir.join("calibration.csv");
            let mut text = String::from("lambda,ndcg\n");
            for (l, n) in &cal.grid {
                text.push_str(&format!("{l:.2},{n:.6}\n"));
            }
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }

    let mut summary = eval::render_summary(&outcome.summary_rows());
    summary.push('\n');
    for run in &outcome.runs {
        summary.push_str(&format!(
            "{}: mean H {:.4} (baseline {:.4})\n",
            run.policy,
            run.report.aggregate.hellinger.unwrap_or(f64::NAN),
            run.baseline_hellinger
        ));
    }
    let path = out.join("summary.txt");
    let mut f = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    f.write_all(summary.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ItemMeta;

    #[test]
    fn minority_is_smallest_group() {
        let metas = ["m", "f", "m", "x", "x"]
            .iter()
            .enumerate()
            .map(|(i, a)| ItemMeta {
                provider: i.to_string(),
                attribute: a.to_string(),
                categories: vec![],
            })
            .collect();
        assert_eq!(default_minority(&ItemCatalog::new(metas).unwrap()), "f");
    }

    #[test]
    fn rankings_round_trip() {
        let users = IdIndex::identity(2);
        let items = IdIndex::identity(5);
        let mut r = BTreeMap::new();
        r.insert(0, RankedList::new(vec![(3, 0.5), (1, 0.7)]).unwrap());
        r.insert(1, RankedList::new(vec![(4, -2.0)]).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rankings.csv");
        write_rankings(&p, &r, &users, &items).unwrap();
        assert_eq!(load_rankings(&p, &users, &items).unwrap(), r);
    }
}
