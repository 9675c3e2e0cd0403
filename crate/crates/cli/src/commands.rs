use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use exprank_core::bpr::{self, TrainConfig};
use exprank_core::config::CalibrationSettings;
use exprank_core::dataset::{self, InteractionLog, ItemCatalog, SplitPair};
use exprank_core::error::StageContext;
use exprank_core::eval::{self, Popularity, ReportInput};
use exprank_core::experiment;
use exprank_core::rerank::Calibration;
use exprank_core::{seed, DataSource, Error, ExperimentConfig, ExposureDistribution, RankedList, RerankConfig, Result};

use crate::{
    CalibrateArgs, CalibrationArgs, Command, DataArgs, EvaluateArgs, ExperimentArgs, IngestArgs, PolicyArgs,
    RerankArgs, SynthArgs, TrainArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Rerank(a) => rerank(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Experiment(a) => run_experiment(a),
    }
}

struct Loaded {
    log: InteractionLog,
    catalog: ItemCatalog,
    split: SplitPair,
}

// Every stage reloads the full log and re-splits it; the split is
// deterministic, so dense ids line up across separate invocations.
fn load(data: &DataArgs) -> Result<Loaded> {
    let source = DataSource::Files {
        interactions: data.interactions.clone(),
        items: data.items.clone(),
    };
    let (log, catalog) = experiment::load_data(&source).stage("ingest")?;
    let split = dataset::temporal_split(&log, data.holdout).stage("split")?;
    Ok(Loaded { log, catalog, split })
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn ingest(args: IngestArgs) -> Result<()> {
    let Loaded { log, catalog, split } = load(&args.data)?;
    mkdir(&args.out)?;
    dataset::write_interactions(args.out.join("interactions.csv"), &log)?;
    dataset::write_items(args.out.join("items.csv"), &catalog, log.item_ids())?;
    dataset::write_id_map(args.out.join("ids.csv"), &log)?;
    dataset::write_interactions(args.out.join("train.csv"), &split.train)?;
    dataset::write_interactions(args.out.join("test.csv"), &split.test)?;

    let shares = dataset::group_shares(&catalog, &log)?;
    println!(
        "{} users, {} items, {} interactions ({} train / {} test)",
        log.num_users(),
        log.num_items(),
        log.len(),
        split.train.len(),
        split.test.len()
    );
    for (a, attr) in shares.attributes.iter().enumerate() {
        println!(
            "  {attr}: catalog {:.4}, interactions {:.4}",
            shares.catalog_share[a], shares.interaction_share[a]
        );
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let params = dataset::SynthParams {
        num_users: args.users,
        num_items: args.num_items,
        minority_catalog_share: args.minority_share,
        minority_affinity: args.affinity,
        interactions_per_user: args.per_user,
        seed: args.seed,
    };
    let (log, catalog) = dataset::synthesize_dataset(&params)?;
    mkdir(&args.out)?;
    dataset::write_interactions(args.out.join("interactions.csv"), &log)?;
    dataset::write_items(args.out.join("items.csv"), &catalog, log.item_ids())?;
    let counts = dataset::group_item_counts(&catalog);
    println!(
        "{} users, {} items, {} interactions; items per group {counts:?}",
        log.num_users(),
        log.num_items(),
        log.len()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let Loaded { log, split, .. } = load(&args.data)?;
    // same seed derivation as the experiment runner
    let config = TrainConfig {
        dim: args.dim,
        epochs: args.epochs,
        batch_size: args.batch,
        triplets_per_positive: args.triplets,
        learning_rate: args.lr,
        seed: seed::derive(args.seed, "train"),
    };
    config.validate()?;
    let model = bpr::init_model(log.num_users(), log.num_items(), args.dim, seed::derive(args.seed, "model"))?;
    let outcome = bpr::train(model, &split.train, &config).stage("train")?;
    let relevant = experiment::relevance(&split.test);
    let users: Vec<usize> = relevant.keys().copied().collect();
    let candidates = experiment::score_users(&outcome.model, &split.train, &users, args.pool_size).stage("score")?;

    mkdir(&args.out)?;
    bpr::save_checkpoint(args.out.join("model.bin"), &outcome.model)?;
    bpr::write_scores(args.out.join("scores.csv"), &candidates, log.user_ids(), log.item_ids())?;
    let mut loss = String::from("epoch,loss\n");
    for (e, l) in outcome.epoch_loss.iter().enumerate() {
        loss.push_str(&format!("{},{l:.8}\n", e + 1));
        println!("epoch {:>3}  loss {l:.5}", e + 1);
    }
    let path = args.out.join("loss.csv");
    fs::write(&path, loss).map_err(|e| Error::io(&path, e))
}

fn targets_for(
    policy: &PolicyArgs,
    users: impl IntoIterator<Item = usize>,
    loaded: &Loaded,
) -> Result<BTreeMap<usize, ExposureDistribution>> {
    let custom: BTreeMap<String, f64> = policy.targets.iter().cloned().collect();
    let p = experiment::build_policy(policy.policy, &loaded.split.train, &loaded.catalog, &custom)?;
    experiment::policy_targets(&p, users, &loaded.split.train, &loaded.catalog)
}

fn load_scores(path: &Path, loaded: &Loaded) -> Result<BTreeMap<usize, RankedList>> {
    bpr::load_external_scores(path, loaded.log.user_ids(), loaded.log.item_ids()).stage("score")
}

fn settings(args: &CalibrationArgs) -> CalibrationSettings {
    CalibrationSettings {
        budget: args.budget,
        step: args.step,
        mode: args.mode,
    }
}

fn print_calibration(cal: &Calibration) {
    println!("lambda,ndcg");
    for (l, n) in &cal.grid {
        println!("{l:.2},{n:.6}");
    }
    println!("threshold {:.6}", cal.threshold);
    if !cal.corrected {
        println!("no λ < 1 meets the budget");
    }
    println!("chosen λ = {:.2}", cal.lambda);
}

fn rerank(args: RerankArgs) -> Result<()> {
    let loaded = load(&args.data)?;
    let candidates = load_scores(&args.scores, &loaded)?;
    let targets = targets_for(&args.policy, candidates.keys().copied(), &loaded).stage("rerank")?;
    let mut config = RerankConfig::new(args.lambda, args.k, args.pool_size)?;
    if args.calibrate {
        let relevant = experiment::relevance(&loaded.split.test);
        let cal = experiment::calibrate(
            &candidates,
            &targets,
            &relevant,
            &config,
            &loaded.catalog,
            &settings(&args.calibration),
        )
        .stage("calibrate")?;
        eprintln!("calibrated λ = {:.2}", cal.lambda);
        config = config.with_lambda(cal.lambda);
    }
    let rankings = experiment::rerank_users(&candidates, &targets, &config, &loaded.catalog).stage("rerank")?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        mkdir(dir)?;
    }
    experiment::write_rankings(&args.out, &rankings, loaded.log.user_ids(), loaded.log.item_ids())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let loaded = load(&args.data)?;
    let rankings = experiment::load_rankings(&args.rankings, loaded.log.user_ids(), loaded.log.item_ids())?;
    let relevant = experiment::relevance(&loaded.split.test);
    let minority = args
        .minority
        .clone()
        .unwrap_or_else(|| experiment::default_minority(&loaded.catalog));
    let targets = match args.policy {
        Some(kind) => {
            let policy = PolicyArgs {
                policy: kind,
                targets: args.targets.clone(),
            };
            Some(targets_for(&policy, rankings.keys().copied(), &loaded)?)
        }
        None => None,
    };
    let popularity = Popularity::from_log(&loaded.split.train);
    let report = eval::build_report(&ReportInput {
        rankings: &rankings,
        relevant: &relevant,
        targets: targets.as_ref(),
        catalog: &loaded.catalog,
        popularity: &popularity,
        minority: &minority,
        k: args.k,
    })
    .stage("evaluate")?;
    if let Some(out) = &args.out {
        eval::write_report_csv(out, &report, loaded.log.user_ids())?;
    }
    let a = &report.aggregate;
    println!("users     {}", report.per_user.len());
    println!("ndcg@{}   {:.4}", args.k, a.ndcg);
    println!("E_{minority}  {:.4}", a.minority_exposure);
    println!("coverage  {:.4}", a.coverage);
    println!("diversity {:.4}", a.diversity);
    println!("novelty   {:.4}", a.novelty);
    if let Some(h) = a.hellinger {
        println!("hellinger {h:.4}");
    }
    if report.excluded_users > 0 {
        println!("({} users without test items skipped)", report.excluded_users);
    }
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let loaded = load(&args.data)?;
    let candidates = load_scores(&args.scores, &loaded)?;
    let targets = targets_for(&args.policy, candidates.keys().copied(), &loaded).stage("calibrate")?;
    let relevant = experiment::relevance(&loaded.split.test);
    let config = RerankConfig::new(1.0, args.k, args.pool_size)?;
    let cal = experiment::calibrate(
        &candidates,
        &targets,
        &relevant,
        &config,
        &loaded.catalog,
        &settings(&args.calibration),
    )
    .stage("calibrate")?;
    print_calibration(&cal);
    Ok(())
}

fn run_experiment(args: ExperimentArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(out) = args.out {
        config.out = out;
    }
    let outcome = experiment::run_experiment(&config)?;
    print!("{}", eval::render_summary(&outcome.summary_rows()));
    println!("outputs in {}", config.out.display());
    Ok(())
}
