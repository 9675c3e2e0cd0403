//! Utility, exposure and beyond-accuracy metrics over top-k lists.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::debug;

use crate::dataset::{IdIndex, InteractionLog, ItemCatalog};
use crate::error::{Error, Result};
use crate::exposure::{achieved_exposure, hellinger, position_weight, ExposureDistribution};
use crate::ranking::RankedList;

/// NDCG@k with binary relevance and `1/log2(p+1)` discounts.
pub fn ndcg_at_k(list: &RankedList, relevant: &BTreeSet<usize>, k: usize) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::invalid("NDCG needs a non-empty relevant set"));
    }
    let dcg: f64 = list
        .items()
        .take(k)
        .enumerate()
        .filter(|(_, item)| relevant.contains(item))
        .map(|(p, _)| position_weight(p + 1))
        .sum();
    let idcg: f64 = (1..=k.min(relevant.len())).map(position_weight).sum();
    Ok(dcg / idcg)
}

/// Mean over lists of the minority group's share of exposure in the top `k`.
pub fn minority_exposure<'a>(
    lists: impl IntoIterator<Item = &'a RankedList>,
    catalog: &ItemCatalog,
    minority: &str,
    k: usize,
) -> Result<f64> {
    let group = catalog.attribute_index(minority)?;
    let mut total = 0.0;
    let mut n = 0usize;
    for list in lists {
        total += achieved_exposure(list, catalog, k)?.masses()[group];
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("no lists to evaluate"));
    }
    Ok(total / n as f64)
}

/// Fraction of the catalog recommended to at least one user.
pub fn catalog_coverage<'a>(lists: impl IntoIterator<Item = &'a RankedList>, num_items: usize) -> Result<f64> {
    if num_items == 0 {
        return Err(Error::invalid("empty catalog"));
    }
    let distinct: HashSet<usize> = lists.into_iter().flat_map(|l| l.items()).collect();
    Ok(distinct.len() as f64 / num_items as f64)
}

fn jaccard_distance(a: &[u32], b: &[u32]) -> f64 {
    if a == b {
        return 0.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    1.0 - inter as f64 / union as f64
}

/// Mean pairwise `1 − Jaccard` dissimilarity of the items' category sets.
/// Lists with fewer than two items score 0.
pub fn category_diversity(list: &RankedList, catalog: &ItemCatalog) -> f64 {
    let items: Vec<usize> = list.items().collect();
    if items.len() < 2 {
        debug!("category diversity of a list with {} item(s) is 0", items.len());
        return 0.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (x, &a) in items.iter().enumerate() {
        for &b in &items[x + 1..] {
            sum += jaccard_distance(catalog.categories_of(a), catalog.categories_of(b));
            pairs += 1;
        }
    }
    sum / pairs as f64
}

/// Fraction of users who interacted with each item in the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct Popularity {
    counts: Vec<usize>,
    num_users: usize,
}

impl Popularity {
    pub fn from_log(train: &InteractionLog) -> Self {
        Self {
            counts: train.item_popularity(),
            num_users: train.num_users(),
        }
    }

    pub fn fraction(&self, item: usize) -> f64 {
        if self.num_users == 0 {
            return 0.0;
        }
        self.counts.get(item).copied().unwrap_or(0) as f64 / self.num_users as f64
    }
}

/// Mean `1 − popularity` over the list.
pub fn novelty(list: &RankedList, popularity: &Popularity) -> f64 {
    if list.is_empty() {
        return 0.0;
    }
    list.items().map(|i| 1.0 - popularity.fraction(i)).sum::<f64>() / list.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserMetrics {
    pub user: usize,
    pub ndcg: f64,
    pub exposure: ExposureDistribution,
    pub diversity: f64,
    pub novelty: f64,
    /// Distance to the user's target, when one was supplied.
    pub hellinger: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub ndcg: f64,
    pub minority_exposure: f64,
    pub coverage: f64,
    pub diversity: f64,
    pub novelty: f64,
    pub hellinger: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub k: usize,
    pub minority: String,
    pub per_user: Vec<UserMetrics>,
    pub aggregate: Aggregate,
    /// Users with a ranking but no test items; left out of every metric.
    pub excluded_users: usize,
}

/// Everything [`build_report`] needs.
pub struct ReportInput<'a> {
    pub rankings: &'a BTreeMap<usize, RankedList>,
    pub relevant: &'a BTreeMap<usize, BTreeSet<usize>>,
    pub targets: Option<&'a BTreeMap<usize, ExposureDistribution>>,
    pub catalog: &'a ItemCatalog,
    pub popularity: &'a Popularity,
    pub minority: &'a str,
    pub k: usize,
}

pub fn build_report(input: &ReportInput<'_>) -> Result<MetricsReport> {
    let minority = input.catalog.attribute_index(input.minority)?;
    let k = input.k;
    let mut per_user = Vec::new();
    let mut excluded = 0usize;
    for (&user, list) in input.rankings {
        let Some(relevant) = input.relevant.get(&user).filter(|r| !r.is_empty()) else {
            excluded += 1;
            continue;
        };
        let top = list.truncated(k);
        let exposure = achieved_exposure(&top, input.catalog, k)?;
        let hellinger = match input.targets {
            Some(t) => {
                let target = t
                    .get(&user)
                    .ok_or_else(|| Error::invalid(format!("no target for user {user}")))?;
                Some(hellinger(target, &exposure)?)
            }
            None => None,
        };
        per_user.push(UserMetrics {
            user,
            ndcg: ndcg_at_k(&top, relevant, k)?,
            diversity: category_diversity(&top, input.catalog),
            novelty: novelty(&top, input.popularity),
            exposure,
            hellinger,
        });
    }
    if per_user.is_empty() {
        return Err(Error::invalid("no users with test items to evaluate"));
    }
    let n = per_user.len() as f64;
    let mean = |f: &dyn Fn(&UserMetrics) -> f64| per_user.iter().map(f).sum::<f64>() / n;
    let coverage = catalog_coverage(
        input
            .rankings
            .iter()
            .filter(|(u, _)| input.relevant.get(u).is_some_and(|r| !r.is_empty()))
            .map(|(_, l)| l)
            .map(|l| l.truncated(k))
            .collect::<Vec<_>>()
            .iter(),
        input.catalog.num_items(),
    )?;
    let aggregate = Aggregate {
        ndcg: mean(&|m| m.ndcg),
        minority_exposure: mean(&|m| m.exposure.masses()[minority]),
        coverage,
        diversity: mean(&|m| m.diversity),
        novelty: mean(&|m| m.novelty),
        hellinger: input
            .targets
            .map(|_| mean(&|m| m.hellinger.expect("target present"))),
    };
    Ok(MetricsReport {
        k,
        minority: input.minority.to_owned(),
        per_user,
        aggregate,
        excluded_users: excluded,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Per-user rows `user_id,ndcg,exposure_<attr>...,diversity,novelty`.
pub fn write_report_csv(path: impl AsRef<Path>, report: &MetricsReport, users: &IdIndex) -> Result<()> {
    let path = path.as_ref();
    let mut out = csv::Writer::from_writer(create(path)?);
    let Some(first) = report.per_user.first() else {
        return Err(Error::invalid("empty report"));
    };
    let mut header = vec!["user_id".to_owned(), "ndcg".to_owned()];
    header.extend(first.exposure.labels().iter().map(|a| format!("exposure_{a}")));
    header.extend(["diversity".to_owned(), "novelty".to_owned()]);
    out.write_record(&header)?;
    for m in &report.per_user {
        let mut row = vec![users.original(m.user).to_owned(), fmt_metric(m.ndcg)];
        row.extend(m.exposure.masses().iter().map(|&x| fmt_metric(x)));
        row.extend([fmt_metric(m.diversity), fmt_metric(m.novelty)]);
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn fmt_metric(x: f64) -> String {
    format!("{x:.6}")
}

/// A named row of the summary table.
pub struct SummaryRow<'a> {
    pub approach: String,
    pub policy: String,
    pub lambda: f64,
    pub report: &'a MetricsReport,
}

/// Render the aggregate table (NDCG, Ẽ_m, Cov, Div, Nov, mean H).
pub fn render_summary(rows: &[SummaryRow<'_>]) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:<10} {:<8} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8} {:>6}\n",
        "approach", "policy", "lambda", "NDCG", "E_m", "Cov", "Div", "Nov", "mean_H", "users"
    ));
    for r in rows {
        let a = &r.report.aggregate;
        let h = a.hellinger.map_or_else(|| "-".to_owned(), |h| format!("{h:.4}"));
        s.push_str(&format!(
            "{:<10} {:<8} {:>6.2} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>8} {:>6}\n",
            r.approach,
            r.policy,
            r.lambda,
            a.ndcg,
            a.minority_exposure,
            a.coverage,
            a.diversity,
            a.novelty,
            h,
            r.report.per_user.len()
        ));
    }
    if let Some(first) = rows.first() {
        s.push_str(&format!(
            "\nk = {}, minority = {}; {} user(s) without test items excluded\n",
            first.report.k, first.report.minority, first.report.excluded_users
        ));
    }
    s
}

pub fn write_summary(path: impl AsRef<Path>, rows: &[SummaryRow<'_>]) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    out.write_all(render_summary(rows).as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Interaction, ItemMeta};
    use proptest::prelude::*;

    fn list(items: &[usize]) -> RankedList {
        RankedList::new(items.iter().map(|&i| (i, 0.0)).collect()).unwrap()
    }

    fn set(items: &[usize]) -> BTreeSet<usize> {
        items.iter().copied().collect()
    }

    fn catalog(layout: &[(&str, &[&str])]) -> ItemCatalog {
        ItemCatalog::new(
            layout.iter()
                .enumerate()
                .map(|(i, (g, cats))| ItemMeta {
                    provider: format!("p{i}"),
                    attribute: g.to_string(),
                    categories: cats.iter().map(|c| c.to_string()).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ndcg_examples() {
        let v = ndcg_at_k(&list(&[1, 9, 2]), &set(&[1, 2, 3]), 3).unwrap();
        assert!((v - 0.7039).abs() < 1e-4, "{v}");
        assert_eq!(ndcg_at_k(&list(&[1, 2, 3]), &set(&[1, 2, 3, 4]), 3).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(&list(&[7, 8]), &set(&[1]), 2).unwrap(), 0.0);
        assert!(ndcg_at_k(&list(&[7, 8]), &set(&[]), 2).is_err());
    }

    #[test]
    fn minority_exposure_means() {
        let cat = catalog(&[("f", &[]), ("f", &[]), ("m", &[]), ("m", &[])]);
        let lists = [list(&[0, 1]), list(&[1, 0])];
        assert_eq!(minority_exposure(&lists, &cat, "f", 2).unwrap(), 1.0);
        // per-user masses 0.6131 and 0.3869 average to 0.5
        let lists = [list(&[0, 2]), list(&[3, 1])];
        assert!((minority_exposure(&lists, &cat, "f", 2).unwrap() - 0.5).abs() < 1e-12);
        assert!(minority_exposure(&lists, &cat, "x", 2).is_err());
    }

    #[test]
    fn coverage_examples() {
        let lists = [list(&[1, 2, 3]), list(&[3, 4, 5])];
        assert_eq!(catalog_coverage(&lists, 10).unwrap(), 0.5);
        let same = [list(&[1, 2]), list(&[1, 2])];
        assert_eq!(catalog_coverage(&same, 10).unwrap(), 0.2);
        let all = [list(&[0, 1]), list(&[2])];
        assert_eq!(catalog_coverage(&all, 3).unwrap(), 1.0);
    }

    #[test]
    fn diversity_examples() {
        let cat = catalog(&[("f", &["A"]), ("f", &["A"]), ("m", &["B"]), ("m", &[]), ("m", &[])]);
        assert_eq!(category_diversity(&list(&[0, 1]), &cat), 0.0);
        assert_eq!(category_diversity(&list(&[0, 2]), &cat), 1.0);
        assert!((category_diversity(&list(&[0, 1, 2]), &cat) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(category_diversity(&list(&[0, 3]), &cat), 1.0);
        assert_eq!(category_diversity(&list(&[3, 4]), &cat), 0.0);
        assert_eq!(category_diversity(&list(&[0]), &cat), 0.0);
    }

    #[test]
    fn novelty_examples() {
        let xs = vec![
            Interaction { user: 0, item: 0, timestamp: 0 },
            Interaction { user: 1, item: 0, timestamp: 0 },
            Interaction { user: 0, item: 1, timestamp: 0 },
        ];
        let pop = Popularity::from_log(&InteractionLog::new(xs, 2, 3).unwrap());
        assert_eq!(novelty(&list(&[0]), &pop), 0.0);
        assert_eq!(novelty(&list(&[2]), &pop), 1.0);
        assert_eq!(novelty(&list(&[1]), &pop), 0.5);
    }

    fn report_fixture(users: usize) -> (ItemCatalog, BTreeMap<usize, RankedList>, BTreeMap<usize, BTreeSet<usize>>, Popularity) {
        let cat = catalog(&[("f", &["A"]), ("m", &["B"]), ("m", &["A", "B"]), ("f", &[])]);
        let rankings: BTreeMap<usize, RankedList> = (0..users).map(|u| (u, list(&[u % 4, (u + 1) % 4, (u + 2) % 4]))).collect();
        let mut relevant: BTreeMap<usize, BTreeSet<usize>> = (0..users).map(|u| (u, set(&[(u + 1) % 4]))).collect();
        relevant.insert(users, set(&[0]));
        let xs = vec![Interaction { user: 0, item: 0, timestamp: 0 }];
        let pop = Popularity::from_log(&InteractionLog::new(xs, users.max(1), 4).unwrap());
        (cat, rankings, relevant, pop)
    }

    #[test]
    fn single_user_report_equals_per_user_values() {
        let (cat, rankings, relevant, pop) = report_fixture(1);
        let r = build_report(&ReportInput {
            rankings: &rankings,
            relevant: &relevant,
            targets: None,
            catalog: &cat,
            popularity: &pop,
            minority: "f",
            k: 10,
        })
        .unwrap();
        let u = &r.per_user[0];
        assert_eq!(r.aggregate.ndcg, u.ndcg);
        assert_eq!(r.aggregate.diversity, u.diversity);
        assert_eq!(r.aggregate.novelty, u.novelty);
        assert_eq!(r.aggregate.minority_exposure, u.exposure.mass_of("f").unwrap());
        assert_eq!(r.aggregate.hellinger, None);
    }

    #[test]
    fn users_without_test_items_are_excluded() {
        let (cat, mut rankings, mut relevant, pop) = report_fixture(3);
        rankings.insert(7, list(&[0]));
        relevant.insert(7, set(&[]));
        let input = ReportInput {
            rankings: &rankings,
            relevant: &relevant,
            targets: None,
            catalog: &cat,
            popularity: &pop,
            minority: "f",
            k: 10,
        };
        let r = build_report(&input).unwrap();
        assert_eq!(r.per_user.len(), 3);
        assert_eq!(r.excluded_users, 1);
        assert_eq!(build_report(&input).unwrap(), r);
        let empty = BTreeMap::new();
        assert!(build_report(&ReportInput { rankings: &empty, ..input }).is_err());
    }

    #[test]
    fn csv_and_summary() {
        let (cat, rankings, relevant, pop) = report_fixture(2);
        let r = build_report(&ReportInput {
            rankings: &rankings,
            relevant: &relevant,
            targets: None,
            catalog: &cat,
            popularity: &pop,
            minority: "f",
            k: 10,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("report.csv");
        write_report_csv(&p, &r, &IdIndex::identity(2)).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("user_id,ndcg,exposure_f,exposure_m,diversity,novelty\n"));
        assert_eq!(text.lines().count(), 3);
        let summary = render_summary(&[SummaryRow {
            approach: "base".into(),
            policy: "-".into(),
            lambda: 1.0,
            report: &r,
        }]);
        assert!(summary.contains("NDCG"));
    }

    proptest! {
        #[test]
        fn ndcg_in_unit_interval_and_front_loading_helps(
            hits in proptest::collection::vec(any::<bool>(), 1..15),
            extra in 0usize..5,
            k in 1usize..15,
        ) {
            let items: Vec<usize> = (0..hits.len()).collect();
            let mut relevant: BTreeSet<usize> = items.iter().copied().filter(|&i| hits[i]).collect();
            for e in 0..extra { relevant.insert(100 + e); }
            prop_assume!(!relevant.is_empty());
            let l = list(&items);
            let v = ndcg_at_k(&l, &relevant, k).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            // move every hit to the front
            let mut sorted = items.clone();
            sorted.sort_by_key(|i| !hits[*i]);
            let front = ndcg_at_k(&list(&sorted), &relevant, k).unwrap();
            prop_assert!(front + 1e-12 >= v);
            let ideal = (0..k.min(relevant.len())).all(|p| p < items.len() && relevant.contains(&sorted[p]));
            prop_assert_eq!(ideal, (front - 1.0).abs() < 1e-12);
        }

        #[test]
        fn two_group_exposures_complement(groups in proptest::collection::vec(any::<bool>(), 1..12)) {
            let mut layout: Vec<(&str, &[&str])> = groups.iter().map(|&g| (if g { "f" } else { "m" }, &[][..])).collect();
            layout.push(("f", &[])); layout.push(("m", &[]));
            let cat = catalog(&layout);
            let l = list(&(0..groups.len()).collect::<Vec<_>>());
            let f = minority_exposure([&l], &cat, "f", 10).unwrap();
            let m = minority_exposure([&l], &cat, "m", 10).unwrap();
            prop_assert!((f + m - 1.0).abs() < 1e-9);
        }

        #[test]
        fn coverage_monotone(lists in proptest::collection::vec(proptest::collection::btree_set(0usize..30, 1..8), 1..6)) {
            let ls: Vec<RankedList> = lists.iter().map(|s| list(&s.iter().copied().collect::<Vec<_>>())).collect();
            let mut prev = 0.0;
            for n in 1..=ls.len() {
                let c = catalog_coverage(&ls[..n], 30).unwrap();
                prop_assert!(c >= prev && c <= 1.0);
                prev = c;
            }
        }

        #[test]
        fn beyond_accuracy_bounded(cats in proptest::collection::vec(proptest::collection::vec(0usize..4, 0..3), 2..10)) {
            let names = ["A", "B", "C", "D"];
            let owned: Vec<Vec<&str>> = cats.iter().map(|c| c.iter().map(|&i| names[i]).collect()).collect();
            let mut layout: Vec<(&str, &[&str])> = owned.iter().enumerate().map(|(i, c)| (if i % 2 == 0 { "f" } else { "m" }, c.as_slice())).collect();
            layout.push(("m", &[]));
            let cat = catalog(&layout);
            let l = list(&(0..owned.len()).collect::<Vec<_>>());
            let d = category_diversity(&l, &cat);
            prop_assert!(d.is_finite() && (0.0..=1.0).contains(&d));
        }
    }
}
