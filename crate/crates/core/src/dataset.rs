//! Interaction logs, item/provider metadata, temporal splitting and group
//! representation statistics.
//!
//! Ids read from files are re-indexed densely in first-seen order; the
//! original strings stay available through [`IdIndex`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Bijection between original string ids and dense `0..n` ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdIndex {
    originals: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl IdIndex {
    /// Identity index: dense id `i` maps to the string `i`.
    pub fn identity(n: usize) -> Self {
        let mut index = Self::default();
        for i in 0..n {
            index.get_or_insert(&i.to_string());
        }
        index
    }

    pub fn get_or_insert(&mut self, original: &str) -> usize {
        if let Some(&id) = self.lookup.get(original) {
            return id;
        }
        let id = self.originals.len();
        self.originals.push(original.to_owned());
        self.lookup.insert(original.to_owned(), id);
        id
    }

    pub fn get(&self, original: &str) -> Option<usize> {
        self.lookup.get(original).copied()
    }

    pub fn original(&self, dense: usize) -> &str {
        &self.originals[dense]
    }

    pub fn len(&self) -> usize {
        self.originals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub timestamp: i64,
}

/// Timestamped implicit feedback. Any row counts as `R[u][i] = 1`.
#[derive(Debug, Clone)]
pub struct InteractionLog {
    interactions: Vec<Interaction>,
    num_users: usize,
    num_items: usize,
    users: Arc<IdIndex>,
    items: Arc<IdIndex>,
    profiles: OnceLock<Vec<Vec<usize>>>,
}

impl PartialEq for InteractionLog {
    fn eq(&self, other: &Self) -> bool {
        self.interactions == other.interactions
            && self.num_users == other.num_users
            && self.num_items == other.num_items
            && self.users == other.users
            && self.items == other.items
    }
}

impl InteractionLog {
    /// Build a log with identity id maps.
    pub fn new(interactions: Vec<Interaction>, num_users: usize, num_items: usize) -> Result<Self> {
        Self::with_ids(
            interactions,
            Arc::new(IdIndex::identity(num_users)),
            Arc::new(IdIndex::identity(num_items)),
        )
    }

    /// Build a log over the given id maps; `num_users`/`num_items` are the map sizes.
    pub fn with_ids(interactions: Vec<Interaction>, users: Arc<IdIndex>, items: Arc<IdIndex>) -> Result<Self> {
        let (num_users, num_items) = (users.len(), items.len());
        let mut seen = HashSet::with_capacity(interactions.len());
        for (row, x) in interactions.iter().enumerate() {
            if x.user >= num_users || x.item >= num_items {
                return Err(Error::invalid(format!(
                    "interaction {row}: ids ({}, {}) out of range ({num_users} users, {num_items} items)",
                    x.user, x.item
                )));
            }
            if x.timestamp < 0 {
                return Err(Error::invalid(format!("interaction {row}: negative timestamp")));
            }
            if !seen.insert((x.user, x.item, x.timestamp)) {
                return Err(Error::invalid(format!(
                    "interaction {row}: duplicate (user, item, timestamp)"
                )));
            }
        }
        Ok(Self {
            interactions,
            num_users,
            num_items,
            users,
            items,
            profiles: OnceLock::new(),
        })
    }

    fn sibling(&self, interactions: Vec<Interaction>) -> Self {
        Self {
            interactions,
            num_users: self.num_users,
            num_items: self.num_items,
            users: Arc::clone(&self.users),
            items: Arc::clone(&self.items),
            profiles: OnceLock::new(),
        }
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn user_ids(&self) -> &IdIndex {
        &self.users
    }

    pub fn item_ids(&self) -> &IdIndex {
        &self.items
    }

    /// Distinct items per user, ascending.
    pub fn profiles(&self) -> &[Vec<usize>] {
        self.profiles.get_or_init(|| {
            let mut sets = vec![BTreeSet::new(); self.num_users];
            for x in &self.interactions {
                sets[x.user].insert(x.item);
            }
            sets.into_iter().map(|s| s.into_iter().collect()).collect()
        })
    }

    pub fn profile(&self, user: usize) -> &[usize] {
        &self.profiles()[user]
    }

    /// Number of distinct users who interacted with each item.
    pub fn item_popularity(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_items];
        for items in self.profiles() {
            for &i in items {
                counts[i] += 1;
            }
        }
        counts
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn check_header(path: &Path, reader: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let headers = reader.headers()?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{}`, got `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(open(path)?))
}

fn field<'r>(path: &Path, line: u64, record: &'r csv::StringRecord, idx: usize, name: &str) -> Result<&'r str> {
    record
        .get(idx)
        .map(str::trim)
        .ok_or_else(|| Error::parse(path, line, format!("missing field `{name}`")))
}

struct LogBuilder {
    users: IdIndex,
    items: IdIndex,
    rows: Vec<Interaction>,
    seen: HashSet<(usize, usize, i64)>,
}

impl LogBuilder {
    fn new() -> Self {
        Self {
            users: IdIndex::default(),
            items: IdIndex::default(),
            rows: Vec::new(),
            seen: HashSet::new(),
        }
    }

    fn push(&mut self, path: &Path, line: u64, user: &str, item: &str, ts: &str) -> Result<()> {
        if user.is_empty() || item.is_empty() {
            return Err(Error::parse(path, line, "empty id"));
        }
        let timestamp: i64 = ts
            .parse()
            .map_err(|_| Error::parse(path, line, format!("timestamp `{ts}` is not an integer")))?;
        if timestamp < 0 {
            return Err(Error::parse(path, line, "negative timestamp"));
        }
        let user = self.users.get_or_insert(user);
        let item = self.items.get_or_insert(item);
        if !self.seen.insert((user, item, timestamp)) {
            return Err(Error::parse(path, line, "duplicate (user, item, timestamp)"));
        }
        self.rows.push(Interaction { user, item, timestamp });
        Ok(())
    }

    fn finish(self) -> Result<InteractionLog> {
        if self.rows.is_empty() {
            return Err(Error::NoInteractions);
        }
        InteractionLog::with_ids(self.rows, Arc::new(self.users), Arc::new(self.items))
    }
}

/// Load `user_id,item_id,timestamp` rows. Files ending in `.dat` are read in the
/// MovieLens `user::item::rating::timestamp` layout instead; the rating is ignored.
pub fn load_interactions(path: impl AsRef<Path>) -> Result<InteractionLog> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "dat") {
        return load_movielens(path);
    }
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &["user_id", "item_id", "timestamp"])?;
    let mut builder = LogBuilder::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::parse(path, line, format!("expected 3 fields, got {}", record.len())));
        }
        builder.push(path, line, &record[0], &record[1], record[2].trim())?;
    }
    builder.finish()
}

fn load_movielens(path: &Path) -> Result<InteractionLog> {
    let reader = BufReader::new(open(path)?);
    let mut builder = LogBuilder::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = n as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split("::").collect();
        if parts.len() != 4 {
            return Err(Error::parse(path, line_no, "expected user::item::rating::timestamp"));
        }
        builder.push(path, line_no, parts[0], parts[1], parts[3].trim())?;
    }
    builder.finish()
}

/// Metadata for one item as read from the items file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemMeta {
    pub provider: String,
    pub attribute: String,
    pub categories: Vec<String>,
}

/// Item → provider, provider attribute and category set.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCatalog {
    attributes: Vec<String>,
    item_attribute: Vec<usize>,
    providers: Vec<String>,
    category_names: Vec<String>,
    item_categories: Vec<Vec<u32>>,
    raw_categories: Vec<Vec<String>>,
}

impl ItemCatalog {
    /// Build a catalog with one entry per dense item id. The attribute
    /// vocabulary is the sorted set of distinct values and needs at least two.
    pub fn new(items: Vec<ItemMeta>) -> Result<Self> {
        let vocab: BTreeSet<&str> = items.iter().map(|m| m.attribute.as_str()).collect();
        if vocab.len() < 2 {
            return Err(Error::SingleGroup);
        }
        let attributes: Vec<String> = vocab.into_iter().map(str::to_owned).collect();

        let mut provider_attr: HashMap<&str, &str> = HashMap::new();
        for m in &items {
            if let Some(prev) = provider_attr.insert(&m.provider, &m.attribute) {
                if prev != m.attribute {
                    return Err(Error::invalid(format!(
                        "provider {:?} has conflicting attributes {prev:?} and {:?}",
                        m.provider, m.attribute
                    )));
                }
            }
        }

        let cat_vocab: BTreeSet<&str> = items
            .iter()
            .flat_map(|m| m.categories.iter().map(String::as_str))
            .collect();
        let category_names: Vec<String> = cat_vocab.into_iter().map(str::to_owned).collect();
        let cat_index: HashMap<&str, u32> = category_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i as u32))
            .collect();

        let item_attribute = items
            .iter()
            .map(|m| attributes.binary_search(&m.attribute).expect("attribute in vocabulary"))
            .collect();
        let item_categories = items
            .iter()
            .map(|m| {
                let mut ids: Vec<u32> = m.categories.iter().map(|c| cat_index[c.as_str()]).collect();
                ids.sort_unstable();
                ids.dedup();
                ids
            })
            .collect();
        let providers = items.iter().map(|m| m.provider.clone()).collect();
        let raw_categories = items.into_iter().map(|m| m.categories).collect();

        Ok(Self {
            attributes,
            item_attribute,
            providers,
            category_names,
            item_categories,
            raw_categories,
        })
    }

    /// Sorted attribute vocabulary `A`.
    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn num_groups(&self) -> usize {
        self.attributes.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_attribute.len()
    }

    pub fn attribute_index(&self, value: &str) -> Result<usize> {
        self.attributes
            .binary_search_by(|a| a.as_str().cmp(value))
            .map_err(|_| Error::UnknownAttribute(value.to_owned()))
    }

    /// Index into [`Self::attributes`] of the item's provider attribute.
    #[inline]
    pub fn group_of(&self, item: usize) -> usize {
        self.item_attribute[item]
    }

    pub fn provider_of(&self, item: usize) -> &str {
        &self.providers[item]
    }

    /// Interned, sorted category ids of an item.
    pub fn categories_of(&self, item: usize) -> &[u32] {
        &self.item_categories[item]
    }

    pub fn category_names(&self) -> &[String] {
        &self.category_names
    }

    /// `|I^a|` for every attribute value.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.attributes.len()];
        for &a in &self.item_attribute {
            sizes[a] += 1;
        }
        sizes
    }

    /// Metadata of an item in the form it was constructed from.
    pub fn meta(&self, item: usize) -> ItemMeta {
        ItemMeta {
            provider: self.providers[item].clone(),
            attribute: self.attributes[self.item_attribute[item]].clone(),
            categories: self.raw_categories[item].clone(),
        }
    }
}

/// Load `item_id,provider_id,attribute,categories` rows for every item in `log`.
/// Rows for items that never occur in the log are ignored.
pub fn load_item_metadata(path: impl AsRef<Path>, log: &InteractionLog) -> Result<ItemCatalog> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &["item_id", "provider_id", "attribute", "categories"])?;
    let mut metas: Vec<Option<ItemMeta>> = vec![None; log.num_items()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 && record.len() != 3 {
            return Err(Error::parse(path, line, format!("expected 4 fields, got {}", record.len())));
        }
        let item = field(path, line, &record, 0, "item_id")?;
        let provider = field(path, line, &record, 1, "provider_id")?;
        let attribute = field(path, line, &record, 2, "attribute")?;
        if attribute.is_empty() {
            return Err(Error::parse(path, line, "empty attribute"));
        }
        let categories = record
            .get(3)
            .unwrap_or("")
            .split('|')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_owned)
            .collect();
        let Some(dense) = log.item_ids().get(item) else {
            continue;
        };
        if metas[dense].is_some() {
            return Err(Error::parse(path, line, format!("duplicate metadata for item {item:?}")));
        }
        metas[dense] = Some(ItemMeta {
            provider: provider.to_owned(),
            attribute: attribute.to_owned(),
            categories,
        });
    }
    let missing: Vec<&str> = metas
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_none())
        .map(|(i, _)| log.item_ids().original(i))
        .collect();
    if !missing.is_empty() {
        let shown = missing.iter().take(10).copied().collect::<Vec<_>>().join(", ");
        let more = if missing.len() > 10 {
            format!(" (and {} more)", missing.len() - 10)
        } else {
            String::new()
        };
        return Err(Error::MissingMetadata(format!("{shown}{more}")));
    }
    ItemCatalog::new(metas.into_iter().map(Option::unwrap).collect())
}

pub fn write_interactions(path: impl AsRef<Path>, log: &InteractionLog) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "user_id,item_id,timestamp").map_err(io)?;
    for x in log.interactions() {
        writeln!(
            out,
            "{},{},{}",
            log.user_ids().original(x.user),
            log.item_ids().original(x.item),
            x.timestamp
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_items(path: impl AsRef<Path>, catalog: &ItemCatalog, items: &IdIndex) -> Result<()> {
    let path = path.as_ref();
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(["item_id", "provider_id", "attribute", "categories"])?;
    for item in 0..catalog.num_items() {
        let meta = catalog.meta(item);
        out.write_record([
            items.original(item),
            meta.provider.as_str(),
            meta.attribute.as_str(),
            meta.categories.join("|").as_str(),
        ])?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Write the dense ↔ original id map as `kind,dense_id,original_id`.
pub fn write_id_map(path: impl AsRef<Path>, log: &InteractionLog) -> Result<()> {
    let path = path.as_ref();
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(["kind", "dense_id", "original_id"])?;
    for (kind, index) in [("user", log.user_ids()), ("item", log.item_ids())] {
        for dense in 0..index.len() {
            out.write_record([kind, &dense.to_string(), index.original(dense)])?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: InteractionLog,
    pub test: InteractionLog,
}

/// Size of the per-user test set: `ceil(holdout * n)`, capped at `n - 1`.
pub fn test_size(n: usize, holdout: f64) -> usize {
    if n < 2 {
        return 0;
    }
    // absorb representation error, e.g. 0.2 * 15 = 3.0000000000000004
    let raw = (holdout * n as f64 - 1e-9).ceil().max(1.0) as usize;
    raw.min(n - 1)
}

/// Per-user temporal holdout: the most recent `ceil(holdout · |I_u|)`
/// interactions of each user go to test. Timestamp ties resolve by input
/// order, later rows counting as more recent. Users with a single interaction
/// stay in train.
pub fn temporal_split(log: &InteractionLog, holdout: f64) -> Result<SplitPair> {
    if !(holdout > 0.0 && holdout < 1.0) {
        return Err(Error::invalid(format!("holdout must be in (0, 1), got {holdout}")));
    }
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); log.num_users()];
    for (row, x) in log.interactions().iter().enumerate() {
        by_user[x.user].push(row);
    }
    let rows = log.interactions();
    let mut in_test = vec![false; rows.len()];
    let mut singletons = 0usize;
    for user_rows in &mut by_user {
        if user_rows.len() == 1 {
            singletons += 1;
        }
        // stable: equal timestamps keep input order
        user_rows.sort_by_key(|&r| rows[r].timestamp);
        let n_test = test_size(user_rows.len(), holdout);
        for &r in &user_rows[user_rows.len() - n_test..] {
            in_test[r] = true;
        }
    }
    if singletons > 0 {
        warn!("{singletons} user(s) with a single interaction kept entirely in train");
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (x, t) in rows.iter().zip(in_test) {
        if t { test.push(*x) } else { train.push(*x) }
    }
    Ok(SplitPair {
        train: log.sibling(train),
        test: log.sibling(test),
    })
}

/// Catalog and interaction representation of each provider group, indexed
/// like [`ItemCatalog::attributes`].
#[derive(Debug, Clone, PartialEq)]
pub struct GroupShares {
    pub attributes: Vec<String>,
    pub catalog_share: Vec<f64>,
    pub interaction_share: Vec<f64>,
}

impl GroupShares {
    pub fn catalog(&self, attribute: &str) -> Option<f64> {
        let i = self.attributes.iter().position(|a| a == attribute)?;
        Some(self.catalog_share[i])
    }

    pub fn interactions(&self, attribute: &str) -> Option<f64> {
        let i = self.attributes.iter().position(|a| a == attribute)?;
        Some(self.interaction_share[i])
    }
}

/// `|I^a| / |I|` and the share of (distinct) user-item pairs falling in `I^a`.
pub fn group_shares(catalog: &ItemCatalog, log: &InteractionLog) -> Result<GroupShares> {
    if catalog.num_items() < log.num_items() {
        return Err(Error::invalid("catalog does not cover the log's items"));
    }
    let n = catalog.num_items() as f64;
    let catalog_share = catalog.group_sizes().into_iter().map(|c| c as f64 / n).collect();
    let mut counts = vec![0usize; catalog.num_groups()];
    let mut total = 0usize;
    for profile in log.profiles() {
        for &i in profile {
            counts[catalog.group_of(i)] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoInteractions);
    }
    let interaction_share = counts.into_iter().map(|c| c as f64 / total as f64).collect();
    Ok(GroupShares {
        attributes: catalog.attributes().to_vec(),
        catalog_share,
        interaction_share,
    })
}

/// Parameters of the synthetic two-group generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub num_users: usize,
    pub num_items: usize,
    pub minority_catalog_share: f64,
    pub minority_affinity: f64,
    pub interactions_per_user: usize,
    pub seed: u64,
}

pub const MINORITY: &str = "minority";
pub const MAJORITY: &str = "majority";

const SYNTH_TOPICS: usize = 4;
const SYNTH_GENRES: [&str; 8] = [
    "action", "comedy", "drama", "horror", "romance", "scifi", "thriller", "western",
];

/// Generate a two-group dataset.
///
/// `round(minority_catalog_share · num_items)` items, placed at random,
/// form the minority group. Items carry a latent topic and a popularity
/// weight; each user has a favourite topic. A user's draw picks the minority
/// group with probability `minority_affinity`, then an unseen item of that
/// group weighted by popularity and topic match. Timestamps run sequentially.
pub fn synthesize_dataset(params: &SynthParams) -> Result<(InteractionLog, ItemCatalog)> {
    let SynthParams {
        num_users,
        num_items,
        minority_catalog_share,
        minority_affinity,
        interactions_per_user,
        seed,
    } = *params;
    if num_users == 0 || num_items == 0 || interactions_per_user == 0 {
        return Err(Error::invalid("synthetic counts must be > 0"));
    }
    for (name, v) in [
        ("minority_catalog_share", minority_catalog_share),
        ("minority_affinity", minority_affinity),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(format!("{name} must be in (0, 1), got {v}")));
        }
    }
    if interactions_per_user > num_items {
        return Err(Error::invalid("interactions_per_user exceeds num_items"));
    }

    let n_minority = (minority_catalog_share * num_items as f64).round() as usize;
    if n_minority == 0 {
        return Err(Error::invalid("synthetic parameters imply no minority items"));
    }
    if n_minority == num_items {
        return Err(Error::invalid("synthetic parameters imply no majority items"));
    }
    let mut rng = seed::rng(seed::derive(seed, "synth"));
    let mut minority_flags: Vec<bool> = (0..num_items).map(|i| i < n_minority).collect();
    minority_flags.shuffle(&mut rng);
    let mut is_minority = Vec::with_capacity(num_items);
    let mut topic = Vec::with_capacity(num_items);
    let mut weight = Vec::with_capacity(num_items);
    let mut metas = Vec::with_capacity(num_items);
    let mut group_counts = [0usize; 2];
    for &minority in &minority_flags {
        let t = rng.gen_range(0..SYNTH_TOPICS);
        let u: f64 = rng.gen();
        let g = usize::from(minority);
        let provider = format!("{}-{}", if minority { "f" } else { "m" }, group_counts[g] / 3);
        group_counts[g] += 1;
        let mut categories = vec![SYNTH_GENRES[2 * t].to_owned()];
        if rng.gen_bool(0.5) {
            categories.push(SYNTH_GENRES[rng.gen_range(0..SYNTH_GENRES.len())].to_owned());
        }
        categories.sort();
        categories.dedup();
        metas.push(ItemMeta {
            provider,
            attribute: if minority { MINORITY } else { MAJORITY }.to_owned(),
            categories,
        });
        is_minority.push(minority);
        topic.push(t);
        weight.push(0.05 + u * u);
    }

    let mut interactions = Vec::with_capacity(num_users * interactions_per_user);
    let mut ts: i64 = 0;
    for user in 0..num_users {
        let favourite = rng.gen_range(0..SYNTH_TOPICS);
        let mut taken = vec![false; num_items];
        let mut remaining = group_counts;
        for _ in 0..interactions_per_user {
            let mut minority = rng.gen_bool(minority_affinity);
            if remaining[usize::from(minority)] == 0 {
                minority = !minority;
            }
            let pool_weight = |i: usize| {
                if taken[i] || is_minority[i] != minority {
                    0.0
                } else if topic[i] == favourite {
                    3.0 * weight[i]
                } else {
                    weight[i]
                }
            };
            let total: f64 = (0..num_items).map(pool_weight).sum();
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = None;
            for i in 0..num_items {
                let w = pool_weight(i);
                if w > 0.0 {
                    chosen = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            let item = chosen.expect("group has remaining items");
            taken[item] = true;
            remaining[usize::from(minority)] -= 1;
            interactions.push(Interaction { user, item, timestamp: ts });
            ts += 1;
        }
    }
    let log = InteractionLog::new(interactions, num_users, num_items)?;
    let catalog = ItemCatalog::new(metas)?;
    Ok((log, catalog))
}

/// Per-attribute item counts, keyed by attribute value.
pub fn group_item_counts(catalog: &ItemCatalog) -> BTreeMap<String, usize> {
    catalog
        .attributes()
        .iter()
        .cloned()
        .zip(catalog.group_sizes())
        .collect()
}
