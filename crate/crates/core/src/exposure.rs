//! Group exposure: position-discounted achieved exposure of a ranked prefix,
//! policy targets, and the Hellinger distance between the two.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dataset::{GroupShares, ItemCatalog};
use crate::error::{Error, Result};
use crate::ranking::RankedList;

const SUM_TOLERANCE: f64 = 1e-9;

/// Discount of 1-based position `p`: `1 / log2(p + 1)`.
#[inline]
pub fn position_weight(position: usize) -> f64 {
    1.0 / ((position + 1) as f64).log2()
}

/// A probability vector over the attribute values of a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureDistribution {
    labels: Arc<[String]>,
    mass: Vec<f64>,
}

impl ExposureDistribution {
    pub fn new(labels: impl Into<Arc<[String]>>, mass: Vec<f64>) -> Result<Self> {
        let labels = labels.into();
        if labels.len() != mass.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} masses",
                labels.len(),
                mass.len()
            )));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::invalid(format!("masses must be finite and ≥ 0: {mass:?}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { labels, mass })
    }

    /// Normalize nonnegative weights into a distribution.
    pub fn from_weights(labels: impl Into<Arc<[String]>>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::invalid("weights must have a positive sum"));
        }
        Self::new(labels, weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(labels: impl Into<Arc<[String]>>) -> Result<Self> {
        let labels = labels.into();
        let n = labels.len();
        if n == 0 {
            return Err(Error::invalid("empty attribute domain"));
        }
        Self::new(labels, vec![1.0 / n as f64; n])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_of(&self, label: &str) -> Result<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.mass[i])
            .ok_or_else(|| Error::UnknownAttribute(label.to_owned()))
    }

    fn check_domain(&self, other: &Self) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::DomainMismatch {
                left: self.labels.to_vec(),
                right: other.labels.to_vec(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for ExposureDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (l, m)) in self.labels.iter().zip(&self.mass).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}: {m:.4}")?;
        }
        f.write_str(")")
    }
}

fn catalog_labels(catalog: &ItemCatalog) -> Arc<[String]> {
    catalog.attributes().into()
}

/// Share of discounted exposure each group receives in the first
/// `min(k, len)` positions of `list`.
pub fn achieved_exposure(list: &RankedList, catalog: &ItemCatalog, k: usize) -> Result<ExposureDistribution> {
    if list.is_empty() {
        return Err(Error::EmptyList);
    }
    if k == 0 {
        return Err(Error::invalid("k must be ≥ 1"));
    }
    let mut weights = vec![0.0; catalog.num_groups()];
    for (p, item) in list.items().take(k).enumerate() {
        weights[catalog.group_of(item)] += position_weight(p + 1);
    }
    ExposureDistribution::from_weights(catalog_labels(catalog), &weights)
}

/// Sum of √(p·q) over the shared domain.
pub fn bhattacharyya(p: &ExposureDistribution, q: &ExposureDistribution) -> Result<f64> {
    p.check_domain(q)?;
    Ok(p.mass.iter().zip(&q.mass).map(|(a, b)| (a * b).sqrt()).sum())
}

/// Hellinger distance `(1/√2) · ‖√p − √q‖₂`, in `[0, 1]`.
pub fn hellinger(p: &ExposureDistribution, q: &ExposureDistribution) -> Result<f64> {
    p.check_domain(q)?;
    let sq: f64 = p
        .mass
        .iter()
        .zip(&q.mass)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((sq / 2.0).sqrt().min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    /// Exposure proportional to catalog representation.
    Cat,
    /// Exposure proportional to interaction representation.
    Int,
    /// Equal exposure for every group.
    Par,
    /// Exposure proportional to the user's own profile.
    Per,
    /// Fixed platform-supplied shares.
    Custom,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Cat => "cat",
            PolicyKind::Int => "int",
            PolicyKind::Par => "par",
            PolicyKind::Per => "per",
            PolicyKind::Custom => "custom",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cat" => Ok(PolicyKind::Cat),
            "int" => Ok(PolicyKind::Int),
            "par" => Ok(PolicyKind::Par),
            "per" => Ok(PolicyKind::Per),
            "custom" => Ok(PolicyKind::Custom),
            other => Err(Error::invalid(format!(
                "unknown policy {other:?} (expected cat|int|par|per|custom)"
            ))),
        }
    }
}

/// A rule producing the target exposure distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Cat(GroupShares),
    Int(GroupShares),
    Par,
    Per,
    Custom(BTreeMap<String, f64>),
}

impl Policy {
    /// Build a policy of the given kind. Cat/Int need `shares`; Custom needs `custom`.
    pub fn from_kind(
        kind: PolicyKind,
        shares: Option<&GroupShares>,
        custom: Option<&BTreeMap<String, f64>>,
    ) -> Result<Self> {
        let need_shares = || {
            shares
                .cloned()
                .ok_or_else(|| Error::invalid(format!("policy {kind} requires group shares")))
        };
        Ok(match kind {
            PolicyKind::Cat => Policy::Cat(need_shares()?),
            PolicyKind::Int => Policy::Int(need_shares()?),
            PolicyKind::Par => Policy::Par,
            PolicyKind::Per => Policy::Per,
            PolicyKind::Custom => Policy::Custom(
                custom
                    .cloned()
                    .ok_or_else(|| Error::invalid("custom policy requires target.<attribute> entries"))?,
            ),
        })
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Cat(_) => PolicyKind::Cat,
            Policy::Int(_) => PolicyKind::Int,
            Policy::Par => PolicyKind::Par,
            Policy::Per => PolicyKind::Per,
            Policy::Custom(_) => PolicyKind::Custom,
        }
    }

    /// Whether the target depends on the user.
    pub fn is_personal(&self) -> bool {
        matches!(self, Policy::Per)
    }
}

fn shares_on_catalog(shares: &GroupShares, values: &[f64], catalog: &ItemCatalog) -> Result<Vec<f64>> {
    catalog
        .attributes()
        .iter()
        .map(|a| {
            shares
                .attributes
                .iter()
                .position(|s| s == a)
                .map(|i| values[i])
                .ok_or_else(|| Error::UnknownAttribute(a.clone()))
        })
        .collect()
}

/// Target exposure for one user under `policy`. `profile` is the user's
/// training items and is only consulted by [`Policy::Per`].
pub fn target_distribution(
    policy: &Policy,
    profile: Option<&[usize]>,
    catalog: &ItemCatalog,
) -> Result<ExposureDistribution> {
    let labels = catalog_labels(catalog);
    match policy {
        Policy::Cat(shares) => {
            ExposureDistribution::from_weights(labels, &shares_on_catalog(shares, &shares.catalog_share, catalog)?)
        }
        Policy::Int(shares) => ExposureDistribution::from_weights(
            labels,
            &shares_on_catalog(shares, &shares.interaction_share, catalog)?,
        ),
        Policy::Par => ExposureDistribution::uniform(labels),
        Policy::Per => {
            let profile = profile.filter(|p| !p.is_empty()).ok_or_else(|| {
                Error::invalid("per-user policy needs a non-empty user profile")
            })?;
            let mut counts = vec![0.0; catalog.num_groups()];
            for &item in profile {
                counts[catalog.group_of(item)] += 1.0;
            }
            ExposureDistribution::from_weights(labels, &counts)
        }
        Policy::Custom(targets) => {
            for key in targets.keys() {
                catalog.attribute_index(key)?;
            }
            let mass: Vec<f64> = catalog
                .attributes()
                .iter()
                .map(|a| targets.get(a).copied().unwrap_or(0.0))
                .collect();
            let total: f64 = mass.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!("custom targets sum to {total}, not 1")));
            }
            ExposureDistribution::from_weights(labels, &mass)
        }
    }
}
