//! Metadata curation: keyword matching over a text corpus, truncated target
//! marginal, one-step reweighting toward it, and resampling-weight export.
//!
//! Each text gets at most one keyword label (longest substring match). The
//! observed keyword distribution is typically long-tailed; truncating its
//! counts at a threshold and renormalizing gives a flatter target, and one
//! balancing step on the keyword axis turns the ratio target/observed into a
//! per-record resampling weight.

use crate::measure::JointMeasure;
use crate::rng::stream;
use crate::{Error, Real, Result};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;

/// An in-memory list of `(id, text)` records with unique ids.
#[derive(Debug, Clone)]
pub struct Corpus {
    records: Vec<(String, String)>,
}

impl Corpus {
    pub fn new(records: Vec<(String, String)>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::BadCorpus);
        }
        let mut seen = std::collections::HashSet::new();
        for (id, _) in &records {
            if !seen.insert(id.as_str()) {
                return Err(Error::BadCorpus);
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[(String, String)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// How keyword substrings are compared against texts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Case-insensitive on whitespace-normalized text.
    #[default]
    Normalized,
    /// Exact byte substring matching.
    ExactBytes,
}

fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Per-record keyword labels: an index into the keyword list, or none.
#[derive(Debug, Clone)]
pub struct KeywordAssignment {
    keywords: Vec<String>,
    record_ids: Vec<String>,
    labels: Vec<Option<usize>>,
}

impl KeywordAssignment {
    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn record_ids(&self) -> &[String] {
        &self.record_ids
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Matched records per keyword.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.keywords.len()];
        for label in self.labels.iter().flatten() {
            counts[*label] += 1;
        }
        counts
    }

    pub fn matched(&self) -> usize {
        self.labels.iter().flatten().count()
    }
}

/// Label every record with a single keyword.
///
/// A record matches a keyword when the keyword occurs as a substring of the
/// text (after normalization, unless `ExactBytes`). Among matches the
/// longest keyword wins; remaining ties go to the earlier list position.
/// Records matching nothing stay unlabeled.
pub fn match_keywords(
    corpus: &Corpus,
    keywords: &[String],
    mode: MatchMode,
) -> Result<KeywordAssignment> {
    if keywords.is_empty() {
        return Err(Error::BadKeywordList);
    }
    let mut seen = std::collections::HashSet::new();
    for kw in keywords {
        if kw.is_empty() || !seen.insert(kw.as_str()) {
            return Err(Error::BadKeywordList);
        }
    }
    let needles: Vec<String> = match mode {
        MatchMode::Normalized => keywords.iter().map(|k| normalize(k)).collect(),
        MatchMode::ExactBytes => keywords.to_vec(),
    };
    let mut labels = Vec::with_capacity(corpus.len());
    let mut record_ids = Vec::with_capacity(corpus.len());
    for (id, text) in corpus.records() {
        record_ids.push(id.clone());
        let haystack = match mode {
            MatchMode::Normalized => normalize(text),
            MatchMode::ExactBytes => text.clone(),
        };
        let mut best: Option<usize> = None;
        for (idx, needle) in needles.iter().enumerate() {
            if haystack.contains(needle.as_str()) {
                let better = match best {
                    None => true,
                    Some(cur) => needle.len() > needles[cur].len(),
                };
                if better {
                    best = Some(idx);
                }
            }
        }
        labels.push(best);
    }
    Ok(KeywordAssignment {
        keywords: keywords.to_vec(),
        record_ids,
        labels,
    })
}

/// Truncate keyword counts at `threshold` and normalize:
/// `target(y) ~ min(count(y), t)`. Unobserved keywords get zero target.
pub fn truncated_target(counts: &[u64], threshold: u64) -> Result<Vec<f64>> {
    if threshold == 0 {
        return Err(Error::InvalidParameter {
            name: "threshold",
            value: 0.0,
            constraint: "threshold >= 1",
        });
    }
    let clipped: Vec<u64> = counts.iter().map(|&c| c.min(threshold)).collect();
    let total: u64 = clipped.iter().sum();
    if total == 0 {
        return Err(Error::AllZeroCounts);
    }
    Ok(clipped.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Observed marginal, target marginal, and per-record resampling weights.
///
/// Weight of a labeled record is `target(label) / observed(label)`;
/// unlabeled records get weight zero and drop out of the weighted marginal.
#[derive(Debug, Clone)]
pub struct CurationPlan {
    pub observed_marginal: Vec<f64>,
    pub target_marginal: Vec<f64>,
    pub record_ids: Vec<String>,
    pub labels: Vec<Option<usize>>,
    pub weights: Vec<f64>,
    pub threshold: Option<u64>,
    pub keywords: Vec<String>,
}

impl CurationPlan {
    /// The keyword distribution induced by the weights; equals the target on
    /// its support.
    pub fn weighted_marginal(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.target_marginal.len()];
        for (label, &w) in self.labels.iter().zip(self.weights.iter()) {
            if let Some(y) = label {
                acc[*y] += w;
            }
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            for a in &mut acc {
                *a /= total;
            }
        }
        acc
    }
}

/// One balancing step on the keyword axis: per-record weights
/// `target(label) / observed(label)`.
pub fn curation_weights(assignment: &KeywordAssignment, target: &[f64]) -> Result<CurationPlan> {
    if target.len() != assignment.keywords().len() {
        return Err(Error::LengthMismatch {
            expected: assignment.keywords().len(),
            got: target.len(),
        });
    }
    let counts = assignment.counts();
    let matched: u64 = counts.iter().sum();
    if matched == 0 {
        return Err(Error::AllZeroCounts);
    }
    let observed: Vec<f64> = counts.iter().map(|&c| c as f64 / matched as f64).collect();
    for (y, (&t, &o)) in target.iter().zip(observed.iter()).enumerate() {
        if t > 0.0 && o == 0.0 {
            return Err(Error::TargetOutsideSupport {
                keyword: assignment.keywords()[y].clone(),
            });
        }
    }
    let weights: Vec<f64> = assignment
        .labels()
        .iter()
        .map(|label| match label {
            Some(y) if observed[*y] > 0.0 => target[*y] / observed[*y],
            _ => 0.0,
        })
        .collect();
    Ok(CurationPlan {
        observed_marginal: observed,
        target_marginal: target.to_vec(),
        record_ids: assignment.record_ids().to_vec(),
        labels: assignment.labels().to_vec(),
        weights,
        threshold: None,
        keywords: assignment.keywords().to_vec(),
    })
}

/// Full pipeline step: counts, truncated target at `threshold`, weights.
pub fn plan_with_threshold(
    assignment: &KeywordAssignment,
    threshold: u64,
) -> Result<CurationPlan> {
    let target = truncated_target(&assignment.counts(), threshold)?;
    let mut plan = curation_weights(assignment, &target)?;
    plan.threshold = Some(threshold);
    Ok(plan)
}

/// Draw `size` record ids with replacement, with probability proportional to
/// the plan's weights.
pub fn resample(plan: &CurationPlan, size: usize, seed: u64) -> Result<Vec<String>> {
    if !plan.weights.iter().any(|&w| w > 0.0) {
        return Err(Error::NoPositiveWeight);
    }
    let dist = WeightedIndex::new(&plan.weights).map_err(|_| Error::NoPositiveWeight)?;
    let mut rng = stream(seed);
    Ok((0..size)
        .map(|_| plan.record_ids[dist.sample(&mut rng)].clone())
        .collect())
}

/// The point-mass (record x keyword) measure induced by an assignment, for
/// cross-checking curation against matrix balancing. Unmatched records
/// contribute empty rows and are excluded from the mass.
pub fn assignment_measure<T: Real>(assignment: &KeywordAssignment) -> Result<JointMeasure<T>> {
    let n = assignment.record_ids().len();
    let l = assignment.keywords().len();
    let matched = assignment.matched();
    if matched == 0 {
        return Err(Error::AllZeroCounts);
    }
    let unit = T::one() / T::from_usize(matched).unwrap();
    let mut weights = ndarray::Array2::from_elem((n, l), T::zero());
    for (i, label) in assignment.labels().iter().enumerate() {
        if let Some(y) = label {
            weights[(i, *y)] = unit;
        }
    }
    JointMeasure::new(
        weights,
        assignment.record_ids().to_vec(),
        assignment.keywords().to_vec(),
    )
}
