//! Inter-rater agreement and rating summaries.
//!
//! ```
//! use vdagent::metrics::cohen_kappa;
//!
//! let a = ["F", "P", "G", "P"];
//! let b = ["F", "P", "P", "P"];
//! let k = cohen_kappa(&a, &b).unwrap();
//! assert!((k - 0.5555555555555556).abs() < 1e-12);
//! ```

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::io::Read;

use serde::Deserialize;
use thiserror::Error;

use crate::action::VisualCounts;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0}")]
    Precondition(String),
    #[error("rating {score} out of range 1..=7 (task {task:?}, rater {rater:?})")]
    RatingOutOfRange {
        task: String,
        rater: String,
        score: i64,
    },
    #[error("csv: {0}")]
    Csv(String),
}

/// Cohen's kappa for two raters over the same items.
///
/// When expected agreement is 1 (both raters used a single identical label
/// throughout) kappa is defined here as 1 if observed agreement is also 1,
/// and 0 otherwise.
pub fn cohen_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Precondition("kappa needs at least one item".into()));
    }
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let mut marg: HashMap<&T, (u128, u128)> = HashMap::new();
    for x in a {
        marg.entry(x).or_default().0 += 1;
    }
    for y in b {
        marg.entry(y).or_default().1 += 1;
    }
    // Work in counts scaled by n^2 so the only rounding is the final division.
    let chance: u128 = marg.values().map(|&(ca, cb)| ca * cb).sum();
    let total = n * n;
    if chance == total {
        return Ok(if agree == n { 1.0 } else { 0.0 });
    }
    Ok(((n * agree) as i128 - chance as i128) as f64 / (total - chance) as f64)
}

/// Mean of Cohen's kappa over every pair of raters.
pub fn mean_pairwise_kappa<T: Eq + Hash>(series: &[Vec<T>]) -> Result<f64, MetricsError> {
    if series.len() < 2 {
        return Err(MetricsError::Precondition(format!(
            "pairwise kappa needs at least 2 raters, got {}",
            series.len()
        )));
    }
    let mut sum = 0.0;
    let mut pairs = 0u32;
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            sum += cohen_kappa(&series[i], &series[j])?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingStats {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// 7-point Likert scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingSeries(Vec<u8>);

impl RatingSeries {
    pub fn new(scores: Vec<u8>) -> Result<Self, MetricsError> {
        if let Some(&s) = scores.iter().find(|s| !(1..=7).contains(*s)) {
            return Err(MetricsError::RatingOutOfRange {
                task: String::new(),
                rater: String::new(),
                score: s as i64,
            });
        }
        Ok(RatingSeries(scores))
    }

    pub fn scores(&self) -> &[u8] {
        &self.0
    }

    pub fn stats(&self) -> Result<RatingStats, MetricsError> {
        rating_stats(&self.0)
    }
}

pub fn rating_stats(scores: &[u8]) -> Result<RatingStats, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Precondition("no ratings".into()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().map(|&s| s as f64).sum::<f64>() / n;
    let var = scores
        .iter()
        .map(|&s| (s as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(RatingStats {
        n: scores.len(),
        mean,
        std: var.sqrt(),
    })
}

#[derive(Deserialize)]
struct AnnotationRow {
    task_id: String,
    rater: String,
    label: String,
}

#[derive(Deserialize)]
struct RatingRow {
    task_id: String,
    rater: String,
    score: i64,
}

/// Labels from several raters, aligned by task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotations {
    /// Tasks in order of first appearance.
    pub tasks: Vec<String>,
    /// One label per task for each rater, in `tasks` order.
    pub series: BTreeMap<String, Vec<String>>,
}

impl Annotations {
    pub fn mean_pairwise_kappa(&self) -> Result<f64, MetricsError> {
        let series: Vec<Vec<String>> = self.series.values().cloned().collect();
        mean_pairwise_kappa(&series)
    }
}

fn csv_err(e: csv::Error) -> MetricsError {
    MetricsError::Csv(e.to_string())
}

/// Reads `task_id,rater,label` rows. Every rater must label every task
/// exactly once.
pub fn read_annotations<R: Read>(input: R) -> Result<Annotations, MetricsError> {
    let mut tasks: Vec<String> = Vec::new();
    let mut by_rater: BTreeMap<String, HashMap<String, String>> = BTreeMap::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: AnnotationRow = row.map_err(csv_err)?;
        if !tasks.contains(&row.task_id) {
            tasks.push(row.task_id.clone());
        }
        let labels = by_rater.entry(row.rater.clone()).or_default();
        if labels.insert(row.task_id.clone(), row.label).is_some() {
            return Err(MetricsError::Precondition(format!(
                "rater {:?} labelled task {:?} twice",
                row.rater, row.task_id
            )));
        }
    }
    let mut series = BTreeMap::new();
    for (rater, labels) in by_rater {
        let aligned = tasks
            .iter()
            .map(|t| {
                labels.get(t).cloned().ok_or_else(|| {
                    MetricsError::Precondition(format!("rater {rater:?} has no label for task {t:?}"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        series.insert(rater, aligned);
    }
    Ok(Annotations { tasks, series })
}

/// Reads `task_id,rater,score` rows and groups scores by task, in order of
/// first appearance.
pub fn read_ratings<R: Read>(input: R) -> Result<Vec<(String, RatingSeries)>, MetricsError> {
    let mut groups: Vec<(String, Vec<u8>)> = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: RatingRow = row.map_err(csv_err)?;
        if !(1..=7).contains(&row.score) {
            return Err(MetricsError::RatingOutOfRange {
                task: row.task_id,
                rater: row.rater,
                score: row.score,
            });
        }
        match groups.iter_mut().find(|(t, _)| *t == row.task_id) {
            Some((_, v)) => v.push(row.score as u8),
            None => groups.push((row.task_id, vec![row.score as u8])),
        }
    }
    groups
        .into_iter()
        .map(|(t, v)| Ok((t, RatingSeries::new(v)?)))
        .collect()
}

#[derive(Deserialize)]
struct CountsRow {
    annotator: String,
    full: u64,
    partial: u64,
    genui: u64,
}

/// Reads `annotator,full,partial,genui` rows of per-annotator modality
/// counts.
pub fn read_counts<R: Read>(input: R) -> Result<Vec<(String, VisualCounts)>, MetricsError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|row| {
            let row: CountsRow = row.map_err(csv_err)?;
            let counts = VisualCounts {
                full: row.full,
                partial: row.partial,
                genui: row.genui,
            };
            Ok((row.annotator, counts))
        })
        .collect()
}
