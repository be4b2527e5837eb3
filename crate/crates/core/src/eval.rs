//! Metrics, confusion-derived cost matrices and stratified cross-validation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::booster::{train, TrainParams};
use crate::cost_model::CostMatrix;
use crate::data_io::{rng, Dataset};
use crate::label::Label;
use crate::{Error, Result};

fn check_lengths(predictions: &[Label], truths: &[Label]) -> Result<()> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(())
}

/// Mean of `C(truth, prediction)`.
pub fn average_cost(predictions: &[Label], truths: &[Label], c: &CostMatrix) -> Result<f64> {
    check_lengths(predictions, truths)?;
    let mut total = 0.0;
    for (p, t) in predictions.iter().zip(truths) {
        total += c.cost(t.check(c.k())?, p.check(c.k())?);
    }
    Ok(total / truths.len() as f64)
}

/// Counts of (true class, predicted class) pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                found: counts.len(),
            });
        }
        Ok(Self { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Samples of true class `truth` predicted as `predicted` (zero-based).
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[truth * self.k..(truth + 1) * self.k].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }
}

pub fn confusion(predictions: &[Label], truths: &[Label], k: usize) -> Result<ConfusionMatrix> {
    check_lengths(predictions, truths)?;
    let mut counts = vec![0; k * k];
    for (p, t) in predictions.iter().zip(truths) {
        counts[t.check(k)?.index() * k + p.check(k)?.index()] += 1;
    }
    ConfusionMatrix::from_counts(k, counts)
}

/// Scale of a confusion-derived cost matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lambda {
    Fixed(f64),
    /// Largest entry equal to 1.
    Auto,
}

/// `C = lambda · F*`, where `F*` is the row-normalized confusion matrix with
/// its diagonal set to zero.
///
/// A confusion the baseline never made would cost nothing, so every zero
/// off-diagonal entry is raised to the smallest nonzero entry of `F*`. This
/// also covers classes the baseline never misclassified.
pub fn imbalance_cost_matrix(f: &ConfusionMatrix, lambda: Lambda) -> Result<CostMatrix> {
    let k = f.k();
    if let Lambda::Fixed(l) = lambda {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {l}"
            )));
        }
    }
    let mut entries = vec![0.0; k * k];
    for i in 0..k {
        let total = f.row_sum(i);
        if total == 0 {
            return Err(Error::EmptyConfusionRow(i + 1));
        }
        for j in 0..k {
            if i != j {
                entries[i * k + j] = f.get(i, j) as f64 / total as f64;
            }
        }
    }
    let smallest = entries
        .iter()
        .copied()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !smallest.is_finite() {
        return Err(Error::PerfectBaseline);
    }
    for i in 0..k {
        let row = &mut entries[i * k..(i + 1) * k];
        for (j, v) in row.iter_mut().enumerate() {
            if j != i && *v == 0.0 {
                *v = smallest;
            }
        }
    }
    let entries = match lambda {
        Lambda::Fixed(l) => entries.into_iter().map(|v| v * l).collect(),
        Lambda::Auto => {
            let max = entries.iter().copied().fold(0.0, f64::max);
            entries.into_iter().map(|v| v / max).collect()
        }
    };
    CostMatrix::new(k, entries)
}

/// Shuffles each class with `rng` and deals its samples round-robin into
/// `folds` buckets, continuing the deal where the previous class stopped.
fn deal(labels: &[Label], k: usize, folds: usize, rng: &mut impl rand::Rng, carry: bool) -> Vec<usize> {
    let mut by_class = vec![Vec::new(); k];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(rng);
        if !carry {
            next = 0;
        }
        for &i in members.iter() {
            assignment[i] = next;
            next = (next + 1) % folds;
        }
    }
    assignment
}

/// Fold index in `0..folds` for every sample, stratified by class.
pub fn stratified_folds(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let small: Vec<usize> = data
        .class_counts()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0 && **c < folds)
        .map(|(j, _)| j + 1)
        .collect();
    if !small.is_empty() {
        return Err(Error::ClassTooSmall {
            classes: small,
            folds,
        });
    }
    let mut rng = rng::stream(seed, rng::FOLDS);
    Ok(deal(data.labels(), data.k(), folds, &mut rng, true))
}

const HOLDOUT_BUCKETS: usize = 5;

/// Stratified split of `data` into (train, holdout) index sets with about one
/// fifth of every class held out. Each class's first shuffled sample goes to
/// the holdout, so every present class appears there.
pub fn holdout_split(data: &Dataset, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng::stream(seed, rng::HOLDOUT);
    let buckets = deal(data.labels(), data.k(), HOLDOUT_BUCKETS, &mut rng, false);
    let (holdout, fit): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|&i| buckets[i] == 0);
    (fit, holdout)
}

/// Cost matrix used for training.
#[derive(Clone, Debug, PartialEq)]
pub enum CostSource {
    Matrix(CostMatrix),
    /// Derived per training fold from the holdout confusion of a 0|1 baseline.
    AutoImbalance,
}

/// Confusion-derived cost matrix for `data`: trains a 0|1 baseline on a
/// stratified 80% split and scales the confusion of the remaining 20%.
pub fn auto_imbalance_matrix(data: &Dataset, params: &TrainParams) -> Result<CostMatrix> {
    let (fit, holdout) = holdout_split(data, params.seed);
    let baseline_cost = CostMatrix::samme(data.k())?;
    let (baseline, _) = train(&data.subset(&fit)?, &baseline_cost, params)?;
    let held = data.subset(&holdout)?;
    let predictions = baseline.predict_all(held.features())?;
    let f = confusion(&predictions, held.labels(), data.k())?;
    match imbalance_cost_matrix(&f, Lambda::Auto) {
        Err(Error::PerfectBaseline) => {
            log::warn!("baseline made no holdout errors; using 0|1 costs");
            Ok(baseline_cost)
        }
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub cost: CostSource,
    /// Matrix the out-of-fold predictions are scored with.
    pub eval_cost: CostMatrix,
    pub train: TrainParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub average_cost: f64,
    pub confusion: ConfusionMatrix,
    pub train_cost: CostMatrix,
    pub members: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean: f64,
    /// Sample standard deviation of the per-fold average costs.
    pub std: f64,
}

impl CvReport {
    pub fn costs(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.average_cost).collect()
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn cross_validate(data: &Dataset, cfg: &CvConfig) -> Result<CvReport> {
    if cfg.eval_cost.k() != data.k() {
        return Err(Error::DimensionMismatch {
            expected: data.k(),
            found: cfg.eval_cost.k(),
        });
    }
    cfg.train.validate()?;
    let assignment = stratified_folds(data, cfg.folds, cfg.train.seed)?;
    let folds = (0..cfg.folds)
        .into_par_iter()
        .map(|fold| {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..data.n()).partition(|&i| assignment[i] == fold);
            let train_set = data.subset(&train_idx)?;
            let test_set = data.subset(&test_idx)?;
            let train_cost = match &cfg.cost {
                CostSource::Matrix(c) => c.clone(),
                CostSource::AutoImbalance => auto_imbalance_matrix(&train_set, &cfg.train)?,
            };
            let (model, _) = train(&train_set, &train_cost, &cfg.train)?;
            let predictions = model.predict_all(test_set.features())?;
            Ok(FoldReport {
                fold: fold + 1,
                average_cost: average_cost(&predictions, test_set.labels(), &cfg.eval_cost)?,
                confusion: confusion(&predictions, test_set.labels(), data.k())?,
                train_cost,
                members: model.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = mean_std(&folds.iter().map(|f| f.average_cost).collect::<Vec<_>>());
    Ok(CvReport { folds, mean, std })
}

/// CSV with one row per fold plus `mean` and `std` rows for each named
/// report. Costs are multiplied by `scale`.
pub fn cv_csv(reports: &[(&str, &CvReport)], scale: f64) -> String {
    let mut out = String::from("method,fold,average_cost,members\n");
    for (name, r) in reports {
        for f in &r.folds {
            let _ = writeln!(out, "{name},{},{},{}", f.fold, f.average_cost * scale, f.members);
        }
        let _ = writeln!(out, "{name},mean,{},", r.mean * scale);
        let _ = writeln!(out, "{name},std,{},", r.std * scale);
    }
    out
}

/// Human-readable summary, one line per report.
pub fn cv_summary(reports: &[(&str, &CvReport)], scale: f64) -> String {
    let mut out = String::new();
    for (name, r) in reports {
        let _ = writeln!(
            out,
            "{name}: average cost {:.6} ± {:.6} over {} folds",
            r.mean * scale,
            r.std * scale,
            r.folds.len()
        );
    }
    out
}
