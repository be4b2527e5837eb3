//! Detection scores and early-exit evaluation.
//!
//! One label is the background (negative) class. A sample's detection score
//! is `c_bg - min_{k != bg} c_k` with predicted costs `c = C*·f(x)`, so it is
//! positive exactly when some foreground class is cheaper than background.
//! Evaluating the members one at a time gives a trace of partial scores;
//! calibrated thresholds on that trace let evaluation stop early and return
//! background once a sample falls too far behind every training positive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::booster::Ensemble;
use crate::cost_model::ExtendedCostMatrix;
use crate::data_io::Dataset;
use crate::label::Label;
use crate::{Error, Result};

pub const DEFAULT_BACKGROUND: Label = Label::from_index(0);

/// `c_bg - min_{k != bg} c_k` for `c = C*·f`.
pub fn score_from_margin(c_star: &ExtendedCostMatrix, f: &[f64], background: Label) -> f64 {
    let c = c_star.costs(f);
    let bg = background.index();
    let best_other = c
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != bg)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    c[bg] - best_other
}

pub fn detection_score(e: &Ensemble, x: &[f64], background: Label) -> Result<f64> {
    background.check(e.k())?;
    Ok(score_from_margin(e.c_star(), &e.margin_vector(x)?, background))
}

/// Partial detection scores `s_1(x)..s_M(x)` after each member.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTrace {
    pub scores: Vec<f64>,
}

impl ScoreTrace {
    pub fn final_score(&self) -> Option<f64> {
        self.scores.last().copied()
    }
}

pub fn score_trace(e: &Ensemble, x: &[f64], background: Label) -> Result<ScoreTrace> {
    background.check(e.k())?;
    e.check_dim(x)?;
    let mut f = vec![0.0; e.k()];
    let scores = e
        .members()
        .iter()
        .map(|m| {
            e.codes().add_scaled(m.tree.predict(x), m.beta, &mut f);
            score_from_margin(e.c_star(), &f, background)
        })
        .collect();
    Ok(ScoreTrace { scores })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// One threshold per member.
    PerStage,
    /// One threshold shared by every member.
    Single,
}

/// Rejection thresholds for [`predict_pruned`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeThresholds {
    mode: CalibrationMode,
    background: Label,
    values: Vec<f64>,
}

impl CascadeThresholds {
    /// `values` holds one entry per member in per-stage mode, one entry in single mode.
    pub fn new(mode: CalibrationMode, background: Label, values: Vec<f64>) -> Result<Self> {
        let t = Self {
            mode,
            background,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Model("no cascade thresholds".into()));
        }
        if self.mode == CalibrationMode::Single && self.values.len() != 1 {
            return Err(Error::Model("single-threshold cascade needs exactly one value".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("cascade thresholds must be finite".into()));
        }
        Ok(())
    }

    /// Checks that these thresholds fit `e`.
    pub fn check(&self, e: &Ensemble) -> Result<()> {
        self.validate()?;
        self.background.check(e.k())?;
        if self.mode == CalibrationMode::PerStage && self.values.len() != e.len() {
            return Err(Error::DimensionMismatch {
                expected: e.len(),
                found: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn mode(&self) -> CalibrationMode {
        self.mode
    }

    pub fn background(&self) -> Label {
        self.background
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Threshold applied after member `m` (zero-based).
    pub fn at(&self, m: usize) -> f64 {
        match self.mode {
            CalibrationMode::PerStage => self.values[m],
            CalibrationMode::Single => self.values[0],
        }
    }

    /// Same thresholds with `values` replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.mode, self.background, values)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub thresholds: CascadeThresholds,
    pub retained: usize,
    /// Samples skipped for having the background label or a non-positive final score.
    pub excluded: usize,
}

/// Sets thresholds from the score traces of `positives` so that none of the
/// retained positives is ever rejected early.
pub fn calibrate(
    e: &Ensemble,
    positives: &Dataset,
    mode: CalibrationMode,
    background: Label,
) -> Result<Calibration> {
    background.check(e.k())?;
    if e.is_empty() {
        return Err(Error::Model("cannot calibrate a model with no members".into()));
    }
    if positives.d() != e.n_features() {
        return Err(Error::DimensionMismatch {
            expected: e.n_features(),
            found: positives.d(),
        });
    }
    let traces: Vec<Option<ScoreTrace>> = (0..positives.n())
        .into_par_iter()
        .map(|i| -> Result<Option<ScoreTrace>> {
            if positives.label(i) == background {
                return Ok(None);
            }
            let t = score_trace(e, positives.row(i), background)?;
            Ok(t.final_score().is_some_and(|s| s > 0.0).then_some(t))
        })
        .collect::<Result<_>>()?;
    let retained: Vec<&ScoreTrace> = traces.iter().flatten().collect();
    let excluded = traces.len() - retained.len();
    if retained.is_empty() {
        return Err(Error::NoCalibrationPositives { excluded });
    }
    if excluded > 0 {
        log::warn!("{excluded} calibration samples excluded");
    }

    let mut stage_min = vec![f64::INFINITY; e.len()];
    for t in &retained {
        for (m, s) in t.scores.iter().enumerate() {
            stage_min[m] = stage_min[m].min(*s);
        }
    }
    let values = match mode {
        CalibrationMode::PerStage => stage_min,
        CalibrationMode::Single => vec![stage_min.iter().copied().fold(f64::INFINITY, f64::min)],
    };
    Ok(Calibration {
        thresholds: CascadeThresholds::new(mode, background, values)?,
        retained: retained.len(),
        excluded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrunedPrediction {
    pub label: Label,
    /// Detection score of the partial ensemble where evaluation stopped.
    pub score: f64,
    pub members_evaluated: usize,
}

/// Evaluates members in order, returning background as soon as the partial
/// score drops below its threshold.
pub fn predict_pruned(e: &Ensemble, t: &CascadeThresholds, x: &[f64]) -> Result<PrunedPrediction> {
    t.check(e)?;
    e.check_dim(x)?;
    let background = t.background();
    let mut f = vec![0.0; e.k()];
    let mut score = score_from_margin(e.c_star(), &f, background);
    for (m, member) in e.members().iter().enumerate() {
        e.codes().add_scaled(member.tree.predict(x), member.beta, &mut f);
        score = score_from_margin(e.c_star(), &f, background);
        if score < t.at(m) {
            return Ok(PrunedPrediction {
                label: background,
                score,
                members_evaluated: m + 1,
            });
        }
    }
    Ok(PrunedPrediction {
        label: e.c_star().min_cost_label(&f)?,
        score,
        members_evaluated: e.len(),
    })
}
