//! Cost-matrix algebra, class codes, cost-sensitive margins and losses, and
//! the decision rules built on them.
//!
//! Conventions used throughout the crate:
//!
//! * A [`CostMatrix`] entry `(i, j)` is the cost of predicting `j` when the
//!   truth is `i`. The diagonal is zero.
//! * The [`ExtendedCostMatrix`] replaces each diagonal zero with the negated
//!   row sum, so every row is a margin vector and the diagonal acts as a
//!   reward.
//! * Margins against a class code carry the `K/(K-1)` factor
//!   ([`ExtendedCostMatrix::margin_scale`]): solver exponents, losses and
//!   weight updates all use `C*(l,-)·g(x) = K/(K-1)·C*(l, G(x))`.
//! * Every argmin/argmax breaks ties towards the lowest label.

use serde::{Deserialize, Serialize};

use crate::label::Label;
use crate::{Error, Result};

/// Exponents are clamped to `±EXP_CLAMP` before exponentiation.
pub const EXP_CLAMP: f64 = 700.0;

/// Result of an exponential with a clamped exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClampedExp {
    pub value: f64,
    /// Set when the exponent was outside `±EXP_CLAMP`.
    pub saturated: bool,
}

/// `exp(x)` with `x` clamped to `[-EXP_CLAMP, EXP_CLAMP]`.
pub fn clamped_exp(x: f64) -> ClampedExp {
    if x > EXP_CLAMP {
        ClampedExp {
            value: EXP_CLAMP.exp(),
            saturated: true,
        }
    } else if x < -EXP_CLAMP {
        ClampedExp {
            value: (-EXP_CLAMP).exp(),
            saturated: true,
        }
    } else {
        ClampedExp {
            value: x.exp(),
            saturated: false,
        }
    }
}

/// Index of the smallest value, lowest index on ties. `values` must be non-empty.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// K×K misclassification costs with a zero diagonal.
///
/// Off-diagonal entries are strictly positive, so a correct decision is
/// always cheaper than any error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CostMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    /// Builds a cost matrix from row-major `entries` of length `k*k`.
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidCostMatrix(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        if entries.len() != k * k {
            return Err(Error::InvalidCostMatrix(format!(
                "expected {} entries for K={k}, got {}",
                k * k,
                entries.len()
            )));
        }
        for i in 0..k {
            for j in 0..k {
                let c = entries[i * k + j];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidCostMatrix(format!(
                        "entry ({}, {}) = {c} is not a finite nonnegative number",
                        i + 1,
                        j + 1
                    )));
                }
                if i == j && c != 0.0 {
                    return Err(Error::InvalidCostMatrix(format!(
                        "diagonal entry ({}, {}) = {c} must be 0",
                        i + 1,
                        i + 1
                    )));
                }
                if i != j && c == 0.0 {
                    return Err(Error::InvalidCostMatrix(format!(
                        "entry ({}, {}) is 0; an error must cost more than a correct decision",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { k, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidCostMatrix("matrix is not square".into()));
        }
        Self::new(k, rows.concat())
    }

    /// Cost-insensitive matrix: zero diagonal, `scale` everywhere else.
    pub fn zero_one(k: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "0|1 scale must be positive, got {scale}"
            )));
        }
        let mut entries = vec![scale; k * k];
        for i in 0..k {
            if let Some(d) = entries.get_mut(i * k + i) {
                *d = 0.0;
            }
        }
        Self::new(k, entries)
    }

    /// The 0|1 matrix scaled by `1/(K(K-1))`, under which boosting reduces to SAMME.
    pub fn samme(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidCostMatrix(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        Self::zero_one(k, 1.0 / (k * (k - 1)) as f64)
    }

    /// Detection matrix with background label 1 and `k_positive` object classes.
    ///
    /// False positives cost 1, false negatives cost `fn_weight`, and confusions
    /// between object classes cost 1.
    pub fn detection(k_positive: usize, fn_weight: f64) -> Result<Self> {
        if k_positive == 0 {
            return Err(Error::InvalidArgument(
                "need at least one positive class".into(),
            ));
        }
        if !(fn_weight > 0.0 && fn_weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "false-negative weight must be positive, got {fn_weight}"
            )));
        }
        let k = k_positive + 1;
        let mut entries = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                entries[i * k + j] = match (i, j) {
                    _ if i == j => 0.0,
                    (0, _) => 1.0,
                    (_, 0) => fn_weight,
                    _ => 1.0,
                };
            }
        }
        Self::new(k, entries)
    }

    /// Detection matrix for `k_positive` views arranged on a circle.
    ///
    /// Row/column 1 is background. `fp_weight` scales false positives,
    /// `fn_weight` false negatives and `view_weight` the view-confusion block
    /// `P(i,j) = 1 - |(2|i-j| - Kp)/Kp|`, which costs `2/Kp` for neighbouring
    /// views and 1 for opposite ones.
    pub fn circular_view(
        k_positive: usize,
        fp_weight: f64,
        fn_weight: f64,
        view_weight: f64,
    ) -> Result<Self> {
        if k_positive < 4 || k_positive % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "circular view costs need an even number of views >= 4, got {k_positive}"
            )));
        }
        for (name, w) in [
            ("false-positive", fp_weight),
            ("false-negative", fn_weight),
            ("view", view_weight),
        ] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} weight must be positive, got {w}"
                )));
            }
        }
        let k = k_positive + 1;
        let kp = k_positive as f64;
        let mut entries = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                entries[i * k + j] = match (i, j) {
                    _ if i == j => 0.0,
                    (0, _) => fp_weight,
                    (_, 0) => fn_weight,
                    _ => view_weight * circular_view_cost(i.abs_diff(j), kp),
                };
            }
        }
        Self::new(k, entries)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Entry at zero-based `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.k + col]
    }

    /// Cost of predicting `predicted` for a sample of class `truth`.
    pub fn cost(&self, truth: Label, predicted: Label) -> f64 {
        self.get(truth.index(), predicted.index())
    }

    /// Zero-based row.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.k)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `alpha * C`; decision boundaries are unchanged for any `alpha > 0`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be positive, got {alpha}"
            )));
        }
        Self::new(self.k, self.entries.iter().map(|c| c * alpha).collect())
    }

    /// Replaces each diagonal zero with the negated row sum.
    pub fn extend(&self) -> Result<ExtendedCostMatrix> {
        let k = self.k;
        let mut c_star = self.entries.clone();
        for j in 0..k {
            let sum = self.row_sum(j);
            if sum <= 0.0 {
                return Err(Error::InvalidCostMatrix(format!(
                    "row {} sums to zero; its diagonal would not be a reward",
                    j + 1
                )));
            }
            c_star[j * k + j] = -sum;
        }
        Ok(ExtendedCostMatrix { k, c_star })
    }
}

fn circular_view_cost(distance: usize, kp: f64) -> f64 {
    1.0 - ((2.0 * distance as f64 - kp) / kp).abs()
}

impl TryFrom<Vec<Vec<f64>>> for CostMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<CostMatrix> for Vec<Vec<f64>> {
    fn from(c: CostMatrix) -> Self {
        c.rows().map(<[f64]>::to_vec).collect()
    }
}

/// The cost matrix with rewards on the diagonal: `C*(j,j) = -sum_h C(j,h)`.
///
/// Rows are margin vectors. All exponents derived from this matrix include the
/// `K/(K-1)` factor that relates `C*(l,-)·y_k` to `C*(l,k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedCostMatrix {
    k: usize,
    c_star: Vec<f64>,
}

impl ExtendedCostMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    /// `K/(K-1)`.
    pub fn margin_scale(&self) -> f64 {
        self.k as f64 / (self.k - 1) as f64
    }

    /// Entry at zero-based `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.c_star[row * self.k + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.c_star[i * self.k..(i + 1) * self.k]
    }

    /// Cost-sensitive margin of predicting `predicted` for class `truth`:
    /// `C*(truth,-)·y_predicted = K/(K-1)·C*(truth, predicted)`.
    ///
    /// Negative exactly when the prediction is correct.
    pub fn cost_margin(&self, truth: Label, predicted: Label) -> Result<f64> {
        truth.check(self.k)?;
        predicted.check(self.k)?;
        Ok(self.margin_scale() * self.get(truth.index(), predicted.index()))
    }

    /// Cost-sensitive multi-class exponential loss `exp(C*(truth,-)·f)`.
    pub fn cmel(&self, truth: Label, margin: &[f64]) -> Result<ClampedExp> {
        truth.check(self.k)?;
        self.check_margin(margin)?;
        Ok(clamped_exp(dot(self.row(truth.index()), margin)))
    }

    /// Predicted costs `c = C*·f`, one per candidate label.
    pub fn costs(&self, f: &[f64]) -> Vec<f64> {
        self.c_star.chunks(self.k).map(|row| dot(row, f)).collect()
    }

    /// `argmin_k C*(k,-)·f`, lowest label on ties.
    pub fn min_cost_label(&self, f: &[f64]) -> Result<Label> {
        if f.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: f.len(),
            });
        }
        Ok(Label::from_index(argmin(&self.costs(f))))
    }

    /// `A^beta = exp(beta · K/(K-1) · C*)`, the per-(truth, prediction)
    /// multipliers that one boosting step of size `beta` applies to a weight.
    pub fn modified_cost(&self, beta: f64) -> ModifiedCost {
        let s = beta * self.margin_scale();
        ModifiedCost {
            k: self.k,
            entries: self
                .c_star
                .iter()
                .map(|&c| clamped_exp(s * c).value)
                .collect(),
        }
    }

    fn check_margin(&self, margin: &[f64]) -> Result<()> {
        if margin.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: margin.len(),
            });
        }
        let sum: f64 = margin.iter().sum();
        let size: f64 = margin.iter().map(|v| v.abs()).sum();
        if sum.abs() > 1e-9 * size.max(1.0) {
            return Err(Error::NotMarginVector { sum });
        }
        Ok(())
    }
}

/// Positive K×K matrix of per-(truth, prediction) loss multipliers, the
/// weak learner's cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ModifiedCost {
    k: usize,
    entries: Vec<f64>,
}

impl ModifiedCost {
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                found: entries.len(),
            });
        }
        if entries.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidArgument(
                "modified costs must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { k, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Entry at zero-based `(truth, predicted)`.
    pub fn get(&self, truth: usize, predicted: usize) -> f64 {
        self.entries[truth * self.k + predicted]
    }

    /// Weighted cost of labelling a node with `label` given its per-class mass.
    pub fn label_cost(&self, class_mass: &[f64], label: usize) -> f64 {
        class_mass
            .iter()
            .enumerate()
            .map(|(j, m)| m * self.get(j, label))
            .sum()
    }

    /// Cheapest label for the given per-class mass and its cost.
    pub(crate) fn best_label(&self, class_mass: &[f64]) -> (usize, f64) {
        let mut best = (0, self.label_cost(class_mass, 0));
        for label in 1..self.k {
            let cost = self.label_cost(class_mass, label);
            if cost < best.1 {
                best = (label, cost);
            }
        }
        best
    }
}

/// Class codes `y_l`: 1 at coordinate `l`, `-1/(K-1)` elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelCodeSet {
    k: usize,
}

impl LabelCodeSet {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Value of a code away from its own coordinate.
    pub fn off_value(&self) -> f64 {
        -1.0 / (self.k - 1) as f64
    }

    pub fn code(&self, label: Label) -> Vec<f64> {
        let mut y = vec![self.off_value(); self.k];
        y[label.index()] = 1.0;
        y
    }

    /// `f += beta * y_label`.
    pub fn add_scaled(&self, label: Label, beta: f64, f: &mut [f64]) {
        let off = beta * self.off_value();
        for (i, v) in f.iter_mut().enumerate() {
            *v += if i == label.index() { beta } else { off };
        }
    }
}

/// Minimum expected-cost decision `argmin_j P·C(-,j)` for a posterior `P`.
pub fn min_cost_decision(posterior: &[f64], cost: &CostMatrix) -> Result<Label> {
    let k = cost.k();
    if posterior.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: posterior.len(),
        });
    }
    if posterior.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidArgument(
            "posterior entries must be nonnegative".into(),
        ));
    }
    let sum: f64 = posterior.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { sum });
    }
    let risks: Vec<f64> = (0..k)
        .map(|j| (0..k).map(|i| posterior[i] * cost.get(i, j)).sum())
        .collect();
    Ok(Label::from_index(argmin(&risks)))
}

/// Multi-class logistic link: softmax of the scores.
pub fn posterior_from_scores(f: &[f64]) -> Vec<f64> {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = f.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
