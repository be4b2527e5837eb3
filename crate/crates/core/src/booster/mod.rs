//! Boosting: ensembles of cost-sensitive trees and the training loop.
//!
//! Each round fits a tree to the current weights, solves for its step size,
//! then multiplies every weight by `exp(beta · C*(l_n,-)·y_{G(x_n)})` and
//! renormalizes. The weights therefore always equal the normalized
//! cost-sensitive exponential loss of the ensemble built so far.

mod solver;

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::cost_model::{CostMatrix, ExtendedCostMatrix, LabelCodeSet, ModifiedCost};
use crate::data_io::{rng, Dataset, FeatureTable};
use crate::label::Label;
use crate::weak_learner::{
    evaluate_stats, fit_cost_tree, weighted_objective, CostTree, TreeParams, WeakFitStats,
    DEFAULT_MIN_NODE_WEIGHT, DEFAULT_SPLIT_GAIN_EPSILON,
};
use crate::{Error, Result};

pub use solver::{
    beta_residual, cs_adaboost_beta, piboost_beta, piboost_polynomial, piboost_root, samme_beta,
    solve_beta, Polynomial,
};

/// Largest exponent `beta · K/(K-1) · R(j)` a round without errors may apply.
pub const NO_ERRORS_EXPONENT_CAP: f64 = 50.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub beta: f64,
    pub tree: CostTree,
}

/// Additive model `f(x) = sum_m beta_m · y_{tree_m(x)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    cost: CostMatrix,
    c_star: ExtendedCostMatrix,
    codes: LabelCodeSet,
    shrinkage: f64,
    n_features: usize,
    members: Vec<Member>,
}

impl Ensemble {
    /// Ensemble with no members.
    pub fn new(cost: CostMatrix, shrinkage: f64, n_features: usize) -> Result<Self> {
        check_shrinkage(shrinkage)?;
        if n_features == 0 {
            return Err(Error::InvalidArgument("no features".into()));
        }
        Ok(Self {
            c_star: cost.extend()?,
            codes: LabelCodeSet::new(cost.k())?,
            cost,
            shrinkage,
            n_features,
            members: Vec::new(),
        })
    }

    pub fn push(&mut self, beta: f64, tree: CostTree) -> Result<()> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Model(format!("member weight must be positive, got {beta}")));
        }
        if tree.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: tree.n_features(),
            });
        }
        for label in tree.leaf_labels() {
            label.check(self.k())?;
        }
        self.members.push(Member { beta, tree });
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.cost.k()
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    pub fn c_star(&self) -> &ExtendedCostMatrix {
        &self.c_star
    }

    pub fn codes(&self) -> &LabelCodeSet {
        &self.codes
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `sum_m beta_m · y_{tree_m(x)}`.
    pub fn margin_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut f = vec![0.0; self.k()];
        for m in &self.members {
            self.codes.add_scaled(m.tree.predict(x), m.beta, &mut f);
        }
        Ok(f)
    }

    /// Label with the smallest predicted cost `C*(k,-)·f(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.c_star.min_cost_label(&self.margin_vector(x)?)
    }

    pub fn predict_all(&self, features: &FeatureTable) -> Result<Vec<Label>> {
        if features.d() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: features.d(),
            });
        }
        (0..features.n())
            .into_par_iter()
            .map(|i| self.predict(features.row(i)))
            .collect()
    }
}

fn check_shrinkage(shrinkage: f64) -> Result<()> {
    if !(shrinkage > 0.0 && shrinkage <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage must be in (0, 1], got {shrinkage}"
        )));
    }
    Ok(())
}

/// What to do after a round whose tree makes no weighted errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoErrorsPolicy {
    /// Keep the round with a capped step and stop.
    #[default]
    Stop,
    /// Keep the round with a capped step and keep boosting.
    Continue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainParams {
    pub rounds: usize,
    pub depth_limit: usize,
    pub shrinkage: f64,
    pub feature_fraction: f64,
    pub seed: u64,
    pub no_errors: NoErrorsPolicy,
    pub min_node_weight: f64,
    pub split_gain_epsilon: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            depth_limit: 4,
            shrinkage: 1.0,
            feature_fraction: 1.0,
            seed: 0,
            no_errors: NoErrorsPolicy::Stop,
            min_node_weight: DEFAULT_MIN_NODE_WEIGHT,
            split_gain_epsilon: DEFAULT_SPLIT_GAIN_EPSILON,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidArgument("rounds must be at least 1".into()));
        }
        check_shrinkage(self.shrinkage)?;
        self.tree_params(0).validate()
    }

    fn tree_params(&self, seed: u64) -> TreeParams {
        TreeParams {
            depth_limit: self.depth_limit,
            feature_fraction: self.feature_fraction,
            min_node_weight: self.min_node_weight,
            split_gain_epsilon: self.split_gain_epsilon,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Stored step, after shrinkage.
    pub beta: f64,
    /// Weighted modified-cost objective the tree was fitted to.
    pub objective: f64,
    /// Mean cost-sensitive exponential loss after the round.
    pub cmel: f64,
    /// Mean training cost `C(l_n, H(x_n))` after the round.
    pub train_cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    /// The tree of this round made no weighted errors.
    NoErrors { round: usize },
    /// The tree of this round could not lower the loss; it was discarded.
    TooWeak { round: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub records: Vec<RoundRecord>,
    pub stop: StopReason,
}

impl TrainReport {
    pub fn betas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.beta).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,beta,objective,cmel,train_cost\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.round, r.beta, r.objective, r.cmel, r.train_cost
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Snapshot handed to a training observer after each kept round.
pub struct RoundState<'a> {
    pub round: usize,
    pub ensemble: &'a Ensemble,
    /// Normalized sample weights after the round's update.
    pub weights: &'a [f64],
    /// Weighted successes and errors of the round's tree, before the update.
    pub stats: &'a WeakFitStats,
}

pub fn train(data: &Dataset, cost: &CostMatrix, params: &TrainParams) -> Result<(Ensemble, TrainReport)> {
    train_observed(data, cost, params, |_| {})
}

pub fn train_observed(
    data: &Dataset,
    cost: &CostMatrix,
    params: &TrainParams,
    mut observer: impl FnMut(&RoundState),
) -> Result<(Ensemble, TrainReport)> {
    params.validate()?;
    if cost.k() != data.k() {
        return Err(Error::DimensionMismatch {
            expected: data.k(),
            found: cost.k(),
        });
    }
    let n = data.n();
    let k = data.k();
    let mut ensemble = Ensemble::new(cost.clone(), params.shrinkage, data.d())?;
    let c_star = ensemble.c_star().clone();
    let a = c_star.margin_scale();

    // Trees are fitted with the costs rescaled to a unit maximum, which keeps
    // every fitted tree unchanged when the whole matrix is scaled.
    let fit_cost = c_star.modified_cost(1.0 / cost.max_entry());
    let linear_cost = linear_fit_cost(cost)?;
    let max_row = (0..k).map(|j| cost.row_sum(j)).fold(0.0, f64::max);
    let no_errors_beta = NO_ERRORS_EXPONENT_CAP / (a * max_row);

    // log_w[n] = C*(l_n,-)·f(x_n); margins[n] = f(x_n).
    let mut log_w = vec![0.0; n];
    let mut margins = vec![0.0; n * k];
    let mut weights = vec![1.0 / n as f64; n];
    let mut records = Vec::new();
    let mut stop = StopReason::Completed;

    for m in 0..params.rounds {
        let round = m + 1;
        let tree_seed: u64 = rng::stream(params.seed, rng::FEATURES + m as u64).random();
        let tree_params = params.tree_params(tree_seed);
        let mut tree = fit_cost_tree(data, &weights, &fit_cost, &tree_params)?;
        let mut stats = evaluate_stats(&tree, data, &weights)?;
        let mut solved = solve_beta(&stats, cost);
        if matches!(solved, Err(Error::TooWeak)) {
            log::info!("round {round}: weak learner too weak, refitting with linear costs");
            tree = fit_cost_tree(data, &weights, &linear_cost, &tree_params)?;
            stats = evaluate_stats(&tree, data, &weights)?;
            solved = solve_beta(&stats, cost);
        }
        let objective = weighted_objective(&tree, data, &weights, &fit_cost);

        let (beta, no_errors) = match solved {
            Ok(beta) => (beta, false),
            Err(Error::NoErrors) => (no_errors_beta, true),
            Err(Error::TooWeak) => {
                log::info!("round {round}: weak learner cannot lower the loss, stopping");
                stop = StopReason::TooWeak { round };
                break;
            }
            Err(e) => return Err(e),
        };
        let beta = beta * params.shrinkage;

        let codes = *ensemble.codes();
        for i in 0..n {
            let truth = data.label(i).index();
            let predicted = tree.predict(data.row(i));
            log_w[i] += beta * a * c_star.get(truth, predicted.index());
            codes.add_scaled(predicted, beta, &mut margins[i * k..(i + 1) * k]);
        }
        ensemble.push(beta, tree)?;
        normalize_exp(&log_w, &mut weights);

        let cmel = log_w.iter().map(|v| v.exp()).sum::<f64>() / n as f64;
        let train_cost = (0..n)
            .map(|i| {
                let h = argmin_cost(&c_star, &margins[i * k..(i + 1) * k]);
                cost.get(data.label(i).index(), h)
            })
            .sum::<f64>()
            / n as f64;
        log::debug!("round {round}: beta {beta}, cmel {cmel}, train cost {train_cost}");
        records.push(RoundRecord {
            round,
            beta,
            objective,
            cmel,
            train_cost,
        });
        observer(&RoundState {
            round,
            ensemble: &ensemble,
            weights: &weights,
            stats: &stats,
        });

        if no_errors {
            log::info!("round {round}: no weighted errors");
            if params.no_errors == NoErrorsPolicy::Stop {
                stop = StopReason::NoErrors { round };
                break;
            }
        }
    }

    if ensemble.is_empty() {
        log::warn!("training produced no members");
    }
    Ok((ensemble, TrainReport { records, stop }))
}

/// Costs of the loss slope at a zero step: `C(j,k) + R_j` off the diagonal
/// and 0 on it, scaled to a unit maximum. A tree fitted with these always
/// does at least as well as the best constant prediction, which cannot
/// increase the loss.
fn linear_fit_cost(cost: &CostMatrix) -> Result<ModifiedCost> {
    let k = cost.k();
    let mut entries = vec![0.0; k * k];
    for j in 0..k {
        let r = cost.row_sum(j);
        for i in (0..k).filter(|&i| i != j) {
            entries[j * k + i] = cost.get(j, i) + r;
        }
    }
    let max = entries.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        entries.iter_mut().for_each(|v| *v /= max);
    }
    ModifiedCost::new(k, entries)
}

fn argmin_cost(c_star: &ExtendedCostMatrix, f: &[f64]) -> usize {
    crate::cost_model::argmin(&c_star.costs(f))
}

/// `out = exp(v) / sum(exp(v))`, computed stably.
fn normalize_exp(v: &[f64], out: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, x) in out.iter_mut().zip(v) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}
