//! Step-size solvers.
//!
//! Exponents carry the `K/(K-1)` factor of the cost-sensitive margin, so
//! `A(j,k) = exp(K/(K-1) · C*(j,k))` and a round of size `beta` multiplies the
//! weight of a `(truth j, prediction k)` sample by `A(j,k)^beta`.

use std::collections::BTreeMap;

use crate::cost_model::CostMatrix;
use crate::weak_learner::WeakFitStats;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 200;

/// One exponential term `coef · exp(rate · beta)` of a balance equation.
#[derive(Clone, Copy, Debug)]
struct Term {
    coef: f64,
    rate: f64,
}

/// `sum_i coef_i · exp(rate_i · beta)` with all coefficients nonnegative,
/// split into increasing (positive rate) and decreasing (negative rate) parts.
#[derive(Clone, Debug)]
struct Balance {
    rising: Vec<Term>,
    falling: Vec<Term>,
}

impl Balance {
    /// Residual `rising - falling`, its derivative and the magnitude scale.
    fn eval(&self, beta: f64) -> (f64, f64, f64) {
        let mut up = 0.0;
        let mut down = 0.0;
        let mut slope = 0.0;
        for t in &self.rising {
            let v = t.coef * (t.rate * beta).exp();
            up += v;
            slope += v * t.rate;
        }
        for t in &self.falling {
            let v = t.coef * (t.rate * beta).exp();
            down += v;
            slope -= v * t.rate;
        }
        (up - down, slope, up + down)
    }

    fn residual(&self, beta: f64) -> f64 {
        self.eval(beta).0
    }

    /// Positive root of an increasing residual.
    fn solve(&self) -> Result<f64> {
        if self.rising.iter().all(|t| t.coef == 0.0) {
            return Err(Error::NoErrors);
        }
        if self.residual(0.0) >= 0.0 {
            return Err(Error::TooWeak);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.residual(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Model("step size bracket diverged".into()));
            }
        }

        let mut beta = 0.5 * (lo + hi);
        for _ in 0..MAX_ITERATIONS {
            let (r, dr, scale) = self.eval(beta);
            if r == 0.0 || r.abs() <= 1e-15 * scale {
                return Ok(beta);
            }
            if r < 0.0 {
                lo = beta;
            } else {
                hi = beta;
            }
            if hi - lo <= 2.0 * f64::EPSILON * hi {
                break;
            }
            let newton = beta - r / dr;
            beta = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(beta)
    }
}

fn check_nonnegative(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument(
            "inputs must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

fn cost_balance(stats: &WeakFitStats, c: &CostMatrix) -> Result<Balance> {
    let k = c.k();
    if stats.k() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: stats.k(),
        });
    }
    let a = k as f64 / (k - 1) as f64;
    let mut rising = Vec::new();
    let mut falling = Vec::new();
    for j in 0..k {
        let r = c.row_sum(j);
        falling.push(Term {
            coef: stats.success(j) * r,
            rate: -a * r,
        });
        for h in 0..k {
            if h != j {
                rising.push(Term {
                    coef: stats.error(j, h) * c.get(j, h),
                    rate: a * c.get(j, h),
                });
            }
        }
    }
    Ok(Balance { rising, falling })
}

/// Residual of the step-size balance at `beta`:
/// `sum_{j,k!=j} E(j,k)·C(j,k)·A(j,k)^beta - sum_j S(j)·R(j)·A(j,j)^beta`,
/// with `R(j)` the row sum of `C`. Increasing in `beta`.
pub fn beta_residual(stats: &WeakFitStats, c: &CostMatrix, beta: f64) -> Result<f64> {
    Ok(cost_balance(stats, c)?.residual(beta))
}

/// Optimal step size of a round with the given weighted successes and errors.
pub fn solve_beta(stats: &WeakFitStats, c: &CostMatrix) -> Result<f64> {
    cost_balance(stats, c)?.solve()
}

/// SAMME step `((K-1)^2/K) · (ln((1-E)/E) + ln(K-1))` for total weighted error `E`.
pub fn samme_beta(total_error: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 classes, got {k}"
        )));
    }
    let chance = (k - 1) as f64 / k as f64;
    if !(total_error > 0.0 && total_error <= chance) {
        return Err(Error::InvalidArgument(format!(
            "weighted error must lie in (0, {chance}], got {total_error}"
        )));
    }
    if total_error == chance {
        return Ok(0.0);
    }
    let km1 = (k - 1) as f64;
    Ok(km1 * km1 / k as f64
        * (((1.0 - total_error) / total_error).ln() + km1.ln()))
}

/// Two-class step: the positive root of
/// `2·c1·b·cosh(beta·c1) + 2·c2·d·cosh(beta·c2) = t1·c1·e^(-beta·c1) + t2·c2·e^(-beta·c2)`.
///
/// `b` and `d` are the weighted errors on classes 1 and 2, `t1` and `t2` the
/// total weights of those classes.
pub fn cs_adaboost_beta(c1: f64, c2: f64, b: f64, d: f64, t1: f64, t2: f64) -> Result<f64> {
    check_nonnegative(&[c1, c2, b, d, t1, t2])?;
    if c1 == 0.0 || c2 == 0.0 {
        return Err(Error::InvalidArgument("costs must be positive".into()));
    }
    if b > t1 || d > t2 {
        return Err(Error::InvalidArgument(
            "class errors cannot exceed class weights".into(),
        ));
    }
    // 2·c·e·cosh(beta·c) - t·c·e^(-beta·c) = c·e·e^(beta·c) - (t - e)·c·e^(-beta·c)
    Balance {
        rising: vec![
            Term { coef: c1 * b, rate: c1 },
            Term { coef: c2 * d, rate: c2 },
        ],
        falling: vec![
            Term { coef: c1 * (t1 - b), rate: -c1 },
            Term { coef: c2 * (t2 - d), rate: -c2 },
        ],
    }
    .solve()
}

/// Polynomial with integer exponents, stored sparse by degree.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    terms: BTreeMap<u32, f64>,
}

impl Polynomial {
    /// `(degree, coefficient)` pairs with nonzero coefficients, by ascending degree.
    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.terms.iter().map(|(d, c)| (*d, *c))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|(d, c)| c * x.powi(*d as i32)).sum()
    }

    /// `sum_i |c_i| · x^(d_i)`, the natural size of `eval(x)`.
    pub fn scale(&self, x: f64) -> f64 {
        self.terms.iter().map(|(d, c)| c.abs() * x.powi(*d as i32)).sum()
    }

    pub fn sign_changes(&self) -> usize {
        let signs: Vec<bool> = self.terms.values().map(|c| *c > 0.0).collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

fn check_piboost(s: usize, k: usize, e1: f64, e2: f64, a1: f64, a2: f64) -> Result<()> {
    if s == 0 || s >= k {
        return Err(Error::InvalidArgument(format!(
            "group size must satisfy 1 <= s < K, got s = {s}, K = {k}"
        )));
    }
    check_nonnegative(&[e1, e2, a1, a2])?;
    if e1 > a1 || e2 > a2 {
        return Err(Error::InvalidArgument(
            "group errors cannot exceed group weights".into(),
        ));
    }
    if ((a1 + a2) - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { sum: a1 + a2 });
    }
    Ok(())
}

/// `E1(K-s)x^(2(K-s)) + E2·s·x^K - s(A2-E2)x^(K-2s) - (K-s)(A1-E1)`, multiplied
/// by `x^(2s-K)` when `K < 2s` so that every exponent is nonnegative.
pub fn piboost_polynomial(
    s: usize,
    k: usize,
    e1: f64,
    e2: f64,
    a1: f64,
    a2: f64,
) -> Result<Polynomial> {
    check_piboost(s, k, e1, e2, a1, a2)?;
    let (s_i, k_i) = (s as i64, k as i64);
    let shift = (2 * s_i - k_i).max(0);
    let (sf, kf) = (s as f64, k as f64);
    let raw = [
        (2 * (k_i - s_i), e1 * (kf - sf)),
        (k_i, e2 * sf),
        (k_i - 2 * s_i, -sf * (a2 - e2)),
        (0, -(kf - sf) * (a1 - e1)),
    ];
    let mut terms = BTreeMap::new();
    for (degree, coef) in raw {
        *terms.entry((degree + shift) as u32).or_insert(0.0) += coef;
    }
    terms.retain(|_, c| *c != 0.0);
    Ok(Polynomial { terms })
}

/// Unique root `R > 1` of [`piboost_polynomial`].
pub fn piboost_root(s: usize, k: usize, e1: f64, e2: f64, a1: f64, a2: f64) -> Result<f64> {
    let p = piboost_polynomial(s, k, e1, e2, a1, a2)?;
    if e1 == 0.0 && e2 == 0.0 {
        return Err(Error::NoErrors);
    }
    if p.eval(1.0) >= 0.0 {
        return Err(Error::TooWeak);
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while p.eval(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Model("polynomial root bracket diverged".into()));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = p.eval(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if p.eval(lo).abs() <= p.eval(hi).abs() { lo } else { hi })
}

/// PIBoost step `s(K-s)(K-1) · ln R` for a weak learner separating a group of
/// `s` classes from the other `K - s`. `e1`/`a1` are the error and total
/// weight of the group, `e2`/`a2` those of its complement.
pub fn piboost_beta(s: usize, k: usize, e1: f64, e2: f64, a1: f64, a2: f64) -> Result<f64> {
    let r = piboost_root(s, k, e1, e2, a1, a2)?;
    Ok((s * (k - s) * (k - 1)) as f64 * r.ln())
}
