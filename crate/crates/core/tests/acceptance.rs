//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use badacost::booster::{
    cs_adaboost_beta, piboost_polynomial, piboost_root, samme_beta, solve_beta, train,
    train_observed, TrainParams,
};
use badacost::cascade::{calibrate, predict_pruned, CalibrationMode, DEFAULT_BACKGROUND};
use badacost::data_io::{load_model, model_to_string, save_model};
use badacost::eval::{cross_validate, CostSource, CvConfig};
use badacost::weak_learner::WeakFitStats;
use badacost::{CostMatrix, Dataset, Ensemble, Error, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn report(id: &str, title: &str, limit: Duration, elapsed: Duration, result: Result<Outcome, String>) -> bool {
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(panic) => (false, format!("panicked: {panic}")),
    };
    let in_time = elapsed <= limit;
    let ok = pass && in_time;
    println!(
        "[{}] {id} {title}: {detail}; {:.2}s (limit {}s){}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { " TIME EXCEEDED" }
    );
    ok
}

fn timed<T>(f: impl FnOnce() -> T) -> (Result<T, String>, Duration) {
    let start = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f)).map_err(|e| {
        e.downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "unknown panic".into())
    });
    (r, start.elapsed())
}

/// Random weighted success/error profile normalized to total mass 1, with
/// total error drawn uniformly from `[lo, hi]`.
fn random_profile(rng: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64) -> (WeakFitStats, f64) {
    let e_total = rng.random_range(lo..hi);
    let mut error = vec![0.0; k * k];
    for j in 0..k {
        for h in 0..k {
            if j != h {
                error[j * k + h] = rng.random_range(0.01..1.0);
            }
        }
    }
    let esum: f64 = error.iter().sum();
    error.iter_mut().for_each(|v| *v *= e_total / esum);
    let mut success: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let ssum: f64 = success.iter().sum();
    success.iter_mut().for_each(|v| *v *= (1.0 - e_total) / ssum);
    let e_total = error.iter().sum();
    (WeakFitStats::new(k, success, error).unwrap(), e_total)
}

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for k in [2usize, 3, 5, 10] {
        let c = CostMatrix::samme(k).unwrap();
        let chance = (k - 1) as f64 / k as f64;
        for _ in 0..50 {
            let (stats, e) = random_profile(&mut rng, k, 0.01, chance - 0.01);
            let beta = solve_beta(&stats, &c).unwrap();
            let km1 = (k - 1) as f64;
            let closed = km1 * km1 / k as f64 * (((1.0 - e) / e).ln() + km1.ln());
            worst = worst.max((beta - closed).abs()).max((beta - samme_beta(e, k).unwrap()).abs());
            count += 1;
        }
    }
    outcome(worst < 1e-8, format!("{count} profiles, max |diff| {worst:.2e} (tol 1e-8)"))
}

/// Root of the two-class cosh balance by plain bisection.
fn cosh_root(c1: f64, c2: f64, b: f64, d: f64, t1: f64, t2: f64) -> f64 {
    let g = |x: f64| {
        2.0 * c1 * b * (x * c1).cosh() + 2.0 * c2 * d * (x * c2).cosh()
            - t1 * c1 * (-x * c1).exp()
            - t2 * c2 * (-x * c2).exp()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn ac2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 100 {
        let c1 = rng.random_range(0.05..3.0);
        let c2 = rng.random_range(0.05..3.0);
        let t1 = rng.random_range(0.05..0.95);
        let t2 = 1.0 - t1;
        let b = rng.random_range(0.0..0.5) * t1;
        let d = rng.random_range(0.0..0.5) * t2;
        let stats = WeakFitStats::new(2, vec![t1 - b, t2 - d], vec![0.0, b, d, 0.0]).unwrap();
        let c = CostMatrix::from_rows(&[vec![0.0, c1], vec![c2, 0.0]]).unwrap();
        let ours = solve_beta(&stats, &c);
        let theirs = cs_adaboost_beta(2.0 * c1, 2.0 * c2, b, d, t1, t2);
        match (ours, theirs) {
            (Ok(x), Ok(y)) => {
                let oracle = cosh_root(2.0 * c1, 2.0 * c2, b, d, t1, t2);
                worst = worst.max((x - y).abs()).max((x - oracle).abs());
                count += 1;
            }
            (Err(Error::TooWeak), Err(Error::TooWeak)) => {}
            (x, y) => return outcome(false, format!("solver disagreement: {x:?} vs {y:?}")),
        }
    }
    outcome(worst < 1e-8, format!("{count} draws, max |diff| {worst:.2e} (tol 1e-8)"))
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut too_weak = 0;
    while count < 200 {
        let k = rng.random_range(2..=12usize);
        let s = rng.random_range(1..k);
        let a1 = rng.random_range(0.02..0.98);
        let a2 = 1.0 - a1;
        let e1 = rng.random_range(0.0..1.0) * a1;
        let e2 = rng.random_range(0.0..1.0) * a2;
        let (kf, sf) = (k as f64, s as f64);
        // Coefficients as (exponent, value) before any shift.
        let terms = [
            (2 * (k as i32 - s as i32), e1 * (kf - sf)),
            (k as i32, e2 * sf),
            (k as i32 - 2 * s as i32, -sf * (a2 - e2)),
            (0, -(kf - sf) * (a1 - e1)),
        ];
        let p = |x: f64| terms.iter().map(|(d, c)| c * x.powi(*d)).sum::<f64>();
        let lib_poly = piboost_polynomial(s, k, e1, e2, a1, a2).unwrap();
        if lib_poly.sign_changes() != 1 {
            return outcome(false, format!("coefficient signs change {} times", lib_poly.sign_changes()));
        }
        let mut sorted: Vec<(i32, f64)> = terms.iter().copied().filter(|t| t.1 != 0.0).collect();
        sorted.sort_by_key(|t| t.0);
        let mut merged: Vec<(i32, f64)> = Vec::new();
        for (d, c) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == d => last.1 += c,
                _ => merged.push((d, c)),
            }
        }
        let changes = merged.windows(2).filter(|w| (w[0].1 > 0.0) != (w[1].1 > 0.0)).count();
        if changes != 1 {
            return outcome(false, format!("oracle coefficient signs change {changes} times"));
        }
        match piboost_root(s, k, e1, e2, a1, a2) {
            Ok(r) => {
                let scale: f64 = terms.iter().map(|(d, c)| c.abs() * r.powi(*d)).sum();
                worst = worst.max(p(r).abs() / scale);
                count += 1;
            }
            Err(Error::TooWeak) => {
                if p(1.0) < 0.0 {
                    return outcome(false, "TooWeak reported with P(1) < 0");
                }
                too_weak += 1;
            }
            Err(e) => return outcome(false, format!("unexpected error {e}")),
        }
    }
    outcome(
        worst < 1e-10,
        format!("{count} roots ({too_weak} too-weak draws skipped), one sign change each, max |P(R)|/scale {worst:.2e} (tol 1e-10)"),
    )
}

fn gaussian_mixture(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let means = [[0.0, 0.0], [1.5, 0.5], [0.3, 1.8]];
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..3usize);
        rows.push(vec![
            means[c][0] + noise.sample(&mut rng),
            means[c][1] + noise.sample(&mut rng),
            noise.sample(&mut rng),
        ]);
        labels.push(c + 1);
    }
    Dataset::from_rows(&rows, &labels, 3).unwrap()
}

fn asymmetric_cost() -> CostMatrix {
    CostMatrix::from_rows(&[
        vec![0.0, 1.0, 4.0],
        vec![2.0, 0.0, 1.0],
        vec![0.5, 3.0, 0.0],
    ])
    .unwrap()
}

fn descent_params() -> TrainParams {
    TrainParams {
        rounds: 100,
        depth_limit: 3,
        shrinkage: 1.0,
        seed: 7,
        ..TrainParams::default()
    }
}

struct DescentRun {
    ensemble: Ensemble,
    betas: Vec<f64>,
    cmel: Vec<f64>,
    weight_errors: Vec<(usize, f64)>,
    stop: String,
}

fn descent_run() -> DescentRun {
    let data = gaussian_mixture(404, 2000);
    let c = asymmetric_cost();
    let ext = c.extend().unwrap();
    let mut weight_errors = Vec::new();
    let (ensemble, report) = train_observed(&data, &c, &descent_params(), |state| {
        if [1, 10, 50].contains(&state.round) {
            // exp(C*(l_n,-)·f_m(x_n)) from scratch, then normalized.
            let raw: Vec<f64> = (0..data.n())
                .map(|i| {
                    let f = state.ensemble.margin_vector(data.row(i)).unwrap();
                    let row = ext.row(data.label(i).index());
                    row.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>().exp()
                })
                .collect();
            let total: f64 = raw.iter().sum();
            let worst = state
                .weights
                .iter()
                .zip(&raw)
                .map(|(w, r)| (w - r / total).abs() / (r / total))
                .fold(0.0, f64::max);
            weight_errors.push((state.round, worst));
        }
    })
    .unwrap();
    DescentRun {
        ensemble,
        betas: report.betas(),
        cmel: report.records.iter().map(|r| r.cmel).collect(),
        weight_errors,
        stop: format!("{:?}", report.stop),
    }
}

fn ac4(run: &DescentRun) -> Outcome {
    let mut prev = 1.0;
    let mut worst_increase = f64::NEG_INFINITY;
    for &v in &run.cmel {
        worst_increase = worst_increase.max(v - prev);
        prev = v;
    }
    outcome(
        run.cmel.len() == 100 && worst_increase <= 1e-12,
        format!(
            "{} rounds (stop {}), CMEL {:.4} -> {:.4}, largest per-round change {worst_increase:.2e} (tol +1e-12)",
            run.cmel.len(),
            run.stop,
            run.cmel.first().copied().unwrap_or(f64::NAN),
            prev
        ),
    )
}

fn ac5(run: &DescentRun) -> Outcome {
    let rounds: Vec<usize> = run.weight_errors.iter().map(|r| r.0).collect();
    let worst = run.weight_errors.iter().map(|r| r.1).fold(0.0, f64::max);
    outcome(
        rounds == [1, 10, 50] && worst < 1e-10,
        format!("rounds {rounds:?}, max relative weight error {worst:.2e} (tol 1e-10)"),
    )
}

fn ac6(run: &DescentRun) -> Outcome {
    let data = gaussian_mixture(404, 2000);
    let test = gaussian_mixture(405, 2000);
    let scaled = asymmetric_cost().scaled(5.0).unwrap();
    let (e5, report5) = train(&data, &scaled, &descent_params()).unwrap();
    if report5.records.len() != run.betas.len() {
        return outcome(false, "different number of rounds");
    }
    let worst_beta = run
        .betas
        .iter()
        .zip(report5.betas())
        .map(|(b1, b5)| (b5 - b1 / 5.0).abs() / (b1 / 5.0))
        .fold(0.0, f64::max);
    let same_trees = run
        .ensemble
        .members()
        .iter()
        .zip(e5.members())
        .all(|(a, b)| a.tree == b.tree);
    let p1 = run.ensemble.predict_all(test.features()).unwrap();
    let p5 = e5.predict_all(test.features()).unwrap();
    let differ = p1.iter().zip(&p5).filter(|(a, b)| a != b).count();
    outcome(
        same_trees && differ == 0 && worst_beta < 1e-9,
        format!(
            "trees identical: {same_trees}, {differ} of {} test predictions differ, max relative beta error {worst_beta:.2e} (tol 1e-9)",
            p1.len()
        ),
    )
}

const TOY_POSTERIORS: [[f64; 3]; 8] = [
    [0.8, 0.1, 0.1],
    [0.6, 0.3, 0.1],
    [0.1, 0.8, 0.1],
    [0.2, 0.6, 0.2],
    [0.1, 0.1, 0.8],
    [0.2, 0.2, 0.6],
    [0.5, 0.3, 0.2],
    [0.3, 0.5, 0.2],
];

fn ac7() -> Outcome {
    let c = CostMatrix::detection(2, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let n = 20_000;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let cell = rng.random_range(0..8usize);
        let u: f64 = rng.random();
        let p = TOY_POSTERIORS[cell];
        let label = if u < p[0] { 1 } else if u < p[0] + p[1] { 2 } else { 3 };
        rows.push(vec![cell as f64]);
        labels.push(label);
    }
    let data = Dataset::from_rows(&rows, &labels, 3).unwrap();
    let params = TrainParams {
        rounds: 200,
        depth_limit: 3,
        seed: 7,
        ..TrainParams::default()
    };
    let (e, report) = train(&data, &c, &params).unwrap();
    let mut agree = 0.0;
    let mut disagreements = Vec::new();
    for (cell, p) in TOY_POSTERIORS.iter().enumerate() {
        let risks: Vec<f64> = (0..3)
            .map(|j| (0..3).map(|i| p[i] * c.get(i, j)).sum())
            .collect();
        let bayes = (0..3).fold(0, |b, j| if risks[j] < risks[b] { j } else { b });
        let ours = e.predict(&[cell as f64]).unwrap().index();
        if ours == bayes {
            agree += 1.0 / 8.0;
        } else {
            disagreements.push(cell);
        }
    }
    outcome(
        agree >= 0.95,
        format!(
            "{} members (stop {:?}), agreement mass {agree:.3} (need >= 0.95), disagreeing cells {disagreements:?}",
            e.len(),
            report.stop
        ),
    )
}

fn imbalanced(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let means = [[0.0, 0.0], [1.2, 0.6], [0.6, 1.4]];
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        // Exactly 90% / 9% / 1%.
        let c = match i % 100 {
            0 => 2,
            1..=9 => 1,
            _ => 0,
        };
        rows.push(vec![
            means[c][0] + noise.sample(&mut rng),
            means[c][1] + noise.sample(&mut rng),
        ]);
        labels.push(c + 1);
    }
    Dataset::from_rows(&rows, &labels, 3).unwrap()
}

fn ac8() -> Outcome {
    // Misclassification costs inversely proportional to class frequency.
    let eval_cost = CostMatrix::from_rows(&[
        vec![0.0, 1.0, 1.0],
        vec![10.0, 0.0, 10.0],
        vec![90.0, 90.0, 0.0],
    ])
    .unwrap();
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let data = imbalanced(800 + seed, 3000);
        let params = TrainParams {
            rounds: 100,
            depth_limit: 3,
            seed,
            ..TrainParams::default()
        };
        let run = |cost: CostSource| {
            cross_validate(
                &data,
                &CvConfig {
                    folds: 5,
                    cost,
                    eval_cost: eval_cost.clone(),
                    train: params.clone(),
                },
            )
            .unwrap()
            .mean
        };
        let ours = run(CostSource::AutoImbalance);
        let samme = run(CostSource::Matrix(CostMatrix::samme(3).unwrap()));
        if ours < samme {
            wins += 1;
        }
        lines.push(format!("{ours:.4} vs {samme:.4}"));
    }
    outcome(
        wins >= 4,
        format!("confusion-derived beats 0|1 in {wins}/5 seeds (need >= 4): {}", lines.join(", ")),
    )
}

fn detection_data(seed: u64, negatives: usize, positives: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..negatives + positives {
        let label = if i < negatives { 1 } else { 2 + i % 2 };
        let (mx, my) = match label {
            1 => (0.0, 0.0),
            2 => (2.5, 0.0),
            _ => (0.0, 2.5),
        };
        rows.push(vec![mx + noise.sample(&mut rng), my + noise.sample(&mut rng)]);
        labels.push(label);
    }
    Dataset::from_rows(&rows, &labels, 3).unwrap()
}

fn ac9() -> Outcome {
    let train_set = detection_data(909, 3000, 1000);
    let params = TrainParams {
        rounds: 60,
        depth_limit: 2,
        seed: 3,
        ..TrainParams::default()
    };
    let (e, _) = train(&train_set, &CostMatrix::detection(2, 2.0).unwrap(), &params).unwrap();
    let positives = detection_data(910, 0, 500);
    let negatives = detection_data(911, 5000, 0);
    let m = e.len();
    let mut parts = Vec::new();
    let mut pass = true;
    for mode in [CalibrationMode::PerStage, CalibrationMode::Single] {
        let cal = calibrate(&e, &positives, mode, DEFAULT_BACKGROUND).unwrap();
        let changed = (0..positives.n())
            .filter(|&i| {
                let x = positives.row(i);
                predict_pruned(&e, &cal.thresholds, x).unwrap().label != e.predict(x).unwrap()
            })
            .count();
        let evaluated: usize = (0..negatives.n())
            .map(|i| predict_pruned(&e, &cal.thresholds, negatives.row(i)).unwrap().members_evaluated)
            .sum();
        let mean = evaluated as f64 / negatives.n() as f64;
        pass &= changed == 0 && mean < m as f64;
        parts.push(format!(
            "{mode:?}: {changed} positive labels changed ({} excluded), mean members on negatives {mean:.2} of {m}",
            cal.excluded
        ));
    }
    outcome(pass, parts.join("; "))
}

fn ac10() -> Outcome {
    let data = gaussian_mixture(1010, 600);
    let (e, _) = train(
        &data,
        &asymmetric_cost(),
        &TrainParams {
            rounds: 30,
            depth_limit: 3,
            ..TrainParams::default()
        },
    )
    .unwrap();
    let cal = calibrate(&e, &data, CalibrationMode::PerStage, Label::new(1).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    save_model(&e, Some(&cal.thresholds), &p1).unwrap();
    save_model(&e, Some(&cal.thresholds), &p2).unwrap();
    let bytes_equal = std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap();
    let loaded = load_model(&p1).unwrap();
    let resaved = model_to_string(&loaded.ensemble, loaded.thresholds.as_ref()).unwrap();
    let stable = resaved.as_bytes() == std::fs::read(&p1).unwrap().as_slice();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mismatches = 0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
        let same_label = loaded.ensemble.predict(&x).unwrap() == e.predict(&x).unwrap();
        let same_margin = loaded.ensemble.margin_vector(&x).unwrap() == e.margin_vector(&x).unwrap();
        let t = loaded.thresholds.as_ref().unwrap();
        let same_pruned = predict_pruned(&loaded.ensemble, t, &x).unwrap()
            == predict_pruned(&e, &cal.thresholds, &x).unwrap();
        if !(same_label && same_margin && same_pruned) {
            mismatches += 1;
        }
    }
    outcome(
        bytes_equal && stable && mismatches == 0,
        format!("two saves identical: {bytes_equal}, re-save identical: {stable}, {mismatches} of 100 inputs differ"),
    )
}

fn main() {
    let secs = Duration::from_secs;
    let mut all = true;

    let (r, t) = timed(ac1);
    all &= report("AC1", "SAMME step equivalence", secs(5), t, r);
    let (r, t) = timed(ac2);
    all &= report("AC2", "two-class step equivalence", secs(5), t, r);
    let (r, t) = timed(ac3);
    all &= report("AC3", "PIBoost polynomial root", secs(5), t, r);

    let (run, t_run) = timed(descent_run);
    match run {
        Ok(run) => {
            let (r, t) = timed(|| ac4(&run));
            all &= report("AC4", "loss descent", secs(30), t_run + t, r);
            let (r, t) = timed(|| ac5(&run));
            all &= report("AC5", "weight oracle", secs(30), t_run + t, r);
            let (r, t) = timed(|| ac6(&run));
            all &= report("AC6", "cost scale invariance", secs(60), t_run + t, r);
        }
        Err(e) => {
            for id in ["AC4", "AC5", "AC6"] {
                all &= report(id, "shared training run", secs(60), t_run, Err(e.clone()));
            }
        }
    }

    let (r, t) = timed(ac7);
    all &= report("AC7", "Bayes rule agreement on toy domain", secs(60), t, r);
    let (r, t) = timed(ac8);
    all &= report("AC8", "imbalance cost direction", secs(300), t, r);
    let (r, t) = timed(ac9);
    all &= report("AC9", "cascade soundness", secs(30), t, r);
    let (r, t) = timed(ac10);
    all &= report("AC10", "model serialization", secs(5), t, r);

    if !all {
        std::process::exit(1);
    }
}
