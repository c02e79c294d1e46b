//! End-to-end acceptance checks. Runs sequentially so timings are not
//! distorted by other criteria, prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{flat, normal_matrix, random_dataset, random_params, rng, sup_dist};
use mtclm::experiment::{run_bench, run_trace, trailing_relative_change, BenchConfig, TraceConfig};
use mtclm::likelihood::{grad_screening, grad_severity, screening_nll, severity_nll, sigmoid};
use mtclm::metrics::{kendall_tau, roc_auc};
use mtclm::model::Method;
use mtclm::simgen::{generate, CoefMagnitude, Scenario, ScenarioSpec};
use mtclm::{
    fit_fused, fit_group, fit_mle, objective_value, predict_proba, AdmmSettings, OrdinalDataset,
    PenaltyConfig, SmoothSolveSettings,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = f();
    let elapsed = t.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "{} {id}: {} [{:.1}s of {:.0}s budget{}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        if in_time { "" } else { ", over budget" },
    );
    pass
}

fn nll_grad_fd(data: &OrdinalDataset, x: &[f64], p: usize, km1: usize) -> (Vec<f64>, Vec<f64>) {
    // layout: alpha, beta (p), zeta (km1), gamma (p)
    let f = |v: &[f64]| {
        screening_nll(data, v[0], &v[1..1 + p]).unwrap()
            + severity_nll(data, &v[1 + p..1 + p + km1], &v[1 + p + km1..]).unwrap()
    };
    let h = 1e-5;
    let fd = (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect();
    let (ga, gb) = grad_screening(data, x[0], &x[1..1 + p]).unwrap();
    let (gz, gg) = grad_severity(data, &x[1 + p..1 + p + km1], &x[1 + p + km1..]).unwrap();
    let mut g = vec![ga];
    g.extend(gb);
    g.extend(gz);
    g.extend(gg);
    (g, fd)
}

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut r = rng(101);
    for i in 0..100 {
        let (data, _) = random_dataset(1000 + i, 50, 10, 3, 0.4);
        let q = random_params(&mut r, 10, 3, 0.5);
        let (g, fd) = nll_grad_fd(&data, &flat(&q), 10, 2);
        let diff: f64 = g
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = g
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        worst = worst.max(diff / norm.max(1e-12));
    }
    Outcome {
        pass: worst < 1e-5,
        detail: format!("gradient vs central differences, max relative error {worst:.2e} (< 1e-5)"),
    }
}

fn oracle_equivalence() -> Outcome {
    let admm = AdmmSettings::default();
    let smooth = SmoothSolveSettings::default();
    let tight = SmoothSolveSettings {
        grad_tol: 1e-10,
        max_inner_iter: 5000,
        ..Default::default()
    };
    let zero = PenaltyConfig::default();
    let (mut gap, mut dist) = (0.0f64, 0.0f64);
    for i in 0..5 {
        let (data, _) = random_dataset(200 + i, 100, 5, 3, 0.6);
        let mle = fit_mle(&data, &tight, None).unwrap();
        let f_mle = objective_value(&data, &mle, &zero).unwrap();
        for fit in [
            fit_fused(&data, &zero, &admm, &smooth, None).unwrap(),
            fit_group(&data, &zero, &admm, &smooth, None).unwrap(),
        ] {
            gap = gap.max((fit.final_objective() - f_mle).abs());
            dist = dist.max(sup_dist(&flat(&fit.params), &flat(&mle)));
        }
    }
    Outcome {
        pass: gap < 1e-6 && dist < 1e-3,
        detail: format!("zero-penalty ADMM vs direct MLE, objective gap {gap:.2e} (< 1e-6), sup distance {dist:.2e} (< 1e-3)"),
    }
}

fn frequency_logits(data: &OrdinalDataset) -> (f64, Vec<f64>) {
    let logit = |q: f64| (q / (1.0 - q)).ln();
    let n = data.n() as f64;
    let y = data.y();
    let n0 = y.iter().filter(|&&v| v == 0).count() as f64;
    let m = n - n0;
    let zeta = (1..data.k_max())
        .map(|k| logit(y.iter().filter(|&&v| v >= 1 && v <= k).count() as f64 / m))
        .collect();
    (logit(n0 / n), zeta)
}

fn penalty_limits() -> Outcome {
    let (data, _) = random_dataset(303, 200, 10, 3, 0.6);
    let admm = AdmmSettings::default();
    let smooth = SmoothSolveSettings::default();

    let fused = fit_fused(
        &data,
        &PenaltyConfig::fused(0.0, 0.0, 100.0),
        &admm,
        &smooth,
        None,
    )
    .unwrap();
    let fuse_gap = sup_dist(&fused.params.beta, &fused.params.gamma);

    let group = fit_group(
        &data,
        &PenaltyConfig::group(0.0, 0.0, 100.0),
        &admm,
        &smooth,
        None,
    )
    .unwrap();
    let group_zero = group
        .params
        .beta
        .iter()
        .chain(&group.params.gamma)
        .all(|&c| c == 0.0);

    let l1 = fit_group(&data, &PenaltyConfig::l1(1e3, 1e3), &admm, &smooth, None).unwrap();
    let (alpha, zeta) = frequency_logits(&data);
    let l1_zero = l1
        .params
        .beta
        .iter()
        .chain(&l1.params.gamma)
        .all(|&c| c == 0.0);
    let icpt = (l1.params.alpha - alpha)
        .abs()
        .max(sup_dist(&l1.params.zeta, &zeta));

    Outcome {
        pass: fuse_gap < 1e-3 && group_zero && l1_zero && icpt < 1e-4,
        detail: format!(
            "fused max|b-g| {fuse_gap:.2e} (< 1e-3); group all zero {group_zero}; \
             heavy L1 all zero {l1_zero}, intercept error {icpt:.2e} (< 1e-4)"
        ),
    }
}

fn convergence_trace() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for method in [Method::MtclmL1, Method::MtclmFused, Method::MtclmGroup] {
        let fit = run_trace(&TraceConfig::new(method, 7)).unwrap();
        let change = trailing_relative_change(&fit.augmented_lagrangian_trace, 10);
        pass &= change < 1e-6;
        parts.push(format!("{method} {change:.1e} ({} it)", fit.iterations));
    }
    Outcome {
        pass,
        detail: format!(
            "augmented Lagrangian relative change, last 10 iterations (< 1e-6): {}",
            parts.join(", ")
        ),
    }
}

fn validity() -> Outcome {
    let mut r = rng(505);
    let (mut worst_sum, mut worst_formula, mut min_step) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..20 {
        let p = r.gen_range(1..8);
        let k_max = r.gen_range(2..6);
        let q = random_params(&mut r, p, k_max, 2.0);
        let x = normal_matrix(&mut r, 1000, p) * 3.0;
        let probs = predict_proba(&q, x.view()).unwrap();
        let cum = probs.cumulative();
        for i in 0..1000 {
            let row = probs.row(i);
            worst_sum = worst_sum.max((row.sum() - 1.0).abs());
            let xi = x.row(i);
            let p0 = sigmoid(q.alpha + xi.dot(&ndarray::ArrayView1::from(&q.beta)));
            let e = xi.dot(&ndarray::ArrayView1::from(&q.gamma));
            for k in 0..=k_max {
                let direct = if k == 0 {
                    p0
                } else if k == k_max {
                    1.0
                } else {
                    p0 + (1.0 - p0) * sigmoid(q.zeta[k - 1] + e)
                };
                worst_formula = worst_formula.max((cum[[i, k]] - direct).abs());
                if k > 0 {
                    min_step = min_step.min(cum[[i, k]] - cum[[i, k - 1]]);
                }
            }
        }
    }
    Outcome {
        pass: worst_sum < 1e-10 && min_step >= 0.0 && worst_formula < 1e-10,
        detail: format!(
            "20 x 1000 predictions, max |sum - 1| {worst_sum:.1e}, min cumulative step {min_step:.1e}, \
             max deviation from direct formula {worst_formula:.1e}"
        ),
    }
}

fn simulation_trends() -> Outcome {
    let cfg = BenchConfig::default();
    let out = run_bench(&cfg).unwrap();
    let mean = |s, m, metric| out.mean(s, m, metric);
    let per_rep = |s, m, metric| out.values(s, m, metric);

    let auc_clm = mean(Scenario::Parallel, Method::ClmL1, "auc");
    let auc_l1 = mean(Scenario::Parallel, Method::MtclmL1, "auc");
    let a = auc_clm >= auc_l1 - 0.02;

    let auc_fused = mean(Scenario::Identical, Method::MtclmFused, "auc");
    let auc_l1_id = mean(Scenario::Identical, Method::MtclmL1, "auc");
    let b = auc_fused >= auc_l1_id - 0.02;

    let tau_clm = per_rep(Scenario::AlmostIndependent, Method::ClmL1, "kendall_tau");
    let beats = |m| {
        per_rep(Scenario::AlmostIndependent, m, "kendall_tau")
            .iter()
            .filter(|(rep, v)| tau_clm.iter().any(|(r2, c)| r2 == rep && v > c))
            .count()
    };
    let (l1_wins, group_wins) = (beats(Method::MtclmL1), beats(Method::MtclmGroup));
    let c = l1_wins >= 7 && group_wins >= 7;

    let mut d = true;
    let mut d_detail = Vec::new();
    for s in [Scenario::Similar, Scenario::AlmostIndependent] {
        let pf = per_rep(s, Method::MtclmFused, "power");
        let pg = per_rep(s, Method::MtclmGroup, "power");
        let ff = per_rep(s, Method::MtclmFused, "fdr");
        let fg = per_rep(s, Method::MtclmGroup, "fdr");
        let hits = (0..cfg.replicates)
            .filter(|rep| {
                let get = |v: &Vec<(usize, f64)>| v.iter().find(|(r, _)| r == rep).map(|x| x.1);
                matches!(
                    (get(&pf), get(&pg), get(&ff), get(&fg)),
                    (Some(a), Some(b), Some(c), Some(e)) if a >= b && c >= e
                )
            })
            .count();
        d &= hits >= 7;
        d_detail.push(format!("{s} {hits}/{}", cfg.replicates));
    }

    Outcome {
        pass: a && b && c && d && out.failures.is_empty(),
        detail: format!(
            "(a) parallel AUC clm-l1 {auc_clm:.3} vs mtclm-l1 {auc_l1:.3} {}; \
             (b) identical AUC fused {auc_fused:.3} vs l1 {auc_l1_id:.3} {}; \
             (c) tau beats clm-l1: l1 {l1_wins}/10, group {group_wins}/10 {}; \
             (d) fused power and FDR >= group: {} {}; failed fits {}",
            ok(a),
            ok(b),
            ok(c),
            d_detail.join(", "),
            ok(d),
            out.failures.len()
        ),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "MISS"
    }
}

fn simgen_fidelity() -> Outcome {
    let mut r = rng(707);
    let cuts = [0.5, 2.0 / 3.0, 5.0 / 6.0];
    let mut worst = 0.0f64;
    for i in 0..50 {
        let spec = ScenarioSpec {
            scenario: Scenario::ALL[i % 5],
            n: r.gen_range(24..800),
            p: r.gen_range(18..40),
            rho: r.gen_range(0.0..0.9),
            seed: r.gen(),
            coef_magnitude: CoefMagnitude::Uniform,
        };
        let (data, _) = generate(&spec).unwrap();
        let counts = data.level_counts();
        let mut cum = 0usize;
        for (k, c) in cuts.iter().enumerate() {
            cum += counts[k];
            worst = worst.max((cum as f64 - c * spec.n as f64).abs());
        }
    }
    let mut corr_err = 0.0f64;
    for (j, rho) in [0.2, 0.5, 0.8].into_iter().enumerate() {
        let spec = ScenarioSpec {
            rho,
            ..ScenarioSpec::new(Scenario::Identical, 100_000, 18, 900 + j as u64)
        };
        let (data, _) = generate(&spec).unwrap();
        let x = data.x();
        for c in 0..x.ncols() - 1 {
            let (a, b) = (x.column(c), x.column(c + 1));
            let (ma, mb) = (a.mean().unwrap(), b.mean().unwrap());
            let cov = a
                .iter()
                .zip(b.iter())
                .map(|(u, v)| (u - ma) * (v - mb))
                .sum::<f64>();
            let va = a.iter().map(|u| (u - ma).powi(2)).sum::<f64>();
            let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
            corr_err = corr_err.max((cov / (va * vb).sqrt() - rho).abs());
        }
    }
    Outcome {
        pass: worst <= 1.0 && corr_err <= 0.01,
        detail: format!(
            "50 specs, max boundary deviation {worst:.2} obs (<= 1); adjacent correlation error {corr_err:.4} (<= 0.01)"
        ),
    }
}

fn brute_auc(s: &[f64], l: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if l[i] == 1 && l[j] == 0 {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn brute_tau_b(a: &[f64], b: &[f64]) -> f64 {
    let (mut conc, mut disc, mut tie_a, mut tie_b, mut pairs) = (0.0, 0.0, 0.0, 0.0, 0.0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            pairs += 1.0;
            let s = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            if a[i] == a[j] {
                tie_a += 1.0;
            }
            if b[i] == b[j] {
                tie_b += 1.0;
            }
            if a[i] != a[j] && b[i] != b[j] {
                if s > 0.0 {
                    conc += 1.0
                } else {
                    disc += 1.0
                }
            }
        }
    }
    (conc - disc) / ((pairs - tie_a) * (pairs - tie_b)).sqrt()
}

fn metric_oracles() -> Outcome {
    let mut r = rng(808);
    let (mut auc_err, mut tau_err) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let n = r.gen_range(2..=30);
        // coarse values half the time to exercise ties
        let levels = if i % 2 == 0 { 4 } else { 1000 };
        let draw = |r: &mut rand_chacha::ChaCha8Rng| {
            (0..n)
                .map(|_| r.gen_range(0..levels) as f64)
                .collect::<Vec<_>>()
        };
        let scores = draw(&mut r);
        let mut labels: Vec<u8> = (0..n).map(|_| r.gen_range(0..2)).collect();
        labels[0] = 0;
        labels[n - 1] = 1;
        auc_err =
            auc_err.max((roc_auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs());

        let (mut a, mut b) = (draw(&mut r), draw(&mut r));
        a[0] = -1.0;
        b[1 % n] = -1.0;
        a[n - 1] = levels as f64;
        b[(n - 2) % n] = levels as f64;
        if n == 2 {
            b = vec![0.0, 1.0];
        }
        tau_err = tau_err.max((kendall_tau(&a, &b).unwrap() - brute_tau_b(&a, &b)).abs());
    }
    Outcome {
        pass: auc_err <= 1e-12 && tau_err <= 1e-12,
        detail: format!("200 random vectors vs pairwise enumeration, AUC error {auc_err:.1e}, tau-b error {tau_err:.1e}"),
    }
}

fn main() {
    let results = [
        run("criterion 1", Duration::from_secs(5), gradient_check),
        run("criterion 2", Duration::from_secs(30), oracle_equivalence),
        run("criterion 3", Duration::from_secs(60), penalty_limits),
        run("criterion 4", Duration::from_secs(120), convergence_trace),
        run("criterion 5", Duration::from_secs(5), validity),
        run("criterion 7", Duration::from_secs(30), simgen_fidelity),
        run("criterion 8", Duration::from_secs(5), metric_oracles),
        run(
            "criterion 6",
            Duration::from_secs(30 * 60),
            simulation_trends,
        ),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
