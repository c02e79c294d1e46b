mod common;

use common::{random_dataset, random_params, rng};
use mtclm::likelihood::{grad_screening, grad_severity, screening_nll, severity_nll, total_nll};
use mtclm::{MtclmParams, OrdinalDataset};
use proptest::prelude::*;

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

#[test]
fn gradients_match_finite_differences_far_from_the_optimum() {
    let (data, _) = random_dataset(3, 40, 4, 4, 1.0);
    let mut r = rng(17);
    for _ in 0..10 {
        let q = random_params(&mut r, 4, 4, 2.0);
        let (ga, gb) = grad_screening(&data, q.alpha, &q.beta).unwrap();
        let mut g = vec![ga];
        g.extend(gb);
        let x0: Vec<f64> = std::iter::once(q.alpha)
            .chain(q.beta.iter().copied())
            .collect();
        let fd = central_diff(|v| screening_nll(&data, v[0], &v[1..]).unwrap(), &x0, 1e-5);
        assert!(rel_err(&g, &fd) < 1e-6);

        let (gz, gg) = grad_severity(&data, &q.zeta, &q.gamma).unwrap();
        let mut g = gz;
        g.extend(gg);
        let x0: Vec<f64> = q.zeta.iter().chain(&q.gamma).copied().collect();
        let fd = central_diff(
            |v| severity_nll(&data, &v[..3], &v[3..]).unwrap(),
            &x0,
            1e-5,
        );
        assert!(rel_err(&g, &fd) < 1e-6);
    }
}

#[test]
fn extreme_linear_predictors_stay_finite() {
    let (data, _) = random_dataset(5, 30, 3, 3, 1.0);
    let q = MtclmParams {
        alpha: 40.0,
        beta: vec![30.0, -30.0, 30.0],
        zeta: vec![-50.0, 50.0],
        gamma: vec![40.0, 40.0, -40.0],
    };
    let v = total_nll(&data, &q).unwrap();
    assert!(v.total_nll.is_finite() && v.total_nll > 0.0);
    let (gz, gg) = grad_severity(&data, &q.zeta, &q.gamma).unwrap();
    assert!(gz.iter().chain(&gg).all(|g| g.is_finite()));
}

fn at(t: f64, a: &MtclmParams, b: &MtclmParams) -> MtclmParams {
    let mix = |u: &[f64], v: &[f64]| {
        u.iter()
            .zip(v)
            .map(|(x, y)| (1.0 - t) * x + t * y)
            .collect()
    };
    MtclmParams {
        alpha: (1.0 - t) * a.alpha + t * b.alpha,
        beta: mix(&a.beta, &b.beta),
        zeta: mix(&a.zeta, &b.zeta),
        gamma: mix(&a.gamma, &b.gamma),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn negative_log_likelihood_is_convex(seed in 0u64..10_000, t in 0.05f64..0.95) {
        let (data, _) = random_dataset(seed, 30, 3, 3, 1.0);
        let mut r = rng(seed ^ 0xabc);
        let a = random_params(&mut r, 3, 3, 1.5);
        let b = random_params(&mut r, 3, 3, 1.5);
        let f = |q: &MtclmParams| total_nll(&data, q).unwrap().total_nll;
        let lhs = f(&at(t, &a, &b));
        let rhs = (1.0 - t) * f(&a) + t * f(&b);
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn screening_and_severity_separate(seed in 0u64..10_000) {
        let (data, _) = random_dataset(seed, 30, 3, 3, 1.0);
        let mut r = rng(seed ^ 0x5eed);
        let a = random_params(&mut r, 3, 3, 1.0);
        let b = random_params(&mut r, 3, 3, 1.0);
        let va = total_nll(&data, &a).unwrap();
        prop_assert!((va.total_nll - va.screening_nll - va.severity_nll).abs() < 1e-14);
        // swapping the severity block leaves the screening part untouched
        let mixed = MtclmParams { zeta: b.zeta.clone(), gamma: b.gamma.clone(), ..a.clone() };
        let vm = total_nll(&data, &mixed).unwrap();
        prop_assert_eq!(vm.screening_nll, va.screening_nll);
        prop_assert_eq!(vm.severity_nll, total_nll(&data, &b).unwrap().severity_nll);
    }

    #[test]
    fn row_order_does_not_matter(seed in 0u64..10_000) {
        let (data, _) = random_dataset(seed, 25, 2, 3, 1.0);
        let mut r = rng(seed);
        let q = random_params(&mut r, 2, 3, 1.0);
        let idx: Vec<usize> = (0..data.n()).rev().collect();
        let rev: OrdinalDataset = data.subset(&idx).unwrap();
        let a = total_nll(&data, &q).unwrap().total_nll;
        let b = total_nll(&rev, &q).unwrap().total_nll;
        prop_assert!((a - b).abs() < 1e-13);
    }
}
