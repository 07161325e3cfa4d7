//! Statistics checked against independent brute-force implementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use veracity_eval::agreement::{weighted_kappa, Kappa, Weighting};
use veracity_eval::stats::{mann_whitney_exact, mann_whitney_normal, mann_whitney_u, spearman_rho, PValueMethod};

/// Ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
fn brute_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let smaller = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// All index subsets of size k.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn brute_u(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }))
        .sum()
}

/// Two-sided exact p by enumerating every relabeling of the pooled data.
fn brute_exact_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let u_obs = brute_u(a, b);
    let all = subsets(pooled.len(), a.len());
    let (mut le, mut ge) = (0usize, 0usize);
    for s in &all {
        let xa: Vec<f64> = s.iter().map(|&i| pooled[i]).collect();
        let xb: Vec<f64> = (0..pooled.len()).filter(|i| !s.contains(i)).map(|i| pooled[i]).collect();
        let u = brute_u(&xa, &xb);
        if u <= u_obs + 1e-9 {
            le += 1;
        }
        if u >= u_obs - 1e-9 {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / all.len() as f64).min(1.0)
}

#[test]
fn mann_whitney_textbook_case() {
    let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert_eq!(r.u, 0.0);
    // 1 of C(6,3) = 20 arrangements is as extreme in each tail.
    assert!((r.p - 2.0 / 20.0).abs() < 1e-12);
}

#[test]
fn exact_p_matches_enumeration_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let na = rng.gen_range(1..=5);
        let nb = rng.gen_range(1..=6);
        let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0..5) as f64).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0..5) as f64).collect();
        let r = mann_whitney_exact(&a, &b).unwrap();
        assert_eq!(r.u, brute_u(&a, &b));
        assert!((r.p - brute_exact_p(&a, &b)).abs() < 1e-9, "{a:?} {b:?}");
    }
}

#[test]
fn exact_and_normal_agree_at_n8() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let a: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..10.0)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..10.0) + 1.5).collect();
        let exact = mann_whitney_exact(&a, &b).unwrap();
        let approx = mann_whitney_normal(&a, &b).unwrap();
        assert_eq!(exact.method, PValueMethod::Exact);
        worst = worst.max((exact.p - approx.p).abs());
    }
    assert!(worst < 0.02, "max |exact - normal| = {worst}");
}

#[test]
fn large_samples_use_normal_approximation() {
    let a: Vec<f64> = (0..9).map(f64::from).collect();
    let b: Vec<f64> = (5..20).map(f64::from).collect();
    assert_eq!(mann_whitney_u(&a, &b).unwrap().method, PValueMethod::NormalApprox);
}

#[test]
fn spearman_matches_rank_then_pearson_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.gen_range(3..30);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64).collect();
        let Ok(rho) = spearman_rho(&x, &y) else {
            continue;
        };
        let oracle = brute_pearson(&brute_ranks(&x), &brute_ranks(&y));
        assert!((rho - oracle).abs() < 1e-12, "{rho} vs {oracle}");
    }
}

#[test]
fn kappa_hand_example() {
    // Confusion [[2,1,0],[0,2,1],[0,0,2]], linear weights 0, 1/2, 1.
    // Weighted agreement: po = 1 - (0.5 + 0.5) / 8 = 0.875.
    // Marginals rows (3,3,2), cols (2,3,3); pe = 1 - 28/64 = 0.5625.
    // kappa = (po - pe) / (1 - pe) = 0.3125 / 0.4375 = 5/7.
    let a = [0, 0, 0, 1, 1, 1, 2, 2];
    let b = [0, 0, 1, 1, 1, 2, 2, 2];
    let k = weighted_kappa(&a, &b, 3, Weighting::Linear).unwrap();
    let Kappa::Value(k) = k else { panic!("applicable") };
    assert!((k - 5.0 / 7.0).abs() < 1e-9);
    assert_eq!(weighted_kappa(&[2, 2], &[2, 2], 3, Weighting::Linear).unwrap(), Kappa::NotApplicable);
}
