//! Normality, parametric and rank-based group tests.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Shapiro-Wilk W and p-value (Royston's AS R94 approximation).
///
/// Valid for 3 to 5000 observations. A sample with zero range returns
/// `W = 1, p = 1`.
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if n < 3 {
        return Err(Error::SampleTooSmall { len: n, needed: 3 });
    }
    if n > 5000 {
        return Err(Error::SampleTooLarge { len: n, max: 5000 });
    }
    let mut xs = x.to_vec();
    xs.sort_by(f64::total_cmp);
    let range = xs[n - 1] - xs[0];
    if !(range > 1e-19 * xs[n - 1].abs().max(1.0)) {
        return Ok(TestResult {
            statistic: 1.0,
            p_value: 1.0,
        });
    }

    let half = swilk_coefficients(n);
    // Full antisymmetric coefficient vector in sorted order.
    let coef: Vec<f64> = (0..n)
        .map(|i| {
            let j = n - 1 - i;
            match i.cmp(&j) {
                std::cmp::Ordering::Less => -half[i],
                std::cmp::Ordering::Greater => half[j],
                std::cmp::Ordering::Equal => 0.0,
            }
        })
        .collect();

    // W as the squared correlation between coefficients and order statistics.
    let nf = n as f64;
    let ca = coef.iter().sum::<f64>() / nf;
    let cx = xs.iter().map(|v| v / range).sum::<f64>() / nf;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (a, v) in coef.iter().zip(&xs) {
        let da = a - ca;
        let dx = v / range - cx;
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let w1 = {
        let s = (ssa * ssx).sqrt();
        (s - sax) * (s + sax) / (ssa * ssx)
    };
    let w = 1.0 - w1;
    Ok(TestResult {
        statistic: w,
        p_value: swilk_p_value(w, w1, n),
    })
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Upper-half coefficients `a_1 >= a_2 >= ...` for a sample of size `n`.
fn swilk_coefficients(n: usize) -> Vec<f64> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let nn2 = n / 2;
    let mut a = vec![0.0; nn2];
    if n == 3 {
        a[0] = 0.5f64.sqrt();
        return a;
    }
    let an = n as f64;
    let norm = std_normal();
    let m: Vec<f64> = (1..=nn2)
        .map(|i| norm.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    a[0] = a1;
    for i in first..nn2 {
        a[i] = -m[i] / fac;
    }
    a
}

fn swilk_p_value(w: f64, w1: f64, n: usize) -> f64 {
    const G: [f64; 2] = [-2.273, 0.459];
    const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::PI / 3.0;
        return (pi6 * (w.max(0.75).sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }
    let an = n as f64;
    let mut y = w1.ln();
    let (mean, sd) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let lx = an.ln();
        (poly(&C5, lx), poly(&C6, lx).exp())
    };
    let z = (y - mean) / sd;
    (1.0 - std_normal().cdf(z)).clamp(0.0, 1.0)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnovaResult {
    pub f: f64,
    pub p_value: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub ms_within: f64,
    /// Zero within-group variance with unequal means: `F` is infinite.
    pub exact_separation: bool,
}

fn check_groups(groups: &[&[f64]], min_each: usize) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::SampleTooSmall {
            len: groups.len(),
            needed: 2,
        });
    }
    if let Some(g) = groups.iter().find(|g| g.len() < min_each) {
        return Err(Error::SampleTooSmall {
            len: g.len(),
            needed: min_each,
        });
    }
    Ok(())
}

/// Classical one-way ANOVA with `(k - 1, N - k)` degrees of freedom.
///
/// Groups with zero spread and equal means give `F = 0, p = 1`.
pub fn anova_oneway(groups: &[&[f64]]) -> Result<AnovaResult> {
    check_groups(groups, 2)?;
    let k = groups.len() as f64;
    let total: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let df_between = k - 1.0;
    let df_within = total as f64 - k;
    let ms_within = ss_within / df_within;
    let scale = groups
        .iter()
        .flat_map(|g| g.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1.0);
    let negligible = |ss: f64| ss <= 1e-24 * scale * scale * total as f64;
    let (f, p_value, exact_separation) = if negligible(ss_within) {
        if negligible(ss_between) {
            (0.0, 1.0, false)
        } else {
            (f64::INFINITY, 0.0, true)
        }
    } else {
        let f = (ss_between / df_between) / ms_within;
        let dist = FisherSnedecor::new(df_between, df_within).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        (f, (1.0 - dist.cdf(f)).clamp(0.0, 1.0), false)
    };
    Ok(AnovaResult {
        f,
        p_value,
        df_between,
        df_within,
        ms_within,
        exact_separation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairwiseResult {
    pub first: usize,
    pub second: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
}

/// Pairwise t-tests on the pooled ANOVA mean square, p-values multiplied by
/// the number of pairs and capped at 1.
pub fn bonferroni_pairwise(groups: &[&[f64]]) -> Result<Vec<PairwiseResult>> {
    let anova = anova_oneway(groups)?;
    let pairs = groups.len() * (groups.len() - 1) / 2;
    let t_dist = StudentsT::new(0.0, 1.0, anova.df_within).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = Vec::with_capacity(pairs);
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let diff = mean(groups[i]) - mean(groups[j]);
            let se = (anova.ms_within * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64)).sqrt();
            let (t, p) = if se > 0.0 && anova.ms_within.is_finite() && !anova.exact_separation {
                let t = diff / se;
                (t, (2.0 * (1.0 - t_dist.cdf(t.abs()))).clamp(0.0, 1.0))
            } else if diff == 0.0 {
                (0.0, 1.0)
            } else {
                (diff.signum() * f64::INFINITY, 0.0)
            };
            out.push(PairwiseResult {
                first: i,
                second: j,
                statistic: t,
                p_value: p,
                p_adjusted: (p * pairs as f64).min(1.0),
            });
        }
    }
    Ok(out)
}

/// Midranks (1-based) of the pooled values and the tie sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum()
}

/// Kruskal-Wallis H with tie correction and chi-square(k - 1) p-value.
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<TestResult> {
    check_groups(groups, 1)?;
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let n = pooled.len() as f64;
    if pooled.len() < 3 {
        return Err(Error::SampleTooSmall {
            len: pooled.len(),
            needed: 3,
        });
    }
    let (ranks, ties) = midranks(&pooled);
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let correction = 1.0 - tie_term(&ties) / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let h = (h / correction).max(0.0);
    let dist = ChiSquared::new(groups.len() as f64 - 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(TestResult {
        statistic: h,
        p_value: (1.0 - dist.cdf(h)).clamp(0.0, 1.0),
    })
}

/// Largest smaller-sample size for which the exact null distribution is used.
pub const MANN_WHITNEY_EXACT_MAX: usize = 8;

/// Number of rank arrangements giving each `U = 0..=n*m` under the null.
pub fn mann_whitney_null_counts(n: usize, m: usize) -> Vec<u64> {
    // counts[j][u] for the current first-sample size, over second-sample sizes j.
    let mut prev: Vec<Vec<u64>> = (0..=m).map(|_| vec![1]).collect();
    for i in 1..=n {
        let mut cur: Vec<Vec<u64>> = Vec::with_capacity(m + 1);
        cur.push(vec![1]);
        for j in 1..=m {
            let mut c = vec![0u64; i * j + 1];
            // Largest observation from the first sample adds j to U.
            for (u, &v) in prev[j].iter().enumerate() {
                c[u + j] += v;
            }
            for (u, &v) in cur[j - 1].iter().enumerate() {
                c[u] += v;
            }
            cur.push(c);
        }
        prev = cur;
    }
    prev.swap_remove(m)
}

/// Two-sided Mann-Whitney test. `statistic` is `U` of the first sample.
///
/// Exact null distribution when the smaller sample has at most 8 values and
/// there are no ties; otherwise the tie-corrected normal approximation with
/// continuity correction.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::SampleTooSmall {
            len: x.len().min(y.len()),
            needed: 1,
        });
    }
    let (n, m) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n].iter().sum();
    let u = r1 - (n * (n + 1)) as f64 / 2.0;
    let nm = (n * m) as f64;

    let p_value = if n.min(m) <= MANN_WHITNEY_EXACT_MAX && ties.is_empty() {
        let counts = mann_whitney_null_counts(n, m);
        let total: f64 = counts.iter().map(|&c| c as f64).sum();
        let ui = u.round() as usize;
        let lower: f64 = counts[..=ui].iter().map(|&c| c as f64).sum::<f64>() / total;
        let upper: f64 = counts[ui..].iter().map(|&c| c as f64).sum::<f64>() / total;
        (2.0 * lower.min(upper)).min(1.0)
    } else {
        let nt = (n + m) as f64;
        let var = nm / 12.0 * ((nt + 1.0) - tie_term(&ties) / (nt * (nt - 1.0)));
        if var <= 0.0 {
            1.0
        } else {
            let z = ((u - nm / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
            (2.0 * (1.0 - std_normal().cdf(z))).min(1.0)
        }
    };
    Ok(TestResult { statistic: u, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shapiro_small_samples() {
        assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(Error::SampleTooSmall { .. })));
        let r = shapiro_wilk(&[1.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
        assert!(r.statistic < 0.6);
        assert!(r.p_value < 0.05);
        let r = shapiro_wilk(&[5.0; 6]).unwrap();
        assert_eq!((r.statistic, r.p_value), (1.0, 1.0));
    }

    #[test]
    fn shapiro_normal_quantiles_near_one() {
        let norm = std_normal();
        let n = 30;
        let x: Vec<f64> = (1..=n)
            .map(|i| norm.inverse_cdf((i as f64 - 0.375) / (n as f64 + 0.25)))
            .collect();
        let r = shapiro_wilk(&x).unwrap();
        assert!(r.statistic > 0.99);
        assert!(r.p_value > 0.5);
    }

    #[test]
    fn shapiro_three_points() {
        // Equally spaced triple is the most normal-looking configuration.
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn anova_identical_groups() {
        let g = [1.0, 2.0, 3.0];
        let r = anova_oneway(&[&g, &g]).unwrap();
        assert_eq!(r.f, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anova_exact_separation() {
        let r = anova_oneway(&[&[0.0, 0.0, 0.0], &[10.0, 10.0, 10.0]]).unwrap();
        assert!(r.exact_separation);
        assert_eq!(r.p_value, 0.0);
        let r = anova_oneway(&[&[4.0, 4.0], &[4.0, 4.0]]).unwrap();
        assert_eq!((r.f, r.p_value), (0.0, 1.0));
        assert!(anova_oneway(&[&[1.0, 2.0]]).is_err());
        assert!(anova_oneway(&[&[1.0, 2.0], &[3.0]]).is_err());
    }

    #[test]
    fn anova_textbook_value() {
        // Hand computation: means 2, 5, 8; SSB = 54, SSW = 6, F = (54/2)/(6/6) = 27.
        let r = anova_oneway(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]).unwrap();
        assert!((r.f - 27.0).abs() < 1e-12);
        // P(F(2, 6) > 27) = (1 + 27 * 2 / 6)^-3 = 10^-3.
        assert!((r.p_value - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn bonferroni_caps_and_inflates() {
        let a = [1.0, 2.0, 3.0, 2.5];
        let b = [1.5, 2.5, 2.0, 3.5];
        let c = [9.0, 10.0, 11.0, 10.5];
        let res = bonferroni_pairwise(&[&a, &b, &c]).unwrap();
        assert_eq!(res.len(), 3);
        for r in &res {
            assert!(r.p_adjusted >= r.p_value);
            assert!(r.p_adjusted <= 1.0);
        }
        assert!(res[0].p_adjusted > 0.05);
        assert!(res[1].p_adjusted < 0.05 && res[2].p_adjusted < 0.05);
    }

    #[test]
    fn kruskal_basics() {
        let g = [1.0, 2.0, 3.0];
        assert_eq!(kruskal_wallis(&[&g, &g]).unwrap().statistic, 0.0);
        let r = kruskal_wallis(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        // H = 12/(6*7) * (36/3 + 225/3) - 21 = 27/7.
        assert!((r.statistic - 27.0 / 7.0).abs() < 1e-12);
        let r = kruskal_wallis(&[&[2.0, 2.0], &[2.0, 2.0]]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn mann_whitney_separation() {
        let r = mann_whitney(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        // Exact: P(U <= 0) = 1/6, two-sided 1/3.
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-12);
        assert!(mann_whitney(&[], &[1.0]).is_err());
    }

    #[test]
    fn exact_counts_match_enumeration() {
        // Brute force over all C(8,4) = 70 ways of giving ranks to the first sample.
        let (n, m) = (4, 4);
        let mut brute = vec![0u64; n * m + 1];
        for mask in 0u32..(1 << (n + m)) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let rank_sum: usize = (0..n + m).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).sum();
            brute[rank_sum - n * (n + 1) / 2] += 1;
        }
        assert_eq!(brute.iter().sum::<u64>(), 70);
        assert_eq!(mann_whitney_null_counts(n, m), brute);
        assert_eq!(mann_whitney_null_counts(3, 5).iter().sum::<u64>(), 56);
    }

    #[test]
    fn midranks_with_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, vec![2]);
    }

    proptest! {
        #[test]
        fn rank_tests_invariant_under_monotone_maps(
            a in prop::collection::vec(-100.0f64..100.0, 2..9),
            b in prop::collection::vec(-100.0f64..100.0, 2..9),
            c in prop::collection::vec(-100.0f64..100.0, 2..9),
        ) {
            let f = |v: &Vec<f64>| v.iter().map(|x| (x / 40.0).exp() * 3.0 + 1.0).collect::<Vec<f64>>();
            let (fa, fb, fc) = (f(&a), f(&b), f(&c));
            let k1 = kruskal_wallis(&[&a, &b, &c]).unwrap();
            let k2 = kruskal_wallis(&[&fa, &fb, &fc]).unwrap();
            prop_assert!((k1.statistic - k2.statistic).abs() < 1e-9);
            let m1 = mann_whitney(&a, &b).unwrap();
            let m2 = mann_whitney(&fa, &fb).unwrap();
            prop_assert_eq!(m1.statistic, m2.statistic);
            prop_assert!((m1.p_value - m2.p_value).abs() < 1e-12);
            for p in [k1.p_value, m1.p_value, anova_oneway(&[&a, &b, &c]).unwrap().p_value] {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
