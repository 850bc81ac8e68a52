//! Shapiro-Wilk statistics checked against reference values produced by an
//! independent statistical package on fixed samples.

use cyclescan::spectral_stats::shapiro_wilk;

const CASES: &str = include_str!("../fixtures/shapiro_reference.csv");

/// (sample, W, p)
fn cases() -> Vec<(Vec<f64>, f64, f64)> {
    CASES
        .lines()
        .skip(1)
        .map(|line| {
            let mut cols = line.split(',');
            let w = cols.next().unwrap().parse().unwrap();
            let p = cols.next().unwrap().parse().unwrap();
            let x = cols
                .next()
                .unwrap()
                .split_whitespace()
                .map(|v| v.parse().unwrap())
                .collect();
            (x, w, p)
        })
        .collect()
}

#[test]
fn twenty_reference_cases() {
    assert_eq!(cases().len(), 20);
}

#[test]
fn statistic_matches_reference_to_three_decimals() {
    for (i, (x, w, _)) in cases().iter().enumerate() {
        let r = shapiro_wilk(x).unwrap();
        assert!(
            (r.statistic - w).abs() < 5e-4,
            "case {i} (n={}): W {} vs {}",
            x.len(),
            r.statistic,
            w
        );
    }
}

#[test]
fn p_value_matches_reference() {
    for (i, (x, _, p)) in cases().iter().enumerate() {
        let r = shapiro_wilk(x).unwrap();
        assert!(
            (r.p_value - p).abs() < 2e-3,
            "case {i} (n={}): p {} vs {}",
            x.len(),
            r.p_value,
            p
        );
    }
}

#[test]
fn tied_sample() {
    let r = shapiro_wilk(&[1.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
    assert!((r.statistic - 0.552182).abs() < 5e-4);
    assert!((r.p_value - 0.000131).abs() < 2e-5);
}
