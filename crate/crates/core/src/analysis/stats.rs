use serde::{Deserialize, Serialize};

use super::dist::{chi2_sf, t_two_tailed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub statistic: f64,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum StatsError {
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("zero pooled variance")]
    ZeroPooledVariance,
    #[error("a row or column of the table sums to zero")]
    DegenerateMargin,
    #[error("non-finite input")]
    NonFinite,
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n − 1 denominator), two-pass.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn sample_std(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Two-tailed paired t-test on differences `y − x`. The effect size is
/// Cohen's d for paired samples (mean difference over its std).
///
/// When every difference is identical the std is zero: t is 0 with p = 1 if
/// the differences are zero, otherwise ±∞ with p = 0.
pub fn paired_t_test(pairs: &[(f64, f64)]) -> Result<StatTestResult, StatsError> {
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs(n));
    }
    let d: Vec<f64> = pairs.iter().map(|(x, y)| y - x).collect();
    check_finite(&d)?;
    let md = mean(&d);
    let sd = sample_std(&d);
    let df = (n - 1) as f64;
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let (t, p, es) = if sd <= scale * 1e-14 {
        if md.abs() <= scale * 1e-14 {
            (0.0, 1.0, 0.0)
        } else {
            (md.signum() * f64::INFINITY, 0.0, md.signum() * f64::INFINITY)
        }
    } else {
        let t = md / (sd / (n as f64).sqrt());
        (t, t_two_tailed(t, df), md / sd)
    };
    Ok(StatTestResult {
        statistic: t,
        p_value: p,
        effect_size: Some(es),
        df: Some(df),
    })
}

/// Pearson chi-square test of independence on a 2×2 table, df 1, with
/// optional Yates continuity correction. The effect size is φ = √(χ²/N).
pub fn chi_square_2x2(table: [[u64; 2]; 2], yates: bool) -> Result<StatTestResult, StatsError> {
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    if rows.contains(&0) || cols.contains(&0) {
        return Err(StatsError::DegenerateMargin);
    }
    let n = (rows[0] + rows[1]) as f64;
    let mut chi2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            let mut diff = (table[i][j] as f64 - e).abs();
            if yates {
                diff = (diff - 0.5).max(0.0);
            }
            chi2 += diff * diff / e;
        }
    }
    Ok(StatTestResult {
        statistic: chi2,
        p_value: chi2_sf(chi2, 1.0),
        effect_size: Some((chi2 / n).sqrt()),
        df: Some(1.0),
    })
}

/// Pearson's r with a two-tailed t-based p-value (df n − 2).
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<StatTestResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::TooFewPoints { need: 3, got: n });
    }
    check_finite(xs)?;
    check_finite(ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let mut r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    // Collinear data can land an ulp or two short of ±1.
    if 1.0 - r.abs() <= 4.0 * f64::EPSILON {
        r = r.signum();
    }
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        t_two_tailed(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(StatTestResult {
        statistic: r,
        p_value: p,
        effect_size: None,
        df: Some(df),
    })
}

/// Cohen's d with pooled standard deviation; positive when `a` has the
/// larger mean.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    for g in [a, b] {
        if g.len() < 2 {
            return Err(StatsError::TooFewPoints { need: 2, got: g.len() });
        }
        check_finite(g)?;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(StatsError::ZeroPooledVariance);
    }
    Ok((mean(a) - mean(b)) / pooled)
}

/// Cohen's d for paired samples: mean of `y − x` over its std.
pub fn cohens_d_paired(pairs: &[(f64, f64)]) -> Result<f64, StatsError> {
    if pairs.len() < 2 {
        return Err(StatsError::TooFewPairs(pairs.len()));
    }
    let d: Vec<f64> = pairs.iter().map(|(x, y)| y - x).collect();
    check_finite(&d)?;
    let sd = sample_std(&d);
    if sd == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(mean(&d) / sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn t_examples() {
        let r = paired_t_test(&[(1.0, 2.0), (2.0, 4.0), (3.0, 5.0), (4.0, 7.0)]).unwrap();
        assert!(close(r.statistic, 4.898_979_485_566_356, 1e-12));
        assert_eq!(r.df, Some(3.0));
        assert!(close(r.p_value, 0.0163, 1e-4), "{}", r.p_value);
        let same = paired_t_test(&[(0.5, 0.5), (0.7, 0.7), (0.1, 0.1)]).unwrap();
        assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
        assert_eq!(paired_t_test(&[(1.0, 2.0)]), Err(StatsError::TooFewPairs(1)));
    }

    #[test]
    fn chi_examples() {
        let r = chi_square_2x2([[10, 10], [10, 10]], false).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = chi_square_2x2([[20, 10], [10, 20]], false).unwrap();
        assert!(close(r.statistic, 20.0 / 3.0, 1e-12));
        assert!(close(r.p_value, 0.0098, 1e-4));
        assert_eq!(chi_square_2x2([[0, 0], [3, 4]], false), Err(StatsError::DegenerateMargin));
        let y = chi_square_2x2([[20, 10], [10, 20]], true).unwrap();
        assert!(close(y.statistic, 4.0 * 4.5 * 4.5 / 15.0, 1e-12));
    }

    #[test]
    fn pearson_and_d_examples() {
        let xs = [1.0, 2.0, 3.0, 5.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert_eq!(pearson_r(&xs, &ys).unwrap().statistic, 1.0);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_eq!(pearson_r(&xs, &neg).unwrap().statistic, -1.0);
        assert_eq!(pearson_r(&xs, &[1.0; 5]), Err(StatsError::ZeroVariance));
        assert_eq!(pearson_r(&xs[..2], &ys[..2]), Err(StatsError::TooFewPoints { need: 3, got: 2 }));
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0]), Ok(-2.0));
        assert_eq!(cohens_d(&[1.0, 3.0], &[1.0, 3.0]), Ok(0.0));
        assert_eq!(cohens_d(&[1.0, 1.0], &[2.0, 2.0]), Err(StatsError::ZeroPooledVariance));
    }

    proptest! {
        #[test]
        fn chi_square_transpose_and_swap(a in 1u64..50, b in 1u64..50, c in 1u64..50, d in 1u64..50) {
            let base = chi_square_2x2([[a, b], [c, d]], false).unwrap().statistic;
            let swapped = chi_square_2x2([[d, c], [b, a]], false).unwrap().statistic;
            let transposed = chi_square_2x2([[a, c], [b, d]], false).unwrap().statistic;
            prop_assert!(close(base, swapped, 1e-9 * base.max(1.0)));
            prop_assert!(close(base, transposed, 1e-9 * base.max(1.0)));
        }

        #[test]
        fn pearson_affine(xs in prop::collection::vec(-100.0f64..100.0, 3..30), seed in any::<u64>(), scale in 0.1f64..10.0, shift in -50.0f64..50.0) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.3 + ((seed.wrapping_mul(i as u64 + 7) % 1000) as f64)).collect();
            if let Ok(r) = pearson_r(&xs, &ys) {
                let ys2: Vec<f64> = ys.iter().map(|y| scale * y + shift).collect();
                let r2 = pearson_r(&xs, &ys2).unwrap();
                prop_assert!(close(r.statistic, r2.statistic, 1e-9));
                let ys3: Vec<f64> = ys.iter().map(|y| -scale * y).collect();
                prop_assert!(close(r.statistic, -pearson_r(&xs, &ys3).unwrap().statistic, 1e-9));
            }
        }

        #[test]
        fn cohens_d_antisymmetric(a in prop::collection::vec(-10.0f64..10.0, 2..20), b in prop::collection::vec(-10.0f64..10.0, 2..20)) {
            if let (Ok(x), Ok(y)) = (cohens_d(&a, &b), cohens_d(&b, &a)) {
                prop_assert!(close(x, -y, 1e-12));
            }
        }

        #[test]
        fn t_of_identical_is_zero(xs in prop::collection::vec(-10.0f64..10.0, 2..20)) {
            let pairs: Vec<_> = xs.iter().map(|x| (*x, *x)).collect();
            let r = paired_t_test(&pairs).unwrap();
            prop_assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        }
    }
}
