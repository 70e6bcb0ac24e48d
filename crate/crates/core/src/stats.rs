//! Evaluation metric and the statistical comparison machinery: RMSE, the
//! paired two-sided Student t-test with win/tie/loss tabulation, Friedman
//! mean ranks and the Nemenyi critical difference.
//!
//! The t-distribution tail is evaluated through the regularized incomplete
//! beta function (Lentz continued fraction), keeping the crate free of a
//! statistics dependency and the results bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Root mean squared error.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidParameter("rmse of empty vectors".into()));
    }
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "rmse length mismatch: {} vs {}",
            y.len(),
            y_hat.len()
        )));
    }
    let mse = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64;
    Ok(mse.sqrt())
}

pub mod special {
    //! Numerically robust pieces shared by the distribution code.

    /// Lanczos approximation of ln Γ(x) for x > 0, |error| < 2e-10.
    pub fn ln_gamma(x: f64) -> f64 {
        const COEFFS: [f64; 6] = [
            76.18009172947146,
            -86.50532032941677,
            24.01409824083091,
            -1.231739572450155,
            0.1208650973866179e-2,
            -0.5395239384953e-5,
        ];
        let mut y = x;
        let tmp = x + 5.5;
        let tmp = tmp - (x + 0.5) * tmp.ln();
        let mut ser = 1.000000000190015;
        for c in COEFFS {
            y += 1.0;
            ser += c / y;
        }
        -tmp + (2.5066282746310005 * ser / x).ln()
    }

    /// Continued-fraction core of the incomplete beta function (Lentz).
    fn betacf(a: f64, b: f64, x: f64) -> f64 {
        const MAX_ITER: usize = 300;
        const EPS: f64 = 3.0e-14;
        const FPMIN: f64 = 1.0e-300;

        let qab = a + b;
        let qap = a + 1.0;
        let qam = a - 1.0;
        let mut c = 1.0;
        let mut d = 1.0 - qab * x / qap;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        d = 1.0 / d;
        let mut h = d;
        for m in 1..=MAX_ITER {
            let m = m as f64;
            let m2 = 2.0 * m;
            let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = 1.0 + aa / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            h *= d * c;
            let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = 1.0 + aa / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }

    /// Regularized incomplete beta function I_x(a, b), accurate to ~1e-10.
    pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let ln_front =
            ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
        let front = ln_front.exp();
        if x < (a + 1.0) / (a + b + 2.0) {
            front * betacf(a, b, x) / a
        } else {
            1.0 - front * betacf(b, a, 1.0 - x) / b
        }
    }

    /// Two-sided tail probability of Student's t with `df` degrees of freedom.
    pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
        incomplete_beta(0.5 * df, 0.5, df / (df + t * t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
}

/// Paired two-sided Student t-test on `d = a - b`.
///
/// When the differences have zero variance the distribution degenerates:
/// p = 1 for identical samples, p = 0 for a constant nonzero difference.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired t-test length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "paired t-test needs at least 2 pairs".into(),
        ));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();

    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTestResult { t: 0.0, p: 1.0 }
        } else {
            TTestResult {
                t: mean.signum() * f64::INFINITY,
                p: 0.0,
            }
        });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let p = special::student_t_two_sided_p(t, (n - 1) as f64);
    Ok(TTestResult { t, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Tie,
    Loss,
}

/// One augmented-vs-native comparison, from the augmented side's perspective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub native_rmse_mean: f64,
    pub aug_rmse_mean: f64,
    pub p_value: f64,
    pub outcome: Outcome,
}

impl ComparisonCell {
    /// Applies the outcome rule: tie iff p >= 0.05, otherwise win iff the
    /// augmented mean is lower.
    pub fn new(native_rmse_mean: f64, aug_rmse_mean: f64, p_value: f64) -> Self {
        let outcome = if p_value >= SIGNIFICANCE_LEVEL {
            Outcome::Tie
        } else if aug_rmse_mean < native_rmse_mean {
            Outcome::Win
        } else {
            Outcome::Loss
        };
        ComparisonCell {
            native_rmse_mean,
            aug_rmse_mean,
            p_value,
            outcome,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WinTieLoss {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

pub fn win_tie_loss(cells: &[ComparisonCell]) -> WinTieLoss {
    let mut out = WinTieLoss::default();
    for cell in cells {
        match cell.outcome {
            Outcome::Win => out.wins += 1,
            Outcome::Tie => out.ties += 1,
            Outcome::Loss => out.losses += 1,
        }
    }
    out
}

/// Mean ranks per variant plus the critical difference at the 5% level.
/// Rank 1 is best (lowest RMSE).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub mean_ranks: Vec<f64>,
    pub n_datasets: usize,
    pub cd: f64,
}

/// Friedman omnibus statistics. The chi-square form and the Iman-Davenport F
/// correction are both reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanStat {
    pub chi_square: f64,
    pub iman_davenport_f: f64,
}

/// Ranks one block's values ascending, assigning tied values their average
/// rank. Ranks are 1-based.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Per-block ascending ranks (average ranks on ties), mean rank per variant,
/// and the Friedman statistics. `table` rows are blocks (datasets), columns
/// are variants.
pub fn friedman_mean_ranks(table: &[Vec<f64>]) -> Result<(RankSummary, FriedmanStat)> {
    let n = table.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "friedman test needs at least 2 datasets".into(),
        ));
    }
    let k = table[0].len();
    if k < 2 {
        return Err(Error::InvalidParameter(
            "friedman test needs at least 2 variants".into(),
        ));
    }
    if table.iter().any(|row| row.len() != k) {
        return Err(Error::DimensionMismatch(
            "ragged rank table".into(),
        ));
    }

    let mut rank_sums = vec![0.0; k];
    for row in table {
        for (sum, rank) in rank_sums.iter_mut().zip(average_ranks(row)) {
            *sum += rank;
        }
    }
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|s| s / n as f64).collect();

    let nf = n as f64;
    let kf = k as f64;
    let chi_square = 12.0 * nf / (kf * (kf + 1.0))
        * mean_ranks
            .iter()
            .map(|r| (r - (kf + 1.0) / 2.0).powi(2))
            .sum::<f64>();
    let denom = nf * (kf - 1.0) - chi_square;
    let iman_davenport_f = if denom <= 0.0 {
        f64::INFINITY
    } else {
        (nf - 1.0) * chi_square / denom
    };

    let cd = nemenyi_cd(k, n, SIGNIFICANCE_LEVEL)?;
    Ok((
        RankSummary {
            mean_ranks,
            n_datasets: n,
            cd,
        },
        FriedmanStat {
            chi_square,
            iman_davenport_f,
        },
    ))
}

/// Critical values of the studentized range statistic divided by sqrt(2),
/// alpha = 0.05, for k = 2..=10 compared variants.
const NEMENYI_Q_05: [f64; 9] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
];

/// Nemenyi critical difference `q_alpha(k) * sqrt(k(k+1) / (6 n))`.
/// Only the alpha = 0.05 table is embedded.
pub fn nemenyi_cd(k: usize, n_datasets: usize, alpha: f64) -> Result<f64> {
    if alpha != SIGNIFICANCE_LEVEL {
        return Err(Error::InvalidParameter(format!(
            "only alpha = 0.05 is tabulated, got {alpha}"
        )));
    }
    if !(2..=10).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "nemenyi q values are tabulated for 2..=10 variants, got {k}"
        )));
    }
    if n_datasets < 2 {
        return Err(Error::InvalidParameter(
            "nemenyi cd needs at least 2 datasets".into(),
        ));
    }
    let q = NEMENYI_Q_05[k - 2];
    let k = k as f64;
    Ok(q * (k * (k + 1.0) / (6.0 * n_datasets as f64)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_relative_eq!(
            rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            12.5f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_is_homogeneous() {
        let y = [1.0, -2.0, 3.5];
        let y_hat = [0.5, 1.0, 2.0];
        let base = rmse(&y, &y_hat).unwrap();
        let c = -3.25;
        let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
        let yh: Vec<f64> = y_hat.iter().map(|v| c * v).collect();
        assert_relative_eq!(rmse(&ys, &yh).unwrap(), c.abs() * base, epsilon = 1e-12);
    }

    #[test]
    fn t_test_identical_samples() {
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn t_test_hand_checked_example() {
        // d = [2, 4, 6]: t = 2*sqrt(3), df = 2
        let r = paired_t_test(&[3.0, 6.0, 9.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(r.t, 3.4641, epsilon = 1e-3);
        assert_relative_eq!(r.p, 0.0742, epsilon = 1e-3);
    }

    #[test]
    fn t_test_antisymmetry() {
        let a = [1.0, 5.0, 2.0, 8.0];
        let b = [2.0, 1.0, 4.0, 3.0];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_relative_eq!(ab.t, -ba.t, epsilon = 1e-12);
        assert_relative_eq!(ab.p, ba.p, epsilon = 1e-12);
    }

    #[test]
    fn t_test_degenerate_nonzero_difference() {
        let r = paired_t_test(&[2.0, 2.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.t.is_infinite() && r.t > 0.0);
    }

    /// Simpson-rule integration of the t density: the independent oracle for
    /// the incomplete-beta route. Integrates the finite central interval
    /// [-|t|, |t|] so fat tails (small df) cost no truncation error.
    fn t_two_sided_p_by_quadrature(t: f64, df: f64) -> f64 {
        let norm = (special::ln_gamma((df + 1.0) / 2.0)
            - special::ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln())
        .exp();
        let pdf = |x: f64| norm * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        let (a, b) = (-t.abs(), t.abs());
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mut sum = pdf(a) + pdf(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            sum += pdf(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        1.0 - sum * h / 3.0
    }

    #[test]
    fn t_tail_matches_integration_oracle() {
        for &(t, df) in &[
            (0.5, 1.0),
            (1.0, 2.0),
            (3.4641016151, 2.0),
            (2.262, 9.0),
            (0.1, 9.0),
            (4.0, 30.0),
        ] {
            let beta_route = special::student_t_two_sided_p(t, df);
            let quad_route = t_two_sided_p_by_quadrature(t, df);
            assert_relative_eq!(beta_route, quad_route, epsilon = 1e-6);
        }
    }

    #[test]
    fn win_tie_loss_counts() {
        assert_eq!(win_tie_loss(&[]), WinTieLoss::default());

        let one_win = ComparisonCell::new(1.0, 0.5, 0.04);
        assert_eq!(one_win.outcome, Outcome::Win);
        assert_eq!(win_tie_loss(&[one_win]).wins, 1);

        // the shape of the paper's linear-regression column: 29 wins, 4 ties
        let mut cells = Vec::new();
        for _ in 0..29 {
            cells.push(ComparisonCell::new(0.9, 0.4, 0.001));
        }
        for _ in 0..4 {
            cells.push(ComparisonCell::new(0.6, 0.55, 0.5));
        }
        let wtl = win_tie_loss(&cells);
        assert_eq!((wtl.losses, wtl.ties, wtl.wins), (0, 4, 29));
    }

    #[test]
    fn tie_rule_uses_threshold() {
        let c = ComparisonCell::new(1.0, 0.5, 0.05);
        assert_eq!(c.outcome, Outcome::Tie);
        let c = ComparisonCell::new(0.5, 1.0, 0.01);
        assert_eq!(c.outcome, Outcome::Loss);
    }

    #[test]
    fn friedman_constant_ordering() {
        let table = vec![vec![1.0, 2.0], vec![0.1, 0.2], vec![5.0, 9.0]];
        let (ranks, _) = friedman_mean_ranks(&table).unwrap();
        assert_eq!(ranks.mean_ranks, vec![1.0, 2.0]);
    }

    #[test]
    fn friedman_average_rank_on_ties() {
        let table = vec![vec![1.0, 1.0], vec![1.0, 2.0]];
        let (ranks, _) = friedman_mean_ranks(&table).unwrap();
        assert_eq!(ranks.mean_ranks, vec![(1.5 + 1.0) / 2.0, (1.5 + 2.0) / 2.0]);
    }

    #[test]
    fn nemenyi_reference_values() {
        assert_relative_eq!(nemenyi_cd(5, 33, 0.05).unwrap(), 1.0619, epsilon = 1e-3);
        // k = 2 collapses to 1.96 / sqrt(n)
        assert_relative_eq!(
            nemenyi_cd(2, 25, 0.05).unwrap(),
            1.960 / 5.0,
            epsilon = 1e-12
        );
        // quadrupling n halves the cd
        let cd1 = nemenyi_cd(4, 10, 0.05).unwrap();
        let cd2 = nemenyi_cd(4, 40, 0.05).unwrap();
        assert_relative_eq!(cd1, 2.0 * cd2, epsilon = 1e-12);
        assert!(nemenyi_cd(11, 10, 0.05).is_err());
        assert!(nemenyi_cd(5, 10, 0.01).is_err());
    }

    proptest! {
        #[test]
        fn rank_rows_sum_to_k_times_k_plus_1_over_2(
            rows in proptest::collection::vec(
                proptest::collection::vec(0.0f64..10.0, 4),
                2..12,
            ),
        ) {
            let k = 4.0f64;
            for row in &rows {
                let ranks = average_ranks(row);
                let sum: f64 = ranks.iter().sum();
                prop_assert!((sum - k * (k + 1.0) / 2.0).abs() < 1e-9);
            }
            // mean ranks likewise sum to k(k+1)/2
            let (summary, _) = friedman_mean_ranks(&rows).unwrap();
            let total: f64 = summary.mean_ranks.iter().sum();
            prop_assert!((total - k * (k + 1.0) / 2.0).abs() < 1e-9);
        }

        #[test]
        fn ranks_match_sort_based_oracle(
            rows in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..5.0, 3),
                2..8,
            ),
        ) {
            // oracle: rank of v = 1 + count(strictly smaller) + count(equal before it)/2,
            // computed pairwise without sorting
            for row in &rows {
                let ranks = average_ranks(row);
                for (i, &v) in row.iter().enumerate() {
                    let smaller = row.iter().filter(|&&o| o < v).count() as f64;
                    let equal = row.iter().filter(|&&o| o == v).count() as f64;
                    let expected = smaller + (equal + 1.0) / 2.0;
                    prop_assert!((ranks[i] - expected).abs() < 1e-9);
                }
            }
        }
    }
}
