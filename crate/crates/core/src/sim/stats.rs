//! Pairwise policy comparisons: Welch's two-sample t test on opportunity
//! cost and a normal-approximation confidence interval on the difference of
//! correct-selection proportions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::allocation::PolicyConfig;
use crate::error::{Error, Result};

use super::metrics::CellKey;

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub opportunity_cost: f64,
    pub correct: bool,
}

/// How policy A compares with policy B on one measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Better,
    Worse,
    Indistinguishable,
}

impl Verdict {
    pub fn mirrored(self) -> Self {
        match self {
            Verdict::Better => Verdict::Worse,
            Verdict::Worse => Verdict::Better,
            Verdict::Indistinguishable => Verdict::Indistinguishable,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Better => "better",
            Verdict::Worse => "worse",
            Verdict::Indistinguishable => "indistinguishable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub n_a: usize,
    pub n_b: usize,
    pub mean_oc_a: f64,
    pub mean_oc_b: f64,
    /// mean_oc_a - mean_oc_b
    pub oc_difference: f64,
    pub welch_t: f64,
    pub welch_df: f64,
    /// two-sided
    pub p_value: f64,
    /// lower opportunity cost is better
    pub oc_verdict: Verdict,
    pub correct_a: usize,
    pub correct_b: usize,
    /// p̂_a - p̂_b
    pub proportion_difference: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub correct_verdict: Verdict,
}

/// Policy `a` compared against policy `b` within one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub cell: CellKey,
    pub a: PolicyConfig,
    pub b: PolicyConfig,
    pub result: ComparisonResult,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Compares policy A against policy B at the same stage of the same cell.
pub fn compare(a: &[RunOutcome], b: &[RunOutcome]) -> Result<ComparisonResult> {
    for n in [a.len(), b.len()] {
        if n < 2 {
            return Err(Error::InsufficientData { n });
        }
    }
    let oc_a: Vec<f64> = a.iter().map(|o| o.opportunity_cost).collect();
    let oc_b: Vec<f64> = b.iter().map(|o| o.opportunity_cost).collect();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mean_a, var_a) = mean_var(&oc_a);
    let (mean_b, var_b) = mean_var(&oc_b);
    let diff = mean_a - mean_b;
    let (sa, sb) = (var_a / na, var_b / nb);
    let se2 = sa + sb;
    let (welch_t, welch_df, p_value) = if se2 > 0.0 {
        let t = diff / se2.sqrt();
        let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (t, df, 2.0 * dist.cdf(-t.abs()))
    } else if diff == 0.0 {
        (0.0, na + nb - 2.0, 1.0)
    } else {
        (diff.signum() * f64::INFINITY, na + nb - 2.0, 0.0)
    };
    let oc_verdict = if p_value < SIGNIFICANCE {
        if diff < 0.0 {
            Verdict::Better
        } else {
            Verdict::Worse
        }
    } else {
        Verdict::Indistinguishable
    };

    let correct_a = a.iter().filter(|o| o.correct).count();
    let correct_b = b.iter().filter(|o| o.correct).count();
    let pa = correct_a as f64 / na;
    let pb = correct_b as f64 / nb;
    let pdiff = pa - pb;
    let z = Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf(1.0 - SIGNIFICANCE / 2.0);
    let half = z * (pa * (1.0 - pa) / na + pb * (1.0 - pb) / nb).sqrt();
    let (ci_low, ci_high) = (pdiff - half, pdiff + half);
    let correct_verdict = if ci_low > 0.0 {
        Verdict::Better
    } else if ci_high < 0.0 {
        Verdict::Worse
    } else {
        Verdict::Indistinguishable
    };

    Ok(ComparisonResult {
        n_a: a.len(),
        n_b: b.len(),
        mean_oc_a: mean_a,
        mean_oc_b: mean_b,
        oc_difference: diff,
        welch_t,
        welch_df,
        p_value,
        oc_verdict,
        correct_a,
        correct_b,
        proportion_difference: pdiff,
        ci_low,
        ci_high,
        correct_verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn outcomes(correct: usize, n: usize, oc: f64) -> Vec<RunOutcome> {
        (0..n)
            .map(|r| RunOutcome {
                opportunity_cost: if r < correct { 0.0 } else { oc },
                correct: r < correct,
            })
            .collect()
    }

    #[test]
    fn identical_samples_are_indistinguishable() {
        let a = outcomes(150, 200, 0.01);
        let r = compare(&a, &a).unwrap();
        assert_eq!(r.oc_difference, 0.0);
        assert_eq!(r.proportion_difference, 0.0);
        assert!(r.ci_low < 0.0 && r.ci_high > 0.0);
        assert_eq!(r.oc_verdict, Verdict::Indistinguishable);
        assert_eq!(r.correct_verdict, Verdict::Indistinguishable);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn proportion_interval_example() {
        let r = compare(&outcomes(171, 200, 0.01), &outcomes(142, 200, 0.01)).unwrap();
        assert!((r.proportion_difference - 0.145).abs() < 1e-12);
        let se = (0.855 * 0.145 / 200.0 + 0.71 * 0.29 / 200.0f64).sqrt();
        let half = 1.959963984540054 * se;
        assert!((r.ci_low - (0.145 - half)).abs() < 1e-9);
        assert!((r.ci_high - (0.145 + half)).abs() < 1e-9);
        assert!((half - 0.0796).abs() < 1e-4);
        assert_eq!(r.correct_verdict, Verdict::Better);
    }

    #[test]
    fn welch_matches_reference_values() {
        // scipy.stats.ttest_ind(a, b, equal_var=False)
        let a: Vec<RunOutcome> = [0.1, 0.4, 0.3, 0.9, 0.2]
            .iter()
            .map(|&x| RunOutcome { opportunity_cost: x, correct: false })
            .collect();
        let b: Vec<RunOutcome> = [0.5, 0.8, 0.7, 0.6, 1.2, 0.9]
            .iter()
            .map(|&x| RunOutcome { opportunity_cost: x, correct: false })
            .collect();
        let r = compare(&a, &b).unwrap();
        assert!((r.welch_t - -2.3412534282143445).abs() < 1e-9, "t = {}", r.welch_t);
        assert!((r.welch_df - 7.64447942360815).abs() < 1e-6, "df = {}", r.welch_df);
        assert!((r.p_value - 0.04875659053944426).abs() < 1e-6, "p = {}", r.p_value);
        assert_eq!(r.oc_verdict, Verdict::Better);
    }

    #[test]
    fn needs_two_runs() {
        let a = outcomes(1, 1, 0.0);
        assert!(matches!(compare(&a, &outcomes(3, 5, 0.1)), Err(Error::InsufficientData { n: 1 })));
    }

    #[test]
    fn zero_variance_difference_is_significant() {
        let r = compare(&outcomes(10, 10, 0.0), &outcomes(0, 10, 0.2)).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert_eq!(r.oc_verdict, Verdict::Better);
    }

    proptest! {
        #[test]
        fn antisymmetric(
            a in prop::collection::vec((0.0f64..0.05, any::<bool>()), 2..40),
            b in prop::collection::vec((0.0f64..0.05, any::<bool>()), 2..40),
        ) {
            let to = |v: &Vec<(f64, bool)>| v.iter().map(|&(oc, c)| RunOutcome { opportunity_cost: if c { 0.0 } else { oc }, correct: c }).collect::<Vec<_>>();
            let (a, b) = (to(&a), to(&b));
            let ab = compare(&a, &b).unwrap();
            let ba = compare(&b, &a).unwrap();
            prop_assert_eq!(ab.oc_difference, -ba.oc_difference);
            prop_assert_eq!(ab.proportion_difference, -ba.proportion_difference);
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            prop_assert_eq!(ab.oc_verdict, ba.oc_verdict.mirrored());
            prop_assert_eq!(ab.correct_verdict, ba.correct_verdict.mirrored());
        }
    }
}
