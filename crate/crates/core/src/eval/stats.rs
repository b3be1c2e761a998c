use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::classifiers::Ranking;
use crate::data::LabelId;
use crate::error::{Error, Result};

/// 1-based position of each truth in its ranking.
pub fn rank_positions(rankings: &[Ranking], truths: &[LabelId]) -> Result<Vec<usize>> {
    if rankings.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} rankings but {} truths",
            rankings.len(),
            truths.len()
        )));
    }
    rankings
        .iter()
        .zip(truths)
        .enumerate()
        .map(|(k, (r, &t))| {
            r.rank_of(t).ok_or_else(|| {
                Error::invalid(format!("truth label {} missing from ranking {k}", t.0))
            })
        })
        .collect()
}

/// Mean 1-based position of the true label.
pub fn mean_rank(rankings: &[Ranking], truths: &[LabelId]) -> Result<f64> {
    if rankings.is_empty() {
        return Err(Error::invalid("mean rank of no rankings"));
    }
    let pos = rank_positions(rankings, truths)?;
    Ok(pos.iter().sum::<usize>() as f64 / pos.len() as f64)
}

/// Fraction of positions within the top `k`.
pub fn topk_accuracy(positions: &[usize], k: usize) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    positions.iter().filter(|&&p| p <= k).count() as f64 / positions.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub df: f64,
}

/// Paired two-sided Student t-test on `a - b`.
///
/// The p-value is `I_{df/(df+t^2)}(df/2, 1/2)`, the regularized incomplete
/// beta form of `2 * (1 - F_t(|t|))`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::DegenerateTest(format!(
            "need at least 2 pairs, got {n}"
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite paired difference".into()));
    }
    if d.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateTest(
            "all paired differences are zero".into(),
        ));
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let df = nf - 1.0;
    if var == 0.0 {
        // Constant nonzero difference.
        return Ok(TTest {
            t: mean.signum() * f64::INFINITY,
            p: 0.0,
            df,
        });
    }
    let t = mean / (var / nf).sqrt();
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(TTest { t, p, df })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two-sided p-value by integrating the t density with Simpson's rule.
    fn p_by_quadrature(t: f64, df: f64) -> f64 {
        let ln_norm = statrs::function::gamma::ln_gamma((df + 1.0) / 2.0)
            - statrs::function::gamma::ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        let pdf = |x: f64| (ln_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
        let n = 200_000;
        let h = t.abs() / n as f64;
        let mut s = pdf(0.0) + pdf(t.abs());
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(i as f64 * h);
        }
        1.0 - 2.0 * s * h / 3.0
    }

    #[test]
    fn textbook_three_pairs() {
        let r = paired_ttest(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((r.t - 3.4641).abs() < 1e-3);
        // df = 2 has the closed form p = 1 - t / sqrt(t^2 + 2).
        let closed = 1.0 - r.t / (r.t * r.t + 2.0).sqrt();
        assert!((r.p - closed).abs() < 1e-12);
        assert!((r.p - 0.0742).abs() < 5e-3);
    }

    #[test]
    fn zero_t_gives_unit_p() {
        let r = paired_ttest(&[1.0, -1.0, 2.0, -2.0], &[0.0; 4]).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_lists_are_degenerate() {
        let a = [0.3, 0.5, 0.9];
        assert!(matches!(
            paired_ttest(&a, &a),
            Err(Error::DegenerateTest(_))
        ));
        assert!(matches!(
            paired_ttest(&[1.0], &[0.0]),
            Err(Error::DegenerateTest(_))
        ));
        assert!(paired_ttest(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn constant_shift_is_certain() {
        let r = paired_ttest(&[1.0, 2.0, 3.0], &[0.5, 1.5, 2.5]).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.t.is_infinite() && r.t > 0.0);
    }

    #[test]
    fn matches_quadrature_oracle() {
        let cases: [(&[f64], &[f64]); 3] = [
            (
                &[0.71, 0.64, 0.69, 0.75, 0.58, 0.66],
                &[0.62, 0.66, 0.55, 0.70, 0.52, 0.61],
            ),
            (
                &[1.0, 2.5, 0.5, 3.0, 2.0, 1.0, 0.2, 1.4, 2.2, 0.9],
                &[0.0; 10],
            ),
            (&[0.2, -0.1, 0.4, 0.05], &[0.0; 4]),
        ];
        for (a, b) in cases {
            let r = paired_ttest(a, b).unwrap();
            let oracle = p_by_quadrature(r.t, r.df);
            assert!((r.p - oracle).abs() < 1e-7, "{} vs {}", r.p, oracle);
        }
    }

    #[test]
    fn mean_rank_cases() {
        let r = |ls: &[usize]| {
            Ranking::from_scores(
                ls.iter()
                    .enumerate()
                    .map(|(i, &l)| (LabelId(l), i as f64))
                    .collect(),
            )
        };
        let rankings = vec![r(&[3, 1, 2]), r(&[0, 1, 2])];
        assert_eq!(
            mean_rank(&rankings, &[LabelId(3), LabelId(0)]).unwrap(),
            1.0
        );
        assert_eq!(
            mean_rank(&rankings, &[LabelId(3), LabelId(2)]).unwrap(),
            2.0
        );
        assert!(mean_rank(&rankings, &[LabelId(9), LabelId(0)]).is_err());
        assert!(mean_rank(&rankings, &[LabelId(3)]).is_err());
    }

    #[test]
    fn topk_bounds() {
        let pos = [1, 3, 7, 2];
        assert_eq!(topk_accuracy(&pos, 1), 0.25);
        assert_eq!(topk_accuracy(&pos, 3), 0.75);
        assert_eq!(topk_accuracy(&pos, 7), 1.0);
    }

    proptest! {
        #[test]
        fn swapping_negates_t(a in proptest::collection::vec(-5.0f64..5.0, 3..20), seed in any::<u64>()) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v * 0.5 + ((seed >> (i % 60)) & 3) as f64 * 0.1).collect();
            if let (Ok(x), Ok(y)) = (paired_ttest(&a, &b), paired_ttest(&b, &a)) {
                prop_assert_eq!(x.t, -y.t);
                prop_assert!((x.p - y.p).abs() <= 1e-15);
                prop_assert!((0.0..=1.0).contains(&x.p));
            }
        }

        #[test]
        fn mean_rank_matches_linear_scan(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut rng = crate::rng::seeded_rng(seed);
            let mut rankings = Vec::new();
            let mut truths = Vec::new();
            let mut expect = 0usize;
            for k in 0..7 {
                let mut labels: Vec<usize> = (0..9).collect();
                labels.shuffle(&mut rng);
                let truth = LabelId((k * 5 + seed as usize) % 9);
                for (pos, &l) in labels.iter().enumerate() {
                    if l == truth.0 {
                        expect += pos + 1;
                    }
                }
                rankings.push(Ranking::from_scores(labels.iter().enumerate().map(|(i, &l)| (LabelId(l), i as f64)).collect()));
                truths.push(truth);
            }
            prop_assert_eq!(mean_rank(&rankings, &truths).unwrap(), expect as f64 / 7.0);
        }
    }
}
