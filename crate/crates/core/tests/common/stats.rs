use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson goodness-of-fit p-value of `counts` against `probs`.
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(stat)
}

/// `k` successes out of `n` lie within three binomial standard deviations
/// of `n p`.
pub fn within_3_sigma(k: usize, n: usize, p: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (k as f64 - mean).abs() <= 3.0 * sd
}

/// `exp(x)` by its Taylor series with compensated summation; accurate for
/// small `|x|` and independent of the platform `exp`.
pub fn series_exp(x: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut term = 1.0f64;
    for n in 1..60 {
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        term *= x / n as f64;
    }
    sum
}

/// Min-max normalization followed by a temperature softmax, computed with
/// the series exponential.
pub fn gamma_softmax_oracle(row: &[i64], gamma: f64) -> Vec<f64> {
    let min = *row.iter().min().unwrap() as f64;
    let max = *row.iter().max().unwrap() as f64;
    if min == max {
        return vec![1.0 / row.len() as f64; row.len()];
    }
    let w: Vec<f64> = row.iter().map(|&f| series_exp((f as f64 - min) / (max - min) / gamma)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}
