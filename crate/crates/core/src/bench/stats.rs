//! Aggregation of iteration times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no samples to summarize")]
pub struct EmptySamples;

/// How per-iteration samples of several runs are reduced to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean over every sample, with a normal-approximation 95% interval.
    Mean95,
    /// Median of the per-run medians, with min/max over all samples.
    MedianOfRunMedians,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub ci95_half_width: f64,
    pub samples: usize,
}

impl StatSummary {
    /// The headline value for `aggregation`.
    pub fn value(&self, aggregation: Aggregation) -> f64 {
        match aggregation {
            Aggregation::Mean95 => self.mean,
            Aggregation::MedianOfRunMedians => self.median,
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median of `xs`; the mean of the two middle values for even counts.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `1.96·s/√n` with the sample standard deviation; 0 for one sample.
pub fn ci95_half_width(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    1.96 * (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
}

/// Summarizes the samples of each run (`runs[r]` holds run `r`'s
/// iteration times).
pub fn summarize(runs: &[Vec<f64>], aggregation: Aggregation) -> Result<StatSummary, EmptySamples> {
    let all: Vec<f64> = runs.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(EmptySamples);
    }
    let median = match aggregation {
        Aggregation::Mean95 => median(&all),
        Aggregation::MedianOfRunMedians => {
            let per_run: Vec<f64> = runs.iter().filter(|r| !r.is_empty()).map(|r| median(r)).collect();
            median(&per_run)
        }
    };
    Ok(StatSummary {
        mean: mean(&all),
        median,
        min: all.iter().copied().fold(f64::INFINITY, f64::min),
        max: all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ci95_half_width: ci95_half_width(&all),
        samples: all.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s = summarize(&[vec![1.0, 2.0, 3.0, 4.0, 100.0]], Aggregation::Mean95).unwrap();
        assert_eq!(s.median, 3.0);
        let s = summarize(&[vec![5.0; 3]], Aggregation::Mean95).unwrap();
        assert_eq!((s.mean, s.ci95_half_width), (5.0, 0.0));
        let s = summarize(&[(1..=10).map(f64::from).collect()], Aggregation::Mean95).unwrap();
        assert_eq!(s.mean, 5.5);
        assert!(summarize(&[vec![]], Aggregation::Mean95).is_err());
    }

    #[test]
    fn median_of_run_medians() {
        let runs = [vec![1.0, 9.0, 2.0], vec![4.0, 5.0, 6.0], vec![100.0, 3.0, 3.0]];
        let s = summarize(&runs, Aggregation::MedianOfRunMedians).unwrap();
        // run medians 2, 5, 3
        assert_eq!(s.median, 3.0);
        assert_eq!((s.min, s.max, s.samples), (1.0, 100.0, 9));
    }
}
