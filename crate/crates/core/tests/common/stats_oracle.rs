//! Integer-arithmetic statistics oracle. Samples are whole multiples of
//! `2^-UNIT_BITS`, generated so that every quantity the float code forms
//! on the way is exactly representable; agreement is then bit-for-bit.

use rand::Rng;

pub const UNIT_BITS: i32 = 12;

fn unit() -> f64 {
    2f64.powi(-UNIT_BITS)
}

/// Samples in units, sum divisible by the total count.
pub fn random_runs(rng: &mut impl Rng) -> Vec<Vec<i64>> {
    let nruns = rng.random_range(1..=6);
    let mut runs: Vec<Vec<i64>> = (0..nruns)
        .map(|_| {
            let n = rng.random_range(1..=12);
            (0..n).map(|_| rng.random_range(100..(1 << 18))).collect()
        })
        .collect();
    let total: usize = runs.iter().map(Vec::len).sum();
    let sum: i64 = runs.iter().flatten().sum();
    *runs.last_mut().unwrap().last_mut().unwrap() -= sum % total as i64;
    runs
}

pub fn to_seconds(runs: &[Vec<i64>]) -> Vec<Vec<f64>> {
    runs.iter().map(|r| r.iter().map(|&u| u as f64 * unit()).collect()).collect()
}

/// Median in half units.
fn median2(v: &[i64]) -> i64 {
    let mut v = v.to_vec();
    v.sort();
    let n = v.len();
    if n % 2 == 1 {
        2 * v[n / 2]
    } else {
        v[n / 2 - 1] + v[n / 2]
    }
}

pub struct OracleStats {
    pub mean: f64,
    pub median_all: f64,
    pub median_of_medians: f64,
    pub min: f64,
    pub max: f64,
    pub ci95: f64,
    pub samples: usize,
}

pub fn oracle(runs: &[Vec<i64>]) -> OracleStats {
    let all: Vec<i64> = runs.iter().flatten().copied().collect();
    let n = all.len() as i64;
    let sum: i64 = all.iter().sum();
    assert_eq!(sum % n, 0);
    let m = sum / n;
    let ss: i128 = all.iter().map(|&x| ((x - m) as i128).pow(2)).sum();
    let ci95 = if n < 2 {
        0.0
    } else {
        let var = ss as f64 * unit() * unit() / (n - 1) as f64;
        1.96 * var.sqrt() / (n as f64).sqrt()
    };
    // medians of half-unit values are quarter units
    let run_medians: Vec<i64> = runs.iter().map(|r| median2(r)).collect();
    OracleStats {
        mean: m as f64 * unit(),
        median_all: median2(&all) as f64 * unit() / 2.0,
        median_of_medians: median2(&run_medians) as f64 * unit() / 4.0,
        min: *all.iter().min().unwrap() as f64 * unit(),
        max: *all.iter().max().unwrap() as f64 * unit(),
        ci95,
        samples: all.len(),
    }
}
