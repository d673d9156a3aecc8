//! Empirical statistics used by the Monte Carlo estimators: the
//! Kolmogorov–Smirnov distance against an analytic cdf and plug-in mutual
//! information with a bootstrap confidence interval.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Kolmogorov–Smirnov distance between the empirical cdf of `samples` and
/// `cdf`, where `n_total - samples.len()` further observations are known to
/// lie beyond `horizon` (right censoring). The supremum is taken over
/// `[0, horizon]`.
pub fn ks_distance_censored<F: Fn(f64) -> f64>(
    samples: &[f64],
    n_total: usize,
    horizon: f64,
    cdf: F,
) -> f64 {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|t| *t <= horizon).collect();
    sorted.sort_by(f64::total_cmp);
    let n = n_total as f64;
    let mut d: f64 = 0.0;
    for (i, &t) in sorted.iter().enumerate() {
        let f = cdf(t);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    let at_horizon = sorted.len() as f64 / n;
    d.max((cdf(horizon) - at_horizon).abs())
}

/// Kolmogorov–Smirnov distance for uncensored samples.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    ks_distance_censored(samples, samples.len(), f64::INFINITY, cdf)
}

/// Plug-in estimate of mutual information with a percentile bootstrap
/// interval.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MiEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

impl MiEstimate {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

fn plug_in_from_counts(cells: &[(usize, usize)], counts: &[u64], nx: usize, ny: usize) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let mut cx = vec![0u64; nx];
    let mut cy = vec![0u64; ny];
    for (&(x, y), &c) in cells.iter().zip(counts) {
        cx[x] += c;
        cy[y] += c;
    }
    let n = n as f64;
    let mut mi = 0.0;
    for (&(x, y), &c) in cells.iter().zip(counts) {
        if c > 0 {
            let c = c as f64;
            mi += c / n * (c * n / (cx[x] as f64 * cy[y] as f64)).ln();
        }
    }
    mi.max(0.0)
}

/// Plug-in mutual information (nats) of paired discrete observations, with
/// a percentile bootstrap interval from `resamples` multinomial resamples.
pub fn plug_in_mi(pairs: &[(usize, u64)], resamples: usize, seed: u64) -> MiEstimate {
    let mut ids_x: HashMap<usize, usize> = HashMap::new();
    let mut ids_y: HashMap<u64, usize> = HashMap::new();
    let mut cell_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut cells = Vec::new();
    let mut counts = Vec::new();
    let mut cell_of_pair = Vec::with_capacity(pairs.len());
    for &(x, y) in pairs {
        let nx = ids_x.len();
        let xi = *ids_x.entry(x).or_insert(nx);
        let ny = ids_y.len();
        let yi = *ids_y.entry(y).or_insert(ny);
        let next = cells.len();
        let c = *cell_ids.entry((xi, yi)).or_insert(next);
        if c == cells.len() {
            cells.push((xi, yi));
            counts.push(0u64);
        }
        counts[c] += 1;
        cell_of_pair.push(c);
    }
    let (nx, ny) = (ids_x.len(), ids_y.len());
    let value = plug_in_from_counts(&cells, &counts, nx, ny);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot = Vec::with_capacity(resamples);
    let mut resampled = vec![0u64; cells.len()];
    for _ in 0..resamples {
        resampled.iter_mut().for_each(|c| *c = 0);
        for _ in 0..pairs.len() {
            let i = rng.random_range(0..pairs.len());
            resampled[cell_of_pair[i]] += 1;
        }
        boot.push(plug_in_from_counts(&cells, &resampled, nx, ny));
    }
    boot.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = if boot.is_empty() {
        (value, value)
    } else {
        let lo = ((0.025 * boot.len() as f64).floor() as usize).min(boot.len() - 1);
        let hi = ((0.975 * boot.len() as f64).ceil() as usize).min(boot.len() - 1);
        (boot[lo], boot[hi])
    };
    MiEstimate { value, ci_low, ci_high, samples: pairs.len() }
}
