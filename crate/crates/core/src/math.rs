//! Small numerical helpers shared across modules.

use std::f64::consts::{LN_2, PI};

/// `ln n!` via the log-gamma function.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        libm::lgamma(n as f64 + 1.0)
    }
}

/// Natural log of the complementary error function, accurate far into the
/// tail where `erfc` itself underflows.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 25.0 {
        libm::erfc(x).ln()
    } else {
        let x2 = x * x;
        let inv = 1.0 / (2.0 * x2);
        // Asymptotic series erfc(x) ~ e^{-x²}/(x√π) · (1 - 1/2x² + 3/4x⁴ - 15/8x⁶)
        let series = 1.0 - inv + 3.0 * inv * inv - 15.0 * inv * inv * inv;
        -x2 - (x * PI.sqrt()).ln() + series.ln()
    }
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `x ln x` with the convention `0 ln 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `w ln(w/q) − w + q`, the non-negative per-cell contribution to a KL
/// divergence between two pmfs, accurate when `w ≈ q`.
pub fn kl_cell(w: f64, q: f64) -> f64 {
    if w == 0.0 {
        return q;
    }
    let d = (w - q) / q;
    if d.abs() < 1e-2 {
        // (1 + d) ln(1 + d) − d = Σ_{k≥2} (−d)^k / (k(k−1))
        let mut term = d * d;
        let mut total = 0.0;
        for k in 2..12 {
            total += term / (k * (k - 1)) as f64;
            term *= -d;
        }
        q * total
    } else {
        w * (w / q).ln() - w + q
    }
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    -xlogx(p) - xlogx(1.0 - p)
}

/// Binary entropy in bits.
pub fn binary_entropy_bits(p: f64) -> f64 {
    binary_entropy(p) / LN_2
}

/// Shannon entropy of a pmf in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlogx(x)).sum::<f64>()
}

pub fn ln_poisson_pmf(y: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if y == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    y as f64 * mean.ln() - mean - ln_factorial(y)
}

pub fn poisson_pmf(y: u64, mean: f64) -> f64 {
    ln_poisson_pmf(y, mean).exp()
}

/// Upper tail `P(Y > y_max)` of a Poisson law, summed term by term so that
/// small tails are not lost to cancellation.
pub fn poisson_upper_tail(y_max: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut y = y_max + 1;
    let mut term = poisson_pmf(y, mean);
    let mut total = 0.0;
    loop {
        total += term;
        y += 1;
        let next = term * mean / y as f64;
        if (y as f64 > mean && next < total * 1e-17) || next == 0.0 {
            // Remaining terms are bounded by a geometric series.
            let ratio = mean / (y as f64 + 1.0);
            if ratio < 1.0 {
                total += next / (1.0 - ratio);
            }
            break;
        }
        term = next;
    }
    // Very far in the tail the first term may underflow to zero.
    if total == 0.0 && (y_max as f64) < mean {
        return 1.0 - (0..=y_max).map(|k| poisson_pmf(k, mean)).sum::<f64>();
    }
    total
}

/// Smallest `y_max` with `P(Poisson(mean) > y_max) < tol`.
pub fn poisson_y_max(mean: f64, tol: f64) -> u64 {
    let mut y = mean.ceil() as u64;
    while poisson_upper_tail(y, mean) >= tol {
        y += 1;
    }
    y
}

pub fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln_choose = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    (ln_choose + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

/// Neumaier-compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
