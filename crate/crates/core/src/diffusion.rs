//! Free diffusion in one dimension: Green's functions, first-hitting-time
//! laws at an absorbing receiver, per-slot hitting probabilities and a
//! seeded Brownian first-passage simulator.
//!
//! A molecule released at the origin diffuses with coefficient `D` and an
//! optional drift `v` towards an absorbing plane at distance `d`. Without
//! drift the hitting time is Lévy distributed with scale `λ = d²/2D`; with
//! drift it is inverse Gaussian `IG(μ = d/v, λ = d²/2D)`.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{InverseGaussian, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::{ln_erfc, normal_cdf};
use crate::quad;

/// Per-tap absolute quadrature tolerance.
pub const TAP_TOLERANCE: f64 = 1e-10;

/// Physical parameters of a drift–diffusion medium.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionMedium {
    diffusion_coeff: f64,
    drift: f64,
    distance: f64,
}

impl DiffusionMedium {
    pub fn new(diffusion_coeff: f64, drift: f64, distance: f64) -> Result<Self> {
        if !(diffusion_coeff > 0.0 && diffusion_coeff.is_finite()) {
            return Err(invalid("D", format!("must be positive, got {diffusion_coeff}")));
        }
        if !(drift >= 0.0 && drift.is_finite()) {
            return Err(invalid("v", format!("must be non-negative, got {drift}")));
        }
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(invalid("d", format!("must be positive, got {distance}")));
        }
        Ok(Self { diffusion_coeff, drift, distance })
    }

    pub fn diffusion_coeff(&self) -> f64 {
        self.diffusion_coeff
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Shape parameter `λ = d²/2D`.
    pub fn shape(&self) -> f64 {
        self.distance * self.distance / (2.0 * self.diffusion_coeff)
    }

    /// Mean hitting time `μ = d/v`, defined only with positive drift.
    pub fn mean_hitting_time(&self) -> Option<f64> {
        (self.drift > 0.0).then(|| self.distance / self.drift)
    }

    pub fn hitting_model(&self) -> HittingTimeModel {
        hitting_model(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotConfig {
    slot_len: f64,
    k_max: usize,
}

impl SlotConfig {
    pub fn new(slot_len: f64, k_max: usize) -> Result<Self> {
        if !(slot_len > 0.0 && slot_len.is_finite()) {
            return Err(invalid("Ts", format!("must be positive, got {slot_len}")));
        }
        if k_max < 1 {
            return Err(invalid("k_max", "must be at least 1"));
        }
        Ok(Self { slot_len, k_max })
    }

    pub fn slot_len(&self) -> f64 {
        self.slot_len
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }
}

/// Law of the first hitting time of the absorbing receiver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HittingTimeModel {
    /// Lévy law with scale `lambda`; heavy-tailed with no finite mean.
    Levy { lambda: f64 },
    /// Inverse Gaussian law with mean `mu` and shape `lambda`.
    InverseGaussian { mu: f64, lambda: f64 },
}

impl HittingTimeModel {
    pub fn levy(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive, got {lambda}")));
        }
        Ok(Self::Levy { lambda })
    }

    pub fn inverse_gaussian(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid("mu", format!("must be positive, got {mu}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("must be positive, got {lambda}")));
        }
        Ok(Self::InverseGaussian { mu, lambda })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Self::Levy { lambda } | Self::InverseGaussian { lambda, .. } => lambda,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            Self::Levy { .. } => None,
            Self::InverseGaussian { mu, .. } => Some(mu),
        }
    }

    /// Log-density; `-∞` for `t ≤ 0`.
    pub fn ln_pdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            Self::Levy { lambda } => {
                0.5 * (lambda / (2.0 * PI * t * t * t)).ln() - lambda / (2.0 * t)
            }
            Self::InverseGaussian { mu, lambda } => {
                let dev = t - mu;
                0.5 * (lambda / (2.0 * PI * t * t * t)).ln() - lambda * dev * dev / (2.0 * mu * mu * t)
            }
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.ln_pdf(t).exp()
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Levy { lambda } => libm::erfc((lambda / (2.0 * t)).sqrt()),
            Self::InverseGaussian { mu, lambda } => {
                let s = (lambda / t).sqrt();
                let first = normal_cdf(s * (t / mu - 1.0));
                // exp(2λ/μ)·Φ(-s(t/μ+1)) evaluated in log space to avoid overflow.
                let z = s * (t / mu + 1.0) / std::f64::consts::SQRT_2;
                let second = (2.0 * lambda / mu + ln_erfc(z) - std::f64::consts::LN_2).exp();
                (first + second).min(1.0)
            }
        }
    }

    /// Mode of the density.
    pub fn mode(&self) -> f64 {
        match *self {
            Self::Levy { lambda } => lambda / 3.0,
            Self::InverseGaussian { mu, lambda } => {
                let r = 1.5 * mu / lambda;
                mu * ((1.0 + r * r).sqrt() - r)
            }
        }
    }

    /// Draws one hitting time.
    ///
    /// Lévy draws are `λ / Z²`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Levy { lambda } => {
                let z: f64 = rng.sample(StandardNormal);
                lambda / (z * z)
            }
            Self::InverseGaussian { mu, lambda } => {
                rng.sample(InverseGaussian::new(mu, lambda).expect("validated parameters"))
            }
        }
    }
}

fn check_coeff(diffusion_coeff: f64) -> Result<()> {
    if diffusion_coeff > 0.0 && diffusion_coeff.is_finite() {
        Ok(())
    } else {
        Err(invalid("D", format!("must be positive, got {diffusion_coeff}")))
    }
}

/// One-dimensional Green's function of the diffusion equation.
pub fn green_1d(x: f64, t: f64, diffusion_coeff: f64) -> Result<f64> {
    check_coeff(diffusion_coeff)?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let four_dt = 4.0 * diffusion_coeff * t;
    Ok((PI * four_dt).powf(-0.5) * (-x * x / four_dt).exp())
}

/// Three-dimensional Green's function at radius `r`.
pub fn green_3d(r: f64, t: f64, diffusion_coeff: f64) -> Result<f64> {
    check_coeff(diffusion_coeff)?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let four_dt = 4.0 * diffusion_coeff * t;
    Ok((PI * four_dt).powf(-1.5) * (-r * r / four_dt).exp())
}

pub fn hitting_model(medium: &DiffusionMedium) -> HittingTimeModel {
    let lambda = medium.shape();
    match medium.mean_hitting_time() {
        None => HittingTimeModel::Levy { lambda },
        Some(mu) => HittingTimeModel::InverseGaussian { mu, lambda },
    }
}

/// Per-slot hitting probabilities `p_0..p_{k_max}` and the remaining tail.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotProbabilities {
    pub taps: Vec<f64>,
    pub tail: f64,
    /// Summed quadrature error estimate over all taps and the tail.
    pub abs_err: f64,
}

impl SlotProbabilities {
    pub fn total(&self) -> f64 {
        self.taps.iter().sum::<f64>() + self.tail
    }
}

/// Integrates the hitting-time density over each slot `[kTs, (k+1)Ts]`.
///
/// The tail beyond the last retained slot is integrated after the change of
/// variables `t = 1/s²`, which turns the algebraic `t^{-3/2}` decay of the
/// Lévy density into a bounded integrand on a finite interval.
pub fn slot_hit_probs(medium: &DiffusionMedium, slots: &SlotConfig) -> Result<SlotProbabilities> {
    let model = medium.hitting_model();
    let ts = slots.slot_len();
    let mut taps = Vec::with_capacity(slots.k_max() + 1);
    let mut abs_err = 0.0;
    let mode = model.mode();
    for k in 0..=slots.k_max() {
        let (a, b) = (k as f64 * ts, (k + 1) as f64 * ts);
        let f = |t: f64| model.pdf(t);
        // Split at the mode so a sharp peak is never straddled blindly.
        let r = if a < mode && mode < b {
            let left = quad::integrate(f, a, mode, 0.5 * TAP_TOLERANCE)?;
            let right = quad::integrate(f, mode, b, 0.5 * TAP_TOLERANCE)?;
            quad::Integral {
                value: left.value + right.value,
                abs_err: left.abs_err + right.abs_err,
                intervals: left.intervals + right.intervals,
            }
        } else {
            quad::integrate(f, a, b, TAP_TOLERANCE)?
        };
        abs_err += r.abs_err;
        taps.push(r.value.max(0.0));
    }
    let horizon = (slots.k_max() + 1) as f64 * ts;
    let tail = quad::integrate(
        |s: f64| {
            let t = 1.0 / (s * s);
            (model.ln_pdf(t) + std::f64::consts::LN_2 - 3.0 * s.ln()).exp()
        },
        0.0,
        horizon.sqrt().recip(),
        TAP_TOLERANCE,
    )?;
    abs_err += tail.abs_err;
    Ok(SlotProbabilities { taps, tail: tail.value.max(0.0), abs_err })
}

/// Outcome of a first-passage simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct HittingSamples {
    /// Hitting times of the paths that reached the receiver before `t_max`,
    /// in path order.
    pub times: Vec<f64>,
    /// Paths still travelling at `t_max`.
    pub censored: usize,
    pub t_max: f64,
}

impl HittingSamples {
    pub fn n_paths(&self) -> usize {
        self.times.len() + self.censored
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.n_paths() as f64
    }

    /// Empirical cdf at `t`, counting censored paths as not yet arrived.
    pub fn empirical_cdf(&self, t: f64) -> f64 {
        self.times.iter().filter(|&&x| x <= t).count() as f64 / self.n_paths() as f64
    }

    pub fn ks_distance(&self, model: &HittingTimeModel) -> f64 {
        crate::stats::ks_distance_censored(&self.times, self.n_paths(), self.t_max, |t| model.cdf(t))
    }
}

/// Paths per independently seeded chunk.
pub const PATHS_PER_CHUNK: usize = 1024;

/// Default Euler step `1e-4 · d²/2D`.
pub fn default_dt(medium: &DiffusionMedium) -> f64 {
    1e-4 * medium.shape()
}

/// Default censoring horizon: fifty mean hitting times with drift, fifty
/// times the Lévy scale without.
pub fn default_t_max(medium: &DiffusionMedium) -> f64 {
    50.0 * medium.mean_hitting_time().unwrap_or_else(|| medium.shape())
}

/// Simulates Brownian first passage to the plane at distance `d`.
///
/// Positions follow the Euler scheme `X += v·dt + √(2D·dt)·Z` and a path
/// hits when `X ≥ d` at the end of a step (no bridge correction, so hitting
/// times are biased upward by O(√dt)). While a path is far from the
/// receiver, blocks of `k` steps are drawn as one Gaussian increment; a
/// block is only used when the receiver lies more than eight standard
/// deviations of the block increment away, so intermediate step ends
/// crossing it have probability below 1e-15.
///
/// Paths are split into chunks of [`PATHS_PER_CHUNK`], chunk `i` using the
/// ChaCha stream `i` of `seed`; output is identical for any thread count.
pub fn simulate_first_hitting(
    medium: &DiffusionMedium,
    n_paths: usize,
    dt: f64,
    t_max: f64,
    seed: u64,
) -> Result<HittingSamples> {
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be positive"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid("t_max", format!("must be positive and finite, got {t_max}")));
    }
    let max_steps = (t_max / dt).floor() as u64;
    let sigma = (2.0 * medium.diffusion_coeff() * dt).sqrt();
    let drift_step = medium.drift() * dt;
    let d = medium.distance();

    let n_chunks = n_paths.div_ceil(PATHS_PER_CHUNK);
    let chunks: Vec<(Vec<f64>, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = PATHS_PER_CHUNK.min(n_paths - chunk * PATHS_PER_CHUNK);
            let mut times = Vec::with_capacity(count);
            let mut censored = 0;
            for _ in 0..count {
                match first_passage_steps(d, drift_step, sigma, max_steps, &mut rng) {
                    Some(steps) => times.push(steps as f64 * dt),
                    None => censored += 1,
                }
            }
            (times, censored)
        })
        .collect();

    let mut times = Vec::with_capacity(n_paths);
    let mut censored = 0;
    for (t, c) in chunks {
        times.extend(t);
        censored += c;
    }
    Ok(HittingSamples { times, censored, t_max })
}

fn first_passage_steps<R: Rng>(
    d: f64,
    drift_step: f64,
    sigma: f64,
    max_steps: u64,
    rng: &mut R,
) -> Option<u64> {
    let mut x = 0.0;
    let mut n: u64 = 0;
    while n < max_steps {
        let gap = d - x;
        let remaining = max_steps - n;
        let mut k = ((gap / (8.0 * sigma)).powi(2).floor() as u64).clamp(1, remaining);
        while k > 1 && gap - drift_step * k as f64 <= 8.0 * sigma * (k as f64).sqrt() {
            k /= 2;
        }
        let z: f64 = rng.sample(StandardNormal);
        x += drift_step * k as f64 + sigma * (k as f64).sqrt() * z;
        n += k;
        if x >= d {
            return Some(n);
        }
    }
    None
}
