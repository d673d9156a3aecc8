//! Timing channels.
//!
//! Two models are covered:
//!
//! - the slotted **delay-selector** channel: up to `N` indistinguishable
//!   molecules are released per slot and each one arrives in one of the
//!   following `Δ` slots;
//! - the **AIGN** channel `Z = X + T` where `X ≥ 0` is the release time
//!   (with `E[X] ≤ Λ`) and `T` the inverse Gaussian first hitting time.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, InverseGaussian};
use serde::Serialize;

use crate::capacity::{iid_lower_bound, BoundReport, IidOptions, Method, Prior};
use crate::channels::SlotChannel;
use crate::diffusion::{DiffusionMedium, HittingTimeModel};
use crate::error::{invalid, Error, Result};
use crate::quad::{integrate, integrate_to_infinity};
use crate::stats::MiEstimate;

/// Absolute tolerance of the differential-entropy quadratures.
pub const ENTROPY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DelaySelector {
    /// Largest number of molecules released in one slot.
    pub n_max: u32,
    /// Delay parameter `Δ`.
    pub delta: usize,
}

impl DelaySelector {
    pub fn new(n_max: u32, delta: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(invalid("N", "at least one molecule per slot"));
        }
        if delta == 0 {
            return Err(invalid("delta", "delay must be at least 1"));
        }
        Ok(Self { n_max, delta })
    }

    /// `x^{Δ+1} − x^Δ − N`.
    pub fn polynomial(&self, x: f64) -> f64 {
        x.powi(self.delta as i32) * (x - 1.0) - self.n_max as f64
    }
}

/// Zero-error capacity `log r` (nats) where `r` is the positive root of
/// `x^{Δ+1} − x^Δ − N`, isolated in `(1, 1 + N)` by bisection.
pub fn delay_selector_zero_error(ds: &DelaySelector) -> f64 {
    delay_selector_root(ds).ln()
}

pub fn delay_selector_root(ds: &DelaySelector) -> f64 {
    let (mut lo, mut hi) = (1.0, 1.0 + ds.n_max as f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ds.polynomial(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// The delay-selector channel driven by molecule counts: each molecule
/// released in slot `j` arrives in slot `j + d` with `d ~ delay_law` on
/// `0..Δ`, independently of the others. The default law is uniform.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DelaySelectorChannel {
    pub ds: DelaySelector,
    delay_law: Vec<f64>,
}

impl DelaySelectorChannel {
    pub fn new(ds: DelaySelector, delay_law: Option<Vec<f64>>) -> Result<Self> {
        let law = delay_law.unwrap_or_else(|| vec![1.0 / ds.delta as f64; ds.delta]);
        if law.len() != ds.delta {
            return Err(Error::Dimension { expected: ds.delta, got: law.len() });
        }
        if law.iter().any(|p| !(*p >= 0.0)) || (law.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(invalid("delay_law", "must be a pmf on 0..delta"));
        }
        Ok(Self { ds, delay_law: law })
    }

    pub fn delay_law(&self) -> &[f64] {
        &self.delay_law
    }

    fn draw_delay(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (d, &p) in self.delay_law.iter().enumerate() {
            acc += p;
            if u < acc {
                return d;
            }
        }
        self.delay_law.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

impl SlotChannel for DelaySelectorChannel {
    fn memory_depth(&self) -> usize {
        self.ds.delta - 1
    }

    /// Inputs are molecule counts in `0..=N`; arrivals past the end of the
    /// sequence are dropped.
    fn transmit(&self, inputs: &[f64], rng: &mut dyn RngCore) -> Vec<u64> {
        let mut out = vec![0u64; inputs.len()];
        for (j, &x) in inputs.iter().enumerate() {
            for _ in 0..(x as u64) {
                let slot = j + self.draw_delay(rng);
                if slot < out.len() {
                    out[slot] += 1;
                }
            }
        }
        out
    }
}

/// Single-letter i.i.d. lower bound `I(X_i; Y_i)` (nats per slot) by
/// simulation; `prior` is over molecule counts `0..=N`.
pub fn delay_selector_iid_lower(
    channel: &DelaySelectorChannel,
    prior: &Prior,
    n_slots: usize,
    seed: u64,
    opts: &IidOptions,
) -> Result<MiEstimate> {
    let n = channel.ds.n_max as f64;
    if let Some(bad) = prior.support().iter().find(|x| !(**x >= 0.0 && **x <= n && x.fract() == 0.0)) {
        return Err(invalid("prior", format!("support point {bad} is not a count in 0..={n}")));
    }
    iid_lower_bound(channel, prior, n_slots, seed, opts)
}

/// AIGN channel parameters: release-time budget `Λ` and the inverse
/// Gaussian noise `IG(μ, λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AignParams {
    pub budget: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl AignParams {
    pub fn new(budget: f64, mu: f64, lambda: f64) -> Result<Self> {
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(invalid("budget", format!("must be positive, got {budget}")));
        }
        HittingTimeModel::inverse_gaussian(mu, lambda)?;
        Ok(Self { budget, mu, lambda })
    }

    /// Noise law of a medium with positive drift.
    pub fn from_medium(medium: &DiffusionMedium, budget: f64) -> Result<Self> {
        match medium.hitting_model() {
            HittingTimeModel::InverseGaussian { mu, lambda } => Self::new(budget, mu, lambda),
            HittingTimeModel::Levy { .. } => Err(invalid("v", "AIGN needs a positive drift")),
        }
    }

    /// `κ = λ/μ²`; inverse Gaussian laws sharing `κ` are closed under sums.
    pub fn kappa(&self) -> f64 {
        self.lambda / (self.mu * self.mu)
    }

    pub fn noise(&self) -> HittingTimeModel {
        HittingTimeModel::InverseGaussian { mu: self.mu, lambda: self.lambda }
    }

    /// The inverse Gaussian input with mean `Λ` on the noise's `κ` ray.
    pub fn ig_input(&self) -> HittingTimeModel {
        HittingTimeModel::InverseGaussian { mu: self.budget, lambda: self.kappa() * self.budget * self.budget }
    }
}

fn neg_f_log_f(model: &HittingTimeModel, t: f64) -> f64 {
    let lf = model.ln_pdf(t);
    if lf == f64::NEG_INFINITY {
        0.0
    } else {
        -lf.exp() * lf
    }
}

/// Differential entropy (nats) of `IG(μ, λ)` by quadrature.
pub fn ig_entropy(mu: f64, lambda: f64) -> Result<f64> {
    let model = HittingTimeModel::inverse_gaussian(mu, lambda)?;
    let mode = model.mode();
    let sd = (mu * mu * mu / lambda).sqrt();
    let head = integrate(|t| neg_f_log_f(&model, t), 0.0, mode, ENTROPY_TOL)?;
    let tail = integrate_to_infinity(|t| neg_f_log_f(&model, t), mode, sd.max(mode), ENTROPY_TOL)?;
    Ok(head.value + tail.value)
}

/// Differential entropy (nats) of the Lévy law with scale `λ` conditioned
/// on `T ≤ lifetime`.
pub fn levy_truncated_entropy(lambda: f64, lifetime: f64) -> Result<f64> {
    let model = HittingTimeModel::levy(lambda)?;
    if !(lifetime > 0.0 && lifetime.is_finite()) {
        return Err(invalid("lifetime", format!("must be positive, got {lifetime}")));
    }
    let mass = model.cdf(lifetime);
    if !(mass > 0.0) {
        return Err(invalid("lifetime", "no probability mass before the lifetime"));
    }
    let split = model.mode().min(lifetime);
    let f = |t: f64| neg_f_log_f(&model, t);
    let body = integrate(f, 0.0, split, ENTROPY_TOL)?.value + integrate(f, split, lifetime, ENTROPY_TOL)?.value;
    Ok(body / mass + mass.ln())
}

/// Bounds on the AIGN capacity (nats) with their components.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AignBounds {
    pub report: BoundReport,
    /// `h(T)` of the noise.
    pub noise_entropy: f64,
    /// `h(X + T) − h(T)` with the inverse Gaussian input on the `κ` ray.
    pub ig_input: f64,
    /// Entropy power bound with an exponential input of mean `Λ`.
    pub epi: f64,
    /// `log(e(Λ + μ)) − h(T)`.
    pub max_entropy: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn aign_bounds(p: &AignParams) -> Result<AignBounds> {
    let h_t = ig_entropy(p.mu, p.lambda)?;
    let total = p.mu + p.budget;
    let h_z = ig_entropy(total, p.kappa() * total * total)?;
    let ig_input = h_z - h_t;
    let h_x = 1.0 + p.budget.ln();
    let epi = 0.5 * log_add_exp(2.0 * h_x, 2.0 * h_t) - h_t;
    let max_entropy = 1.0 + total.ln() - h_t;
    let (lower, method) = if ig_input >= epi { (ig_input, Method::IgInput) } else { (epi, Method::Epi) };
    let report = BoundReport::new(lower, max_entropy, method, Method::MaxEntropy)?;
    Ok(AignBounds { report, noise_entropy: h_t, ig_input, epi, max_entropy })
}

/// Release-time law for AIGN simulations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum InputLaw {
    Zero,
    Exponential { mean: f64 },
    InverseGaussian { mu: f64, lambda: f64 },
}

/// Draws `n` pairs `(x, x + t)` with `t ~ IG(μ, λ)`.
pub fn sample_aign(p: &AignParams, input: InputLaw, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let ig = |mu: f64, lambda: f64| {
        InverseGaussian::new(mu, lambda).map_err(|e| invalid("input", format!("inverse Gaussian ({mu}, {lambda}): {e}")))
    };
    let noise = ig(p.mu, p.lambda)?;
    let ig_input = match input {
        InputLaw::InverseGaussian { mu, lambda } => Some(ig(mu, lambda)?),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let x = match (input, &ig_input) {
                (InputLaw::Exponential { mean }, _) => mean * rng.sample::<f64, _>(Exp1),
                (_, Some(d)) => d.sample(&mut rng),
                _ => 0.0,
            };
            let t = noise.sample(&mut rng);
            (x, x + t)
        })
        .collect())
}
