//! Mutual information and capacity bounds.
//!
//! - [`blahut_arimoto`]: capacity of a finite channel, optionally under an
//!   average-cost constraint, with a certified lower/upper bracket.
//! - [`sym_kl_value`] / [`sym_kl_capacity_bound`]: the symmetrized KL
//!   divergence between joint and product laws, an upper bound on mutual
//!   information whose gap is the lautum information.
//! - [`poisson_sym_kl_cov`] / [`poisson_sym_kl_max`]: closed forms of that
//!   bound for the Poisson channel.
//! - [`topsoe_upper`]: mutual information bounded through an arbitrary
//!   output law.
//! - [`iid_lower_bound`]: single-letter lower bound for channels with memory
//!   under i.i.d. inputs, estimated by simulation.
//! - [`sandwich_lower`] / [`sandwich_upper`]: block-memoryless channels that
//!   bracket the capacity of the LTI-Poisson channel.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::channels::{truncated_poisson_row, Dmc, LtiPoissonChannel, SlotChannel, POISSON_TAIL_TOL};
use crate::error::{invalid, Error, Result};
use crate::math::{kl_cell, poisson_y_max, xlogx};
use crate::stats::{plug_in_mi, MiEstimate};

/// Tolerance on the normalisation of a prior.
pub const PRIOR_SUM_TOL: f64 = 1e-12;

/// A probability mass function on numeric support points.
///
/// For priors on the inputs of a [`Dmc`] the support points are usually the
/// input indices; for intensity channels they are the intensities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prior {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl Prior {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::Dimension { expected: support.len(), got: probs.len() });
        }
        if probs.is_empty() {
            return Err(invalid("prior", "empty support"));
        }
        if let Some(bad) = probs.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(invalid("prior", format!("negative or non-finite probability {bad}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::PriorSum { sum });
        }
        Ok(Self { support, probs })
    }

    /// Prior over indices `0..probs.len()`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        Self::new((0..probs.len()).map(|i| i as f64).collect(), probs)
    }

    pub fn uniform(n: usize) -> Self {
        Self { support: (0..n).map(|i| i as f64).collect(), probs: vec![1.0 / n as f64; n] }
    }

    /// Renormalises non-negative weights into a prior.
    pub fn normalized(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid("prior", "weights must have positive finite sum"));
        }
        Self::new(support, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        crate::math::entropy(&self.probs)
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    pub fn expectation(&self, costs: &[f64]) -> f64 {
        costs.iter().zip(&self.probs).map(|(c, p)| c * p).sum()
    }

    pub(crate) fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

fn check_prior(prior: &Prior, ch: &Dmc) -> Result<()> {
    if prior.len() != ch.n_inputs() {
        return Err(Error::Dimension { expected: ch.n_inputs(), got: prior.len() });
    }
    Ok(())
}

fn output_marginal(probs: &[f64], ch: &Dmc) -> Vec<f64> {
    let mut q = vec![0.0; ch.n_outputs()];
    for (row, &p) in ch.matrix().iter().zip(probs) {
        if p > 0.0 {
            for (qy, &w) in q.iter_mut().zip(row) {
                *qy += p * w;
            }
        }
    }
    q
}

/// `I(X;Y)` in nats.
pub fn mutual_information(prior: &Prior, ch: &Dmc) -> Result<f64> {
    check_prior(prior, ch)?;
    let q = output_marginal(prior.probs(), ch);
    // Summing the non-negative cells w ln(w/q) − w + q avoids the
    // cancellation of the plain form when I(X;Y) is tiny.
    let mut mi = 0.0;
    for (row, &p) in ch.matrix().iter().zip(prior.probs()) {
        if p == 0.0 {
            continue;
        }
        let d: f64 = row.iter().zip(&q).filter(|(_, qy)| **qy > 0.0).map(|(&w, &qy)| kl_cell(w, qy)).sum();
        mi += p * d;
    }
    Ok(mi)
}

/// The symmetrized divergence `D(p(x,y)‖p(x)p(y)) + D(p(x)p(y)‖p(x,y))`.
///
/// Returns `f64::INFINITY` when the product law charges a pair the joint law
/// does not.
pub fn sym_kl_value(prior: &Prior, ch: &Dmc) -> Result<f64> {
    check_prior(prior, ch)?;
    let q = output_marginal(prior.probs(), ch);
    let mut total = 0.0;
    for (row, &p) in ch.matrix().iter().zip(prior.probs()) {
        if p == 0.0 {
            continue;
        }
        for (&w, &qy) in row.iter().zip(&q) {
            if qy == 0.0 {
                continue;
            }
            if w == 0.0 {
                return Ok(f64::INFINITY);
            }
            // (p w - p q) log(w/q) sums both directions at once.
            total += p * (w - qy) * (w / qy).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Topsøe's bound `E log[p(y|x)/q(y)] ≥ I(X;Y)` for an arbitrary output law.
pub fn topsoe_upper(prior: &Prior, ch: &Dmc, q_out: &Prior) -> Result<f64> {
    check_prior(prior, ch)?;
    if q_out.len() != ch.n_outputs() {
        return Err(Error::Dimension { expected: ch.n_outputs(), got: q_out.len() });
    }
    let mut total = 0.0;
    for (row, &p) in ch.matrix().iter().zip(prior.probs()) {
        if p == 0.0 {
            continue;
        }
        for (&w, &qy) in row.iter().zip(q_out.probs()) {
            if w == 0.0 {
                continue;
            }
            if qy == 0.0 {
                return Ok(f64::INFINITY);
            }
            total += p * w * (w / qy).ln();
        }
    }
    Ok(total)
}

/// Stopping rule for Blahut–Arimoto.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BaOptions {
    /// Target width of the capacity bracket, in nats.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 200_000 }
    }
}

/// Average-cost constraint `E[c(X)] ≤ budget`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostConstraint {
    pub costs: Vec<f64>,
    pub budget: f64,
}

/// Tolerance on meeting the cost constraint in the multiplier search.
pub const COST_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaResult {
    /// Certified lower bound: `I(X;Y)` at the returned prior.
    pub capacity: f64,
    /// Certified upper bound on the (constrained) capacity.
    pub upper: f64,
    pub prior: Prior,
    pub iterations: usize,
    /// Lagrange multiplier of the cost constraint (0 when inactive).
    pub multiplier: f64,
    /// Per-iteration `(lower, upper)` of the final multiplier's run,
    /// shifted by `multiplier·budget`; for unconstrained runs these are
    /// `I(p_k)` and `max_x D(W_x‖q_k)`.
    #[serde(skip)]
    pub trace: Vec<(f64, f64)>,
}

impl BaResult {
    pub fn width(&self) -> f64 {
        self.upper - self.capacity
    }
}

/// Row-major copy of a channel with the negative row entropies cached.
pub(crate) struct FlatChannel {
    n_in: usize,
    n_out: usize,
    w: Vec<f64>,
    neg_entropy: Vec<f64>,
}

impl FlatChannel {
    pub(crate) fn from_dmc(ch: &Dmc) -> Self {
        let w: Vec<f64> = ch.matrix().iter().flatten().copied().collect();
        Self::from_rows(ch.n_inputs(), ch.n_outputs(), w)
    }

    fn from_rows(n_in: usize, n_out: usize, w: Vec<f64>) -> Self {
        let neg_entropy = w.chunks(n_out).map(|row| row.iter().map(|&v| xlogx(v)).sum()).collect();
        Self { n_in, n_out, w, neg_entropy }
    }

    fn row(&self, x: usize) -> &[f64] {
        &self.w[x * self.n_out..(x + 1) * self.n_out]
    }

    /// Fills `d` with `D(W_x‖q)` for the output marginal of `p`.
    fn divergences(&self, p: &[f64], q: &mut [f64], log_q: &mut [f64], d: &mut [f64]) {
        q.iter_mut().for_each(|v| *v = 0.0);
        for (x, &px) in p.iter().enumerate() {
            if px > 0.0 {
                for (qy, &w) in q.iter_mut().zip(self.row(x)) {
                    *qy += px * w;
                }
            }
        }
        for (lq, &qy) in log_q.iter_mut().zip(q.iter()) {
            *lq = if qy > 0.0 { qy.ln() } else { f64::NEG_INFINITY };
        }
        for (x, dx) in d.iter_mut().enumerate() {
            let mut cross = 0.0;
            for (&w, &lq) in self.row(x).iter().zip(log_q.iter()) {
                if w > 0.0 {
                    cross += w * lq;
                }
            }
            *dx = self.neg_entropy[x] - cross;
        }
    }
}

struct LagrangianRun {
    probs: Vec<f64>,
    /// `I(p)` at the final iterate.
    mi: f64,
    /// `max_x D(W_x‖q) − s·c_x`.
    dual_max: f64,
    cost: f64,
    iterations: usize,
    trace: Vec<(f64, f64)>,
}

const POLISH_EVERY: usize = 256;
const POLISH_MAX_SUPPORT: usize = 96;

/// Newton ascent of `I(p) − s·E[c]` over the inputs currently carrying
/// mass, with the mass elsewhere held fixed.
///
/// Plain Blahut–Arimoto creeps towards sparse optima; on the right face of
/// the simplex the objective is smooth and concave, so a few damped Newton
/// steps land on the optimum. Returns whether `p` was changed.
fn newton_polish(ch: &FlatChannel, costs: &[f64], s: f64, p: &mut [f64]) -> bool {
    let mut q = vec![0.0; ch.n_out];
    let mut log_q = vec![0.0; ch.n_out];
    let mut d = vec![0.0; ch.n_in];
    let objective = |p: &[f64], q: &mut [f64], log_q: &mut [f64], d: &mut [f64]| {
        ch.divergences(p, q, log_q, d);
        p.iter().zip(d.iter()).zip(costs).map(|((pi, di), c)| pi * (di - s * c)).sum::<f64>()
    };
    let mut f = objective(p, &mut q, &mut log_q, &mut d);
    let mut changed = false;
    for _ in 0..40 {
        let active: Vec<usize> = (0..ch.n_in).filter(|&x| p[x] > 1e-14).collect();
        let k = active.len();
        if k < 2 || k > POLISH_MAX_SUPPORT {
            break;
        }
        // Gradient D(W_x‖q) − 1 − s·c_x; the constant drops out on the face.
        let g = DVector::from_iterator(k, active.iter().map(|&x| d[x] - s * costs[x]));
        let spread = g.max() - g.min();
        if spread < 1e-13 {
            // Optimal on this face; bring in any input that would raise the
            // objective, since multiplicative updates revive it very slowly.
            let level = g.max();
            let mut grew = false;
            for x in 0..ch.n_in {
                if p[x] <= 1e-14 && d[x] - s * costs[x] > level + 1e-12 {
                    p[x] = 1e-4;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
            let total: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= total);
            f = objective(p, &mut q, &mut log_q, &mut d);
            changed = true;
            continue;
        }
        // Negative Hessian Σ_y W_xy W_x'y / q_y, lightly regularised.
        let mut a = DMatrix::<f64>::zeros(k, k);
        for (i, &x) in active.iter().enumerate() {
            for (j, &x2) in active.iter().enumerate().skip(i) {
                let v: f64 = ch
                    .row(x)
                    .iter()
                    .zip(ch.row(x2))
                    .zip(&q)
                    .filter(|(_, &qy)| qy > 0.0)
                    .map(|((&w1, &w2), &qy)| w1 * w2 / qy)
                    .sum();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let scale = (0..k).map(|i| a[(i, i)]).fold(0.0, f64::max);
        for i in 0..k {
            a[(i, i)] += 1e-12 * scale + 1e-300;
        }
        let Some(chol) = a.cholesky() else { break };
        let ones = DVector::from_element(k, 1.0);
        let ag = chol.solve(&g);
        let a1 = chol.solve(&ones);
        let nu = ag.sum() / a1.sum();
        let dir = ag - a1 * nu;
        // Largest step keeping every active mass positive.
        let mut t_max = f64::INFINITY;
        for (i, &x) in active.iter().enumerate() {
            if dir[i] < 0.0 {
                t_max = t_max.min(-p[x] / dir[i]);
            }
        }
        let mut t = if t_max.is_finite() { (0.99 * t_max).min(1.0) } else { 1.0 };
        let mut trial = p.to_vec();
        let mut accepted = false;
        for _ in 0..30 {
            for (i, &x) in active.iter().enumerate() {
                trial[x] = (p[x] + t * dir[i]).max(0.0);
            }
            let ft = objective(&trial, &mut q, &mut log_q, &mut d);
            if ft > f {
                f = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            ch.divergences(p, &mut q, &mut log_q, &mut d);
            break;
        }
        p.copy_from_slice(&trial);
        changed = true;
    }
    if changed {
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
    }
    changed
}

/// Blahut–Arimoto iterations on `I(p) − s·E[c]` from `start`.
fn ba_run(
    ch: &FlatChannel,
    costs: &[f64],
    s: f64,
    start: &[f64],
    opts: &BaOptions,
    keep_trace: bool,
) -> Result<LagrangianRun> {
    let mut ln_p: Vec<f64> = start.iter().map(|&p| p.max(1e-300).ln()).collect();
    let mut p = start.to_vec();
    let mut q = vec![0.0; ch.n_out];
    let mut log_q = vec![0.0; ch.n_out];
    let mut d = vec![0.0; ch.n_in];
    let mut trace = Vec::new();
    for it in 1..=opts.max_iter {
        ch.divergences(&p, &mut q, &mut log_q, &mut d);
        let mi: f64 = p.iter().zip(&d).map(|(pi, di)| pi * di).sum();
        let cost: f64 = p.iter().zip(costs).map(|(pi, c)| pi * c).sum();
        let dual_max = d.iter().zip(costs).map(|(di, c)| di - s * c).fold(f64::NEG_INFINITY, f64::max);
        let primal = mi - s * cost;
        if keep_trace {
            trace.push((primal, dual_max));
        }
        if dual_max - primal <= opts.tol {
            return Ok(LagrangianRun { probs: p, mi: mi.max(0.0), dual_max, cost, iterations: it, trace });
        }
        if it % POLISH_EVERY == 0 && newton_polish(ch, costs, s, &mut p) {
            ln_p.iter_mut().zip(&p).for_each(|(lp, &pi)| *lp = pi.max(1e-300).ln());
            continue;
        }
        for ((lp, di), c) in ln_p.iter_mut().zip(&d).zip(costs) {
            *lp += di - s * c;
        }
        let top = ln_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = ln_p.iter().map(|lp| (lp - top).exp()).sum();
        let ln_z = top + z.ln();
        for (pi, lp) in p.iter_mut().zip(ln_p.iter_mut()) {
            *lp = (*lp - ln_z).max(-700.0);
            *pi = lp.exp();
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
    }
    ch.divergences(&p, &mut q, &mut log_q, &mut d);
    let mi: f64 = p.iter().zip(&d).map(|(pi, di)| pi * di).sum();
    let cost: f64 = p.iter().zip(costs).map(|(pi, c)| pi * c).sum();
    let dual_max = d.iter().zip(costs).map(|(di, c)| di - s * c).fold(f64::NEG_INFINITY, f64::max);
    Err(Error::NotConverged { iterations: opts.max_iter, width: dual_max - (mi - s * cost) })
}

/// Capacity of `ch` in nats by Blahut–Arimoto.
///
/// Each iteration yields `I(p_k) ≤ C ≤ max_x D(W_x‖q_k)`; the run stops when
/// the bracket is narrower than `opts.tol`. With a cost constraint the
/// multiplier `s ≥ 0` of `I(p) − s·E[c]` is found by bisection until the
/// constraint is met within [`COST_TOL`] (on the feasible side), and the
/// reported upper bound is `s·budget + max_x (D(W_x‖q) − s·c_x)`.
pub fn blahut_arimoto(ch: &Dmc, opts: &BaOptions, cost: Option<&CostConstraint>) -> Result<BaResult> {
    blahut_arimoto_flat(&FlatChannel::from_dmc(ch), opts, cost, None)
}

pub(crate) fn blahut_arimoto_flat(
    ch: &FlatChannel,
    opts: &BaOptions,
    cost: Option<&CostConstraint>,
    start: Option<&[f64]>,
) -> Result<BaResult> {
    let n = ch.n_in;
    let uniform = vec![1.0 / n as f64; n];
    let start = start.unwrap_or(&uniform);
    let support: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let zero_costs = vec![0.0; n];

    let Some(constraint) = cost else {
        let run = ba_run(ch, &zero_costs, 0.0, start, opts, true)?;
        return finish(support, run, 0.0, 0.0);
    };
    if constraint.costs.len() != n {
        return Err(Error::Dimension { expected: n, got: constraint.costs.len() });
    }
    let budget = constraint.budget;
    let min_cost = constraint.costs.iter().copied().fold(f64::INFINITY, f64::min);
    if !(budget >= min_cost) {
        return Err(invalid("budget", format!("budget {budget} below the cheapest input cost {min_cost}")));
    }
    let costs = &constraint.costs;

    let free = ba_run(ch, costs, 0.0, start, opts, true)?;
    if free.cost <= budget + COST_TOL {
        return finish(support, free, 0.0, budget);
    }

    let mut iterations = free.iterations;
    let mut warm = free.probs.clone();
    let mut s_lo = 0.0;
    let mut s_hi = 1.0;
    let mut hi_run = loop {
        let run = ba_run(ch, costs, s_hi, &warm, opts, false)?;
        iterations += run.iterations;
        if run.cost <= budget {
            break run;
        }
        s_lo = s_hi;
        s_hi *= 2.0;
        warm = run.probs;
        if s_hi > 1e12 {
            return Err(invalid("budget", "cost constraint could not be met"));
        }
    };
    for _ in 0..200 {
        if budget - hi_run.cost <= COST_TOL || s_hi - s_lo <= 1e-15 * s_hi {
            break;
        }
        let mid = 0.5 * (s_lo + s_hi);
        let run = ba_run(ch, costs, mid, &hi_run.probs, opts, false)?;
        iterations += run.iterations;
        if run.cost <= budget {
            s_hi = mid;
            hi_run = run;
        } else {
            s_lo = mid;
        }
    }
    let mut final_run = ba_run(ch, costs, s_hi, &hi_run.probs, opts, true)?;
    final_run.iterations += iterations;
    finish(support, final_run, s_hi, budget)
}

fn finish(support: Vec<f64>, run: LagrangianRun, s: f64, budget: f64) -> Result<BaResult> {
    let upper = run.dual_max + s * budget;
    let prior = Prior::normalized(support, run.probs)?;
    let trace = run.trace.into_iter().map(|(lo, hi)| (lo + s * budget, hi + s * budget)).collect();
    Ok(BaResult {
        capacity: run.mi,
        upper: upper.max(run.mi),
        prior,
        iterations: run.iterations,
        multiplier: s,
        trace,
    })
}

/// Options for maximising the symmetrized KL divergence over priors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymKlOptions {
    pub restarts: usize,
    /// Stop when the projected-gradient step `‖Π(p + ∇f) − p‖∞` falls below.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SymKlOptions {
    fn default() -> Self {
        Self { restarts: 50, grad_tol: 1e-9, max_iter: 20_000, seed: 0x5eed_c0de }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymKlBound {
    /// `max_p D_sym`, or `f64::INFINITY` when unbounded.
    pub value: f64,
    pub prior: Option<Prior>,
    /// Index of the start that produced the maximum (0 is the
    /// Blahut–Arimoto optimizer, 1 the uniform prior, then random starts).
    pub best_start: usize,
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Projection onto `{p ∈ simplex : c·p ≤ budget}` by bisection on the
/// multiplier of the cost constraint.
fn project_feasible(v: &[f64], cost: Option<&CostConstraint>) -> Vec<f64> {
    let p0 = project_simplex(v);
    let Some(c) = cost else { return p0 };
    let spend = |p: &[f64]| p.iter().zip(&c.costs).map(|(a, b)| a * b).sum::<f64>();
    if spend(&p0) <= c.budget {
        return p0;
    }
    let shifted = |theta: f64| -> Vec<f64> {
        let w: Vec<f64> = v.iter().zip(&c.costs).map(|(x, ci)| x - theta * ci).collect();
        project_simplex(&w)
    };
    let mut hi = 1.0;
    while spend(&shifted(hi)) > c.budget && hi < 1e15 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spend(&shifted(mid)) > c.budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    shifted(hi)
}

/// Pairwise symmetrized divergences between channel rows; `D_sym(p)` is
/// `½ pᵀKp`.
fn pairwise_sym_kl(ch: &Dmc) -> Vec<Vec<f64>> {
    let n = ch.n_inputs();
    let mut k = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let mut total = 0.0;
            for (&wa, &wb) in ch.row(a).iter().zip(ch.row(b)) {
                if wa == wb {
                    continue;
                }
                if wa == 0.0 || wb == 0.0 {
                    total = f64::INFINITY;
                    break;
                }
                total += (wa - wb) * (wa / wb).ln();
            }
            k[a][b] = total;
            k[b][a] = total;
        }
    }
    k
}

/// `max_p D_sym(p(x,y)‖p(x)p(y))` over priors (optionally cost-constrained).
///
/// The objective equals `½ Σ p_x p_x' D_sym(W_x‖W_x')`. It is maximised by
/// projected gradient ascent with step halving from the Blahut–Arimoto
/// optimizer, the uniform prior and `opts.restarts` random starts; the
/// first start guarantees the result is at least the Blahut–Arimoto value.
pub fn sym_kl_capacity_bound(
    ch: &Dmc,
    cost: Option<&CostConstraint>,
    opts: &SymKlOptions,
) -> Result<SymKlBound> {
    let n = ch.n_inputs();
    if let Some(c) = cost {
        if c.costs.len() != n {
            return Err(Error::Dimension { expected: n, got: c.costs.len() });
        }
    }
    let k = pairwise_sym_kl(ch);
    let pair_feasible = |a: usize, b: usize| match cost {
        None => true,
        Some(c) => {
            let (ca, cb) = (c.costs[a], c.costs[b]);
            ca.min(cb) < c.budget || ca.max(cb) <= c.budget
        }
    };
    for a in 0..n {
        for b in (a + 1)..n {
            if k[a][b].is_infinite() && pair_feasible(a, b) {
                return Ok(SymKlBound { value: f64::INFINITY, prior: None, best_start: 0 });
            }
        }
    }
    // Pairs that cannot both be charged are dropped from the objective.
    let k: Vec<Vec<f64>> = k.into_iter().map(|row| row.into_iter().map(|v| if v.is_finite() { v } else { 0.0 }).collect()).collect();
    let objective = |p: &[f64]| -> f64 {
        let mut total = 0.0;
        for (a, row) in k.iter().enumerate() {
            total += p[a] * row.iter().zip(p).map(|(kab, pb)| kab * pb).sum::<f64>();
        }
        0.5 * total
    };
    let gradient = |p: &[f64]| -> Vec<f64> {
        k.iter().map(|row| row.iter().zip(p).map(|(kab, pb)| kab * pb).sum()).collect()
    };

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts + 2);
    let loose = BaOptions { tol: 1e-7, max_iter: 20_000 };
    let ba_start = match blahut_arimoto(ch, &loose, cost) {
        Ok(r) => r.prior.probs().to_vec(),
        Err(_) => project_feasible(&vec![1.0 / n as f64; n], cost),
    };
    starts.push(ba_start);
    starts.push(project_feasible(&vec![1.0 / n as f64; n], cost));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = raw.iter().sum();
        let dirichlet: Vec<f64> = raw.iter().map(|v| v / total).collect();
        starts.push(project_feasible(&dirichlet, cost));
    }

    let mut best = (f64::NEG_INFINITY, 0usize, starts[0].clone());
    for (idx, start) in starts.into_iter().enumerate() {
        let mut p = start;
        let mut f = objective(&p);
        let mut step = 1.0;
        for _ in 0..opts.max_iter {
            let g = gradient(&p);
            let probe: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a + b).collect();
            let stationarity = project_feasible(&probe, cost)
                .iter()
                .zip(&p)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if stationarity <= opts.grad_tol {
                break;
            }
            let mut moved = false;
            while step > 1e-16 {
                let trial: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                let cand = project_feasible(&trial, cost);
                let fc = objective(&cand);
                if fc > f {
                    p = cand;
                    f = fc;
                    step *= 2.0;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if f > best.0 {
            best = (f, idx, p);
        }
    }
    let prior = Prior::normalized((0..n).map(|i| i as f64).collect(), best.2)?;
    Ok(SymKlBound { value: best.0.max(0.0), prior: Some(prior), best_start: best.1 })
}

/// `Cov(X + λ0, log(X + λ0))`: the symmetrized KL divergence of the Poisson
/// channel `Y ~ Poisson(X + λ0)` under the given prior on intensities.
///
/// With `λ0 = 0` and mass at `X = 0` alongside positive intensities the
/// value is `+∞` (the zero-intensity output law is a point mass, so the
/// reverse divergence diverges); `0·log 0` is taken as `0`.
pub fn poisson_sym_kl_cov(prior: &Prior, background: f64) -> Result<f64> {
    if !(background >= 0.0 && background.is_finite()) {
        return Err(invalid("lam0", format!("must be non-negative, got {background}")));
    }
    if let Some(bad) = prior.support().iter().find(|x| !(**x >= 0.0)) {
        return Err(invalid("prior", format!("intensities must be non-negative, got {bad}")));
    }
    let charged: Vec<(f64, f64)> = prior
        .support()
        .iter()
        .zip(prior.probs())
        .filter(|(_, p)| **p > 0.0)
        .map(|(&x, &p)| (x + background, p))
        .collect();
    let mean: f64 = charged.iter().map(|(m, p)| m * p).sum();
    let has_zero = charged.iter().any(|(m, _)| *m == 0.0);
    if has_zero {
        return Ok(if mean > 0.0 { f64::INFINITY } else { 0.0 });
    }
    let e_mlogm: f64 = charged.iter().map(|(m, p)| p * m * m.ln()).sum();
    let e_logm: f64 = charged.iter().map(|(m, p)| p * m.ln()).sum();
    Ok((e_mlogm - mean * e_logm).max(0.0))
}

fn check_poisson_constraints(average: f64, peak: f64, background: f64) -> Result<()> {
    if !(average > 0.0 && average <= peak && peak.is_finite()) {
        return Err(invalid("Es", format!("need 0 < Es <= A, got Es={average}, A={peak}")));
    }
    if !(background > 0.0 && background.is_finite()) {
        return Err(invalid("lam0", format!("must be positive, got {background}")));
    }
    Ok(())
}

/// Closed-form maximum of [`poisson_sym_kl_cov`] over priors on `[0, A]`
/// with mean at most `Es`.
pub fn poisson_sym_kl_max(average: f64, peak: f64, background: f64) -> Result<f64> {
    check_poisson_constraints(average, peak, background)?;
    let log_term = (peak / background + 1.0).ln();
    Ok(if average < peak / 2.0 {
        average / peak * (peak - average) * log_term
    } else {
        peak / 4.0 * log_term
    })
}

/// On–off prior `{0, A}` with `P(A) = min(Es, A/2)/A`, the maximiser of the
/// Poisson symmetrized KL bound.
pub fn poisson_two_point_prior(average: f64, peak: f64) -> Result<Prior> {
    if !(average > 0.0 && average <= peak && peak.is_finite()) {
        return Err(invalid("Es", format!("need 0 < Es <= A, got Es={average}, A={peak}")));
    }
    let on = average.min(peak / 2.0) / peak;
    Prior::new(vec![0.0, peak], vec![1.0 - on, on])
}

/// Options for the simulation-based single-letter estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IidOptions {
    pub bootstrap_resamples: usize,
    /// Fail when the bootstrap interval is wider than this.
    pub ci_tolerance: Option<f64>,
}

impl Default for IidOptions {
    fn default() -> Self {
        Self { bootstrap_resamples: 200, ci_tolerance: None }
    }
}

/// Estimates the single-letter rate `I(X_i;Y_i)` of a channel with memory
/// driven by i.i.d. inputs drawn from `prior` (whose support holds the
/// input values). Slots before the memory depth are discarded as burn-in.
pub fn iid_lower_bound<C: SlotChannel + ?Sized>(
    channel: &C,
    prior: &Prior,
    n_slots: usize,
    seed: u64,
    opts: &IidOptions,
) -> Result<MiEstimate> {
    let burn_in = channel.memory_depth();
    if n_slots <= burn_in {
        return Err(invalid("n_slots", format!("need more than {burn_in} slots")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = (0..n_slots).map(|_| prior.sample_index(&mut rng)).collect();
    let values: Vec<f64> = indices.iter().map(|&i| prior.support()[i]).collect();
    let outputs = channel.transmit(&values, &mut rng);
    let pairs: Vec<(usize, u64)> =
        indices.iter().copied().zip(outputs.iter().copied()).skip(burn_in).collect();
    let est = plug_in_mi(&pairs, opts.bootstrap_resamples, seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    if let Some(tol) = opts.ci_tolerance {
        if est.ci_width() > tol {
            return Err(Error::InsufficientSamples { width: est.ci_width(), tolerance: tol });
        }
    }
    Ok(est)
}

/// Limits for the block-memoryless constructions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichOptions {
    /// Largest number of super-input symbols `|grid|^(k+r)`.
    pub max_super_inputs: usize,
    /// Largest number of transition-matrix entries.
    pub max_entries: usize,
    /// Per-slot Poisson tail folded into an overflow symbol.
    pub tail_tol: f64,
    pub ba: BaOptions,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        Self {
            max_super_inputs: 1_000_000,
            max_entries: 40_000_000,
            tail_tol: POISSON_TAIL_TOL,
            ba: BaOptions { tol: 1e-8, max_iter: 200_000 },
        }
    }
}

/// Capacity bracket of the block channel underlying both sandwich bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockCapacity {
    pub memory: usize,
    pub r: usize,
    pub super_inputs: usize,
    pub super_outputs: usize,
    /// Certified bracket on the block channel capacity (nats per block).
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

impl BlockCapacity {
    /// Rate of the depreciated channel: `k` outputs deleted per block of
    /// `k + r` inputs.
    pub fn lower_rate(&self) -> f64 {
        self.lower / (self.memory + self.r) as f64
    }

    /// Rate of the enhanced channel whose `k`-symbol memory is reset freely
    /// at the start of each block of `r` uses.
    pub fn upper_rate(&self) -> f64 {
        self.upper / self.r as f64
    }
}

struct BlockLayout {
    memory: usize,
    r: usize,
    rows: usize,
    y_max: u64,
}

fn block_layout(ch: &LtiPoissonChannel, r: usize, grid: &[f64], opts: &SandwichOptions) -> Result<BlockLayout> {
    if r == 0 {
        return Err(invalid("r", "block length must be at least 1"));
    }
    if grid.is_empty() {
        return Err(invalid("input_grid", "input grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|x| !(**x >= 0.0 && **x <= ch.peak())) {
        return Err(invalid("input_grid", format!("intensity {bad} outside [0, {}]", ch.peak())));
    }
    let memory = ch.memory_depth();
    let len = memory + r;
    let rows = checked_pow(grid.len(), len).filter(|&n| n <= opts.max_super_inputs).ok_or(
        Error::SuperAlphabetOverflow { size: checked_pow(grid.len(), len).unwrap_or(usize::MAX), limit: opts.max_super_inputs },
    )?;
    let max_x = grid.iter().copied().fold(0.0, f64::max);
    let max_mean = ch.background() + ch.taps().iter().sum::<f64>() * max_x;
    let y_max = poisson_y_max(max_mean, opts.tail_tol);
    let cols = checked_pow(y_max as usize + 2, r).unwrap_or(usize::MAX);
    let entries = rows.saturating_mul(cols);
    if entries > opts.max_entries {
        return Err(Error::SuperAlphabetOverflow { size: entries, limit: opts.max_entries });
    }
    Ok(BlockLayout { memory, r, rows, y_max })
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

/// Transition rows of the block channel: super-input `(x_1..x_{k+r})` in
/// base-`|grid|` order (first symbol most significant) to the outputs of the
/// last `r` slots, each truncated at `y_max` plus an overflow symbol.
fn block_rows(ch: &LtiPoissonChannel, grid: &[f64], layout: &BlockLayout) -> Vec<f64> {
    let len = layout.memory + layout.r;
    let per_slot = layout.y_max as usize + 2;
    let cols = per_slot.pow(layout.r as u32);
    let mut w = Vec::with_capacity(layout.rows * cols);
    let mut symbols = vec![0.0; len];
    for row in 0..layout.rows {
        let mut rem = row;
        for slot in (0..len).rev() {
            symbols[slot] = grid[rem % grid.len()];
            rem /= grid.len();
        }
        let mut joint = vec![1.0];
        for i in layout.memory..len {
            let mean = ch.slot_mean(&symbols, i);
            let (slot_row, _) = truncated_poisson_row(mean, layout.y_max);
            let mut next = Vec::with_capacity(joint.len() * per_slot);
            for &a in &joint {
                next.extend(slot_row.iter().map(|&b| a * b));
            }
            joint = next;
        }
        w.extend_from_slice(&joint);
    }
    w
}

/// The block channel as a [`Dmc`]; intended for inspection on small sizes.
pub fn block_channel(ch: &LtiPoissonChannel, r: usize, grid: &[f64], opts: &SandwichOptions) -> Result<Dmc> {
    let layout = block_layout(ch, r, grid, opts)?;
    let per_slot = layout.y_max as usize + 2;
    let cols = per_slot.pow(r as u32);
    let w = block_rows(ch, grid, &layout);
    let len = layout.memory + r;
    let inputs = (0..layout.rows)
        .map(|row| {
            let mut rem = row;
            let mut digits = vec![0usize; len];
            for slot in (0..len).rev() {
                digits[slot] = rem % grid.len();
                rem /= grid.len();
            }
            let parts: Vec<String> = digits.iter().map(|&d| grid[d].to_string()).collect();
            format!("({})", parts.join(","))
        })
        .collect();
    let outputs = (0..cols).map(|c| format!("y{c}")).collect();
    let matrix = w.chunks(cols).map(<[f64]>::to_vec).collect();
    Dmc::new(inputs, outputs, matrix)
}

/// Blahut–Arimoto on the block channel shared by both sandwich bounds.
///
/// Deleting the first `k` outputs of a block of `k + r` inputs and letting
/// the transmitter choose a `k`-symbol reset prefix before `r` inputs give
/// the same super-symbol channel; the bounds differ only in how many channel
/// uses each block costs.
pub fn block_capacity(
    ch: &LtiPoissonChannel,
    r: usize,
    grid: &[f64],
    opts: &SandwichOptions,
) -> Result<BlockCapacity> {
    let layout = block_layout(ch, r, grid, opts)?;
    let cols = (layout.y_max as usize + 2).pow(r as u32);
    if grid.len() == 1 {
        return Ok(BlockCapacity { memory: layout.memory, r, super_inputs: 1, super_outputs: cols, lower: 0.0, upper: 0.0, iterations: 0 });
    }
    let flat = FlatChannel::from_rows(layout.rows, cols, block_rows(ch, grid, &layout));
    let ba = blahut_arimoto_flat(&flat, &opts.ba, None, None)?;
    Ok(BlockCapacity {
        memory: layout.memory,
        r,
        super_inputs: layout.rows,
        super_outputs: cols,
        lower: ba.capacity,
        upper: ba.upper,
        iterations: ba.iterations,
    })
}

/// Lower bound on the capacity (nats per slot) of the LTI-Poisson channel
/// restricted to `grid`, from the depreciated block channel.
pub fn sandwich_lower(ch: &LtiPoissonChannel, r: usize, grid: &[f64], opts: &SandwichOptions) -> Result<f64> {
    Ok(block_capacity(ch, r, grid, opts)?.lower_rate())
}

/// Upper bound on the capacity (nats per slot) of the LTI-Poisson channel
/// restricted to `grid`, from the enhanced (resettable) block channel.
pub fn sandwich_upper(ch: &LtiPoissonChannel, r: usize, grid: &[f64], opts: &SandwichOptions) -> Result<f64> {
    Ok(block_capacity(ch, r, grid, opts)?.upper_rate())
}

/// Both sandwich bounds from a single block-capacity computation.
pub fn sandwich(ch: &LtiPoissonChannel, r: usize, grid: &[f64], opts: &SandwichOptions) -> Result<BoundReport> {
    let block = block_capacity(ch, r, grid, opts)?;
    let mut report = BoundReport::new(block.lower_rate(), block.upper_rate(), Method::SandwichLo, Method::SandwichHi)?;
    report.iterations = Some(block.iterations);
    report.grid_points = Some(grid.len());
    report.block_len = Some(r);
    Ok(report)
}

/// How a bound was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "ba")]
    Ba,
    #[serde(rename = "sym_kl")]
    SymKl,
    #[serde(rename = "sym_kl_closed")]
    SymKlClosed,
    #[serde(rename = "topsoe")]
    Topsoe,
    #[serde(rename = "iid_mc")]
    IidMc,
    #[serde(rename = "sandwich_lo")]
    SandwichLo,
    #[serde(rename = "sandwich_hi")]
    SandwichHi,
    #[serde(rename = "ig_input")]
    IgInput,
    #[serde(rename = "epi")]
    Epi,
    #[serde(rename = "max_entropy")]
    MaxEntropy,
}

/// Allowed slack in `lower ≤ upper`.
pub const BOUND_ORDER_TOL: f64 = 1e-9;

/// A capacity bracket in nats.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub lower: f64,
    pub upper: f64,
    pub method_lower: Method,
    pub method_upper: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_len: Option<usize>,
}

impl BoundReport {
    pub fn new(lower: f64, upper: f64, method_lower: Method, method_upper: Method) -> Result<Self> {
        if lower > upper + BOUND_ORDER_TOL {
            return Err(Error::BoundOrder { lower, upper });
        }
        Ok(Self { lower, upper, method_lower, method_upper, iterations: None, grid_points: None, block_len: None })
    }

    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}
