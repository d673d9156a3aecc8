//! Cascades of identical memoryless channels.
//!
//! A square channel `P` is a Markov kernel and the cascade of `m` copies is
//! `P^m`. Its long-run behaviour is governed by the communicating classes of
//! the chain: with `T_i` the period of closed class `i`, the cascade
//! capacity tends to `log Σ_i T_i`, and that rate is achieved with zero
//! error by signalling the class and the cyclic phase within it.

use std::io::Write;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{mutual_information, Prior};
use crate::channels::{dmc_power, Dmc};
use crate::error::{invalid, Error, Result};
use crate::math::{binary_entropy_bits, gcd};

/// A communicating class of a finite Markov chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommClass {
    /// States in increasing order.
    pub states: Vec<usize>,
    /// No positive-probability transition leaves the class.
    pub closed: bool,
    /// Gcd of the cycle lengths inside the class; `None` for a single state
    /// without a self-loop.
    pub period: Option<usize>,
    /// Cyclic phase of each entry of `states`, in `0..period`.
    pub phases: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainStructure {
    pub n_states: usize,
    pub classes: Vec<CommClass>,
    /// States outside every closed class.
    pub transient: Vec<usize>,
}

impl ChainStructure {
    pub fn closed_classes(&self) -> impl Iterator<Item = &CommClass> {
        self.classes.iter().filter(|c| c.closed)
    }

    /// Index into `classes` of the class containing `state`.
    pub fn class_of(&self, state: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.states.binary_search(&state).is_ok())
    }

    /// Phase of `state` within its class.
    pub fn phase_of(&self, state: usize) -> Option<usize> {
        let class = &self.classes[self.class_of(state)?];
        let pos = class.states.binary_search(&state).ok()?;
        Some(class.phases[pos])
    }
}

fn adjacency(p: &Dmc) -> Vec<Vec<usize>> {
    p.matrix()
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(j, _)| j).collect())
        .collect()
}

/// Strongly connected components as sorted state lists, ordered by their
/// smallest state.
fn strongly_connected(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let edges = adj.iter().enumerate().flat_map(|(u, vs)| vs.iter().map(move |&v| (u as u32, v as u32)));
    let mut graph = DiGraph::<(), ()>::from_edges(edges);
    while graph.node_count() < adj.len() {
        graph.add_node(());
    }
    let mut out: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|comp| {
            let mut states: Vec<usize> = comp.into_iter().map(|v| v.index()).collect();
            states.sort_unstable();
            states
        })
        .collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Period and per-state phases of a strongly connected class, from BFS
/// levels: the period is the gcd of `level(u) + 1 − level(v)` over edges.
fn period_and_phases(adj: &[Vec<usize>], states: &[usize]) -> (Option<usize>, Vec<usize>) {
    let n = adj.len();
    let mut member = vec![false; n];
    states.iter().for_each(|&s| member[s] = true);
    let mut level = vec![usize::MAX; n];
    let root = states[0];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if member[v] && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    let mut has_edge = false;
    for &u in states {
        for &v in &adj[u] {
            if member[v] {
                has_edge = true;
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    if !has_edge {
        return (None, vec![0; states.len()]);
    }
    let phases = states.iter().map(|&s| level[s] % g).collect();
    (Some(g), phases)
}

/// Communicating classes, closure and periods of the chain with kernel `p`.
pub fn analyze_chain(p: &Dmc) -> Result<ChainStructure> {
    if !p.is_square() {
        return Err(invalid("P", format!("need a square matrix, got {}x{}", p.n_inputs(), p.n_outputs())));
    }
    let adj = adjacency(p);
    let mut class_id = vec![0usize; adj.len()];
    let components = strongly_connected(&adj);
    for (c, comp) in components.iter().enumerate() {
        comp.iter().for_each(|&s| class_id[s] = c);
    }
    let mut classes = Vec::with_capacity(components.len());
    let mut transient = Vec::new();
    for (c, states) in components.into_iter().enumerate() {
        let closed = states.iter().all(|&u| adj[u].iter().all(|&v| class_id[v] == c));
        let (period, phases) = period_and_phases(&adj, &states);
        if !closed {
            transient.extend_from_slice(&states);
        }
        classes.push(CommClass { states, closed, period, phases });
    }
    transient.sort_unstable();
    Ok(ChainStructure { n_states: adj.len(), classes, transient })
}

/// `log Σ_i T_i` over the closed classes (nats): the limit of the cascade
/// capacity as the number of stages grows.
pub fn prop1_limit(s: &ChainStructure) -> f64 {
    let total: usize = s.closed_classes().map(|c| c.period.unwrap_or(1)).sum();
    (total as f64).ln()
}

/// Zero-error code for any number of cascade stages: one codeword per
/// (closed class, phase), sent as a representative state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ZeroErrorCode {
    /// `(class index, phase, period, representative input state)`.
    pub codewords: Vec<(usize, usize, usize, usize)>,
    structure: ChainStructure,
}

impl ZeroErrorCode {
    pub fn new(structure: ChainStructure) -> Self {
        let mut codewords = Vec::new();
        for (ci, class) in structure.classes.iter().enumerate().filter(|(_, c)| c.closed) {
            let period = class.period.unwrap_or(1);
            for phase in 0..period {
                let pos = class.phases.iter().position(|&ph| ph == phase).expect("every phase is populated");
                codewords.push((ci, phase, period, class.states[pos]));
            }
        }
        Self { codewords, structure }
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Rate in nats per use of the cascade.
    pub fn rate(&self) -> f64 {
        (self.len() as f64).ln()
    }

    pub fn encode(&self, message: usize) -> usize {
        self.codewords[message].3
    }

    /// Recovers the message from the state observed after `m` stages: the
    /// chain never leaves a closed class and advances one phase per step.
    pub fn decode(&self, m: usize, received: usize) -> Option<usize> {
        let ci = self.structure.class_of(received)?;
        let phase = self.structure.phase_of(received)?;
        let (_, _, period, _) = *self.codewords.iter().find(|c| c.0 == ci)?;
        let sent = (phase + period - m % period) % period;
        self.codewords.iter().position(|c| c.0 == ci && c.1 == sent)
    }
}

/// One point of a cascade mutual-information curve (nats).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: usize,
    pub mi: f64,
    /// `η^{m−1} H(X_1)` with `η` the Dobrushin coefficient.
    pub envelope: f64,
}

/// `I(X_1; Y_m)` for `m = 1..=m_max`.
pub fn cascade_mi_curve(p: &Dmc, prior: &Prior, m_max: usize) -> Result<Vec<CurvePoint>> {
    if !p.is_square() {
        return Err(invalid("P", "cascade needs a square channel"));
    }
    if prior.len() != p.n_inputs() {
        return Err(Error::Dimension { expected: p.n_inputs(), got: prior.len() });
    }
    let eta = dobrushin_coefficient(p);
    let h = prior.entropy();
    (1..=m_max)
        .into_par_iter()
        .map(|m| {
            let mi = mutual_information(prior, &dmc_power(p, m)?)?;
            Ok(CurvePoint { m, mi, envelope: eta.powi(m as i32 - 1) * h })
        })
        .collect()
}

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "m,mi_nats,upper_envelope_nats")?;
    for p in points {
        writeln!(w, "{},{:.12e},{:.12e}", p.m, p.mi, p.envelope)?;
    }
    Ok(())
}

/// Capacity in bits of `m` cascaded BSC(p): `1 − h((1 − (1 − 2p)^m)/2)`.
pub fn bsc_cascade_capacity(p: f64, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    if m == 0 {
        return Err(invalid("m", "need at least one stage"));
    }
    let q = (1.0 - (1.0 - 2.0 * p).powi(m as i32)) / 2.0;
    Ok(1.0 - binary_entropy_bits(q))
}

/// Largest total-variation distance between two rows.
pub fn dobrushin_coefficient(p: &Dmc) -> f64 {
    let rows = p.matrix();
    let mut eta: f64 = 0.0;
    for a in 0..rows.len() {
        for b in (a + 1)..rows.len() {
            let tv: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
            eta = eta.max(tv);
        }
    }
    eta.min(1.0)
}

/// `b_m = 1/2 + 2^{-(m+1)}` for `m = 1..=l`.
pub fn example1_default_b(l: usize) -> Vec<f64> {
    (1..=l).map(|m| 0.5 + 0.5f64.powi(m as i32 + 1)).collect()
}

/// The `l`-truncated ladder: state `i` moves to `i + 1` with probability
/// `a_i = b_i / b_{i−1}` and falls to 0 otherwise; 0 is absorbing and the
/// top state `l` stays put with probability `a_l`.
///
/// `b[i - 1]` holds `b_i`, which must decrease strictly inside `(1/2, 1)`.
pub fn example1_channel(l: usize, b: &[f64]) -> Result<Dmc> {
    if l == 0 {
        return Err(invalid("L", "truncation must be at least 1"));
    }
    if b.len() != l {
        return Err(Error::Dimension { expected: l, got: b.len() });
    }
    let mut prev = 1.0;
    let mut a = vec![0.0; l + 1];
    for (i, &bi) in b.iter().enumerate() {
        if !(bi > 0.5 && bi < prev) {
            return Err(invalid("b", format!("b_{} = {bi} must lie in (1/2, b_{})", i + 1, i)));
        }
        a[i + 1] = bi / prev;
        prev = bi;
    }
    let n = l + 1;
    let mut matrix = vec![vec![0.0; n]; n];
    matrix[0][0] = 1.0;
    for i in 1..n {
        matrix[i][0] = 1.0 - a[i];
        let up = if i < l { i + 1 } else { l };
        matrix[i][up] += a[i];
    }
    Dmc::from_matrix(matrix)
}

/// `I(X_1; Y_m)` in bits for the `l`-truncated ladder with default `b`,
/// with the given prior on inputs `{0, 1}`.
pub fn example1_mi(l: usize, m: usize, prior01: [f64; 2]) -> Result<f64> {
    let ch = example1_channel(l, &example1_default_b(l))?;
    let mut probs = vec![0.0; l + 1];
    probs[0] = prior01[0];
    probs[1] = prior01[1];
    let prior = Prior::from_probs(probs)?;
    Ok(mutual_information(&prior, &dmc_power(&ch, m)?)? / std::f64::consts::LN_2)
}

/// True when two inputs have disjoint output supports, i.e. the channel
/// has positive zero-error capacity.
pub fn has_nonconfusable_pair(p: &Dmc) -> bool {
    let rows = p.matrix();
    (0..rows.len()).any(|a| {
        ((a + 1)..rows.len()).any(|b| rows[a].iter().zip(&rows[b]).all(|(x, y)| *x == 0.0 || *y == 0.0))
    })
}

/// Number of binary strings of length `n` without two consecutive zeros.
pub fn rll_no_double_zero_count(n: usize) -> Result<u128> {
    if n == 0 {
        return Err(invalid("N", "length must be at least 1"));
    }
    let (mut prev, mut cur) = (1u128, 2u128);
    for _ in 1..n {
        let next = prev.checked_add(cur).ok_or_else(|| Error::Overflow(format!("count overflows at N={n}")))?;
        (prev, cur) = (cur, next);
    }
    Ok(cur)
}

/// Growth rate in bits per symbol, estimated as `log2(c(N) / c(N − 1))`.
pub fn rll_growth_rate_bits(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid("N", "need N >= 2"));
    }
    let c = rll_no_double_zero_count(n)? as f64;
    let c_prev = rll_no_double_zero_count(n - 1)? as f64;
    Ok((c / c_prev).log2())
}
