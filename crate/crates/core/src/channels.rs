//! Channel representations and forward simulators.
//!
//! [`Dmc`] is a finite discrete memoryless channel stored as a row-stochastic
//! matrix (rows are inputs). The slotted channels with memory,
//! [`LtiPoissonChannel`] and [`LinearGaussianChannel`], convolve past
//! inputs with per-slot hitting probabilities.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{binomial_pmf, poisson_pmf, poisson_upper_tail, CompensatedSum};

/// Row-sum tolerance for a valid transition matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Default tail tolerance for truncating Poisson outputs.
pub const POISSON_TAIL_TOL: f64 = 1e-10;

/// Output label of the symbol that absorbs a truncated Poisson tail.
pub const OVERFLOW_LABEL: &str = "overflow";

/// A finite discrete memoryless channel.
///
/// Serialises as `{"inputs": [...], "outputs": [...], "matrix": [[...]]}`;
/// deserialisation re-validates the matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDmc")]
pub struct Dmc {
    inputs: Vec<String>,
    outputs: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawDmc {
    inputs: Vec<String>,
    outputs: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<RawDmc> for Dmc {
    type Error = Error;

    fn try_from(raw: RawDmc) -> Result<Self> {
        Dmc::new(raw.inputs, raw.outputs, raw.matrix)
    }
}

fn index_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

impl Dmc {
    pub fn new(inputs: Vec<String>, outputs: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if matrix.len() != inputs.len() {
            return Err(Error::Dimension { expected: inputs.len(), got: matrix.len() });
        }
        if inputs.is_empty() || outputs.is_empty() {
            return Err(invalid("matrix", "channel needs at least one input and one output"));
        }
        for (row, probs) in matrix.iter().enumerate() {
            if probs.len() != outputs.len() {
                return Err(Error::Dimension { expected: outputs.len(), got: probs.len() });
            }
            let mut sum = CompensatedSum::default();
            for (col, &value) in probs.iter().enumerate() {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::BadEntry { row, col, value });
                }
                sum.add(value);
            }
            let sum = sum.value();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSum { row, sum });
            }
        }
        Ok(Self { inputs, outputs, matrix })
    }

    /// Builds a channel with labels `"0", "1", ...` on both sides.
    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n_out = matrix.first().map_or(0, Vec::len);
        Self::new(index_labels(matrix.len()), index_labels(n_out), matrix)
    }

    pub fn identity(n: usize) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { inputs: index_labels(n), outputs: index_labels(n), matrix }
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.matrix[x]
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.matrix[x][y]
    }

    pub fn is_square(&self) -> bool {
        self.inputs.len() == self.outputs.len()
    }

    /// Draws an output index for input `x`.
    pub fn sample_output<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = &self.matrix[x];
        for (y, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return y;
            }
        }
        // Roundoff: fall back to the last symbol with positive mass.
        row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_unit(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in [0, 1], got {p}")))
    }
}

/// Binary symmetric channel with crossover probability `p`.
pub fn make_bsc(p: f64) -> Result<Dmc> {
    check_unit("p", p)?;
    Dmc::from_matrix(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
}

/// Binary erasure channel; outputs are `0`, `1` and `e`.
pub fn make_erasure(e: f64) -> Result<Dmc> {
    check_unit("e", e)?;
    Dmc::new(
        index_labels(2),
        vec!["0".into(), "1".into(), "e".into()],
        vec![vec![1.0 - e, 0.0, e], vec![0.0, 1.0 - e, e]],
    )
}

/// Z-channel: input 0 is noiseless, input 1 flips to 0 with probability `q`.
pub fn make_z(q: f64) -> Result<Dmc> {
    check_unit("q", q)?;
    Dmc::from_matrix(vec![vec![1.0, 0.0], vec![q, 1.0 - q]])
}

/// Row-stochastic product with compensated accumulation; each row is
/// renormalised to remove accumulated drift.
fn stochastic_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_out = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            let mut acc = vec![CompensatedSum::default(); n_out];
            for (k, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (cell, &v) in acc.iter_mut().zip(&b[k]) {
                    cell.add(w * v);
                }
            }
            let mut out: Vec<f64> = acc.iter().map(CompensatedSum::value).collect();
            let total: f64 = out.iter().sum();
            if total > 0.0 {
                out.iter_mut().for_each(|v| *v /= total);
            }
            out
        })
        .collect()
}

/// Cascade `P` followed by `Q`.
pub fn dmc_compose(p: &Dmc, q: &Dmc) -> Result<Dmc> {
    if p.outputs != q.inputs {
        return Err(Error::AlphabetMismatch(format!(
            "first channel has {} outputs {:?}, second has {} inputs {:?}",
            p.n_outputs(),
            p.outputs,
            q.n_inputs(),
            q.inputs
        )));
    }
    Ok(Dmc {
        inputs: p.inputs.clone(),
        outputs: q.outputs.clone(),
        matrix: stochastic_product(&p.matrix, &q.matrix),
    })
}

/// `m`-fold cascade `P^m` by repeated squaring.
pub fn dmc_power(p: &Dmc, m: usize) -> Result<Dmc> {
    if m == 0 {
        return Err(invalid("m", "cascade length must be at least 1"));
    }
    if p.inputs != p.outputs {
        return Err(Error::AlphabetMismatch("power needs identical input and output alphabets".into()));
    }
    let mut result: Option<Vec<Vec<f64>>> = None;
    let mut base = p.matrix.clone();
    let mut e = m;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => stochastic_product(&r, &base),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = stochastic_product(&base, &base);
    }
    Ok(Dmc { inputs: p.inputs.clone(), outputs: p.outputs.clone(), matrix: result.expect("m >= 1") })
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(name, "input grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(invalid(name, format!("grid values must be finite and non-negative, got {bad}")));
    }
    Ok(())
}

fn format_value(x: f64) -> String {
    format!("{x}")
}

/// Memoryless Poisson channel `Y ~ Poisson(x + background)` on an input grid.
///
/// Outputs are `0..=y_max` followed by an explicit overflow symbol holding
/// `P(Y > y_max)`. Fails when that tail exceeds [`POISSON_TAIL_TOL`] for any
/// input; see [`poisson_dmc_with_tolerance`].
pub fn poisson_dmc(background: f64, input_grid: &[f64], y_max: u64) -> Result<Dmc> {
    poisson_dmc_with_tolerance(background, input_grid, y_max, POISSON_TAIL_TOL)
}

pub fn poisson_dmc_with_tolerance(
    background: f64,
    input_grid: &[f64],
    y_max: u64,
    tail_tol: f64,
) -> Result<Dmc> {
    if !(background >= 0.0 && background.is_finite()) {
        return Err(invalid("background", format!("must be non-negative, got {background}")));
    }
    check_grid("input_grid", input_grid)?;
    let mut matrix = Vec::with_capacity(input_grid.len());
    for &x in input_grid {
        let (row, tail) = truncated_poisson_row(x + background, y_max);
        if tail > tail_tol {
            return Err(Error::TailMass { input: x, mass: tail, tolerance: tail_tol });
        }
        matrix.push(row);
    }
    let mut outputs: Vec<String> = (0..=y_max).map(|y| y.to_string()).collect();
    outputs.push(OVERFLOW_LABEL.into());
    Dmc::new(input_grid.iter().map(|&x| format_value(x)).collect(), outputs, matrix)
}

/// Poisson pmf on `0..=y_max` plus the overflow cell; also returns the tail.
pub(crate) fn truncated_poisson_row(mean: f64, y_max: u64) -> (Vec<f64>, f64) {
    let mut row: Vec<f64> = (0..=y_max).map(|y| poisson_pmf(y, mean)).collect();
    let tail = poisson_upper_tail(y_max, mean);
    row.push(tail);
    (row, tail)
}

/// Ligand-receptor channel: the binding probability `p` in the grid yields
/// `Binomial(n_receptors, p)` bound receptors.
pub fn ligand_binomial_dmc(n_receptors: u64, input_grid: &[f64]) -> Result<Dmc> {
    if n_receptors == 0 {
        return Err(invalid("n_receptors", "must be at least 1"));
    }
    if input_grid.is_empty() {
        return Err(invalid("input_grid", "input grid is empty"));
    }
    for &p in input_grid {
        check_unit("input_grid", p)?;
    }
    let matrix = input_grid
        .iter()
        .map(|&p| {
            let mut row: Vec<f64> = (0..=n_receptors).map(|k| binomial_pmf(k, n_receptors, p)).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        })
        .collect();
    Dmc::new(
        input_grid.iter().map(|&p| format_value(p)).collect(),
        (0..=n_receptors).map(|k| k.to_string()).collect(),
        matrix,
    )
}

/// Uniform grid of `points` intensities on `[0, peak]`.
pub fn uniform_grid(peak: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| peak * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Default number of points for experiment grids.
pub const DEFAULT_GRID_POINTS: usize = 33;

fn check_taps(taps: &[f64]) -> Result<()> {
    if taps.is_empty() {
        return Err(invalid("taps", "need at least one tap"));
    }
    if let Some(bad) = taps.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(invalid("taps", format!("taps must be non-negative, got {bad}")));
    }
    Ok(())
}

/// Slotted Poisson channel with intersymbol interference:
/// `Y_i ~ Poisson(background + Σ_j taps[j]·X_{i−j})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LtiPoissonChannel {
    taps: Vec<f64>,
    background: f64,
    peak: f64,
    average: f64,
}

impl LtiPoissonChannel {
    pub fn new(taps: Vec<f64>, background: f64, peak: f64, average: f64) -> Result<Self> {
        check_taps(&taps)?;
        if taps.iter().sum::<f64>() > 1.0 + ROW_SUM_TOL {
            return Err(invalid("taps", "hitting probabilities sum above 1"));
        }
        if !(background >= 0.0 && background.is_finite()) {
            return Err(invalid("background", format!("must be non-negative, got {background}")));
        }
        if !(average > 0.0 && average <= peak && peak.is_finite()) {
            return Err(invalid("Es", format!("need 0 < Es <= A, got Es={average}, A={peak}")));
        }
        Ok(Self { taps, background, peak, average })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn average(&self) -> f64 {
        self.average
    }

    pub fn memory_depth(&self) -> usize {
        self.taps.len() - 1
    }

    /// Poisson mean of slot `i` given the inputs up to and including `i`.
    pub fn slot_mean(&self, inputs: &[f64], i: usize) -> f64 {
        let interference: f64 = self
            .taps
            .iter()
            .enumerate()
            .take(i + 1)
            .map(|(j, p)| p * inputs[i - j])
            .sum();
        self.background + interference
    }

    fn check_inputs(&self, inputs: &[f64]) -> Result<()> {
        match inputs.iter().find(|x| !(**x >= 0.0 && **x <= self.peak)) {
            Some(bad) => Err(invalid("inputs", format!("intensity {bad} outside [0, {}]", self.peak))),
            None => Ok(()),
        }
    }

    /// Draws one output per slot; outputs are conditionally independent
    /// given the inputs.
    pub fn simulate(&self, inputs: &[f64], seed: u64) -> Result<Vec<u64>> {
        self.check_inputs(inputs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.draw(inputs, &mut rng))
    }

    fn draw<R: RngCore + ?Sized>(&self, inputs: &[f64], rng: &mut R) -> Vec<u64> {
        (0..inputs.len())
            .map(|i| {
                let mean = self.slot_mean(inputs, i);
                if mean > 0.0 {
                    Poisson::new(mean).expect("positive mean").sample(rng) as u64
                } else {
                    0
                }
            })
            .collect()
    }
}

/// Signal-dependent Gaussian model of the molecule count in the receiver
/// volume: `Y_j = c_j + N(0, c_j / V_R)` with `c_j = Σ_k taps[k]·X_{j−k}`.
///
/// Noise is drawn independently per slot, which corresponds to slots long
/// enough that counts in neighbouring slots decorrelate. Outputs may be
/// negative; they are not clamped.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearGaussianChannel {
    taps: Vec<f64>,
    receiver_volume: f64,
}

impl LinearGaussianChannel {
    pub fn new(taps: Vec<f64>, receiver_volume: f64) -> Result<Self> {
        check_taps(&taps)?;
        if !(receiver_volume > 0.0) {
            return Err(invalid("V_R", format!("must be positive, got {receiver_volume}")));
        }
        Ok(Self { taps, receiver_volume })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn receiver_volume(&self) -> f64 {
        self.receiver_volume
    }

    /// Noiseless convolution `c_j`.
    pub fn convolution(&self, inputs: &[f64], j: usize) -> f64 {
        self.taps.iter().enumerate().take(j + 1).map(|(k, p)| p * inputs[j - k]).sum()
    }

    pub fn simulate(&self, inputs: &[f64], seed: u64) -> Result<Vec<f64>> {
        if let Some(bad) = inputs.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(invalid("inputs", format!("inputs must be non-negative, got {bad}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..inputs.len())
            .map(|j| {
                let c = self.convolution(inputs, j);
                let z: f64 = rng.sample(StandardNormal);
                c + (c / self.receiver_volume).sqrt() * z
            })
            .collect())
    }
}

/// A slotted channel that can be driven with an input sequence; used by the
/// i.i.d. single-letter estimators.
pub trait SlotChannel {
    /// Number of past inputs that influence the current output.
    fn memory_depth(&self) -> usize;

    /// Transmits `inputs` and returns one output symbol per slot.
    fn transmit(&self, inputs: &[f64], rng: &mut dyn RngCore) -> Vec<u64>;
}

impl SlotChannel for LtiPoissonChannel {
    fn memory_depth(&self) -> usize {
        LtiPoissonChannel::memory_depth(self)
    }

    fn transmit(&self, inputs: &[f64], rng: &mut dyn RngCore) -> Vec<u64> {
        self.draw(inputs, rng)
    }
}

/// A memoryless channel driven by input indices (the input value is the
/// row index).
impl SlotChannel for Dmc {
    fn memory_depth(&self) -> usize {
        0
    }

    fn transmit(&self, inputs: &[f64], rng: &mut dyn RngCore) -> Vec<u64> {
        inputs.iter().map(|&x| self.sample_output(x as usize, rng) as u64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_stochastic(d: &Dmc) {
        for row in d.matrix() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= ROW_SUM_TOL);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn constructors() {
        assert_eq!(make_bsc(0.0).unwrap().matrix(), Dmc::identity(2).matrix());
        let e = make_erasure(0.3).unwrap();
        assert_eq!(e.row(0), &[0.7, 0.0, 0.3]);
        assert_eq!(e.row(1), &[0.0, 0.7, 0.3]);
        assert_eq!(make_z(0.5).unwrap().matrix(), &[vec![1.0, 0.0], vec![0.5, 0.5]]);
        assert!(make_bsc(1.5).is_err());
        assert!(make_z(-0.1).is_err());
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(matches!(Dmc::from_matrix(vec![vec![0.5, 0.4]]), Err(Error::RowSum { .. })));
        assert!(matches!(Dmc::from_matrix(vec![vec![1.5, -0.5]]), Err(Error::BadEntry { .. })));
        assert!(Dmc::from_matrix(vec![vec![1.0], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn compose_and_power() {
        let p = make_bsc(0.1).unwrap();
        assert_eq!(dmc_power(&p, 1).unwrap(), p);
        let two = dmc_power(&p, 2).unwrap();
        let expected = make_bsc(0.18).unwrap();
        for (a, b) in two.matrix().iter().flatten().zip(expected.matrix().iter().flatten()) {
            assert!((a - b).abs() < 1e-15);
        }
        let q = make_erasure(0.2).unwrap();
        let c = dmc_compose(&Dmc::identity(2), &q).unwrap();
        assert_eq!(c.matrix(), q.matrix());
        assert!(matches!(dmc_compose(&q, &p), Err(Error::AlphabetMismatch(_))));
        assert!(dmc_power(&q, 2).is_err());
        assert!(dmc_power(&p, 0).is_err());
    }

    #[test]
    fn poisson_rows() {
        let d = poisson_dmc(0.0, &[0.0], 10).unwrap();
        assert_eq!(d.row(0)[0], 1.0);
        assert!(d.row(0)[1..].iter().all(|&p| p == 0.0));

        let d = poisson_dmc(1.0, &[0.0, 4.0], 30).unwrap();
        assert_stochastic(&d);
        assert_eq!(d.n_outputs(), 32);
        assert_eq!(d.outputs().last().unwrap(), OVERFLOW_LABEL);
        for (row, mean) in d.matrix().iter().zip([1.0, 5.0]) {
            let mut p = (-mean as f64).exp();
            for (y, &v) in row[..31].iter().enumerate() {
                assert!((v - p).abs() < 1e-15, "y={y}");
                p *= mean / (y + 1) as f64;
            }
            let m: f64 = row[..31].iter().enumerate().map(|(y, p)| y as f64 * p).sum();
            assert!((m - mean).abs() < 1e-9);
        }
        assert!(matches!(poisson_dmc(1.0, &[20.0], 10), Err(Error::TailMass { .. })));
    }

    #[test]
    fn ligand_rows() {
        let d = ligand_binomial_dmc(10, &[0.0, 0.3, 1.0]).unwrap();
        assert_eq!(d.row(0)[0], 1.0);
        assert_eq!(d.row(2)[10], 1.0);
        // Product-form oracle: C(n,k) p^k (1-p)^(n-k) with integer binomials.
        let mut choose = 1.0;
        for k in 0..=10u32 {
            let direct = choose * 0.3f64.powi(k as i32) * 0.7f64.powi(10 - k as i32);
            assert!((d.row(1)[k as usize] - direct).abs() < 1e-14);
            choose = choose * (10 - k) as f64 / (k + 1) as f64;
        }
        assert!(ligand_binomial_dmc(10, &[1.2]).is_err());
        assert!(ligand_binomial_dmc(0, &[0.5]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = poisson_dmc(0.5, &[0.0, 1.0 / 3.0, 2.0], 25).unwrap();
        let back = Dmc::from_json(&d.to_json().unwrap()).unwrap();
        for (a, b) in d.matrix().iter().flatten().zip(back.matrix().iter().flatten()) {
            assert!((a - b).abs() <= 1e-15 * a.abs());
        }
        assert_eq!(back.inputs(), d.inputs());
        let bad = r#"{"inputs":["a"],"outputs":["x","y"],"matrix":[[0.3,0.3]]}"#;
        assert!(Dmc::from_json(bad).is_err());
    }

    #[test]
    fn lti_validation_and_zero_input() {
        assert!(LtiPoissonChannel::new(vec![0.8, 0.5], 0.0, 4.0, 1.0).is_err());
        assert!(LtiPoissonChannel::new(vec![0.8], 0.0, 4.0, 5.0).is_err());
        let ch = LtiPoissonChannel::new(vec![0.8, 0.2], 0.0, 4.0, 1.0).unwrap();
        assert_eq!(ch.simulate(&[0.0; 50], 3).unwrap(), vec![0; 50]);
        assert!(ch.simulate(&[5.0], 3).is_err());
        assert_eq!(ch.slot_mean(&[4.0, 0.0, 4.0], 1), 0.8);
        assert!((ch.slot_mean(&[4.0, 0.0, 4.0], 2) - 3.2).abs() < 1e-15);
    }

    #[test]
    fn gaussian_zero_and_noiseless_limit() {
        let ch = LinearGaussianChannel::new(vec![0.6, 0.3], 2.0).unwrap();
        assert_eq!(ch.simulate(&[0.0; 20], 1).unwrap(), vec![0.0; 20]);
        assert!(ch.simulate(&[-1.0], 1).is_err());
        let inputs = [3.0, 0.0, 5.0, 1.0];
        let ch = LinearGaussianChannel::new(vec![0.6, 0.3], 1e14).unwrap();
        let y = ch.simulate(&inputs, 9).unwrap();
        for (j, &v) in y.iter().enumerate() {
            assert!((v - ch.convolution(&inputs, j)).abs() < 1e-5);
        }
    }
}
