use molcap::capacity::*;
use molcap::channels::*;
use molcap::math::{poisson_pmf, poisson_y_max};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_channel(rng: &mut impl Rng, n_in: usize, n_out: usize, sparse: bool) -> Dmc {
    let rows = (0..n_in)
        .map(|_| {
            let mut row: Vec<f64> = (0..n_out)
                .map(|_| if sparse && rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() + 1e-3 })
                .collect();
            if row.iter().all(|&v| v == 0.0) {
                row[0] = 1.0;
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
            row
        })
        .collect();
    Dmc::from_matrix(rows).unwrap()
}

fn channel_strategy() -> impl Strategy<Value = (Dmc, Prior)> {
    (2usize..6, 2usize..7, any::<u64>(), any::<bool>()).prop_map(|(n_in, n_out, seed, sparse)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channel(&mut rng, n_in, n_out, sparse);
        let w: Vec<f64> = (0..n_in).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let prior = Prior::from_probs(w.iter().map(|v| v / total).collect()).unwrap();
        (ch, prior)
    })
}

/// `I(X;Y)` from the joint law, written independently of the library.
fn direct_mi(prior: &[f64], ch: &Dmc) -> f64 {
    let q: Vec<f64> = (0..ch.n_outputs()).map(|y| (0..ch.n_inputs()).map(|x| prior[x] * ch.prob(x, y)).sum()).collect();
    let mut mi = 0.0;
    for x in 0..ch.n_inputs() {
        for y in 0..ch.n_outputs() {
            let j = prior[x] * ch.prob(x, y);
            if j > 0.0 {
                mi += j * (ch.prob(x, y) / q[y]).ln();
            }
        }
    }
    mi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mutual_information_is_bounded((ch, prior) in channel_strategy()) {
        let mi = mutual_information(&prior, &ch).unwrap();
        prop_assert!(mi >= 0.0);
        prop_assert!(mi <= (ch.n_inputs() as f64).ln() + 1e-12);
        prop_assert!(mi <= (ch.n_outputs() as f64).ln() + 1e-12);
        prop_assert!(mi <= prior.entropy() + 1e-12);
        prop_assert!((mi - direct_mi(prior.probs(), &ch)).abs() < 1e-12);
    }

    #[test]
    fn symmetrized_kl_and_topsoe_dominate_mi((ch, prior) in channel_strategy(), seed in any::<u64>()) {
        let mi = mutual_information(&prior, &ch).unwrap();
        prop_assert!(sym_kl_value(&prior, &ch).unwrap() >= mi - 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<f64> = (0..ch.n_outputs()).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = q.iter().sum();
        let q_out = Prior::from_probs(q.iter().map(|v| v / total).collect()).unwrap();
        prop_assert!(topsoe_upper(&prior, &ch, &q_out).unwrap() >= mi - 1e-12);
    }

    #[test]
    fn blahut_arimoto_bracket_holds((ch, _) in channel_strategy()) {
        let ba = blahut_arimoto(&ch, &BaOptions::default(), None).unwrap();
        prop_assert!(ba.width() <= 1e-9);
        prop_assert!(ba.capacity <= ba.upper);
        prop_assert!((mutual_information(&ba.prior, &ch).unwrap() - ba.capacity).abs() < 1e-12);
        for &(lo, hi) in &ba.trace {
            prop_assert!(lo <= ba.upper + 1e-12);
            prop_assert!(hi >= ba.capacity - 1e-12);
        }
        // Any prior's mutual information is a lower bound, the uniform one included.
        let uniform = Prior::uniform(ch.n_inputs());
        prop_assert!(mutual_information(&uniform, &ch).unwrap() <= ba.upper + 1e-12);
    }

    #[test]
    fn compositions_of_powers_agree(seed in any::<u64>(), a in 1usize..6, b in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_channel(&mut rng, 4, 4, true);
        let joint = dmc_power(&p, a + b).unwrap();
        let split = dmc_compose(&dmc_power(&p, a).unwrap(), &dmc_power(&p, b).unwrap()).unwrap();
        for (r1, r2) in joint.matrix().iter().zip(split.matrix()) {
            for (u, v) in r1.iter().zip(r2) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn poisson_covariance_dominates_mi(seed in any::<u64>(), lam0 in 0.1f64..4.0, peak in 1.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = uniform_grid(peak, 9);
        let w: Vec<f64> = (0..grid.len()).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let prior = Prior::new(grid.clone(), w.iter().map(|v| v / total).collect()).unwrap();
        let dmc = poisson_dmc(lam0, &grid, poisson_y_max(peak + lam0, 1e-12)).unwrap();
        let index_prior = Prior::from_probs(prior.probs().to_vec()).unwrap();
        let mi = mutual_information(&index_prior, &dmc).unwrap();
        let cov = poisson_sym_kl_cov(&prior, lam0).unwrap();
        prop_assert!(cov >= mi - 1e-9);
        // The discretised channel's symmetrized KL agrees with the covariance formula
        // up to the truncation mass.
        prop_assert!((sym_kl_value(&index_prior, &dmc).unwrap() - cov).abs() < 1e-6);
    }

    #[test]
    fn poisson_closed_form_is_continuous(peak in 0.5f64..50.0, lam0 in 0.01f64..10.0) {
        let at = poisson_sym_kl_max(peak / 2.0, peak, lam0).unwrap();
        let below = poisson_sym_kl_max(peak / 2.0 * (1.0 - 1e-9), peak, lam0).unwrap();
        prop_assert!((at - below).abs() <= 1e-8 * at.max(1.0));
        let two_point = poisson_sym_kl_cov(&poisson_two_point_prior(peak / 2.0, peak).unwrap(), lam0).unwrap();
        prop_assert!((two_point - at).abs() <= 1e-12 * at.max(1.0));
    }

    #[test]
    fn dmc_json_round_trip((ch, _) in channel_strategy()) {
        let back = Dmc::from_json(&ch.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.inputs(), ch.inputs());
        for (r1, r2) in back.matrix().iter().zip(ch.matrix()) {
            for (u, v) in r1.iter().zip(r2) {
                prop_assert!((u - v).abs() <= 1e-15 * v.abs());
            }
        }
    }
}

#[test]
fn sym_kl_bound_dominates_capacity_on_random_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..20 {
        let ch = random_channel(&mut rng, 2 + i % 4, 2 + (i * 7) % 5, false);
        let ba = blahut_arimoto(&ch, &BaOptions::default(), None).unwrap();
        let bound = sym_kl_capacity_bound(&ch, None, &SymKlOptions::default()).unwrap();
        assert!(bound.value >= ba.capacity - 1e-12, "channel {i}: {} < {}", bound.value, ba.capacity);
        // The maximiser must beat every start, in particular the BA optimiser.
        assert!(bound.value >= sym_kl_value(&ba.prior, &ch).unwrap() - 1e-9);
    }
}

#[test]
fn sym_kl_is_infinite_for_disjoint_rows() {
    let bound = sym_kl_capacity_bound(&Dmc::identity(3), None, &SymKlOptions::default()).unwrap();
    assert!(bound.value.is_infinite());
}

#[test]
fn constrained_sym_kl_respects_the_closed_form() {
    let (es, a, lam0) = (1.0, 4.0, 1.0);
    let grid = uniform_grid(a, 17);
    let dmc = poisson_dmc(lam0, &grid, poisson_y_max(a + lam0, 1e-12)).unwrap();
    let cost = CostConstraint { costs: grid.clone(), budget: es };
    let bound = sym_kl_capacity_bound(&dmc, Some(&cost), &SymKlOptions::default()).unwrap();
    let closed = poisson_sym_kl_max(es, a, lam0).unwrap();
    assert!((closed - 0.75 * 5f64.ln()).abs() < 1e-12);
    assert!(bound.value <= closed + 1e-6, "{} > {closed}", bound.value);
    // The grid contains 0 and A, so the on-off optimiser is feasible.
    assert!(bound.value >= closed - 1e-6, "{} < {closed}", bound.value);
    let ba = blahut_arimoto(&dmc, &BaOptions::default(), Some(&cost)).unwrap();
    assert!(ba.capacity <= bound.value);
    assert!(ba.prior.expectation(&grid) <= es + COST_TOL);
}

#[test]
fn topsoe_equality_cases() {
    let bsc = make_bsc(0.1).unwrap();
    let uniform = Prior::uniform(2);
    let mi = mutual_information(&uniform, &bsc).unwrap();
    assert!((topsoe_upper(&uniform, &bsc, &Prior::uniform(2)).unwrap() - mi).abs() < 1e-15);
    let skew = Prior::from_probs(vec![0.6, 0.4]).unwrap();
    assert!(topsoe_upper(&uniform, &bsc, &skew).unwrap() > mi + 1e-3);
}

/// Exact single-letter rate of the two-tap Poisson channel with i.i.d.
/// inputs: slot `i` sees the mixture over the previous input.
fn exact_two_tap_iid_mi(taps: [f64; 2], lam0: f64, support: &[f64], probs: &[f64]) -> f64 {
    let y_max = poisson_y_max(taps[0] * support.iter().cloned().fold(0.0, f64::max) * 2.0 + lam0 + 10.0, 1e-14);
    let rows: Vec<Vec<f64>> = support
        .iter()
        .map(|&x| {
            (0..=y_max)
                .map(|y| {
                    support.iter().zip(probs).map(|(&prev, &pp)| pp * poisson_pmf(y, taps[0] * x + taps[1] * prev + lam0)).sum()
                })
                .collect()
        })
        .collect();
    let q: Vec<f64> = (0..rows[0].len()).map(|y| rows.iter().zip(probs).map(|(r, p)| p * r[y]).sum()).collect();
    let mut mi = 0.0;
    for (r, &p) in rows.iter().zip(probs) {
        for (y, &w) in r.iter().enumerate() {
            if w > 0.0 {
                mi += p * w * (w / q[y]).ln();
            }
        }
    }
    mi
}

#[test]
fn iid_rate_of_the_lti_poisson_channel() {
    let (lam0, peak) = (0.5, 4.0);
    let support = [0.0, peak];
    let probs = [0.5, 0.5];
    let prior = Prior::new(support.to_vec(), probs.to_vec()).unwrap();
    let ch = LtiPoissonChannel::new(vec![0.8, 0.2], lam0, peak, peak).unwrap();
    let exact = exact_two_tap_iid_mi([0.8, 0.2], lam0, &support, &probs);
    let est = iid_lower_bound(&ch, &prior, 200_000, 17, &IidOptions::default()).unwrap();
    let slack = est.ci_width().max(1e-3);
    assert!((est.value - exact).abs() < 2.0 * slack, "{} vs exact {exact}", est.value);

    // Interference only adds independent noise to the wanted tap.
    let clean = exact_two_tap_iid_mi([0.8, 0.0], lam0, &support, &probs);
    assert!(exact < clean - 1e-3, "{exact} vs {clean}");

    let grid = [0.0, peak];
    for r in 1..=3 {
        let upper = sandwich_upper(&ch, r, &grid, &SandwichOptions::default()).unwrap();
        assert!(exact <= upper + 1e-9, "r={r}: {exact} > {upper}");
    }
}

#[test]
fn single_tap_iid_rate_is_the_memoryless_mi() {
    let (lam0, peak) = (1.0, 3.0);
    let grid = [0.0, 1.5, 3.0];
    let prior = Prior::new(grid.to_vec(), vec![0.5, 0.2, 0.3]).unwrap();
    let ch = LtiPoissonChannel::new(vec![1.0, 0.0], lam0, peak, peak).unwrap();
    let dmc = poisson_dmc(lam0, &grid, poisson_y_max(peak + lam0, 1e-12)).unwrap();
    let exact = mutual_information(&Prior::from_probs(vec![0.5, 0.2, 0.3]).unwrap(), &dmc).unwrap();
    let est = iid_lower_bound(&ch, &prior, 200_000, 5, &IidOptions::default()).unwrap();
    assert!((est.value - exact).abs() < 2.0 * est.ci_width().max(1e-3), "{} vs {exact}", est.value);

    let memoryless = make_bsc(0.2).unwrap();
    let bsc_prior = Prior::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
    let est = iid_lower_bound(&memoryless, &bsc_prior, 100_000, 6, &IidOptions::default()).unwrap();
    let exact = mutual_information(&Prior::uniform(2), &memoryless).unwrap();
    assert!((est.value - exact).abs() < 2.0 * est.ci_width().max(1e-3));
}

#[test]
fn sandwich_bounds_nest() {
    let ch = LtiPoissonChannel::new(vec![0.7, 0.3], 0.5, 3.0, 3.0).unwrap();
    let opts = SandwichOptions::default();
    for grid in [vec![0.0, 3.0], vec![0.0, 1.5, 3.0]] {
        let reports: Vec<BoundReport> = (1..=3).map(|r| sandwich(&ch, r, &grid, &opts).unwrap()).collect();
        let cap = (grid.len() as f64).ln();
        for a in &reports {
            assert!(a.lower >= 0.0 && a.upper <= cap + 1e-9);
            for b in &reports {
                assert!(a.lower <= b.upper + 1e-9, "{} > {}", a.lower, b.upper);
            }
        }
        assert!(reports[2].gap() <= reports[0].gap());
        assert_eq!(sandwich_lower(&ch, 2, &grid, &opts).unwrap(), reports[1].lower);
        assert_eq!(sandwich_upper(&ch, 2, &grid, &opts).unwrap(), reports[1].upper);
    }
}

#[test]
fn lti_simulation_matches_the_poisson_marginal() {
    // Inputs fixed so that every slot has effective mean 0.8·4 + 0.2·2 + 0.5.
    let ch = LtiPoissonChannel::new(vec![0.8, 0.2], 0.5, 4.0, 4.0).unwrap();
    let n = 100_000;
    let inputs: Vec<f64> = (0..n + 1).map(|i| if i == 0 { 2.0 } else if i % 2 == 1 { 4.0 } else { 2.0 }).collect();
    let out = ch.simulate(&inputs, 99).unwrap();
    let mean = 0.8 * 4.0 + 0.2 * 2.0 + 0.5;
    let y_max = poisson_y_max(mean, 1e-3);
    let mut counts = vec![0u64; y_max as usize + 2];
    let mut used = 0u64;
    for i in (1..=n).step_by(2) {
        assert!((ch.slot_mean(&inputs, i) - mean).abs() < 1e-12);
        counts[(out[i]).min(y_max + 1) as usize] += 1;
        used += 1;
    }
    let row = poisson_dmc_with_tolerance(0.5, &[mean - 0.5], y_max, 1.0).unwrap().row(0).to_vec();
    let mut chi2 = 0.0;
    for (c, p) in counts.iter().zip(row) {
        let expected = p * used as f64;
        chi2 += (*c as f64 - expected).powi(2) / expected;
    }
    // 99th percentile of chi-square with y_max + 1 degrees of freedom, Wilson–Hilferty.
    let k = (y_max + 1) as f64;
    let crit = k * (1.0 - 2.0 / (9.0 * k) + 2.326 * (2.0 / (9.0 * k)).sqrt()).powi(3);
    assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
}

#[test]
fn linear_gaussian_moments() {
    let ch = LinearGaussianChannel::new(vec![1.0], 4.0).unwrap();
    let n = 100_000;
    let out = ch.simulate(&vec![3.0; n], 12).unwrap();
    let mean = out.iter().sum::<f64>() / n as f64;
    let var = out.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - 3.0).abs() < 4.0 * (0.75f64 / n as f64).sqrt());
    assert!((var - 0.75).abs() < 0.02, "{var}");
    assert!(ch.simulate(&vec![0.0; 10], 1).unwrap().iter().all(|&y| y == 0.0));
    let sharp = LinearGaussianChannel::new(vec![0.6, 0.4], 1e12).unwrap();
    let inputs = [1.0, 2.0, 0.0, 5.0];
    let y = sharp.simulate(&inputs, 3).unwrap();
    for j in 0..inputs.len() {
        assert!((y[j] - sharp.convolution(&inputs, j)).abs() < 1e-4);
    }
}

#[test]
fn ligand_channel_matches_product_form() {
    let grid = [0.0, 0.3, 1.0];
    let dmc = ligand_binomial_dmc(10, &grid).unwrap();
    for (x, &p) in grid.iter().enumerate() {
        for k in 0..=10u64 {
            let coeff = (1..=k).fold(1.0, |acc, i| acc * (10 - k + i) as f64 / i as f64);
            let direct = coeff * p.powi(k as i32) * (1.0 - p).powi((10 - k) as i32);
            assert!((dmc.prob(x, k as usize) - direct).abs() < 1e-14, "x={p} k={k}");
        }
    }
}
