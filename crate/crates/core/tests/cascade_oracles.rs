use std::f64::consts::LN_2;

use molcap::capacity::{blahut_arimoto, mutual_information, BaOptions, Prior};
use molcap::cascade::*;
use molcap::channels::{dmc_power, make_bsc, Dmc};
use molcap::math::{binary_entropy_bits, gcd};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random chain with a sparse positive pattern; every row gets at least
/// one entry.
fn sparse_chain(n: usize, seed: u64, density: f64) -> Dmc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let mut row: Vec<f64> =
                (0..n).map(|_| if rng.random::<f64>() < density { rng.random::<f64>() + 0.05 } else { 0.0 }).collect();
            if row.iter().all(|&v| v == 0.0) {
                row[rng.random_range(0..n)] = 1.0;
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
            row
        })
        .collect();
    Dmc::from_matrix(rows).unwrap()
}

fn edges(p: &Dmc) -> Vec<Vec<bool>> {
    p.matrix().iter().map(|r| r.iter().map(|&v| v > 0.0).collect()).collect()
}

/// `walks[l][i][j]`: a walk of exactly `l` steps leads from `i` to `j`.
fn walk_table(p: &Dmc, max_len: usize) -> Vec<Vec<Vec<bool>>> {
    let e = edges(p);
    let n = e.len();
    let mut table = vec![(0..n).map(|i| (0..n).map(|j| i == j).collect()).collect::<Vec<Vec<bool>>>()];
    for l in 1..=max_len {
        let prev = &table[l - 1];
        let next = (0..n).map(|i| (0..n).map(|j| (0..n).any(|k| prev[i][k] && e[k][j])).collect()).collect();
        table.push(next);
    }
    table
}

fn check_structure_against_brute_force(p: &Dmc) {
    let n = p.n_inputs();
    let walks = walk_table(p, 12);
    let reach = |i: usize, j: usize| (0..n).any(|l| walks[l][i][j]);
    let e = edges(p);
    let s = analyze_chain(p).unwrap();

    // Classes partition the states and are exactly the mutual-reachability classes.
    let mut seen = vec![0; n];
    for class in &s.classes {
        for &u in &class.states {
            seen[u] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
    for i in 0..n {
        for j in 0..n {
            let same = s.class_of(i) == s.class_of(j);
            assert_eq!(same, reach(i, j) && reach(j, i), "states {i},{j}");
        }
    }
    for class in &s.classes {
        let leaves = class.states.iter().any(|&u| (0..n).any(|v| e[u][v] && !class.states.contains(&v)));
        assert_eq!(class.closed, !leaves);
        // Period: gcd of all closed-walk lengths up to 12 (enough for n ≤ 6).
        let mut g = 0;
        for l in 1..=12 {
            if class.states.iter().any(|&u| walks[l][u][u]) {
                g = gcd(g, l);
            }
        }
        assert_eq!(class.period, if g == 0 { None } else { Some(g) }, "class {:?}", class.states);
        if let Some(t) = class.period {
            // Phases advance by one along every edge inside the class.
            for &u in &class.states {
                for &v in &class.states {
                    if e[u][v] {
                        assert_eq!((s.phase_of(u).unwrap() + 1) % t, s.phase_of(v).unwrap());
                    }
                }
            }
        }
    }
    let mut transient: Vec<usize> =
        s.classes.iter().filter(|c| !c.closed).flat_map(|c| c.states.iter().copied()).collect();
    transient.sort_unstable();
    assert_eq!(transient, s.transient);
}

#[test]
fn structure_agrees_with_brute_force_on_random_chains() {
    for seed in 0..300 {
        let density = [0.15, 0.25, 0.4][seed as usize % 3];
        check_structure_against_brute_force(&sparse_chain(6, seed, density));
    }
}

#[test]
fn structure_of_permutation_cycles() {
    // A 6-cycle and a 2-cycle plus a 3-cycle: periods come from the cycle lengths.
    let perm = |map: &[usize]| {
        let n = map.len();
        Dmc::from_matrix((0..n).map(|i| (0..n).map(|j| if map[i] == j { 1.0 } else { 0.0 }).collect()).collect()).unwrap()
    };
    let s = analyze_chain(&perm(&[1, 2, 3, 4, 5, 0])).unwrap();
    assert_eq!(s.classes.len(), 1);
    assert_eq!(s.classes[0].period, Some(6));
    assert!((prop1_limit(&s) - 6f64.ln()).abs() < 1e-15);
    let s = analyze_chain(&perm(&[1, 0, 3, 4, 2])).unwrap();
    let mut periods: Vec<usize> = s.closed_classes().map(|c| c.period.unwrap()).collect();
    periods.sort_unstable();
    assert_eq!(periods, vec![2, 3]);
    assert!((prop1_limit(&s) - 5f64.ln()).abs() < 1e-15);
    check_structure_against_brute_force(&perm(&[1, 0, 3, 4, 2, 5]));
}

#[test]
fn three_state_example() {
    let p = Dmc::from_matrix(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.5, 0.5, 0.0]]).unwrap();
    let s = analyze_chain(&p).unwrap();
    assert_eq!(s.closed_classes().count(), 2);
    assert_eq!(s.transient, vec![2]);
    assert!((prop1_limit(&s) - LN_2).abs() < 1e-15);
    check_structure_against_brute_force(&p);
}

#[test]
fn long_cascades_never_beat_the_limit() {
    for seed in 0..40 {
        let p = sparse_chain(5, 1000 + seed, 0.35);
        let limit = prop1_limit(&analyze_chain(&p).unwrap());
        let cap = blahut_arimoto(&dmc_power(&p, 500).unwrap(), &BaOptions::default(), None).unwrap();
        assert!(cap.capacity <= limit + 1e-4, "seed {seed}: {} > {limit}", cap.capacity);
    }
}

#[test]
fn zero_error_code_on_random_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..40 {
        let p = sparse_chain(6, 2000 + seed, 0.3);
        let s = analyze_chain(&p).unwrap();
        let limit = prop1_limit(&s);
        let code = ZeroErrorCode::new(s);
        assert!((code.rate() - limit).abs() < 1e-15);
        for _ in 0..250 {
            let msg = rng.random_range(0..code.len());
            let m = rng.random_range(1..60);
            let mut state = code.encode(msg);
            for _ in 0..m {
                state = p.sample_output(state, &mut rng);
            }
            assert_eq!(code.decode(m, state), Some(msg), "seed {seed}");
        }
    }
}

#[test]
fn bsc_closed_form_against_matrix_powers() {
    assert!((bsc_cascade_capacity(0.1, 2).unwrap() - (1.0 - binary_entropy_bits(0.18))).abs() < 1e-15);
    assert!((bsc_cascade_capacity(0.1, 2).unwrap() - 0.3199).abs() < 1e-4);
    for m in 1..=20 {
        assert_eq!(bsc_cascade_capacity(0.0, m).unwrap(), 1.0);
        assert_eq!(bsc_cascade_capacity(0.5, m).unwrap(), 0.0);
    }
    let p = make_bsc(0.1).unwrap();
    for m in [1, 2, 5, 12] {
        let ba = blahut_arimoto(&dmc_power(&p, m).unwrap(), &BaOptions::default(), None).unwrap();
        assert!((ba.capacity / LN_2 - bsc_cascade_capacity(0.1, m).unwrap()).abs() < 1e-9);
    }
    assert!((dobrushin_coefficient(&p) - 0.8).abs() < 1e-15);
}

#[test]
fn example1_is_a_z_channel() {
    for l in [1usize, 3, 8, 20] {
        let b = example1_default_b(l);
        let ch = example1_channel(l, &b).unwrap();
        for m in 1..=l {
            let bm = b[m - 1];
            for p1 in [0.5, 0.3] {
                let z = binary_entropy_bits(p1 * bm) - p1 * binary_entropy_bits(bm);
                let mi = example1_mi(l, m, [1.0 - p1, p1]).unwrap();
                assert!((mi - z).abs() < 1e-12, "l={l} m={m}: {mi} vs {z}");
            }
            let pm = dmc_power(&ch, m).unwrap();
            assert_eq!(pm.prob(0, 0), 1.0);
            assert!(!has_nonconfusable_pair(&pm));
        }
    }
    // b_m → 1/2 gives h(1/4) − 1/2 bits.
    let limit = binary_entropy_bits(0.25) - 0.5;
    assert!((example1_mi(20, 20, [0.5, 0.5]).unwrap() - limit).abs() < 1e-3);
    assert!(example1_channel(2, &[0.7, 0.8]).is_err());
    assert!(example1_channel(2, &[0.7, 0.4]).is_err());
}

#[test]
fn fibonacci_count_by_enumeration() {
    for n in 1..=20usize {
        let brute = (0u32..1 << n).filter(|s| (0..n - 1).all(|i| (s >> i) & 3 != 0)).count() as u128;
        assert_eq!(rll_no_double_zero_count(n).unwrap(), brute, "N={n}");
    }
    for n in 3..150 {
        let c = |k| rll_no_double_zero_count(k).unwrap();
        assert_eq!(c(n), c(n - 1) + c(n - 2));
    }
    assert!(rll_no_double_zero_count(200).is_err());
    let golden = ((1.0 + 5f64.sqrt()) / 2.0).log2();
    assert!((rll_growth_rate_bits(60).unwrap() - golden).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn curves_decay_under_the_dobrushin_envelope(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let r: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.02).collect();
                let t: f64 = r.iter().sum();
                r.iter().map(|v| v / t).collect()
            })
            .collect();
        let p = Dmc::from_matrix(rows).unwrap();
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
        let t: f64 = w.iter().sum();
        let prior = Prior::from_probs(w.iter().map(|v| v / t).collect()).unwrap();
        let curve = cascade_mi_curve(&p, &prior, 25).unwrap();
        for pair in curve.windows(2) {
            prop_assert!(pair[1].mi <= pair[0].mi + 1e-12);
        }
        for pt in &curve {
            prop_assert!(pt.mi <= pt.envelope + 1e-12, "m={} {} > {}", pt.m, pt.mi, pt.envelope);
        }
        prop_assert!((curve[0].mi - mutual_information(&prior, &p).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn curves_never_increase_on_sparse_chains(seed in any::<u64>()) {
        let p = sparse_chain(5, seed, 0.3);
        let curve = cascade_mi_curve(&p, &Prior::uniform(5), 40).unwrap();
        for pair in curve.windows(2) {
            prop_assert!(pair[1].mi <= pair[0].mi + 1e-12);
        }
    }
}
