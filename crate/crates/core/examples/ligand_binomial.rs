//! Ligand-receptor reception: each of `n` receptors is bound with the
//! transmitted probability. More receptors make a cleaner channel.

use molcap::capacity::{blahut_arimoto, BaOptions};
use molcap::channels::{ligand_binomial_dmc, uniform_grid};

fn main() -> molcap::Result<()> {
    let grid = uniform_grid(1.0, 17);
    for n in [1u64, 2, 5, 10, 50, 200] {
        let ba = blahut_arimoto(&ligand_binomial_dmc(n, &grid)?, &BaOptions::default(), None)?;
        let support: Vec<String> = ba
            .prior
            .probs()
            .iter()
            .zip(&grid)
            .filter(|(p, _)| **p > 1e-3)
            .map(|(p, x)| format!("{x:.3}:{p:.3}"))
            .collect();
        println!("n = {n:>3}: C = {:.5} bits, prior {}", ba.capacity / std::f64::consts::LN_2, support.join(" "));
    }
    Ok(())
}
