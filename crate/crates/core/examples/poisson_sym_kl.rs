//! Capacity of the discrete-time Poisson channel under peak and average
//! constraints: Blahut–Arimoto on a grid against the closed-form
//! symmetrized-KL upper bound.

use molcap::capacity::{
    blahut_arimoto, poisson_sym_kl_cov, poisson_sym_kl_max, poisson_two_point_prior, BaOptions, CostConstraint,
};
use molcap::channels::{poisson_dmc, uniform_grid, POISSON_TAIL_TOL};
use molcap::math::poisson_y_max;

fn main() -> molcap::Result<()> {
    let (peak, lam0) = (4.0, 1.0);
    println!("{:>5} {:>10} {:>10} {:>10}", "Es", "BA", "two-point", "bound");
    for es in [0.25, 0.5, 1.0, 2.0, 3.0, 4.0] {
        let grid = uniform_grid(peak, 33);
        let dmc = poisson_dmc(lam0, &grid, poisson_y_max(peak + lam0, POISSON_TAIL_TOL))?;
        let cost = CostConstraint { costs: grid, budget: es };
        let ba = blahut_arimoto(&dmc, &BaOptions::default(), Some(&cost))?;
        let two_point = poisson_sym_kl_cov(&poisson_two_point_prior(es, peak)?, lam0)?;
        let bound = poisson_sym_kl_max(es, peak, lam0)?;
        println!("{es:>5} {:>10.6} {two_point:>10.6} {bound:>10.6}", ba.capacity);
    }
    println!("(nats per channel use, A = {peak}, lambda0 = {lam0})");
    Ok(())
}
