//! First-hitting times of a molecule released at distance `d` from an
//! absorbing receiver, with and without drift, checked against simulated
//! Brownian paths.

use molcap::diffusion::{default_dt, simulate_first_hitting, slot_hit_probs, DiffusionMedium, SlotConfig};

fn main() -> molcap::Result<()> {
    for drift in [1.0, 0.0] {
        let medium = DiffusionMedium::new(1.0, drift, 1.0)?;
        let model = medium.hitting_model();
        println!("v = {drift}: {model:?}");

        let taps = slot_hit_probs(&medium, &SlotConfig::new(1.0, 5)?)?;
        for (k, p) in taps.taps.iter().enumerate() {
            println!("  slot {k}: p = {p:.6}");
        }
        println!("  beyond: {:.6}", taps.tail);

        let t_max = if drift > 0.0 { 50.0 } else { 100.0 };
        let sim = simulate_first_hitting(&medium, 20_000, default_dt(&medium), t_max, 1)?;
        println!(
            "  20000 paths: KS distance {:.4}, censored {:.2}%",
            sim.ks_distance(&model),
            100.0 * sim.censored_fraction()
        );
    }
    Ok(())
}
