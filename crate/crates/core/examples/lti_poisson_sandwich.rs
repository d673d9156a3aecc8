//! Bounds on the capacity of a Poisson channel with intersymbol
//! interference. The block channel that drops the first outputs gives a
//! lower bound; letting the transmitter reset the memory gives an upper
//! bound. Longer blocks tighten both.

use molcap::capacity::{iid_lower_bound, sandwich, IidOptions, Prior, SandwichOptions};
use molcap::channels::LtiPoissonChannel;
use molcap::diffusion::{slot_hit_probs, DiffusionMedium, SlotConfig};

fn main() -> molcap::Result<()> {
    // Taps from a drifting medium, renormalised over two slots.
    let medium = DiffusionMedium::new(1.0, 1.0, 1.0)?;
    let raw = slot_hit_probs(&medium, &SlotConfig::new(1.0, 1)?)?.taps;
    let total: f64 = raw.iter().sum();
    let taps: Vec<f64> = raw.iter().map(|p| p / total).collect();
    println!("taps: {taps:.4?}");

    let peak = 4.0;
    let ch = LtiPoissonChannel::new(taps, 0.5, peak, peak)?;
    let grid = [0.0, peak];
    for r in 1..=4 {
        let rep = sandwich(&ch, r, &grid, &SandwichOptions::default())?;
        println!("r = {r}: [{:.4}, {:.4}] nats/slot", rep.lower, rep.upper);
    }

    let prior = Prior::new(grid.to_vec(), vec![0.5, 0.5])?;
    let iid = iid_lower_bound(&ch, &prior, 100_000, 7, &IidOptions::default())?;
    println!("i.i.d. on-off: {:.4} nats/slot (95% CI {:.4}..{:.4})", iid.value, iid.ci_low, iid.ci_high);
    Ok(())
}
