//! Capacity bounds for timing modulation over a drifting medium, where the
//! arrival time is the release time plus inverse Gaussian noise.

use molcap::diffusion::DiffusionMedium;
use molcap::timing::{aign_bounds, AignParams};

fn main() -> molcap::Result<()> {
    let medium = DiffusionMedium::new(1.0, 1.0, 1.0)?;
    println!("{:>8} {:>10} {:>10} {:>10}", "budget", "IG input", "EPI", "upper");
    for budget in [0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
        let b = aign_bounds(&AignParams::from_medium(&medium, budget)?)?;
        println!("{budget:>8} {:>10.5} {:>10.5} {:>10.5}", b.ig_input, b.epi, b.max_entropy);
    }
    println!("(nats per release)");
    Ok(())
}
