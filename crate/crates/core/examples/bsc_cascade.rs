//! A chain of binary symmetric channels: capacity decays like
//! `(1 − 2p)^{2m}`, and the Dobrushin coefficient bounds the decay.

use std::f64::consts::LN_2;

use molcap::capacity::Prior;
use molcap::cascade::{bsc_cascade_capacity, cascade_mi_curve, dobrushin_coefficient};
use molcap::channels::make_bsc;

fn main() -> molcap::Result<()> {
    let p = 0.1;
    let bsc = make_bsc(p)?;
    println!("Dobrushin coefficient: {}", dobrushin_coefficient(&bsc));
    let curve = cascade_mi_curve(&bsc, &Prior::uniform(2), 12)?;
    println!("{:>3} {:>12} {:>12} {:>12}", "m", "I (bits)", "closed form", "envelope");
    for pt in curve {
        println!(
            "{:>3} {:>12.8} {:>12.8} {:>12.8}",
            pt.m,
            pt.mi / LN_2,
            bsc_cascade_capacity(p, pt.m)?,
            pt.envelope / LN_2
        );
    }
    Ok(())
}
