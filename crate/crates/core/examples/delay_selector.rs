//! Timing channel in which each released molecule arrives up to `Δ − 1`
//! slots late. The zero-error capacity comes from a polynomial root; the
//! i.i.d. rate with uniform delays is estimated by simulation.

use std::f64::consts::LN_2;

use molcap::capacity::{IidOptions, Prior};
use molcap::timing::{delay_selector_iid_lower, delay_selector_zero_error, DelaySelector, DelaySelectorChannel};

fn main() -> molcap::Result<()> {
    println!("zero-error capacity (bits):");
    print!("{:>6}", "N\\Δ");
    for delta in 1..=5 {
        print!("{delta:>9}");
    }
    println!();
    for n in 1..=5u32 {
        print!("{n:>6}");
        for delta in 1..=5 {
            print!("{:>9.5}", delay_selector_zero_error(&DelaySelector::new(n, delta)?) / LN_2);
        }
        println!();
    }

    let ds = DelaySelector::new(2, 2)?;
    let ch = DelaySelectorChannel::new(ds, None)?;
    let prior = Prior::new(vec![0.0, 1.0, 2.0], vec![1.0 / 3.0; 3])?;
    let est = delay_selector_iid_lower(&ch, &prior, 200_000, 5, &IidOptions::default())?;
    println!(
        "N = 2, Δ = 2, uniform counts: i.i.d. rate {:.4} bits (zero-error {:.4})",
        est.value / LN_2,
        delay_selector_zero_error(&ds) / LN_2
    );
    Ok(())
}
