//! Counting binary strings without two consecutive zeros: the Fibonacci
//! numbers, growing at log2 of the golden ratio bits per symbol.

use molcap::cascade::{rll_growth_rate_bits, rll_no_double_zero_count};

fn main() -> molcap::Result<()> {
    for n in [1, 2, 3, 10, 30, 60, 120] {
        println!("N = {n:>3}: {}", rll_no_double_zero_count(n)?);
    }
    let golden = ((1.0 + 5f64.sqrt()) / 2.0).log2();
    println!("growth rate at N = 60: {:.6} bits (golden ratio: {golden:.6})", rll_growth_rate_bits(60)?);
    Ok(())
}
