//! The ladder chain: a Z-like channel whose zero-error capacity is zero at
//! every length, yet whose cascades keep a positive amount of information.

use molcap::cascade::{example1_channel, example1_default_b, example1_mi, has_nonconfusable_pair};
use molcap::channels::dmc_power;
use molcap::math::binary_entropy_bits;

fn main() -> molcap::Result<()> {
    let l = 20;
    let b = example1_default_b(l);
    let ch = example1_channel(l, &b)?;
    for m in [1, 2, 5, 10, 20] {
        let mi = example1_mi(l, m, [0.5, 0.5])?;
        let confusable = !has_nonconfusable_pair(&dmc_power(&ch, m)?);
        println!("m = {m:>2}: b_m = {:.6}, I = {mi:.6} bits, all inputs confusable: {confusable}", b[m - 1]);
    }
    println!("limit h(1/4) - 1/2 = {:.6} bits", binary_entropy_bits(0.25) - 0.5);
    Ok(())
}
