//! Long cascades of a channel whose transition graph has a periodic closed
//! class: information about the input survives forever, and signalling on
//! the class phase achieves the limit with zero error.

use molcap::capacity::{blahut_arimoto, BaOptions};
use molcap::cascade::{analyze_chain, prop1_limit, ZeroErrorCode};
use molcap::channels::{dmc_power, Dmc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> molcap::Result<()> {
    // States 0 and 1 swap deterministically; 2 feeds them; 3 is absorbing.
    let p = Dmc::from_matrix(vec![
        vec![0.0, 1.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.3, 0.3, 0.2, 0.2],
        vec![0.0, 0.0, 0.0, 1.0],
    ])?;
    let structure = analyze_chain(&p)?;
    for class in &structure.classes {
        println!("class {:?}: closed={} period={:?}", class.states, class.closed, class.period);
    }
    let limit = prop1_limit(&structure);
    println!("limit: ln 3 = {limit:.6} nats");

    for m in [1, 2, 10, 100, 101] {
        let cap = blahut_arimoto(&dmc_power(&p, m)?, &BaOptions::default(), None)?;
        println!("m = {m:>3}: C = {:.6}", cap.capacity);
    }

    let code = ZeroErrorCode::new(structure);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut errors = 0;
    for trial in 0..10_000 {
        let msg = trial % code.len();
        let m = 1 + trial % 37;
        let mut state = code.encode(msg);
        for _ in 0..m {
            state = p.sample_output(state, &mut rng);
        }
        errors += usize::from(code.decode(m, state) != Some(msg));
    }
    println!("{} codewords, rate {:.6} nats, {errors} errors in 10000 trials", code.len(), code.rate());
    Ok(())
}
