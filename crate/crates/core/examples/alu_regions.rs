//! Route arithmetic through named fidelity regions and read back how many
//! results each region corrupted.

use elastic_fidelity::alu::{Alu, FidelityContext, RegionTable};
use elastic_fidelity::fault::{BitRange, FaultSpec};
use elastic_fidelity::rng::derive_stream;

fn main() {
    let mut table = RegionTable::new();
    table.insert("filter".into(), FaultSpec::single(0.05, BitRange::lsb(3).unwrap()).unwrap());
    let mut ctx = FidelityContext::new(&table, derive_stream(42, &[0u64.into()])).unwrap();

    let samples: Vec<i32> = (0..64).map(|i| (i * 37) % 200 - 100).collect();
    let mut exact = 0i32;
    let mut noisy = 0i32;

    let counter = ctx.region("counter");
    ctx.enter(counter);
    for &s in &samples {
        let scaled = ctx.mul(s, 3);
        exact = ctx.add(exact, scaled);
    }
    ctx.leave();

    ctx.enter_region("filter");
    for &s in &samples {
        let scaled = ctx.mul(s, 3);
        noisy = ctx.add(noisy, scaled);
    }
    ctx.exit_region().unwrap();

    println!("exact sum {exact}, elastic sum {noisy}");
    for (region, flips) in ctx.flip_counts() {
        println!("{region}: {flips} of {} ops corrupted", ctx.op_counts()[&region]);
    }
}
