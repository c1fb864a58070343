//! Sweep the corruptible bit range [0, hi] for one ADPCM region and print
//! the CSV summary.

use elastic_fidelity::codec::{adpcm, Kernel};
use elastic_fidelity::sweep::{all_lsb_ranges, bit_range_sweep, summarize_csv, SweepOptions, Target, Workload};

fn main() {
    let w = Workload::standard(Kernel::Adpcm);
    let opts = SweepOptions {
        trials: 50,
        master_seed: 2010,
        ..SweepOptions::default()
    };
    let target = Target::Region(adpcm::RECONSTRUCTION.into());
    let r = bit_range_sweep(&w, &target, 0.04, &all_lsb_ranges(), &[], &opts).unwrap();
    print!("{}", summarize_csv(&r).unwrap());
}
