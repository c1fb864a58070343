//! Sweep the error rate for the whole JPEG decoder with the entropy decoder
//! held reliable.

use elastic_fidelity::codec::Kernel;
use elastic_fidelity::fault::BitRange;
use elastic_fidelity::sweep::{default_pinned, error_rate_sweep, SweepOptions, Target, Workload};

fn main() {
    let w = Workload::standard(Kernel::MiniJpeg);
    println!("baseline {}", w.baseline().unwrap());
    let pinned = default_pinned(Kernel::MiniJpeg, &Target::All);
    let opts = SweepOptions {
        trials: 40,
        ..SweepOptions::default()
    };
    let rates = [0.0, 0.01, 0.02, 0.04, 0.07, 0.1];
    let r = error_rate_sweep(&w, &Target::All, &rates, BitRange::lsb(7).unwrap(), &pinned, &opts).unwrap();
    for row in &r.rows {
        let q = row.mean_quality_db.map_or("-".to_string(), |q| format!("{q:.2} dB"));
        println!("rate {}: success {:.2}, mean {q}", row.label, row.success_fraction);
    }
}
