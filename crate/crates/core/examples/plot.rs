//! Run two small rate sweeps and draw them into one SVG.

use elastic_fidelity::codec::{adpcm, Kernel};
use elastic_fidelity::fault::BitRange;
use elastic_fidelity::plot::{plot_series, Series, Show};
use elastic_fidelity::sweep::{error_rate_sweep, SweepOptions, SweptParam, Target, Workload};

fn main() {
    let w = Workload::standard(Kernel::Adpcm);
    let opts = SweepOptions {
        trials: 20,
        ..SweepOptions::default()
    };
    let rates = [0.0, 0.02, 0.04, 0.08];
    let series: Vec<Series> = [Target::All, Target::Region(adpcm::RECONSTRUCTION.into())]
        .into_iter()
        .map(|t| {
            let r = error_rate_sweep(&w, &t, &rates, BitRange::lsb(7).unwrap(), &[], &opts).unwrap();
            Series { name: t.to_string(), rows: r.rows }
        })
        .collect();
    let svg = plot_series("adpcm rate sweep", SweptParam::Rate, Show::Both, &series).unwrap();
    let path = std::env::temp_dir().join("efid-plot-example.svg");
    std::fs::write(&path, svg).unwrap();
    println!("wrote {}", path.display());
}
