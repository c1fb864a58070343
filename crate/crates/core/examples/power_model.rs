//! Normalized power for the bundled reference workloads and for a custom
//! mix at a range of error rates.

use elastic_fidelity::power::{self, normalized_power, voltage_for_error_rate, PowerParams, RegionLoad, WorkloadMix};

fn main() {
    for (name, file, reference) in power::table2() {
        let p = normalized_power(&file.mix(), &file.params).unwrap();
        println!("{name:8} {p:.3} (reference {reference})");
    }

    let p = PowerParams::default();
    for rate in [0.0, 0.01, 0.04, 0.1] {
        let mix = WorkloadMix {
            regions: vec![
                RegionLoad { name: "idct".into(), fraction: 0.6, rate, bits: None },
                RegionLoad { name: "control".into(), fraction: 0.4, rate: 0.0, bits: None },
            ],
        };
        let v = voltage_for_error_rate(rate, &p).unwrap();
        println!("rate {rate:.2}: {v:.3} V, power {:.3}", normalized_power(&mix, &p).unwrap());
    }
}
