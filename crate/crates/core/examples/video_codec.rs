//! Block motion-compensated video: decode reliably, then inject faults into
//! each region in turn and report quality or failure.

use elastic_fidelity::alu::{FidelityContext, RegionTable};
use elastic_fidelity::codec::video;
use elastic_fidelity::corpus::standard_video;
use elastic_fidelity::fault::{BitRange, FaultSpec};
use elastic_fidelity::metrics::psnr;
use elastic_fidelity::rng::derive_stream;

fn main() {
    let seq = standard_video();
    let bs = video::encode(&seq, 75).unwrap();
    let clean = video::decode(&bs, &mut FidelityContext::reliable()).unwrap();
    println!("{} frames, {} bytes, reliable {}", clean.frames.len(), bs.payload.len(), psnr(&seq, &clean).unwrap());

    for region in video::REGIONS {
        let mut table = RegionTable::new();
        table.insert(region.to_string(), FaultSpec::single(0.01, BitRange::lsb(7).unwrap()).unwrap());
        let mut ctx = FidelityContext::new(&table, derive_stream(8, &[0u64.into()])).unwrap();
        match video::decode(&bs, &mut ctx) {
            Ok(out) => println!("{region:20} {}", psnr(&seq, &out).unwrap()),
            Err(f) => println!("{region:20} failed: {f}"),
        }
    }
}
