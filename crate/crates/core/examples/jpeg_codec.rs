//! Baseline JPEG-style still image: encode at several quality settings and
//! decode with faults in the IDCT.

use elastic_fidelity::alu::{FidelityContext, RegionTable};
use elastic_fidelity::codec::jpeg;
use elastic_fidelity::corpus::standard_image;
use elastic_fidelity::fault::{BitRange, FaultSpec};
use elastic_fidelity::metrics::psnr;
use elastic_fidelity::rng::derive_stream;

fn main() {
    let img = standard_image();
    for q in [30, 75, 95] {
        let bs = jpeg::encode(&img, q).unwrap();
        let out = jpeg::decode(&bs, &mut FidelityContext::reliable()).unwrap();
        println!("quality {q:3}: {:6} bytes, {}", bs.payload.len(), psnr(&img, &out).unwrap());
    }

    let bs = jpeg::encode(&img, 75).unwrap();
    let mut table = RegionTable::new();
    table.insert(jpeg::IDCT.into(), FaultSpec::single(0.04, BitRange::lsb(7).unwrap()).unwrap());
    for trial in 0..3u64 {
        let mut ctx = FidelityContext::new(&table, derive_stream(5, &[trial.into()])).unwrap();
        match jpeg::decode(&bs, &mut ctx) {
            Ok(out) => println!("idct at 4%, trial {trial}: {}", psnr(&img, &out).unwrap()),
            Err(f) => println!("idct at 4%, trial {trial}: failed ({f})"),
        }
    }
}
