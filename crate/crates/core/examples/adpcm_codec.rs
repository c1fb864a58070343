//! Encode the standard speech-like clip with ADPCM, decode it reliably and
//! with an elastic reconstruction region, and score both with SNRseg.

use elastic_fidelity::alu::{FidelityContext, RegionTable};
use elastic_fidelity::codec::adpcm;
use elastic_fidelity::corpus::standard_audio;
use elastic_fidelity::fault::{BitRange, FaultSpec};
use elastic_fidelity::metrics::{snr_seg, SNRSEG_SEGMENT};
use elastic_fidelity::rng::derive_stream;

fn main() {
    let audio = standard_audio();
    let bs = adpcm::encode(&audio).unwrap();
    println!("{} samples -> {} payload bytes", audio.len(), bs.payload.len());

    let clean = adpcm::decode(&bs, &mut FidelityContext::reliable()).unwrap();
    println!("reliable: {}", snr_seg(&audio, &clean, SNRSEG_SEGMENT).unwrap());

    let mut table = RegionTable::new();
    table.insert(adpcm::RECONSTRUCTION.into(), FaultSpec::single(0.04, BitRange::lsb(7).unwrap()).unwrap());
    let mut ctx = FidelityContext::new(&table, derive_stream(3, &[0u64.into()])).unwrap();
    match adpcm::decode(&bs, &mut ctx) {
        Ok(noisy) => println!("elastic:  {}", snr_seg(&audio, &noisy, SNRSEG_SEGMENT).unwrap()),
        Err(f) => println!("elastic decode failed: {f}"),
    }
}
