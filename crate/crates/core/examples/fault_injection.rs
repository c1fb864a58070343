//! Flip bits in a 32-bit word under both fault models and compare the
//! observed per-bit frequencies with the model.

use elastic_fidelity::fault::{flip_probability, inject_word, BitRange, FaultSpec, FlipModel, Word32};
use elastic_fidelity::rng::derive_stream;

fn main() {
    let range = BitRange::new(4, 11).unwrap();
    for model in [FlipModel::SingleBitUniform, FlipModel::PerBitIndependent] {
        let spec = FaultSpec::new(0.04, range, model).unwrap();
        let mut rng = derive_stream(1, &["example".into()]);
        let mut counts = [0u32; 32];
        let n = 50_000;
        for _ in 0..n {
            let out = inject_word(Word32(0), &spec, &mut rng);
            for (b, c) in counts.iter_mut().enumerate() {
                *c += out.0 >> b & 1;
            }
        }
        println!("{model:?} at rate 0.04 over bits {range}");
        for b in range.lo()..=range.hi() {
            let seen = f64::from(counts[b as usize]) / f64::from(n);
            println!("  bit {b:2}: observed {seen:.5} expected {:.5}", flip_probability(&spec, b));
        }
    }
}
