//! Generate the standard synthetic inputs, or a reseeded variant, and write
//! them as WAV, PPM and a frame directory.

use elastic_fidelity::codec::Kernel;
use elastic_fidelity::corpus::{CorpusSpec, Media};
use elastic_fidelity::io;

fn main() {
    let dir = std::env::temp_dir().join("efid-corpus-example");
    std::fs::create_dir_all(&dir).unwrap();
    for kernel in Kernel::ALL {
        let spec = CorpusSpec::standard(kernel).with_seed(7);
        println!("{kernel}: {}", serde_json::to_string(&spec).unwrap());
        match spec.generate().unwrap() {
            Media::Audio(a) => io::write_atomic(&dir.join("speech.wav"), &io::wav_bytes(&a)).unwrap(),
            Media::Image(i) => io::write_atomic(&dir.join("scene.ppm"), &io::ppm_bytes(&i)).unwrap(),
            Media::Video(v) => io::write_video_dir(&dir.join("clip"), &v).unwrap(),
        }
    }
    println!("wrote {}", dir.display());
}
