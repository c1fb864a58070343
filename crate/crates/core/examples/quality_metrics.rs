//! PSNR on images and segmental SNR on audio, including the clamping of
//! identical inputs and silent segments.

use elastic_fidelity::media::{ImageYCbCr, PcmAudio};
use elastic_fidelity::metrics::{psnr, snr_seg, snr_segments};

fn main() {
    let a = ImageYCbCr::new(16, 16).unwrap();
    let mut b = a.clone();
    println!("identical images: {}", psnr(&a, &b).unwrap());
    for (i, v) in b.planes_mut()[0].data.iter_mut().enumerate() {
        *v = (i % 7) as u8;
    }
    println!("luma offset 0-6:  {}", psnr(&a, &b).unwrap());

    let reference: Vec<i16> = (0..1024).map(|i| if i < 256 { 0 } else { ((i * 97) % 2000 - 1000) as i16 }).collect();
    let noisy: Vec<i16> = reference.iter().enumerate().map(|(i, &s)| s + (i % 5) as i16 - 2).collect();
    println!("per-segment SNR: {:?}", snr_segments(&reference, &noisy, 256).unwrap());
    let r = PcmAudio::new(reference, 8000).unwrap();
    let n = PcmAudio::new(noisy, 8000).unwrap();
    println!("SNRseg: {}", snr_seg(&r, &n, 256).unwrap());
}
