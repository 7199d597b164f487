//! Reproducible random streams keyed by `(seed, stream id)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// ChaCha8 generator positioned on an independent stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform point on `S^{d-1}` from a normalized Gaussian vector.
pub fn unit_vector<R: rand::Rng + ?Sized>(rng: &mut R, d: usize, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for x in out.iter_mut().take(d) {
            let g: f64 = StandardNormal.sample(rng);
            *x = g;
            norm2 += g * g;
        }
        if norm2 > 1e-200 {
            let inv = norm2.sqrt().recip();
            for x in out.iter_mut().take(d) {
                *x *= inv;
            }
            return;
        }
    }
}
