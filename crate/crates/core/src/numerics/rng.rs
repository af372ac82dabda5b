use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identity of one reproducible random stream.
///
/// Equal `(master_seed, stream_id)` pairs always produce the same draws, no
/// matter how many other streams are consumed concurrently. Parallel work
/// gets disjoint stream ids; a stream is never shared between threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Independent sub-stream, e.g. one per optimizer restart.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            master_seed: splitmix64(self.master_seed ^ splitmix64(self.stream_id.wrapping_add(0x5851_F42D_4C95_7F2D))),
            stream_id: tag,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.master_seed);
        inner.set_stream(self.stream_id);
        StreamRng { inner }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator bound to a single [`RngStream`].
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform phase on `[0, 2π)`.
    pub fn phase(&mut self) -> f64 {
        2.0 * PI * self.uniform()
    }

    /// Pair of independent standard normals (Box–Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        // 1 - u lies in (0, 1], keeping the log finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Circular complex normal with `E|z|² = 1`.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let (a, b) = self.normal_pair();
        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// `count` independent circular complex normals with unit total variance.
pub fn sample_standard_complex_gaussian(rng: &mut StreamRng, count: usize) -> Vec<Complex64> {
    (0..count).map(|_| rng.complex_gaussian()).collect()
}
