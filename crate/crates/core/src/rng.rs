//! Counter-based Gaussian streams.
//!
//! Every normal draw is a pure function of `(master seed, path id, step index)`: the
//! master seed keys a ChaCha8 generator, the path id selects the ChaCha stream (nonce)
//! and the step index selects the word position inside that stream. Nothing depends
//! on how paths are scheduled across threads.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Vector;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// splitmix64 finalizer, used to spread a 64-bit seed over the 256-bit ChaCha key.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Derives an independent master seed from `seed` and a label (e.g. ensemble A vs B).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut state = seed ^ label.wrapping_mul(0xd134_2543_de82_ef95);
    splitmix64(&mut state)
}

#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * INV_2_53
}

#[inline]
fn box_muller(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = open_unit(rng.next_u64());
    let u2 = open_unit(rng.next_u64());
    let radius = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (TWO_PI * u2).sin_cos();
    (radius * c, radius * s)
}

fn fill_normals(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = box_muller(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = box_muller(rng).0;
    }
}

/// Words of keystream reserved for one step that draws `count` normals
/// (two `u64`, i.e. four 32-bit words, per Box-Muller pair).
fn stride_words(count: usize) -> u128 {
    4 * count.div_ceil(2) as u128
}

/// Gaussian source for one path.
#[derive(Clone)]
pub struct PathNoise {
    rng: ChaCha8Rng,
}

impl PathNoise {
    pub fn new(seed: u64, path_id: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(key_from_seed(seed));
        rng.set_stream(path_id);
        Self { rng }
    }

    /// Fills `out` with the standard normals of step `step_index`.
    pub fn fill(&mut self, step_index: u64, out: &mut [f64]) {
        self.rng
            .set_word_pos(u128::from(step_index) * stride_words(out.len()));
        fill_normals(&mut self.rng, out);
    }

    /// Brownian increment `√dt · Z` for step `step_index`.
    pub fn increment(&mut self, step_index: u64, dt: f64, out: &mut Vector) {
        self.fill(step_index, out.as_mut_slice());
        *out *= dt.sqrt();
    }
}

/// `count` standard normal draws for `(seed, path_id, step_index)`.
pub fn normal_increments(seed: u64, path_id: u64, step_index: u64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    PathNoise::new(seed, path_id).fill(step_index, &mut out);
    out
}

/// Sequential generator for sampling test points and audit sets (not path noise).
pub struct SampleRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl SampleRng {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::from_seed(key_from_seed(seed)), spare: None }
    }

    pub fn uniform(&mut self) -> f64 {
        open_unit(self.rng.next_u64())
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (a, b) = box_muller(&mut self.rng);
        self.spare = Some(b);
        a
    }

    /// Uniform point on the unit sphere of ℝ^d.
    pub fn direction(&mut self, d: usize) -> Vector {
        loop {
            let v = Vector::from_fn(d, |_, _| self.normal());
            let n = v.norm();
            if n > 1e-12 {
                return v / n;
            }
        }
    }

    /// Point with radius drawn log-uniformly in `[r_lo, r_hi]` and uniform direction.
    pub fn log_radius_point(&mut self, d: usize, r_lo: f64, r_hi: f64) -> Vector {
        let r = (self.uniform_in(r_lo.ln(), r_hi.ln())).exp();
        self.direction(d) * r
    }

    /// Uniform point in the ball of radius `r`.
    pub fn ball_point(&mut self, d: usize, r: f64) -> Vector {
        let radius = r * self.uniform().powf(1.0 / d as f64);
        self.direction(d) * radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_draws() {
        assert_eq!(normal_increments(7, 3, 11, 5), normal_increments(7, 3, 11, 5));
    }

    #[test]
    fn steps_paths_and_seeds_separate() {
        let base = normal_increments(7, 3, 11, 4);
        assert_ne!(base, normal_increments(7, 3, 12, 4));
        assert_ne!(base, normal_increments(7, 4, 11, 4));
        assert_ne!(base, normal_increments(8, 3, 11, 4));
    }

    #[test]
    fn reuse_matches_fresh_stream() {
        let mut noise = PathNoise::new(42, 9);
        let mut out = [0.0; 3];
        noise.fill(100, &mut out);
        noise.fill(5, &mut out);
        assert_eq!(out.to_vec(), normal_increments(42, 9, 5, 3));
    }

    #[test]
    fn odd_count_prefix_agrees_with_even() {
        // the odd tail uses the first output of the next pair
        let odd = normal_increments(1, 1, 0, 3);
        let even = normal_increments(1, 1, 0, 4);
        assert_eq!(odd[..], even[..3]);
    }

    #[test]
    fn million_draws_look_standard_normal() {
        let n = 1_000_000;
        let z = normal_increments(2024, 0, 0, n);
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((0.99..=1.01).contains(&var), "variance {var}");
    }

    #[test]
    fn directions_are_unit() {
        let mut rng = SampleRng::new(5);
        for d in 1..5 {
            assert!((rng.direction(d).norm() - 1.0).abs() < 1e-14);
        }
    }
}
