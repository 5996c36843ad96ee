//! Seeded four-channel image task for the convolutional demo.
//!
//! Every image holds one 3x3 pattern on correlated noise. Positives carry the
//! motif; negatives carry a decoy whose three imaginary channels are the
//! motif's, rotated cyclically. Both classes have the same per-channel
//! statistics, so only the way channels combine separates them.

use hypernn::Tensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const CHANNELS: usize = 4;
const MOTIF: usize = 3;

/// Spatial weights of the 3x3 pattern.
const SHAPE: [[f64; MOTIF]; MOTIF] = [[-0.5, 1.0, -0.5], [1.0, 1.0, 1.0], [-0.5, 1.0, -0.5]];
/// Channel mix of the motif; index 0 is the unit channel.
const MOTIF_MIX: [f64; CHANNELS] = [0.6, 1.0, 0.2, -0.6];

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub seed: u64,
    pub size: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Noise shared by all channels of a pixel.
    pub shared_noise: f64,
    /// Independent noise per channel.
    pub channel_noise: f64,
    /// Zero the unit channel everywhere, the way an ARGB image with a blank
    /// alpha plane maps onto quaternion channels.
    pub zero_unit: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            size: 16,
            n_train: 500,
            n_val: 50,
            n_test: 150,
            shared_noise: 0.3,
            channel_noise: 0.2,
            zero_unit: false,
        }
    }
}

/// Images `[N, size, size, 4]` and labels `[N, 1]`.
#[derive(Clone, Debug)]
pub struct Split {
    pub x: Tensor,
    pub y: Tensor,
}

impl Split {
    pub fn len(&self) -> usize {
        self.x.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

/// Channel mix of the decoy: imaginary channels rotated by one place.
pub fn decoy_mix() -> [f64; CHANNELS] {
    let m = MOTIF_MIX;
    [m[0], m[3], m[1], m[2]]
}

pub fn generate(cfg: &SynthConfig) -> SynthData {
    assert!(cfg.size >= MOTIF, "images must fit the 3x3 motif");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shared = Normal::new(0.0, cfg.shared_noise).expect("finite noise level");
    let own = Normal::new(0.0, cfg.channel_noise).expect("finite noise level");
    let (s, c) = (cfg.size, CHANNELS);

    let mut make = |count: usize| -> Split {
        let mut x = vec![0.0; count * s * s * c];
        let mut y = vec![0.0; count];
        for (img, label) in x.chunks_mut(s * s * c).zip(y.iter_mut()) {
            for px in img.chunks_mut(c) {
                let z = shared.sample(&mut rng);
                for v in px.iter_mut() {
                    *v = z + own.sample(&mut rng);
                }
            }
            let positive = rng.random_bool(0.5);
            *label = f64::from(u8::from(positive));
            let mix = if positive { MOTIF_MIX } else { decoy_mix() };
            let amp = rng.random_range(0.8..1.2);
            let (r0, c0) = (
                rng.random_range(0..=s - MOTIF),
                rng.random_range(0..=s - MOTIF),
            );
            for (p, row) in SHAPE.iter().enumerate() {
                for (q, &w) in row.iter().enumerate() {
                    let off = ((r0 + p) * s + c0 + q) * c;
                    for (ch, m) in mix.iter().enumerate() {
                        img[off + ch] += amp * w * m;
                    }
                }
            }
            if cfg.zero_unit {
                img.chunks_mut(c).for_each(|px| px[0] = 0.0);
            }
        }
        Split {
            x: Tensor::new(&[count, s, s, c], x).expect("shape matches buffer"),
            y: Tensor::new(&[count, 1], y).expect("shape matches buffer"),
        }
    };
    let train = make(cfg.n_train);
    let val = make(cfg.n_val);
    let test = make(cfg.n_test);
    SynthData { train, val, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_train: 40,
            n_val: 4,
            n_test: 6,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn shapes_and_labels() {
        let d = generate(&small());
        assert_eq!(d.train.x.shape(), &[40, 16, 16, 4]);
        assert_eq!(d.val.y.shape(), &[4, 1]);
        assert_eq!(d.test.len(), 6);
        let labels = d.train.y.to_vec();
        assert!(labels.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(labels.contains(&0.0) && labels.contains(&1.0));
    }

    #[test]
    fn seeded() {
        let a = generate(&small());
        let b = generate(&small());
        let c = generate(&SynthConfig { seed: 7, ..small() });
        assert_eq!(a.train.x.to_vec(), b.train.x.to_vec());
        assert_ne!(a.train.x.to_vec(), c.train.x.to_vec());
    }

    #[test]
    fn decoy_permutes_imaginary_channels() {
        let mut sorted_motif = MOTIF_MIX[1..].to_vec();
        let mut sorted_decoy = decoy_mix()[1..].to_vec();
        sorted_motif.sort_by(f64::total_cmp);
        sorted_decoy.sort_by(f64::total_cmp);
        assert_eq!(sorted_motif, sorted_decoy);
        assert_ne!(MOTIF_MIX, decoy_mix());
        assert_eq!(MOTIF_MIX[0], decoy_mix()[0]);
    }

    #[test]
    fn zero_unit_mode() {
        let d = generate(&SynthConfig {
            zero_unit: true,
            ..small()
        });
        assert!(d.train.x.to_vec().chunks(CHANNELS).all(|px| px[0] == 0.0));
    }
}
