//! Seeded synthetic models and sinusoid datasets for quantisation-error runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::MetaParams;
use crate::quantizer::FloatModel;

/// Uniform weights in `[-scale, scale)` with the shapes of `meta`.
pub fn random_float_model(meta: &MetaParams, scale: f64, seed: u64) -> FloatModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = FloatModel::filled(meta.hidden_size, meta.input_size, meta.out_features, 0.0);
    // map visits tensors in a fixed order, so the draw sequence is reproducible
    let rng = std::cell::RefCell::new(&mut rng);
    shape.map(|_| rng.borrow_mut().random_range(-scale..scale))
}

/// `count` windows of `seq_len` steps over noisy sinusoids with random phase
/// and frequency; each feature is an independently phased wave in `[-1, 1]`.
pub fn sinusoid_dataset(
    count: usize,
    seq_len: usize,
    input_size: usize,
    seed: u64,
) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let waves: Vec<(f64, f64)> = (0..input_size)
                .map(|_| {
                    (
                        rng.random_range(0.0..std::f64::consts::TAU),
                        rng.random_range(0.1..0.6),
                    )
                })
                .collect();
            (0..seq_len)
                .map(|t| {
                    waves
                        .iter()
                        .map(|&(phase, freq)| {
                            let noise: f64 = rng.random_range(-0.05..0.05);
                            (0.95 * (phase + freq * t as f64).sin() + noise).clamp(-1.0, 1.0)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let meta = MetaParams::default();
        let a = random_float_model(&meta, 0.5, 7);
        assert_eq!(a, random_float_model(&meta, 0.5, 7));
        assert_ne!(a, random_float_model(&meta, 0.5, 8));
        a.check_shapes(20, 1, 1).unwrap();
        assert!(a.iter().all(|w| w.abs() <= 0.5));

        let d = sinusoid_dataset(4, 6, 2, 1);
        assert_eq!(d, sinusoid_dataset(4, 6, 2, 1));
        assert_eq!((d.len(), d[0].len(), d[0][0].len()), (4, 6, 2));
        assert!(d.iter().flatten().flatten().all(|x| x.abs() <= 1.0));
    }
}
