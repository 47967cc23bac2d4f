use rand::Rng;

use super::tensor::Tensor;

/// `fan_in × fan_out` matrix drawn from `U(-a, a)` with
/// `a = gain · sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, gain: f64, rng: &mut R) -> Tensor {
    let a = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-a..=a)).collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("xavier shape")
}
