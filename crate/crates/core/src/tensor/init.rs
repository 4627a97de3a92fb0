use rand::Rng;

use super::Tensor;

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(shape, data).expect("glorot_uniform: shape has a zero extent")
}
