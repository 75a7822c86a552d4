//! Dense networks with hand-written backpropagation.

mod adam;
mod mat;
mod mlp;

pub use adam::Adam;
pub use mat::{gemm, Mat};
pub use mlp::{Activation, Mlp, MlpCache};

/// Blend main parameters into target parameters:
/// `target ← tau · main + (1 − tau) · target`.
pub fn soft_update(target: &mut [f64], main: &[f64], tau: f64) {
    assert_eq!(target.len(), main.len(), "target and main shapes differ");
    for (t, m) in target.iter_mut().zip(main) {
        *t = tau * m + (1.0 - tau) * *t;
    }
}

/// Scale `grads` so its Euclidean norm does not exceed `max_norm`.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = libm::sqrt(grads.iter().map(|g| g * g).sum::<f64>());
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_update_examples() {
        let mut t = [0.0, 0.0];
        soft_update(&mut t, &[1.0, 1.0], 0.005);
        assert_eq!(t, [0.005, 0.005]);
        let mut t = [3.0, -2.0];
        soft_update(&mut t, &[1.5, 7.0], 1.0);
        assert_eq!(t, [1.5, 7.0]);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = [3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }
}
