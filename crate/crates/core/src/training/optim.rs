use crate::error::{Error, Result};
use crate::nn::{Gradients, TristouNetParams};

/// RMSProp running mean-square accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub mean_square: Gradients,
    pub rho: f64,
    pub epsilon: f64,
    pub steps: u64,
}

impl OptimizerState {
    pub fn new(params: &TristouNetParams, rho: f64, epsilon: f64) -> Self {
        OptimizerState {
            mean_square: params.zeros_like(),
            rho,
            epsilon,
            steps: 0,
        }
    }
}

/// `s ← ρs + (1−ρ)g²; θ ← θ − lr·g / (√s + ε)`, elementwise.
pub fn rmsprop_step(theta: &mut [f64], grad: &[f64], mean_square: &mut [f64], lr: f64, rho: f64, epsilon: f64) {
    for ((t, &g), s) in theta.iter_mut().zip(grad).zip(mean_square.iter_mut()) {
        *s = rho * *s + (1.0 - rho) * g * g;
        *t -= lr * g / (s.sqrt() + epsilon);
    }
}

/// Applies one RMSProp step to every tensor. Non-finite gradients abort the
/// step before anything is modified.
pub fn rmsprop_update(
    params: &mut TristouNetParams,
    grads: &Gradients,
    state: &mut OptimizerState,
    learning_rate: f64,
) -> Result<()> {
    if params.dims != grads.dims || params.dims != state.mean_square.dims {
        return Err(Error::Dimension("optimizer shapes do not match parameters".into()));
    }
    for (name, _, g) in grads.tensors() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
    }
    let grad_tensors = grads.tensors();
    for (((_, theta), (_, _, g)), (_, s)) in params
        .tensors_mut()
        .into_iter()
        .zip(grad_tensors)
        .zip(state.mean_square.tensors_mut())
    {
        rmsprop_step(theta, g, s, learning_rate, state.rho, state.epsilon);
    }
    state.steps += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, Dims};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_only_decays_accumulator() {
        let mut theta = [0.5, -1.0];
        let mut s = [0.4, 0.2];
        rmsprop_step(&mut theta, &[0.0, 0.0], &mut s, 1e-3, 0.9, 1e-8);
        assert_eq!(theta, [0.5, -1.0]);
        assert!((s[0] - 0.36).abs() < 1e-15 && (s[1] - 0.18).abs() < 1e-15);
    }

    #[test]
    fn first_step_value() {
        let mut theta = [0.0];
        let mut s = [0.0];
        rmsprop_step(&mut theta, &[1.0], &mut s, 1e-3, 0.9, 1e-8);
        let expected = -1e-3 / (0.1f64.sqrt() + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn constant_gradient_step_tends_to_learning_rate() {
        let mut theta = [0.0];
        let mut s = [0.0];
        let g = 0.37;
        let mut last = 0.0;
        for _ in 0..200 {
            let before = theta[0];
            rmsprop_step(&mut theta, &[g], &mut s, 1e-3, 0.9, 1e-8);
            last = before - theta[0];
        }
        assert!((last - 1e-3).abs() / 1e-3 < 0.05, "{last}");
    }

    #[test]
    fn non_finite_gradient_fails_without_update() {
        let mut p = init_params(Dims::new(3, 2, 2, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.dense2.bias[0] = f64::NAN;
        let mut state = OptimizerState::new(&p, 0.9, 1e-8);
        let err = rmsprop_update(&mut p, &g, &mut state, 1e-3).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "dense2.bias"));
        assert_eq!(p, before);
        assert_eq!(state.steps, 0);
    }
}
