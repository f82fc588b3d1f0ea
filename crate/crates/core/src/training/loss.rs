use ndarray::{Array1, ArrayView1};

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `‖a − p‖² − ‖a − n‖²`.
pub fn triplet_delta(anchor: ArrayView1<f64>, positive: ArrayView1<f64>, negative: ArrayView1<f64>) -> f64 {
    squared_distance(anchor, positive) - squared_distance(anchor, negative)
}

/// `Σ max(0, Δ + margin)`.
pub fn triplet_loss(deltas: &[f64], margin: f64) -> f64 {
    deltas.iter().map(|d| (d + margin).max(0.0)).sum()
}

/// Gradients of `max(0, Δ + margin)` with respect to the anchor, positive and
/// negative embeddings. All zero when the hinge is inactive.
pub fn triplet_loss_grad(
    anchor: ArrayView1<f64>,
    positive: ArrayView1<f64>,
    negative: ArrayView1<f64>,
    margin: f64,
) -> [Array1<f64>; 3] {
    if triplet_delta(anchor, positive, negative) + margin <= 0.0 {
        let z = Array1::zeros(anchor.len());
        return [z.clone(), z.clone(), z];
    }
    [
        (&negative - &positive) * 2.0,
        (&positive - &anchor) * 2.0,
        (&anchor - &negative) * 2.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut ChaCha8Rng, d: usize) -> Array1<f64> {
        let v: Array1<f64> = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
        let n = v.dot(&v).sqrt();
        v / n
    }

    #[test]
    fn delta_geometry() {
        let a = array![1.0, 0.0, 0.0];
        let n = array![0.0, 1.0, 0.0];
        assert_eq!(triplet_delta(a.view(), a.view(), n.view()), -2.0);
        assert_eq!(triplet_delta(a.view(), n.view(), n.view()), 0.0);
    }

    #[test]
    fn delta_matches_dot_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (a, p, n) = (unit(&mut rng, 8), unit(&mut rng, 8), unit(&mut rng, 8));
            let identity = 2.0 * (a.dot(&n) - a.dot(&p));
            assert!((triplet_delta(a.view(), p.view(), n.view()) - identity).abs() < 1e-12);
        }
    }

    #[test]
    fn hinge_values() {
        assert_eq!(triplet_loss(&[-0.3, -0.25, -1.0], 0.2), 0.0);
        let a = array![0.6, 0.8];
        let delta = triplet_delta(a.view(), a.view(), a.view());
        assert!((triplet_loss(&[delta], 0.2) - 0.2).abs() < 1e-15);
        assert!((triplet_loss(&[-0.3, 0.1], 0.2) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn inactive_and_cancelling_gradients() {
        let a = array![1.0, 0.0];
        let n = array![-1.0, 0.0];
        for g in triplet_loss_grad(a.view(), a.view(), n.view(), 0.2) {
            assert!(g.iter().all(|&v| v == 0.0));
        }
        let p = array![0.0, 1.0];
        let [ga, _, _] = triplet_loss_grad(a.view(), p.view(), p.view(), 0.2);
        assert!(ga.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let margin = 0.2;
        let mut checked = 0;
        while checked < 20 {
            let (a, p, n) = (unit(&mut rng, 5), unit(&mut rng, 5), unit(&mut rng, 5));
            let delta = triplet_delta(a.view(), p.view(), n.view());
            if delta + margin < 0.01 {
                continue;
            }
            checked += 1;
            let grads = triplet_loss_grad(a.view(), p.view(), n.view(), margin);
            let vecs = [a, p, n];
            let h = 1e-6;
            for role in 0..3 {
                for k in 0..5 {
                    let eval = |shift: f64| {
                        let mut v = vecs.clone();
                        v[role][k] += shift;
                        triplet_loss(&[triplet_delta(v[0].view(), v[1].view(), v[2].view())], margin)
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let an = grads[role][k];
                    let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-8);
                    assert!(rel < 1e-6, "role {role} k {k}: {an} vs {fd}");
                }
            }
        }
    }
}
