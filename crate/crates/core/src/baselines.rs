//! Classical sequence comparison: Gaussian divergence between diagonal
//! Gaussians and the BIC model-selection distance with full covariances.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const COVARIANCE_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    Diag,
    Full,
}

/// Maximum-likelihood (1/T) Gaussian statistics of a frame sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub count: usize,
    pub mean: Array1<f64>,
    /// Per-dimension variance, floored at [`VARIANCE_FLOOR`].
    pub diag_var: Array1<f64>,
    /// Unfloored covariance, present in [`CovarianceMode::Full`].
    pub full_cov: Option<Array2<f64>>,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn gaussian_stats(x: ArrayView2<f64>, mode: CovarianceMode) -> Result<GaussianStats> {
    let t = x.nrows();
    if t < 2 {
        return Err(Error::TooShort(format!("gaussian statistics need at least 2 frames, got {t}")));
    }
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let centered = &x - &mean;
    let diag_var = centered
        .mapv(|v| v * v)
        .mean_axis(Axis(0))
        .expect("nonempty")
        .mapv(|v| v.max(VARIANCE_FLOOR));
    let full_cov = match mode {
        CovarianceMode::Diag => None,
        CovarianceMode::Full => Some(centered.t().dot(&centered) / t as f64),
    };
    Ok(GaussianStats {
        count: t,
        mean,
        diag_var,
        full_cov,
    })
}

/// `Σᵢ (μa,i − μb,i)² / (σa,i σb,i)`.
pub fn gaussian_divergence(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("divergence between {}-dim and {}-dim stats", a.dim(), b.dim())));
    }
    Ok(a.mean
        .iter()
        .zip(&b.mean)
        .zip(a.diag_var.iter().zip(&b.diag_var))
        .map(|((ma, mb), (va, vb))| (ma - mb).powi(2) / (va.sqrt() * vb.sqrt()))
        .sum())
}

/// Log-determinant of a symmetric positive definite matrix via Cholesky.
pub fn log_det_spd(m: &Array2<f64>) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!("log-determinant of a {}x{} matrix", n, m.ncols())));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    let mut log_det = 0.0;
    for j in 0..n {
        let mut d = m[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let pivot = d.sqrt();
        l[[j, j]] = pivot;
        log_det += 2.0 * pivot.ln();
        for i in j + 1..n {
            let mut v = m[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / pivot;
        }
    }
    Ok(log_det)
}

/// `½(F + F(F+1)/2)·log n`.
pub fn bic_penalty(dim: usize, n: usize) -> f64 {
    let f = dim as f64;
    0.5 * (f + f * (f + 1.0) / 2.0) * (n as f64).ln()
}

fn ridge_log_det(cov: &Array2<f64>) -> Result<f64> {
    let mut c = cov.clone();
    c.diag_mut().mapv_inplace(|v| v + COVARIANCE_RIDGE);
    log_det_spd(&c)
}

fn full_cov(s: &GaussianStats) -> Result<&Array2<f64>> {
    s.full_cov
        .as_ref()
        .ok_or_else(|| Error::Config("BIC needs full-covariance statistics".into()))
}

/// Data term of ΔBIC from full-covariance statistics. The pooled covariance
/// is formed from the two halves' moments, so swapping the arguments yields
/// the same value bit for bit.
pub fn bic_data_term(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("BIC between {}-dim and {}-dim stats", a.dim(), b.dim())));
    }
    let (ca, cb) = (full_cov(a)?, full_cov(b)?);
    let (na, nb) = (a.count as f64, b.count as f64);
    let n = na + nb;
    let diff = &a.mean - &b.mean;
    let cross = na * nb / (n * n);
    let f = a.dim();
    let pooled = Array2::from_shape_fn((f, f), |(i, j)| (na * ca[[i, j]] + nb * cb[[i, j]]) / n + cross * diff[i] * diff[j]);
    let whole = n / 2.0 * ridge_log_det(&pooled)?;
    let parts = na / 2.0 * ridge_log_det(ca)? + nb / 2.0 * ridge_log_det(cb)?;
    Ok(whole - parts)
}

pub fn bic_from_stats(a: &GaussianStats, b: &GaussianStats, lambda: f64) -> Result<f64> {
    for s in [a, b] {
        if s.count < s.dim() + 1 {
            return Err(Error::TooShort(format!(
                "BIC needs at least {} frames per side, got {}",
                s.dim() + 1,
                s.count
            )));
        }
    }
    Ok(bic_data_term(a, b)? - lambda * bic_penalty(a.dim(), a.count + b.count))
}

/// ΔBIC between two frame sequences; positive favours two models.
pub fn bic_distance(x: ArrayView2<f64>, y: ArrayView2<f64>, lambda: f64) -> Result<f64> {
    if x.ncols() != y.ncols() {
        return Err(Error::Dimension(format!("BIC between {}-dim and {}-dim frames", x.ncols(), y.ncols())));
    }
    let a = gaussian_stats(x, CovarianceMode::Full)?;
    let b = gaussian_stats(y, CovarianceMode::Full)?;
    bic_from_stats(&a, &b, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, concatenate};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_frames(n: usize, f: usize, shift: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((n, f), |_| {
            let z: f64 = StandardNormal.sample(rng);
            z + shift
        })
    }

    #[test]
    fn constant_sequence_hits_floor() {
        let x = Array2::from_elem((10, 3), 4.0);
        let s = gaussian_stats(x.view(), CovarianceMode::Diag).unwrap();
        assert_eq!(s.diag_var, array![VARIANCE_FLOOR, VARIANCE_FLOOR, VARIANCE_FLOOR]);
        assert_eq!(s.mean, array![4.0, 4.0, 4.0]);
    }

    #[test]
    fn two_frame_hand_case() {
        let x = array![[0.0], [2.0]];
        let s = gaussian_stats(x.view(), CovarianceMode::Full).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert_eq!(s.diag_var[0], 1.0);
        assert_eq!(s.full_cov.unwrap()[[0, 0]], 1.0);
    }

    #[test]
    fn single_frame_rejected() {
        assert!(matches!(
            gaussian_stats(array![[1.0, 2.0]].view(), CovarianceMode::Diag),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn stats_match_two_pass_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian_frames(100, 12, 0.5, &mut rng);
        let s = gaussian_stats(x.view(), CovarianceMode::Full).unwrap();
        let cov = s.full_cov.as_ref().unwrap();
        for i in 0..12 {
            let mut m = 0.0;
            for t in 0..100 {
                m += x[[t, i]];
            }
            m /= 100.0;
            assert!((s.mean[i] - m).abs() < 1e-12);
            for j in 0..12 {
                let mut mj = 0.0;
                for t in 0..100 {
                    mj += x[[t, j]];
                }
                mj /= 100.0;
                let mut c = 0.0;
                for t in 0..100 {
                    c += (x[[t, i]] - m) * (x[[t, j]] - mj);
                }
                c /= 100.0;
                assert!((cov[[i, j]] - c).abs() < 1e-12);
                assert_eq!(cov[[i, j]], cov[[j, i]]);
            }
            assert!((s.diag_var[i] - cov[[i, i]]).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_unit_case() {
        let a = GaussianStats { count: 2, mean: array![0.0], diag_var: array![1.0], full_cov: None };
        let b = GaussianStats { count: 2, mean: array![1.0], diag_var: array![1.0], full_cov: None };
        assert_eq!(gaussian_divergence(&a, &b).unwrap(), 1.0);
        assert_eq!(gaussian_divergence(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn divergence_uses_standard_deviations() {
        let a = GaussianStats { count: 2, mean: array![0.0], diag_var: array![4.0], full_cov: None };
        let b = GaussianStats { count: 2, mean: array![3.0], diag_var: array![9.0], full_cov: None };
        assert_eq!(gaussian_divergence(&a, &b).unwrap(), 9.0 / 6.0);
    }

    #[test]
    fn log_det_matches_closed_forms() {
        let m = array![[4.0, 2.0], [2.0, 3.0]];
        assert!((log_det_spd(&m).unwrap() - 8.0f64.ln()).abs() < 1e-14);
        let d = Array2::from_diag(&array![2.0, 3.0, 5.0]);
        assert!((log_det_spd(&d).unwrap() - 30.0f64.ln()).abs() < 1e-14);
        assert!(matches!(log_det_spd(&array![[1.0, 2.0], [2.0, 1.0]]), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn identical_sequences_give_minus_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gaussian_frames(200, 3, 0.0, &mut rng);
        let d = bic_distance(x.view(), x.view(), 1.0).unwrap();
        let p = bic_penalty(3, 400);
        assert!((d + p).abs() < 1e-9 * p, "{d} vs {}", -p);
        assert!(d < 0.0);
    }

    #[test]
    fn same_gaussian_prefers_one_model() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let x = gaussian_frames(500, 3, 0.0, &mut rng);
            let y = gaussian_frames(500, 3, 0.0, &mut rng);
            let d = bic_distance(x.view(), y.view(), 1.0).unwrap();
            assert!(d < 0.0, "seed {seed}: {d}");
        }
    }

    #[test]
    fn separated_gaussians_prefer_two_models() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let x = gaussian_frames(500, 3, 0.0, &mut rng);
            let y = gaussian_frames(500, 3, 10.0, &mut rng);
            let d = bic_distance(x.view(), y.view(), 1.0).unwrap();
            assert!(d > 0.0, "seed {seed}: {d}");
        }
    }

    #[test]
    fn pooled_moments_equal_concatenated_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian_frames(40, 4, 0.0, &mut rng);
        let y = gaussian_frames(60, 4, 1.5, &mut rng);
        let xy = concatenate![Axis(0), x, y];
        let direct = gaussian_stats(xy.view(), CovarianceMode::Full).unwrap();
        let a = gaussian_stats(x.view(), CovarianceMode::Full).unwrap();
        let b = gaussian_stats(y.view(), CovarianceMode::Full).unwrap();
        let expected = 50.0 * ridge_log_det(direct.full_cov.as_ref().unwrap()).unwrap()
            - 20.0 * ridge_log_det(a.full_cov.as_ref().unwrap()).unwrap()
            - 30.0 * ridge_log_det(b.full_cov.as_ref().unwrap()).unwrap();
        assert!((bic_data_term(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn bic_requires_enough_frames_and_full_stats() {
        let x = Array2::from_shape_fn((3, 3), |(i, j)| (i * 3 + j) as f64);
        assert!(matches!(bic_distance(x.view(), x.view(), 1.0), Err(Error::TooShort(_))));
        let d = gaussian_stats(x.view(), CovarianceMode::Diag).unwrap();
        assert!(bic_data_term(&d, &d).is_err());
    }

    fn frames(n: usize, f: usize) -> impl Strategy<Value = Array2<f64>> {
        prop::collection::vec(-5.0f64..5.0, n * f).prop_map(move |v| Array2::from_shape_vec((n, f), v).unwrap())
    }

    proptest! {
        #[test]
        fn divergence_symmetric_nonnegative(
            ma in prop::collection::vec(-3.0f64..3.0, 4),
            mb in prop::collection::vec(-3.0f64..3.0, 4),
            va in prop::collection::vec(1e-6f64..4.0, 4),
            vb in prop::collection::vec(1e-6f64..4.0, 4),
        ) {
            let a = GaussianStats { count: 10, mean: Array1::from(ma.clone()), diag_var: Array1::from(va), full_cov: None };
            let b = GaussianStats { count: 10, mean: Array1::from(mb.clone()), diag_var: Array1::from(vb), full_cov: None };
            let ab = gaussian_divergence(&a, &b).unwrap();
            prop_assert_eq!(ab, gaussian_divergence(&b, &a).unwrap());
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab == 0.0, ma == mb);
        }

        #[test]
        fn bic_symmetric_with_nonnegative_data_term(x in frames(12, 3), y in frames(9, 3), lambda in 0.0f64..3.0) {
            let xy = bic_distance(x.view(), y.view(), lambda).unwrap();
            prop_assert_eq!(xy.to_bits(), bic_distance(y.view(), x.view(), lambda).unwrap().to_bits());
            let a = gaussian_stats(x.view(), CovarianceMode::Full).unwrap();
            let b = gaussian_stats(y.view(), CovarianceMode::Full).unwrap();
            prop_assert!(bic_data_term(&a, &b).unwrap() >= -1e-9);
        }
    }
}
