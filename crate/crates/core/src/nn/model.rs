use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::lstm::{average_pool, average_pool_backward, lstm_backward, lstm_forward, LstmCache, LstmParams, GATE_FORGET};
use crate::error::{Error, Result};

/// Pre-normalization norms below this are rejected.
const MIN_NORM: f64 = 1e-12;

/// `(F, d₁, d₂, d)`: input features, LSTM units per direction, hidden dense
/// units, embedding size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input_dim: usize,
    pub lstm_units: usize,
    pub dense_units: usize,
    pub embedding_dim: usize,
}

impl Dims {
    pub const fn new(input_dim: usize, lstm_units: usize, dense_units: usize, embedding_dim: usize) -> Self {
        Dims {
            input_dim,
            lstm_units,
            dense_units,
            embedding_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.lstm_units == 0 || self.dense_units == 0 || self.embedding_dim == 0 {
            return Err(Error::Config(format!("all network dims must be positive, got {self:?}")));
        }
        Ok(())
    }
}

impl Default for Dims {
    fn default() -> Self {
        Dims::new(35, 16, 16, 16)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `out × in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseParams {
    pub fn zeros(input: usize, output: usize) -> Self {
        DenseParams {
            weights: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TristouNetParams {
    pub dims: Dims,
    pub forward_lstm: LstmParams,
    pub backward_lstm: LstmParams,
    pub dense1: DenseParams,
    pub dense2: DenseParams,
}

/// Parameter-shaped gradient container.
pub type Gradients = TristouNetParams;

pub(crate) const TENSOR_NAMES: [&str; 10] = [
    "forward_lstm.input_weights",
    "forward_lstm.recurrent_weights",
    "forward_lstm.bias",
    "backward_lstm.input_weights",
    "backward_lstm.recurrent_weights",
    "backward_lstm.bias",
    "dense1.weights",
    "dense1.bias",
    "dense2.weights",
    "dense2.bias",
];

impl TristouNetParams {
    pub fn zeros(dims: Dims) -> Self {
        TristouNetParams {
            dims,
            forward_lstm: LstmParams::zeros(dims.input_dim, dims.lstm_units),
            backward_lstm: LstmParams::zeros(dims.input_dim, dims.lstm_units),
            dense1: DenseParams::zeros(2 * dims.lstm_units, dims.dense_units),
            dense2: DenseParams::zeros(dims.dense_units, dims.embedding_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims)
    }

    /// Every tensor with its name and shape, in manifest order.
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> (Vec<usize>, &[f64]) {
            (a.shape().to_vec(), a.as_slice().expect("standard layout"))
        }
        let parts = [
            flat(&self.forward_lstm.input_weights),
            flat(&self.forward_lstm.recurrent_weights),
            flat(&self.forward_lstm.bias),
            flat(&self.backward_lstm.input_weights),
            flat(&self.backward_lstm.recurrent_weights),
            flat(&self.backward_lstm.bias),
            flat(&self.dense1.weights),
            flat(&self.dense1.bias),
            flat(&self.dense2.weights),
            flat(&self.dense2.bias),
        ];
        TENSOR_NAMES
            .iter()
            .zip(parts)
            .map(|(n, (shape, data))| (*n, shape, data))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let parts: [&mut [f64]; 10] = [
            self.forward_lstm.input_weights.as_slice_mut().unwrap(),
            self.forward_lstm.recurrent_weights.as_slice_mut().unwrap(),
            self.forward_lstm.bias.as_slice_mut().unwrap(),
            self.backward_lstm.input_weights.as_slice_mut().unwrap(),
            self.backward_lstm.recurrent_weights.as_slice_mut().unwrap(),
            self.backward_lstm.bias.as_slice_mut().unwrap(),
            self.dense1.weights.as_slice_mut().unwrap(),
            self.dense1.bias.as_slice_mut().unwrap(),
            self.dense2.weights.as_slice_mut().unwrap(),
            self.dense2.bias.as_slice_mut().unwrap(),
        ];
        TENSOR_NAMES.iter().copied().zip(parts).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, _, d)| d.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, _, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, a) in self.tensors_mut() {
            a.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, d)| d.iter().all(|x| x.is_finite()))
    }

    pub fn check_input_dim(&self, input_dim: usize) -> Result<()> {
        if self.dims.input_dim != input_dim {
            return Err(Error::Dimension(format!(
                "model expects {} feature columns, data has {input_dim}",
                self.dims.input_dim
            )));
        }
        Ok(())
    }
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

/// `rows × cols` (rows ≥ cols) with orthonormal columns, by modified
/// Gram-Schmidt on a Gaussian matrix.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let mut m = Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal));
    for j in 0..cols {
        for k in 0..j {
            let proj = m.column(j).dot(&m.column(k));
            let basis = m.column(k).to_owned();
            m.column_mut(j).scaled_add(-proj, &basis);
        }
        let norm = m.column(j).dot(&m.column(j)).sqrt();
        m.column_mut(j).mapv_inplace(|v| v / norm);
    }
    m
}

fn init_lstm<R: Rng + ?Sized>(input_dim: usize, units: usize, rng: &mut R) -> LstmParams {
    let mut bias = Array1::zeros(4 * units);
    bias.slice_mut(s![GATE_FORGET * units..(GATE_FORGET + 1) * units]).fill(1.0);
    LstmParams {
        // fans of the whole stacked kernel
        input_weights: glorot(4 * units, input_dim, input_dim, 4 * units, rng),
        recurrent_weights: orthogonal(4 * units, units, rng),
        bias,
    }
}

/// Glorot-uniform input and dense weights, orthogonal recurrent weights, zero
/// biases except forget-gate biases at 1.
pub fn init_params<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Result<TristouNetParams> {
    dims.validate()?;
    let forward_lstm = init_lstm(dims.input_dim, dims.lstm_units, rng);
    let backward_lstm = init_lstm(dims.input_dim, dims.lstm_units, rng);
    let (h, d2, d) = (2 * dims.lstm_units, dims.dense_units, dims.embedding_dim);
    Ok(TristouNetParams {
        dims,
        forward_lstm,
        backward_lstm,
        dense1: DenseParams {
            weights: glorot(d2, h, h, d2, rng),
            bias: Array1::zeros(d2),
        },
        dense2: DenseParams {
            weights: glorot(d, d2, d2, d, rng),
            bias: Array1::zeros(d),
        },
    })
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub forward: LstmCache,
    pub backward: LstmCache,
    /// `[pool(forward) ; pool(backward)]`, length `2·d₁`.
    pub pooled: Array1<f64>,
    pub dense1_pre: Array1<f64>,
    pub dense1_out: Array1<f64>,
    pub dense2_pre: Array1<f64>,
    /// Pre-normalization vector.
    pub dense2_out: Array1<f64>,
    pub norm: f64,
    pub output: Array1<f64>,
}

/// Forward pass for one sequence (`T × F`, any `T ≥ 1`).
pub fn embed(p: &TristouNetParams, x: ArrayView2<f64>) -> Result<(Array1<f64>, ForwardCache)> {
    p.check_input_dim(x.ncols())?;
    let (fwd_out, forward) = lstm_forward(&p.forward_lstm, x, false)?;
    let (bwd_out, backward) = lstm_forward(&p.backward_lstm, x, true)?;
    let pooled = concatenate(
        Axis(0),
        &[average_pool(fwd_out.view())?.view(), average_pool(bwd_out.view())?.view()],
    )
    .expect("equal-rank vectors");
    let dense1_pre = p.dense1.weights.dot(&pooled) + &p.dense1.bias;
    let dense1_out = dense1_pre.mapv(f64::tanh);
    let dense2_pre = p.dense2.weights.dot(&dense1_out) + &p.dense2.bias;
    let dense2_out = dense2_pre.mapv(f64::tanh);
    let norm = dense2_out.dot(&dense2_out).sqrt();
    if !(norm >= MIN_NORM) {
        return Err(Error::DegenerateEmbedding(norm));
    }
    let output = &dense2_out / norm;
    let cache = ForwardCache {
        forward,
        backward,
        pooled,
        dense1_pre,
        dense1_out,
        dense2_pre,
        dense2_out,
        norm,
        output: output.clone(),
    };
    Ok((output, cache))
}

/// Forward pass without keeping the cache.
pub fn embed_vector(p: &TristouNetParams, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    embed(p, x).map(|(y, _)| y)
}

/// Gradient of every parameter given `∂L/∂y` for the normalized output `y`.
pub fn embed_backward(p: &TristouNetParams, cache: &ForwardCache, grad_output: ArrayView1<f64>) -> Gradients {
    let y = &cache.output;
    // through y = z / |z|: (I − y yᵀ) g / |z|
    let grad_z = (&grad_output - &(y * grad_output.dot(y))) / cache.norm;
    let grad_a2 = &grad_z * &cache.dense2_out.mapv(|z| 1.0 - z * z);
    let grad_h1 = p.dense2.weights.t().dot(&grad_a2);
    let grad_a1 = &grad_h1 * &cache.dense1_out.mapv(|h| 1.0 - h * h);
    let grad_pooled = p.dense1.weights.t().dot(&grad_a1);

    let outer = |a: &Array1<f64>, b: &Array1<f64>| {
        let m = a.view().insert_axis(Axis(1)).dot(&b.view().insert_axis(Axis(0)));
        m.as_standard_layout().into_owned()
    };
    let units = p.dims.lstm_units;
    let len = cache.forward.hidden.nrows();
    let grad_fwd = average_pool_backward(grad_pooled.slice(s![..units]), len);
    let grad_bwd = average_pool_backward(grad_pooled.slice(s![units..]), len);
    Gradients {
        dims: p.dims,
        forward_lstm: lstm_backward(&p.forward_lstm, &cache.forward, grad_fwd.view()),
        backward_lstm: lstm_backward(&p.backward_lstm, &cache.backward, grad_bwd.view()),
        dense1: DenseParams {
            weights: outer(&grad_a1, &cache.pooled),
            bias: grad_a1,
        },
        dense2: DenseParams {
            weights: outer(&grad_a2, &cache.dense1_out),
            bias: grad_a2,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input(t: usize, f: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((t, f), |_| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn parameter_count_closed_form() {
        let p = init_params(Dims::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        // hand count per block
        let lstm = 4 * (16 * 35 + 16 * 16 + 16);
        assert_eq!(lstm, 3328);
        let dense1 = 16 * 32 + 16;
        let dense2 = 16 * 16 + 16;
        assert_eq!(p.num_parameters(), 2 * lstm + dense1 + dense2);
        assert_eq!(p.num_parameters(), 7456);
    }

    #[test]
    fn init_is_deterministic_with_unit_forget_bias() {
        let a = init_params(Dims::new(6, 4, 4, 3), &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = init_params(Dims::new(6, 4, 4, 3), &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        for lstm in [&a.forward_lstm, &a.backward_lstm] {
            for (k, &v) in lstm.bias.iter().enumerate() {
                let expected = if lstm.gate_rows(GATE_FORGET).contains(&k) { 1.0 } else { 0.0 };
                assert_eq!(v, expected);
            }
            let gram = lstm.recurrent_weights.t().dot(&lstm.recurrent_weights);
            for i in 0..4 {
                for j in 0..4 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[[i, j]] - e).abs() < 1e-12);
                }
            }
            let limit = (6.0f64 / (6 + 16) as f64).sqrt();
            assert!(lstm.input_weights.iter().all(|w| w.abs() <= limit));
        }
    }

    #[test]
    fn output_is_unit_norm_and_input_dependent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = init_params(Dims::new(5, 4, 4, 3), &mut rng).unwrap();
        let a = embed_vector(&p, random_input(9, 5, &mut rng).view()).unwrap();
        let b = embed_vector(&p, random_input(9, 5, &mut rng).view()).unwrap();
        assert!((a.dot(&a).sqrt() - 1.0).abs() < 1e-12);
        assert!((&a - &b).mapv(f64::abs).sum() > 1e-6);
        // variable lengths map to the same dimension
        assert_eq!(embed_vector(&p, random_input(1, 5, &mut rng).view()).unwrap().len(), 3);
        assert_eq!(embed_vector(&p, random_input(40, 5, &mut rng).view()).unwrap().len(), 3);
    }

    #[test]
    fn equal_inputs_equal_embeddings() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = init_params(Dims::new(5, 4, 4, 3), &mut rng).unwrap();
        let x = random_input(1, 5, &mut rng);
        assert_eq!(embed_vector(&p, x.view()).unwrap(), embed_vector(&p, x.clone().view()).unwrap());
    }

    #[test]
    fn degenerate_embedding_is_an_error() {
        let p = TristouNetParams::zeros(Dims::new(2, 2, 2, 2));
        let x = Array2::ones((3, 2));
        assert!(matches!(embed(&p, x.view()), Err(Error::DegenerateEmbedding(_))));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = init_params(Dims::new(4, 3, 3, 2), &mut rng).unwrap();
        let (_, cache) = embed(&p, random_input(6, 4, &mut rng).view()).unwrap();
        let g = embed_backward(&p, &cache, Array1::zeros(2).view());
        assert!(g.tensors().iter().all(|(_, _, d)| d.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn gradient_along_output_is_projected_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = init_params(Dims::new(4, 3, 3, 3), &mut rng).unwrap();
        let (y, cache) = embed(&p, random_input(6, 4, &mut rng).view()).unwrap();
        let g = embed_backward(&p, &cache, (&y * 2.5).view());
        let largest = g
            .tensors()
            .iter()
            .flat_map(|(_, _, d)| d.iter().map(|v| v.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        assert!(largest < 1e-12, "{largest}");
    }
}
