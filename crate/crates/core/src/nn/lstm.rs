use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// One LSTM layer without peepholes. Gate blocks are stacked row-wise in the
/// order input, forget, cell, output, so `input_weights` is `4·units × F` and
/// `recurrent_weights` is `4·units × units`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_weights: Array2<f64>,
    pub recurrent_weights: Array2<f64>,
    pub bias: Array1<f64>,
}

pub(crate) const GATE_INPUT: usize = 0;
pub(crate) const GATE_FORGET: usize = 1;
pub(crate) const GATE_CELL: usize = 2;
pub(crate) const GATE_OUTPUT: usize = 3;

impl LstmParams {
    pub fn zeros(input_dim: usize, units: usize) -> Self {
        LstmParams {
            input_weights: Array2::zeros((4 * units, input_dim)),
            recurrent_weights: Array2::zeros((4 * units, units)),
            bias: Array1::zeros(4 * units),
        }
    }

    pub fn units(&self) -> usize {
        self.recurrent_weights.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.ncols()
    }

    /// Rows of `gate` within the stacked matrices.
    pub fn gate_rows(&self, gate: usize) -> std::ops::Range<usize> {
        let u = self.units();
        gate * u..(gate + 1) * u
    }
}

/// Everything the backward pass needs from one direction.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub inputs: Array2<f64>,
    /// Post-activation gates per original time index, `T × 4·units`.
    pub gates: Array2<f64>,
    pub cells: Array2<f64>,
    pub cell_tanh: Array2<f64>,
    /// Outputs in original time order, `T × units`.
    pub hidden: Array2<f64>,
    pub reversed: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Original time indices in the order the recurrence visits them.
fn recurrence_order(len: usize, reversed: bool) -> Box<dyn DoubleEndedIterator<Item = usize>> {
    if reversed {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    }
}

/// Runs the recurrence from a zero state. With `reversed`, time is consumed
/// back to front; outputs are still indexed by original time.
pub fn lstm_forward(p: &LstmParams, x: ArrayView2<f64>, reversed: bool) -> Result<(Array2<f64>, LstmCache)> {
    if x.ncols() != p.input_dim() {
        return Err(Error::Dimension(format!(
            "lstm expects {} input columns, got {}",
            p.input_dim(),
            x.ncols()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::Empty("input sequence"));
    }
    let units = p.units();
    let len = x.nrows();
    let projected = x.dot(&p.input_weights.t()) + &p.bias;
    let mut gates = Array2::zeros((len, 4 * units));
    let mut cells = Array2::zeros((len, units));
    let mut cell_tanh = Array2::zeros((len, units));
    let mut hidden = Array2::zeros((len, units));

    let mut h_prev = Array1::<f64>::zeros(units);
    let mut c_prev = Array1::<f64>::zeros(units);
    for t in recurrence_order(len, reversed) {
        let z = &projected.row(t) + &p.recurrent_weights.dot(&h_prev);
        let mut g = gates.row_mut(t);
        for k in 0..4 * units {
            g[k] = if k / units == GATE_CELL { z[k].tanh() } else { sigmoid(z[k]) };
        }
        for k in 0..units {
            let i = g[GATE_INPUT * units + k];
            let f = g[GATE_FORGET * units + k];
            let c_in = g[GATE_CELL * units + k];
            let o = g[GATE_OUTPUT * units + k];
            let c = f * c_prev[k] + i * c_in;
            let tc = c.tanh();
            cells[[t, k]] = c;
            cell_tanh[[t, k]] = tc;
            hidden[[t, k]] = o * tc;
            c_prev[k] = c;
            h_prev[k] = o * tc;
        }
    }
    let cache = LstmCache {
        inputs: x.to_owned(),
        gates,
        cells,
        cell_tanh,
        hidden: hidden.clone(),
        reversed,
    };
    Ok((hidden, cache))
}

/// Backpropagation through time. `grad_hidden` is `∂L/∂h_t` per original time
/// index; returns gradients shaped like `p`.
pub fn lstm_backward(p: &LstmParams, cache: &LstmCache, grad_hidden: ArrayView2<f64>) -> LstmParams {
    let units = p.units();
    let len = cache.hidden.nrows();
    let mut grad_pre = Array2::<f64>::zeros((len, 4 * units));
    let mut prev_hidden = Array2::<f64>::zeros((len, units));

    let order: Vec<usize> = recurrence_order(len, cache.reversed).collect();
    let mut dh_rec = Array1::<f64>::zeros(units);
    let mut dc_next = Array1::<f64>::zeros(units);
    for (step, &t) in order.iter().enumerate().rev() {
        let prev = if step > 0 { Some(order[step - 1]) } else { None };
        let g = cache.gates.row(t);
        let mut dz = grad_pre.row_mut(t);
        for k in 0..units {
            let i = g[GATE_INPUT * units + k];
            let f = g[GATE_FORGET * units + k];
            let c_in = g[GATE_CELL * units + k];
            let o = g[GATE_OUTPUT * units + k];
            let tc = cache.cell_tanh[[t, k]];
            let c_prev = prev.map_or(0.0, |q| cache.cells[[q, k]]);

            let dh = grad_hidden[[t, k]] + dh_rec[k];
            let d_o = dh * tc;
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            dz[GATE_INPUT * units + k] = dc * c_in * i * (1.0 - i);
            dz[GATE_FORGET * units + k] = dc * c_prev * f * (1.0 - f);
            dz[GATE_CELL * units + k] = dc * i * (1.0 - c_in * c_in);
            dz[GATE_OUTPUT * units + k] = d_o * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        dh_rec = p.recurrent_weights.t().dot(&dz);
        if let Some(q) = prev {
            prev_hidden.row_mut(t).assign(&cache.hidden.row(q));
        }
    }
    LstmParams {
        input_weights: grad_pre.t().dot(&cache.inputs).as_standard_layout().into_owned(),
        recurrent_weights: grad_pre.t().dot(&prev_hidden).as_standard_layout().into_owned(),
        bias: grad_pre.sum_axis(Axis(0)),
    }
}

/// Mean over time, `T × d → d`.
pub fn average_pool(outputs: ArrayView2<f64>) -> Result<Array1<f64>> {
    outputs.mean_axis(Axis(0)).ok_or(Error::Empty("pooling input"))
}

/// Spreads a pooled-vector gradient uniformly over `len` steps.
pub(crate) fn average_pool_backward(grad: ArrayView1<f64>, len: usize) -> Array2<f64> {
    let scaled = grad.mapv(|g| g / len as f64);
    scaled.broadcast((len, grad.len())).unwrap().to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(input_dim: usize, units: usize, rng: &mut ChaCha8Rng) -> LstmParams {
        let mut p = LstmParams::zeros(input_dim, units);
        p.input_weights.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        p.recurrent_weights.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        p.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        p
    }

    /// Straight-line scalar LSTM over plain vectors, indices spelled out.
    fn scalar_lstm(p: &LstmParams, x: &[Vec<f64>], reversed: bool) -> Vec<Vec<f64>> {
        let u = p.units();
        let f_in = p.input_dim();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = vec![0.0; u];
        let mut c = vec![0.0; u];
        let mut out = vec![vec![0.0; u]; x.len()];
        let times: Vec<usize> = if reversed { (0..x.len()).rev().collect() } else { (0..x.len()).collect() };
        for t in times {
            let mut pre = vec![0.0; 4 * u];
            for r in 0..4 * u {
                let mut acc = p.bias[r];
                for j in 0..f_in {
                    acc += p.input_weights[[r, j]] * x[t][j];
                }
                for j in 0..u {
                    acc += p.recurrent_weights[[r, j]] * h[j];
                }
                pre[r] = acc;
            }
            let mut h_new = vec![0.0; u];
            for k in 0..u {
                let i = sig(pre[k]);
                let f = sig(pre[u + k]);
                let g = pre[2 * u + k].tanh();
                let o = sig(pre[3 * u + k]);
                c[k] = f * c[k] + i * g;
                h_new[k] = o * c[k].tanh();
            }
            h = h_new;
            out[t] = h.clone();
        }
        out
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let p = LstmParams::zeros(3, 4);
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64);
        let (h, _) = lstm_forward(&p, x.view(), false).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_direction_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_params(3, 4, &mut rng);
        let x = array![[0.3, -0.2, 0.9]];
        let (a, _) = lstm_forward(&p, x.view(), false).unwrap();
        let (b, _) = lstm_forward(&p, x.view(), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matches_scalar_oracle_both_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_params(4, 3, &mut rng);
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let x = Array2::from_shape_fn((6, 4), |(t, j)| rows[t][j]);
        for reversed in [false, true] {
            let (h, _) = lstm_forward(&p, x.view(), reversed).unwrap();
            let oracle = scalar_lstm(&p, &rows, reversed);
            for t in 0..6 {
                for k in 0..3 {
                    assert!((h[[t, k]] - oracle[t][k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = LstmParams::zeros(3, 2);
        assert!(matches!(lstm_forward(&p, Array2::zeros((4, 5)).view(), false), Err(Error::Dimension(_))));
    }

    #[test]
    fn pooling() {
        let constant = Array2::from_shape_fn((4, 3), |(_, j)| j as f64 + 0.5);
        assert_eq!(average_pool(constant.view()).unwrap(), array![0.5, 1.5, 2.5]);
        assert_eq!(average_pool(array![[0.0], [2.0]].view()).unwrap(), array![1.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Array2::from_shape_fn((5, 3), |_| rng.random_range(-2.0..2.0));
        let pooled = average_pool(m.view()).unwrap();
        for j in 0..3 {
            let mut sum = 0.0;
            for t in 0..5 {
                sum += m[[t, j]];
            }
            assert!((pooled[j] - sum / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_params(3, 2, &mut rng);
        let x = Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        let weights = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0));
        for reversed in [false, true] {
            let loss = |p: &LstmParams| {
                let (h, _) = lstm_forward(p, x.view(), reversed).unwrap();
                (&h * &weights).sum()
            };
            let (_, cache) = lstm_forward(&p, x.view(), reversed).unwrap();
            let grads = lstm_backward(&p, &cache, weights.view());
            let h = 1e-6;
            for (r, c) in [(0, 0), (3, 1), (7, 2)] {
                let mut plus = p.clone();
                plus.input_weights[[r, c]] += h;
                let mut minus = p.clone();
                minus.input_weights[[r, c]] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                assert!((fd - grads.input_weights[[r, c]]).abs() < 1e-8);
            }
            for (r, c) in [(1, 0), (6, 1)] {
                let mut plus = p.clone();
                plus.recurrent_weights[[r, c]] += h;
                let mut minus = p.clone();
                minus.recurrent_weights[[r, c]] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                assert!((fd - grads.recurrent_weights[[r, c]]).abs() < 1e-8);
            }
        }
    }
}
