//! MFCC feature stack: Hamming-windowed frames, 512-point power spectrum, 40
//! triangular mel filters over 0..Nyquist, log, DCT-II (c0 dropped), plus HTK
//! regression deltas.
//!
//! Default layout (35 columns): `[c1..c11, Δc1..Δc11, ΔΔc1..ΔΔc11, Δe, ΔΔe]`.
//! Baseline layout (12 columns): `[c1..c11, e]`.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::corpus::{AudioSignal, FeatureSequence};
use crate::error::{Error, Result};

/// Floor applied to energies before the logarithm.
pub const ENERGY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub frame_duration: f64,
    pub frame_step: f64,
    pub num_mfcc: usize,
    pub num_mel_filters: usize,
    pub fft_size: usize,
    /// Δ and ΔΔ of the cepstral coefficients.
    pub include_derivatives: bool,
    /// Δ and ΔΔ of the log-energy.
    pub include_energy_derivatives: bool,
    /// Static log-energy column (baseline feature set).
    pub include_static_energy: bool,
    pub delta_window: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            frame_duration: 0.032,
            frame_step: 0.020,
            num_mfcc: 11,
            num_mel_filters: 40,
            fft_size: 512,
            include_derivatives: true,
            include_energy_derivatives: true,
            include_static_energy: false,
            delta_window: 2,
        }
    }
}

impl FeatureConfig {
    /// Derivative-free set used by the BIC and divergence baselines.
    pub fn baseline() -> Self {
        FeatureConfig {
            include_derivatives: false,
            include_energy_derivatives: false,
            include_static_energy: true,
            ..Default::default()
        }
    }

    pub fn output_dim(&self) -> usize {
        let cepstral = if self.include_derivatives { 3 } else { 1 } * self.num_mfcc;
        cepstral
            + usize::from(self.include_static_energy)
            + if self.include_energy_derivatives { 2 } else { 0 }
    }

    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        (self.frame_duration * sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.frame_step * sample_rate as f64).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("features: {m}")));
        if !(self.frame_step > 0.0 && self.frame_duration > self.frame_step) {
            return fail("need frame_duration > frame_step > 0".into());
        }
        if self.num_mfcc == 0 || self.num_mfcc >= self.num_mel_filters {
            return fail("need 1 <= num_mfcc < num_mel_filters".into());
        }
        if self.hop_samples(sample_rate) == 0 {
            return fail("frame_step is below one sample".into());
        }
        if self.fft_size < self.frame_samples(sample_rate) {
            return fail(format!(
                "fft_size {} < frame length {} samples",
                self.fft_size,
                self.frame_samples(sample_rate)
            ));
        }
        Ok(())
    }
}

/// Framed signal: the raw samples per frame and their Hamming-windowed copy.
#[derive(Debug, Clone)]
pub struct Frames {
    pub raw: Array2<f64>,
    pub windowed: Array2<f64>,
    pub sample_rate: u32,
}

impl Frames {
    pub fn len(&self) -> usize {
        self.raw.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.nrows() == 0
    }
}

pub fn hamming(n: usize) -> Array1<f64> {
    if n == 1 {
        return Array1::ones(1);
    }
    Array1::from_shape_fn(n, |i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
}

/// `T = floor((len - frame) / hop) + 1` frames.
pub fn frame_signal(signal: &AudioSignal, cfg: &FeatureConfig) -> Result<Frames> {
    cfg.validate(signal.sample_rate)?;
    let n = cfg.frame_samples(signal.sample_rate);
    let hop = cfg.hop_samples(signal.sample_rate);
    if signal.samples.len() < n {
        return Err(Error::TooShort(format!(
            "{} samples, one frame needs {n}",
            signal.samples.len()
        )));
    }
    let count = (signal.samples.len() - n) / hop + 1;
    let raw = Array2::from_shape_fn((count, n), |(t, i)| signal.samples[t * hop + i]);
    let window = hamming(n);
    let windowed = &raw * &window.broadcast((count, n)).unwrap();
    Ok(Frames {
        raw,
        windowed,
        sample_rate: signal.sample_rate,
    })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters, equally spaced on the mel scale from 0 Hz to Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `num_filters × (fft_size / 2 + 1)`.
    pub weights: Array2<f64>,
    /// Peak frequency of each filter, Hz.
    pub centers: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(num_filters: usize, fft_size: usize, sample_rate: u32) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..num_filters + 2)
            .map(|i| mel_to_hz(top * i as f64 / (num_filters + 1) as f64))
            .collect();
        let bins = fft_size / 2 + 1;
        let weights = Array2::from_shape_fn((num_filters, bins), |(m, k)| {
            let f = k as f64 * sample_rate as f64 / fft_size as f64;
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            if f <= lo || f >= hi {
                0.0
            } else if f <= c {
                (f - lo) / (c - lo)
            } else {
                (hi - f) / (hi - c)
            }
        });
        MelFilterbank {
            weights,
            centers: edges[1..=num_filters].to_vec(),
        }
    }
}

fn power_spectra(windowed: ArrayView2<f64>, fft_size: usize) -> Array2<f64> {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let bins = fft_size / 2 + 1;
    let mut out = Array2::zeros((windowed.nrows(), bins));
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    for (frame, mut row) in windowed.rows().into_iter().zip(out.rows_mut()) {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (b, &x) in buf.iter_mut().zip(frame.iter()) {
            b.re = x;
        }
        fft.process(&mut buf);
        for (r, c) in row.iter_mut().zip(&buf[..bins]) {
            *r = c.norm_sqr();
        }
    }
    out
}

/// Filterbank energies `T × num_mel_filters`, floored, before the log.
pub fn mel_energies(frames: &Frames, cfg: &FeatureConfig) -> Array2<f64> {
    let bank = MelFilterbank::new(cfg.num_mel_filters, cfg.fft_size, frames.sample_rate);
    power_spectra(frames.windowed.view(), cfg.fft_size)
        .dot(&bank.weights.t())
        .mapv(|e| e.max(ENERGY_FLOOR))
}

/// Orthonormal DCT-II rows `1..=num_coeffs` for `len` inputs.
fn dct_matrix(num_coeffs: usize, len: usize) -> Array2<f64> {
    let scale = (2.0 / len as f64).sqrt();
    Array2::from_shape_fn((num_coeffs, len), |(j, m)| {
        scale * (PI * (j + 1) as f64 * (m as f64 + 0.5) / len as f64).cos()
    })
}

/// `T × (num_mfcc + 1)`: c1..c_num_mfcc, then the log-energy of the raw frame.
pub fn mfcc_static(frames: &Frames, cfg: &FeatureConfig) -> Array2<f64> {
    let log_mel = mel_energies(frames, cfg).mapv(f64::ln);
    let ceps = log_mel.dot(&dct_matrix(cfg.num_mfcc, cfg.num_mel_filters).t());
    let energy = frames
        .raw
        .map_axis(Axis(1), |f| f.iter().map(|x| x * x).sum::<f64>().max(ENERGY_FLOOR).ln());
    let mut out = Array2::zeros((frames.len(), cfg.num_mfcc + 1));
    out.slice_mut(s![.., ..cfg.num_mfcc]).assign(&ceps);
    out.column_mut(cfg.num_mfcc).assign(&energy);
    out
}

/// Regression deltas `d_t = Σθ θ(x_{t+θ} − x_{t−θ}) / (2 Σθ θ²)` with edge
/// frames repeated.
pub fn delta(x: ArrayView2<f64>, window: usize) -> Array2<f64> {
    let t_len = x.nrows();
    let mut out = Array2::zeros(x.raw_dim());
    if window == 0 || t_len == 0 {
        return out;
    }
    let denom = 2.0 * (1..=window).map(|w| (w * w) as f64).sum::<f64>();
    let last = t_len as isize - 1;
    let at = |t: isize| x.row(t.clamp(0, last) as usize);
    for t in 0..t_len as isize {
        let mut row = out.row_mut(t as usize);
        for w in 1..=window as isize {
            let (plus, minus) = (at(t + w), at(t - w));
            row.zip_mut_with(&(&plus - &minus), |d, &diff| *d += w as f64 * diff);
        }
        row.mapv_inplace(|d| d / denom);
    }
    out
}

/// Full feature stack for `signal`; origin 0, timing from `cfg`.
pub fn stack_features(signal: &AudioSignal, cfg: &FeatureConfig) -> Result<FeatureSequence> {
    let frames = frame_signal(signal, cfg)?;
    let stat = mfcc_static(&frames, cfg);
    let k = cfg.num_mfcc;
    let ceps = stat.slice(s![.., ..k]);
    let energy = stat.slice(s![.., k..]);

    let mut blocks: Vec<Array2<f64>> = vec![ceps.to_owned()];
    if cfg.include_static_energy {
        blocks.push(energy.to_owned());
    }
    if cfg.include_derivatives {
        let d = delta(ceps, cfg.delta_window);
        let dd = delta(d.view(), cfg.delta_window);
        blocks.push(d);
        blocks.push(dd);
    }
    if cfg.include_energy_derivatives {
        let d = delta(energy, cfg.delta_window);
        let dd = delta(d.view(), cfg.delta_window);
        blocks.push(d);
        blocks.push(dd);
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let stacked = ndarray::concatenate(Axis(1), &views).map_err(|e| Error::Dimension(e.to_string()))?;
    debug_assert_eq!(stacked.ncols(), cfg.output_dim());
    FeatureSequence::new(stacked, cfg.frame_step, cfg.frame_duration, 0.0)
}
