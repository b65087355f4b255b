//! Per-frame LPC analysis: decimation, pre-emphasis, Hamming framing,
//! energy-based frame dropping, Levinson-Durbin and the LPC-to-cepstrum
//! recursion.
//!
//! Predictor polynomials use the convention `A(z) = 1 + sum a_k z^-k`, so a
//! first order source with pole `rho` has `a_1 = -rho`.

use std::f64::consts::PI;

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

pub const TARGET_RATE: u32 = 8000;
pub const FRAME_LEN: usize = 240;
pub const FRAME_OVERLAP: f64 = 2.0 / 3.0;
pub const PREEMPHASIS: f64 = 0.95;
pub const ENERGY_FLOOR_DB: f64 = 30.0;
pub const LPC_ORDER: usize = 20;

const DECIMATION_TAPS: usize = 31;
// Normalized to the 16 kHz Nyquist frequency. Slightly above the exact
// half-band point so a 3.9 kHz tone stays within 3 dB.
const DECIMATION_CUTOFF: f64 = 0.52;

/// Linear-phase anti-alias filter applied before 2:1 decimation.
///
/// Hamming-windowed sinc, normalized to unity DC gain.
pub fn decimation_filter() -> [f64; DECIMATION_TAPS] {
    let mut h = [0.0; DECIMATION_TAPS];
    let mid = (DECIMATION_TAPS / 2) as f64;
    for (n, tap) in h.iter_mut().enumerate() {
        let t = n as f64 - mid;
        let sinc = if t == 0.0 {
            DECIMATION_CUTOFF
        } else {
            (PI * DECIMATION_CUTOFF * t).sin() / (PI * t)
        };
        let w = 0.54 - 0.46 * (2.0 * PI * n as f64 / (DECIMATION_TAPS - 1) as f64).cos();
        *tap = sinc * w;
    }
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= sum);
    h
}

/// Brings a 16 kHz signal down to 8 kHz; 8 kHz input passes through.
///
/// The filter is applied zero-phase (centered), with the signal's edge
/// samples held constant beyond its ends, then every second sample is kept.
pub fn decimate_to_8khz(signal: &AudioSignal) -> Result<AudioSignal> {
    match signal.sample_rate() {
        TARGET_RATE => Ok(signal.clone()),
        16000 => {
            let x = signal.samples();
            if x.is_empty() {
                return AudioSignal::new(Vec::new(), TARGET_RATE);
            }
            let h = decimation_filter();
            let half = (DECIMATION_TAPS / 2) as isize;
            let last = x.len() as isize - 1;
            let out = (0..x.len())
                .step_by(2)
                .map(|n| {
                    h.iter()
                        .enumerate()
                        .map(|(k, &hk)| {
                            let idx = (n as isize + half - k as isize).clamp(0, last);
                            hk * x[idx as usize]
                        })
                        .sum()
                })
                .collect();
            AudioSignal::new(out, TARGET_RATE)
        }
        other => Err(Error::UnsupportedSampleRate(other)),
    }
}

/// `y[0] = x[0]`, `y[n] = x[n] - mu * x[n-1]`.
pub fn preemphasize(signal: &AudioSignal, mu: f64) -> Result<AudioSignal> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::InvalidArgument(format!(
            "pre-emphasis coefficient must be in [0, 1), got {mu}"
        )));
    }
    let x = signal.samples();
    let y = x
        .iter()
        .enumerate()
        .map(|(n, &v)| if n == 0 { v } else { v - mu * x[n - 1] })
        .collect();
    AudioSignal::new(y, signal.sample_rate())
}

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi n / (L - 1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Windowed samples.
    pub samples: Vec<f64>,
    /// Index of the first sample in the source signal.
    pub start: usize,
    /// dB relative to the most energetic frame of the utterance (<= 0).
    pub log_energy: f64,
}

impl Frame {
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

pub fn frame_step(frame_len: usize, overlap: f64) -> usize {
    ((frame_len as f64) * (1.0 - overlap)).round() as usize
}

/// Number of whole frames that fit in `len` samples.
pub fn frame_count(len: usize, frame_len: usize, step: usize) -> usize {
    if len < frame_len {
        0
    } else {
        (len - frame_len) / step + 1
    }
}

/// Cuts the signal into Hamming-windowed frames; a trailing partial frame is
/// dropped.
pub fn frame_and_window(signal: &AudioSignal, frame_len: usize, overlap: f64) -> Result<Vec<Frame>> {
    if frame_len == 0 || !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidArgument(format!(
            "frame length {frame_len} / overlap {overlap} out of range"
        )));
    }
    let step = frame_step(frame_len, overlap).max(1);
    let x = signal.samples();
    if x.len() < frame_len {
        return Err(Error::SignalTooShort {
            required: frame_len,
            actual: x.len(),
        });
    }
    let window = hamming(frame_len);
    let mut frames: Vec<Frame> = (0..frame_count(x.len(), frame_len, step))
        .map(|i| {
            let start = i * step;
            let samples = x[start..start + frame_len]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect();
            Frame {
                samples,
                start,
                log_energy: 0.0,
            }
        })
        .collect();

    let max_energy = frames.iter().map(Frame::energy).fold(0.0, f64::max);
    for f in &mut frames {
        f.log_energy = if max_energy > 0.0 {
            10.0 * (f.energy() / max_energy).log10()
        } else {
            f64::NEG_INFINITY
        };
    }
    Ok(frames)
}

/// Removes frames whose energy lies more than `floor_db` below the most
/// energetic frame. Order is preserved and the loudest frame always survives.
pub fn drop_low_energy(frames: Vec<Frame>, floor_db: f64) -> Result<Vec<Frame>> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("no frames to filter".into()));
    }
    let log_e: Vec<f64> = frames
        .iter()
        .map(|f| 10.0 * f.energy().log10())
        .collect();
    let max = log_e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::SilentUtterance);
    }
    Ok(frames
        .into_iter()
        .zip(log_e)
        .filter(|(_, e)| *e >= max - floor_db)
        .map(|(f, _)| f)
        .collect())
}

/// `r[k] = sum_{n=0}^{L-1-k} x[n] x[n+k]` for `k = 0..=order`.
pub fn autocorrelate(x: &[f64], order: usize) -> Result<Vec<f64>> {
    if order >= x.len() {
        return Err(Error::InvalidArgument(format!(
            "autocorrelation order {order} must be below frame length {}",
            x.len()
        )));
    }
    Ok((0..=order)
        .map(|k| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameLpc {
    /// `a[1..=P]`; the implicit leading 1 is not stored.
    pub coeffs: Vec<f64>,
    pub reflection: Vec<f64>,
    pub prediction_error: f64,
}

impl FrameLpc {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

/// Solves the autocorrelation normal equations `R a = -r[1..=P]` by the
/// Levinson-Durbin recursion.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<FrameLpc> {
    if r.len() < order + 1 {
        return Err(Error::InvalidArgument(format!(
            "need {} autocorrelation lags, got {}",
            order + 1,
            r.len()
        )));
    }
    if r[0].is_nan() || r[0] <= 0.0 {
        return Err(Error::DegenerateFrame(r[0]));
    }
    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut err = r[0];
    for i in 0..order {
        let acc = r[i + 1] + (0..i).map(|j| a[j] * r[i - j]).sum::<f64>();
        let k = -acc / err;
        if k.is_nan() || k.abs() >= 1.0 {
            return Err(Error::UnstableReflection {
                index: i + 1,
                value: k,
            });
        }
        prev[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = prev[j] + k * prev[i - 1 - j];
        }
        a[i] = k;
        reflection.push(k);
        err *= 1.0 - k * k;
    }
    Ok(FrameLpc {
        coeffs: a,
        reflection,
        prediction_error: err,
    })
}

/// Cepstrum of `1 / A(z)` (c0 excluded), `ncep` coefficients.
///
/// `c[1] = -a[1]`, `c[n] = -a[n] - sum_{k=1}^{n-1} (k/n) c[k] a[n-k]`, with
/// `a[n] = 0` past the polynomial order.
pub fn lpc_to_cepstrum(a: &[f64], ncep: usize) -> Vec<f64> {
    let coef = |n: usize| if n >= 1 && n <= a.len() { a[n - 1] } else { 0.0 };
    let mut c = vec![0.0; ncep];
    for n in 1..=ncep {
        let mut acc = -coef(n);
        for k in 1..n {
            let ank = coef(n - k);
            if ank != 0.0 {
                acc -= (k as f64 / n as f64) * c[k - 1] * ank;
            }
        }
        c[n - 1] = acc;
    }
    c
}
