//! Range compression, windowed Doppler spectral estimation, and moment
//! extraction.
//!
//! The Doppler spectrum of a slow-time series `x(p)` of even length `N`
//! sampled at interval `T` is
//!
//! ```text
//! X(k) = (T / W) * sum_p x(p) w(p) exp(-j 2 pi k p / N),   k = -N/2 ..= N/2-1
//! ```
//!
//! with `W = sqrt(sum |w|^2)`. It is evaluated with an FFT followed by an
//! fftshift to the symmetric bin convention (DC at `k = 0`, negative
//! frequencies first). A direct O(N²) evaluator lives in the integration
//! test tree as the independent oracle.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::types::WindowKind;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan_forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

fn plan_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// In-place forward DFT (unnormalized, rustfft convention).
pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    plan_forward(buf.len()).process(buf);
}

/// In-place inverse DFT scaled by `1/N` so that `ifft(fft(x)) = x`.
pub(crate) fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    plan_inverse(n).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Swap halves so that DC moves to index `n/2` (symmetric convention).
pub(crate) fn fft_shift<T: Copy>(x: &mut [T]) {
    let n = x.len();
    debug_assert!(n.is_multiple_of(2));
    let half = n / 2;
    for i in 0..half {
        x.swap(i, i + half);
    }
}

/// Sampled window with its periodogram normalizer `W = sqrt(Σ|w|²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub coefficients: Vec<f64>,
    pub normalizer: f64,
}

impl WindowSpec {
    /// Builds a window of `len >= 2` samples.
    pub fn new(kind: WindowKind, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::invalid(format!(
                "window length must be >= 2, got {len}"
            )));
        }
        let n = (len - 1) as f64;
        let coefficients: Vec<f64> = (0..len)
            .map(|i| {
                let t = i as f64 / n;
                match kind {
                    WindowKind::Rectangular => 1.0,
                    WindowKind::Blackman => {
                        0.42 - 0.5 * (2.0 * std::f64::consts::PI * t).cos()
                            + 0.08 * (4.0 * std::f64::consts::PI * t).cos()
                    }
                    WindowKind::BlackmanNuttall => {
                        0.363_581_9 - 0.489_177_5 * (2.0 * std::f64::consts::PI * t).cos()
                            + 0.136_599_5 * (4.0 * std::f64::consts::PI * t).cos()
                            - 0.010_641_1 * (6.0 * std::f64::consts::PI * t).cos()
                    }
                }
            })
            .collect();
        let normalizer = coefficients.iter().map(|w| w * w).sum::<f64>().sqrt();
        if !(normalizer > 0.0) {
            return Err(Error::invalid("window normalizer must be positive"));
        }
        Ok(WindowSpec {
            kind,
            coefficients,
            normalizer,
        })
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Cross-correlates the received fast-time samples of one pulse against the
/// transmitted replica, compressing the long coded pulse into range gates.
///
/// Both inputs are sampled at the ADC rate. The output has
/// `rx.len() - replica.len() + 1` gates; gate `d` is
/// `sum_n rx[d + n] * conj(replica[n])`, so a return delayed by `d` samples
/// peaks exactly at gate `d`.
pub fn range_compress(rx: &[Complex64], replica: &[Complex64]) -> Result<Vec<Complex64>> {
    if replica.is_empty() {
        return Err(Error::invalid("replica must not be empty"));
    }
    if replica.len() > rx.len() {
        return Err(Error::invalid(format!(
            "replica length {} exceeds rx length {}",
            replica.len(),
            rx.len()
        )));
    }
    let n_gates = rx.len() - replica.len() + 1;
    let mut out = Vec::with_capacity(n_gates);
    for d in 0..n_gates {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, s) in replica.iter().enumerate() {
            acc += rx[d + n] * s.conj();
        }
        out.push(acc);
    }
    Ok(out)
}

/// Windowed periodogram amplitude spectrum of one slow-time series.
///
/// `sample_interval` is the slow-time spacing of `x` (the pulse interval
/// `T_s`, or `2 T_s` for staggered sub-sequences). The series length must be
/// even and equal to the window length. Bins follow the symmetric
/// convention `k = -N/2 ..= N/2 - 1`.
pub fn windowed_spectrum(
    x: &[Complex64],
    window: &WindowSpec,
    sample_interval: f64,
) -> Result<Vec<Complex64>> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "series length must be even, got {}",
            x.len()
        )));
    }
    windowed_spectrum_padded(x, window, x.len(), sample_interval)
}

/// Windowed spectrum with zero padding: the window tapers the `x.len()`
/// real samples, the series is then extended with zeros to `padded_len`
/// (even), and the DFT evaluated over `padded_len` symmetric bins. Zero
/// padding interpolates the spectrum to a finer bin spacing without
/// altering the leakage behaviour of the window.
pub fn windowed_spectrum_padded(
    x: &[Complex64],
    window: &WindowSpec,
    padded_len: usize,
    sample_interval: f64,
) -> Result<Vec<Complex64>> {
    let n = x.len();
    if n != window.len() {
        return Err(Error::dims(format!(
            "series length {} does not match window length {}",
            n,
            window.len()
        )));
    }
    if padded_len < n || padded_len < 2 || !padded_len.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "padded length must be even and >= the series length, got {padded_len}"
        )));
    }
    if !(sample_interval > 0.0) {
        return Err(Error::invalid("sample interval must be positive"));
    }
    let scale = sample_interval / window.normalizer;
    let mut buf: Vec<Complex64> = x
        .iter()
        .zip(&window.coefficients)
        .map(|(v, w)| v * *w * scale)
        .collect();
    buf.resize(padded_len, Complex64::new(0.0, 0.0));
    fft_in_place(&mut buf);
    fft_shift(&mut buf);
    Ok(buf)
}

/// Power spectral density `S(k) = |X(k)|²`.
pub fn power_spectral_density(spectrum: &[Complex64]) -> Vec<f64> {
    spectrum.iter().map(|x| x.norm_sqr()).collect()
}

/// Integral of the power spectral density over the Doppler band:
/// `P = Δf * Σ_k S(k)`.
pub fn received_power(psd: &[f64], doppler_step: f64) -> f64 {
    doppler_step * psd.iter().sum::<f64>()
}

/// First two spectral moments of one gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerMoments {
    /// Power-weighted mean Doppler frequency (Hz).
    pub mean_frequency: f64,
    /// Mean radial velocity, positive away from the site (m/s).
    pub mean_velocity: f64,
    /// Velocity spread around the mean (m/s).
    pub spread: f64,
}

/// Power-weighted Doppler moments of a PSD row.
///
/// The frequency moment is converted to velocity through `f = -2 v / λ`, so
/// `v = -(λ/2) f` and the spread scales by `λ/2`. Fails with
/// [`Error::MomentUndefined`] when the total power is zero.
pub fn doppler_moments(
    psd: &[f64],
    doppler_axis: &[f64],
    wavelength: f64,
) -> Result<DopplerMoments> {
    if psd.len() != doppler_axis.len() {
        return Err(Error::dims(format!(
            "psd has {} bins, axis has {}",
            psd.len(),
            doppler_axis.len()
        )));
    }
    let total: f64 = psd.iter().sum();
    if !(total > 0.0) {
        return Err(Error::MomentUndefined);
    }
    // Normalized weights keep the single-nonzero-bin case exact: s/s = 1,
    // so the variance term vanishes identically.
    let mean_frequency: f64 = psd
        .iter()
        .zip(doppler_axis)
        .map(|(s, f)| (s / total) * f)
        .sum();
    let variance: f64 = psd
        .iter()
        .zip(doppler_axis)
        .map(|(s, f)| (s / total) * (f - mean_frequency).powi(2))
        .sum();
    let half_wavelength = wavelength / 2.0;
    Ok(DopplerMoments {
        mean_frequency,
        mean_velocity: -half_wavelength * mean_frequency,
        spread: half_wavelength * variance.max(0.0).sqrt(),
    })
}
