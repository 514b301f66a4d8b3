//! Ground-clutter suppression: staggered sub-sampling, spectral
//! differential phase, circular variance, CV- and persistency-driven
//! clutter masks, and Gaussian interpolation of notched spectra.
//!
//! The discriminator is phase stability. Two temporally staggered
//! sub-sequences are drawn from every `N_p`-pulse window; the phase of the
//! Hermitian product of their spectra (the differential phase) is nearly
//! constant across window shifts for static clutter and decorrelates for
//! rain, faster as the stagger offset grows. The circular variance of the
//! differential phase over shifts therefore separates clutter (low CV)
//! from precipitation (high CV).

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::WindowSpec;
use crate::types::{half_band_bins, ClutterMask, MaskKind};

/// Staggered sub-sampling layout: window length `N_p`, stagger offset `o`,
/// and the shift schedule `s = 0, Δs, …, (N_D - 1) Δs` over the parent
/// series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SubsampleParams {
    /// Stagger offset `o` between the two sub-sequences (samples, even).
    pub offset: usize,
    /// Shift step `Δs` between consecutive windows (samples).
    pub shift_step: usize,
    /// Number of window positions `N_D`.
    pub n_shifts: usize,
    /// Window length `N_p` (multiple of 4, shorter than the parent).
    pub window_len: usize,
}

impl SubsampleParams {
    pub fn new(
        offset: usize,
        shift_step: usize,
        n_shifts: usize,
        window_len: usize,
    ) -> Result<Self> {
        let p = SubsampleParams {
            offset,
            shift_step,
            n_shifts,
            window_len,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.offset.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "offset must be even, got {}",
                self.offset
            )));
        }
        if self.shift_step == 0 {
            return Err(Error::invalid("shift_step must be >= 1"));
        }
        if self.n_shifts == 0 {
            return Err(Error::invalid("n_shifts must be >= 1"));
        }
        // Multiple of 4 keeps the zero-padded sub-sequence length even, so
        // the half-band spectrum has a symmetric bin layout.
        if !self.window_len.is_multiple_of(4) {
            return Err(Error::invalid(format!(
                "window_len must be a multiple of 4, got {}",
                self.window_len
            )));
        }
        if self.window_len < self.offset + 4 {
            return Err(Error::invalid(format!(
                "window must keep at least 2 staggered samples per sequence: \
                 window_len {} < offset {} + 4",
                self.window_len, self.offset
            )));
        }
        Ok(())
    }

    /// Errors unless every window fits the parent series:
    /// `(N_D - 1) Δs + N_p <= parent_len`.
    pub fn validate_for_parent(&self, parent_len: usize) -> Result<()> {
        self.validate()?;
        let needed = (self.n_shifts - 1) * self.shift_step + self.window_len;
        if needed > parent_len {
            return Err(Error::invalid(format!(
                "last window ends at sample {needed} but the parent series has \
                 {parent_len}"
            )));
        }
        Ok(())
    }

    /// Samples in each staggered sub-sequence: `(N_p - o) / 2`.
    pub fn staggered_len(&self) -> usize {
        (self.window_len - self.offset) / 2
    }

    /// Length after zero padding by `o/2`, restoring the Doppler step to
    /// `1/(N_p T_s)`: always `N_p / 2`.
    pub fn padded_len(&self) -> usize {
        self.window_len / 2
    }

    /// Slow-time lag between paired staggered samples, in parent samples.
    /// The sequences interleave one sample apart at `o = 0` and separate
    /// one further sample per two units of offset.
    pub fn lag_samples(&self) -> usize {
        self.offset + 1
    }

    /// Start of window `n` in the parent series.
    pub fn window_start(&self, shift_index: usize) -> usize {
        shift_index * self.shift_step
    }
}

/// Splits one `N_p`-sample window into its two staggered sub-sequences.
///
/// With 1-based in-window indexing, `x1(p) = x(2p - 1)` and
/// `x2(p) = x(2p + o)` for `p = 1 … (N_p - o)/2`: at `o = 0` these are the
/// odd- and even-indexed samples; a positive offset drops the trailing
/// `o/2` samples of `x1` and the leading `o/2` of `x2`, lagging `x2` by
/// `o + 1` samples. Both are effectively sampled at `2 T_s`.
pub fn subsample(
    window: &[Complex64],
    params: &SubsampleParams,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    params.validate()?;
    if window.len() != params.window_len {
        return Err(Error::dims(format!(
            "window has {} samples, params declare {}",
            window.len(),
            params.window_len
        )));
    }
    let n = params.staggered_len();
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    for p in 0..n {
        x1.push(window[2 * p]);
        x2.push(window[2 * p + params.offset + 1]);
    }
    Ok((x1, x2))
}

/// Magnitudes below this are treated as numerically zero when deciding
/// whether a differential-phase bin is defined.
const PHASE_MAGNITUDE_FLOOR: f64 = 10.0 * f64::EPSILON;

/// Differential phase per Doppler bin: `φ(k) = arg(X1(k) X2*(k))` on the
/// `±1/(4 T_s)` half band.
///
/// The window tapers the `(N_p - o)/2` real samples of each sub-sequence
/// (so it must match their length); zero padding by `o/2` then restores
/// the Doppler step to `1/(N_p T_s)` over `N_p/2` bins. Windowing the
/// padded length instead would cut the taper off where the data end and
/// leak stable clutter phase across the whole band. Bins where both
/// spectra are numerically zero have no phase and return `None`.
pub fn differential_phase(
    x1: &[Complex64],
    x2: &[Complex64],
    dp_window: &WindowSpec,
    params: &SubsampleParams,
    pulse_interval: f64,
) -> Result<Vec<Option<f64>>> {
    if x1.len() != x2.len() {
        return Err(Error::dims("staggered sequences must have equal length"));
    }
    if x1.len() != params.staggered_len() {
        return Err(Error::dims(format!(
            "staggered sequences have {} samples, params imply {}",
            x1.len(),
            params.staggered_len()
        )));
    }
    if dp_window.len() != params.staggered_len() {
        return Err(Error::dims(format!(
            "window length {} does not match the staggered length {}",
            dp_window.len(),
            params.staggered_len()
        )));
    }
    let padded = params.padded_len();
    let interval = 2.0 * pulse_interval;
    let s1 = crate::spectral::windowed_spectrum_padded(x1, dp_window, padded, interval)?;
    let s2 = crate::spectral::windowed_spectrum_padded(x2, dp_window, padded, interval)?;
    Ok(s1
        .iter()
        .zip(&s2)
        .map(|(a, b)| {
            let product = a * b.conj();
            let defined = product.norm_sqr() > 0.0
                && !(a.norm() < PHASE_MAGNITUDE_FLOOR && b.norm() < PHASE_MAGNITUDE_FLOOR);
            if defined {
                Some(product.arg())
            } else {
                None
            }
        })
        .collect())
}

/// Circular variance of the differential phase over shifts:
/// `σ(k) = 1 - |mean of e^(jφ) over defined shifts|² ∈ [0, 1]`.
///
/// Returns the per-bin variance and a flag marking bins where no shift had
/// a defined phase (those are set to 1, maximally unstable).
pub fn circular_variance(phases_per_shift: &[Vec<Option<f64>>]) -> Result<(Vec<f64>, Vec<bool>)> {
    let n_shifts = phases_per_shift.len();
    if n_shifts == 0 {
        return Err(Error::invalid("need at least one shift"));
    }
    let n_bins = phases_per_shift[0].len();
    if phases_per_shift.iter().any(|p| p.len() != n_bins) {
        return Err(Error::dims("phase maps must share their bin count"));
    }
    let mut sigma = Vec::with_capacity(n_bins);
    let mut undefined = Vec::with_capacity(n_bins);
    for bin in 0..n_bins {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut count = 0usize;
        for shift in phases_per_shift {
            if let Some(phi) = shift[bin] {
                sum += Complex64::from_polar(1.0, phi);
                count += 1;
            }
        }
        if count == 0 {
            sigma.push(1.0);
            undefined.push(true);
        } else {
            let mean = sum / count as f64;
            sigma.push((1.0 - mean.norm_sqr()).clamp(0.0, 1.0));
            undefined.push(false);
        }
    }
    Ok((sigma, undefined))
}

/// Circular variance of one gate's parent pulse series over all shifts of
/// the sub-sampling schedule. Returns `params.padded_len()` half-band bins.
pub fn gate_circular_variance(
    parent: &[Complex64],
    params: &SubsampleParams,
    dp_window: &WindowSpec,
    pulse_interval: f64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    params.validate_for_parent(parent.len())?;
    let mut phases = Vec::with_capacity(params.n_shifts);
    for n in 0..params.n_shifts {
        let start = params.window_start(n);
        let window = &parent[start..start + params.window_len];
        let (x1, x2) = subsample(window, params)?;
        phases.push(differential_phase(
            &x1,
            &x2,
            dp_window,
            params,
            pulse_interval,
        )?);
    }
    circular_variance(&phases)
}

/// Thresholds a circular-variance map into a CV-driven clutter mask over
/// the full `n_full_bins`-wide Doppler axis.
///
/// `sigma` has shape `[gate, half-band bin]` with `n_full_bins / 2`
/// columns. Bins with `σ <= threshold` are flagged as clutter (0); all
/// bins outside the `±1/(4 T_s)` half band are forced clutter-free (1).
pub fn cv_mask(
    sigma: &Array2<f64>,
    threshold: f64,
    n_full_bins: usize,
    offset: usize,
) -> Result<ClutterMask> {
    let (n_gates, n_half) = sigma.dim();
    if n_half * 2 != n_full_bins {
        return Err(Error::dims(format!(
            "CV map has {n_half} half-band bins; expected {} for {n_full_bins} full bins",
            n_full_bins / 2
        )));
    }
    if sigma.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
        return Err(Error::invalid("circular variance must lie in [0, 1]"));
    }
    let band = half_band_bins(n_full_bins);
    let mut mask = Array2::<u8>::ones((n_gates, n_full_bins));
    for g in 0..n_gates {
        for h in 0..n_half {
            if sigma[[g, h]] <= threshold {
                mask[[g, band.start + h]] = 0;
            }
        }
    }
    Ok(ClutterMask {
        mask,
        kind: MaskKind::CvDriven,
        offset,
        threshold,
    })
}

/// Occurrence counts of clutter flags over a calibration interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistencyMap {
    /// `[gate, doppler bin]` count of scenes flagged as clutter.
    pub counts: Array2<u32>,
    pub n_scenes: usize,
    /// Time span the scenes cover (s).
    pub window_seconds: f64,
    /// Sub-sampling offset shared by the accumulated masks.
    pub offset: usize,
}

/// Counts, per range-Doppler bin, how many CV-driven masks flagged it as
/// clutter. Masks must share dimensions and offset; the count is a plain
/// per-bin sum, so accumulation order cannot matter.
pub fn accumulate_persistency(
    masks: &[ClutterMask],
    window_seconds: f64,
) -> Result<PersistencyMap> {
    if masks.is_empty() {
        return Err(Error::invalid("need at least one mask"));
    }
    let dim = masks[0].mask.dim();
    let offset = masks[0].offset;
    let mut counts = Array2::<u32>::zeros(dim);
    for m in masks {
        if m.mask.dim() != dim {
            return Err(Error::dims("masks must share dimensions"));
        }
        if m.offset != offset {
            return Err(Error::invalid("masks must share the sub-sampling offset"));
        }
        for (c, &v) in counts.iter_mut().zip(m.mask.iter()) {
            if v == 0 {
                *c += 1;
            }
        }
    }
    Ok(PersistencyMap {
        counts,
        n_scenes: masks.len(),
        window_seconds,
        offset,
    })
}

/// Thresholds a persistency map into a refined clutter mask: bins flagged
/// in more than `threshold` scenes are clutter. The outer-band rule is
/// re-applied.
pub fn persistency_mask(map: &PersistencyMap, threshold: f64) -> Result<ClutterMask> {
    if !(0.0..=map.n_scenes as f64).contains(&threshold) {
        return Err(Error::invalid(format!(
            "threshold {threshold} outside [0, {}]",
            map.n_scenes
        )));
    }
    let (n_gates, n_bins) = map.counts.dim();
    let band = half_band_bins(n_bins);
    let mut mask = Array2::<u8>::ones((n_gates, n_bins));
    for g in 0..n_gates {
        for k in band.clone() {
            if f64::from(map.counts[[g, k]]) > threshold {
                mask[[g, k]] = 0;
            }
        }
    }
    Ok(ClutterMask {
        mask,
        kind: MaskKind::PersistencyDriven,
        offset: map.offset,
        threshold,
    })
}

/// Empirical `q`-quantile of the persistency counts (nearest rank on the
/// sorted values), for threshold selection from a clutter-only calibration
/// run.
pub fn persistency_quantile(map: &PersistencyMap, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("quantile must lie in [0, 1]"));
    }
    let mut values: Vec<u32> = map.counts.iter().copied().collect();
    if values.is_empty() {
        return Err(Error::invalid("persistency map is empty"));
    }
    values.sort_unstable();
    let idx = ((values.len() - 1) as f64 * q).round() as usize;
    Ok(f64::from(values[idx]))
}

/// Element-wise application of a clutter mask to a complex spectrum:
/// masked bins become exactly zero, the rest pass through bit-identical.
pub fn apply_mask(spectrum: &Array2<Complex64>, mask: &ClutterMask) -> Result<Array2<Complex64>> {
    if spectrum.dim() != mask.mask.dim() {
        return Err(Error::dims(format!(
            "spectrum is {:?}, mask is {:?}",
            spectrum.dim(),
            mask.mask.dim()
        )));
    }
    let mut out = spectrum.clone();
    for (v, &m) in out.iter_mut().zip(mask.mask.iter()) {
        if m == 0 {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

/// Row variant of [`apply_mask`] for per-gate PSD rows.
pub fn apply_mask_row(psd: &[f64], mask_row: &[u8]) -> Result<Vec<f64>> {
    if psd.len() != mask_row.len() {
        return Err(Error::dims("row lengths differ"));
    }
    Ok(psd
        .iter()
        .zip(mask_row)
        .map(|(&s, &m)| if m == 0 { 0.0 } else { s })
        .collect())
}

/// Noise floor of a PSD row: median of its lowest decile. Robust to
/// narrow weather signals, which occupy few bins.
pub fn noise_floor(psd: &[f64]) -> f64 {
    if psd.is_empty() {
        return 0.0;
    }
    let mut sorted = psd.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let decile = (sorted.len().div_ceil(10)).max(1);
    let lowest = &sorted[..decile];
    let mid = lowest.len() / 2;
    if lowest.len() % 2 == 1 {
        lowest[mid]
    } else {
        0.5 * (lowest[mid - 1] + lowest[mid])
    }
}

/// Gaussian spectral-interpolation settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InterpConfig {
    /// Minimum usable (unmasked, above-floor) bins for a fit.
    pub min_fit_bins: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the relative parameter change.
    pub rel_tolerance: f64,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig {
            min_fit_bins: 5,
            max_iterations: 50,
            rel_tolerance: 1e-8,
        }
    }
}

/// Fitted Gaussian line `A exp(-(k - μ)² / (2 Σ²))` over bin indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// RMS residual on the bins the fit was computed from.
    pub residual: f64,
}

/// Outcome of one gate's interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterpOutcome {
    /// Nothing was masked; the row passed through untouched.
    Untouched,
    /// Masked bins were replaced by the fitted Gaussian.
    Fitted(GaussianFit),
    /// Too few usable bins (or an unusable fit); masked bins were filled
    /// with the noise floor and the gate must be flagged.
    Fallback,
}

/// Replaces clutter-notched PSD bins with a Gaussian fitted to the
/// surviving bins; unmasked bins are returned unchanged.
///
/// Fit bins are the unmasked ones strictly above `floor`. With fewer than
/// `cfg.min_fit_bins` of them the masked bins are filled with `floor`
/// instead and the outcome reports the fallback.
pub fn gaussian_interpolate(
    psd: &[f64],
    mask_row: &[u8],
    floor: f64,
    cfg: &InterpConfig,
) -> Result<(Vec<f64>, InterpOutcome)> {
    if psd.len() != mask_row.len() {
        return Err(Error::dims("row lengths differ"));
    }
    if psd.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::invalid("PSD must be non-negative and finite"));
    }
    if !mask_row.contains(&0) {
        return Ok((psd.to_vec(), InterpOutcome::Untouched));
    }
    let fit_bins: Vec<(f64, f64)> = psd
        .iter()
        .enumerate()
        .zip(mask_row)
        .filter(|((_, &s), &m)| m == 1 && s > floor)
        .map(|((k, &s), _)| (k as f64, s))
        .collect();
    let fallback = |psd: &[f64]| -> Vec<f64> {
        psd.iter()
            .zip(mask_row)
            .map(|(&s, &m)| if m == 0 { floor } else { s })
            .collect()
    };
    if fit_bins.len() < cfg.min_fit_bins {
        return Ok((fallback(psd), InterpOutcome::Fallback));
    }
    match fit_gaussian(&fit_bins, cfg) {
        Some(fit) => {
            let out = psd
                .iter()
                .enumerate()
                .zip(mask_row)
                .map(|((k, &s), &m)| {
                    if m == 0 {
                        let d = k as f64 - fit.center;
                        fit.amplitude * (-d * d / (2.0 * fit.width * fit.width)).exp()
                    } else {
                        s
                    }
                })
                .collect();
            Ok((out, InterpOutcome::Fitted(fit)))
        }
        None => Ok((fallback(psd), InterpOutcome::Fallback)),
    }
}

/// Levenberg–Marquardt fit of `(A, μ, Σ)` on linear power, moment-based
/// initialization. Returns `None` when the data cannot support a positive
/// amplitude and width.
fn fit_gaussian(bins: &[(f64, f64)], cfg: &InterpConfig) -> Option<GaussianFit> {
    let total: f64 = bins.iter().map(|&(_, s)| s).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut amp = bins.iter().map(|&(_, s)| s).fold(f64::MIN, f64::max);
    let mut mu = bins.iter().map(|&(k, s)| s / total * k).sum::<f64>();
    let var = bins
        .iter()
        .map(|&(k, s)| s / total * (k - mu).powi(2))
        .sum::<f64>();
    let mut sigma = var.sqrt().max(0.5);

    let model = |a: f64, m: f64, s: f64, k: f64| -> f64 {
        let d = k - m;
        a * (-d * d / (2.0 * s * s)).exp()
    };
    let cost = |a: f64, m: f64, s: f64| -> f64 {
        bins.iter()
            .map(|&(k, y)| (model(a, m, s, k) - y).powi(2))
            .sum()
    };

    let mut lambda = 1e-3;
    let mut current = cost(amp, mu, sigma);
    for _ in 0..cfg.max_iterations {
        // Normal equations J^T J and J^T r for the 3-parameter model.
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for &(k, y) in bins {
            let d = k - mu;
            let e = (-d * d / (2.0 * sigma * sigma)).exp();
            let f = amp * e;
            let j = [
                e,
                f * d / (sigma * sigma),
                f * d * d / (sigma * sigma * sigma),
            ];
            let r = f - y;
            for i in 0..3 {
                jtr[i] += j[i] * r;
                for l in 0..3 {
                    jtj[i][l] += j[i] * j[l];
                }
            }
        }
        // Damped step: (J^T J + lambda diag(J^T J)) delta = -J^T r.
        let mut a = jtj;
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += lambda * jtj[i][i].max(1e-300);
        }
        let delta = match solve3(&a, &[-jtr[0], -jtr[1], -jtr[2]]) {
            Some(d) => d,
            None => return finish(amp, mu, sigma, bins, current),
        };
        let (na, nm, ns) = (amp + delta[0], mu + delta[1], sigma + delta[2]);
        let ns = ns.abs().max(1e-3);
        let trial = cost(na, nm, ns);
        if trial <= current {
            let rel_change = (delta[0].abs() / amp.abs().max(1e-300))
                .max(delta[1].abs() / mu.abs().max(1.0))
                .max(delta[2].abs() / sigma.abs().max(1e-300));
            amp = na;
            mu = nm;
            sigma = ns;
            current = trial;
            lambda = (lambda * 0.1).max(1e-12);
            if rel_change < cfg.rel_tolerance {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    finish(amp, mu, sigma, bins, current)
}

fn finish(amp: f64, mu: f64, sigma: f64, bins: &[(f64, f64)], cost: f64) -> Option<GaussianFit> {
    if !(amp > 0.0) || !(sigma > 0.0) || !amp.is_finite() || !mu.is_finite() || !sigma.is_finite() {
        return None;
    }
    Some(GaussianFit {
        amplitude: amp,
        center: mu,
        width: sigma,
        residual: (cost / bins.len() as f64).sqrt(),
    })
}

/// Solves a 3×3 linear system by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let factor = m[row][col] / m[col][col];
                let pivot_row = m[col];
                for (v, p) in m[row][col..4].iter_mut().zip(&pivot_row[col..4]) {
                    *v -= factor * p;
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}
