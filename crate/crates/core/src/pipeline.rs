//! Per-sweep orchestration: spectra → clutter masks → filtering →
//! Gaussian interpolation → received power → reflectivity → moments →
//! rain rate, producing a [`ProductGrid`] per I/Q cube.

use ndarray::Array2;
use num_complex::Complex64;

use crate::clutter::{
    apply_mask_row, cv_mask, gate_circular_variance, gaussian_interpolate, noise_floor,
    InterpConfig, InterpOutcome, SubsampleParams,
};
use crate::dsd::{z_to_r, ZrCoefficients};
use crate::error::{Error, Result};
use crate::physics::{
    invert_radar_equation, mdz, radar_constant, two_way_loss_profile, PowerReference,
    RadarSystemSpec,
};
use crate::spectral::{doppler_moments, power_spectral_density, windowed_spectrum, WindowSpec};
use crate::types::{
    doppler_axis_for_interval, ClutterMask, GateValidity, IqCube, ProductCell, ProductGrid,
    RangeDopplerSpectrum, WindowKind,
};

/// Parameters of the full processing chain.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChainConfig {
    pub window: WindowKind,
    pub subsample: SubsampleParams,
    /// Circular-variance threshold for the in-line CV mask.
    pub cv_threshold: f64,
    pub interp: InterpConfig,
    pub zr: ZrCoefficients,
    /// Detection threshold: gates with estimated reflectivity below the
    /// MDZ curve at this SNR are flagged invalid.
    pub snr_min: f64,
    /// The acquiring system; used for the noise level and, when a beam
    /// carries no calibrated constant, the radar constant (with
    /// `antenna_factor`). Received powers are taken after range
    /// compression, so the constant includes the B·τ gain.
    pub system: RadarSystemSpec,
    pub antenna_factor: f64,
}

impl ChainConfig {
    /// Conventional defaults: Blackman window, 64-pulse windows over a
    /// 128-pulse series, offset 20, shift step 5, 13 shifts, CV threshold
    /// 0.1, tuned Z–R coefficients, SNR_min 1.
    pub fn with_system(system: RadarSystemSpec) -> Result<Self> {
        Ok(ChainConfig {
            window: WindowKind::Blackman,
            subsample: SubsampleParams::new(20, 5, 13, 64)?,
            cv_threshold: 0.1,
            interp: InterpConfig::default(),
            zr: ZrCoefficients::bs_tuned(),
            snr_min: 1.0,
            system,
            antenna_factor: 1.0,
        })
    }

    fn validate_for_cube(&self, cube: &IqCube) -> Result<()> {
        self.system.validate()?;
        self.subsample.validate_for_parent(cube.n_pulses())?;
        if !(self.cv_threshold >= 0.0 && self.cv_threshold <= 1.0) {
            return Err(Error::invalid("cv_threshold must lie in [0, 1]"));
        }
        if !(self.snr_min > 0.0) {
            return Err(Error::invalid("snr_min must be positive"));
        }
        if !(self.antenna_factor > 0.0) {
            return Err(Error::invalid("antenna_factor must be positive"));
        }
        Ok(())
    }
}

/// Full-band Doppler spectrum of one beam for one window position.
pub fn beam_spectrum(
    cube: &IqCube,
    beam: usize,
    shift_index: usize,
    params: &SubsampleParams,
    window: &WindowSpec,
) -> Result<RangeDopplerSpectrum> {
    if beam >= cube.n_beams() {
        return Err(Error::invalid(format!("beam {beam} out of range")));
    }
    params.validate_for_parent(cube.n_pulses())?;
    if shift_index >= params.n_shifts {
        return Err(Error::invalid(format!(
            "shift {shift_index} out of range (n_shifts = {})",
            params.n_shifts
        )));
    }
    if window.len() != params.window_len {
        return Err(Error::dims("window length must equal the chain window_len"));
    }
    let n_gates = cube.n_gates();
    let n_bins = params.window_len;
    let start = params.window_start(shift_index);
    let mut amplitude = Array2::<Complex64>::zeros((n_gates, n_bins));
    let mut psd = Array2::<f64>::zeros((n_gates, n_bins));
    for m in 0..n_gates {
        let series = cube.pulse_series(beam, m);
        let x = windowed_spectrum(
            &series[start..start + n_bins],
            window,
            cube.frame.pulse_interval,
        )?;
        for (k, v) in x.iter().enumerate() {
            amplitude[[m, k]] = *v;
            psd[[m, k]] = v.norm_sqr();
        }
    }
    Ok(RangeDopplerSpectrum {
        amplitude,
        psd,
        doppler_step: 1.0 / (n_bins as f64 * cube.frame.pulse_interval),
        n_pulses_used: n_bins,
        window: window.kind,
        beam_id: cube.beams[beam].beam_id,
    })
}

/// CV-driven clutter masks for every beam of a cube.
pub fn cv_masks_for_cube(cube: &IqCube, config: &ChainConfig) -> Result<Vec<ClutterMask>> {
    config.validate_for_cube(cube)?;
    let params = &config.subsample;
    let dp_window = WindowSpec::new(config.window, params.staggered_len())?;
    let mut masks = Vec::with_capacity(cube.n_beams());
    for beam in 0..cube.n_beams() {
        let mut sigma = Array2::<f64>::zeros((cube.n_gates(), params.padded_len()));
        for m in 0..cube.n_gates() {
            let series = cube.pulse_series(beam, m);
            let (cv, _) =
                gate_circular_variance(&series, params, &dp_window, cube.frame.pulse_interval)?;
            for (h, v) in cv.into_iter().enumerate() {
                sigma[[m, h]] = v;
            }
        }
        masks.push(cv_mask(
            &sigma,
            config.cv_threshold,
            params.window_len,
            params.offset,
        )?);
    }
    Ok(masks)
}

/// Runs the chain on one cube.
///
/// `masks`, when supplied (normally persistency-driven, from a no-rain
/// calibration interval), take precedence over in-line CV masks.
/// `attenuation` is an optional per-`[beam, gate]` specific-attenuation
/// map (m⁻¹) used to undo the two-way path loss; without it `L² = 1`.
pub fn process_sweep(
    cube: &IqCube,
    config: &ChainConfig,
    masks: Option<&[ClutterMask]>,
    attenuation: Option<&Array2<f64>>,
) -> Result<ProductGrid> {
    config.validate_for_cube(cube)?;
    let params = &config.subsample;
    let n_beams = cube.n_beams();
    let n_gates = cube.n_gates();
    let n_bins = params.window_len;

    if let Some(masks) = masks {
        if masks.len() != n_beams {
            return Err(Error::dims(format!(
                "{} masks supplied for {n_beams} beams",
                masks.len()
            )));
        }
        for m in masks {
            if m.mask.dim() != (n_gates, n_bins) {
                return Err(Error::dims(format!(
                    "mask is {:?}, expected ({n_gates}, {n_bins})",
                    m.mask.dim()
                )));
            }
        }
    }
    if let Some(att) = attenuation {
        if att.dim() != (n_beams, n_gates) {
            return Err(Error::dims(format!(
                "attenuation map is {:?}, expected ({n_beams}, {n_gates})",
                att.dim()
            )));
        }
    }

    let full_window = WindowSpec::new(config.window, n_bins)?;
    let doppler_step = 1.0 / (n_bins as f64 * cube.frame.pulse_interval);
    let axis = doppler_axis_for_interval(cube.frame.pulse_interval, n_bins)?;
    let wavelength = cube.frame.wavelength();
    let noise_power = config.system.noise_power() * config.system.noise_figure;
    let composed_constant = radar_constant(
        &config.system,
        config.antenna_factor,
        PowerReference::AfterCompression,
    )?;
    let blind_range = cube.frame.blind_range();
    let inline_masks = if masks.is_none() {
        Some(cv_masks_for_cube(cube, config)?)
    } else {
        None
    };

    let mut cells = Array2::from_elem(
        (n_beams, n_gates),
        ProductCell::invalid(GateValidity::BlindZone),
    );

    for beam in 0..n_beams {
        let constant = cube.beams[beam].radar_constant.unwrap_or(composed_constant);
        let mask = match masks {
            Some(m) => &m[beam],
            None => &inline_masks.as_ref().unwrap()[beam],
        };
        let loss = match attenuation {
            Some(att) => {
                let profile: Vec<f64> = (0..n_gates).map(|m| att[[beam, m]]).collect();
                Some(two_way_loss_profile(&profile, cube.range_step)?)
            }
            None => None,
        };
        for gate in 0..n_gates {
            let range = cube.gate_range(gate);
            if range < blind_range {
                cells[[beam, gate]] = ProductCell::invalid(GateValidity::BlindZone);
                continue;
            }
            let series = cube.pulse_series(beam, gate);
            // Clutter-filtered Welch average over the shifted windows.
            let mask_row: Vec<u8> = (0..n_bins).map(|k| mask.mask[[gate, k]]).collect();
            let mut mean_psd = vec![0.0f64; n_bins];
            for n in 0..params.n_shifts {
                let start = params.window_start(n);
                let x = windowed_spectrum(
                    &series[start..start + n_bins],
                    &full_window,
                    cube.frame.pulse_interval,
                )?;
                let filtered: Vec<Complex64> = x
                    .iter()
                    .zip(&mask_row)
                    .map(|(v, &m)| if m == 0 { Complex64::new(0.0, 0.0) } else { *v })
                    .collect();
                for (acc, s) in mean_psd.iter_mut().zip(power_spectral_density(&filtered)) {
                    *acc += s;
                }
            }
            let shifts = params.n_shifts as f64;
            mean_psd.iter_mut().for_each(|v| *v /= shifts);
            let raw_psd = apply_mask_row(&mean_psd, &mask_row)?;

            // Interpolate the notched bins from a Gaussian fitted to the
            // survivors.
            let floor = noise_floor(&raw_psd);
            let (restored, outcome) =
                gaussian_interpolate(&raw_psd, &mask_row, floor, &config.interp)?;

            // Received power (the T_s/W periodogram yields T_s times the
            // time-domain power; divide it back out to get watts).
            let p_hat = crate::spectral::received_power(&restored, doppler_step)
                / cube.frame.pulse_interval;
            let p_signal = p_hat - noise_power;
            let l2 = loss.as_ref().map(|l| l[gate]).unwrap_or(1.0);
            if p_signal <= 0.0 {
                cells[[beam, gate]] = ProductCell::invalid(GateValidity::BelowMdz);
                continue;
            }
            let z = invert_radar_equation(p_signal, range, constant, l2)?;
            let z_dbz = 10.0 * z.log10();
            let mdz_dbz = mdz(&config.system, constant, range, config.snr_min)?;
            if z_dbz < mdz_dbz {
                cells[[beam, gate]] = ProductCell::invalid(GateValidity::BelowMdz);
                continue;
            }
            // Moments on the noise-subtracted spectrum.
            let signal_psd: Vec<f64> = restored.iter().map(|&s| (s - floor).max(0.0)).collect();
            let moments = match doppler_moments(&signal_psd, &axis, wavelength) {
                Ok(m) => m,
                Err(Error::MomentUndefined) => {
                    cells[[beam, gate]] = ProductCell::invalid(GateValidity::BelowMdz);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let rain_rate = z_to_r(z, &config.zr)?;
            let validity = match outcome {
                InterpOutcome::Fallback => GateValidity::InterpolationFallback,
                _ => GateValidity::Valid,
            };
            cells[[beam, gate]] = ProductCell {
                reflectivity: z,
                mean_velocity: moments.mean_velocity,
                doppler_spread: moments.spread,
                rain_rate,
                snr_db: 10.0 * (p_signal / noise_power).log10(),
                validity,
            };
        }
    }
    Ok(ProductGrid {
        cells,
        beams: cube.beams.clone(),
        range_step: cube.range_step,
        timestamp: cube.timestamp,
    })
}

/// Median rain rate with dispersion over the valid gates of the selected
/// beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianRainRate {
    pub timestamp: f64,
    pub median_mmh: f64,
    pub std_mmh: f64,
    pub n_valid: usize,
}

/// `None` when the selection contains no valid gate (an absent value, not
/// zero).
pub fn median_rainrate_profile(grid: &ProductGrid, beams: &[usize]) -> Option<MedianRainRate> {
    let mut rates: Vec<f64> = Vec::new();
    for &b in beams {
        if b >= grid.n_beams() {
            continue;
        }
        for gate in 0..grid.n_gates() {
            let cell = grid.cells[[b, gate]];
            if cell.validity.is_valid() && cell.rain_rate.is_finite() {
                rates.push(cell.rain_rate);
            }
        }
    }
    if rates.is_empty() {
        return None;
    }
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = rates.len() / 2;
    let median = if rates.len() % 2 == 1 {
        rates[mid]
    } else {
        0.5 * (rates[mid - 1] + rates[mid])
    };
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let std = (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rates.len() as f64).sqrt();
    Some(MedianRainRate {
        timestamp: grid.timestamp,
        median_mmh: median,
        std_mmh: std,
        n_valid: rates.len(),
    })
}

/// Pearson correlation coefficient; `None` for degenerate inputs.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Two-site comparison report.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SiteComparison {
    /// Sweeps aligned in time between the two series.
    pub n_aligned: usize,
    /// Pearson correlation of the median-rain-rate time series.
    pub median_rain_correlation: Option<f64>,
    /// Per-cell reflectivity difference statistics (site A minus B, dB).
    pub dz_mean_db: Option<f64>,
    pub dz_std_db: Option<f64>,
    pub n_paired_cells: usize,
    /// Fraction of near-collinear paired cells whose mean-velocity signs
    /// agree with the viewing geometry.
    pub velocity_sign_consistency: Option<f64>,
}

/// Compares two product time series over a common-grid pairing.
///
/// Sweeps are aligned by nearest timestamp within `max_lag` seconds
/// (unesolvable sweeps are dropped). Median rain rates are computed over
/// the gates each site contributes to the pairing.
pub fn compare_sites(
    series_a: &[ProductGrid],
    series_b: &[ProductGrid],
    pairing: &[crate::sim::PairedCell],
    max_lag: f64,
) -> Result<SiteComparison> {
    if pairing.is_empty() {
        return Err(Error::invalid("pairing is empty"));
    }
    // Median rain rates are taken over the shared region only: the gates
    // each site contributes to the pairing.
    let cells_a: Vec<(usize, usize)> = sorted_unique_cells(pairing.iter().map(|p| p.site_a));
    let cells_b: Vec<(usize, usize)> = sorted_unique_cells(pairing.iter().map(|p| p.site_b));

    let mut medians_a = Vec::new();
    let mut medians_b = Vec::new();
    let mut dz = Vec::new();
    let mut sign_total = 0usize;
    let mut sign_ok = 0usize;
    let mut n_aligned = 0usize;

    for grid_a in series_a {
        // Nearest-in-time partner sweep.
        let Some(grid_b) = series_b.iter().min_by(|x, y| {
            (x.timestamp - grid_a.timestamp)
                .abs()
                .partial_cmp(&(y.timestamp - grid_a.timestamp).abs())
                .unwrap()
        }) else {
            continue;
        };
        if (grid_b.timestamp - grid_a.timestamp).abs() > max_lag {
            continue;
        }
        n_aligned += 1;
        if let (Some(ma), Some(mb)) = (
            median_rain_over_cells(grid_a, &cells_a),
            median_rain_over_cells(grid_b, &cells_b),
        ) {
            medians_a.push(ma);
            medians_b.push(mb);
        }
        for pair in pairing {
            let ca = grid_a.cells[[pair.site_a.0, pair.site_a.1]];
            let cb = grid_b.cells[[pair.site_b.0, pair.site_b.1]];
            if !(ca.validity.is_valid() && cb.validity.is_valid()) {
                continue;
            }
            dz.push(ca.reflectivity_dbz() - cb.reflectivity_dbz());
            let dot = pair.los_a.0 * pair.los_b.0 + pair.los_a.1 * pair.los_b.1;
            if dot.abs() > 0.7 && ca.mean_velocity.abs() > 0.2 && cb.mean_velocity.abs() > 0.2 {
                sign_total += 1;
                let expected = ca.mean_velocity.signum() * dot.signum();
                if expected == cb.mean_velocity.signum() {
                    sign_ok += 1;
                }
            }
        }
    }

    let dz_stats = if dz.is_empty() {
        (None, None)
    } else {
        let mean = dz.iter().sum::<f64>() / dz.len() as f64;
        let std = (dz.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dz.len() as f64).sqrt();
        (Some(mean), Some(std))
    };
    Ok(SiteComparison {
        n_aligned,
        median_rain_correlation: pearson_correlation(&medians_a, &medians_b),
        dz_mean_db: dz_stats.0,
        dz_std_db: dz_stats.1,
        n_paired_cells: dz.len(),
        velocity_sign_consistency: if sign_total > 0 {
            Some(sign_ok as f64 / sign_total as f64)
        } else {
            None
        },
    })
}

fn sorted_unique_cells(items: impl Iterator<Item = (usize, usize)>) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = items.collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn median_rain_over_cells(grid: &ProductGrid, cells: &[(usize, usize)]) -> Option<f64> {
    let mut rates: Vec<f64> = cells
        .iter()
        .filter(|&&(b, g)| b < grid.n_beams() && g < grid.n_gates())
        .map(|&(b, g)| grid.cells[[b, g]])
        .filter(|c| c.validity.is_valid() && c.rain_rate.is_finite())
        .map(|c| c.rain_rate)
        .collect();
    if rates.is_empty() {
        return None;
    }
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = rates.len() / 2;
    Some(if rates.len() % 2 == 1 {
        rates[mid]
    } else {
        0.5 * (rates[mid - 1] + rates[mid])
    })
}
