#![allow(dead_code)] // shared across test targets that each use a subset

//! Shared oracles and scene builders for the integration suites. The
//! spectral oracle evaluates the periodogram definition term by term,
//! independently of the FFT path under test.

use bswrm_core::physics::{AntennaPattern, RadarSystemSpec};
use bswrm_core::sim::{generate_rain_field, KeLaw, RainField, RainFieldConfig};
use bswrm_core::spectral::WindowSpec;
use bswrm_core::types::{BeamGeometry, FrameTiming, SPEED_OF_LIGHT};
use num_complex::Complex64;

/// Direct O(N²) evaluation of the windowed Doppler spectrum:
/// `X(k) = (T/W) Σ_p x(p) w(p) exp(-j 2π k Δf p T)`, `k = -N/2 … N/2-1`.
pub fn direct_windowed_spectrum(
    x: &[Complex64],
    window: &WindowSpec,
    sample_interval: f64,
) -> Vec<Complex64> {
    let n = x.len() as i64;
    let scale = sample_interval / window.normalizer;
    (-n / 2..n / 2)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, (xv, wv)) in x.iter().zip(&window.coefficients).enumerate() {
                let phase = -2.0 * std::f64::consts::PI * k as f64 * p as f64 / n as f64;
                acc += xv * *wv * Complex64::from_polar(1.0, phase);
            }
            acc * scale
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Base-station-like frame: 2 us pulse, 0.5 us guard, 20 us receive
/// window, 2.5 ms pulse interval, 128 pulses per beam, 4.9 GHz.
pub fn bs_frame() -> FrameTiming {
    FrameTiming::new(2e-6, 0.5e-6, 20e-6, 2.4775e-3, 128, 18.36e6, 23.04e6, 4.9e9).unwrap()
}

pub fn bs_system() -> RadarSystemSpec {
    RadarSystemSpec {
        carrier_freq: 4.9e9,
        peak_power: 200.0,
        noise_figure: 10f64.powf(0.4),
        pulse_len: 2e-6,
        bandwidth: 18.36e6,
        max_gain: 10f64.powf(2.63),
        hpbw_az: 6f64.to_radians(),
        hpbw_el: 3f64.to_radians(),
        dielectric_factor: 0.93,
        range_step: SPEED_OF_LIGHT / (2.0 * 23.04e6),
        pattern: AntennaPattern::ParametricGaussian,
    }
}

pub fn north_beam() -> BeamGeometry {
    BeamGeometry {
        beam_id: 0,
        azimuth: 0.0,
        elevation: 0.0,
        hpbw_az: 6f64.to_radians(),
        hpbw_el: 3f64.to_radians(),
        max_gain: 10f64.powf(2.63),
        site_position: [0.0, 0.0, 30.0],
        radar_constant: None,
    }
}

/// Uniform rain field centred on the origin, 3.2 km half-extent.
pub fn uniform_field(mean_dbz: f64, advection: [f64; 2], width_ms: f64) -> RainField {
    let cfg = RainFieldConfig {
        nx: 64,
        ny: 64,
        spacing: 100.0,
        correlation_length: 500.0,
        mean_dbz,
        std_dbz: 0.0,
        advection,
        width_ms,
        origin: [-3200.0, -3200.0],
        ke_law: None::<KeLaw>,
    };
    generate_rain_field(0, &cfg).unwrap()
}
