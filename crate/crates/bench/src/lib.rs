//! Shared input builders for the chain benchmarks.

use bswrm_core::physics::{AntennaPattern, RadarSystemSpec};
use bswrm_core::sim::{
    generate_rain_field, synthesize_iq, ClutterScene, RainField, RainFieldConfig,
};
use bswrm_core::types::{BeamGeometry, FrameTiming, IqCube, SPEED_OF_LIGHT};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

pub fn frame() -> FrameTiming {
    FrameTiming::new(2e-6, 0.5e-6, 20e-6, 2.4775e-3, 128, 18.36e6, 23.04e6, 4.9e9).unwrap()
}

pub fn system() -> RadarSystemSpec {
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

pub fn beam() -> BeamGeometry {
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

pub fn rain_field() -> RainField {
    let cfg = RainFieldConfig {
        nx: 64,
        ny: 64,
        spacing: 100.0,
        correlation_length: 500.0,
        mean_dbz: 45.0,
        std_dbz: 0.0,
        advection: [0.0, 1.5],
        width_ms: 0.7,
        origin: [-3200.0, -3200.0],
        ke_law: None,
    };
    generate_rain_field(0, &cfg).unwrap()
}

pub fn rain_cube(n_gates: usize) -> IqCube {
    synthesize_iq(
        &rain_field(),
        &ClutterScene::default(),
        &system(),
        &frame(),
        &[beam()],
        n_gates,
        0.0,
        1,
    )
    .unwrap()
}

pub fn random_series(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect()
}
