//! Domain types, axis arithmetic, and frame-timing geometry shared by the
//! whole chain.
//!
//! Conventions used throughout the workspace:
//! * local east-north-up Cartesian frame per site, metres;
//! * azimuth measured clockwise from north, elevation above the horizon,
//!   both in radians;
//! * gate `m` is centred at range `m * range_step` from the site, so the
//!   leading gates fall inside the transmit/guard blind zone;
//! * Doppler index `k` runs `-n/2 ..= n/2 - 1` with DC at `k = 0`
//!   (negative frequencies first).

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Reference receiver temperature for thermal noise (K).
pub const REFERENCE_TEMPERATURE: f64 = 290.0;

/// Timing of one radar pulse repetition interval inside the communication
/// frame: transmit, guard (Tx/Rx switching), receive, and idle intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTiming {
    /// Transmit interval (s).
    pub tx_time: f64,
    /// Guard/switching interval between Tx and Rx (s).
    pub guard_time: f64,
    /// Receive interval available for echoes (s).
    pub rx_time: f64,
    /// Idle interval returned to communication service (s).
    pub idle_time: f64,
    /// Slow-time sampling interval; always the exact sum of the four
    /// intervals above (s).
    pub pulse_interval: f64,
    /// Pulses transmitted per beam before the sweep advances.
    pub pulses_per_beam: usize,
    /// Occupied signal bandwidth (Hz).
    pub bandwidth: f64,
    /// Receiver ADC sampling bandwidth (Hz); at least `bandwidth`.
    pub adc_bandwidth: f64,
    /// Carrier frequency (Hz).
    pub carrier_freq: f64,
}

impl FrameTiming {
    /// Builds a frame timing, deriving `pulse_interval` as the exact sum of
    /// the four intervals.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tx_time: f64,
        guard_time: f64,
        rx_time: f64,
        idle_time: f64,
        pulses_per_beam: usize,
        bandwidth: f64,
        adc_bandwidth: f64,
        carrier_freq: f64,
    ) -> Result<Self> {
        let f = FrameTiming {
            tx_time,
            guard_time,
            rx_time,
            idle_time,
            pulse_interval: tx_time + guard_time + rx_time + idle_time,
            pulses_per_beam,
            bandwidth,
            adc_bandwidth,
            carrier_freq,
        };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tx_time", self.tx_time),
            ("guard_time", self.guard_time),
            ("rx_time", self.rx_time),
            ("idle_time", self.idle_time),
            ("bandwidth", self.bandwidth),
            ("adc_bandwidth", self.adc_bandwidth),
            ("carrier_freq", self.carrier_freq),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        let sum = self.tx_time + self.guard_time + self.rx_time + self.idle_time;
        // Exact to 1 ulp of the sum.
        if (self.pulse_interval - sum).abs() > f64::EPSILON * sum {
            return Err(Error::invalid(format!(
                "pulse_interval {} does not equal the interval sum {}",
                self.pulse_interval, sum
            )));
        }
        if self.bandwidth > self.adc_bandwidth {
            return Err(Error::invalid(format!(
                "bandwidth {} exceeds ADC bandwidth {}",
                self.bandwidth, self.adc_bandwidth
            )));
        }
        if self.tx_time * self.bandwidth < 1.0 {
            return Err(Error::invalid(format!(
                "time-bandwidth product {} < 1",
                self.tx_time * self.bandwidth
            )));
        }
        if self.pulses_per_beam == 0 {
            return Err(Error::invalid("pulses_per_beam must be positive"));
        }
        Ok(())
    }

    /// Carrier wavelength (m).
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Range-gate spacing set by the ADC sampling rate (m).
    pub fn range_step(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.adc_bandwidth)
    }

    /// Closest observable range: echoes arriving while the transmitter or
    /// guard interval is active are lost (m).
    pub fn blind_range(&self) -> f64 {
        SPEED_OF_LIGHT * (self.tx_time + self.guard_time) / 2.0
    }

    /// Maximum unambiguous range covered by the receive interval (m).
    pub fn max_range(&self) -> f64 {
        SPEED_OF_LIGHT * self.rx_time / 2.0
    }

    /// Duration of one full sweep over `n_beams` beams (s).
    pub fn sweep_duration(&self, n_beams: usize) -> f64 {
        n_beams as f64 * self.pulses_per_beam as f64 * self.pulse_interval
    }
}

/// Blind zone and maximum unambiguous range for a frame, as a pair
/// `(r_min, r_max)` in metres.
pub fn blind_zone_and_max_range(frame: &FrameTiming) -> (f64, f64) {
    (frame.blind_range(), frame.max_range())
}

/// Doppler frequency axis for an `n_pulses`-point spectrum: `k * Δf` for
/// `k = -n/2 ..= n/2 - 1` with `Δf = 1 / (n * T_s)`.
///
/// `n_pulses` must be even and at least 2.
pub fn doppler_axis(frame: &FrameTiming, n_pulses: usize) -> Result<Vec<f64>> {
    doppler_axis_for_interval(frame.pulse_interval, n_pulses)
}

/// Same as [`doppler_axis`] but for an arbitrary slow-time sampling
/// interval (used by staggered sub-sequences sampled at `2 T_s`).
pub fn doppler_axis_for_interval(sample_interval: f64, n_pulses: usize) -> Result<Vec<f64>> {
    if n_pulses < 2 || !n_pulses.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "n_pulses must be even and >= 2, got {n_pulses}"
        )));
    }
    if !(sample_interval > 0.0) {
        return Err(Error::invalid("sample interval must be positive"));
    }
    let df = 1.0 / (n_pulses as f64 * sample_interval);
    let half = n_pulses as i64 / 2;
    Ok((-half..half).map(|k| k as f64 * df).collect())
}

/// Pointing geometry and gain of one electronically formed beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGeometry {
    pub beam_id: u32,
    /// Azimuth of the boresight, clockwise from north (rad).
    pub azimuth: f64,
    /// Elevation above the horizon; negative for downtilted beams (rad).
    pub elevation: f64,
    /// Half-power beamwidth in azimuth (rad).
    pub hpbw_az: f64,
    /// Half-power beamwidth in elevation (rad).
    pub hpbw_el: f64,
    /// Maximum one-way power gain (linear).
    pub max_gain: f64,
    /// Site position in the local east-north-up frame (m).
    pub site_position: [f64; 3],
    /// Calibrated radar constant for this beam, if available
    /// (W·m²·mm⁻⁶·m³). When present it overrides composition from a system
    /// spec.
    pub radar_constant: Option<f64>,
}

impl BeamGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.hpbw_az > 0.0 && self.hpbw_az < std::f64::consts::PI) {
            return Err(Error::invalid(format!(
                "hpbw_az must lie in (0, pi), got {}",
                self.hpbw_az
            )));
        }
        if !(self.hpbw_el > 0.0 && self.hpbw_el < std::f64::consts::PI) {
            return Err(Error::invalid(format!(
                "hpbw_el must lie in (0, pi), got {}",
                self.hpbw_el
            )));
        }
        if !(self.max_gain > 0.0) {
            return Err(Error::invalid("max_gain must be positive"));
        }
        if let Some(c) = self.radar_constant {
            if !(c > 0.0) {
                return Err(Error::invalid("radar_constant must be positive"));
            }
        }
        Ok(())
    }

    /// Horizontal unit vector from the site towards a gate on this beam
    /// (east, north).
    pub fn line_of_sight(&self) -> (f64, f64) {
        (self.azimuth.sin(), self.azimuth.cos())
    }
}

/// Complex I/Q samples for one sweep, indexed `[beam, pulse, gate]`, plus
/// the frame timing and beam table that generated them.
#[derive(Debug, Clone)]
pub struct IqCube {
    pub samples: Array3<Complex64>,
    pub frame: FrameTiming,
    pub beams: Vec<BeamGeometry>,
    /// Gate spacing (m); always `c / (2 * adc_bandwidth)`.
    pub range_step: f64,
    /// Seconds since epoch at the start of the sweep.
    pub timestamp: f64,
}

impl IqCube {
    /// Validates dimensions and the range-coverage invariant
    /// `M * Δr <= c * rx_time / 2`.
    pub fn new(
        samples: Array3<Complex64>,
        frame: FrameTiming,
        beams: Vec<BeamGeometry>,
        timestamp: f64,
    ) -> Result<Self> {
        frame.validate()?;
        let (n_beams, n_pulses, n_gates) = samples.dim();
        if n_beams != beams.len() {
            return Err(Error::dims(format!(
                "cube has {n_beams} beams but geometry lists {}",
                beams.len()
            )));
        }
        if n_pulses != frame.pulses_per_beam {
            return Err(Error::dims(format!(
                "cube has {n_pulses} pulses per beam, frame declares {}",
                frame.pulses_per_beam
            )));
        }
        for b in &beams {
            b.validate()?;
        }
        let range_step = frame.range_step();
        let span = n_gates as f64 * range_step;
        if span > frame.max_range() * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "gate span {span} m exceeds the unambiguous range {} m",
                frame.max_range()
            )));
        }
        Ok(IqCube {
            samples,
            frame,
            beams,
            range_step,
            timestamp,
        })
    }

    pub fn n_beams(&self) -> usize {
        self.samples.dim().0
    }

    pub fn n_pulses(&self) -> usize {
        self.samples.dim().1
    }

    pub fn n_gates(&self) -> usize {
        self.samples.dim().2
    }

    /// Range of gate `m` from the site (m).
    pub fn gate_range(&self, gate: usize) -> f64 {
        gate as f64 * self.range_step
    }

    /// Slow-time series at `(beam, gate)`, one sample per pulse.
    pub fn pulse_series(&self, beam: usize, gate: usize) -> Vec<Complex64> {
        (0..self.n_pulses())
            .map(|p| self.samples[[beam, p, gate]])
            .collect()
    }
}

/// Window identifiers for the Doppler periodogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    Rectangular,
    Blackman,
    BlackmanNuttall,
}

impl std::fmt::Display for WindowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WindowKind::Rectangular => write!(f, "rectangular"),
            WindowKind::Blackman => write!(f, "blackman"),
            WindowKind::BlackmanNuttall => write!(f, "blackman-nuttall"),
        }
    }
}

impl std::str::FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" => Ok(WindowKind::Rectangular),
            "blackman" => Ok(WindowKind::Blackman),
            "blackman-nuttall" | "blackmannuttall" => Ok(WindowKind::BlackmanNuttall),
            other => Err(Error::invalid(format!("unknown window kind '{other}'"))),
        }
    }
}

/// Complex Doppler spectrum and its power spectral density for every gate
/// of one beam.
#[derive(Debug, Clone)]
pub struct RangeDopplerSpectrum {
    /// Complex amplitude spectrum, `[gate, doppler bin]`.
    pub amplitude: Array2<Complex64>,
    /// Power spectral density `|amplitude|²`, `[gate, doppler bin]`.
    pub psd: Array2<f64>,
    /// Doppler bin spacing `1 / (N_p * T_s)` (Hz).
    pub doppler_step: f64,
    /// Pulses used per spectrum (the windowed length, not the full series).
    pub n_pulses_used: usize,
    pub window: WindowKind,
    pub beam_id: u32,
}

/// Which rule produced a clutter mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    /// Thresholded circular variance of the differential phase.
    CvDriven,
    /// Thresholded occurrence count over a no-rain calibration interval.
    PersistencyDriven,
}

impl std::fmt::Display for MaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaskKind::CvDriven => write!(f, "cv-driven"),
            MaskKind::PersistencyDriven => write!(f, "persistency-driven"),
        }
    }
}

/// Binary range-Doppler clutter map: 0 marks clutter, 1 marks clutter-free
/// bins. Bins outside the `±1/(4 T_s)` half band are always 1 because the
/// staggered-sequence statistics do not cover them.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterMask {
    /// `[gate, doppler bin]`, entries 0 or 1.
    pub mask: Array2<u8>,
    pub kind: MaskKind,
    /// Sub-sampling offset the statistics were computed with (samples).
    pub offset: usize,
    /// Threshold applied (circular variance or persistency count).
    pub threshold: f64,
}

impl ClutterMask {
    pub fn n_gates(&self) -> usize {
        self.mask.dim().0
    }

    pub fn n_bins(&self) -> usize {
        self.mask.dim().1
    }

    /// Count of clutter-flagged bins (entries equal to 0).
    pub fn n_flagged(&self) -> usize {
        self.mask.iter().filter(|&&v| v == 0).count()
    }
}

/// Indices of the inner `±1/(4 T_s)` half band on a symmetric `n_bins`
/// Doppler axis: bins `n/4 .. 3n/4` (i.e. `k = -n/4 ..= n/4 - 1`).
pub fn half_band_bins(n_bins: usize) -> std::ops::Range<usize> {
    n_bins / 4..(3 * n_bins) / 4
}

/// Validity of one product gate. Invalid gates carry NaN moments, never
/// silent zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateValidity {
    Valid,
    /// Valid, but masked bins were filled with the noise floor because the
    /// Gaussian fit had too few usable bins.
    InterpolationFallback,
    /// Gate lies closer than the transmit+guard blind zone.
    BlindZone,
    /// Retrieved reflectivity fell below the minimum detectable value.
    BelowMdz,
}

impl GateValidity {
    pub fn is_valid(self) -> bool {
        matches!(
            self,
            GateValidity::Valid | GateValidity::InterpolationFallback
        )
    }
}

/// Radar moments and retrieved rain rate for one gate.
#[derive(Debug, Clone, Copy)]
pub struct ProductCell {
    /// Equivalent reflectivity factor (mm⁶ m⁻³); NaN when invalid.
    pub reflectivity: f64,
    /// Mean Doppler velocity, positive away from the site (m/s).
    pub mean_velocity: f64,
    /// Doppler spread (m/s).
    pub doppler_spread: f64,
    /// Retrieved rain rate (mm/h).
    pub rain_rate: f64,
    /// Estimated signal-to-noise ratio (dB).
    pub snr_db: f64,
    pub validity: GateValidity,
}

impl ProductCell {
    pub fn invalid(validity: GateValidity) -> Self {
        ProductCell {
            reflectivity: f64::NAN,
            mean_velocity: f64::NAN,
            doppler_spread: f64::NAN,
            rain_rate: f64::NAN,
            snr_db: f64::NAN,
            validity,
        }
    }

    /// Reflectivity in dBZ; NaN when invalid or zero.
    pub fn reflectivity_dbz(&self) -> f64 {
        if self.reflectivity > 0.0 {
            10.0 * self.reflectivity.log10()
        } else {
            f64::NAN
        }
    }
}

/// Per-beam, per-gate products of one processed sweep, with the geometry
/// needed for PPI export.
#[derive(Debug, Clone)]
pub struct ProductGrid {
    /// `[beam, gate]`.
    pub cells: Array2<ProductCell>,
    pub beams: Vec<BeamGeometry>,
    pub range_step: f64,
    pub timestamp: f64,
}

impl ProductGrid {
    pub fn n_beams(&self) -> usize {
        self.cells.dim().0
    }

    pub fn n_gates(&self) -> usize {
        self.cells.dim().1
    }

    pub fn gate_range(&self, gate: usize) -> f64 {
        gate as f64 * self.range_step
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    pub(crate) fn test_frame() -> FrameTiming {
        // 2.5 ms pulse interval, 20 MHz-class bandwidth.
        FrameTiming::new(
            8e-6, 2e-6, 128.8e-6, 2.3612e-3, 128, 18.36e6, 23.04e6, 4.9e9,
        )
        .unwrap()
    }

    fn test_beam() -> BeamGeometry {
        BeamGeometry {
            beam_id: 0,
            azimuth: 0.0,
            elevation: -0.01,
            hpbw_az: 6f64.to_radians(),
            hpbw_el: 3f64.to_radians(),
            max_gain: 10f64.powf(2.63),
            site_position: [0.0, 0.0, 30.0],
            radar_constant: None,
        }
    }

    #[test]
    fn pulse_interval_is_exact_sum() {
        let f = test_frame();
        assert_eq!(
            f.pulse_interval,
            f.tx_time + f.guard_time + f.rx_time + f.idle_time
        );
        assert!((f.pulse_interval - 2.5e-3).abs() < 1e-12);
    }

    #[test]
    fn rejects_bandwidth_above_adc() {
        let r = FrameTiming::new(8e-6, 2e-6, 128.8e-6, 2.3612e-3, 128, 30e6, 23.04e6, 4.9e9);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_sub_unity_time_bandwidth_product() {
        let r = FrameTiming::new(
            1e-8, 2e-6, 128.8e-6, 2.3612e-3, 128, 18.36e6, 23.04e6, 4.9e9,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_nonpositive_duration() {
        let r = FrameTiming::new(8e-6, 0.0, 128.8e-6, 2.3612e-3, 128, 18.36e6, 23.04e6, 4.9e9);
        assert!(r.is_err());
    }

    #[test]
    fn doppler_axis_matches_direct_evaluation() {
        // T_s = 2.5 ms, n = 128: df = 3.125 Hz, axis spans [-200, 196.875].
        let f = test_frame();
        let axis = doppler_axis(&f, 128).unwrap();
        assert_eq!(axis.len(), 128);
        let df = 1.0 / (128.0 * f.pulse_interval);
        assert!((df - 3.125).abs() < 1e-12);
        assert!((axis[0] + 200.0).abs() < 1e-9);
        assert!((axis[127] - 196.875).abs() < 1e-9);
        for (k, &v) in axis.iter().enumerate() {
            assert_eq!(v, (k as f64 - 64.0) * df);
        }
    }

    #[test]
    fn doppler_axis_smallest_even_case() {
        let f = test_frame();
        let axis = doppler_axis(&f, 2).unwrap();
        let df = 1.0 / (2.0 * f.pulse_interval);
        assert_eq!(axis, vec![-df, 0.0]);
    }

    #[test]
    fn doppler_axis_sum_identity() {
        // Arithmetic series: sum over k = -n/2 .. n/2-1 of k*df = -df*n/2.
        let f = test_frame();
        for n in [2usize, 8, 64, 128] {
            let axis = doppler_axis(&f, n).unwrap();
            let df = 1.0 / (n as f64 * f.pulse_interval);
            let sum: f64 = axis.iter().sum();
            assert!((sum + df * n as f64 / 2.0).abs() < 1e-9, "n={n}: sum={sum}");
        }
    }

    #[test]
    fn doppler_axis_rejects_odd_or_small() {
        let f = test_frame();
        assert!(doppler_axis(&f, 3).is_err());
        assert!(doppler_axis(&f, 0).is_err());
        assert!(doppler_axis(&f, 1).is_err());
    }

    #[test]
    fn doppler_axis_is_deterministic() {
        let f = test_frame();
        let a = doppler_axis(&f, 64).unwrap();
        let b = doppler_axis(&f, 64).unwrap();
        assert_eq!(a, b); // bit-identical
    }

    #[test]
    fn blind_zone_example() {
        // tx 8 us, guard 2 us -> 1499.0 m
        let f = test_frame();
        let (r_min, r_max) = blind_zone_and_max_range(&f);
        assert!((r_min - 1498.96229).abs() < 1e-3);
        assert!((r_max - SPEED_OF_LIGHT * 128.8e-6 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn max_range_is_linear_in_rx_time() {
        let f1 = test_frame();
        let f2 = FrameTiming::new(
            f1.tx_time,
            f1.guard_time,
            2.0 * f1.rx_time,
            f1.idle_time,
            128,
            f1.bandwidth,
            f1.adc_bandwidth,
            f1.carrier_freq,
        )
        .unwrap();
        assert_eq!(f2.max_range(), 2.0 * f1.max_range());
    }

    #[test]
    fn cube_rejects_gates_beyond_unambiguous_range() {
        let f = test_frame();
        let max_gates = (f.max_range() / f.range_step()).floor() as usize;
        let samples = Array3::zeros((1, 128, max_gates + 2));
        let r = IqCube::new(samples, f, vec![test_beam()], 0.0);
        assert!(r.is_err());
    }

    #[test]
    fn cube_accessors() {
        let f = test_frame();
        let samples = Array3::from_elem((1, 128, 64), Complex64::new(1.0, -2.0));
        let cube = IqCube::new(samples, f.clone(), vec![test_beam()], 123.0).unwrap();
        assert_eq!(cube.n_beams(), 1);
        assert_eq!(cube.n_pulses(), 128);
        assert_eq!(cube.n_gates(), 64);
        assert_eq!(cube.range_step, f.range_step());
        assert_eq!(cube.gate_range(10), 10.0 * f.range_step());
        let series = cube.pulse_series(0, 5);
        assert_eq!(series.len(), 128);
        assert_eq!(series[0], Complex64::new(1.0, -2.0));
    }

    #[test]
    fn half_band_indices() {
        assert_eq!(half_band_bins(64), 16..48);
        assert_eq!(half_band_bins(8), 2..6);
    }

    #[test]
    fn beam_rejects_bad_beamwidth() {
        let mut b = test_beam();
        b.hpbw_az = 0.0;
        assert!(b.validate().is_err());
        b.hpbw_az = 4.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn elevation_may_be_negative() {
        let b = test_beam();
        assert!(b.elevation < 0.0);
        assert!(b.validate().is_ok());
    }
}
