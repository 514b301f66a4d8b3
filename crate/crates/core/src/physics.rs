//! Radar equation forward/inverse, radar constant, antenna correction
//! factor, path-integrated attenuation, and sensitivity (MDZ/MDR).
//!
//! Unit conventions: reflectivity factor `Z` in mm⁶ m⁻³, ranges in metres,
//! powers in watts, drop diameters in mm, cross sections in mm². The
//! wavelength is converted to millimetres *inside* the scattering formulas
//! so that the mm-based quantities stay consistent.

use serde::{Deserialize, Serialize};

use crate::dsd::ZrCoefficients;
use crate::error::{Error, Result};
use crate::types::{BOLTZMANN, REFERENCE_TEMPERATURE, SPEED_OF_LIGHT};

const LN2_X8: f64 = 8.0 * std::f64::consts::LN_2;

/// Normalized one-way power radiation pattern of the antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AntennaPattern {
    /// Gaussian main lobe matched to the half-power beamwidths.
    ParametricGaussian,
    /// Uniform rectangular array of half-wavelength-spaced elements,
    /// `n_az × n_el` patches; pure array factor, no element pattern.
    UniformRectangularArray { n_az: usize, n_el: usize },
    /// Tabulated pattern on a regular (azimuth × elevation) grid, bilinear
    /// interpolation, zero outside the grid.
    Tabulated {
        az_grid: Vec<f64>,
        el_grid: Vec<f64>,
        /// Row-major `[az][el]` normalized power values.
        values: Vec<Vec<f64>>,
    },
}

impl AntennaPattern {
    /// One-way normalized power gain at offsets from boresight (rad).
    /// `hpbw_az`/`hpbw_el` parameterize the Gaussian variant.
    pub fn gain(&self, d_az: f64, d_el: f64, hpbw_az: f64, hpbw_el: f64) -> f64 {
        match self {
            AntennaPattern::ParametricGaussian => {
                let arg = LN2_X8 / 2.0 * ((d_az / hpbw_az).powi(2) + (d_el / hpbw_el).powi(2));
                (-arg).exp()
            }
            AntennaPattern::UniformRectangularArray { n_az, n_el } => {
                let af = |n: usize, angle: f64| -> f64 {
                    // Half-wavelength spacing: psi = pi * sin(angle).
                    let psi = std::f64::consts::PI * angle.sin();
                    let num = (n as f64 * psi / 2.0).sin();
                    let den = n as f64 * (psi / 2.0).sin();
                    if den.abs() < 1e-12 {
                        1.0
                    } else {
                        num / den
                    }
                };
                let a = af(*n_az, d_az) * af(*n_el, d_el);
                a * a
            }
            AntennaPattern::Tabulated {
                az_grid,
                el_grid,
                values,
            } => bilinear(az_grid, el_grid, values, d_az, d_el),
        }
    }
}

fn bilinear(xs: &[f64], ys: &[f64], v: &[Vec<f64>], x: f64, y: f64) -> f64 {
    if xs.len() < 2 || ys.len() < 2 {
        return 0.0;
    }
    if x < xs[0] || x > xs[xs.len() - 1] || y < ys[0] || y > ys[ys.len() - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&g| g <= x).clamp(1, xs.len() - 1) - 1;
    let j = ys.partition_point(|&g| g <= y).clamp(1, ys.len() - 1) - 1;
    let tx = (x - xs[i]) / (xs[i + 1] - xs[i]);
    let ty = (y - ys[j]) / (ys[j + 1] - ys[j]);
    let v00 = v[i][j];
    let v10 = v[i + 1][j];
    let v01 = v[i][j + 1];
    let v11 = v[i + 1][j + 1];
    v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
}

/// System parameters entering the radar constant and sensitivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSystemSpec {
    /// Carrier frequency (Hz).
    pub carrier_freq: f64,
    /// Transmitted peak power (W).
    pub peak_power: f64,
    /// Receiver noise figure (linear, not dB).
    pub noise_figure: f64,
    /// Transmit pulse length (s).
    pub pulse_len: f64,
    /// Occupied signal bandwidth (Hz).
    pub bandwidth: f64,
    /// Maximum one-way antenna power gain (linear).
    pub max_gain: f64,
    /// Half-power beamwidth in azimuth (rad).
    pub hpbw_az: f64,
    /// Half-power beamwidth in elevation (rad).
    pub hpbw_el: f64,
    /// Dielectric factor of water `|K_w|²`.
    pub dielectric_factor: f64,
    /// Range-gate spacing (m).
    pub range_step: f64,
    pub pattern: AntennaPattern,
}

impl RadarSystemSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("carrier_freq", self.carrier_freq),
            ("peak_power", self.peak_power),
            ("noise_figure", self.noise_figure),
            ("pulse_len", self.pulse_len),
            ("bandwidth", self.bandwidth),
            ("max_gain", self.max_gain),
            ("hpbw_az", self.hpbw_az),
            ("hpbw_el", self.hpbw_el),
            ("range_step", self.range_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(self.dielectric_factor > 0.0 && self.dielectric_factor <= 1.0) {
            return Err(Error::invalid(format!(
                "dielectric_factor must lie in (0, 1], got {}",
                self.dielectric_factor
            )));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Thermal noise power at the receiver input, `k_B T_0 B` (W).
    pub fn noise_power(&self) -> f64 {
        BOLTZMANN * REFERENCE_TEMPERATURE * self.bandwidth
    }

    fn classic(carrier_freq: f64, peak_power: f64) -> Self {
        // Reference weather-radar column: 0.33 us unmodulated pulse
        // (B = 1/tau), 43 dBi, 1 deg pencil beam, 4 dB noise figure.
        let pulse_len = 0.33e-6;
        let bandwidth = 1.0 / pulse_len;
        RadarSystemSpec {
            carrier_freq,
            peak_power,
            noise_figure: 10f64.powf(0.4),
            pulse_len,
            bandwidth,
            max_gain: 10f64.powf(4.3),
            hpbw_az: 1f64.to_radians(),
            hpbw_el: 1f64.to_radians(),
            dielectric_factor: 0.93,
            range_step: SPEED_OF_LIGHT / (2.0 * bandwidth),
            pattern: AntennaPattern::ParametricGaussian,
        }
    }

    /// S-band weather radar reference preset (2.7 GHz, 750 kW).
    pub fn s_band() -> Self {
        Self::classic(2.7e9, 750e3)
    }

    /// C-band weather radar reference preset (5.6 GHz, 200 kW).
    pub fn c_band() -> Self {
        Self::classic(5.6e9, 200e3)
    }

    /// X-band weather radar reference preset (9.4 GHz, 100 kW).
    pub fn x_band() -> Self {
        Self::classic(9.4e9, 100e3)
    }

    /// Base-station preset: the C-band reference scaled by factors 10⁻³ on
    /// power, 24 on pulse length, 0.5 on gain, and 18 on the beamwidth
    /// product, retuned to a 4.9 GHz carrier. Vendor-exact figures are not
    /// public; only these scalings are.
    pub fn base_station() -> Self {
        let c = Self::c_band();
        RadarSystemSpec {
            carrier_freq: 4.9e9,
            peak_power: 1e-3 * c.peak_power,
            pulse_len: 24.0 * c.pulse_len,
            max_gain: 0.5 * c.max_gain,
            // Split the x18 beam-solid-angle factor as 6 x 3 (azimuth wider
            // than elevation, as for a patch array panel).
            hpbw_az: 6.0 * c.hpbw_az,
            hpbw_el: 3.0 * c.hpbw_el,
            ..c
        }
    }
}

/// Rayleigh backscattering cross section of a water sphere (mm²):
/// `σ_b = π⁵ |K_w|² D⁶ / λ⁴` with `D` in mm and `λ` converted to mm.
pub fn rayleigh_backscatter(diameter_mm: f64, wavelength_m: f64, dielectric_factor: f64) -> f64 {
    let lambda_mm = wavelength_m * 1000.0;
    std::f64::consts::PI.powi(5) * dielectric_factor * diameter_mm.powi(6) / lambda_mm.powi(4)
}

/// Externally computed scattering cross sections on a diameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringTable {
    /// Carrier frequency the cross sections were computed for (Hz).
    pub frequency: f64,
    /// Polarization tag (free-form, e.g. "h" or "slant45").
    pub polarization: String,
    /// Strictly increasing drop diameters (mm).
    pub diameters: Vec<f64>,
    /// Backscattering cross sections (mm²).
    pub backscatter: Vec<f64>,
    /// Extinction cross sections (mm²).
    pub extinction: Vec<f64>,
}

impl ScatteringTable {
    pub fn new(
        frequency: f64,
        polarization: impl Into<String>,
        diameters: Vec<f64>,
        backscatter: Vec<f64>,
        extinction: Vec<f64>,
    ) -> Result<Self> {
        if diameters.len() != backscatter.len() || diameters.len() != extinction.len() {
            return Err(Error::dims(
                "diameter, backscatter, and extinction columns must have equal length",
            ));
        }
        if diameters.len() < 2 {
            return Err(Error::invalid("scattering table needs at least 2 rows"));
        }
        if !diameters.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::invalid("diameter grid must be strictly increasing"));
        }
        if backscatter
            .iter()
            .chain(extinction.iter())
            .any(|&v| v < 0.0)
        {
            return Err(Error::invalid("cross sections must be non-negative"));
        }
        Ok(ScatteringTable {
            frequency,
            polarization: polarization.into(),
            diameters,
            backscatter,
            extinction,
        })
    }

    /// Built-in fallback: Rayleigh backscatter on the given grid; the
    /// extinction column is zeroed (no closed form is carried here).
    pub fn rayleigh(frequency: f64, dielectric_factor: f64, diameters: Vec<f64>) -> Result<Self> {
        let lambda = SPEED_OF_LIGHT / frequency;
        let backscatter = diameters
            .iter()
            .map(|&d| rayleigh_backscatter(d, lambda, dielectric_factor))
            .collect();
        let extinction = vec![0.0; diameters.len()];
        Self::new(frequency, "rayleigh", diameters, backscatter, extinction)
    }

    /// Linear interpolation of the backscatter column; `None` outside the
    /// tabulated grid.
    pub fn backscatter_at(&self, diameter_mm: f64) -> Option<f64> {
        interp_linear(&self.diameters, &self.backscatter, diameter_mm)
    }

    pub fn extinction_at(&self, diameter_mm: f64) -> Option<f64> {
        interp_linear(&self.diameters, &self.extinction, diameter_mm)
    }
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = xs.partition_point(|&g| g <= x).clamp(1, xs.len() - 1) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    Some(ys[i] * (1.0 - t) + ys[i + 1] * t)
}

/// Equivalent reflectivity factor (mm⁶ m⁻³) from a drop size distribution:
/// `Z = λ⁴ / (π⁵ |K_w|²) ∫ σ_b(D) N(D) dD`, trapezoidal quadrature on the
/// DSD grid restricted to the overlap with the scattering table.
///
/// `diameters` (mm, strictly increasing) and `concentrations` (m⁻³ mm⁻¹)
/// describe the DSD; `wavelength_m` is converted to mm internally.
pub fn reflectivity_from_dsd(
    diameters: &[f64],
    concentrations: &[f64],
    table: &ScatteringTable,
    wavelength_m: f64,
    dielectric_factor: f64,
) -> Result<f64> {
    if diameters.len() != concentrations.len() {
        return Err(Error::dims("DSD grids must have equal length"));
    }
    if diameters.len() < 2 {
        return Err(Error::invalid("DSD needs at least 2 diameter bins"));
    }
    let lambda_mm = wavelength_m * 1000.0;
    let prefactor = lambda_mm.powi(4) / (std::f64::consts::PI.powi(5) * dielectric_factor);
    // Integrand sampled on the DSD grid wherever the table covers it.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&d, &n) in diameters.iter().zip(concentrations) {
        if let Some(sb) = table.backscatter_at(d) {
            xs.push(d);
            ys.push(sb * n);
        }
    }
    if xs.len() < 2 {
        return Err(Error::invalid(
            "DSD and scattering table grids do not overlap",
        ));
    }
    Ok(prefactor * trapezoid(&xs, &ys))
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}

/// Two-way atmospheric loss factor `L² = exp(-2 ∫₀ʳ k_e dr) ∈ (0, 1]`.
///
/// `specific_attenuation` holds `k_e` (m⁻¹) sampled at gate centres
/// `i * range_step`; the integral is a trapezoid up to `r`, with linear
/// interpolation on the final partial step and constant extrapolation
/// beyond the profile.
pub fn two_way_loss(specific_attenuation: &[f64], range_step: f64, r: f64) -> Result<f64> {
    if specific_attenuation
        .iter()
        .any(|&k| k < 0.0 || !k.is_finite())
    {
        return Err(Error::invalid("specific attenuation must be >= 0"));
    }
    if r < 0.0 {
        return Err(Error::invalid("range must be >= 0"));
    }
    if specific_attenuation.is_empty() {
        return Ok(1.0);
    }
    let mut pia = 0.0;
    let mut prev = specific_attenuation[0];
    let mut covered = 0.0;
    for (i, &k) in specific_attenuation.iter().enumerate().skip(1) {
        let edge = i as f64 * range_step;
        if edge >= r {
            // Partial final step.
            let t = (r - covered) / range_step;
            let k_r = prev + (k - prev) * t;
            pia += 0.5 * (prev + k_r) * (r - covered);
            return Ok((-2.0 * pia).exp());
        }
        pia += 0.5 * (prev + k) * range_step;
        covered = edge;
        prev = k;
    }
    // Beyond the profile: hold the last value.
    pia += prev * (r - covered);
    Ok((-2.0 * pia).exp())
}

/// Cumulative `L²` at every gate centre of a profile.
pub fn two_way_loss_profile(specific_attenuation: &[f64], range_step: f64) -> Result<Vec<f64>> {
    if specific_attenuation
        .iter()
        .any(|&k| k < 0.0 || !k.is_finite())
    {
        return Err(Error::invalid("specific attenuation must be >= 0"));
    }
    let mut out = Vec::with_capacity(specific_attenuation.len());
    let mut pia = 0.0;
    for (i, &k) in specific_attenuation.iter().enumerate() {
        if i > 0 {
            pia += 0.5 * (specific_attenuation[i - 1] + k) * range_step;
        }
        out.push((-2.0 * pia).exp());
    }
    Ok(out)
}

/// Antenna correction factor
/// `F = 8 ln2 / (π Δφ Δθ) ∫∫ f²(φ, θ) cos φ dφ dθ` over `[-π/2, π/2]²`,
/// accounting for non-Gaussian patterns in the radar constant. Two-way
/// (squared) pattern, trapezoid quadrature on an `n × n` grid.
pub fn antenna_correction_factor(
    pattern: &AntennaPattern,
    hpbw_az: f64,
    hpbw_el: f64,
    n_grid: usize,
) -> Result<f64> {
    if n_grid < 3 {
        return Err(Error::invalid("quadrature grid must have >= 3 points"));
    }
    let half = std::f64::consts::FRAC_PI_2;
    let step = std::f64::consts::PI / (n_grid - 1) as f64;
    let mut integral = 0.0;
    for i in 0..n_grid {
        let phi = -half + i as f64 * step;
        let wi = if i == 0 || i == n_grid - 1 { 0.5 } else { 1.0 };
        let cos_phi = phi.cos();
        let mut row = 0.0;
        for j in 0..n_grid {
            let theta = -half + j as f64 * step;
            let wj = if j == 0 || j == n_grid - 1 { 0.5 } else { 1.0 };
            let f = pattern.gain(phi, theta, hpbw_az, hpbw_el);
            row += wj * f * f;
        }
        integral += wi * cos_phi * row;
    }
    integral *= step * step;
    Ok(LN2_X8 / (std::f64::consts::PI * hpbw_az * hpbw_el) * integral)
}

/// Default quadrature resolution for [`antenna_correction_factor`]: fine
/// enough to resolve degree-scale pencil beams to well under 1%.
pub const ANTENNA_QUADRATURE_POINTS: usize = 4097;

/// Whether the radar constant carries the `B·τ_tx` pulse-compression gain.
/// Use `AfterCompression` when received powers are measured on
/// range-compressed data (this chain), `BeforeCompression` otherwise —
/// never both, or the gain would be double counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerReference {
    AfterCompression,
    BeforeCompression,
}

/// Radar constant (W·m²·mm⁻⁶·m³): transmission term, Rayleigh prefactor,
/// resolution-volume term, antenna correction factor, unit conversion
/// `10⁻¹⁸`, and optionally the `B·τ_tx` compression gain.
pub fn radar_constant(
    spec: &RadarSystemSpec,
    antenna_factor: f64,
    reference: PowerReference,
) -> Result<f64> {
    spec.validate()?;
    if !(antenna_factor > 0.0) {
        return Err(Error::invalid("antenna factor must be positive"));
    }
    let lambda = spec.wavelength();
    let tx_term = spec.peak_power * spec.max_gain * spec.max_gain * lambda * lambda
        / (4.0 * std::f64::consts::PI).powi(3);
    let rayleigh_term = std::f64::consts::PI.powi(5) * spec.dielectric_factor / lambda.powi(4);
    let volume_term = std::f64::consts::PI * spec.hpbw_az * spec.hpbw_el / LN2_X8 * spec.range_step;
    let compression = match reference {
        PowerReference::AfterCompression => spec.bandwidth * spec.pulse_len,
        PowerReference::BeforeCompression => 1.0,
    };
    Ok(1e-18 * tx_term * rayleigh_term * volume_term * antenna_factor * compression)
}

/// Inverts the radar equation: `Z = P_rx r² / (C L²)` (mm⁶ m⁻³).
pub fn invert_radar_equation(
    p_rx: f64,
    range: f64,
    constant: f64,
    two_way_loss: f64,
) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::invalid("range must be positive"));
    }
    if !(constant > 0.0) {
        return Err(Error::invalid("radar constant must be positive"));
    }
    if !(two_way_loss > 0.0 && two_way_loss <= 1.0) {
        return Err(Error::invalid("two-way loss must lie in (0, 1]"));
    }
    Ok(p_rx * range * range / (constant * two_way_loss))
}

/// Forward radar equation: `P_rx = C Z L² / r²` (W).
pub fn forward_radar_equation(z: f64, range: f64, constant: f64, two_way_loss: f64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::invalid("range must be positive"));
    }
    Ok(constant * z * two_way_loss / (range * range))
}

/// Minimum detectable reflectivity at range `r` (dBZ):
/// `MDZ = 10 log₁₀(P_noise F_n SNR_min r² / C)` with `P_noise = k_B T₀ B`.
pub fn mdz(spec: &RadarSystemSpec, constant: f64, range: f64, snr_min: f64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::invalid("range must be positive"));
    }
    if !(snr_min > 0.0) {
        return Err(Error::invalid("snr_min must be positive"));
    }
    let p_min = spec.noise_power() * spec.noise_figure * snr_min;
    Ok(10.0 * (p_min * range * range / constant).log10())
}

/// Minimum detectable rain rate (mm/h) from an MDZ value:
/// `MDR = (10^(MDZ/10) / a)^(1/b)`.
pub fn mdr(mdz_dbz: f64, zr: &ZrCoefficients) -> f64 {
    (10f64.powf(mdz_dbz / 10.0) / zr.a).powf(1.0 / zr.b)
}
