//! Physically based synthesis of I/Q cubes containing rain, phase-stable
//! ground clutter, and thermal noise, plus rain-field generation and
//! two-site geometry projection.
//!
//! Rain at each gate is drawn as a circular complex Gaussian process whose
//! power spectral density is Gaussian: centred at `-2 V_radial / λ`, width
//! `2 W / λ`, total power `C_g Z / r² L²`. Clutter points return
//! near-constant-phase echoes with optional per-pulse phase jitter; noise
//! is white at `k_B T₀ B F_n`. Every (beam, gate, component) draws from
//! its own seeded sub-stream, so synthesis is reproducible bit-for-bit and
//! safe to parallelize.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::distributions::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{radar_constant, PowerReference, RadarSystemSpec};
use crate::rng::{complex_normal, stream_rng, StandardNormal};
use crate::spectral::{fft_in_place, ifft_in_place};
use crate::types::{BeamGeometry, FrameTiming, IqCube};

/// Power-law map from reflectivity to specific attenuation:
/// `k_e = coeff * Z^exponent` (Z in mm⁶ m⁻³, k_e in m⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeLaw {
    pub coeff: f64,
    pub exponent: f64,
}

impl Default for KeLaw {
    fn default() -> Self {
        // C-band-like one-way attenuation, converted from the usual
        // dB/km-vs-rain-rate relation through a Marshall-Palmer Z.
        KeLaw {
            coeff: 1.06e-8,
            exponent: 0.73,
        }
    }
}

/// Settings for [`generate_rain_field`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RainFieldConfig {
    pub nx: usize,
    pub ny: usize,
    /// Grid spacing (m).
    pub spacing: f64,
    /// Distance at which the field autocorrelation drops to 1/e (m).
    pub correlation_length: f64,
    pub mean_dbz: f64,
    pub std_dbz: f64,
    /// Horizontal advection (east, north) in m/s; also sets the radial
    /// velocity seen from any site.
    pub advection: [f64; 2],
    /// Doppler spectrum width assigned to every cell (m/s).
    pub width_ms: f64,
    /// Position of cell (0, 0) in the local frame (m).
    pub origin: [f64; 2],
    /// Optional Z-to-attenuation law; `None` disables attenuation.
    pub ke_law: Option<KeLaw>,
}

/// Sampled rain-field cell values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    /// Linear reflectivity factor (mm⁶ m⁻³).
    pub z: f64,
    /// Doppler spectrum width (m/s).
    pub width: f64,
    /// Specific attenuation (m⁻¹).
    pub k_e: f64,
}

/// Gridded rain field with frozen-advection time evolution: the value at
/// `(x, y, t)` is the stored field at `(x - vx t, y - vy t)`.
#[derive(Debug, Clone)]
pub struct RainField {
    /// Linear reflectivity factor per cell, `[ix, iy]` (mm⁶ m⁻³).
    pub z_lin: Array2<f64>,
    /// Doppler spectrum width per cell (m/s).
    pub width: Array2<f64>,
    /// Specific attenuation per cell (m⁻¹).
    pub k_e: Array2<f64>,
    pub spacing: f64,
    pub origin: [f64; 2],
    pub advection: [f64; 2],
}

impl RainField {
    /// Bilinear sample at position `(x, y)` and time `t`; `None` outside
    /// the grid.
    pub fn sample(&self, x: f64, y: f64, t: f64) -> Option<FieldSample> {
        let gx = (x - self.advection[0] * t - self.origin[0]) / self.spacing;
        let gy = (y - self.advection[1] * t - self.origin[1]) / self.spacing;
        let (nx, ny) = self.z_lin.dim();
        if gx < 0.0 || gy < 0.0 || gx > (nx - 1) as f64 || gy > (ny - 1) as f64 {
            return None;
        }
        let i = (gx.floor() as usize).min(nx - 2);
        let j = (gy.floor() as usize).min(ny - 2);
        let tx = gx - i as f64;
        let ty = gy - j as f64;
        let lerp = |a: &Array2<f64>| -> f64 {
            a[[i, j]] * (1.0 - tx) * (1.0 - ty)
                + a[[i + 1, j]] * tx * (1.0 - ty)
                + a[[i, j + 1]] * (1.0 - tx) * ty
                + a[[i + 1, j + 1]] * tx * ty
        };
        Some(FieldSample {
            z: lerp(&self.z_lin),
            width: lerp(&self.width),
            k_e: lerp(&self.k_e),
        })
    }

    /// Radial velocity of the advecting field along the line of sight from
    /// `site` towards azimuth `az`/elevation `el`; positive away from the
    /// site.
    pub fn radial_velocity(&self, azimuth: f64, elevation: f64) -> f64 {
        elevation.cos() * (self.advection[0] * azimuth.sin() + self.advection[1] * azimuth.cos())
    }
}

/// Generates a correlated log-normal reflectivity field: white Gaussian
/// noise filtered with a Gaussian kernel (via 2-D FFT, periodic
/// boundaries), scaled to `std_dbz` around `mean_dbz` in dB, then
/// exponentiated. Deterministic per seed; with `std_dbz = 0` the field is
/// exactly uniform.
pub fn generate_rain_field(seed: u64, cfg: &RainFieldConfig) -> Result<RainField> {
    if cfg.nx < 2 || cfg.ny < 2 {
        return Err(Error::invalid("field grid must be at least 2x2"));
    }
    if !(cfg.spacing > 0.0) {
        return Err(Error::invalid("grid spacing must be positive"));
    }
    if cfg.correlation_length <= cfg.spacing {
        return Err(Error::invalid(
            "correlation length must exceed the grid spacing",
        ));
    }
    if cfg.std_dbz < 0.0 || cfg.width_ms < 0.0 {
        return Err(Error::invalid("std_dbz and width_ms must be >= 0"));
    }
    let (nx, ny) = (cfg.nx, cfg.ny);
    let mut dbz = Array2::<f64>::from_elem((nx, ny), cfg.mean_dbz);
    if cfg.std_dbz > 0.0 {
        // Gaussian kernel sigma such that the field autocorrelation
        // exp(-d^2 / (4 s^2)) hits 1/e at d = correlation_length.
        let s = cfg.correlation_length / 2.0;
        let mut kernel = Array2::<f64>::zeros((nx, ny));
        for i in 0..nx {
            let di = (i.min(nx - i)) as f64 * cfg.spacing;
            for j in 0..ny {
                let dj = (j.min(ny - j)) as f64 * cfg.spacing;
                kernel[[i, j]] = (-(di * di + dj * dj) / (2.0 * s * s)).exp();
            }
        }
        let norm = kernel.iter().map(|k| k * k).sum::<f64>().sqrt();
        kernel.mapv_inplace(|k| k / norm);

        let mut rng = stream_rng(seed, &[0x0f1e]);
        let mut white = Array2::<Complex64>::zeros((nx, ny));
        for v in white.iter_mut() {
            *v = Complex64::new(StandardNormal.sample(&mut rng), 0.0);
        }
        let mut kspec = kernel.mapv(|k| Complex64::new(k, 0.0));
        fft2(&mut white);
        fft2(&mut kspec);
        let mut prod = &white * &kspec;
        ifft2(&mut prod);
        // Circular convolution of two real grids: the imaginary residue is
        // rounding only.
        for ((i, j), v) in prod.indexed_iter() {
            dbz[[i, j]] = cfg.mean_dbz + cfg.std_dbz * v.re;
        }
    }
    let z_lin = dbz.mapv(|d| 10f64.powf(d / 10.0));
    let k_e = match cfg.ke_law {
        Some(law) => z_lin.mapv(|z| law.coeff * z.powf(law.exponent)),
        None => Array2::zeros((nx, ny)),
    };
    Ok(RainField {
        width: Array2::from_elem((nx, ny), cfg.width_ms),
        k_e,
        z_lin,
        spacing: cfg.spacing,
        origin: cfg.origin,
        advection: cfg.advection,
    })
}

fn fft2(grid: &mut Array2<Complex64>) {
    let (nx, ny) = grid.dim();
    let mut row = vec![Complex64::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            row[j] = grid[[i, j]];
        }
        fft_in_place(&mut row);
        for j in 0..ny {
            grid[[i, j]] = row[j];
        }
    }
    let mut col = vec![Complex64::new(0.0, 0.0); nx];
    for j in 0..ny {
        for i in 0..nx {
            col[i] = grid[[i, j]];
        }
        fft_in_place(&mut col);
        for i in 0..nx {
            grid[[i, j]] = col[i];
        }
    }
}

fn ifft2(grid: &mut Array2<Complex64>) {
    let (nx, ny) = grid.dim();
    let mut row = vec![Complex64::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            row[j] = grid[[i, j]];
        }
        ifft_in_place(&mut row);
        for j in 0..ny {
            grid[[i, j]] = row[j];
        }
    }
    let mut col = vec![Complex64::new(0.0, 0.0); nx];
    for j in 0..ny {
        for i in 0..nx {
            col[i] = grid[[i, j]];
        }
        ifft_in_place(&mut col);
        for i in 0..nx {
            grid[[i, j]] = col[i];
        }
    }
}

fn default_phase_jitter() -> f64 {
    0.01
}

/// One phase-stable point scatterer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterPoint {
    /// Position in the local east-north-up frame (m).
    pub position: [f64; 3],
    /// Radar cross section (m²).
    pub rcs: f64,
    /// Per-pulse phase jitter standard deviation (rad); 0 is perfectly
    /// stable. Defaults to 0.01, a slightly swaying scatterer.
    #[serde(default = "default_phase_jitter")]
    pub phase_jitter: f64,
}

/// Static clutter content of a scene: point scatterers plus optional
/// extended clutter pinned to specific (beam, gate) cells.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClutterScene {
    #[serde(default)]
    pub points: Vec<ClutterPoint>,
    #[serde(default)]
    pub extended: Vec<ExtendedClutter>,
}

/// Extended clutter texture: a fixed received power injected at one gate
/// of one beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedClutter {
    pub beam: usize,
    pub gate: usize,
    /// Received power after compression (W).
    pub power: f64,
    pub phase_jitter: f64,
}

impl ClutterScene {
    pub fn validate(&self) -> Result<()> {
        if self
            .points
            .iter()
            .any(|p| p.rcs < 0.0 || p.phase_jitter < 0.0)
        {
            return Err(Error::invalid("RCS and phase jitter must be >= 0"));
        }
        if self
            .extended
            .iter()
            .any(|e| e.power < 0.0 || e.phase_jitter < 0.0)
        {
            return Err(Error::invalid("power and phase jitter must be >= 0"));
        }
        Ok(())
    }
}

/// Received power of a point target of cross section `rcs` at range `r` on
/// boresight, after pulse compression (W).
pub fn point_target_power(spec: &RadarSystemSpec, rcs: f64, range: f64) -> f64 {
    let lambda = spec.wavelength();
    spec.peak_power
        * spec.max_gain
        * spec.max_gain
        * lambda
        * lambda
        * rcs
        * (spec.bandwidth * spec.pulse_len)
        / ((4.0 * std::f64::consts::PI).powi(3) * range.powi(4))
}

/// Cross section a boresight point target needs to produce `p_rx` watts at
/// range `r` after compression. Used to stage clutter-to-signal ratios.
pub fn rcs_for_received_power(spec: &RadarSystemSpec, p_rx: f64, range: f64) -> f64 {
    let lambda = spec.wavelength();
    p_rx * (4.0 * std::f64::consts::PI).powi(3) * range.powi(4)
        / (spec.peak_power
            * spec.max_gain
            * spec.max_gain
            * lambda
            * lambda
            * spec.bandwidth
            * spec.pulse_len)
}

/// Ground truth of one synthesized gate, for verification sidecars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthCell {
    /// Linear reflectivity at the gate (mm⁶ m⁻³); 0 where no rain.
    pub z: f64,
    /// Radial velocity (m/s, positive away).
    pub v_radial: f64,
    /// Spectrum width (m/s).
    pub width: f64,
    /// Two-way path loss at the gate.
    pub l2: f64,
    /// Whether the gate sits inside the transmit/guard blind zone.
    pub blind: bool,
    /// Whether any clutter component lands on this gate.
    pub cluttered: bool,
}

struct GateGeometry {
    sample: Option<FieldSample>,
    v_radial: f64,
    l2: f64,
    blind: bool,
}

/// Per-gate rain/attenuation geometry along one beam.
fn beam_gates(
    field: &RainField,
    beam: &BeamGeometry,
    frame: &FrameTiming,
    n_gates: usize,
    t: f64,
) -> Result<Vec<GateGeometry>> {
    let dr = frame.range_step();
    let blind = frame.blind_range();
    let (east, north) = beam.line_of_sight();
    let cos_el = beam.elevation.cos();
    let v_radial = field.radial_velocity(beam.azimuth, beam.elevation);
    let mut out = Vec::with_capacity(n_gates);
    let mut pia = 0.0;
    let mut prev_ke = 0.0;
    for m in 0..n_gates {
        let r = m as f64 * dr;
        let x = beam.site_position[0] + r * cos_el * east;
        let y = beam.site_position[1] + r * cos_el * north;
        let sample = field.sample(x, y, t);
        let is_blind = r < blind;
        if sample.is_none() && !is_blind {
            return Err(Error::invalid(format!(
                "gate {m} at ({x:.0}, {y:.0}) m lies outside the rain field"
            )));
        }
        let ke = sample.map(|s| s.k_e).unwrap_or(0.0);
        if m > 0 {
            pia += 0.5 * (prev_ke + ke) * dr;
        }
        prev_ke = ke;
        out.push(GateGeometry {
            sample,
            v_radial,
            l2: (-2.0 * pia).exp(),
            blind: is_blind,
        });
    }
    Ok(out)
}

/// Synthesizes one sweep of I/Q data for the given scene.
///
/// Per (beam, gate): a rain component with Gaussian Doppler spectrum and
/// power `C_g Z / r² L²`, clutter-point returns weighted by the two-way
/// antenna pattern, and white receiver noise at `k_B T₀ B F_n`. Gates
/// inside the blind zone carry noise only. The per-beam radar constant is
/// the calibrated `BeamGeometry::radar_constant` when present, otherwise
/// composed from `spec` with unit antenna correction.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_iq(
    field: &RainField,
    clutter: &ClutterScene,
    spec: &RadarSystemSpec,
    frame: &FrameTiming,
    beams: &[BeamGeometry],
    n_gates: usize,
    timestamp: f64,
    seed: u64,
) -> Result<IqCube> {
    spec.validate()?;
    clutter.validate()?;
    if beams.is_empty() {
        return Err(Error::invalid("need at least one beam"));
    }
    let n_pulses = frame.pulses_per_beam;
    let dr = frame.range_step();
    let noise_power = spec.noise_power() * spec.noise_figure;
    let composed_constant = radar_constant(spec, 1.0, PowerReference::AfterCompression)?;
    let lambda = frame.wavelength();
    let mut samples = Array3::<Complex64>::zeros((beams.len(), n_pulses, n_gates));

    for (g, beam) in beams.iter().enumerate() {
        beam.validate()?;
        let constant = beam.radar_constant.unwrap_or(composed_constant);
        let gates = beam_gates(field, beam, frame, n_gates, timestamp)?;
        // Rain + noise per gate.
        for (m, gate) in gates.iter().enumerate() {
            let mut series = vec![Complex64::new(0.0, 0.0); n_pulses];
            if !gate.blind {
                if let Some(s) = gate.sample {
                    let r = m as f64 * dr;
                    if r > 0.0 {
                        let power = constant * s.z * gate.l2 / (r * r);
                        if power > 0.0 {
                            let mut rng = stream_rng(seed, &[1, g as u64, m as u64]);
                            let center = -2.0 * gate.v_radial / lambda;
                            let width_hz = 2.0 * s.width / lambda;
                            rain_series(
                                &mut series,
                                power,
                                center,
                                width_hz,
                                frame.pulse_interval,
                                &mut rng,
                            );
                        }
                    }
                }
            }
            let mut noise_rng = stream_rng(seed, &[3, g as u64, m as u64]);
            let noise_amp = noise_power.sqrt();
            for v in series.iter_mut() {
                *v += complex_normal(&mut noise_rng) * noise_amp;
            }
            for (p, v) in series.into_iter().enumerate() {
                samples[[g, p, m]] = v;
            }
        }
        // Point clutter, attenuated by the two-way loss at its gate.
        for (idx, point) in clutter.points.iter().enumerate() {
            let dx = point.position[0] - beam.site_position[0];
            let dy = point.position[1] - beam.site_position[1];
            let dz = point.position[2] - beam.site_position[2];
            let horizontal = (dx * dx + dy * dy).sqrt();
            let range = (horizontal * horizontal + dz * dz).sqrt();
            if range <= 0.0 {
                continue;
            }
            let gate = (range / dr).round() as usize;
            if gate >= n_gates || gates[gate].blind {
                continue;
            }
            let az = dx.atan2(dy);
            let el = dz.atan2(horizontal);
            let gain = spec.pattern.gain(
                wrap_angle(az - beam.azimuth),
                el - beam.elevation,
                beam.hpbw_az,
                beam.hpbw_el,
            );
            let power = point_target_power(spec, point.rcs, range) * gain * gain * gates[gate].l2;
            if power <= 0.0 {
                continue;
            }
            let mut rng = stream_rng(seed, &[2, g as u64, idx as u64]);
            add_clutter_series(
                &mut samples,
                g,
                gate,
                power,
                point.phase_jitter,
                n_pulses,
                &mut rng,
            );
        }
        // Extended clutter pinned to cells of this beam.
        for (idx, ext) in clutter.extended.iter().enumerate() {
            if ext.beam != g || ext.gate >= n_gates || gates[ext.gate].blind {
                continue;
            }
            let mut rng = stream_rng(seed, &[4, g as u64, idx as u64]);
            add_clutter_series(
                &mut samples,
                g,
                ext.gate,
                ext.power * gates[ext.gate].l2,
                ext.phase_jitter,
                n_pulses,
                &mut rng,
            );
        }
    }
    IqCube::new(samples, frame.clone(), beams.to_vec(), timestamp)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Draws a stationary complex Gaussian series with a (wrapped) Gaussian
/// PSD and mean power `power` into `series`.
fn rain_series<R: Rng>(
    series: &mut [Complex64],
    power: f64,
    center_hz: f64,
    width_hz: f64,
    pulse_interval: f64,
    rng: &mut R,
) {
    let n = series.len();
    let band = 1.0 / pulse_interval;
    let df = band / n as f64;
    let mut weights = vec![0.0f64; n];
    if width_hz < df * 1e-3 {
        // Degenerate width: a single-bin line.
        let mut best = 0usize;
        let mut best_d = f64::MAX;
        for (j, w) in weights.iter_mut().enumerate() {
            let f = fft_bin_frequency(j, n, df);
            let d = wrapped_offset(f, center_hz, band).abs();
            if d < best_d {
                best_d = d;
                best = j;
            }
            *w = 0.0;
        }
        weights[best] = 1.0;
    } else {
        for (j, w) in weights.iter_mut().enumerate() {
            let f = fft_bin_frequency(j, n, df);
            // Periodic continuation keeps lines near the band edge intact.
            let mut acc = 0.0;
            for wrap in -1..=1 {
                let d = f - center_hz + wrap as f64 * band;
                acc += (-d * d / (2.0 * width_hz * width_hz)).exp();
            }
            *w = acc;
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return;
    }
    // E|x_p|^2 = power requires sum of spectral variances = n^2 * power.
    let scale = (n as f64) * (n as f64) * power / total;
    let mut spec: Vec<Complex64> = weights
        .iter()
        .map(|&w| complex_normal(rng) * (w * scale).sqrt())
        .collect();
    ifft_in_place(&mut spec);
    for (s, v) in series.iter_mut().zip(spec) {
        *s += v;
    }
}

fn fft_bin_frequency(j: usize, n: usize, df: f64) -> f64 {
    if j < n / 2 {
        j as f64 * df
    } else {
        (j as f64 - n as f64) * df
    }
}

fn wrapped_offset(f: f64, center: f64, band: f64) -> f64 {
    let mut d = (f - center) % band;
    if d > band / 2.0 {
        d -= band;
    } else if d < -band / 2.0 {
        d += band;
    }
    d
}

fn add_clutter_series<R: Rng>(
    samples: &mut Array3<Complex64>,
    beam: usize,
    gate: usize,
    power: f64,
    phase_jitter: f64,
    n_pulses: usize,
    rng: &mut R,
) {
    let amplitude = power.sqrt();
    let theta0: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    for p in 0..n_pulses {
        let phase = if phase_jitter > 0.0 {
            theta0 + phase_jitter * StandardNormal.sample(rng)
        } else {
            theta0
        };
        samples[[beam, p, gate]] += Complex64::from_polar(amplitude, phase);
    }
}

/// Ground truth per (beam, gate) for the same geometry `synthesize_iq`
/// uses, for verification sidecars and bias tests.
#[allow(clippy::too_many_arguments)]
pub fn ground_truth(
    field: &RainField,
    clutter: &ClutterScene,
    spec: &RadarSystemSpec,
    frame: &FrameTiming,
    beams: &[BeamGeometry],
    n_gates: usize,
    timestamp: f64,
) -> Result<Array2<TruthCell>> {
    let dr = frame.range_step();
    let mut out = Array2::from_elem(
        (beams.len(), n_gates),
        TruthCell {
            z: 0.0,
            v_radial: 0.0,
            width: 0.0,
            l2: 1.0,
            blind: true,
            cluttered: false,
        },
    );
    for (g, beam) in beams.iter().enumerate() {
        let gates = beam_gates(field, beam, frame, n_gates, timestamp)?;
        for (m, gate) in gates.iter().enumerate() {
            out[[g, m]] = TruthCell {
                z: gate.sample.map(|s| s.z).unwrap_or(0.0),
                v_radial: gate.v_radial,
                width: gate.sample.map(|s| s.width).unwrap_or(0.0),
                l2: gate.l2,
                blind: gate.blind,
                cluttered: false,
            };
        }
        for point in &clutter.points {
            let dx = point.position[0] - beam.site_position[0];
            let dy = point.position[1] - beam.site_position[1];
            let dz = point.position[2] - beam.site_position[2];
            let range = (dx * dx + dy * dy + dz * dz).sqrt();
            let gate = (range / dr).round() as usize;
            // Count the point only for beams where its two-way pattern
            // weight is non-negligible.
            let az = dx.atan2(dy);
            let gain = spec.pattern.gain(
                wrap_angle(az - beam.azimuth),
                dz.atan2((dx * dx + dy * dy).sqrt()) - beam.elevation,
                beam.hpbw_az,
                beam.hpbw_el,
            );
            if gate < n_gates && gain * gain > 1e-6 {
                out[[g, gate]].cluttered = true;
            }
        }
        for ext in &clutter.extended {
            if ext.beam == g && ext.gate < n_gates {
                out[[g, ext.gate]].cluttered = true;
            }
        }
    }
    Ok(out)
}

/// One site's acquisition geometry for two-site projection.
#[derive(Debug, Clone)]
pub struct SiteGeometry {
    pub beams: Vec<BeamGeometry>,
    pub frame: FrameTiming,
    pub n_gates: usize,
}

impl SiteGeometry {
    fn position(&self) -> [f64; 3] {
        self.beams
            .first()
            .map(|b| b.site_position)
            .unwrap_or([0.0; 3])
    }

    /// The (beam, gate) cell observing the horizontal position `(x, y)`,
    /// if any beam's azimuth sector and range interval cover it.
    pub fn observing_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let pos = self.position();
        let dx = x - pos[0];
        let dy = y - pos[1];
        let r = (dx * dx + dy * dy).sqrt();
        if r < self.frame.blind_range() || r > self.n_gates as f64 * self.frame.range_step() {
            return None;
        }
        let az = dx.atan2(dy);
        let mut best: Option<(usize, f64)> = None;
        for (i, beam) in self.beams.iter().enumerate() {
            let d = wrap_angle(az - beam.azimuth).abs();
            if d <= beam.hpbw_az / 2.0 && best.map(|(_, bd)| d < bd).unwrap_or(true) {
                best = Some((i, d));
            }
        }
        let (beam, _) = best?;
        let gate = (r / self.frame.range_step()).round() as usize;
        if gate >= self.n_gates {
            return None;
        }
        Some((beam, gate))
    }

    /// Horizontal line-of-sight unit vector from the site to `(x, y)`.
    pub fn line_of_sight_to(&self, x: f64, y: f64) -> (f64, f64) {
        let pos = self.position();
        let dx = x - pos[0];
        let dy = y - pos[1];
        let r = (dx * dx + dy * dy).sqrt().max(1e-12);
        (dx / r, dy / r)
    }
}

/// Regular horizontal grid both sites are projected onto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommonGrid {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

/// One common-grid cell visible from both sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedCell {
    pub cell: (usize, usize),
    /// Cell centre (m).
    pub position: [f64; 2],
    /// (beam, gate) of site A sampling this cell.
    pub site_a: (usize, usize),
    /// (beam, gate) of site B sampling this cell.
    pub site_b: (usize, usize),
    /// Horizontal line-of-sight unit vectors from each site.
    pub los_a: (f64, f64),
    pub los_b: (f64, f64),
}

/// Pairs, for every common-grid cell, the (beam, gate) indices with which
/// each site samples it; cells seen by only one site are dropped.
pub fn project_two_sites(
    site_a: &SiteGeometry,
    site_b: &SiteGeometry,
    grid: &CommonGrid,
) -> Vec<PairedCell> {
    let mut out = Vec::new();
    for ix in 0..grid.nx {
        for iy in 0..grid.ny {
            let x = grid.origin[0] + ix as f64 * grid.spacing;
            let y = grid.origin[1] + iy as f64 * grid.spacing;
            let (Some(a), Some(b)) = (site_a.observing_cell(x, y), site_b.observing_cell(x, y))
            else {
                continue;
            };
            out.push(PairedCell {
                cell: (ix, iy),
                position: [x, y],
                site_a: a,
                site_b: b,
                los_a: site_a.line_of_sight_to(x, y),
                los_b: site_b.line_of_sight_to(x, y),
            });
        }
    }
    out
}
