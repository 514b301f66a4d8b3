//! Drop-size-distribution microphysics: rain-intensity integral, terminal
//! fall velocity, standard-atmosphere density, disdrometer record
//! ingestion, and Z–R power-law fitting.

use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{reflectivity_from_dsd, ScatteringTable};

/// Sea-level air density of the international standard atmosphere (kg/m³).
pub const SEA_LEVEL_DENSITY: f64 = 1.225;
const ISA_ALPHA: f64 = 2.2558e-5;
const ISA_BETA: f64 = 4.256;
/// Lowest plausible site altitude (Dead Sea floor), metres.
pub const MIN_ALTITUDE: f64 = -430.0;

/// Air density at altitude `h` m a.s.l. from the international standard
/// atmosphere: `ρ_h = ρ₀ (1 - α h)^β`.
///
/// Valid for `MIN_ALTITUDE <= h < 1/α` (≈ 44.3 km).
pub fn air_density(altitude: f64) -> Result<f64> {
    if !(MIN_ALTITUDE..1.0 / ISA_ALPHA).contains(&altitude) {
        return Err(Error::invalid(format!(
            "altitude {altitude} m outside [{MIN_ALTITUDE}, {:.0}) m",
            1.0 / ISA_ALPHA
        )));
    }
    Ok(SEA_LEVEL_DENSITY * (1.0 - ISA_ALPHA * altitude).powf(ISA_BETA))
}

/// Terminal fall velocity in still air of a drop of diameter `d` mm at
/// altitude `h` m a.s.l. (m/s):
/// `v = (9.65 - 10.3 e^(-0.6 D)) (ρ₀/ρ_h)^(0.375 + 0.025 D)`, clamped at 0
/// where the sea-level form goes negative (D below ≈ 0.11 mm).
pub fn terminal_velocity(diameter_mm: f64, altitude: f64) -> Result<f64> {
    if !(diameter_mm > 0.0) {
        return Err(Error::invalid("diameter must be positive"));
    }
    let v0 = 9.65 - 10.3 * (-0.6 * diameter_mm).exp();
    if v0 <= 0.0 {
        return Ok(0.0);
    }
    let density_ratio = SEA_LEVEL_DENSITY / air_density(altitude)?;
    Ok(v0 * density_ratio.powf(0.375 + 0.025 * diameter_mm))
}

/// One-minute drop size distribution on a diameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DsdRecord {
    /// Seconds since epoch.
    pub timestamp: f64,
    pub site_id: String,
    /// Site altitude (m a.s.l.).
    pub altitude: f64,
    /// Bin centre diameters (mm), strictly increasing.
    pub diameters: Vec<f64>,
    /// Bin widths (mm).
    pub bin_widths: Vec<f64>,
    /// Concentrations N(D) (m⁻³ mm⁻¹).
    pub concentrations: Vec<f64>,
}

impl DsdRecord {
    pub fn validate(&self) -> Result<()> {
        let n = self.diameters.len();
        if self.bin_widths.len() != n || self.concentrations.len() != n {
            return Err(Error::dims("DSD columns must have equal length"));
        }
        if n == 0 {
            return Err(Error::invalid("DSD record has no bins"));
        }
        if !self.diameters.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::invalid("diameter bins must be strictly increasing"));
        }
        if self.diameters[0] <= 0.0 {
            return Err(Error::invalid("diameters must be positive"));
        }
        if self.bin_widths.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::invalid("bin widths must be positive"));
        }
        if self
            .concentrations
            .iter()
            .any(|&c| c < 0.0 || !c.is_finite())
        {
            return Err(Error::invalid("concentrations must be >= 0"));
        }
        if self.altitude < MIN_ALTITUDE {
            return Err(Error::invalid(format!(
                "altitude {} below {MIN_ALTITUDE} m",
                self.altitude
            )));
        }
        Ok(())
    }

    /// Rain intensity of this record at its own site altitude (mm/h).
    pub fn rain_intensity(&self) -> Result<f64> {
        self.validate()?;
        rain_intensity_at(
            &self.diameters,
            &self.bin_widths,
            &self.concentrations,
            self.altitude,
        )
    }
}

/// Rain intensity `R = 6π·10⁻⁴ Σ v(D, h) N(D) D³ dD` (mm/h) as a bin sum
/// over the diameter grid.
pub fn rain_intensity_at(
    diameters: &[f64],
    bin_widths: &[f64],
    concentrations: &[f64],
    altitude: f64,
) -> Result<f64> {
    if diameters.len() != bin_widths.len() || diameters.len() != concentrations.len() {
        return Err(Error::dims("DSD columns must have equal length"));
    }
    let mut sum = 0.0;
    for ((&d, &dd), &n) in diameters.iter().zip(bin_widths).zip(concentrations) {
        sum += terminal_velocity(d, altitude)? * n * d.powi(3) * dd;
    }
    Ok(6.0 * std::f64::consts::PI * 1e-4 * sum)
}

/// Where a pair of Z–R coefficients came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZrProvenance {
    MarshallPalmer,
    Tuned,
    Fitted,
}

/// Least-squares diagnostics of a fitted Z–R relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZrFitDiagnostics {
    pub n_samples: usize,
    /// Standard deviation of `10 log10(Z) - 10 log10(a R^b)` (dB).
    pub residual_db: f64,
}

/// Coefficients of the power law `Z = a R^b` (Z in mm⁶ m⁻³, R in mm/h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZrCoefficients {
    pub a: f64,
    pub b: f64,
    pub provenance: ZrProvenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ZrFitDiagnostics>,
}

impl ZrCoefficients {
    pub fn new(a: f64, b: f64, provenance: ZrProvenance) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::invalid(format!(
                "Z-R coefficients must be positive, got a={a}, b={b}"
            )));
        }
        Ok(ZrCoefficients {
            a,
            b,
            provenance,
            diagnostics: None,
        })
    }

    /// Classic Marshall–Palmer reference relation (a = 200, b = 1.6).
    pub fn marshall_palmer() -> Self {
        ZrCoefficients {
            a: 200.0,
            b: 1.6,
            provenance: ZrProvenance::MarshallPalmer,
            diagnostics: None,
        }
    }

    /// Relation tuned for the slant-polarized 4.9 GHz base-station setting
    /// on a large disdrometer record set (a = 92.0563, b = 2.1363).
    pub fn bs_tuned() -> Self {
        ZrCoefficients {
            a: 92.0563,
            b: 2.1363,
            provenance: ZrProvenance::Tuned,
            diagnostics: None,
        }
    }
}

/// Rain rate from reflectivity: `R = (Z/a)^(1/b)` (mm/h).
pub fn z_to_r(z: f64, coeffs: &ZrCoefficients) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::invalid("Z must be positive"));
    }
    Ok((z / coeffs.a).powf(1.0 / coeffs.b))
}

/// Reflectivity from rain rate: `Z = a R^b` (mm⁶ m⁻³).
pub fn r_to_z(r: f64, coeffs: &ZrCoefficients) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("R must be positive"));
    }
    Ok(coeffs.a * r.powf(coeffs.b))
}

/// Least-squares fit of `log10 Z = log10 a + b log10 R` over `(Z, R)`
/// pairs. Requires at least 10 positive pairs and non-degenerate rain
/// rates.
pub fn fit_zr(pairs: &[(f64, f64)]) -> Result<ZrCoefficients> {
    if pairs.len() < 10 {
        return Err(Error::invalid(format!(
            "need at least 10 pairs, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|&(z, r)| !(z > 0.0) || !(r > 0.0)) {
        return Err(Error::invalid("all (Z, R) pairs must be positive"));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|&(_, r)| r.log10()).collect();
    let ys: Vec<f64> = pairs.iter().map(|&(z, _)| z.log10()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx < 1e-18 {
        return Err(Error::FitSingular(
            "all rain rates are equal; the slope is undetermined".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let b = sxy / sxx;
    let log_a = y_mean - b * x_mean;
    let a = 10f64.powf(log_a);
    // Residual spread in dB: 10*(log10 Z - (log_a + b log10 R)).
    let residual_db = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (10.0 * (y - (log_a + b * x))).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mut coeffs = ZrCoefficients::new(a, b, ZrProvenance::Fitted)?;
    coeffs.diagnostics = Some(ZrFitDiagnostics {
        n_samples: pairs.len(),
        residual_db,
    });
    Ok(coeffs)
}

/// Options for [`tune_zr`]: the record-to-(Z, R) simulation.
#[derive(Debug, Clone)]
pub struct ZrTuningOptions {
    /// Common altitude both Z and R are evaluated at (m a.s.l.).
    pub altitude: f64,
    /// Standard deviation of the zero-mean Gaussian perturbation applied
    /// to Z in dB, modelling sampling-volume mismatch.
    pub noise_db: f64,
    pub seed: u64,
    /// Diameter integration range (mm); mass outside is dropped.
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for ZrTuningOptions {
    fn default() -> Self {
        ZrTuningOptions {
            altitude: 0.0,
            noise_db: 1.0,
            seed: 0,
            d_min: 0.1,
            d_max: 8.0,
        }
    }
}

/// Simulates one `(Z, R)` pair per DSD record (reflectivity through the
/// scattering table, rain intensity through the fall-velocity moment, both
/// at a common altitude), perturbs Z with Gaussian dB noise, and fits the
/// power law. Records with no bins inside `[d_min, d_max]` or zero rain
/// are skipped.
pub fn tune_zr(
    records: &[DsdRecord],
    table: &ScatteringTable,
    wavelength_m: f64,
    dielectric_factor: f64,
    opts: &ZrTuningOptions,
) -> Result<ZrCoefficients> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pairs = Vec::with_capacity(records.len());
    for rec in records {
        rec.validate()?;
        let keep: Vec<usize> = (0..rec.diameters.len())
            .filter(|&i| rec.diameters[i] >= opts.d_min && rec.diameters[i] <= opts.d_max)
            .collect();
        if keep.len() < 2 {
            continue;
        }
        let d: Vec<f64> = keep.iter().map(|&i| rec.diameters[i]).collect();
        let dd: Vec<f64> = keep.iter().map(|&i| rec.bin_widths[i]).collect();
        let nd: Vec<f64> = keep.iter().map(|&i| rec.concentrations[i]).collect();
        let r = rain_intensity_at(&d, &dd, &nd, opts.altitude)?;
        if !(r > 0.0) {
            continue;
        }
        let z = reflectivity_from_dsd(&d, &nd, table, wavelength_m, dielectric_factor)?;
        if !(z > 0.0) {
            continue;
        }
        let noise: f64 = rng.sample::<f64, _>(crate::rng::StandardNormal) * opts.noise_db;
        let z_noisy = z * 10f64.powf(noise / 10.0);
        pairs.push((z_noisy, r));
    }
    fit_zr(&pairs)
}

/// One ingestion problem, tied to a 1-based source line.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestDiagnostic {
    pub line: usize,
    pub message: String,
}

const DISDROMETER_HEADER: &str =
    "timestamp_s,site_id,altitude_m,d_center_mm,d_width_mm,n_per_m3_mm";

/// Reads a disdrometer file: a CSV with the header line
/// `timestamp_s,site_id,altitude_m,d_center_mm,d_width_mm,n_per_m3_mm`,
/// one diameter bin per row, consecutive rows with the same
/// `(timestamp, site_id)` forming one record. Decimal points only, no
/// locale-dependent parsing.
///
/// Malformed rows and invalid records are skipped and reported as
/// line-numbered diagnostics; an empty file yields an empty list plus a
/// warning diagnostic.
pub fn ingest_disdrometer(path: &Path) -> Result<(Vec<DsdRecord>, Vec<IngestDiagnostic>)> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();

    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => {
                diagnostics.push(IngestDiagnostic {
                    line: 0,
                    message: "empty disdrometer file".into(),
                });
                return Ok((records, diagnostics));
            }
            Some((idx, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break (idx + 1, line);
            }
        }
    };
    if header.1.trim() != DISDROMETER_HEADER {
        return Err(Error::FormatViolation {
            path: path.display().to_string(),
            reason: format!(
                "bad header at line {}: expected '{DISDROMETER_HEADER}'",
                header.0
            ),
        });
    }

    struct Pending {
        timestamp: f64,
        site_id: String,
        altitude: f64,
        rows: Vec<(f64, f64, f64)>,
        first_line: usize,
    }

    let mut pending: Option<Pending> = None;

    let flush = |p: Pending, records: &mut Vec<DsdRecord>, diags: &mut Vec<IngestDiagnostic>| {
        let record = DsdRecord {
            timestamp: p.timestamp,
            site_id: p.site_id,
            altitude: p.altitude,
            diameters: p.rows.iter().map(|r| r.0).collect(),
            bin_widths: p.rows.iter().map(|r| r.1).collect(),
            concentrations: p.rows.iter().map(|r| r.2).collect(),
        };
        match record.validate() {
            Ok(()) => records.push(record),
            Err(e) => diags.push(IngestDiagnostic {
                line: p.first_line,
                message: format!("record rejected: {e}"),
            }),
        }
    };

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            diagnostics.push(IngestDiagnostic {
                line: lineno,
                message: format!("expected 6 fields, got {}", fields.len()),
            });
            continue;
        }
        let parse = |s: &str, what: &str| -> std::result::Result<f64, String> {
            s.parse::<f64>()
                .map_err(|_| format!("cannot parse {what} '{s}'"))
        };
        let parsed = (|| {
            Ok::<_, String>((
                parse(fields[0], "timestamp")?,
                fields[1].to_string(),
                parse(fields[2], "altitude")?,
                parse(fields[3], "diameter")?,
                parse(fields[4], "bin width")?,
                parse(fields[5], "concentration")?,
            ))
        })();
        let (ts, site, alt, d, dd, n) = match parsed {
            Ok(v) => v,
            Err(message) => {
                diagnostics.push(IngestDiagnostic {
                    line: lineno,
                    message,
                });
                continue;
            }
        };
        let same_group = pending
            .as_ref()
            .map(|p| p.timestamp == ts && p.site_id == site)
            .unwrap_or(false);
        if same_group {
            pending.as_mut().unwrap().rows.push((d, dd, n));
        } else {
            if let Some(p) = pending.take() {
                flush(p, &mut records, &mut diagnostics);
            }
            pending = Some(Pending {
                timestamp: ts,
                site_id: site,
                altitude: alt,
                rows: vec![(d, dd, n)],
                first_line: lineno,
            });
        }
    }
    if let Some(p) = pending.take() {
        flush(p, &mut records, &mut diagnostics);
    }
    Ok((records, diagnostics))
}

/// Writes records in the format read by [`ingest_disdrometer`]. Floats are
/// printed with Rust's shortest round-trip representation, so a
/// write-then-read cycle is bit-exact.
pub fn write_disdrometer(path: &Path, records: &[DsdRecord]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{DISDROMETER_HEADER}")?;
    for rec in records {
        rec.validate()?;
        for i in 0..rec.diameters.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                rec.timestamp,
                rec.site_id,
                rec.altitude,
                rec.diameters[i],
                rec.bin_widths[i],
                rec.concentrations[i]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SPEED_OF_LIGHT;
    use proptest::prelude::*;

    fn exponential_record(n0: f64, slope: f64) -> DsdRecord {
        let diameters: Vec<f64> = (0..=79).map(|i| 0.15 + i as f64 * 0.1).collect();
        let concentrations = diameters.iter().map(|&d| n0 * (-slope * d).exp()).collect();
        DsdRecord {
            timestamp: 60.0,
            site_id: "site-a".into(),
            altitude: 0.0,
            bin_widths: vec![0.1; diameters.len()],
            diameters,
            concentrations,
        }
    }

    #[test]
    fn sea_level_density() {
        assert_eq!(air_density(0.0).unwrap(), 1.225);
    }

    #[test]
    fn density_golden_at_1000m() {
        let rho = air_density(1000.0).unwrap();
        assert!((rho - 1.1116379623452555).abs() < 1e-12);
    }

    #[test]
    fn density_strictly_decreasing() {
        let mut prev = air_density(0.0).unwrap();
        for h in (500..40_000).step_by(500) {
            let rho = air_density(h as f64).unwrap();
            assert!(rho < prev, "not decreasing at {h} m");
            prev = rho;
        }
    }

    #[test]
    fn density_rejects_out_of_domain() {
        assert!(air_density(-500.0).is_err());
        assert!(air_density(50_000.0).is_err());
    }

    #[test]
    fn terminal_velocity_sea_level_golden() {
        let v = terminal_velocity(1.0, 0.0).unwrap();
        assert!((v - 3.997240148231528).abs() < 1e-12);
    }

    #[test]
    fn terminal_velocity_asymptote() {
        // Large-drop limit tends to 9.65 m/s (0.26% off at D = 10 mm).
        let v = terminal_velocity(10.0, 0.0).unwrap();
        assert!((v - 9.65).abs() / 9.65 < 0.01);
        assert!(terminal_velocity(30.0, 0.0).unwrap() < 9.65);
    }

    #[test]
    fn terminal_velocity_clamped_for_tiny_drops() {
        assert_eq!(terminal_velocity(0.05, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn terminal_velocity_increases_with_altitude() {
        for d in [0.5, 1.0, 3.0, 6.0] {
            let v0 = terminal_velocity(d, 0.0).unwrap();
            let v2k = terminal_velocity(d, 2000.0).unwrap();
            assert!(v2k > v0, "D={d}: {v2k} <= {v0}");
        }
    }

    #[test]
    fn rain_intensity_zero_dsd() {
        let mut rec = exponential_record(8000.0, 3.0);
        rec.concentrations.iter_mut().for_each(|c| *c = 0.0);
        assert_eq!(rec.rain_intensity().unwrap(), 0.0);
    }

    #[test]
    fn rain_intensity_monodisperse_closed_form() {
        let rec = DsdRecord {
            timestamp: 0.0,
            site_id: "x".into(),
            altitude: 0.0,
            diameters: vec![1.5],
            bin_widths: vec![0.2],
            concentrations: vec![450.0],
        };
        let v = terminal_velocity(1.5, 0.0).unwrap();
        let expected = 6.0 * std::f64::consts::PI * 1e-4 * v * 450.0 * 1.5f64.powi(3) * 0.2;
        assert!((rec.rain_intensity().unwrap() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn rain_intensity_matches_fine_grid_oracle() {
        // Exponential DSD on 0.1 mm bins vs the same integral on 0.01 mm bins.
        let coarse = exponential_record(8000.0, 3.0);
        let r_coarse = coarse.rain_intensity().unwrap();
        let fine_d: Vec<f64> = (0..=7990).map(|i| 0.105 + i as f64 * 0.001).collect();
        let fine_n: Vec<f64> = fine_d.iter().map(|&d| 8000.0 * (-3.0 * d).exp()).collect();
        let r_fine = rain_intensity_at(&fine_d, &vec![0.001; fine_d.len()], &fine_n, 0.0).unwrap();
        assert!(
            (r_coarse - r_fine).abs() / r_fine < 1e-3,
            "coarse={r_coarse}, fine={r_fine}"
        );
    }

    #[test]
    fn record_rejects_non_monotone_bins() {
        let mut rec = exponential_record(8000.0, 3.0);
        rec.diameters.swap(3, 4);
        assert!(rec.validate().is_err());
    }

    #[test]
    fn zr_round_trip_and_unit_rate() {
        for coeffs in [
            ZrCoefficients::marshall_palmer(),
            ZrCoefficients::bs_tuned(),
        ] {
            assert!((r_to_z(1.0, &coeffs).unwrap() - coeffs.a).abs() < 1e-12);
            for r in [0.1, 1.0, 7.3, 120.0] {
                let z = r_to_z(r, &coeffs).unwrap();
                let back = z_to_r(z, &coeffs).unwrap();
                assert!((back - r).abs() < 1e-12 * r);
            }
        }
    }

    #[test]
    fn tuned_coefficients_value() {
        let c = ZrCoefficients::bs_tuned();
        assert!((r_to_z(1.0, &c).unwrap() - 92.0563).abs() < 1e-9);
    }

    #[test]
    fn noiseless_fit_recovers_coefficients() {
        let truth = ZrCoefficients::marshall_palmer();
        let pairs: Vec<(f64, f64)> = (1..=200)
            .map(|i| {
                let r = 0.1 * i as f64;
                (r_to_z(r, &truth).unwrap(), r)
            })
            .collect();
        let fit = fit_zr(&pairs).unwrap();
        assert!((fit.a - truth.a).abs() / truth.a < 1e-6);
        assert!((fit.b - truth.b).abs() / truth.b < 1e-6);
        assert!(fit.diagnostics.unwrap().residual_db < 1e-9);
    }

    #[test]
    fn fit_rejects_degenerate_rain_rates() {
        let pairs = vec![(200.0, 1.0); 20];
        assert!(matches!(fit_zr(&pairs), Err(Error::FitSingular(_))));
    }

    #[test]
    fn fit_rejects_too_few_pairs() {
        let pairs = vec![(200.0, 1.0); 5];
        assert!(fit_zr(&pairs).is_err());
    }

    #[test]
    fn fit_scale_consistency() {
        // Scaling every Z by c scales a by c and leaves b unchanged.
        let truth = ZrCoefficients::bs_tuned();
        let pairs: Vec<(f64, f64)> = (1..=100)
            .map(|i| {
                let r = 0.2 * i as f64;
                (r_to_z(r, &truth).unwrap(), r)
            })
            .collect();
        let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(z, r)| (3.5 * z, r)).collect();
        let f0 = fit_zr(&pairs).unwrap();
        let f1 = fit_zr(&scaled).unwrap();
        assert!((f1.a / f0.a - 3.5).abs() < 1e-9);
        assert!((f1.b - f0.b).abs() < 1e-12);
    }

    #[test]
    fn tuning_pipeline_recovers_sixth_moment_relation() {
        // One-parameter exponential family (fixed intercept, varying
        // slope): its Z-R locus is close to a power law, so the fitted
        // relation must reproduce every simulated pair tightly.
        let records: Vec<DsdRecord> = (0..60)
            .map(|i| exponential_record(8000.0, 2.0 + 0.04 * i as f64))
            .collect();
        let grid: Vec<f64> = (0..=79).map(|i| 0.15 + i as f64 * 0.1).collect();
        let table = ScatteringTable::rayleigh(4.9e9, 0.93, grid).unwrap();
        let opts = ZrTuningOptions {
            noise_db: 0.0,
            ..Default::default()
        };
        let fit = tune_zr(&records, &table, SPEED_OF_LIGHT / 4.9e9, 0.93, &opts).unwrap();
        assert_eq!(fit.provenance, ZrProvenance::Fitted);
        // Check the fit reproduces each simulated pair within its residual.
        for rec in &records {
            let r = rain_intensity_at(&rec.diameters, &rec.bin_widths, &rec.concentrations, 0.0)
                .unwrap();
            let z = crate::physics::reflectivity_from_dsd(
                &rec.diameters,
                &rec.concentrations,
                &table,
                SPEED_OF_LIGHT / 4.9e9,
                0.93,
            )
            .unwrap();
            let z_hat = r_to_z(r, &fit).unwrap();
            assert!((10.0 * (z_hat / z).log10()).abs() < 1.0, "off by >1 dB");
        }
    }

    #[test]
    fn disdrometer_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dsd.csv");
        let rec = exponential_record(8123.456789, 2.987654321);
        write_disdrometer(&path, std::slice::from_ref(&rec)).unwrap();
        let (records, diags) = ingest_disdrometer(&path).unwrap();
        assert!(diags.is_empty());
        assert_eq!(records.len(), 1);
        assert_eq!(records[0], rec);
        // Second write produces identical bytes.
        let path2 = dir.path().join("dsd2.csv");
        write_disdrometer(&path2, &records).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn disdrometer_empty_file_warns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        let (records, diags) = ingest_disdrometer(&path).unwrap();
        assert!(records.is_empty());
        assert_eq!(diags.len(), 1);
    }

    #[test]
    fn disdrometer_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "time,site\n1,2\n").unwrap();
        assert!(matches!(
            ingest_disdrometer(&path),
            Err(Error::FormatViolation { .. })
        ));
    }

    #[test]
    fn disdrometer_corrupted_rows_are_diagnosed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.csv");
        let mut content = String::from(DISDROMETER_HEADER);
        content.push('\n');
        // Three 2-bin records, with row corruptions inside the second.
        for (ts, ok) in [(60.0, true), (120.0, false), (180.0, true)] {
            for bin in 0..2 {
                if ok || bin == 0 {
                    content.push_str(&format!(
                        "{ts},s1,100.0,{},0.2,5000\n",
                        0.3 + 0.2 * bin as f64
                    ));
                } else {
                    content.push_str(&format!("{ts},s1,100.0,not-a-number,0.2,5000\n"));
                }
            }
        }
        std::fs::write(&path, content).unwrap();
        let (records, diags) = ingest_disdrometer(&path).unwrap();
        // The corrupted row is dropped; its record survives with one bin.
        assert_eq!(records.len(), 3);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 5);
    }

    #[test]
    fn large_file_with_scattered_corruption() {
        // 1000 single-bin records, 3 corrupted rows: 997 records survive
        // with one diagnostic each.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bulk.csv");
        let corrupted = [137usize, 512, 901];
        let mut content = String::from(DISDROMETER_HEADER);
        content.push('\n');
        for rec in 0..1000usize {
            if corrupted.contains(&rec) {
                content.push_str(&format!("{},s1,80.0,0.8,0.2,bad\n", 60 * rec));
            } else {
                content.push_str(&format!("{},s1,80.0,0.8,0.2,{}\n", 60 * rec, 100 + rec));
            }
        }
        std::fs::write(&path, content).unwrap();
        let (records, diags) = ingest_disdrometer(&path).unwrap();
        assert_eq!(records.len(), 997);
        assert_eq!(diags.len(), 3);
        assert_eq!(diags[0].line, 137 + 2); // header offset
    }

    proptest! {
        #[test]
        fn zr_inverses_hold_for_any_positive_inputs(
            r in 1e-3f64..500.0,
            a in 10.0f64..500.0,
            b in 0.8f64..3.0,
        ) {
            let coeffs = ZrCoefficients::new(a, b, ZrProvenance::Fitted).unwrap();
            let z = r_to_z(r, &coeffs).unwrap();
            prop_assert!((z_to_r(z, &coeffs).unwrap() - r).abs() <= 1e-12 * r);
        }

        #[test]
        fn rain_and_reflectivity_monotone_in_concentration(scale in 1.0f64..10.0) {
            let rec = exponential_record(4000.0, 3.0);
            let mut boosted = rec.clone();
            boosted.concentrations.iter_mut().for_each(|c| *c *= scale);
            prop_assert!(boosted.rain_intensity().unwrap() >= rec.rain_intensity().unwrap());
            let table = ScatteringTable::rayleigh(4.9e9, 0.93, rec.diameters.clone()).unwrap();
            let z0 = crate::physics::reflectivity_from_dsd(
                &rec.diameters, &rec.concentrations, &table, SPEED_OF_LIGHT / 4.9e9, 0.93).unwrap();
            let z1 = crate::physics::reflectivity_from_dsd(
                &boosted.diameters, &boosted.concentrations, &table, SPEED_OF_LIGHT / 4.9e9, 0.93).unwrap();
            prop_assert!(z1 >= z0);
        }
    }
}
