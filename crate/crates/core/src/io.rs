//! File formats and configuration: the binary I/Q cube container, product
//! and truth CSV tables, clutter-mask and persistency grids, scattering
//! tables, Z–R coefficient documents, scene and chain configuration.
//!
//! All text formats use the decimal point only and Rust's shortest
//! round-trip float formatting, so writer/reader pairs are bit-exact. The
//! cube container is little-endian binary with an exact byte-count check.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clutter::{InterpConfig, PersistencyMap, SubsampleParams};
use crate::dsd::ZrCoefficients;
use crate::error::{Error, Result};
use crate::physics::{AntennaPattern, RadarSystemSpec, ScatteringTable};
use crate::pipeline::ChainConfig;
use crate::sim::{ClutterScene, CommonGrid, PairedCell, RainFieldConfig, TruthCell};
use crate::types::{
    BeamGeometry, ClutterMask, FrameTiming, GateValidity, IqCube, MaskKind, ProductCell,
    ProductGrid, WindowKind,
};

const CUBE_MAGIC: &[u8; 7] = b"BSWRM01";

fn format_violation(path: &Path, reason: impl Into<String>) -> Error {
    Error::FormatViolation {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// I/Q cube container
// ---------------------------------------------------------------------------

/// Writes a cube: magic `BSWRM01`; `u32` gate/pulse/beam counts; `f64`
/// range step, the four frame intervals, carrier, bandwidths, and
/// timestamp; one geometry block per beam (`u32` id, then azimuth,
/// elevation, beamwidths, gain, site position, and the calibrated constant
/// or NaN); then interleaved 32-bit float I,Q ordered beam-major, pulse,
/// gate.
pub fn write_cube(path: &Path, cube: &IqCube) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(CUBE_MAGIC)?;
    out.write_u32::<LittleEndian>(cube.n_gates() as u32)?;
    out.write_u32::<LittleEndian>(cube.n_pulses() as u32)?;
    out.write_u32::<LittleEndian>(cube.n_beams() as u32)?;
    for v in [
        cube.range_step,
        cube.frame.pulse_interval,
        cube.frame.tx_time,
        cube.frame.guard_time,
        cube.frame.rx_time,
        cube.frame.idle_time,
        cube.frame.carrier_freq,
        cube.frame.bandwidth,
        cube.frame.adc_bandwidth,
        cube.timestamp,
    ] {
        out.write_f64::<LittleEndian>(v)?;
    }
    for beam in &cube.beams {
        out.write_u32::<LittleEndian>(beam.beam_id)?;
        for v in [
            beam.azimuth,
            beam.elevation,
            beam.hpbw_az,
            beam.hpbw_el,
            beam.max_gain,
            beam.site_position[0],
            beam.site_position[1],
            beam.site_position[2],
            beam.radar_constant.unwrap_or(f64::NAN),
        ] {
            out.write_f64::<LittleEndian>(v)?;
        }
    }
    for g in 0..cube.n_beams() {
        for p in 0..cube.n_pulses() {
            for m in 0..cube.n_gates() {
                let s = cube.samples[[g, p, m]];
                out.write_f32::<LittleEndian>(s.re as f32)?;
                out.write_f32::<LittleEndian>(s.im as f32)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a cube written by [`write_cube`], rejecting files whose declared
/// sizes do not match the payload byte count exactly.
pub fn read_cube(path: &Path) -> Result<IqCube> {
    let bytes = std::fs::read(path)?;
    let mut r = std::io::Cursor::new(&bytes);
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)
        .map_err(|_| format_violation(path, "file too short for magic"))?;
    if &magic != CUBE_MAGIC {
        return Err(format_violation(path, "bad magic"));
    }
    let n_gates = r.read_u32::<LittleEndian>()? as usize;
    let n_pulses = r.read_u32::<LittleEndian>()? as usize;
    let n_beams = r.read_u32::<LittleEndian>()? as usize;
    let expected = 7 + 12 + 10 * 8 + n_beams * (4 + 9 * 8) + n_beams * n_pulses * n_gates * 8;
    if bytes.len() != expected {
        return Err(format_violation(
            path,
            format!("size {} does not match declared {expected}", bytes.len()),
        ));
    }
    let mut header = [0.0f64; 10];
    for v in header.iter_mut() {
        *v = r.read_f64::<LittleEndian>()?;
    }
    let [range_step, pulse_interval, tx_time, guard_time, rx_time, idle_time, carrier, bandwidth, adc_bandwidth, timestamp] =
        header;
    let frame = FrameTiming {
        tx_time,
        guard_time,
        rx_time,
        idle_time,
        pulse_interval,
        pulses_per_beam: n_pulses,
        bandwidth,
        adc_bandwidth,
        carrier_freq: carrier,
    };
    if (frame.range_step() - range_step).abs() > 1e-9 * range_step {
        return Err(format_violation(
            path,
            "declared range step disagrees with the ADC bandwidth",
        ));
    }
    let mut beams = Vec::with_capacity(n_beams);
    for _ in 0..n_beams {
        let beam_id = r.read_u32::<LittleEndian>()?;
        let mut f = [0.0f64; 9];
        for v in f.iter_mut() {
            *v = r.read_f64::<LittleEndian>()?;
        }
        beams.push(BeamGeometry {
            beam_id,
            azimuth: f[0],
            elevation: f[1],
            hpbw_az: f[2],
            hpbw_el: f[3],
            max_gain: f[4],
            site_position: [f[5], f[6], f[7]],
            radar_constant: if f[8].is_nan() { None } else { Some(f[8]) },
        });
    }
    let mut samples = Array3::<Complex64>::zeros((n_beams, n_pulses, n_gates));
    for g in 0..n_beams {
        for p in 0..n_pulses {
            for m in 0..n_gates {
                let re = r.read_f32::<LittleEndian>()? as f64;
                let im = r.read_f32::<LittleEndian>()? as f64;
                samples[[g, p, m]] = Complex64::new(re, im);
            }
        }
    }
    IqCube::new(samples, frame, beams, timestamp)
}

// ---------------------------------------------------------------------------
// Product tables
// ---------------------------------------------------------------------------

const PRODUCT_HEADER: &str = "beam,gate,range_m,az_deg,el_deg,Z_dBZ,VD_ms,WD_ms,R_mmh,valid";

/// Writes the per-gate products as CSV with the fixed column set
/// `beam,gate,range_m,az_deg,el_deg,Z_dBZ,VD_ms,WD_ms,R_mmh,valid`.
/// Invalid gates carry NaN columns and `valid = 0`.
pub fn write_products(path: &Path, grid: &ProductGrid) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{PRODUCT_HEADER}")?;
    for beam in 0..grid.n_beams() {
        let geo = &grid.beams[beam];
        for gate in 0..grid.n_gates() {
            let c = grid.cells[[beam, gate]];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                beam,
                gate,
                grid.gate_range(gate),
                geo.azimuth.to_degrees(),
                geo.elevation.to_degrees(),
                c.reflectivity_dbz(),
                c.mean_velocity,
                c.doppler_spread,
                c.rain_rate,
                u8::from(c.validity.is_valid()),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a product CSV back into a grid. The CSV does not carry the sweep
/// timestamp or full beam geometry; supply the timestamp (from the
/// metadata document) and accept default gain/beamwidth values.
pub fn read_products(path: &Path, timestamp: f64) -> Result<ProductGrid> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == PRODUCT_HEADER => {}
        _ => return Err(format_violation(path, "bad or missing header")),
    }
    struct Row {
        beam: usize,
        gate: usize,
        range: f64,
        az_deg: f64,
        el_deg: f64,
        cell: ProductCell,
    }
    let mut rows: Vec<Row> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                line: idx + 1,
                reason: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let parse = |i: usize| -> std::result::Result<f64, Error> {
            fields[i].trim().parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                reason: format!("cannot parse '{}'", fields[i]),
            })
        };
        let beam = parse(0)? as usize;
        let gate = parse(1)? as usize;
        let valid = parse(9)? != 0.0;
        let z_dbz = parse(5)?;
        rows.push(Row {
            beam,
            gate,
            range: parse(2)?,
            az_deg: parse(3)?,
            el_deg: parse(4)?,
            cell: ProductCell {
                reflectivity: if z_dbz.is_nan() {
                    f64::NAN
                } else {
                    10f64.powf(z_dbz / 10.0)
                },
                mean_velocity: parse(6)?,
                doppler_spread: parse(7)?,
                rain_rate: parse(8)?,
                snr_db: f64::NAN,
                validity: if valid {
                    GateValidity::Valid
                } else {
                    GateValidity::BelowMdz
                },
            },
        });
    }
    if rows.is_empty() {
        return Err(format_violation(path, "no data rows"));
    }
    let n_beams = rows.iter().map(|r| r.beam).max().unwrap() + 1;
    let n_gates = rows.iter().map(|r| r.gate).max().unwrap() + 1;
    let range_step = rows
        .iter()
        .find(|r| r.gate == 1)
        .map(|r| r.range)
        .unwrap_or(1.0);
    let mut beams: Vec<BeamGeometry> = (0..n_beams)
        .map(|i| BeamGeometry {
            beam_id: i as u32,
            azimuth: 0.0,
            elevation: 0.0,
            hpbw_az: 0.1,
            hpbw_el: 0.1,
            max_gain: 1.0,
            site_position: [0.0; 3],
            radar_constant: None,
        })
        .collect();
    let mut cells = Array2::from_elem(
        (n_beams, n_gates),
        ProductCell::invalid(GateValidity::BelowMdz),
    );
    for row in rows {
        beams[row.beam].azimuth = row.az_deg.to_radians();
        beams[row.beam].elevation = row.el_deg.to_radians();
        cells[[row.beam, row.gate]] = row.cell;
    }
    Ok(ProductGrid {
        cells,
        beams,
        range_step,
        timestamp,
    })
}

/// Everything a product needs for provenance, stored as JSON next to the
/// CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMetadata {
    pub version: String,
    pub timestamp: f64,
    pub window: WindowKind,
    pub subsample: SubsampleParams,
    pub cv_threshold: f64,
    pub snr_min: f64,
    pub antenna_factor: f64,
    pub interp: InterpConfig,
    pub zr: ZrCoefficients,
    /// "inline-cv" or the path of the supplied mask file.
    pub mask_source: String,
    pub n_beams: usize,
    pub n_gates: usize,
}

impl ProductMetadata {
    pub fn from_chain(config: &ChainConfig, grid: &ProductGrid, mask_source: String) -> Self {
        ProductMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: grid.timestamp,
            window: config.window,
            subsample: config.subsample,
            cv_threshold: config.cv_threshold,
            snr_min: config.snr_min,
            antenna_factor: config.antenna_factor,
            interp: config.interp,
            zr: config.zr.clone(),
            mask_source,
            n_beams: grid.n_beams(),
            n_gates: grid.n_gates(),
        }
    }
}

pub fn write_metadata(path: &Path, meta: &ProductMetadata) -> Result<()> {
    let json = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::invalid(format!("metadata serialization failed: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<ProductMetadata> {
    let content = std::fs::read_to_string(path)?;
    serde_json::from_str(&content).map_err(|e| format_violation(path, e.to_string()))
}

// ---------------------------------------------------------------------------
// Truth sidecar
// ---------------------------------------------------------------------------

const TRUTH_HEADER: &str = "beam,gate,range_m,z_dbz,v_radial_ms,width_ms,l2,blind,cluttered";

/// Writes simulator ground truth per (beam, gate) for verification runs.
pub fn write_truth(path: &Path, truth: &Array2<TruthCell>, range_step: f64) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{TRUTH_HEADER}")?;
    for beam in 0..truth.dim().0 {
        for gate in 0..truth.dim().1 {
            let t = truth[[beam, gate]];
            let z_dbz = if t.z > 0.0 {
                10.0 * t.z.log10()
            } else {
                f64::NAN
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                beam,
                gate,
                gate as f64 * range_step,
                z_dbz,
                t.v_radial,
                t.width,
                t.l2,
                u8::from(t.blind),
                u8::from(t.cluttered),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a truth sidecar back as `[beam, gate]` cells.
pub fn read_truth(path: &Path) -> Result<Array2<TruthCell>> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRUTH_HEADER => {}
        _ => return Err(format_violation(path, "bad or missing header")),
    }
    let mut rows: Vec<(usize, usize, TruthCell)> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse {
                line: idx + 1,
                reason: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let parse = |i: usize| -> std::result::Result<f64, Error> {
            fields[i].trim().parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                reason: format!("cannot parse '{}'", fields[i]),
            })
        };
        let z_dbz = parse(3)?;
        rows.push((
            parse(0)? as usize,
            parse(1)? as usize,
            TruthCell {
                z: if z_dbz.is_nan() {
                    0.0
                } else {
                    10f64.powf(z_dbz / 10.0)
                },
                v_radial: parse(4)?,
                width: parse(5)?,
                l2: parse(6)?,
                blind: parse(7)? != 0.0,
                cluttered: parse(8)? != 0.0,
            },
        ));
    }
    if rows.is_empty() {
        return Err(format_violation(path, "no data rows"));
    }
    let n_beams = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let n_gates = rows.iter().map(|r| r.1).max().unwrap() + 1;
    let mut out = Array2::from_elem(
        (n_beams, n_gates),
        TruthCell {
            z: 0.0,
            v_radial: 0.0,
            width: 0.0,
            l2: 1.0,
            blind: false,
            cluttered: false,
        },
    );
    for (b, g, t) in rows {
        out[[b, g]] = t;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Clutter masks and persistency maps
// ---------------------------------------------------------------------------

/// Writes per-beam clutter masks: a `BSWRM-MASK 1` header, key=value
/// metadata, then one `0`/`1` character row per gate for each beam.
pub fn write_masks(path: &Path, masks: &[ClutterMask]) -> Result<()> {
    if masks.is_empty() {
        return Err(Error::invalid("no masks to write"));
    }
    let (n_gates, n_bins) = masks[0].mask.dim();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "BSWRM-MASK 1")?;
    writeln!(out, "kind={}", masks[0].kind)?;
    writeln!(out, "offset={}", masks[0].offset)?;
    writeln!(out, "threshold={}", masks[0].threshold)?;
    writeln!(out, "n_beams={}", masks.len())?;
    writeln!(out, "n_gates={n_gates}")?;
    writeln!(out, "n_bins={n_bins}")?;
    for (i, mask) in masks.iter().enumerate() {
        if mask.mask.dim() != (n_gates, n_bins) {
            return Err(Error::dims("masks must share dimensions"));
        }
        writeln!(out, "beam={i}")?;
        for gate in 0..n_gates {
            let row: String = (0..n_bins)
                .map(|k| if mask.mask[[gate, k]] == 0 { '0' } else { '1' })
                .collect();
            writeln!(out, "{row}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads masks written by [`write_masks`].
pub fn read_masks(path: &Path) -> Result<Vec<ClutterMask>> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    if lines.next().map(str::trim) != Some("BSWRM-MASK 1") {
        return Err(format_violation(path, "bad magic line"));
    }
    let mut kind = None;
    let mut offset = None;
    let mut threshold = None;
    let mut n_beams = None;
    let mut n_gates = None;
    let mut n_bins = None;
    for _ in 0..6 {
        let line = lines
            .next()
            .ok_or_else(|| format_violation(path, "truncated header"))?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format_violation(path, format!("bad header line '{line}'")))?;
        match key {
            "kind" => {
                kind = Some(match value {
                    "cv-driven" => MaskKind::CvDriven,
                    "persistency-driven" => MaskKind::PersistencyDriven,
                    other => return Err(format_violation(path, format!("unknown kind '{other}'"))),
                })
            }
            "offset" => offset = value.parse::<usize>().ok(),
            "threshold" => threshold = value.parse::<f64>().ok(),
            "n_beams" => n_beams = value.parse::<usize>().ok(),
            "n_gates" => n_gates = value.parse::<usize>().ok(),
            "n_bins" => n_bins = value.parse::<usize>().ok(),
            other => return Err(format_violation(path, format!("unknown key '{other}'"))),
        }
    }
    let (kind, offset, threshold, n_beams, n_gates, n_bins) = (
        kind.ok_or_else(|| format_violation(path, "missing kind"))?,
        offset.ok_or_else(|| format_violation(path, "missing offset"))?,
        threshold.ok_or_else(|| format_violation(path, "missing threshold"))?,
        n_beams.ok_or_else(|| format_violation(path, "missing n_beams"))?,
        n_gates.ok_or_else(|| format_violation(path, "missing n_gates"))?,
        n_bins.ok_or_else(|| format_violation(path, "missing n_bins"))?,
    );
    let mut masks = Vec::with_capacity(n_beams);
    for i in 0..n_beams {
        match lines.next().map(str::trim) {
            Some(l) if l == format!("beam={i}") => {}
            other => {
                return Err(format_violation(
                    path,
                    format!("expected 'beam={i}', got {other:?}"),
                ))
            }
        }
        let mut grid = Array2::<u8>::ones((n_gates, n_bins));
        for gate in 0..n_gates {
            let row = lines
                .next()
                .ok_or_else(|| format_violation(path, "truncated mask grid"))?;
            if row.len() != n_bins {
                return Err(format_violation(
                    path,
                    format!("row has {} bins, expected {n_bins}", row.len()),
                ));
            }
            for (k, ch) in row.chars().enumerate() {
                grid[[gate, k]] = match ch {
                    '0' => 0,
                    '1' => 1,
                    other => {
                        return Err(format_violation(path, format!("bad mask char '{other}'")))
                    }
                };
            }
        }
        // The outer half of the Doppler axis is not covered by the
        // staggered statistics and must stay clutter-free.
        let band = crate::types::half_band_bins(n_bins);
        for gate in 0..n_gates {
            for k in (0..band.start).chain(band.end..n_bins) {
                if grid[[gate, k]] == 0 {
                    return Err(format_violation(
                        path,
                        format!("outer-band bin ({gate}, {k}) flagged as clutter"),
                    ));
                }
            }
        }
        masks.push(ClutterMask {
            mask: grid,
            kind,
            offset,
            threshold,
        });
    }
    Ok(masks)
}

/// Writes per-beam persistency maps as integer grids with a metadata
/// header.
pub fn write_persistency(path: &Path, maps: &[PersistencyMap]) -> Result<()> {
    if maps.is_empty() {
        return Err(Error::invalid("no persistency maps to write"));
    }
    let (n_gates, n_bins) = maps[0].counts.dim();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "BSWRM-PERSISTENCY 1")?;
    writeln!(out, "offset={}", maps[0].offset)?;
    writeln!(out, "n_scenes={}", maps[0].n_scenes)?;
    writeln!(out, "window_seconds={}", maps[0].window_seconds)?;
    writeln!(out, "n_beams={}", maps.len())?;
    writeln!(out, "n_gates={n_gates}")?;
    writeln!(out, "n_bins={n_bins}")?;
    for (i, map) in maps.iter().enumerate() {
        if map.counts.dim() != (n_gates, n_bins) {
            return Err(Error::dims("persistency maps must share dimensions"));
        }
        writeln!(out, "beam={i}")?;
        for gate in 0..n_gates {
            let row: Vec<String> = (0..n_bins)
                .map(|k| map.counts[[gate, k]].to_string())
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads maps written by [`write_persistency`].
pub fn read_persistency(path: &Path) -> Result<Vec<PersistencyMap>> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    if lines.next().map(str::trim) != Some("BSWRM-PERSISTENCY 1") {
        return Err(format_violation(path, "bad magic line"));
    }
    let mut header = std::collections::BTreeMap::new();
    for _ in 0..6 {
        let line = lines
            .next()
            .ok_or_else(|| format_violation(path, "truncated header"))?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format_violation(path, format!("bad header line '{line}'")))?;
        header.insert(key.to_string(), value.to_string());
    }
    let get = |k: &str| -> Result<f64> {
        header
            .get(k)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| format_violation(path, format!("missing or bad '{k}'")))
    };
    let offset = get("offset")? as usize;
    let n_scenes = get("n_scenes")? as usize;
    let window_seconds = get("window_seconds")?;
    let n_beams = get("n_beams")? as usize;
    let n_gates = get("n_gates")? as usize;
    let n_bins = get("n_bins")? as usize;
    let mut maps = Vec::with_capacity(n_beams);
    for i in 0..n_beams {
        match lines.next().map(str::trim) {
            Some(l) if l == format!("beam={i}") => {}
            other => {
                return Err(format_violation(
                    path,
                    format!("expected 'beam={i}', got {other:?}"),
                ))
            }
        }
        let mut counts = Array2::<u32>::zeros((n_gates, n_bins));
        for gate in 0..n_gates {
            let row = lines
                .next()
                .ok_or_else(|| format_violation(path, "truncated grid"))?;
            let values: Vec<&str> = row.split_whitespace().collect();
            if values.len() != n_bins {
                return Err(format_violation(
                    path,
                    format!("row has {} bins, expected {n_bins}", values.len()),
                ));
            }
            for (k, v) in values.iter().enumerate() {
                counts[[gate, k]] = v
                    .parse::<u32>()
                    .map_err(|_| format_violation(path, format!("bad count '{v}'")))?;
            }
        }
        maps.push(PersistencyMap {
            counts,
            n_scenes,
            window_seconds,
            offset,
        });
    }
    Ok(maps)
}

// ---------------------------------------------------------------------------
// Scattering tables
// ---------------------------------------------------------------------------

/// Writes a scattering table: a header line
/// `frequency_hz=<v> polarization=<tag>`, then `D_mm,sigma_b_mm2,sigma_e_mm2`
/// rows.
pub fn write_scattering_table(path: &Path, table: &ScatteringTable) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "frequency_hz={} polarization={}",
        table.frequency, table.polarization
    )?;
    for i in 0..table.diameters.len() {
        writeln!(
            out,
            "{},{},{}",
            table.diameters[i], table.backscatter[i], table.extinction[i]
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a table written by [`write_scattering_table`].
pub fn read_scattering_table(path: &Path) -> Result<ScatteringTable> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| format_violation(path, "empty file"))?;
    let mut frequency = None;
    let mut polarization = None;
    for token in header.split_whitespace() {
        if let Some((k, v)) = token.split_once('=') {
            match k {
                "frequency_hz" => frequency = v.parse::<f64>().ok(),
                "polarization" => polarization = Some(v.to_string()),
                _ => {}
            }
        }
    }
    let frequency = frequency.ok_or_else(|| format_violation(path, "header lacks frequency_hz"))?;
    let polarization =
        polarization.ok_or_else(|| format_violation(path, "header lacks polarization"))?;
    let mut d = Vec::new();
    let mut sb = Vec::new();
    let mut se = Vec::new();
    for (idx, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: idx + 1,
                reason: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let mut vals = [0.0f64; 3];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                reason: format!("cannot parse '{f}'"),
            })?;
        }
        d.push(vals[0]);
        sb.push(vals[1]);
        se.push(vals[2]);
    }
    ScatteringTable::new(frequency, polarization, d, sb, se)
}

// ---------------------------------------------------------------------------
// Z-R coefficient documents
// ---------------------------------------------------------------------------

pub fn write_zr(path: &Path, zr: &ZrCoefficients) -> Result<()> {
    let json = serde_json::to_string_pretty(zr)
        .map_err(|e| Error::invalid(format!("Z-R serialization failed: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_zr(path: &Path) -> Result<ZrCoefficients> {
    let content = std::fs::read_to_string(path)?;
    serde_json::from_str(&content).map_err(|e| format_violation(path, e.to_string()))
}

// ---------------------------------------------------------------------------
// Pairing tables
// ---------------------------------------------------------------------------

const PAIRING_HEADER: &str =
    "cell_ix,cell_iy,x_m,y_m,beam_a,gate_a,beam_b,gate_b,los_a_e,los_a_n,los_b_e,los_b_n";

pub fn write_pairing(path: &Path, pairing: &[PairedCell]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{PAIRING_HEADER}")?;
    for p in pairing {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            p.cell.0,
            p.cell.1,
            p.position[0],
            p.position[1],
            p.site_a.0,
            p.site_a.1,
            p.site_b.0,
            p.site_b.1,
            p.los_a.0,
            p.los_a.1,
            p.los_b.0,
            p.los_b.1,
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pairing(path: &Path) -> Result<Vec<PairedCell>> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == PAIRING_HEADER => {}
        _ => return Err(format_violation(path, "bad or missing header")),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(Error::Parse {
                line: idx + 1,
                reason: format!("expected 12 fields, got {}", fields.len()),
            });
        }
        let parse = |i: usize| -> std::result::Result<f64, Error> {
            fields[i].trim().parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                reason: format!("cannot parse '{}'", fields[i]),
            })
        };
        out.push(PairedCell {
            cell: (parse(0)? as usize, parse(1)? as usize),
            position: [parse(2)?, parse(3)?],
            site_a: (parse(4)? as usize, parse(5)? as usize),
            site_b: (parse(6)? as usize, parse(7)? as usize),
            los_a: (parse(8)?, parse(9)?),
            los_b: (parse(10)?, parse(11)?),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sensitivity tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub system: String,
    pub range_m: f64,
    pub mdz_dbz: f64,
    pub mdr_mmh: f64,
}

const SENSITIVITY_HEADER: &str = "system,range_m,MDZ_dBZ,MDR_mmh";

pub fn write_sensitivity(path: &Path, rows: &[SensitivityRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{SENSITIVITY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.system, r.range_m, r.mdz_dbz, r.mdr_mmh
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sensitivity(path: &Path) -> Result<Vec<SensitivityRow>> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SENSITIVITY_HEADER => {}
        _ => return Err(format_violation(path, "bad or missing header")),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |i: usize| -> std::result::Result<f64, Error> {
            fields[i].trim().parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                reason: format!("cannot parse '{}'", fields[i]),
            })
        };
        out.push(SensitivityRow {
            system: fields[0].to_string(),
            range_m: parse(1)?,
            mdz_dbz: parse(2)?,
            mdr_mmh: parse(3)?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Scene configuration
// ---------------------------------------------------------------------------

/// Frame timing in engineering units, as written in scene files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub tx_time_us: f64,
    pub guard_time_us: f64,
    pub rx_time_us: f64,
    pub idle_time_us: f64,
    pub pulses_per_beam: usize,
    pub bandwidth_hz: f64,
    pub adc_bandwidth_hz: f64,
    pub carrier_hz: f64,
}

impl FrameConfig {
    pub fn to_frame(&self) -> Result<FrameTiming> {
        FrameTiming::new(
            self.tx_time_us * 1e-6,
            self.guard_time_us * 1e-6,
            self.rx_time_us * 1e-6,
            self.idle_time_us * 1e-6,
            self.pulses_per_beam,
            self.bandwidth_hz,
            self.adc_bandwidth_hz,
            self.carrier_hz,
        )
    }
}

fn default_dielectric() -> f64 {
    0.93
}

fn default_pattern() -> AntennaPattern {
    AntennaPattern::ParametricGaussian
}

/// Transmitter/antenna description in engineering units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub peak_power_w: f64,
    pub noise_figure_db: f64,
    pub max_gain_dbi: f64,
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
    #[serde(default = "default_dielectric")]
    pub dielectric_factor: f64,
    #[serde(default = "default_pattern")]
    pub pattern: AntennaPattern,
}

impl SystemConfig {
    /// Combines with the frame timing into a full system spec (pulse
    /// length, bandwidth, carrier, and range step come from the frame).
    pub fn to_spec(&self, frame: &FrameTiming) -> Result<RadarSystemSpec> {
        let spec = RadarSystemSpec {
            carrier_freq: frame.carrier_freq,
            peak_power: self.peak_power_w,
            noise_figure: 10f64.powf(self.noise_figure_db / 10.0),
            pulse_len: frame.tx_time,
            bandwidth: frame.bandwidth,
            max_gain: 10f64.powf(self.max_gain_dbi / 10.0),
            hpbw_az: self.hpbw_az_deg.to_radians(),
            hpbw_el: self.hpbw_el_deg.to_radians(),
            dielectric_factor: self.dielectric_factor,
            range_step: frame.range_step(),
            pattern: self.pattern.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// One site's position and beam fan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteConfig {
    pub position: [f64; 3],
    pub azimuth_start_deg: f64,
    pub azimuth_step_deg: f64,
    pub n_beams: usize,
    pub elevation_deg: f64,
}

impl SiteConfig {
    pub fn to_beams(&self, system: &SystemConfig) -> Result<Vec<BeamGeometry>> {
        if self.n_beams == 0 {
            return Err(Error::invalid("site needs at least one beam"));
        }
        let beams: Vec<BeamGeometry> = (0..self.n_beams)
            .map(|i| BeamGeometry {
                beam_id: i as u32,
                azimuth: (self.azimuth_start_deg + i as f64 * self.azimuth_step_deg).to_radians(),
                elevation: self.elevation_deg.to_radians(),
                hpbw_az: system.hpbw_az_deg.to_radians(),
                hpbw_el: system.hpbw_el_deg.to_radians(),
                max_gain: 10f64.powf(system.max_gain_dbi / 10.0),
                site_position: self.position,
                radar_constant: None,
            })
            .collect();
        for b in &beams {
            b.validate()?;
        }
        Ok(beams)
    }
}

/// Synthetic-scene description: frame, transmitter, rain field, clutter,
/// one or two sites, and the cube extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub frame: FrameConfig,
    pub system: SystemConfig,
    pub field: RainFieldConfig,
    #[serde(default)]
    pub clutter: ClutterScene,
    pub site_a: SiteConfig,
    #[serde(default)]
    pub site_b: Option<SiteConfig>,
    pub n_gates: usize,
    #[serde(default)]
    pub timestamp: f64,
    /// Common grid for two-site pairing output.
    #[serde(default)]
    pub common_grid: Option<CommonGrid>,
}

pub fn read_scene_config(path: &Path) -> Result<SceneConfig> {
    let content = std::fs::read_to_string(path)?;
    toml::from_str(&content).map_err(|e| format_violation(path, e.to_string()))
}

pub fn write_scene_config(path: &Path, scene: &SceneConfig) -> Result<()> {
    let text = toml::to_string_pretty(scene)
        .map_err(|e| Error::invalid(format!("scene serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Chain configuration files
// ---------------------------------------------------------------------------

fn default_cv_threshold() -> f64 {
    0.1
}

fn default_snr_min() -> f64 {
    1.0
}

fn default_antenna_factor() -> f64 {
    1.0
}

fn default_window() -> WindowKind {
    WindowKind::Blackman
}

/// Z–R selection in chain files: a named preset or explicit coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZrSelection {
    Preset(String),
    Explicit { a: f64, b: f64 },
}

impl ZrSelection {
    pub fn to_coefficients(&self) -> Result<ZrCoefficients> {
        match self {
            ZrSelection::Preset(name) => match name.as_str() {
                "marshall-palmer" => Ok(ZrCoefficients::marshall_palmer()),
                "bs-tuned" => Ok(ZrCoefficients::bs_tuned()),
                other => Err(Error::invalid(format!(
                    "unknown Z-R preset '{other}' (use marshall-palmer or bs-tuned)"
                ))),
            },
            ZrSelection::Explicit { a, b } => {
                ZrCoefficients::new(*a, *b, crate::dsd::ZrProvenance::Fitted)
            }
        }
    }
}

fn default_zr_selection() -> ZrSelection {
    ZrSelection::Preset("bs-tuned".into())
}

/// Receiver-side parameters that cannot be recovered from a cube file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    pub peak_power_w: f64,
    pub noise_figure_db: f64,
    #[serde(default = "default_dielectric")]
    pub dielectric_factor: f64,
    #[serde(default = "default_pattern")]
    pub pattern: AntennaPattern,
}

/// Processing-chain file: everything else is taken from the cube header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFileConfig {
    #[serde(default = "default_window")]
    pub window: WindowKind,
    pub subsample: SubsampleParams,
    #[serde(default = "default_cv_threshold")]
    pub cv_threshold: f64,
    #[serde(default)]
    pub interp: Option<InterpConfig>,
    #[serde(default = "default_zr_selection")]
    pub zr: ZrSelection,
    #[serde(default = "default_snr_min")]
    pub snr_min: f64,
    #[serde(default = "default_antenna_factor")]
    pub antenna_factor: f64,
    pub receiver: ReceiverConfig,
}

impl ChainFileConfig {
    /// Builds the runtime chain config for a cube: timing and geometry
    /// come from the cube header, detection/physics parameters from the
    /// file.
    pub fn into_chain_config(self, cube: &IqCube) -> Result<ChainConfig> {
        let beam = cube
            .beams
            .first()
            .ok_or_else(|| Error::invalid("cube has no beams"))?;
        let system = RadarSystemSpec {
            carrier_freq: cube.frame.carrier_freq,
            peak_power: self.receiver.peak_power_w,
            noise_figure: 10f64.powf(self.receiver.noise_figure_db / 10.0),
            pulse_len: cube.frame.tx_time,
            bandwidth: cube.frame.bandwidth,
            max_gain: beam.max_gain,
            hpbw_az: beam.hpbw_az,
            hpbw_el: beam.hpbw_el,
            dielectric_factor: self.receiver.dielectric_factor,
            range_step: cube.range_step,
            pattern: self.receiver.pattern.clone(),
        };
        system.validate()?;
        Ok(ChainConfig {
            window: self.window,
            subsample: self.subsample,
            cv_threshold: self.cv_threshold,
            interp: self.interp.unwrap_or_default(),
            zr: self.zr.to_coefficients()?,
            snr_min: self.snr_min,
            system,
            antenna_factor: self.antenna_factor,
        })
    }
}

pub fn read_chain_config(path: &Path) -> Result<ChainFileConfig> {
    let content = std::fs::read_to_string(path)?;
    toml::from_str(&content).map_err(|e| format_violation(path, e.to_string()))
}

/// System description file for sensitivity tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySystemFile {
    pub name: String,
    pub carrier_hz: f64,
    pub peak_power_w: f64,
    pub noise_figure_db: f64,
    pub pulse_len_us: f64,
    pub bandwidth_hz: f64,
    pub max_gain_dbi: f64,
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
    #[serde(default = "default_dielectric")]
    pub dielectric_factor: f64,
    pub range_step_m: f64,
    #[serde(default = "default_pattern")]
    pub pattern: AntennaPattern,
    /// Precomputed antenna correction factor; computed from the pattern by
    /// quadrature when absent.
    #[serde(default)]
    pub antenna_factor: Option<f64>,
}

impl SensitivitySystemFile {
    pub fn to_spec(&self) -> Result<RadarSystemSpec> {
        let spec = RadarSystemSpec {
            carrier_freq: self.carrier_hz,
            peak_power: self.peak_power_w,
            noise_figure: 10f64.powf(self.noise_figure_db / 10.0),
            pulse_len: self.pulse_len_us * 1e-6,
            bandwidth: self.bandwidth_hz,
            max_gain: 10f64.powf(self.max_gain_dbi / 10.0),
            hpbw_az: self.hpbw_az_deg.to_radians(),
            hpbw_el: self.hpbw_el_deg.to_radians(),
            dielectric_factor: self.dielectric_factor,
            range_step: self.range_step_m,
            pattern: self.pattern.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn read_sensitivity_system(path: &Path) -> Result<SensitivitySystemFile> {
    let content = std::fs::read_to_string(path)?;
    toml::from_str(&content).map_err(|e| format_violation(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_rain_field, synthesize_iq};
    use ndarray::Array2;
    use tempfile::tempdir;

    fn sample_scene() -> SceneConfig {
        SceneConfig {
            frame: FrameConfig {
                tx_time_us: 2.0,
                guard_time_us: 0.5,
                rx_time_us: 20.0,
                idle_time_us: 2477.5,
                pulses_per_beam: 128,
                bandwidth_hz: 18.36e6,
                adc_bandwidth_hz: 23.04e6,
                carrier_hz: 4.9e9,
            },
            system: SystemConfig {
                peak_power_w: 200.0,
                noise_figure_db: 4.0,
                max_gain_dbi: 26.3,
                hpbw_az_deg: 6.0,
                hpbw_el_deg: 3.0,
                dielectric_factor: 0.93,
                pattern: AntennaPattern::ParametricGaussian,
            },
            field: RainFieldConfig {
                nx: 48,
                ny: 48,
                spacing: 50.0,
                correlation_length: 300.0,
                mean_dbz: 42.0,
                std_dbz: 3.0,
                advection: [0.0, 2.0],
                width_ms: 0.7,
                origin: [-1200.0, -1200.0],
                ke_law: None,
            },
            clutter: ClutterScene::default(),
            site_a: SiteConfig {
                position: [0.0, 0.0, 25.0],
                azimuth_start_deg: -6.0,
                azimuth_step_deg: 6.0,
                n_beams: 3,
                elevation_deg: 0.0,
            },
            site_b: None,
            n_gates: 144,
            timestamp: 0.0,
            common_grid: None,
        }
    }

    fn sample_cube() -> IqCube {
        let scene = sample_scene();
        let frame = scene.frame.to_frame().unwrap();
        let spec = scene.system.to_spec(&frame).unwrap();
        let beams = scene.site_a.to_beams(&scene.system).unwrap();
        let field = generate_rain_field(1, &scene.field).unwrap();
        synthesize_iq(
            &field,
            &scene.clutter,
            &spec,
            &frame,
            &beams,
            scene.n_gates,
            scene.timestamp,
            99,
        )
        .unwrap()
    }

    #[test]
    fn cube_file_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.cube");
        let cube = sample_cube();
        write_cube(&path, &cube).unwrap();
        let back = read_cube(&path).unwrap();
        // The file stores f32 samples: a second write must be identical.
        let path2 = dir.path().join("b.cube");
        write_cube(&path2, &back).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
        assert_eq!(back.n_beams(), cube.n_beams());
        assert_eq!(back.frame, cube.frame);
        assert_eq!(back.beams, cube.beams);
    }

    #[test]
    fn cube_reader_rejects_truncation_and_bad_magic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.cube");
        let cube = sample_cube();
        write_cube(&path, &cube).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        let bad = dir.path().join("trunc.cube");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(
            read_cube(&bad),
            Err(Error::FormatViolation { .. })
        ));
        let mut corrupted = std::fs::read(&path).unwrap();
        corrupted[0] = b'X';
        std::fs::write(&bad, &corrupted).unwrap();
        assert!(matches!(
            read_cube(&bad),
            Err(Error::FormatViolation { .. })
        ));
    }

    #[test]
    fn product_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut cells = Array2::from_elem((2, 3), ProductCell::invalid(GateValidity::BelowMdz));
        cells[[0, 1]] = ProductCell {
            reflectivity: 1234.5,
            mean_velocity: -2.25,
            doppler_spread: 0.75,
            rain_rate: 3.125,
            snr_db: 18.0,
            validity: GateValidity::Valid,
        };
        let beams = vec![
            BeamGeometry {
                beam_id: 0,
                azimuth: 0.1,
                elevation: -0.01,
                hpbw_az: 0.1,
                hpbw_el: 0.05,
                max_gain: 400.0,
                site_position: [0.0; 3],
                radar_constant: None,
            };
            2
        ];
        let grid = ProductGrid {
            cells,
            beams,
            range_step: 6.5,
            timestamp: 1234.0,
        };
        write_products(&path, &grid).unwrap();
        let back = read_products(&path, 1234.0).unwrap();
        assert_eq!(back.n_beams(), 2);
        assert_eq!(back.n_gates(), 3);
        let c = back.cells[[0, 1]];
        assert!((c.reflectivity - 1234.5).abs() < 1e-9);
        assert_eq!(c.mean_velocity, -2.25);
        assert!(c.validity.is_valid());
        assert!(!back.cells[[1, 2]].validity.is_valid());
        // Writing again produces identical bytes (stable schema).
        let path2 = dir.path().join("p2.csv");
        write_products(&path2, &grid).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn product_header_is_stable() {
        // Golden schema: changing the column set breaks downstream
        // consumers.
        assert_eq!(
            PRODUCT_HEADER,
            "beam,gate,range_m,az_deg,el_deg,Z_dBZ,VD_ms,WD_ms,R_mmh,valid"
        );
    }

    #[test]
    fn mask_file_round_trips_bit_exactly() {
        use crate::clutter::cv_mask;
        use rand::{Rng, SeedableRng};
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.mask");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let masks: Vec<ClutterMask> = (0..3)
            .map(|_| {
                let sigma = Array2::from_shape_fn((16, 32), |_| rng.gen::<f64>());
                cv_mask(&sigma, 0.4, 64, 20).unwrap()
            })
            .collect();
        write_masks(&path, &masks).unwrap();
        let back = read_masks(&path).unwrap();
        assert_eq!(back, masks);
        let path2 = dir.path().join("m2.mask");
        write_masks(&path2, &back).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn persistency_file_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.psy");
        let maps = vec![PersistencyMap {
            counts: Array2::from_shape_fn((8, 16), |(g, k)| (g * k) as u32),
            n_scenes: 15,
            window_seconds: 300.0,
            offset: 20,
        }];
        write_persistency(&path, &maps).unwrap();
        let back = read_persistency(&path).unwrap();
        assert_eq!(back, maps);
    }

    #[test]
    fn scattering_table_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let d: Vec<f64> = (1..=50).map(|i| i as f64 * 0.16).collect();
        let table = ScatteringTable::rayleigh(4.9e9, 0.93, d).unwrap();
        write_scattering_table(&path, &table).unwrap();
        let back = read_scattering_table(&path).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn scattering_table_rejects_missing_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1.0,2.0,3.0\n").unwrap();
        assert!(read_scattering_table(&path).is_err());
    }

    #[test]
    fn zr_document_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("zr.json");
        let mut zr = ZrCoefficients::bs_tuned();
        zr.diagnostics = Some(crate::dsd::ZrFitDiagnostics {
            n_samples: 1000,
            residual_db: 0.98,
        });
        write_zr(&path, &zr).unwrap();
        assert_eq!(read_zr(&path).unwrap(), zr);
    }

    #[test]
    fn pairing_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let pairing = vec![PairedCell {
            cell: (3, 4),
            position: [150.0, 200.0],
            site_a: (0, 17),
            site_b: (2, 31),
            los_a: (0.6, 0.8),
            los_b: (-0.6, 0.8),
        }];
        write_pairing(&path, &pairing).unwrap();
        assert_eq!(read_pairing(&path).unwrap(), pairing);
    }

    #[test]
    fn scene_config_round_trips_through_toml() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scene.toml");
        let scene = sample_scene();
        write_scene_config(&path, &scene).unwrap();
        let back = read_scene_config(&path).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn scene_config_rejects_malformed_toml() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "frame = 12\n").unwrap();
        assert!(matches!(
            read_scene_config(&path),
            Err(Error::FormatViolation { .. })
        ));
    }

    #[test]
    fn chain_config_file_builds_runtime_config() {
        let toml_text = r#"
            window = "blackman"
            cv_threshold = 0.1

            [subsample]
            offset = 20
            shift_step = 5
            n_shifts = 13
            window_len = 64

            [zr]
            a = 92.0563
            b = 2.1363

            [receiver]
            peak_power_w = 200.0
            noise_figure_db = 4.0
        "#;
        let parsed: ChainFileConfig = toml::from_str(toml_text).unwrap();
        let cube = sample_cube();
        let config = parsed.into_chain_config(&cube).unwrap();
        assert_eq!(config.window, WindowKind::Blackman);
        assert_eq!(config.subsample.offset, 20);
        assert!((config.zr.a - 92.0563).abs() < 1e-9);
        assert_eq!(config.system.carrier_freq, 4.9e9);
        assert_eq!(config.system.pulse_len, cube.frame.tx_time);
    }

    #[test]
    fn zr_preset_selection() {
        let sel = ZrSelection::Preset("marshall-palmer".into());
        let zr = sel.to_coefficients().unwrap();
        assert_eq!(zr.a, 200.0);
        assert!(ZrSelection::Preset("nope".into())
            .to_coefficients()
            .is_err());
    }

    #[test]
    fn truth_sidecar_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        let mut truth = Array2::from_elem(
            (2, 4),
            TruthCell {
                z: 0.0,
                v_radial: 0.0,
                width: 0.0,
                l2: 1.0,
                blind: true,
                cluttered: false,
            },
        );
        truth[[1, 3]] = TruthCell {
            z: 10f64.powf(4.2),
            v_radial: -1.5,
            width: 0.7,
            l2: 0.97,
            blind: false,
            cluttered: true,
        };
        write_truth(&path, &truth, 6.5).unwrap();
        let back = read_truth(&path).unwrap();
        assert_eq!(back.dim(), (2, 4));
        let t = back[[1, 3]];
        assert!((t.z - 10f64.powf(4.2)).abs() < 1e-6 * t.z);
        assert_eq!(t.v_radial, -1.5);
        assert!(t.cluttered);
        assert!(!t.blind);
        assert!(back[[0, 0]].blind);
    }

    #[test]
    fn sensitivity_table_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![
            SensitivityRow {
                system: "c-band".into(),
                range_m: 1000.0,
                mdz_dbz: -30.5,
                mdr_mmh: 0.001,
            },
            SensitivityRow {
                system: "bs".into(),
                range_m: 2000.0,
                mdz_dbz: -13.7,
                mdr_mmh: 0.01,
            },
        ];
        write_sensitivity(&path, &rows).unwrap();
        assert_eq!(read_sensitivity(&path).unwrap(), rows);
    }
}
