//! Chain-level behaviour that spans modules: persistency statistics over
//! observation windows, mask-growth regression on the golden cube, and
//! end-to-end clutter flagging of a single stable scatterer.

mod common;

use common::*;

use bswrm_core::clutter::accumulate_persistency;
use bswrm_core::physics::{radar_constant, PowerReference};
use bswrm_core::pipeline::{cv_masks_for_cube, process_sweep, ChainConfig};
use bswrm_core::sim::{rcs_for_received_power, synthesize_iq, ClutterPoint, ClutterScene};
use bswrm_core::types::half_band_bins;

use std::path::{Path, PathBuf};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// A 5-minute rain event inside a 20-minute acquisition: the persistency
/// fraction at rain bins dilutes as the window grows, while clutter bins
/// stay flagged in essentially every scene.
#[test]
fn persistency_fraction_dilutes_for_rain_but_not_clutter() {
    let frame = bs_frame();
    let spec = bs_system();
    let dr = frame.range_step();
    let n_gates = 96usize;

    // Slow, phase-coherent rain so the offset-0 CV flags it while present:
    // +32.7 Hz line (radial velocity -1 m/s), 0.2 m/s width.
    let rain_field = uniform_field(42.0, [10.0, -1.0], 0.2);
    let dry_field = uniform_field(-60.0, [10.0, -1.0], 0.2);
    let clutter_gates = [70usize, 85];
    let constant = radar_constant(&spec, 1.0, PowerReference::AfterCompression).unwrap();
    let points: Vec<ClutterPoint> = clutter_gates
        .iter()
        .map(|&gate| {
            let r = gate as f64 * dr;
            let rain_power = constant * 10f64.powf(4.2) / (r * r);
            ClutterPoint {
                position: [0.0, r, 30.0],
                rcs: rcs_for_received_power(&spec, 1000.0 * rain_power, r),
                phase_jitter: 0.0,
            }
        })
        .collect();
    let scene = ClutterScene {
        points,
        extended: vec![],
    };
    let mut config = ChainConfig::with_system(spec.clone()).unwrap();
    config.subsample = bswrm_core::clutter::SubsampleParams::new(0, 5, 13, 64).unwrap();

    // Scenes every 30 s: rain during the first 10 (5 min), dry afterwards
    // (20 min total). Per-scene noise realizations differ by seed; the
    // synthesis time is held at 0 so the field stays inside its extent.
    let mut masks = Vec::new();
    for scene_idx in 0..40u64 {
        let field = if scene_idx < 10 {
            &rain_field
        } else {
            &dry_field
        };
        let cube = synthesize_iq(
            field,
            &scene,
            &spec,
            &frame,
            &[north_beam()],
            n_gates,
            0.0,
            7000 + scene_idx,
        )
        .unwrap();
        masks.push(cv_masks_for_cube(&cube, &config).unwrap().remove(0));
    }
    let psi_5min = accumulate_persistency(&masks[..10], 300.0).unwrap();
    let psi_20min = accumulate_persistency(&masks, 1200.0).unwrap();

    // Rain line k = +5 (32.7 Hz / 6.25 Hz), ±1 bin, away from clutter
    // gates.
    let rain_k = [36usize, 37, 38];
    let rain_gates: Vec<usize> = (60..n_gates)
        .filter(|g| !clutter_gates.iter().any(|c| c == g))
        .collect();
    let fraction = |psi: &bswrm_core::clutter::PersistencyMap| -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for &g in &rain_gates {
            for &k in &rain_k {
                acc += f64::from(psi.counts[[g, k]]) / psi.n_scenes as f64;
                count += 1;
            }
        }
        acc / count as f64
    };
    let frac_5 = fraction(&psi_5min);
    let frac_20 = fraction(&psi_20min);
    assert!(
        frac_5 > 0.5,
        "coherent rain should be flagged while present, got {frac_5:.2}"
    );
    assert!(
        frac_20 < 0.5 * frac_5,
        "rain persistency did not dilute: 5 min {frac_5:.2}, 20 min {frac_20:.2}"
    );
    for &g in &clutter_gates {
        let dc = 32usize;
        assert_eq!(psi_5min.counts[[g, dc]] as usize, psi_5min.n_scenes);
        assert_eq!(psi_20min.counts[[g, dc]] as usize, psi_20min.n_scenes);
    }
}

/// A single zero-jitter point scatterer in noise is flagged by the
/// in-line CV mask exactly where it lives: at its gate, around zero
/// Doppler.
#[test]
fn lone_stable_scatterer_is_flagged_at_zero_doppler() {
    let frame = bs_frame();
    let spec = bs_system();
    let dr = frame.range_step();
    let n_gates = 96usize;
    let gate = 80usize;
    let field = uniform_field(-60.0, [0.0, 0.0], 0.5); // noise only
    let noise = spec.noise_power() * spec.noise_figure;
    let scene = ClutterScene {
        points: vec![ClutterPoint {
            position: [0.0, gate as f64 * dr, 30.0],
            rcs: rcs_for_received_power(&spec, 1e4 * noise, gate as f64 * dr),
            phase_jitter: 0.0,
        }],
        extended: vec![],
    };
    let config = ChainConfig::with_system(spec.clone()).unwrap();
    let cube = synthesize_iq(
        &field,
        &scene,
        &spec,
        &frame,
        &[north_beam()],
        n_gates,
        0.0,
        31,
    )
    .unwrap();
    let mask = cv_masks_for_cube(&cube, &config).unwrap().remove(0);
    let dc = 32usize;
    assert_eq!(mask.mask[[gate, dc]], 0, "clutter bin not flagged");
    // Noise-only gates stay essentially unflagged inside the half band.
    let mut false_flags = 0usize;
    for g in 60..n_gates {
        if g == gate {
            continue;
        }
        for k in half_band_bins(64) {
            if mask.mask[[g, k]] == 0 {
                false_flags += 1;
            }
        }
    }
    let total = (n_gates - 60 - 1) * 32;
    assert!(
        (false_flags as f64) < 0.01 * total as f64,
        "{false_flags} of {total} noise bins flagged"
    );
}

/// Growing the mask (a higher CV threshold flags more bins) must not move
/// reported reflectivity at surviving gates beyond the interpolation
/// residual bound; regression-tested on the golden cube.
#[test]
fn mask_growth_barely_moves_reflectivity() {
    let cube = bswrm_core::io::read_cube(&fixtures().join("golden/storm-a.cube")).unwrap();
    let scene =
        bswrm_core::io::read_scene_config(&fixtures().join("scenes/storm-two-site.toml")).unwrap();
    let frame = scene.frame.to_frame().unwrap();
    let spec = scene.system.to_spec(&frame).unwrap();
    let base_config = ChainConfig::with_system(spec.clone()).unwrap();
    let mut wide_config = base_config.clone();
    wide_config.cv_threshold = 0.2;

    let base = process_sweep(&cube, &base_config, None, None).unwrap();
    let wide = process_sweep(&cube, &wide_config, None, None).unwrap();
    let mut shifts = Vec::new();
    for beam in 0..base.n_beams() {
        for gate in 0..base.n_gates() {
            let a = base.cells[[beam, gate]];
            let b = wide.cells[[beam, gate]];
            if a.validity.is_valid() && b.validity.is_valid() {
                shifts.push((b.reflectivity_dbz() - a.reflectivity_dbz()).abs());
            }
        }
    }
    assert!(shifts.len() > 500, "too few commonly valid gates");
    shifts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let median = shifts[shifts.len() / 2];
    let max = *shifts.last().unwrap();
    assert!(median <= 0.5, "median |dZ| {median:.3} dB");
    assert!(max <= 3.0, "max |dZ| {max:.3} dB");
}
