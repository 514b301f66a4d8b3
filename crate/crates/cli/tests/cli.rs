//! End-to-end tests of the `bswrm` binary: every subcommand, the
//! documented exit codes, and output determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bswrm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bswrm"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("failed to spawn bswrm")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_is_deterministic_and_cube_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let scene = fixtures().join("scenes/minimal.toml");
    let cube1 = dir.path().join("a.cube");
    let cube2 = dir.path().join("b.cube");
    for out_path in [&cube1, &cube2] {
        let out = run(bswrm()
            .arg("simulate")
            .arg("--scene")
            .arg(&scene)
            .arg("--seed")
            .arg("7")
            .arg("--output")
            .arg(out_path));
        assert_success(&out);
    }
    let bytes1 = std::fs::read(&cube1).unwrap();
    let bytes2 = std::fs::read(&cube2).unwrap();
    assert_eq!(bytes1, bytes2, "same seed must give byte-identical cubes");
    let cube = bswrm_core::io::read_cube(&cube1).unwrap();
    assert_eq!(cube.n_beams(), 3);
    assert_eq!(cube.n_pulses(), 128);
    assert_eq!(cube.n_gates(), 144);
}

#[test]
fn process_writes_products_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let scene = fixtures().join("scenes/minimal.toml");
    let cube = dir.path().join("a.cube");
    assert_success(&run(bswrm()
        .arg("simulate")
        .arg("--scene")
        .arg(&scene)
        .arg("--seed")
        .arg("1")
        .arg("--output")
        .arg(&cube)));

    let product = dir.path().join("a.csv");
    assert_success(&run(bswrm()
        .arg("process")
        .arg("--cube")
        .arg(&cube)
        .arg("--config")
        .arg(fixtures().join("chains/default.toml"))
        .arg("--output")
        .arg(&product)));
    let meta_path = dir.path().join("a.csv.meta.json");
    let meta = bswrm_core::io::read_metadata(&meta_path).unwrap();
    assert_eq!(meta.mask_source, "inline-cv");
    assert_eq!(format!("{}", meta.window), "blackman");
    let grid = bswrm_core::io::read_products(&product, meta.timestamp).unwrap();
    assert_eq!(grid.n_gates(), 144);
    // Most non-blind gates should be valid in this strong uniform rain.
    let valid = grid.cells.iter().filter(|c| c.validity.is_valid()).count();
    assert!(valid > 250, "only {valid} valid gates");

    // Window override shows up in the metadata record.
    let product2 = dir.path().join("rect.csv");
    assert_success(&run(bswrm()
        .arg("process")
        .arg("--cube")
        .arg(&cube)
        .arg("--config")
        .arg(fixtures().join("chains/default.toml"))
        .arg("--window")
        .arg("rectangular")
        .arg("--output")
        .arg(&product2)));
    let meta2 = bswrm_core::io::read_metadata(&dir.path().join("rect.csv.meta.json")).unwrap();
    assert_eq!(format!("{}", meta2.window), "rectangular");
}

#[test]
fn process_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scene = fixtures().join("scenes/minimal.toml");
    let cube = dir.path().join("a.cube");
    assert_success(&run(bswrm()
        .arg("simulate")
        .arg("--scene")
        .arg(&scene)
        .arg("--seed")
        .arg("3")
        .arg("--output")
        .arg(&cube)));
    let p1 = dir.path().join("p1.csv");
    let p2 = dir.path().join("p2.csv");
    for p in [&p1, &p2] {
        assert_success(&run(bswrm()
            .arg("process")
            .arg("--cube")
            .arg(&cube)
            .arg("--config")
            .arg(fixtures().join("chains/default.toml"))
            .arg("--output")
            .arg(p)));
    }
    assert_eq!(
        std::fs::read(&p1).unwrap(),
        std::fs::read(&p2).unwrap(),
        "same cube and config must give byte-identical products"
    );
}

#[test]
fn missing_cube_exits_2_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let product = dir.path().join("never.csv");
    let out = run(bswrm()
        .arg("process")
        .arg("--cube")
        .arg(dir.path().join("no-such.cube"))
        .arg("--config")
        .arg(fixtures().join("chains/default.toml"))
        .arg("--output")
        .arg(&product));
    assert_eq!(out.status.code(), Some(2));
    assert!(!product.exists(), "partial output written on failure");
}

#[test]
fn malformed_scene_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("bad.toml");
    std::fs::write(&scene, "frame = \"nope\"\n").unwrap();
    let out = run(bswrm()
        .arg("simulate")
        .arg("--scene")
        .arg(&scene)
        .arg("--output")
        .arg(dir.path().join("x.cube")));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn clutter_map_accumulates_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let scene = fixtures().join("scenes/minimal.toml");
    let mut cubes = Vec::new();
    for seed in 0..3 {
        let cube = dir.path().join(format!("c{seed}.cube"));
        assert_success(&run(bswrm()
            .arg("simulate")
            .arg("--scene")
            .arg(&scene)
            .arg("--seed")
            .arg(seed.to_string())
            .arg("--output")
            .arg(&cube)));
        cubes.push(cube);
    }
    let mask_path = dir.path().join("cal.mask");
    let psy_path = dir.path().join("cal.psy");
    let mut cmd = bswrm();
    cmd.arg("clutter-map")
        .arg("--config")
        .arg(fixtures().join("chains/default.toml"))
        .arg("--threshold")
        .arg("1")
        .arg("--output")
        .arg(&mask_path)
        .arg("--persistency-out")
        .arg(&psy_path)
        .arg("--cubes");
    for c in &cubes {
        cmd.arg(c);
    }
    assert_success(&run(&mut cmd));
    let masks = bswrm_core::io::read_masks(&mask_path).unwrap();
    assert_eq!(masks.len(), 3); // one per beam
    assert_eq!(masks[0].mask.dim(), (144, 64));
    let maps = bswrm_core::io::read_persistency(&psy_path).unwrap();
    assert_eq!(maps[0].n_scenes, 3);
}

#[test]
fn fit_zr_produces_coefficient_document() {
    let dir = tempfile::tempdir().unwrap();
    let dsd_path = dir.path().join("records.csv");
    // Exponential DSDs with varying slope, one-minute records.
    let mut content =
        String::from("timestamp_s,site_id,altitude_m,d_center_mm,d_width_mm,n_per_m3_mm\n");
    for rec in 0..40 {
        let slope = 2.0 + 0.05 * rec as f64;
        for bin in 0..40 {
            let d = 0.2 + 0.15 * bin as f64;
            let n = 8000.0 * (-slope * d).exp();
            content.push_str(&format!("{},gid-01,120.0,{d},0.15,{n}\n", 60 * rec));
        }
    }
    std::fs::write(&dsd_path, content).unwrap();
    let out_path = dir.path().join("zr.json");
    let out = run(bswrm()
        .arg("fit-zr")
        .arg("--dsd")
        .arg(&dsd_path)
        .arg("--noise-db")
        .arg("0.5")
        .arg("--seed")
        .arg("5")
        .arg("--output")
        .arg(&out_path));
    assert_success(&out);
    let zr = bswrm_core::io::read_zr(&out_path).unwrap();
    assert!(zr.a > 0.0 && zr.b > 0.0);
    assert_eq!(zr.diagnostics.unwrap().n_samples, 40);
}

#[test]
fn sensitivity_table_obeys_range_doubling_and_constant_offset() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sens.csv");
    let out = run(bswrm()
        .arg("sensitivity")
        .arg("--range-start")
        .arg("1000")
        .arg("--range-stop")
        .arg("16000")
        .arg("--range-step")
        .arg("1000")
        .arg("--output")
        .arg(&out_path)
        .arg("--systems")
        .arg(fixtures().join("systems/s-band.toml"))
        .arg(fixtures().join("systems/c-band.toml"))
        .arg(fixtures().join("systems/x-band.toml"))
        .arg(fixtures().join("systems/bs.toml")));
    assert_success(&out);
    let rows = bswrm_core::io::read_sensitivity(&out_path).unwrap();
    assert_eq!(rows.len(), 4 * 16);
    let lookup = |system: &str, range: f64| -> f64 {
        rows.iter()
            .find(|r| r.system == system && (r.range_m - range).abs() < 1.0)
            .unwrap()
            .mdz_dbz
    };
    for system in ["s-band", "c-band", "x-band", "bs"] {
        for r in [1000.0, 4000.0, 8000.0] {
            let dd = lookup(system, 2.0 * r) - lookup(system, r);
            assert!(
                (dd - 20.0 * 2f64.log10()).abs() < 1e-9,
                "{system}: {dd} dB per doubling"
            );
        }
    }
    // The BS-minus-C-band column is range-independent.
    let offset0 = lookup("bs", 1000.0) - lookup("c-band", 1000.0);
    for r in (2..=16).map(|k| k as f64 * 1000.0) {
        let offset = lookup("bs", r) - lookup("c-band", r);
        assert!((offset - offset0).abs() < 1e-9);
    }
    assert!(offset0 > 0.0, "BS must be less sensitive than C-band");
    // BS stays below 1 mm/h with the tuned coefficients.
    for row in rows.iter().filter(|r| r.system == "bs") {
        assert!(
            row.mdr_mmh < 1.0,
            "MDR {} at {} m",
            row.mdr_mmh,
            row.range_m
        );
    }
}

#[test]
fn two_site_simulate_process_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = fixtures().join("scenes/storm-two-site.toml");
    let cube_a = dir.path().join("a.cube");
    let cube_b = dir.path().join("b.cube");
    let pairing = dir.path().join("pairs.csv");
    assert_success(&run(bswrm()
        .arg("simulate")
        .arg("--scene")
        .arg(&scene)
        .arg("--seed")
        .arg("42")
        .arg("--output")
        .arg(&cube_a)
        .arg("--output-b")
        .arg(&cube_b)
        .arg("--truth")
        .arg(dir.path().join("a.truth.csv"))
        .arg("--pairing")
        .arg(&pairing)));
    let pairs = bswrm_core::io::read_pairing(&pairing).unwrap();
    assert!(!pairs.is_empty(), "two-site scene must share cells");

    let product_a = dir.path().join("a.csv");
    let product_b = dir.path().join("b.csv");
    for (cube, product) in [(&cube_a, &product_a), (&cube_b, &product_b)] {
        assert_success(&run(bswrm()
            .arg("process")
            .arg("--cube")
            .arg(cube)
            .arg("--config")
            .arg(fixtures().join("chains/default.toml"))
            .arg("--output")
            .arg(product)));
    }
    let report_path = dir.path().join("report.json");
    assert_success(&run(bswrm()
        .arg("compare")
        .arg("--products-a")
        .arg(&product_a)
        .arg("--products-b")
        .arg(&product_b)
        .arg("--pairing")
        .arg(&pairing)
        .arg("--output")
        .arg(&report_path)));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["n_aligned"], 1);
    assert!(report["n_paired_cells"].as_u64().unwrap() > 0);
}
