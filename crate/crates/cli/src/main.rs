//! `bswrm` — simulate, process, and compare base-station weather-radar
//! sweeps.
//!
//! Exit codes: 0 on success, 2 for bad input (missing or malformed files,
//! invalid parameters), 3 for processing failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bswrm_core::clutter::{accumulate_persistency, persistency_mask, persistency_quantile};
use bswrm_core::dsd::{ingest_disdrometer, tune_zr, ZrTuningOptions};
use bswrm_core::error::Error;
use bswrm_core::io;
use bswrm_core::physics::{
    antenna_correction_factor, mdr, mdz, radar_constant, PowerReference, ScatteringTable,
    ANTENNA_QUADRATURE_POINTS,
};
use bswrm_core::pipeline::{compare_sites, cv_masks_for_cube, process_sweep};
use bswrm_core::sim::{
    generate_rain_field, ground_truth, project_two_sites, synthesize_iq, SiteGeometry,
};
use bswrm_core::types::{IqCube, SPEED_OF_LIGHT};

#[derive(Parser)]
#[command(
    name = "bswrm",
    version,
    about = "Base-station weather-radar processing: synthesize pulsed I/Q data, \
             suppress ground clutter, extract radar moments, retrieve rain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize I/Q cubes (plus truth sidecars) from a scene description.
    Simulate(SimulateArgs),
    /// Run the processing chain on a cube, emitting a product table.
    Process(ProcessArgs),
    /// Accumulate CV masks over many cubes into a persistency-driven mask.
    ClutterMap(ClutterMapArgs),
    /// Fit Z-R power-law coefficients from a disdrometer record file.
    FitZr(FitZrArgs),
    /// Tabulate MDZ/MDR sensitivity curves for one or more systems.
    Sensitivity(SensitivityArgs),
    /// Compare two product time series over a common-grid pairing.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene description (TOML).
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output cube for site A.
    #[arg(long)]
    output: PathBuf,
    /// Output cube for site B (required when the scene has two sites).
    #[arg(long)]
    output_b: Option<PathBuf>,
    /// Ground-truth sidecar for site A.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    truth_b: Option<PathBuf>,
    /// Two-site pairing table (requires a scene with site_b and
    /// common_grid).
    #[arg(long)]
    pairing: Option<PathBuf>,
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long)]
    cube: PathBuf,
    /// Chain configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Precomputed clutter masks; in-line CV masks are used when absent.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Override the window declared in the configuration.
    #[arg(long)]
    window: Option<String>,
    /// Product CSV output.
    #[arg(long)]
    output: PathBuf,
    /// Metadata document path (defaults to `<output>.meta.json`).
    #[arg(long)]
    metadata: Option<PathBuf>,
}

#[derive(Args)]
struct ClutterMapArgs {
    /// Cubes from a no-rain calibration interval.
    #[arg(long, num_args = 1.., required = true)]
    cubes: Vec<PathBuf>,
    #[arg(long)]
    config: PathBuf,
    /// Persistency threshold as a count; overrides --quantile.
    #[arg(long)]
    threshold: Option<f64>,
    /// Persistency threshold as a quantile of the counts.
    #[arg(long, default_value_t = 0.95)]
    quantile: f64,
    /// Output mask file.
    #[arg(long)]
    output: PathBuf,
    /// Also store the raw persistency counts.
    #[arg(long)]
    persistency_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitZrArgs {
    /// Disdrometer record file.
    #[arg(long)]
    dsd: PathBuf,
    /// Scattering table; a Rayleigh closed form at --frequency is used
    /// when absent.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Carrier frequency for the Rayleigh fallback (Hz).
    #[arg(long, default_value_t = 4.9e9)]
    frequency: f64,
    /// Common evaluation altitude (m a.s.l.).
    #[arg(long, default_value_t = 0.0)]
    altitude: f64,
    /// Gaussian perturbation applied to simulated reflectivities (dB).
    #[arg(long, default_value_t = 1.0)]
    noise_db: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output coefficient document (JSON).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SensitivityArgs {
    /// System description files (TOML), one table block each.
    #[arg(long, num_args = 1.., required = true)]
    systems: Vec<PathBuf>,
    #[arg(long, default_value_t = 1000.0)]
    range_start: f64,
    #[arg(long, default_value_t = 20000.0)]
    range_stop: f64,
    #[arg(long, default_value_t = 500.0)]
    range_step: f64,
    /// Z-R preset name (marshall-palmer | bs-tuned) or "a,b".
    #[arg(long, default_value = "bs-tuned")]
    zr: String,
    #[arg(long, default_value_t = 1.0)]
    snr_min: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Product CSVs of site A, each with `<file>.meta.json` alongside.
    #[arg(long, num_args = 1.., required = true)]
    products_a: Vec<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    products_b: Vec<PathBuf>,
    /// Pairing table from `simulate --pairing`.
    #[arg(long)]
    pairing: PathBuf,
    /// Maximum timestamp misalignment when pairing sweeps (s); half the
    /// sweep period is the usual choice.
    #[arg(long, default_value_t = 2.0)]
    max_lag: f64,
    /// Comparison report (JSON).
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Process(args) => run_process(args),
        Command::ClutterMap(args) => run_clutter_map(args),
        Command::FitZr(args) => run_fit_zr(args),
        Command::Sensitivity(args) => run_sensitivity(args),
        Command::Compare(args) => run_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bswrm: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input, 3 for processing failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_)
        | Error::Parse { .. }
        | Error::FormatViolation { .. }
        | Error::DimensionMismatch(_) => 2,
        Error::Io(io_err) if io_err.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 3,
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), Error> {
    let scene = io::read_scene_config(&args.scene)?;
    let frame = scene.frame.to_frame()?;
    let system = scene.system.to_spec(&frame)?;
    let field = generate_rain_field(args.seed, &scene.field)?;
    let beams_a = scene.site_a.to_beams(&scene.system)?;

    let cube_a = synthesize_iq(
        &field,
        &scene.clutter,
        &system,
        &frame,
        &beams_a,
        scene.n_gates,
        scene.timestamp,
        args.seed,
    )?;
    io::write_cube(&args.output, &cube_a)?;
    println!(
        "wrote {} ({} beams x {} pulses x {} gates)",
        args.output.display(),
        cube_a.n_beams(),
        cube_a.n_pulses(),
        cube_a.n_gates()
    );
    if let Some(path) = &args.truth {
        let truth = ground_truth(
            &field,
            &scene.clutter,
            &system,
            &frame,
            &beams_a,
            scene.n_gates,
            scene.timestamp,
        )?;
        io::write_truth(path, &truth, frame.range_step())?;
    }

    if let Some(site_b) = &scene.site_b {
        let output_b = args
            .output_b
            .as_ref()
            .ok_or_else(|| Error::invalid("scene declares site_b: pass --output-b for its cube"))?;
        let beams_b = site_b.to_beams(&scene.system)?;
        // Site B draws from its own seed stream.
        let cube_b = synthesize_iq(
            &field,
            &scene.clutter,
            &system,
            &frame,
            &beams_b,
            scene.n_gates,
            scene.timestamp,
            args.seed.wrapping_add(1),
        )?;
        io::write_cube(output_b, &cube_b)?;
        println!("wrote {}", output_b.display());
        if let Some(path) = &args.truth_b {
            let truth = ground_truth(
                &field,
                &scene.clutter,
                &system,
                &frame,
                &beams_b,
                scene.n_gates,
                scene.timestamp,
            )?;
            io::write_truth(path, &truth, frame.range_step())?;
        }
        if let Some(path) = &args.pairing {
            let grid = scene.common_grid.ok_or_else(|| {
                Error::invalid("pairing output needs a [common_grid] block in the scene")
            })?;
            let geo_a = SiteGeometry {
                beams: beams_a.clone(),
                frame: frame.clone(),
                n_gates: scene.n_gates,
            };
            let geo_b = SiteGeometry {
                beams: beams_b,
                frame: frame.clone(),
                n_gates: scene.n_gates,
            };
            let pairing = project_two_sites(&geo_a, &geo_b, &grid);
            io::write_pairing(path, &pairing)?;
            println!("wrote {} ({} paired cells)", path.display(), pairing.len());
        }
    } else if args.output_b.is_some() || args.pairing.is_some() {
        return Err(Error::invalid(
            "scene has no site_b; --output-b/--pairing do not apply",
        ));
    }
    Ok(())
}

fn run_process(args: ProcessArgs) -> Result<(), Error> {
    let cube = io::read_cube(&args.cube)?;
    let mut file_config = io::read_chain_config(&args.config)?;
    if let Some(window) = &args.window {
        file_config.window = window.parse()?;
    }
    let config = file_config.into_chain_config(&cube)?;
    let (masks, mask_source) = match &args.mask {
        Some(path) => (Some(io::read_masks(path)?), path.display().to_string()),
        None => (None, "inline-cv".to_string()),
    };
    let grid = process_sweep(&cube, &config, masks.as_deref(), None)?;
    io::write_products(&args.output, &grid)?;
    let meta_path = args
        .metadata
        .unwrap_or_else(|| default_metadata_path(&args.output));
    let meta = io::ProductMetadata::from_chain(&config, &grid, mask_source);
    io::write_metadata(&meta_path, &meta)?;
    let valid = grid.cells.iter().filter(|c| c.validity.is_valid()).count();
    println!(
        "wrote {} ({} of {} gates valid) and {}",
        args.output.display(),
        valid,
        grid.cells.len(),
        meta_path.display()
    );
    Ok(())
}

fn default_metadata_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn run_clutter_map(args: ClutterMapArgs) -> Result<(), Error> {
    let first_cube = io::read_cube(&args.cubes[0])?;
    let file_config = io::read_chain_config(&args.config)?;
    let config = file_config.into_chain_config(&first_cube)?;
    let n_beams = first_cube.n_beams();

    // Per-beam CV masks per scene.
    let mut per_beam: Vec<Vec<bswrm_core::ClutterMask>> = vec![Vec::new(); n_beams];
    let mut t_min = f64::MAX;
    let mut t_max = f64::MIN;
    let mut load = |cube: IqCube| -> Result<(), Error> {
        if cube.n_beams() != n_beams {
            return Err(Error::dims("all cubes must share the beam count"));
        }
        t_min = t_min.min(cube.timestamp);
        t_max = t_max.max(cube.timestamp);
        for (beam, mask) in cv_masks_for_cube(&cube, &config)?.into_iter().enumerate() {
            per_beam[beam].push(mask);
        }
        Ok(())
    };
    load(first_cube)?;
    for path in &args.cubes[1..] {
        load(io::read_cube(path)?)?;
    }
    let window_seconds = (t_max - t_min).max(0.0);
    let mut maps = Vec::with_capacity(n_beams);
    let mut masks = Vec::with_capacity(n_beams);
    for beam_masks in &per_beam {
        let map = accumulate_persistency(beam_masks, window_seconds)?;
        let threshold = match args.threshold {
            Some(t) => t,
            None => persistency_quantile(&map, args.quantile)?,
        };
        masks.push(persistency_mask(&map, threshold)?);
        maps.push(map);
    }
    io::write_masks(&args.output, &masks)?;
    if let Some(path) = &args.persistency_out {
        io::write_persistency(path, &maps)?;
    }
    println!(
        "wrote {} from {} scenes over {:.0} s",
        args.output.display(),
        args.cubes.len(),
        window_seconds
    );
    Ok(())
}

fn run_fit_zr(args: FitZrArgs) -> Result<(), Error> {
    let (records, diagnostics) = ingest_disdrometer(&args.dsd)?;
    for d in &diagnostics {
        eprintln!("{}:{}: {}", args.dsd.display(), d.line, d.message);
    }
    if records.is_empty() {
        return Err(Error::invalid("no valid disdrometer records"));
    }
    let table = match &args.table {
        Some(path) => io::read_scattering_table(path)?,
        None => {
            let grid: Vec<f64> = (1..=80).map(|i| i as f64 * 0.1).collect();
            ScatteringTable::rayleigh(args.frequency, 0.93, grid)?
        }
    };
    let wavelength = SPEED_OF_LIGHT / table.frequency;
    let opts = ZrTuningOptions {
        altitude: args.altitude,
        noise_db: args.noise_db,
        seed: args.seed,
        ..Default::default()
    };
    let coeffs = tune_zr(&records, &table, wavelength, 0.93, &opts)?;
    io::write_zr(&args.output, &coeffs)?;
    let diag = coeffs.diagnostics.expect("fit always carries diagnostics");
    println!(
        "wrote {}: a = {:.4}, b = {:.4} ({} records, residual {:.2} dB)",
        args.output.display(),
        coeffs.a,
        coeffs.b,
        diag.n_samples,
        diag.residual_db
    );
    Ok(())
}

fn run_sensitivity(args: SensitivityArgs) -> Result<(), Error> {
    if !(args.range_start > 0.0 && args.range_stop > args.range_start && args.range_step > 0.0) {
        return Err(Error::invalid("bad range grid"));
    }
    let zr = parse_zr(&args.zr)?;
    let mut rows = Vec::new();
    for path in &args.systems {
        let file = io::read_sensitivity_system(path)?;
        let spec = file.to_spec()?;
        let antenna_factor = match file.antenna_factor {
            Some(f) => f,
            None => antenna_correction_factor(
                &spec.pattern,
                spec.hpbw_az,
                spec.hpbw_el,
                ANTENNA_QUADRATURE_POINTS,
            )?,
        };
        let constant = radar_constant(&spec, antenna_factor, PowerReference::AfterCompression)?;
        let mut r = args.range_start;
        while r <= args.range_stop + 1e-9 {
            let mdz_dbz = mdz(&spec, constant, r, args.snr_min)?;
            rows.push(io::SensitivityRow {
                system: file.name.clone(),
                range_m: r,
                mdz_dbz,
                mdr_mmh: mdr(mdz_dbz, &zr),
            });
            r += args.range_step;
        }
    }
    io::write_sensitivity(&args.output, &rows)?;
    println!("wrote {} ({} rows)", args.output.display(), rows.len());
    Ok(())
}

fn parse_zr(text: &str) -> Result<bswrm_core::dsd::ZrCoefficients, Error> {
    if let Some((a, b)) = text.split_once(',') {
        let a: f64 = a
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad Z-R coefficient '{a}'")))?;
        let b: f64 = b
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad Z-R coefficient '{b}'")))?;
        bswrm_core::dsd::ZrCoefficients::new(a, b, bswrm_core::dsd::ZrProvenance::Fitted)
    } else {
        io::ZrSelection::Preset(text.to_string()).to_coefficients()
    }
}

fn run_compare(args: CompareArgs) -> Result<(), Error> {
    let pairing = io::read_pairing(&args.pairing)?;
    let read_series = |paths: &[PathBuf]| -> Result<Vec<bswrm_core::ProductGrid>, Error> {
        paths
            .iter()
            .map(|p| {
                let meta = io::read_metadata(&default_metadata_path(p))?;
                io::read_products(p, meta.timestamp)
            })
            .collect()
    };
    let series_a = read_series(&args.products_a)?;
    let series_b = read_series(&args.products_b)?;
    let report = compare_sites(&series_a, &series_b, &pairing, args.max_lag)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::invalid(format!("report serialization failed: {e}")))?;
    std::fs::write(&args.output, json)?;
    match report.median_rain_correlation {
        Some(r) => println!(
            "wrote {}: correlation {:.3} over {} aligned sweeps",
            args.output.display(),
            r,
            report.n_aligned
        ),
        None => println!(
            "wrote {}: correlation undefined ({} aligned sweeps)",
            args.output.display(),
            report.n_aligned
        ),
    }
    Ok(())
}
