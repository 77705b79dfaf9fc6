//! kzmsim: command-line front end for the ion-crystal quench simulator.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or parse
//! error. Every command writes a `manifest.json` next to its outputs with
//! the fully resolved configuration and seeds.

mod io;
mod layer;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kzmsim_core::{
    anisotropy_comparison, axial_frequency_from_voltage, build_reference_templates,
    classify_configuration, critical_axial_frequency, equilibrium_positions, fit_power_law,
    fourier_template_classify, gamma_at_critical_point, mode_spectrum, render_synthetic_image,
    run_quench, run_sweep, zigzag_reference_amplitudes, FourierOutcome, ImageGeometry, KzmError,
    ModeBranch, RunConfig,
};

use manifest::RunManifest;

/// Error kind decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ErrorKind {
    /// Bad configuration, flags, or input files: exit 2.
    Config,
    /// Failure while running: exit 1.
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    kind: ErrorKind,
    message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Runtime,
            message: message.into(),
        }
    }

    /// Library errors that indicate a bad configuration map to exit 2;
    /// everything else is a runtime failure.
    pub fn from_config_error(err: KzmError) -> Self {
        match err {
            KzmError::Config(_) | KzmError::Domain(_) | KzmError::Range(_) => {
                Self::config(err.to_string())
            }
            other => Self::runtime(other.to_string()),
        }
    }
}

impl From<KzmError> for CliError {
    fn from(err: KzmError) -> Self {
        Self::from_config_error(err)
    }
}

#[derive(Parser)]
#[command(
    name = "kzmsim",
    version,
    about = "Molecular-dynamics simulator for defect formation in quenched ion Coulomb crystals"
)]
struct Cli {
    /// Configuration file (TOML). Defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. --set tau_us=2.0 or
    /// --set cooling.friction_hz=8e3. Repeatable; applied after the file
    /// and environment.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Worker threads for trajectory batches (default: all cores, or
    /// KZMSIM_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory (created if missing).
    #[arg(short, long, global = true, default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate the linear-to-zigzag critical axial frequency.
    CriticalPoint,
    /// Solve the crystal equilibrium and normal modes at a fixed axial
    /// frequency.
    Equilibrium(EquilibriumArgs),
    /// Run one quench trajectory and classify the outcome.
    Quench(QuenchArgs),
    /// Run the Monte-Carlo sweep over quench timescales.
    Sweep(SweepArgs),
    /// Fit the defect-density power law from a sweep CSV.
    Fit(FitArgs),
    /// Classify a final-state CSV into a structural class.
    Classify(ClassifyArgs),
    /// Render a final-state CSV into a synthetic camera image (PGM).
    Render(RenderArgs),
}

#[derive(Args)]
struct EquilibriumArgs {
    /// Axial frequency in kHz; defaults to the ramp's final value.
    #[arg(long)]
    axial_khz: Option<f64>,
}

#[derive(Args)]
struct QuenchArgs {
    /// Trajectory seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the sampled trajectory (requires integrator.sample_stride
    /// in the configuration, or --stride).
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Compare the two configured anisotropy values with matched seeds
    /// instead of sweeping each independently.
    #[arg(long)]
    compare_anisotropy: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Sweep CSV produced by `kzmsim sweep`.
    #[arg(long)]
    input: PathBuf,
    /// Lower edge of the fit window in gamma (rad/s^2); defaults to the
    /// range spanned by points with 0.05 <= d <= 0.8.
    #[arg(long)]
    window_lo: Option<f64>,
    /// Upper edge of the fit window in gamma (rad/s^2).
    #[arg(long)]
    window_hi: Option<f64>,
    /// Ordinary (unweighted) least squares instead of error-weighted.
    #[arg(long)]
    unweighted: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Final-state CSV (trajectory schema; last time block is used).
    #[arg(long)]
    input: PathBuf,
    /// Also classify through the image/Fourier pipeline and report both.
    #[arg(long)]
    fourier: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// Final-state CSV (trajectory schema; last time block is used).
    #[arg(long)]
    input: PathBuf,
    /// Output image name inside the output directory.
    #[arg(long, default_value = "image.pgm")]
    name: String,
    /// Mean photons per unit spot intensity; enables Poisson shot noise.
    #[arg(long)]
    shot_noise: Option<f64>,
    /// Shot-noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status
            use clap::error::ErrorKind as CK;
            if matches!(e.kind(), CK::DisplayHelp | CK::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            match e.kind {
                ErrorKind::Config => ExitCode::from(2),
                ErrorKind::Runtime => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = layer::load_config(cli.config.as_deref(), &cli.sets)?;
    if let Some(workers) = layer::resolve_workers(cli.workers)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| {
        CliError::runtime(format!("cannot create '{}': {e}", cli.out_dir.display()))
    })?;
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::CriticalPoint => cmd_critical_point(&config, out),
        Command::Equilibrium(args) => cmd_equilibrium(&config, out, &args),
        Command::Quench(args) => cmd_quench(&config, out, &args),
        Command::Sweep(args) => cmd_sweep(&config, out, &args),
        Command::Fit(args) => cmd_fit(&config, out, &args),
        Command::Classify(args) => cmd_classify(&config, out, &args),
        Command::Render(args) => cmd_render(&config, out, &args),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::runtime(format!("serialization: {e}")))?;
    std::fs::write(path, text)
        .map_err(|e| CliError::runtime(format!("writing '{}': {e}", path.display())))
}

fn cmd_critical_point(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("critical-point", config);
    let trap = config.trap()?;
    let cp = critical_axial_frequency(config.n_ions, trap.omega_weak, trap.anisotropy)?;
    let hz = cp.omega_crit / (2.0 * std::f64::consts::PI);
    manifest.record("omega_crit_rad_s", cp.omega_crit);
    manifest.record("omega_crit_hz", hz);
    manifest.record("degenerate_anisotropy", cp.degenerate_anisotropy);
    let path = out.join("critical_point.json");
    write_json(&path, &cp)?;
    manifest.add_output(&path);
    manifest.finish(out)?;
    println!(
        "critical axial frequency: {:.4} kHz ({} ions, anisotropy {}){}",
        hz / 1e3,
        config.n_ions,
        trap.anisotropy,
        if cp.degenerate_anisotropy {
            " [degenerate anisotropy: zigzag plane undefined]"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_equilibrium(config: &RunConfig, out: &Path, args: &EquilibriumArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("equilibrium", config);
    let trap = config.trap()?;
    let omega_ax = match args.axial_khz {
        Some(khz) => {
            if !(khz > 0.0) {
                return Err(CliError::config("--axial-khz must be positive"));
            }
            2.0 * std::f64::consts::PI * khz * 1e3
        }
        None => axial_frequency_from_voltage(&trap, config.v_end)?,
    };
    manifest.record("omega_ax_rad_s", omega_ax);
    let eq = equilibrium_positions(config.n_ions, config.ion_species()?, &trap, omega_ax)?;
    let modes = mode_spectrum(&eq)?;

    let pos_path = out.join("positions.csv");
    {
        let mut w = csv::Writer::from_path(&pos_path)
            .map_err(|e| CliError::runtime(format!("cannot write '{}': {e}", pos_path.display())))?;
        w.write_record(["ion_index", "x_um", "y_um", "z_um"])
            .map_err(|e| CliError::runtime(e.to_string()))?;
        for (i, p) in eq.positions_si().iter().enumerate() {
            w.write_record([
                i.to_string(),
                format!("{:.6}", p[0] * 1e6),
                format!("{:.6}", p[1] * 1e6),
                format!("{:.6}", p[2] * 1e6),
            ])
            .map_err(|e| CliError::runtime(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::runtime(e.to_string()))?;
    }
    manifest.add_output(&pos_path);

    let mode_path = out.join("modes.csv");
    {
        let mut w = csv::Writer::from_path(&mode_path).map_err(|e| {
            CliError::runtime(format!("cannot write '{}': {e}", mode_path.display()))
        })?;
        w.write_record(["mode_index", "freq_hz", "branch"])
            .map_err(|e| CliError::runtime(e.to_string()))?;
        for (k, (&f, &b)) in modes.frequencies.iter().zip(&modes.branches).enumerate() {
            let branch = match b {
                ModeBranch::WeakTransverse => "weak_transverse",
                ModeBranch::StrongTransverse => "strong_transverse",
                ModeBranch::Axial => "axial",
            };
            w.write_record([
                k.to_string(),
                format!("{:.4}", f / (2.0 * std::f64::consts::PI)),
                branch.to_string(),
            ])
            .map_err(|e| CliError::runtime(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::runtime(e.to_string()))?;
    }
    manifest.add_output(&mode_path);
    manifest.record("residual_gradient_norm", eq.residual_gradient_norm);
    manifest.finish(out)?;
    let lowest_hz = modes.frequencies.first().copied().unwrap_or(f64::NAN)
        / (2.0 * std::f64::consts::PI);
    println!(
        "equilibrium at {:.2} kHz axial: {} ions, lowest mode {:.3} kHz",
        omega_ax / (2.0 * std::f64::consts::PI) / 1e3,
        eq.n_ions(),
        lowest_hz / 1e3,
    );
    Ok(())
}

fn cmd_quench(config: &RunConfig, out: &Path, args: &QuenchArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("quench", config);
    manifest.seed = Some(args.seed);
    let mut setup = config.quench_setup()?;
    if let Some(stride) = args.stride {
        setup.integrator.sample_stride = stride;
    }
    let trap = config.trap()?;
    let omega_final = axial_frequency_from_voltage(&trap, config.v_end)?;
    let result = run_quench(&setup, args.seed)?;
    let amps =
        zigzag_reference_amplitudes(config.n_ions, config.ion_species()?, &trap, omega_final)?;
    let thresholds = kzmsim_core::ClassifierThresholds::default();
    let classification = classify_configuration(&result.final_state, &amps, &thresholds)?;

    let final_path = out.join("final_state.csv");
    io::write_trajectory_csv(&final_path, std::slice::from_ref(&result.final_state))?;
    manifest.add_output(&final_path);
    if let Some(snapshots) = &result.snapshots {
        let traj_path = out.join("trajectory.csv");
        io::write_trajectory_csv(&traj_path, snapshots)?;
        manifest.add_output(&traj_path);
    }
    let class_path = out.join("classification.json");
    write_json(&class_path, &classification)?;
    manifest.add_output(&class_path);
    manifest.record("class", classification.class.as_str());
    manifest.record("kink_count", classification.kink_count as u64);
    manifest.record("swapped", result.swapped);
    manifest.record("min_pair_distance_m", result.min_pair_distance);
    if let Some(onsets) = &result.onset_times {
        manifest.record(
            "onset_times_s",
            serde_json::to_value(onsets).map_err(|e| CliError::runtime(e.to_string()))?,
        );
    }
    manifest.finish(out)?;
    println!(
        "quench seed {}: class {} ({} kinks){}",
        args.seed,
        classification.class.as_str(),
        classification.kink_count,
        if result.swapped { ", ions swapped" } else { "" }
    );
    Ok(())
}

fn cmd_sweep(config: &RunConfig, out: &Path, args: &SweepArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("sweep", config);
    let plan = config.sweep_plan()?;
    manifest.master_seed = Some(plan.master_seed);
    if args.compare_anisotropy {
        let cmp = anisotropy_comparison(&plan)?;
        let a_path = out.join("sweep_a.csv");
        let b_path = out.join("sweep_b.csv");
        io::write_sweep_csv(&a_path, &cmp.points_a)?;
        io::write_sweep_csv(&b_path, &cmp.points_b)?;
        manifest.add_output(&a_path);
        manifest.add_output(&b_path);
        let cmp_path = out.join("comparison.json");
        write_json(&cmp_path, &cmp)?;
        manifest.add_output(&cmp_path);
        manifest.finish(out)?;
        println!(
            "anisotropy comparison {} vs {}: beta {:.3} +- {:.3} vs {:.3} +- {:.3}",
            plan.anisotropy_values[0],
            plan.anisotropy_values[1],
            cmp.fit_a.beta,
            cmp.fit_a.beta_stderr,
            cmp.fit_b.beta,
            cmp.fit_b.beta_stderr,
        );
        return Ok(());
    }
    let points = run_sweep(&plan)?;
    let sweep_path = out.join("sweep.csv");
    io::write_sweep_csv(&sweep_path, &points)?;
    manifest.add_output(&sweep_path);
    let plot_path = out.join("plot_data.csv");
    io::write_plot_data(&plot_path, &points)?;
    manifest.add_output(&plot_path);
    match fit_power_law(&points, None, true) {
        Ok(fit) => {
            let fit_path = out.join("fit.json");
            write_json(&fit_path, &fit)?;
            manifest.add_output(&fit_path);
            manifest.record("beta", fit.beta);
            manifest.record("beta_stderr", fit.beta_stderr);
            println!(
                "sweep complete: {} points, beta = {:.3} +- {:.3} over {} fit points",
                points.len(),
                fit.beta,
                fit.beta_stderr,
                fit.points_used
            );
        }
        Err(e) => {
            // a sweep too narrow to fit is still a valid sweep
            manifest.record("fit_skipped", e.to_string());
            println!(
                "sweep complete: {} points (no power-law fit: {e})",
                points.len()
            );
        }
    }
    manifest.finish(out)?;
    Ok(())
}

fn cmd_fit(config: &RunConfig, out: &Path, args: &FitArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("fit", config);
    let points = io::read_sweep_csv(&args.input)?;
    let window = match (args.window_lo, args.window_hi) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => {
            return Err(CliError::config(
                "--window-lo and --window-hi must be given together",
            ))
        }
    };
    let fit = fit_power_law(&points, window, !args.unweighted)?;
    let fit_path = out.join("fit.json");
    write_json(&fit_path, &fit)?;
    manifest.add_output(&fit_path);
    manifest.record("beta", fit.beta);
    manifest.record("beta_stderr", fit.beta_stderr);
    manifest.record("input", args.input.display().to_string());
    manifest.finish(out)?;
    println!(
        "beta = {:.4} +- {:.4} (amplitude ln A = {:.3}, {} points, window {:.3e}..{:.3e})",
        fit.beta, fit.beta_stderr, fit.log_amplitude, fit.points_used, fit.window_lo, fit.window_hi
    );
    Ok(())
}

fn cmd_classify(config: &RunConfig, out: &Path, args: &ClassifyArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::start("classify", config);
    let species = config.ion_species()?;
    let state = io::read_final_state_csv(&args.input, species)?;
    if state.n_ions() != config.n_ions {
        return Err(CliError::config(format!(
            "input has {} ions but configuration expects {}",
            state.n_ions(),
            config.n_ions
        )));
    }
    let trap = config.trap()?;
    let omega_final = axial_frequency_from_voltage(&trap, config.v_end)?;
    let amps = zigzag_reference_amplitudes(config.n_ions, species, &trap, omega_final)?;
    let thresholds = kzmsim_core::ClassifierThresholds::default();
    let geometric = classify_configuration(&state, &amps, &thresholds)?;
    manifest.record("class", geometric.class.as_str());
    manifest.record("kink_count", geometric.kink_count as u64);
    manifest.record("input", args.input.display().to_string());

    let mut report = serde_json::Map::new();
    report.insert(
        "geometric".into(),
        serde_json::to_value(&geometric).map_err(|e| CliError::runtime(e.to_string()))?,
    );
    let mut fourier_note = String::new();
    if args.fourier {
        let geometry = ImageGeometry::experiment_default();
        let library =
            build_reference_templates(config.n_ions, species, &trap, omega_final, &geometry)?;
        let image = render_synthetic_image(&state, &geometry, None)?;
        let outcome = fourier_template_classify(&image, &library)?;
        match &outcome {
            FourierOutcome::Class {
                label,
                kink_count,
                ssr,
            } => {
                manifest.record("fourier_class", label.as_str());
                fourier_note = format!(
                    ", fourier: {} ({} kinks, ssr {ssr:.3e})",
                    label.as_str(),
                    kink_count
                );
            }
            FourierOutcome::Rejected => {
                manifest.record("fourier_class", "rejected");
                fourier_note = ", fourier: rejected".into();
            }
        }
        report.insert(
            "fourier".into(),
            serde_json::to_value(&outcome).map_err(|e| CliError::runtime(e.to_string()))?,
        );
    }
    let class_path = out.join("classification.json");
    write_json(&class_path, &report)?;
    manifest.add_output(&class_path);
    manifest.finish(out)?;
    println!(
        "class {} ({} kinks){fourier_note}",
        geometric.class.as_str(),
        geometric.kink_count
    );
    Ok(())
}

fn cmd_render(config: &RunConfig, out: &Path, args: &RenderArgs) -> Result<(), CliError> {
    use rand_chacha::rand_core::SeedableRng;
    let mut manifest = RunManifest::start("render", config);
    let state = io::read_final_state_csv(&args.input, config.ion_species()?)?;
    let geometry = ImageGeometry::experiment_default();
    let image = match args.shot_noise {
        Some(photons) => {
            if !(photons > 0.0) {
                return Err(CliError::config("--shot-noise must be positive"));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
            manifest.seed = Some(args.seed);
            manifest.record("shot_noise_photons", photons);
            render_synthetic_image(&state, &geometry, Some((photons, &mut rng)))?
        }
        None => render_synthetic_image(&state, &geometry, None)?,
    };
    let img_path = out.join(&args.name);
    std::fs::write(&img_path, image.to_pgm())
        .map_err(|e| CliError::runtime(format!("writing '{}': {e}", img_path.display())))?;
    manifest.add_output(&img_path);
    manifest.record("truncated", image.truncated);
    manifest.record("input", args.input.display().to_string());
    manifest.finish(out)?;
    println!(
        "rendered {}x{} image to {}{}",
        image.width_px,
        image.height_px,
        img_path.display(),
        if image.truncated {
            " (warning: ion outside field of view)"
        } else {
            ""
        }
    );
    Ok(())
}
