use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tissuesim::estimate::{estimate, save_material_table};
use tissuesim::geometry::{refine_trajectories, RefineConfig};
use tissuesim::mpm::run_with;
use tissuesim::observation::ObservationSet;
use tissuesim::prep::{load_scene, normalize, save_scene, thicken, ThickenConfig, ViewFrame};
use tissuesim::service::{Server, SessionConfig};
use tissuesim::{render, Camera, CameraSpec, Error, RunConfig, TrajectoryBundle};

#[derive(Parser)]
#[command(name = "tissuesim", version, about = "Soft-tissue simulation, rendering and parameter estimation")]
struct Cli {
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Run on a single worker thread.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a scene into the simulation cube and thicken its surface.
    Prepare {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 1000)]
        layers: usize,
        #[arg(long, default_value_t = 0.25)]
        z_expand: f64,
        /// Largest particle count of the output.
        #[arg(long)]
        cap: Option<usize>,
        /// Camera whose centre and axes define the thickening rays
        /// (default: the standard top-down view).
        #[arg(long)]
        camera: Option<PathBuf>,
    },
    /// Run a simulation and write rendered frames plus diagnostics.
    Simulate {
        scene: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the step count of the configuration.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Estimate per-cluster material parameters from observed frames.
    Estimate {
        scene: PathBuf,
        observations: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Material table to write; the particle map goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Smooth tracked 3D trajectories.
    RefineTraj {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 8)]
        neighbors: usize,
        #[arg(long, default_value_t = RefineConfig::default().iterations)]
        iterations: usize,
        #[arg(long, default_value_t = RefineConfig::default().lambda_data)]
        lambda_data: f64,
        #[arg(long, default_value_t = RefineConfig::default().lambda_traj)]
        lambda_traj: f64,
    },
    /// Render a scene to a PNG.
    Render {
        scene: PathBuf,
        #[arg(long)]
        camera: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Host interactive sessions over a websocket.
    Serve {
        scene: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value_t = 10.0)]
        fps: f64,
    },
    /// Print the default run configuration.
    Config,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .init();
    let threads = if cli.deterministic { Some(1) } else { cli.threads };
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is set once");
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_validation));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Prepare { input, output, layers, z_expand, cap, camera } => {
            let view = match camera {
                Some(path) => ViewFrame::from_camera(&load_camera(path)?),
                None => ViewFrame::from_camera(&Camera::default_view()),
            };
            let config = ThickenConfig { layers: *layers, z_expand: *z_expand, seed: cli.seed, cap: *cap };
            prepare(input, output, &config, &view)
        }
        Command::Simulate { scene, config, out, steps } => simulate(scene, config.as_deref(), out, *steps),
        Command::Estimate { scene, observations, config, out } => {
            run_estimate(scene, observations, config.as_deref(), out)
        }
        Command::RefineTraj { input, output, neighbors, iterations, lambda_data, lambda_traj } => {
            let cfg = RefineConfig {
                iterations: *iterations,
                lambda_data: *lambda_data,
                lambda_traj: *lambda_traj,
                ..RefineConfig::default()
            };
            let bundle = TrajectoryBundle::load(input, *neighbors)?;
            let refined = refine_trajectories(&bundle, &cfg)?;
            refined.bundle.save(output)?;
            println!(
                "objective {:.6e} -> {:.6e} after {} steps",
                refined.objective[0],
                refined.objective.last().unwrap(),
                refined.objective.len() - 1
            );
            Ok(())
        }
        Command::Render { scene, camera, out } => {
            let camera = match camera {
                Some(path) => load_camera(path)?,
                None => Camera::default_view(),
            };
            let particles = match load_scene(scene) {
                Ok(p) => p,
                Err(Error::EmptyScene) => Vec::new(),
                Err(e) => return Err(e.into()),
            };
            render(&particles, &camera).image.save_png(out)?;
            println!("rendered {} particles to {}", particles.len(), out.display());
            Ok(())
        }
        Command::Serve { scene, config, host, port, fps } => {
            let run = load_config(config.as_deref())?;
            let scene = run.build_scene(load_scene(scene)?)?;
            let defaults = SessionConfig::default();
            let session = SessionConfig {
                camera: run.camera.build()?,
                sim: run.sim().clone(),
                fps: *fps,
                max_steps_per_frame: run.sim().frame_stride(),
                drag_radius: run.sim().drive_radius,
                ranges: run.estimation.bounds(),
                ..defaults
            };
            let server = Server::bind((host.as_str(), *port), scene, session)?;
            println!("listening on ws://{}/session", server.local_addr()?);
            std::io::stdout().flush()?;
            server.run()?;
            Ok(())
        }
        Command::Config => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
    }
}

fn load_camera(path: &Path) -> Result<Camera> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()).into());
    }
    let text = std::fs::read_to_string(path)?;
    let spec: CameraSpec = toml::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(spec.build()?)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn prepare(input: &Path, output: &Path, config: &ThickenConfig, view: &ViewFrame) -> Result<()> {
    let particles = load_scene(input)?;
    let (normalized, transform) = normalize(&particles)?;
    let (thick, report) = thicken(&normalized, config, view)?;
    save_scene(output, &thick)?;
    let meta = serde_json::json!({
        "scale": transform.scale,
        "translation": [transform.translation.x, transform.translation.y, transform.translation.z],
        "thicken": report,
    });
    std::fs::write(metadata_path(output), serde_json::to_string_pretty(&meta)? + "\n")?;
    println!("particles: {} in, {} out", particles.len(), thick.len());
    if report.capped() {
        println!("capped: {} of {} kept copies emitted", report.emitted, report.kept);
    }
    Ok(())
}

fn metadata_path(scene: &Path) -> PathBuf {
    let mut name = scene.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    scene.with_file_name(name)
}

fn simulate(scene_path: &Path, config: Option<&Path>, out: &Path, steps: Option<usize>) -> Result<()> {
    let run = load_config(config)?;
    let mut scene = run.build_scene(load_scene(scene_path)?)?;
    let drives = run.drives(&scene.particles)?;
    let camera = run.camera.build()?;
    let steps = steps.unwrap_or(run.simulation.steps);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut diag = csv::Writer::from_path(out.join("diagnostics.csv"))?;
    diag.write_record([
        "frame", "step", "time", "grid_mass", "particle_mass", "momentum_x", "momentum_y", "momentum_z", "max_velocity",
    ])?;
    let mut frames = 0;
    run_with(&mut scene, run.sim(), &drives, steps, run.sim().frame_stride(), |e| {
        render(e.particles, &camera).image.save_png(&out.join(tissuesim::observation::frame_file(e.frame)))?;
        frames += 1;
        if let Some(d) = e.diagnostics {
            let m = d.total_momentum;
            diag.write_record(
                [
                    e.frame.to_string(),
                    e.step.to_string(),
                    format!("{:.6}", e.time),
                    format!("{:e}", d.total_mass),
                    format!("{:e}", d.particle_mass),
                    format!("{:e}", m.x),
                    format!("{:e}", m.y),
                    format!("{:e}", m.z),
                    format!("{:e}", d.max_velocity),
                ]
                .iter(),
            )?;
        }
        Ok(())
    })?;
    diag.flush()?;
    println!("{frames} frames written to {}", out.display());
    Ok(())
}

fn run_estimate(scene_path: &Path, observations: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let run = load_config(config)?;
    let obs = ObservationSet::load(observations)?;
    let scene = run.build_scene(load_scene(scene_path)?)?;
    let drives = run.drives(&scene.particles)?;
    let result = estimate(&scene, &obs, &drives, run.sim(), &run.estimation)?;
    save_material_table(out, &result.field, &result.cluster_params)?;
    for r in &result.rounds {
        println!("round {}: {} frames, loss {:.6e}", r.round, r.frames, r.best_loss());
    }
    for (c, v) in result.cluster_values.iter().enumerate() {
        println!("cluster {c}: mu_e {:.4e} eta_v {:.4e} gamma_v {:.4e}", v[0], v[1], v[2]);
    }
    println!("{} simulations", result.simulations);
    if result.budget_exhausted {
        println!("simulation budget exhausted; the table holds the best parameters found");
    }
    Ok(())
}
