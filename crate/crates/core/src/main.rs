use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ffmap::app::{evaluate_files, run_to_dir, write_simulation, RunInputs};
use ffmap::config::Config;
use ffmap::eval::metrics_table;
use ffmap::io::pgm::read_grid;
use ffmap::oracle::scene_file::Scenario;
use ffmap::oracle::standard_scenario;

#[derive(Parser)]
#[command(name = "ffmap", version, about = "Furniture-free indoor mapping from a vertical 3D lidar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify frames, fuse them and write the labeled cloud and grids.
    Run(RunArgs),
    /// Write simulated frames, trajectory and scene for a scenario.
    Simulate(SimulateArgs),
    /// Score a labeled cloud against ground truth.
    Evaluate(EvaluateArgs),
    /// Cell agreement between two occupancy grids.
    Gridcmp { a: PathBuf, b: PathBuf },
}

#[derive(Args)]
struct SourceArgs {
    /// Scene file to simulate.
    #[arg(long, conflicts_with_all = ["standard", "frames"])]
    scene: Option<PathBuf>,
    /// Use the built-in two-room scenario.
    #[arg(long, conflicts_with = "frames")]
    standard: bool,
    /// Directory of timestamp-named sensor-frame PLYs.
    #[arg(long, requires = "trajectory")]
    frames: Option<PathBuf>,
    /// Trajectory file: `t tx ty tz qx qy qz qw` per line.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct ParamArgs {
    /// Parameter file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    z_floor: Option<f64>,
    #[arg(long)]
    dist_tol: Option<f64>,
    #[arg(long)]
    angle_tol: Option<f64>,
    #[arg(long)]
    min_height: Option<f64>,
    #[arg(long)]
    d_threshold: Option<f64>,
    #[arg(long)]
    min_points: Option<usize>,
    #[arg(long)]
    resample_count: Option<usize>,
    #[arg(long)]
    sigma_th: Option<f64>,
    #[arg(long)]
    min_lines_per_wall: Option<usize>,
    #[arg(long)]
    vertical_tol: Option<f64>,
    #[arg(long)]
    delta_door: Option<f64>,
    #[arg(long)]
    h_min: Option<f64>,
    #[arg(long)]
    wall_band: Option<f64>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    min_hits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any parameter as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ParamArgs {
    fn config(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        apply!(
            z_floor,
            dist_tol,
            angle_tol,
            min_height,
            d_threshold,
            min_points,
            resample_count,
            sigma_th,
            min_lines_per_wall,
            vertical_tol,
            delta_door,
            h_min,
            wall_band,
            resolution,
            min_hits,
            seed
        );
        for s in &self.sets {
            let Some((k, v)) = s.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{s}`");
            };
            c.set(k.trim(), v.trim()).map_err(anyhow::Error::msg)?;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses all cores. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, conflicts_with = "standard")]
    scene: Option<PathBuf>,
    #[arg(long)]
    standard: bool,
    #[arg(long, default_value = "sim")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Largest allowed distance between corresponding points.
    #[arg(long, default_value_t = 1e-4)]
    match_tol: f64,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn scenario(scene: &Option<PathBuf>, standard: bool) -> Result<Scenario> {
    match (scene, standard) {
        (Some(p), _) => Ok(Scenario::load(p)?),
        (None, true) => Ok(standard_scenario()),
        (None, false) => bail!("one of --scene, --standard or --frames is required"),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.params.config()?;
    let inputs = match (&args.source.frames, &args.source.trajectory) {
        (Some(dir), Some(traj)) => RunInputs::load_recorded(dir, traj, &cfg)
            .with_context(|| format!("loading frames from {}", dir.display()))?,
        _ => RunInputs::simulate(&scenario(&args.source.scene, args.source.standard)?)?,
    };
    let report = run_to_dir(&inputs, &cfg, args.jobs, &args.out)?;
    let t = report.output.timing;
    println!(
        "{} frames classified, {} fused, {} points; wall stage {:.2} ms/frame (std {:.2})",
        report.output.frames.len(),
        report.output.map.frames_used.len(),
        report.output.map.cloud.len(),
        t.mean,
        t.std
    );
    if let Some(m) = &report.metrics {
        print!("{}", metrics_table(m));
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Simulate(a) => {
            let n = write_simulation(&a.out, &scenario(&a.scene, a.standard)?)?;
            println!("wrote {n} frames to {}", a.out.display());
            Ok(())
        }
        Command::Evaluate(a) => {
            let table = metrics_table(&evaluate_files(&a.pred, &a.truth, a.match_tol)?);
            match a.out {
                Some(p) => std::fs::write(&p, table).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{table}"),
            }
            Ok(())
        }
        Command::Gridcmp { a, b } => {
            let (ga, gb) = (read_grid(&a)?, read_grid(&b)?);
            match ga.agreement(&gb) {
                Some(v) => println!("{:.2}", 100.0 * v),
                None => bail!("grids differ in size, resolution or origin"),
            }
            Ok(())
        }
    }
}
