use anyhow::Result;
use clap::{Parser, Subcommand};
use ogm::commands::{self, BenchArgs, BuildArgs, SimulateArgs};

/// Vehicle-centered occupancy grid mapping and free-space extraction.
#[derive(Debug, Parser)]
#[command(name = "ogm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build maps from scan and odometry logs; writes polygons and map snapshots.
    Build(BuildArgs),
    /// Like `build` but only writes the per-frame free-space polygons.
    Freespace(BuildArgs),
    /// Simulate a laser scanner along a trajectory through a polygon world.
    Simulate(SimulateArgs),
    /// Compare sensor models and alignment strategies on simulated frames.
    Bench(BenchArgs),
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Build(a) => {
            let s = commands::build(&a)?;
            println!("{} frames ({} skipped), mean {:.2} ms per frame", s.frames, s.skipped, s.mean_frame_ms);
        }
        Command::Freespace(a) => {
            let s = commands::freespace(&a)?;
            println!("{} frames ({} skipped), mean {:.2} ms per frame", s.frames, s.skipped, s.mean_frame_ms);
        }
        Command::Simulate(a) => commands::simulate(&a)?,
        Command::Bench(a) => {
            commands::bench(&a)?;
        }
    }
    Ok(())
}
