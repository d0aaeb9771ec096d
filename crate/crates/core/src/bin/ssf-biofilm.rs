use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ssf_biofilm::io::write_mesh_vtk;
use ssf_biofilm::mesh::check_admissibility;
use ssf_biofilm::reactions::{cfl_max_dt, validate_spec};
use ssf_biofilm::scenarios::{run_simulation, ScenarioConfig};
use ssf_biofilm::Error;

#[derive(Parser)]
#[command(version, about = "Multiphase biofilm simulator for slow sand filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write VTK snapshots plus a CSV time series.
    Run(Opts),
    /// Validate a config, its mesh and its reaction spec.
    Check(Opts),
    /// Write the scenario mesh as VTK.
    Mesh(Opts),
}

#[derive(Args)]
struct Opts {
    config: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    r1: Option<f64>,
    #[arg(long)]
    r2: Option<f64>,
    /// Lumped projection mass (`--lumped` or `--lumped false`).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    lumped: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Opts {
    fn config(&self) -> Result<ScenarioConfig, Error> {
        // An unreadable config file is a config error, not an output failure.
        let mut c = ScenarioConfig::load_unvalidated(&self.config).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            other => other,
        })?;
        if let Some(v) = self.dt {
            c.dt = v;
        }
        if let Some(v) = self.t_end {
            c.t_end = v;
            c.snapshot_times.retain(|t| *t <= v);
        }
        if let Some(v) = self.resolution {
            c.resolution = v;
        }
        if let Some(v) = self.gamma {
            c.params.gamma = v;
        }
        if let Some(v) = self.r1 {
            c.reactions.r1 = v;
        }
        if let Some(v) = self.r2 {
            c.reactions.r2 = v;
        }
        if let Some(v) = self.lumped {
            c.lumped = v;
        }
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidSpec(_) | Error::DegenerateMesh(_) | Error::InvalidArgument(_) => 2,
        Error::NewtonDiverged { .. } | Error::Solver(_) | Error::StepRejected(_) | Error::Domain(_) => 3,
        Error::InvariantViolation { .. } => 4,
        Error::Io { .. } => 1,
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run(o) => {
            let c = o.config()?;
            let s = run_simulation(&c)?;
            let last = s.reports.last().expect("step 0 is always reported");
            println!(
                "{}: {} steps to t = {:.3e}, max newton iterations {}, retries {}, violations {}",
                c.scenario.as_str(),
                last.step,
                last.t,
                s.reports.iter().map(|r| r.newton_iterations).max().unwrap_or(0),
                s.reports.iter().map(|r| r.retries).sum::<usize>(),
                s.reports.iter().map(|r| r.violations).sum::<usize>(),
            );
            println!("series: {}", s.csv.display());
            for p in &s.snapshots {
                println!("snapshot: {}", p.display());
            }
        }
        Command::Check(o) => {
            let c = o.config()?;
            let mesh = c.mesh()?;
            let spec = c.reactions.spec(c.params.rho_b, c.params.rho_f)?;
            let report = validate_spec(&spec)?;
            if !report.is_valid() {
                return Err(Error::InvalidSpec(report.violations.join("; ")));
            }
            println!("scenario {}: config ok", c.scenario.as_str());
            println!(
                "mesh: {} vertices, {} cells, {} edges, h = {:.4e}, admissibility {:.4e}",
                mesh.num_vertices(),
                mesh.num_cells(),
                mesh.num_edges(),
                mesh.max_diameter(),
                check_admissibility(&mesh)?
            );
            println!("reaction CFL bound {:.4e} s, dt = {:.4e} s", cfl_max_dt(&spec, spec.kb()), c.dt);
        }
        Command::Mesh(o) => {
            let c = o.config()?;
            let mesh = c.mesh()?;
            std::fs::create_dir_all(&c.output_dir).map_err(|e| Error::io(&c.output_dir, e))?;
            let path = c.output_dir.join(format!("{}_mesh.vtk", c.scenario.as_str()));
            write_mesh_vtk(&path, &mesh)?;
            println!("{} cells written to {}", mesh.num_cells(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
