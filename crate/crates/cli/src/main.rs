use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use stwave::analysis::ErrorNorms;
use stwave::problems::ProblemId;
use stwave::study::{self, StudyConfig};

#[derive(Parser)]
#[command(name = "stwave", version, about = "Space-time finite elements for the wave equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and print the error tables
    Study(ConfigArgs),
    /// Run one refinement level and print its errors
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// level to run
        #[arg(long, default_value_t = 0)]
        level: usize,
    },
    /// Check discrete energy conservation at the time nodes
    Energy(ConfigArgs),
    /// Render markdown tables from previously written CSV files
    Tables {
        /// prefix used when the CSV files were written
        #[arg(long)]
        input: PathBuf,
        /// write `<output>.md` instead of printing
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// flat `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<ProblemId>,
    /// temporal degree of cGP(k)
    #[arg(long)]
    k: Option<usize>,
    /// spatial degree of Q_r
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    /// `time_only` or `spacetime`
    #[arg(long)]
    refine: Option<String>,
    /// number of time steps on level 0
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    mesh_level0: Option<usize>,
    #[arg(long)]
    samples_per_slab: Option<usize>,
    #[arg(long)]
    time_quad_pts: Option<usize>,
    /// `ritz` or `interpolate`
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    cg_tol: Option<f64>,
    /// prefix for the CSV and markdown output files
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self, default_problem: ProblemId) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let mut cfg = StudyConfig::from_file(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                if let Some(p) = self.problem {
                    cfg.problem = p;
                }
                cfg
            }
            None => StudyConfig::for_problem(self.problem.unwrap_or(default_problem)),
        };
        let overrides: [(&str, Option<String>); 11] = [
            ("k", self.k.map(|v| v.to_string())),
            ("r", self.r.map(|v| v.to_string())),
            ("levels", self.levels.map(|v| v.to_string())),
            ("refine", self.refine.clone()),
            ("n0", self.n0.map(|v| v.to_string())),
            ("mesh_level0", self.mesh_level0.map(|v| v.to_string())),
            ("samples_per_slab", self.samples_per_slab.map(|v| v.to_string())),
            ("time_quad_pts", self.time_quad_pts.map(|v| v.to_string())),
            ("initial", self.initial.clone()),
            ("cg_tol", self.cg_tol.map(|v| v.to_string())),
            ("output", self.output.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_norms(label: &str, norms: &ErrorNorms) {
    println!("{label}:");
    for (name, v) in ErrorNorms::NAMES.iter().zip(norms.as_array()) {
        println!("  {name:<12} {v:.6e}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Study(args) => {
            let cfg = args.resolve(ProblemId::Poly)?;
            let report = study::run_study(&cfg)?;
            print!("{}", study::to_markdown(&report));
        }
        Command::Run { config, level } => {
            let cfg = config.resolve(ProblemId::Poly)?;
            let row = study::run_level(&cfg, level)?;
            println!(
                "level {} tau {:.6e} h {:.6e} steps {}",
                row.level,
                row.tau,
                row.h,
                cfg.steps(level)
            );
            print_norms("unlifted", &row.unlifted);
            print_norms("lifted", &row.lifted);
        }
        Command::Energy(args) => {
            let cfg = args.resolve(ProblemId::Energy)?;
            let report = study::run_energy(&cfg)?;
            println!("steps {}", report.steps);
            println!("initial energy {:.15e}", report.base[0]);
            println!("max relative drift (base)   {:.3e}", report.max_drift_base());
            println!("max relative drift (lifted) {:.3e}", report.max_drift_lifted());
        }
        Command::Tables { input, output } => {
            let report = study::read_tables(&input)
                .with_context(|| format!("reading tables with prefix {}", input.display()))?;
            let md = study::to_markdown(&report);
            match output {
                Some(prefix) => {
                    let (_, _, path) = study::table_paths(&prefix);
                    std::fs::write(&path, md).with_context(|| format!("writing {}", path.display()))?;
                }
                None => print!("{md}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
