use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dapinn::analytic::GridSpec;
use dapinn::experiment::{
    export_error_grid, load_run, parse_config, render_run, report, run_observed, ExperimentError,
    ModeSelection,
};
use dapinn::physics::Dimension;
use dapinn::trainer::{Mode, TraceRecord};

#[derive(Parser)]
#[command(
    name = "dapinn",
    about = "Interface-adaptive PINN experiments for Maxwell inverse problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train according to a JSON configuration and write run artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        mode: Option<ModeSelection>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print losses and estimates to stderr every N iterations.
        #[arg(long)]
        progress: Option<usize>,
    },
    /// Compare finished runs field by field.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Also write the comparison as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Absolute error grid of one field.
    ExportGrid {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        nt: Option<usize>,
        /// 2D only.
        #[arg(long)]
        ny: Option<usize>,
        /// 2D only: time slice (repeatable).
        #[arg(long)]
        t: Vec<f64>,
        /// Output directory (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Run {
            config,
            seed,
            iters,
            mode,
            out,
            progress,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| ExperimentError::File {
                path: config.clone(),
                message: e.to_string(),
            })?;
            let mut cfg = parse_config(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(k) = iters {
                cfg.train.iterations = k;
            }
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let every = progress.unwrap_or(0);
            let mut observe = |mode: Mode, r: &TraceRecord| {
                if every > 0 && (r.iter + 1).is_multiple_of(every) {
                    eprintln!(
                        "{} {:>7}  D {:.3e}  P {:.3e}  I {:.3e}  mu1 {:.4} eps1 {:.4} mu2 {:.4} eps2 {:.4} d {:.4}",
                        mode.name(),
                        r.iter + 1,
                        r.loss_d,
                        r.loss_p,
                        r.loss_i,
                        r.mu1,
                        r.eps1,
                        r.mu2,
                        r.eps2,
                        r.d
                    );
                }
            };
            for a in run_observed(&cfg, &mut observe)? {
                println!("{}", render_run(&a));
            }
            if cfg.mode == ModeSelection::Both {
                println!(
                    "comparison written to {}",
                    cfg.out.join("comparison.csv").display()
                );
            }
        }
        Command::Report { dirs, csv } => {
            let r = report(&dirs)?;
            print!("{}", r.render());
            if let Some(p) = csv {
                std::fs::write(&p, r.to_csv())?;
            }
        }
        Command::ExportGrid {
            run,
            field,
            nx,
            nt,
            ny,
            t,
            out,
        } => {
            let (config, _) = load_run(&run)?;
            let mut grid: GridSpec = config.grid.clone();
            if let Some(v) = nx {
                grid.nx = v;
            }
            if let Some(v) = nt {
                grid.nt = v;
            }
            if let Some(v) = ny {
                grid.ny = v;
            }
            if !t.is_empty() {
                grid.t_slices = t;
            }
            if config.case.dim() == Dimension::One && (grid.nt < 2 || grid.nx < 2) {
                return Err(ExperimentError::Config("--nt and --nx must be >= 2".into()));
            }
            let dir = out.unwrap_or(run.clone());
            std::fs::create_dir_all(&dir)?;
            for (name, csv) in export_error_grid(&run, &field, &grid)? {
                let path = dir.join(name);
                std::fs::write(&path, csv)?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}
