//! Command-line front end: dataset export, model training, evaluation runs,
//! sweeps, and complexity tables, all driven by a profile plus an optional
//! JSON overlay.

use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process;

use irsim::costmodel::write_complexity_csv;
use irsim::elmcore::ElmSpec;
use irsim::error::{SimError, SimResult};
use irsim::featurize::build_dataset;
use irsim::pilotplan::build_pilot_plan;
use irsim::pipeline::{
    run_pipeline, sweep, write_results_csv, ExperimentSpec, ExperimentSpecPatch, SweepAxis,
};
use irsim::airlink::Stage;

#[derive(Parser)]
#[command(
    name = "irsim",
    about = "Two-stage channel estimation benchmark for an IRS-assisted full-duplex ISAC system",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON overlay applied on top of the selected profile
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the profile/config value
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Scale preset the overlay starts from
    #[arg(long, global = true, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,

    /// Output file (eval, snr sweep, complexity) or directory (gen-data,
    /// train, dimension sweeps)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    /// Small dimensions and counts for fast turnaround
    Desk,
    /// Full-scale evaluation setup
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Build the pooled training dataset for every configured family and
    /// save each one as a binary file
    GenData,
    /// Train one network per configured family and save the weights
    Train,
    /// Train as needed, evaluate over the test SNR grid, and write the
    /// results CSV
    Eval,
    /// Evaluate along one axis; dimension axes re-derive the frame layout
    /// per value
    Sweep {
        /// Axis to sweep: snr, L, or M
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values; defaults to the test grid (snr) or a
        /// small dimension ladder (L, M)
        #[arg(long)]
        values: Option<String>,
    },
    /// Write the closed-form operation-count table for the configured system
    Complexity,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        process::exit(err.exit_code());
    }
}

fn build_spec(cli: &Cli) -> SimResult<ExperimentSpec> {
    let mut spec = match cli.profile {
        Profile::Desk => ExperimentSpec::desk_default(),
        Profile::Paper => ExperimentSpec::paper_default(),
    };
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)?;
        let patch: ExperimentSpecPatch = serde_json::from_str(&text)?;
        spec = spec.with_patch(&patch)?;
    }
    if let Some(seed) = cli.seed {
        spec.cfg.master_seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

fn parse_values(text: &str) -> SimResult<Vec<f64>> {
    text.split(',')
        .map(|piece| {
            let piece = piece.trim();
            if piece.eq_ignore_ascii_case("inf") {
                return Ok(f64::INFINITY);
            }
            piece.parse::<f64>().map_err(|_| {
                SimError::InvalidArgument(format!("cannot parse sweep value {piece:?}"))
            })
        })
        .collect()
}

fn write_to(out: Option<&PathBuf>, body: impl Fn(&mut dyn Write) -> SimResult<()>) -> SimResult<()> {
    match out {
        Some(path) => {
            let mut file = fs::File::create(path)?;
            body(&mut file)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)
        }
    }
}

fn run(cli: Cli) -> SimResult<()> {
    let spec = build_spec(&cli)?;
    match &cli.command {
        Command::GenData => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("datasets"));
            fs::create_dir_all(&dir)?;
            let plan = build_pilot_plan(&spec.cfg)?;
            for &family in &spec.families {
                let ds = build_dataset(
                    &spec.cfg,
                    &plan,
                    family,
                    &spec.train_snr_grid_db,
                    spec.v_count,
                    spec.q_count,
                    spec.aug_snr_db,
                    spec.cfg.master_seed,
                )?;
                let path = dir.join(format!("{}.ds", family.label()));
                ds.save(&path)?;
                eprintln!("wrote {} ({} samples)", path.display(), ds.samples.len());
            }
            Ok(())
        }
        Command::Train => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("models"));
            fs::create_dir_all(&dir)?;
            let plan = build_pilot_plan(&spec.cfg)?;
            for &family in &spec.families {
                let ds = build_dataset(
                    &spec.cfg,
                    &plan,
                    family,
                    &spec.train_snr_grid_db,
                    spec.v_count,
                    spec.q_count,
                    spec.aug_snr_db,
                    spec.cfg.master_seed,
                )?;
                let (inputs, targets) = ds.stacked();
                drop(ds);
                let n_hidden = match family.stage {
                    Stage::One => spec.n_hidden_stage1,
                    Stage::Two => spec.n_hidden_stage2,
                };
                let init_seed = spec.cfg.master_seed.wrapping_add(
                    irsim::featurize::Family::all()
                        .iter()
                        .position(|f| *f == family)
                        .unwrap() as u64,
                );
                let elm_spec = match family.stage {
                    Stage::One => {
                        ElmSpec::de_elm(inputs.ncols(), targets.ncols(), n_hidden, init_seed)
                    }
                    Stage::Two => {
                        ElmSpec::re_elm(inputs.ncols(), targets.ncols(), n_hidden, init_seed)
                    }
                };
                let (model, report) = irsim::elmcore::train(&elm_spec, &inputs, &targets)?;
                let path = dir.join(format!("{}.elm", family.label()));
                model.save(&path)?;
                eprintln!(
                    "wrote {} (solver {:?}, normal-equation residual {:.3e})",
                    path.display(),
                    report.solver,
                    report.normal_eq_residual
                );
            }
            Ok(())
        }
        Command::Eval => {
            let rows = run_pipeline(&spec)?;
            let out = cli.out.clone().or_else(|| spec.output_path.clone());
            write_to(out.as_ref(), |w| write_results_csv(&rows, w))
        }
        Command::Sweep { axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            let values = match values {
                Some(text) => parse_values(text)?,
                None => match axis {
                    SweepAxis::Snr => spec.test_snr_grid_db.clone(),
                    SweepAxis::L => vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
                    SweepAxis::M => vec![2.0, 4.0, 6.0, 8.0],
                },
            };
            let batches = sweep(&spec, axis, &values)?;
            if axis == SweepAxis::Snr {
                let rows = &batches[0].1;
                let out = cli.out.clone().or_else(|| spec.output_path.clone());
                write_to(out.as_ref(), |w| write_results_csv(rows, w))
            } else {
                let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("sweep"));
                fs::create_dir_all(&dir)?;
                for (label, rows) in &batches {
                    let path = dir.join(format!("sweep_{label}.csv"));
                    let mut file = fs::File::create(&path)?;
                    write_results_csv(rows, &mut file)?;
                    eprintln!("wrote {}", path.display());
                }
                Ok(())
            }
        }
        Command::Complexity => {
            let out = cli.out.clone().or_else(|| spec.output_path.clone());
            write_to(out.as_ref(), |w| {
                write_complexity_csv(&spec.cfg, (spec.n_hidden_stage1, spec.n_hidden_stage2), w)
            })
        }
    }
}
