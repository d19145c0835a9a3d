use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use possibility_lmb::sim::{monte_carlo, output_stem, recompute_dir, write_outputs, Case, Method, ScenarioConfig};

#[derive(Parser)]
#[command(name = "plmb", about = "Possibility LMB multi-sensor tracking simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte-Carlo simulations of a scenario and write per-step metrics.
    Run {
        #[arg(long)]
        case: Case,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// `key = value` overrides applied on top of the case defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write an SVG of OSPA and cardinality.
        #[arg(long)]
        plot: bool,
    },
    /// Recompute metrics from the stored truth and estimates in a directory.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> possibility_lmb::Result<()> {
    match cli.command {
        Command::Run {
            case,
            method,
            runs,
            seed,
            out,
            config,
            plot,
        } => {
            let mut cfg = ScenarioConfig::for_case(case);
            if let Some(path) = config {
                cfg.apply_text(&std::fs::read_to_string(path)?)?;
                cfg.case = case;
            }
            if let Some(r) = runs {
                cfg.mc_runs = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let mc = monte_carlo(&cfg, method)?;
            let stem = output_stem(&cfg, method);
            let path = write_outputs(&out, &stem, &mc)?;
            let tail = &mc.summary[mc.summary.len() / 2..];
            let mean = |f: fn(&possibility_lmb::sim::StepSummary) -> f64| {
                tail.iter().map(f).sum::<f64>() / tail.len() as f64
            };
            println!(
                "{}: {} runs, second-half mean OSPA {:.2} m, OSPA2 {:.2} m, cardinality {:.2} (truth {:.2})",
                path.display(),
                cfg.mc_runs,
                mean(|s| s.ospa_mean),
                mean(|s| s.ospa2_mean),
                mean(|s| s.card_est_mean),
                mean(|s| s.card_true_mean),
            );
            if plot {
                plot_summary(&out, &stem, &mc.summary)?;
            }
            Ok(())
        }
        Command::Metrics { input } => {
            for (stem, summary) in recompute_dir(&input)? {
                let path = input.join(format!("{stem}_metrics.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                for row in &summary {
                    w.serialize(row)?;
                }
                w.flush()?;
                let mean_ospa = summary.iter().map(|s| s.ospa_mean).sum::<f64>() / summary.len().max(1) as f64;
                println!("{stem}: mean OSPA {mean_ospa:.2} m over {} steps -> {}", summary.len(), path.display());
            }
            Ok(())
        }
    }
}

#[cfg(feature = "plot")]
fn plot_summary(
    out: &std::path::Path,
    stem: &str,
    summary: &[possibility_lmb::sim::StepSummary],
) -> possibility_lmb::Result<()> {
    let path = out.join(format!("{stem}.svg"));
    possibility_lmb::sim::plot_summaries(&path, stem, &[(stem, summary)])?;
    println!("{}", path.display());
    Ok(())
}

#[cfg(not(feature = "plot"))]
fn plot_summary(
    _: &std::path::Path,
    _: &str,
    _: &[possibility_lmb::sim::StepSummary],
) -> possibility_lmb::Result<()> {
    Err(possibility_lmb::Error::Argument("built without the `plot` feature".into()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
