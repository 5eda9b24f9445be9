use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use blindfl::analysis;
use blindfl::quantizer::design_gaussian_quantizer;
use blindfl::rng::Streams;
use blindfl::runner::{self, ExperimentConfig, SweepAxis};

/// Blind over-the-air federated learning with low-resolution converters.
#[derive(Parser, Debug)]
#[command(name = "blindfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the master seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Run every loop sequentially in a fixed order.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment.
    Run { config: PathBuf },
    /// Run an experiment per value of one parameter.
    Sweep {
        config: PathBuf,
        /// K, dac_bits, adc_bits, noise_variance or scenario.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 1,5,40 or 1,2,inf.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Monte Carlo checks of the interference, distortion and noise statistics.
    ValidateStats {
        config: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.deterministic |= cli.deterministic;
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli, path: &Path) -> Result<()> {
    let config = load(cli, path)?;
    let (files, result) = runner::write_experiment(&config, &cli.out_dir)?;
    let output = result.with_context(|| format!("run aborted; partial results in {}", files.csv.display()))?;
    println!("wrote {}", files.csv.display());
    println!("wrote {}", files.sidecar.display());
    if let Some(terms) = &files.terms {
        println!("wrote {}", terms.display());
    }
    if let Some(acc) = output.final_accuracy() {
        println!("final test accuracy {acc:.4}");
    }
    Ok(())
}

fn sweep(cli: &Cli, path: &Path, axis: &str, values: &[String]) -> Result<()> {
    let config = load(cli, path)?;
    let axis: SweepAxis = axis.parse()?;
    let table = runner::write_sweep(&config, axis, values, &cli.out_dir)?;
    println!("wrote {}", table.display());
    Ok(())
}

fn validate_stats(cli: &Cli, path: &Path, trials: usize) -> Result<()> {
    let config = load(cli, path)?;
    let streams = Streams::new(config.seed);
    let exec = config.exec();
    let (m, k, n) = (config.workers, config.antennas, config.subcarriers);
    let eta = design_gaussian_quantizer(config.scenario.dac_bits().unwrap_or(1))?.eta();

    let mut reports = vec![analysis::interference_statistics(m, k, &config.channel, n, trials, &streams, exec)?];
    let (d1, d2) = analysis::distortion_statistics(m, k, eta, &config.channel, n, trials, &streams, exec)?;
    reports.extend([d1, d2]);
    if config.channel.noise_variance > 0.0 {
        reports.push(analysis::noise_dft_statistics(
            n,
            config.cyclic_prefix,
            config.channel.noise_variance,
            trials,
            &streams,
            exec,
        )?);
    }
    let correlation = match config.scenario.adc_bits() {
        Some(bits) => Some(analysis::adc_distortion_correlation(
            m,
            k,
            bits,
            &config.channel,
            n,
            config.cyclic_prefix,
            trials,
            8,
            &streams,
            exec,
        )?),
        None => None,
    };

    fs::create_dir_all(&cli.out_dir)?;
    let out = cli.out_dir.join("stats.json");
    let doc = serde_json::json!({ "reports": reports, "adc_distortion_correlation": correlation });
    fs::write(&out, serde_json::to_string_pretty(&doc)?)?;

    for r in &reports {
        println!(
            "{:<4} {:<10} mean ({:+.4}, {:+.4}) vs {:.4}   variance {:.5} vs {:.5}",
            if r.pass { "PASS" } else { "FAIL" },
            r.quantity,
            r.empirical_mean_re,
            r.empirical_mean_im,
            r.predicted_mean,
            r.empirical_variance,
            r.predicted_variance
        );
    }
    if let Some(c) = &correlation {
        println!("adc distortion correlation: max |rho| {:.4}, mean {:.4}", c.max_off_diagonal, c.mean_off_diagonal);
    }
    println!("wrote {}", out.display());
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        bail!("{failed} of {} statistics outside tolerance", reports.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Sweep { config, axis, values } => sweep(&cli, config, axis, values),
        Command::ValidateStats { config, trials } => validate_stats(&cli, config, *trials),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
