use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcfd_core::baseline::TrainConfig;
use pcfd_core::eval::sweep;
use pcfd_core::io::{
    load_calibration, load_scores, save_calibration, save_outcomes, save_report, save_scores,
    CalibrationArtifact, ScoreTable,
};
use pcfd_core::simulate::{
    simulate, SimulateConfig, DEFAULT_FEATURES, DEFAULT_LABELS, DEFAULT_NOISE, DEFAULT_PER_CLASS,
    DEFAULT_SEPARATION, DEFAULT_TRAIN_FRACTION,
};
use pcfd_core::synth::SynthConfig;
use pcfd_core::{calibrate, predict, Alpha, Error, LabelSpace, Result, SweepConfig, SweepReport};

/// Calibrated fault detection with split-conformal p-values.
#[derive(Debug, Parser)]
#[command(name = "pcfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute and store calibration nonconformity scores from a labeled score file.
    Calibrate {
        #[arg(long)]
        scores: PathBuf,
        /// Comma-separated normal labels; every other column is a fault label.
        #[arg(long, value_delimiter = ',', default_value = "Normal")]
        normal_labels: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build prediction sets and decisions for every row of a score file.
    Predict {
        /// Calibration artifact written by `calibrate`.
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        alpha: Alpha,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated random calibration/evaluation splits at one significance level.
    Evaluate {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long, default_value = "0.1")]
        alpha: Alpha,
    },
    /// Repeated random splits over a grid of significance levels.
    Sweep {
        #[command(flatten)]
        common: EvalArgs,
        /// `start:stop:step` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "0.1:0.9:0.1")]
        alphas: String,
    },
    /// Generate synthetic features, train the baseline classifier and write
    /// softmax scores for the held-out pool.
    Simulate(SimArgs),
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "Normal")]
    normal_labels: Vec<String>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    calib_ratio: f64,
    /// Worker threads for trials; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory for `trials.csv` and `summary.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LABELS.map(String::from))]
    labels: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "Normal")]
    normal_labels: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_PER_CLASS)]
    per_class: usize,
    #[arg(long, default_value_t = DEFAULT_FEATURES)]
    features: usize,
    #[arg(long, default_value_t = DEFAULT_SEPARATION)]
    separation: f64,
    #[arg(long, default_value_t = DEFAULT_NOISE)]
    noise: f64,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    train_fraction: f64,
    #[arg(long, default_value_t = TrainConfig::default().iterations)]
    iterations: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn load_labeled(path: &Path, normal: &[String]) -> Result<(LabelSpace, ScoreTable)> {
    let table = load_scores(path)?;
    let space = LabelSpace::with_normal(&table.labels, normal)?;
    Ok((space, table))
}

fn run_eval(common: &EvalArgs, alphas: Vec<Alpha>) -> Result<()> {
    if common.trials == 0 {
        return Err(Error::InvalidConfig("--trials must be at least 1".into()));
    }
    let (space, table) = load_labeled(&common.scores, &common.normal_labels)?;
    let config = SweepConfig::new(alphas, common.trials, common.seed).with_calib_ratio(common.calib_ratio);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let report = pool.install(|| sweep(&table.records, &space, &config))?;
    fs::create_dir_all(&common.out).map_err(|e| Error::Io {
        path: common.out.clone(),
        source: e,
    })?;
    save_report(common.out.join("trials.csv"), common.out.join("summary.csv"), &report)?;
    print_summary(&report);
    Ok(())
}

fn print_summary(report: &SweepReport) {
    println!("alpha     target   ecr_mean  ecr_sd    apss_mean apss_sd   type1     miscov_n");
    for s in &report.summaries {
        println!(
            "{:<9.6} {:<8.6} {:<9.6} {:<9.6} {:<9.6} {:<9.6} {:<9.6} {:.6}",
            s.alpha.value(),
            1.0 - s.alpha.value(),
            s.ecr_mean,
            s.ecr_sd,
            s.apss_mean,
            s.apss_sd,
            report.type1_mean(s.alpha),
            report.miscoverage_mean(s.alpha),
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate {
            scores,
            normal_labels,
            out,
        } => {
            let (space, table) = load_labeled(&scores, &normal_labels)?;
            let calibration = calibrate(&table.records, &space)?;
            let n = calibration.n();
            save_calibration(
                &out,
                &CalibrationArtifact {
                    label_space: space,
                    calibration,
                },
            )?;
            println!("calibrated on {n} records -> {}", out.display());
        }
        Command::Predict {
            calibration,
            scores,
            alpha,
            out,
        } => {
            let art = load_calibration(&calibration)?;
            let table = load_scores(&scores)?;
            if !table.matches(&art.label_space) {
                return Err(Error::LabelSpaceMismatch);
            }
            let outcomes = table
                .records
                .iter()
                .map(|r| predict(&art.calibration, r, &art.label_space, alpha))
                .collect::<Result<Vec<_>>>()?;
            save_outcomes(&out, &art.label_space, &outcomes)?;
            println!("{} outcomes -> {}", outcomes.len(), out.display());
        }
        Command::Evaluate { common, alpha } => run_eval(&common, vec![alpha])?,
        Command::Sweep { common, alphas } => run_eval(&common, Alpha::parse_grid(&alphas)?)?,
        Command::Simulate(a) => {
            let space = LabelSpace::with_normal(&a.labels, &a.normal_labels)?;
            let config = SimulateConfig {
                synth: SynthConfig {
                    n_per_class: a.per_class,
                    n_features: a.features,
                    class_separation: a.separation,
                    noise_scale: a.noise,
                    seed: a.seed,
                    label_space: space.clone(),
                },
                train_fraction: a.train_fraction,
                train: TrainConfig {
                    iterations: a.iterations,
                    learning_rate: a.learning_rate,
                },
            };
            let sim = simulate(&config)?;
            save_scores(&a.out, &space, &sim.records)?;
            println!(
                "trained on {} samples (final loss {:.6}{}), wrote {} score rows -> {}",
                sim.train_size,
                sim.model.final_loss,
                if sim.model.loss_non_increasing { "" } else { ", loss increased at some step" },
                sim.records.len(),
                a.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
