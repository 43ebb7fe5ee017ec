//! `snmimo` command-line front end.
//!
//! Failures print one JSON object on stderr,
//! `{"error":{"category":"...","message":"..."}}`, and exit with the code
//! listed in [`exit_code`].

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use snmimo::harness::{emit_ppi, match_targets, run_experiment_with, sampling_reduction};
use snmimo::io::{
    header_path, plan_hash, read_coefficients, read_estimate_csv, read_iq, read_scene,
    write_coefficients, write_coefficients_csv, write_estimate_csv, write_iq, IqHeader,
    ToolkitConfig,
};
use snmimo::scene::ReceivedBaseband;
use snmimo::{acquire, add_noise, matrix_omp, synth_received, Error, Result};

#[derive(Parser)]
#[command(name = "snmimo", version, about = "Cognitive sub-Nyquist MIMO radar toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize received I/Q for a scene, one file per receiver.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// Output directory for rx_<q>.iq and rx_<q>.hdr.
        #[arg(long)]
        out: PathBuf,
        /// Add complex white Gaussian noise at this SNR.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the sub-Nyquist receiver on simulated I/Q.
    Acquire {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `simulate`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Coefficient blob to write.
        #[arg(long)]
        out: PathBuf,
        /// Also write the coefficients as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Recover targets from a coefficient blob.
    Recover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        coefficients: PathBuf,
        /// Estimate CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's max_targets.
        #[arg(long)]
        max_targets: Option<usize>,
    },
    /// Run the configured Monte-Carlo experiment.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Directory for metrics.json and metrics.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the sampling-reduction table for the configured mode.
    Reduction {
        #[arg(long)]
        config: PathBuf,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Render truth and estimates as a PPI SVG plus CSV.
    Ppi {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// SVG path; the CSV twin is written alongside.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit code per error category.
fn exit_code(category: &str) -> u8 {
    match category {
        "config" => 10,
        "input" => 11,
        "scene" => 12,
        "noise" => 13,
        "sampling" => 14,
        "solver" => 15,
        "format" => 16,
        "io" => 17,
        _ => 1,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn rx_path(dir: &Path, q: usize) -> PathBuf {
    dir.join(format!("rx_{q}.iq"))
}

fn simulate(config: &Path, scene: &Path, out: &Path, snr_db: Option<f64>, seed: u64) -> Result<()> {
    let cfg = ToolkitConfig::load(config)?;
    let setup = cfg.setup()?;
    let scene = read_scene(scene)?;
    let mut rx = synth_received(&scene, &setup.array, &setup.plan, setup.sample_rate)?;
    if let Some(snr) = snr_db {
        rx = add_noise(&rx, snr, seed)?;
    }
    create_dir(out)?;
    let hash = plan_hash(&setup.plan);
    for (q, samples) in rx.channels.iter().enumerate() {
        let header = IqHeader {
            kind: "received".into(),
            index: q,
            sample_rate: rx.sample_rate,
            pri: rx.pri,
            samples: samples.len(),
            plan_hash: hash.clone(),
        };
        write_iq(&rx_path(out, q), samples, &header)?;
    }
    println!("wrote {} receiver files to {}", rx.channels.len(), out.display());
    Ok(())
}

fn acquire_cmd(config: &Path, input: &Path, out: &Path, csv: Option<&Path>) -> Result<()> {
    let cfg = ToolkitConfig::load(config)?;
    let setup = cfg.setup()?;
    let hash = plan_hash(&setup.plan);
    let mut channels = Vec::with_capacity(setup.array.num_rx);
    let mut rate_pri = None;
    for q in 0..setup.array.num_rx {
        let path = rx_path(input, q);
        let (samples, header) = read_iq(&path)?;
        if header.plan_hash != hash {
            return Err(Error::Format(format!(
                "{} was synthesized with plan {} but the config describes plan {hash}",
                header_path(&path).display(),
                header.plan_hash
            )));
        }
        if header.kind != "received" || header.index != q {
            return Err(Error::Format(format!(
                "{} does not hold receiver {q}",
                header_path(&path).display()
            )));
        }
        rate_pri = Some((header.sample_rate, header.pri));
        channels.push(samples);
    }
    let (sample_rate, pri) = rate_pri.ok_or(Error::EmptyActiveSet)?;
    let ns = channels[0].len();
    let rx = ReceivedBaseband {
        channels,
        sample_rate,
        pri,
        pulse_support: vec![false; ns],
    };
    let tx: Vec<usize> = (0..setup.array.num_tx).collect();
    let rxs: Vec<usize> = (0..setup.array.num_rx).collect();
    let y = acquire(&rx, &setup.plan, &setup.adc, &setup.kappa, &tx, &rxs)?;
    write_coefficients(out, &y)?;
    if let Some(csv) = csv {
        write_coefficients_csv(csv, &y)?;
    }
    println!(
        "wrote {} coefficient matrices of {}x{} to {}",
        y.num_tx(),
        y.kappa.len(),
        y.num_rx(),
        out.display()
    );
    Ok(())
}

fn recover(config: &Path, coefficients: &Path, out: &Path, max_targets: Option<usize>) -> Result<()> {
    let cfg = ToolkitConfig::load(config)?;
    let setup = cfg.setup()?;
    let y = read_coefficients(coefficients)?;
    // Without a cap the residual tolerance alone stops the loop; K·Q bounds
    // the support before the joint refit can become rank deficient.
    let cap = max_targets
        .or(cfg.recovery.max_targets)
        .unwrap_or(y.kappa.len() * y.num_rx());
    let est = matrix_omp(&y, &setup.dict, cap, cfg.recovery.residual_tol)?;
    write_estimate_csv(out, &est, &setup.rgrid, &setup.agrid)?;
    println!("recovered {} targets to {}", est.len(), out.display());
    Ok(())
}

fn experiment(config: &Path, out: &Path) -> Result<()> {
    let cfg = ToolkitConfig::load(config)?;
    let exp = cfg.experiment_config()?;
    let setup = cfg.setup()?;
    let metrics = run_experiment_with(&setup, &exp)?;
    create_dir(out)?;
    let write = |name: &str, text: String| {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e })
    };
    write("metrics.json", metrics.to_json())?;
    write("metrics.csv", metrics.to_csv())?;
    println!(
        "{} trials: detection {:.3}, false alarm {:.3}, strict {:.3}",
        metrics.trials.len(),
        metrics.detection_rate,
        metrics.false_alarm_rate,
        metrics.strict_rate
    );
    Ok(())
}

fn reduction(config: &Path, json: bool) -> Result<()> {
    let cfg = ToolkitConfig::load(config)?;
    let setup = cfg.setup()?;
    let summary = sampling_reduction(cfg.array.mode, &setup.plan, &setup.adc);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?
        );
    } else {
        println!("{}", cfg.array.mode);
        println!("{summary}");
    }
    Ok(())
}

fn ppi(config: &Path, scene: &Path, estimate: &Path, out: &Path) -> Result<()> {
    let cfg = ToolkitConfig::load(config)?;
    let setup = cfg.setup()?;
    let truth = read_scene(scene)?;
    let est = read_estimate_csv(estimate)?;
    let report = match_targets(&truth, &est, &setup.rgrid, &setup.agrid);
    let csv = emit_ppi(&report, &truth, &est, &setup.rgrid, &setup.agrid, out)?;
    println!(
        "{} hits, {} false alarms, {} misses; wrote {} and {}",
        report.hits.len(),
        report.false_alarms.len(),
        report.misses.len(),
        out.display(),
        csv.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            scene,
            out,
            snr_db,
            seed,
        } => simulate(&config, &scene, &out, snr_db, seed),
        Command::Acquire {
            config,
            input,
            out,
            csv,
        } => acquire_cmd(&config, &input, &out, csv.as_deref()),
        Command::Recover {
            config,
            coefficients,
            out,
            max_targets,
        } => recover(&config, &coefficients, &out, max_targets),
        Command::Experiment { config, out } => experiment(&config, &out),
        Command::Reduction { config, json } => reduction(&config, json),
        Command::Ppi {
            config,
            scene,
            estimate,
            out,
        } => ppi(&config, &scene, &estimate, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            let report = serde_json::json!({
                "error": { "category": category, "message": e.to_string() }
            });
            eprintln!("{report}");
            ExitCode::from(exit_code(category))
        }
    }
}
